"""Command-line interface.

Five subcommands cover the pipeline: ``simulate`` writes raw session
logs, ``dataset`` the aggregated classification table, ``identify`` the
learned network plus its held-out accuracy, ``transfer`` the full loop
trace and behavior curves, and ``report`` a human-readable summary of a
trace. Outputs land in one directory per run named by the config hash
and seed, so identical invocations overwrite themselves with identical
bytes.

Exit codes: 0 success, 2 configuration error, 3 data validation error,
4 unexpected anomaly. Summary lines are stable ``key=value`` pairs on
stdout; errors go to stderr with stable one-line prefixes.
"""

from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import click

from . import __version__
from .behavior_data import (
    PlayerId,
    to_dataset,
    validate_session,
    write_dataset_csv,
    write_session_jsonl,
)
from .config import (
    ExperimentConfig,
    load_config,
    resolve_profiles,
    run_directory,
    serialize_config,
)
from .errors import ConfigError, DataValidationError
from .game_domain import run_session
from .seeds import ROLE_EXPERT, ROLE_LEARNER, STREAM_SESSION, derive_seed
from .transfer_loop import (
    TransferConfig,
    TransferTrace,
    curves_to_csv,
    curves_from_trace,
    run_identification,
    run_transfer,
    trace_from_json,
    trace_to_csv,
    trace_to_json,
)
from .bayes import write_bayesnet

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_ANOMALY = 4


def _fail(prefix: str, message: str, code: int) -> None:
    click.echo(f"error: {prefix}: {message}", err=True)
    sys.exit(code)


def _load(config_path: str, seed: int | None, out: str | None) -> ExperimentConfig:
    config = load_config(config_path)
    if seed is not None:
        config = replace(config, seed=seed)
    if out is not None:
        config = replace(config, output_dir=out)
    return config


def _prepare_run_dir(config: ExperimentConfig) -> Path:
    run_dir = run_directory(config)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(serialize_config(config), encoding="utf-8")
    return run_dir


def _echo(quiet: bool, line: str) -> None:
    if not quiet:
        click.echo(line)


def _simulate_sessions(config: ExperimentConfig):
    expert, learner = resolve_profiles(config)
    logs = [
        run_session(
            config.scenario, expert, PlayerId.ID1,
            derive_seed(config.seed, STREAM_SESSION, 0, ROLE_EXPERT),
        ),
        run_session(
            config.scenario, learner, PlayerId.ID2,
            derive_seed(config.seed, STREAM_SESSION, 0, ROLE_LEARNER),
        ),
    ]
    for log in logs:
        violations = validate_session(log)
        if violations:
            first = violations[0]
            raise DataValidationError(
                f"{log.player.value} session, tick {first.tick}, "
                f"rule {first.rule}: {first.message} "
                f"({len(violations)} violation(s) total)"
            )
    return logs


def _common(fn):
    fn = click.option("--quiet", is_flag=True, help="Suppress the summary line.")(fn)
    fn = click.option("--out", type=click.Path(), default=None,
                      help="Override the configured output directory.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Override the configured master seed.")(fn)
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(), help="Path to the JSON config.")(fn)
    return fn


def _guarded(fn):
    """Map package errors onto the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            fn(*args, **kwargs)
        except ConfigError as exc:
            _fail("config", "; ".join(exc.violations), EXIT_CONFIG)
        except DataValidationError as exc:
            _fail("data", str(exc), EXIT_DATA)
        except click.exceptions.Exit:
            raise
        except Exception as exc:  # never expected; defensive
            _fail("anomaly", f"{type(exc).__name__}: {exc}", EXIT_ANOMALY)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group()
@click.version_option(version=__version__, prog_name="skilltransfer")
def main() -> None:
    """Behavior identification and transfer between two simulated players."""


@main.command()
@_common
@_guarded
def simulate(config_path: str, seed: int | None, out: str | None, quiet: bool) -> None:
    """Write one session log per player."""
    config = _load(config_path, seed, out)
    logs = _simulate_sessions(config)
    run_dir = _prepare_run_dir(config)
    names = {PlayerId.ID1: "expert.jsonl", PlayerId.ID2: "learner.jsonl"}
    for log in logs:
        write_session_jsonl(log, run_dir / names[log.player])
    ticks = config.scenario.ticks_per_session
    _echo(quiet, f"simulate files=2 ticks_per_session={ticks} run_dir={run_dir}")


@main.command()
@_common
@_guarded
def dataset(config_path: str, seed: int | None, out: str | None, quiet: bool) -> None:
    """Write the aggregated classification table."""
    config = _load(config_path, seed, out)
    logs = _simulate_sessions(config)
    data = to_dataset(logs, config.dataset.window)
    run_dir = _prepare_run_dir(config)
    write_dataset_csv(data, run_dir / "dataset.csv")
    _echo(quiet, f"dataset rows={data.n_rows} window={config.dataset.window} run_dir={run_dir}")


@main.command()
@_common
@_guarded
def identify(config_path: str, seed: int | None, out: str | None, quiet: bool) -> None:
    """Learn the identity classifier and report held-out accuracy."""
    config = _load(config_path, seed, out)
    expert, learner = resolve_profiles(config)
    result = run_identification(
        expert,
        learner,
        config.scenario,
        window=config.dataset.window,
        split_ratio=config.dataset.split_ratio,
        learn=config.learning,
        seed=config.seed,
        iteration=0,
    )
    run_dir = _prepare_run_dir(config)
    write_bayesnet(result.network, run_dir / "network.json")
    summary = (
        f"identify accuracy={result.accuracy!r} "
        f"attributes={'|'.join(a.column for a in result.attributes)} "
        f"train_rows={result.train_rows} test_rows={result.test_rows} "
        f"run_dir={run_dir}"
    )
    (run_dir / "identify.txt").write_text(summary + "\n", encoding="utf-8")
    _echo(quiet, summary)


def _transfer_config(config: ExperimentConfig) -> TransferConfig:
    return TransferConfig(
        scenario=config.scenario,
        learning_rate=config.transfer.learning_rate,
        stop_threshold=config.transfer.stop_threshold,
        max_iterations=config.transfer.max_iterations,
        window=config.dataset.window,
        split_ratio=config.dataset.split_ratio,
        learn=config.learning,
    )


@main.command()
@_common
@_guarded
def transfer(config_path: str, seed: int | None, out: str | None, quiet: bool) -> None:
    """Run the transfer loop; write its trace and behavior curves."""
    config = _load(config_path, seed, out)
    expert, learner = resolve_profiles(config)
    trace = run_transfer(expert, learner, _transfer_config(config), config.seed)
    if not trace.iterations:
        raise RuntimeError("transfer loop produced no iterations")
    run_dir = _prepare_run_dir(config)
    (run_dir / "trace.csv").write_text(trace_to_csv(trace), encoding="utf-8")
    (run_dir / "trace.json").write_text(trace_to_json(trace), encoding="utf-8")
    (run_dir / "curves.csv").write_text(
        curves_to_csv(curves_from_trace(trace)), encoding="utf-8"
    )
    last = trace.iterations[-1]
    _echo(
        quiet,
        f"transfer iterations={len(trace.iterations)} "
        f"terminal_reason={trace.terminal_reason.value} "
        f"final_accuracy={last.accuracy!r} final_divergence={last.divergence!r} "
        f"run_dir={run_dir}",
    )


def _render_report(trace: TransferTrace) -> str:
    lines = [
        "transfer trace",
        f"  iterations:      {len(trace.iterations)}",
        f"  terminal reason: {trace.terminal_reason.value}",
        "",
        "  iter  accuracy  divergence  targeted",
    ]
    for record in trace.iterations:
        targeted = "|".join(a.column for a in record.targeted_attributes) or "-"
        lines.append(
            f"  {record.iteration:>4}  {record.accuracy:>8.4f}  "
            f"{record.divergence:>10.6f}  {targeted}"
        )
    first, last = trace.iterations[0], trace.iterations[-1]
    lines.extend(
        [
            "",
            f"  accuracy:   {first.accuracy:.4f} -> {last.accuracy:.4f}",
            f"  divergence: {first.divergence:.6f} -> {last.divergence:.6f}",
        ]
    )
    return "\n".join(lines) + "\n"


@main.command()
@_common
@click.option(
    "--trace", "trace_path", type=click.Path(), default=None,
    help="Trace JSON to summarize (default: the run directory's trace).",
)
@_guarded
def report(
    config_path: str, seed: int | None, out: str | None, quiet: bool,
    trace_path: str | None,
) -> None:
    """Summarize a transfer trace in plain text."""
    config = _load(config_path, seed, out)
    run_dir = run_directory(config)
    source = Path(trace_path) if trace_path else run_dir / "trace.json"
    if not source.is_file():
        raise ConfigError([f"trace: file not found: {source} (run `transfer` first?)"])
    trace = trace_from_json(source.read_text(encoding="utf-8"))
    if not trace.iterations:
        raise DataValidationError(f"trace {source} records no iterations")
    run_dir.mkdir(parents=True, exist_ok=True)
    text = _render_report(trace)
    (run_dir / "report.txt").write_text(text, encoding="utf-8")
    if not quiet:
        click.echo(text, nl=False)


if __name__ == "__main__":
    main()
