"""Closed-loop behavior transfer between the two players.

Each iteration simulates one fresh session per player under the current
stimulus schedule, relearns the identity classifier from scratch, and
checks whether it still tells the players apart. While it can, the
learner's distributions are pulled toward the expert's on exactly the
condition keys where they disagree about the discriminative behaviors,
and the schedule is rebuilt to keep eliciting those behaviors. The loop
stops when held-out accuracy drops to the configured threshold or the
class node loses its Markov blanket.

Divergence bookkeeping: the reported number is the mean over condition
keys of the Kullback-Leibler divergence from the learner's distribution
to the expert's. Expert-side zero probabilities are floored at 1e-300
inside the logarithm only, which keeps the number finite while
preserving the contraction property that a nudge with rate eta scales
the divergence of an affected key by at most (1 - eta).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from collections.abc import Sequence

from .bayes import (
    BayesNet,
    LearnConfig,
    accuracy,
    fit_cpts,
    learn_structure,
    markov_blanket,
)
from .behavior_data import (
    CLASS_COLUMN,
    FEASIBILITY_REQUIREMENTS,
    AttributeId,
    PlayerId,
    split,
    to_dataset,
)
from .game_domain import (
    ConditionKey,
    Distribution,
    PlayerProfile,
    Scenario,
    boost_scenario,
    profile_from_json,
    run_session,
)
from .seeds import (
    ROLE_EXPERT,
    ROLE_LEARNER,
    STREAM_LEARN,
    STREAM_SESSION,
    STREAM_SPLIT,
    derive_seed,
)

_LOG_FLOOR = 1e-300
_DIFFERENCE_EPS = 1e-9
_SCHEDULE_FLOOR = 0.8


@dataclass(frozen=True)
class TransferConfig:
    """Loop parameters. ``scenario`` is the unboosted base world."""

    scenario: Scenario
    learning_rate: float = 0.5
    stop_threshold: float = 0.55
    max_iterations: int = 50
    window: int = 5
    split_ratio: float = 0.5
    learn: LearnConfig = field(default_factory=LearnConfig)

    def __post_init__(self) -> None:
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError(
                f"learning_rate must be inside (0, 1], got {self.learning_rate}"
            )
        if not 0.5 <= self.stop_threshold < 1.0:
            raise ValueError(
                f"stop_threshold must be inside [0.5, 1), got {self.stop_threshold}"
            )
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError(
                f"split_ratio must be inside (0, 1), got {self.split_ratio}"
            )


@dataclass(frozen=True)
class StimulusSchedule:
    """A scenario with feasibility stimuli raised for targeted behaviors."""

    scenario: Scenario
    targeted_attributes: frozenset[AttributeId]


class TerminalReason(Enum):
    THRESHOLD_REACHED = "threshold_reached"
    MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class IterationRecord:
    """State of one loop iteration, snapshotted before any nudge."""

    iteration: int
    accuracy: float
    divergence: float
    targeted_attributes: tuple[AttributeId, ...]
    nudged_keys: tuple[ConditionKey, ...]
    learner_profile: PlayerProfile


@dataclass(frozen=True)
class TransferTrace:
    expert_profile: PlayerProfile
    iterations: tuple[IterationRecord, ...]
    terminal_reason: TerminalReason


@dataclass(frozen=True)
class IdentificationResult:
    """Outcome of one simulate/learn/evaluate round."""

    network: BayesNet
    accuracy: float
    attributes: tuple[AttributeId, ...]
    train_rows: int
    test_rows: int


def discriminative_attributes(net: BayesNet) -> frozenset[AttributeId]:
    """Attributes in the class node's Markov blanket."""
    blanket = markov_blanket(net.dag, CLASS_COLUMN)
    return frozenset(AttributeId.from_column(column) for column in blanket)


def run_identification(
    expert: PlayerProfile,
    learner: PlayerProfile,
    scenario: Scenario,
    *,
    window: int = 5,
    split_ratio: float = 0.5,
    learn: LearnConfig | None = None,
    seed: int = 0,
    iteration: int = 0,
) -> IdentificationResult:
    """Simulate both players once, learn the classifier, and score it.

    All randomness derives from ``seed`` and ``iteration`` through the
    documented stream paths, so repeated calls are bit-identical.
    """
    learn = learn or LearnConfig()
    logs = [
        run_session(
            scenario, expert, PlayerId.ID1,
            derive_seed(seed, STREAM_SESSION, iteration, ROLE_EXPERT),
        ),
        run_session(
            scenario, learner, PlayerId.ID2,
            derive_seed(seed, STREAM_SESSION, iteration, ROLE_LEARNER),
        ),
    ]
    data = to_dataset(logs, window)
    train, test = split(data, split_ratio, derive_seed(seed, STREAM_SPLIT, iteration))
    dag = learn_structure(
        train, replace(learn, seed=derive_seed(seed, STREAM_LEARN, iteration))
    )
    net = fit_cpts(dag, train, learn.smoothing)
    return IdentificationResult(
        network=net,
        accuracy=accuracy(net, test),
        attributes=tuple(sorted(discriminative_attributes(net), key=lambda a: a.value)),
        train_rows=train.n_rows,
        test_rows=test.n_rows,
    )


def _kl(learner_dist: Distribution, expert_dist: Distribution) -> float:
    total = 0.0
    for behavior, q in learner_dist.items():
        p = expert_dist.get(behavior, 0.0)
        total += q * (math.log(q) - math.log(max(p, _LOG_FLOOR)))
    return max(total, 0.0)


def divergence(learner: PlayerProfile, expert: PlayerProfile) -> float:
    """Mean per-key KL divergence from learner to expert."""
    return sum(
        _kl(learner.distributions[key], expert.distributions[key])
        for key in ConditionKey
    ) / len(ConditionKey)


def nudge_profile(
    learner: PlayerProfile,
    expert: PlayerProfile,
    keys: Sequence[ConditionKey],
    eta: float,
) -> PlayerProfile:
    """Blend the learner toward the expert on the given condition keys.

    Each affected distribution becomes (1 - eta) * learner + eta * expert.
    With eta = 1 the key copies the expert outright; a key whose two
    distributions already match is left untouched, so an expert learner
    is a fixed point.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must be inside (0, 1], got {eta}")
    if set(learner.distributions) != set(expert.distributions):
        raise ValueError("profiles declare different condition keys")
    new_distributions = {k: dict(d) for k, d in learner.distributions.items()}
    for key in keys:
        q = learner.distributions[key]
        p = expert.distributions[key]
        if q == p:
            continue
        mixed: Distribution = {}
        for behavior in sorted(set(q) | set(p), key=lambda a: a.value):
            value = (1.0 - eta) * q.get(behavior, 0.0) + eta * p.get(behavior, 0.0)
            if value > 0.0:
                mixed[behavior] = value
        total = sum(mixed.values())
        if abs(total - 1.0) >= _DIFFERENCE_EPS:
            raise ValueError(
                f"nudged distribution for {key.value} sums to {total!r}; "
                "inputs were not normalized"
            )
        new_distributions[key] = {b: v / total for b, v in mixed.items()}
    return PlayerProfile(profile_id=learner.profile_id, distributions=new_distributions)


#: Stimulus fields that must hold for each behavior to be feasible.
#: Unlisted attributes need nothing raised (location must keep both values
#: reachable, so it is deliberately absent).
_FEASIBILITY_FIELDS: dict[AttributeId, tuple[str, ...]] = {
    **{a: fields for a, fields in FEASIBILITY_REQUIREMENTS.items()},
    AttributeId.FIGHTING: ("obstacle_present",),
    AttributeId.OBSTACLE: ("obstacle_present",),
}


def build_schedule(
    targets: frozenset[AttributeId] | set[AttributeId], base: Scenario
) -> StimulusSchedule:
    """Raise the stimuli that make the targeted behaviors feasible.

    Each targeted behavior's required stimulus probabilities are lifted
    to at least 0.8 over the base scenario; untargeted stimuli are left
    alone and the location probability is never touched.
    """
    fields_to_boost: set[str] = set()
    for attribute in targets:
        fields_to_boost.update(_FEASIBILITY_FIELDS.get(attribute, ()))
    return StimulusSchedule(
        scenario=boost_scenario(base, fields_to_boost, _SCHEDULE_FLOOR),
        targeted_attributes=frozenset(targets),
    )


def _keys_to_nudge(
    learner: PlayerProfile,
    expert: PlayerProfile,
    targets: Sequence[AttributeId],
) -> tuple[ConditionKey, ...]:
    """Condition keys where the two profiles disagree on a targeted behavior."""
    keys = []
    for key in ConditionKey:
        q = learner.distributions[key]
        p = expert.distributions[key]
        for attribute in targets:
            if abs(q.get(attribute, 0.0) - p.get(attribute, 0.0)) > _DIFFERENCE_EPS:
                keys.append(key)
                break
    return tuple(keys)


def run_transfer(
    expert: PlayerProfile,
    learner: PlayerProfile,
    config: TransferConfig,
    seed: int = 0,
) -> TransferTrace:
    """Run the transfer loop to termination.

    Per iteration: simulate one session per player under the current
    schedule, relearn and score the classifier on the held-out half,
    record accuracy and divergence, and either stop (threshold reached or
    empty blanket) or nudge the learner and rebuild the schedule from the
    newly discriminative attributes. Fully deterministic given the seed.
    """
    schedule = StimulusSchedule(scenario=config.scenario, targeted_attributes=frozenset())
    records: list[IterationRecord] = []
    reason = TerminalReason.MAX_ITERATIONS
    for iteration in range(1, config.max_iterations + 1):
        result = run_identification(
            expert,
            learner,
            schedule.scenario,
            window=config.window,
            split_ratio=config.split_ratio,
            learn=config.learn,
            seed=seed,
            iteration=iteration,
        )
        gap = divergence(learner, expert)
        finished = result.accuracy <= config.stop_threshold or not result.attributes
        nudged: tuple[ConditionKey, ...] = ()
        if not finished:
            nudged = _keys_to_nudge(learner, expert, result.attributes)
        records.append(
            IterationRecord(
                iteration=iteration,
                accuracy=result.accuracy,
                divergence=gap,
                targeted_attributes=result.attributes,
                nudged_keys=nudged,
                learner_profile=learner,
            )
        )
        if finished:
            reason = TerminalReason.THRESHOLD_REACHED
            break
        if nudged:
            learner = nudge_profile(learner, expert, nudged, config.learning_rate)
        schedule = build_schedule(frozenset(result.attributes), config.scenario)
    return TransferTrace(
        expert_profile=expert, iterations=tuple(records), terminal_reason=reason
    )


# --- behavioral curves ----------------------------------------------------

@dataclass(frozen=True)
class CurveRow:
    player: PlayerId
    iteration: int
    values: dict[ConditionKey, float]


@dataclass(frozen=True)
class CurveTable:
    """Per-key probability of each key's signature behavior over time.

    The tracked behavior of a key is the mode of the expert's
    distribution there (ties to the lowest attribute position). The
    expert's row repeats unchanged each iteration; the learner's moves as
    nudges land.
    """

    tracked: dict[ConditionKey, AttributeId]
    rows: tuple[CurveRow, ...]


def _mode(dist: Distribution) -> AttributeId:
    best = None
    best_p = -1.0
    for behavior in sorted(dist, key=lambda a: a.value):
        if dist[behavior] > best_p:
            best, best_p = behavior, dist[behavior]
    assert best is not None
    return best


def behavioral_curves(
    expert: PlayerProfile, learner_snapshots: Sequence[PlayerProfile]
) -> CurveTable:
    """Curve table over the recorded learner snapshots."""
    tracked = {key: _mode(expert.distributions[key]) for key in ConditionKey}
    rows: list[CurveRow] = []
    for iteration, snapshot in enumerate(learner_snapshots, start=1):
        for player, profile in ((PlayerId.ID1, expert), (PlayerId.ID2, snapshot)):
            rows.append(
                CurveRow(
                    player=player,
                    iteration=iteration,
                    values={
                        key: profile.distributions[key].get(tracked[key], 0.0)
                        for key in ConditionKey
                    },
                )
            )
    return CurveTable(tracked=tracked, rows=tuple(rows))


def curves_from_trace(trace: TransferTrace) -> CurveTable:
    return behavioral_curves(
        trace.expert_profile, [r.learner_profile for r in trace.iterations]
    )


# --- persistence ----------------------------------------------------------

def trace_to_csv(trace: TransferTrace) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        ["iteration", "accuracy", "divergence", "targeted_attributes", "terminal_reason"]
    )
    last = len(trace.iterations) - 1
    for i, record in enumerate(trace.iterations):
        writer.writerow(
            [
                record.iteration,
                repr(record.accuracy),
                repr(record.divergence),
                "|".join(a.column for a in record.targeted_attributes),
                trace.terminal_reason.value if i == last else "",
            ]
        )
    return buffer.getvalue()


def _profile_payload(profile: PlayerProfile) -> dict:
    return {
        "profile_id": profile.profile_id,
        "distributions": {
            key.value: {b.column: p for b, p in dist.items()}
            for key, dist in profile.distributions.items()
        },
    }


def trace_to_json(trace: TransferTrace) -> str:
    payload = {
        "terminal_reason": trace.terminal_reason.value,
        "expert_profile": _profile_payload(trace.expert_profile),
        "iterations": [
            {
                "iteration": r.iteration,
                "accuracy": r.accuracy,
                "divergence": r.divergence,
                "targeted_attributes": [a.column for a in r.targeted_attributes],
                "nudged_keys": [k.value for k in r.nudged_keys],
                "learner_profile": _profile_payload(r.learner_profile),
            }
            for r in trace.iterations
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def trace_from_json(text: str) -> TransferTrace:
    payload = json.loads(text)
    records = tuple(
        IterationRecord(
            iteration=int(entry["iteration"]),
            accuracy=float(entry["accuracy"]),
            divergence=float(entry["divergence"]),
            targeted_attributes=tuple(
                AttributeId.from_column(c) for c in entry["targeted_attributes"]
            ),
            nudged_keys=tuple(ConditionKey(k) for k in entry["nudged_keys"]),
            learner_profile=profile_from_json(json.dumps(entry["learner_profile"])),
        )
        for entry in payload["iterations"]
    )
    return TransferTrace(
        expert_profile=profile_from_json(json.dumps(payload["expert_profile"])),
        iterations=records,
        terminal_reason=TerminalReason(payload["terminal_reason"]),
    )


def curves_to_csv(table: CurveTable) -> str:
    """Condition keys as rows, one column per player per iteration."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    header = ["condition_key", "tracked_behavior"]
    header.extend(f"{row.player.value}_it{row.iteration}" for row in table.rows)
    writer.writerow(header)
    for key in ConditionKey:
        cells = [key.value, table.tracked[key].column]
        cells.extend(repr(row.values[key]) for row in table.rows)
        writer.writerow(cells)
    return buffer.getvalue()
