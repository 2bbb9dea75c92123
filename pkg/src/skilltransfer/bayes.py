"""Discrete Bayesian network learning and exact class inference.

Structure search is greedy hill climbing over single-edge moves (add,
delete, reverse) scored by the decomposable BIC criterion, with random
restarts. The score of a candidate move only depends on the families it
touches, so local scores are cached per (node, parents) pair. Inference
is exact: a classification query instantiates every attribute, so the
class posterior is the factorized joint evaluated once per class value
and normalized in log space.

All variables and values are plain strings here; enum-typed callers
convert at the boundary.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .behavior_data import CLASS_COLUMN, DataSet
from .seeds import derive_rng

_IMPROVEMENT_EPS = 1e-9


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph over named nodes.

    Edges are (parent, child) pairs. Construction fails on unknown
    endpoints, self loops, duplicate nodes, or cycles.
    """

    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]

    def __post_init__(self) -> None:
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("duplicate node names")
        known = set(self.nodes)
        for parent, child in self.edges:
            if parent not in known or child not in known:
                raise ValueError(f"edge ({parent}, {child}) references unknown node")
            if parent == child:
                raise ValueError(f"self loop on {child}")
        if _topological_order(self.nodes, self.edges) is None:
            raise ValueError("graph contains a cycle")

    def parents_of(self, node: str) -> tuple[str, ...]:
        self._check(node)
        return tuple(sorted(p for p, c in self.edges if c == node))

    def children_of(self, node: str) -> tuple[str, ...]:
        self._check(node)
        return tuple(sorted(c for p, c in self.edges if p == node))

    def _check(self, node: str) -> None:
        if node not in self.nodes:
            raise ValueError(f"no such node: {node!r}")


def _topological_order(
    nodes: Sequence[str], edges: frozenset[tuple[str, str]]
) -> list[str] | None:
    """Kahn's algorithm; None signals a cycle."""
    indegree = {n: 0 for n in nodes}
    children: dict[str, list[str]] = {n: [] for n in nodes}
    for parent, child in edges:
        indegree[child] += 1
        children[parent].append(child)
    ready = sorted(n for n, d in indegree.items() if d == 0)
    order: list[str] = []
    while ready:
        node = ready.pop()
        order.append(node)
        for child in children[node]:
            indegree[child] -= 1
            if indegree[child] == 0:
                ready.append(child)
    return order if len(order) == len(nodes) else None


def markov_blanket(dag: Dag, node: str) -> frozenset[str]:
    """Parents, children, and the children's other parents of ``node``."""
    dag._check(node)
    blanket = set(dag.parents_of(node)) | set(dag.children_of(node))
    for child in dag.children_of(node):
        blanket.update(dag.parents_of(child))
    blanket.discard(node)
    return frozenset(blanket)


@dataclass(frozen=True)
class Cpt:
    """Conditional probability table for one node.

    ``table`` has one row per parent assignment (mixed-radix order, first
    parent most significant) and one column per node value. Every row
    sums to one.
    """

    node: str
    parents: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self) -> None:
        table = np.asarray(self.table, dtype=float)
        object.__setattr__(self, "table", table)
        if table.ndim != 2:
            raise ValueError(f"{self.node}: CPT must be 2-dimensional")
        sums = table.sum(axis=1)
        if not np.all(np.abs(sums - 1.0) <= 1e-9):
            raise ValueError(f"{self.node}: CPT rows must sum to 1")
        if np.any(table < 0):
            raise ValueError(f"{self.node}: negative probability")


@dataclass(frozen=True)
class BayesNet:
    """A Dag plus one CPT per node over declared value domains."""

    dag: Dag
    cpts: dict[str, Cpt]
    domains: dict[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        for node in self.dag.nodes:
            if node not in self.domains:
                raise ValueError(f"no domain for node {node!r}")
            if node not in self.cpts:
                raise ValueError(f"no CPT for node {node!r}")
            cpt = self.cpts[node]
            if cpt.parents != self.dag.parents_of(node):
                raise ValueError(f"{node}: CPT parents disagree with graph")
            expected_rows = 1
            for parent in cpt.parents:
                expected_rows *= len(self.domains[parent])
            if cpt.table.shape != (expected_rows, len(self.domains[node])):
                raise ValueError(
                    f"{node}: CPT shape {cpt.table.shape}, expected "
                    f"({expected_rows}, {len(self.domains[node])})"
                )


@dataclass(frozen=True)
class LearnConfig:
    """Knobs for structure search and CPT estimation."""

    max_parents: int = 3
    smoothing: float = 1.0
    restarts: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_parents < 1:
            raise ValueError(f"max_parents must be >= 1, got {self.max_parents}")
        if not self.smoothing > 0.0:
            raise ValueError(f"smoothing must be > 0, got {self.smoothing}")
        if self.restarts < 0:
            raise ValueError(f"restarts must be >= 0, got {self.restarts}")


class _FamilyScorer:
    """Cached per-family BIC scores over one dataset.

    The BIC local score of node X with parents U is the maximized
    multinomial log likelihood of X given U minus
    0.5 * ln(N) * |U configurations| * (|X| - 1).
    """

    def __init__(self, data: DataSet):
        if data.n_rows == 0:
            raise ValueError("cannot score an empty dataset")
        self.variables = data.columns
        self.index = {name: i for i, name in enumerate(data.columns)}
        self.cards = np.array([len(data.domains[c]) for c in data.columns], dtype=np.int64)
        codes = np.empty((data.n_rows, len(data.columns)), dtype=np.int64)
        for j, name in enumerate(data.columns):
            lookup = {v: k for k, v in enumerate(data.domains[name])}
            codes[:, j] = [lookup[row[j]] for row in data.rows]
        self.codes = codes
        self.n = data.n_rows
        self._log_n = math.log(self.n)
        self._cache: dict[tuple[str, frozenset[str]], float] = {}

    def family_counts(self, node: str, parents: Sequence[str]) -> np.ndarray:
        """Count matrix with one row per parent assignment."""
        child = self.index[node]
        r = int(self.cards[child])
        idx = self.codes[:, child].copy()
        stride = r
        for parent in reversed(parents):
            j = self.index[parent]
            idx += self.codes[:, j] * stride
            stride *= int(self.cards[j])
        counts = np.bincount(idx, minlength=stride)
        return counts.reshape(stride // r, r)

    def local_score(self, node: str, parents: Sequence[str]) -> float:
        key = (node, frozenset(parents))
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        counts = self.family_counts(node, parents)
        row_totals = counts.sum(axis=1, keepdims=True)
        mask = counts > 0
        log_likelihood = float(
            (counts[mask] * (np.log(counts[mask]) - np.log(np.broadcast_to(row_totals, counts.shape)[mask]))).sum()
        )
        q = counts.shape[0]
        r = counts.shape[1]
        penalty = 0.5 * self._log_n * q * (r - 1)
        score = log_likelihood - penalty
        self._cache[key] = score
        return score


def bic_score(dag: Dag, data: DataSet) -> float:
    """Network BIC score; higher is better. Decomposes over families."""
    scorer = _FamilyScorer(data)
    missing = [n for n in dag.nodes if n not in scorer.index]
    if missing:
        raise ValueError(f"dataset lacks columns for nodes: {missing}")
    return sum(scorer.local_score(n, dag.parents_of(n)) for n in dag.nodes)


def _has_path(children: Mapping[str, set[str]], source: str, target: str) -> bool:
    if source == target:
        return True
    stack = [source]
    seen = {source}
    while stack:
        node = stack.pop()
        for child in children[node]:
            if child == target:
                return True
            if child not in seen:
                seen.add(child)
                stack.append(child)
    return False


class _Climber:
    """One greedy ascent from a starting edge set."""

    def __init__(self, scorer: _FamilyScorer, max_parents: int):
        self.scorer = scorer
        self.max_parents = max_parents
        self.nodes = scorer.variables

    def climb(self, edges: set[tuple[str, str]]) -> tuple[frozenset[tuple[str, str]], float]:
        parents: dict[str, set[str]] = {n: set() for n in self.nodes}
        children: dict[str, set[str]] = {n: set() for n in self.nodes}
        for p, c in edges:
            parents[c].add(p)
            children[p].add(c)
        score = sum(
            self.scorer.local_score(n, tuple(parents[n])) for n in self.nodes
        )
        while True:
            move = self._best_move(parents, children)
            if move is None:
                return frozenset((p, c) for c in parents for p in parents[c]), score
            kind, (u, v), delta = move
            if kind == "add":
                parents[v].add(u)
                children[u].add(v)
            elif kind == "delete":
                parents[v].discard(u)
                children[u].discard(v)
            else:  # reverse u -> v into v -> u
                parents[v].discard(u)
                children[u].discard(v)
                parents[u].add(v)
                children[v].add(u)
            score += delta

    def _best_move(
        self, parents: dict[str, set[str]], children: dict[str, set[str]]
    ) -> tuple[str, tuple[str, str], float] | None:
        local = self.scorer.local_score
        best: tuple[str, tuple[str, str], float] | None = None
        best_delta = _IMPROVEMENT_EPS

        # Moves are enumerated in a fixed lexicographic order so equal
        # scores always resolve the same way.
        for u in self.nodes:
            for v in self.nodes:
                if u == v or u in parents[v] or v in parents[u]:
                    continue
                if len(parents[v]) >= self.max_parents:
                    continue
                if _has_path(children, v, u):
                    continue
                before = local(v, tuple(parents[v]))
                after = local(v, tuple(parents[v] | {u}))
                delta = after - before
                if delta > best_delta:
                    best, best_delta = ("add", (u, v), delta), delta

        for u, v in sorted((p, c) for c in parents for p in parents[c]):
            delta = local(v, tuple(parents[v] - {u})) - local(v, tuple(parents[v]))
            if delta > best_delta:
                best, best_delta = ("delete", (u, v), delta), delta

        for u, v in sorted((p, c) for c in parents for p in parents[c]):
            if len(parents[u]) >= self.max_parents:
                continue
            children[u].discard(v)
            reachable = _has_path(children, u, v)
            children[u].add(v)
            if reachable:
                continue
            delta = (
                local(v, tuple(parents[v] - {u}))
                - local(v, tuple(parents[v]))
                + local(u, tuple(parents[u] | {v}))
                - local(u, tuple(parents[u]))
            )
            if delta > best_delta:
                best, best_delta = ("reverse", (u, v), delta), delta

        return best


def _random_start(
    nodes: tuple[str, ...], max_parents: int, rng: np.random.Generator
) -> set[tuple[str, str]]:
    """A random DAG: random topological order, random sparse parent sets."""
    order = [nodes[i] for i in rng.permutation(len(nodes))]
    edges: set[tuple[str, str]] = set()
    for position, child in enumerate(order):
        if position == 0:
            continue
        k = int(rng.integers(0, min(position, max_parents) + 1))
        if k == 0:
            continue
        picks = rng.choice(position, size=k, replace=False)
        edges.update((order[int(p)], child) for p in picks)
    return edges


def learn_structure(data: DataSet, config: LearnConfig) -> Dag:
    """Greedy BIC hill climbing with random restarts.

    Restart 0 starts from the empty graph; each further restart starts
    from a random DAG drawn from a stream derived from ``config.seed``.
    The best-scoring result wins; exact ties go to the lexicographically
    smallest edge set. Deterministic for identical inputs.
    """
    if CLASS_COLUMN in data.columns:
        class_values = data.column_values(CLASS_COLUMN)
        for label in data.domains[CLASS_COLUMN]:
            if class_values.count(label) < 2:
                raise ValueError(f"class {label!r} has fewer than 2 rows")
    scorer = _FamilyScorer(data)
    climber = _Climber(scorer, config.max_parents)

    best_edges: frozenset[tuple[str, str]] | None = None
    best_key: tuple[float, tuple[tuple[str, str], ...]] | None = None
    for restart in range(config.restarts + 1):
        if restart == 0:
            start: set[tuple[str, str]] = set()
        else:
            start = _random_start(
                scorer.variables, config.max_parents, derive_rng(config.seed, restart)
            )
        edges, score = climber.climb(start)
        key = (-score, tuple(sorted(edges)))
        if best_key is None or key < best_key:
            best_key = key
            best_edges = edges
    assert best_edges is not None
    return Dag(nodes=scorer.variables, edges=best_edges)


def fit_cpts(dag: Dag, data: DataSet, alpha: float = 1.0) -> BayesNet:
    """Estimate all CPTs with additive (Laplace) smoothing ``alpha``."""
    if not alpha > 0.0:
        raise ValueError(f"smoothing must be > 0, got {alpha}")
    scorer = _FamilyScorer(data)
    missing = [n for n in dag.nodes if n not in scorer.index]
    if missing:
        raise ValueError(f"dataset lacks columns for nodes: {missing}")
    cpts: dict[str, Cpt] = {}
    for node in dag.nodes:
        parents = dag.parents_of(node)
        counts = scorer.family_counts(node, parents).astype(float)
        counts += alpha
        table = counts / counts.sum(axis=1, keepdims=True)
        cpts[node] = Cpt(node=node, parents=parents, table=table)
    domains = {n: tuple(data.domains[n]) for n in dag.nodes}
    return BayesNet(dag=dag, cpts=cpts, domains=domains)


def _row_index(net: BayesNet, cpt: Cpt, assignment: Mapping[str, str]) -> int:
    index = 0
    for parent in cpt.parents:
        domain = net.domains[parent]
        index = index * len(domain) + domain.index(assignment[parent])
    return index


def _log_joint(net: BayesNet, assignment: Mapping[str, str]) -> float:
    total = 0.0
    for node in net.dag.nodes:
        cpt = net.cpts[node]
        row = _row_index(net, cpt, assignment)
        p = cpt.table[row, net.domains[node].index(assignment[node])]
        if p == 0.0:
            return -math.inf
        total += math.log(p)
    return total


def class_posterior(
    net: BayesNet, row: Mapping[str, str], class_node: str = CLASS_COLUMN
) -> dict[str, float]:
    """Exact posterior over the class node given a fully observed row.

    ``row`` must assign every non-class node a value from its domain.
    Joint terms are accumulated in log space and normalized at the end;
    the result sums to one.
    """
    if class_node not in net.domains:
        raise ValueError(f"network has no class node {class_node!r}")
    expected = set(net.dag.nodes) - {class_node}
    given = set(row)
    if given != expected:
        raise ValueError(
            f"row must assign exactly the non-class nodes; "
            f"missing {sorted(expected - given)}, extra {sorted(given - expected)}"
        )
    for node in expected:
        if row[node] not in net.domains[node]:
            raise ValueError(f"{node}: value {row[node]!r} not in domain")

    log_scores = []
    for value in net.domains[class_node]:
        assignment = dict(row)
        assignment[class_node] = value
        log_scores.append(_log_joint(net, assignment))
    peak = max(log_scores)
    if peak == -math.inf:
        # Every class value has zero likelihood; undefined posterior.
        raise ValueError("row has zero probability under every class value")
    weights = [math.exp(s - peak) for s in log_scores]
    total = sum(weights)
    return {
        value: w / total for value, w in zip(net.domains[class_node], weights)
    }


def classify(
    net: BayesNet, row: Mapping[str, str], class_node: str = CLASS_COLUMN
) -> str:
    """Most probable class value; exact ties go to the earlier domain value."""
    posterior = class_posterior(net, row, class_node)
    best = None
    best_p = -1.0
    for value in net.domains[class_node]:
        if posterior[value] > best_p:
            best, best_p = value, posterior[value]
    assert best is not None
    return best


def accuracy(net: BayesNet, test: DataSet, class_node: str = CLASS_COLUMN) -> float:
    """Fraction of test rows whose class is predicted correctly."""
    if test.n_rows == 0:
        raise ValueError("empty test set")
    test.column_index(class_node)  # reject datasets without the label column
    hits = 0
    for i in range(test.n_rows):
        row = test.row_mapping(i)
        label = row.pop(class_node)
        if classify(net, row, class_node) == label:
            hits += 1
    return hits / test.n_rows


# --- persistence ----------------------------------------------------------

def bayesnet_to_json(net: BayesNet) -> str:
    """Canonical JSON text with a lossless round trip."""
    cpts = {}
    for node in net.dag.nodes:
        cpt = net.cpts[node]
        rows = {}
        parent_domains = [net.domains[p] for p in cpt.parents]
        for index in range(cpt.table.shape[0]):
            values = []
            rest = index
            for domain in reversed(parent_domains):
                values.append(domain[rest % len(domain)])
                rest //= len(domain)
            key = ",".join(reversed(values))
            rows[key] = [float(p) for p in cpt.table[index]]
        cpts[node] = {"parents": list(cpt.parents), "rows": rows}
    payload = {
        "nodes": list(net.dag.nodes),
        "edges": sorted([p, c] for p, c in net.dag.edges),
        "domains": {n: list(v) for n, v in net.domains.items()},
        "cpts": cpts,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def bayesnet_from_json(text: str) -> BayesNet:
    payload = json.loads(text)
    nodes = tuple(payload["nodes"])
    dag = Dag(nodes=nodes, edges=frozenset((p, c) for p, c in payload["edges"]))
    domains = {n: tuple(v) for n, v in payload["domains"].items()}
    cpts: dict[str, Cpt] = {}
    for node in nodes:
        entry = payload["cpts"][node]
        parents = tuple(entry["parents"])
        parent_domains = [domains[p] for p in parents]
        n_rows = 1
        for domain in parent_domains:
            n_rows *= len(domain)
        table = np.zeros((n_rows, len(domains[node])))
        for key, row in entry["rows"].items():
            values = key.split(",") if key else []
            index = 0
            for domain, value in zip(parent_domains, values):
                index = index * len(domain) + domain.index(value)
            table[index] = row
        cpts[node] = Cpt(node=node, parents=parents, table=table)
    return BayesNet(dag=dag, cpts=cpts, domains=domains)


def write_bayesnet(net: BayesNet, path: str | Path) -> None:
    Path(path).write_text(bayesnet_to_json(net), encoding="utf-8")


def read_bayesnet(path: str | Path) -> BayesNet:
    return bayesnet_from_json(Path(path).read_text(encoding="utf-8"))
