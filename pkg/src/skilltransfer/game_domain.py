"""Game scenarios, player behavior profiles, and the session simulator.

A scenario is a bundle of independent per-tick stimulus probabilities. A
player profile maps each condition key to a categorical distribution over
behaviors. Sessions are simulated one tick at a time: sample a context,
pick the condition governing it, then draw a behavior, rejecting draws
the context makes infeasible.

Condition precedence: stimulus-driven keys (obstacle, person facing,
climbable, horse, soldier, civilian) govern whenever any of their
stimuli is present; one of them is picked uniformly at random. Only when
no stimulus is active does the location key (indoor or outdoor) govern
the tick. The ``default`` key is never selected directly; it is the
fallback distribution used when rejection sampling exhausts its budget,
so every profile must give it at least one always-feasible behavior.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .behavior_data import (
    CONTEXT_FIELDS,
    EVENT_ATTRIBUTES,
    UNCONDITIONAL_BEHAVIORS,
    AttributeId,
    BehaviorRecord,
    PlayerId,
    SessionLog,
    StimulusContext,
    is_feasible,
)
from .errors import ConfigError
from .seeds import derive_rng


class ConditionKey(Enum):
    """Named conditions a profile can react to."""

    INDOOR = "indoor"
    OUTDOOR = "outdoor"
    PERSON_FACING = "person_facing"
    CLIMBING_OPPORTUNITY = "climbing_opportunity"
    OBSTACLE = "obstacle"
    HORSE_AVAILABLE = "horse_available"
    SOLDIER_PRESENT = "soldier_present"
    CIVILIAN_PRESENT = "civilian_present"
    DEFAULT = "default"


#: Context field that triggers each stimulus-driven key, in pick order.
STIMULUS_KEY_FIELDS: dict[ConditionKey, str] = {
    ConditionKey.PERSON_FACING: "person_facing",
    ConditionKey.CLIMBING_OPPORTUNITY: "climbable_present",
    ConditionKey.OBSTACLE: "obstacle_present",
    ConditionKey.HORSE_AVAILABLE: "horse_available",
    ConditionKey.SOLDIER_PRESENT: "soldier_present",
    ConditionKey.CIVILIAN_PRESENT: "civilian_present",
}


@dataclass(frozen=True, slots=True)
class Scenario:
    """Per-tick stimulus probabilities plus session length."""

    scenario_id: str
    ticks_per_session: int
    location_indoor: float
    obstacle_present: float
    soldier_present: float
    civilian_present: float
    horse_available: float
    climbable_present: float
    person_facing: float

    def __post_init__(self) -> None:
        if self.ticks_per_session < 0:
            raise ValueError(f"ticks_per_session must be >= 0, got {self.ticks_per_session}")
        for field in CONTEXT_FIELDS:
            p = getattr(self, field)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{field} probability {p} outside [0, 1]")

    def probability(self, field: str) -> float:
        if field not in CONTEXT_FIELDS:
            raise ValueError(f"unknown stimulus field: {field!r}")
        return getattr(self, field)


def default_scenario() -> Scenario:
    """The documented default world used when a config leaves it out.

    Stimuli are frequent (0.6 each) because several linked behaviors are
    only feasible when two stimuli coincide; rarer stimuli starve the
    classifier of those co-occurrences.
    """
    return Scenario(
        scenario_id="default",
        ticks_per_session=2000,
        location_indoor=0.5,
        obstacle_present=0.6,
        soldier_present=0.6,
        civilian_present=0.6,
        horse_available=0.6,
        climbable_present=0.6,
        person_facing=0.6,
    )


Distribution = dict[AttributeId, float]

_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PlayerProfile:
    """A categorical behavior distribution for every condition key."""

    profile_id: str
    distributions: dict[ConditionKey, Distribution]

    def __post_init__(self) -> None:
        missing = [k.value for k in ConditionKey if k not in self.distributions]
        if missing:
            raise ValueError(f"profile {self.profile_id!r} lacks conditions: {missing}")
        extra = [k for k in self.distributions if not isinstance(k, ConditionKey)]
        if extra:
            raise ValueError(f"profile {self.profile_id!r} has non-condition keys: {extra}")
        copied: dict[ConditionKey, Distribution] = {}
        for key, dist in self.distributions.items():
            if not dist:
                raise ValueError(f"{self.profile_id}/{key.value}: empty distribution")
            for behavior, p in dist.items():
                if behavior not in EVENT_ATTRIBUTES:
                    raise ValueError(
                        f"{self.profile_id}/{key.value}: {behavior} is not an event behavior"
                    )
                if not p > 0.0:
                    raise ValueError(
                        f"{self.profile_id}/{key.value}: probability of "
                        f"{behavior.column} must be positive, got {p}"
                    )
            if key in (ConditionKey.INDOOR, ConditionKey.OUTDOOR):
                # Location keys only ever govern stimulus-free ticks, where
                # stimulus-gated behaviors cannot happen.
                gated = [b.column for b in dist if b not in UNCONDITIONAL_BEHAVIORS]
                if gated:
                    raise ValueError(
                        f"{self.profile_id}/{key.value}: behaviors {gated} need a "
                        "stimulus and can never occur under a location key"
                    )
            total = sum(dist.values())
            if abs(total - 1.0) > _SUM_TOLERANCE:
                raise ValueError(
                    f"{self.profile_id}/{key.value}: probabilities sum to {total!r}"
                )
            copied[key] = dict(sorted(dist.items(), key=lambda kv: kv[0].value))
        object.__setattr__(self, "distributions", copied)

    def distribution(self, key: ConditionKey) -> Distribution:
        return dict(self.distributions[key])


def sample_context(scenario: Scenario, rng: np.random.Generator) -> StimulusContext:
    """Draw one context; fields are independent Bernoulli variables."""
    values = {f: bool(rng.random() < scenario.probability(f)) for f in CONTEXT_FIELDS}
    return StimulusContext(**values)


def active_keys(context: StimulusContext) -> tuple[ConditionKey, ...]:
    """Condition keys governing this context, in deterministic order.

    Stimulus keys dominate; the location key applies only to a
    stimulus-free tick. Never empty and never contains DEFAULT.
    """
    stimuli = tuple(
        key for key, field in STIMULUS_KEY_FIELDS.items() if getattr(context, field)
    )
    if stimuli:
        return stimuli
    return (ConditionKey.INDOOR if context.location_indoor else ConditionKey.OUTDOOR,)


def _sample_categorical(dist: Distribution, rng: np.random.Generator) -> AttributeId:
    # Items are kept sorted by attribute position, so the cumulative walk
    # is deterministic for a given generator state.
    u = rng.random()
    acc = 0.0
    behavior = None
    for behavior, p in dist.items():
        acc += p
        if u < acc:
            return behavior
    assert behavior is not None
    return behavior  # float round-off pushed the total a hair under u


_REJECTION_BUDGET = 100


def choose_behavior(
    profile: PlayerProfile, context: StimulusContext, rng: np.random.Generator
) -> AttributeId:
    """Draw one behavior for ``context`` from ``profile``.

    Picks one active condition key uniformly, then rejection-samples its
    distribution until the draw is feasible in the full context. After
    ``_REJECTION_BUDGET`` failures the draw falls back to the default
    key's distribution restricted to feasible behaviors.
    """
    keys = active_keys(context)
    key = keys[int(rng.integers(len(keys)))]
    dist = profile.distributions[key]
    for _ in range(_REJECTION_BUDGET):
        behavior = _sample_categorical(dist, rng)
        if is_feasible(behavior, context):
            return behavior
    fallback = {
        behavior: p
        for behavior, p in profile.distributions[ConditionKey.DEFAULT].items()
        if is_feasible(behavior, context)
    }
    if not fallback:
        raise ConfigError(
            f"profile {profile.profile_id!r}: default condition has no feasible "
            "behavior for the current context"
        )
    total = sum(fallback.values())
    return _sample_categorical({b: p / total for b, p in fallback.items()}, rng)


def run_session(
    scenario: Scenario, profile: PlayerProfile, player: PlayerId, seed: int
) -> SessionLog:
    """Simulate one full session; bit-identical for identical arguments."""
    rng = derive_rng(seed)
    records = []
    for tick in range(scenario.ticks_per_session):
        context = sample_context(scenario, rng)
        behavior = choose_behavior(profile, context, rng)
        records.append(
            BehaviorRecord(player=player, tick=tick, context=context, behavior=behavior)
        )
    return SessionLog(
        player=player, seed=seed, scenario_id=scenario.scenario_id, records=tuple(records)
    )


# --- built-in profile pair ------------------------------------------------

_BASE_BEHAVIORS = UNCONDITIONAL_BEHAVIORS  # fighting, obstacle, movement

#: Behaviors guaranteed feasible whenever the key governs a tick: the three
#: unconditional ones plus whatever the key's own stimulus unlocks.
_KEY_SUPPORT: dict[ConditionKey, tuple[AttributeId, ...]] = {
    ConditionKey.INDOOR: _BASE_BEHAVIORS,
    ConditionKey.OUTDOOR: _BASE_BEHAVIORS,
    ConditionKey.DEFAULT: _BASE_BEHAVIORS,
    ConditionKey.OBSTACLE: _BASE_BEHAVIORS,
    ConditionKey.PERSON_FACING: _BASE_BEHAVIORS
    + (AttributeId.FACING_PRS, AttributeId.LISTENING),
    ConditionKey.CLIMBING_OPPORTUNITY: _BASE_BEHAVIORS + (AttributeId.CLIMBING,),
    ConditionKey.HORSE_AVAILABLE: _BASE_BEHAVIORS + (AttributeId.RIDING_HRS,),
    ConditionKey.SOLDIER_PRESENT: _BASE_BEHAVIORS + (AttributeId.FACING_SOL,),
    ConditionKey.CIVILIAN_PRESENT: _BASE_BEHAVIORS + (AttributeId.ATTACK_CIV,),
}


def _linked(key: ConditionKey, linked: dict[AttributeId, float], s: float) -> Distribution:
    """Distribution with mass ``s`` split over linked behaviors, rest uniform."""
    rest = [b for b in _KEY_SUPPORT[key] if b not in linked]
    if s >= 1.0 or not rest:
        return dict(linked)
    dist: Distribution = {b: s * w for b, w in linked.items()}
    share = (1.0 - s) / len(rest)
    for b in rest:
        dist[b] = share
    return dist


def _uniform(behaviors: tuple[AttributeId, ...]) -> Distribution:
    return {b: 1.0 / len(behaviors) for b in behaviors}


def table1_profiles(linkage_strength: float = 0.7) -> tuple[PlayerProfile, PlayerProfile]:
    """The built-in expert/learner profile pair.

    Each condition key with a behavioral linkage puts ``linkage_strength``
    of its mass on the linked behavior (split evenly when a condition
    links several) and spreads the rest uniformly over the key's other
    guaranteed-feasible behaviors, so the linked behavior is always the
    mode. Keys without a linkage fall back to the player's base mix, the
    same one the default key uses, so an unlinked stimulus changes nothing
    about how the player acts.

    Expert: fights at obstacles, attacks soldiers when watched or when a
    horse is about, climbs rather than socialize at climbing spots, and
    ignores location. Learner: walks indoors and runs outdoors, mixes
    riding, climbing and civilian attacks when watched, attacks civilians
    at climbing spots, and chats in front of obstacles or horses.
    """
    s = linkage_strength
    if not 0.0 < s <= 1.0:
        raise ValueError(f"linkage_strength must be inside (0, 1], got {s}")

    expert = PlayerProfile(
        profile_id="expert-table1",
        distributions={
            ConditionKey.INDOOR: _uniform(_BASE_BEHAVIORS),
            ConditionKey.OUTDOOR: _uniform(_BASE_BEHAVIORS),
            ConditionKey.DEFAULT: _uniform(_BASE_BEHAVIORS),
            ConditionKey.OBSTACLE: _linked(
                ConditionKey.OBSTACLE, {AttributeId.FIGHTING: 1.0}, s
            ),
            ConditionKey.PERSON_FACING: _linked(
                ConditionKey.PERSON_FACING, {AttributeId.FACING_SOL: 1.0}, s
            ),
            ConditionKey.HORSE_AVAILABLE: _linked(
                ConditionKey.HORSE_AVAILABLE, {AttributeId.FACING_SOL: 1.0}, s
            ),
            # No social behavior at climbing spots: mass stays on climbing
            # and plain movement.
            ConditionKey.CLIMBING_OPPORTUNITY: (
                {AttributeId.CLIMBING: s, AttributeId.MOVEMENT: 1.0 - s}
                if s < 1.0
                else {AttributeId.CLIMBING: 1.0}
            ),
            ConditionKey.SOLDIER_PRESENT: _uniform(_BASE_BEHAVIORS),
            ConditionKey.CIVILIAN_PRESENT: _uniform(_BASE_BEHAVIORS),
        },
    )

    third = 1.0 / 3.0
    learner = PlayerProfile(
        profile_id="learner-table1",
        distributions={
            ConditionKey.INDOOR: _linked(
                ConditionKey.INDOOR, {AttributeId.MOVEMENT: 1.0}, s
            ),
            ConditionKey.OUTDOOR: _linked(
                ConditionKey.OUTDOOR, {AttributeId.MOVEMENT: 1.0}, s
            ),
            ConditionKey.DEFAULT: _uniform(_BASE_BEHAVIORS),
            ConditionKey.OBSTACLE: _linked(
                ConditionKey.OBSTACLE, {AttributeId.LISTENING: 1.0}, s
            ),
            ConditionKey.PERSON_FACING: _linked(
                ConditionKey.PERSON_FACING,
                {
                    AttributeId.RIDING_HRS: third,
                    AttributeId.CLIMBING: third,
                    AttributeId.ATTACK_CIV: third,
                },
                s,
            ),
            ConditionKey.HORSE_AVAILABLE: _linked(
                ConditionKey.HORSE_AVAILABLE, {AttributeId.LISTENING: 1.0}, s
            ),
            ConditionKey.CLIMBING_OPPORTUNITY: _linked(
                ConditionKey.CLIMBING_OPPORTUNITY, {AttributeId.ATTACK_CIV: 1.0}, s
            ),
            ConditionKey.SOLDIER_PRESENT: _uniform(_BASE_BEHAVIORS),
            ConditionKey.CIVILIAN_PRESENT: _uniform(_BASE_BEHAVIORS),
        },
    )
    return expert, learner


# --- persistence ----------------------------------------------------------

def profile_to_json(profile: PlayerProfile) -> str:
    """Canonical JSON text; identical profiles serialize byte-identically."""
    payload = {
        "profile_id": profile.profile_id,
        "distributions": {
            key.value: {b.column: p for b, p in dist.items()}
            for key, dist in profile.distributions.items()
        },
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def profile_from_json(text: str) -> PlayerProfile:
    try:
        payload = json.loads(text)
        distributions = {
            ConditionKey(key): {
                AttributeId.from_column(column): float(p) for column, p in dist.items()
            }
            for key, dist in payload["distributions"].items()
        }
        return PlayerProfile(
            profile_id=str(payload["profile_id"]), distributions=distributions
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"invalid profile document: {exc}") from exc


def write_profile(profile: PlayerProfile, path: str | Path) -> None:
    Path(path).write_text(profile_to_json(profile), encoding="utf-8")


def read_profile(path: str | Path) -> PlayerProfile:
    return profile_from_json(Path(path).read_text(encoding="utf-8"))


def scenario_to_json(scenario: Scenario) -> str:
    payload = {
        "scenario_id": scenario.scenario_id,
        "ticks_per_session": scenario.ticks_per_session,
        "stimulus_probabilities": {f: getattr(scenario, f) for f in CONTEXT_FIELDS},
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def scenario_from_json(text: str) -> Scenario:
    try:
        payload = json.loads(text)
        probabilities = payload["stimulus_probabilities"]
        return Scenario(
            scenario_id=str(payload["scenario_id"]),
            ticks_per_session=int(payload["ticks_per_session"]),
            **{f: float(probabilities[f]) for f in CONTEXT_FIELDS},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario document: {exc}") from exc


def boost_scenario(scenario: Scenario, fields: set[str], floor: float = 0.8) -> Scenario:
    """Raise the given stimulus probabilities to at least ``floor``."""
    changes = {
        f: max(scenario.probability(f), floor)
        for f in fields
        if f != "location_indoor"
    }
    return replace(scenario, **changes) if changes else scenario
