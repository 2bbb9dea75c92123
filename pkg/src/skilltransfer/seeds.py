"""Deterministic random stream derivation.

Every random draw in the package flows from one master seed. Streams are
named by a path of small integers fed to ``numpy.random.SeedSequence`` as
its spawn key and consumed through counter-based Philox generators, so two
distinct paths never share state and any run replays bit for bit.

Path layout used by the pipeline:

    (STREAM_SESSION, iteration, role)   per-session simulation stream
    (STREAM_SPLIT, iteration)           train/test shuffling
    (STREAM_LEARN, iteration)           structure-search restarts

where role is 1 for the expert and 2 for the learner, and iteration is 0
for the one-shot identification commands and 1-based inside the transfer
loop.
"""

from __future__ import annotations

import numpy as np

STREAM_SESSION = 1
STREAM_SPLIT = 2
STREAM_LEARN = 3

ROLE_EXPERT = 1
ROLE_LEARNER = 2


def derive_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Return the Philox generator for the stream named by ``path``."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(path))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(master_seed: int, *path: int) -> int:
    """Collapse a stream name to a single integer seed.

    Useful when an API takes a seed rather than a generator; the result
    is stable across platforms and numpy versions that keep the
    SeedSequence hashing scheme.
    """
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(path))
    return int(ss.generate_state(1, np.uint64)[0])
