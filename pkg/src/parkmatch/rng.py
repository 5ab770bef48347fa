"""Seeded, splittable random streams (Philox counter-based generator)."""

from __future__ import annotations

import os

import numpy as np

SEED_ENV = "PARKMATCH_SEED"


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent stream for ``(seed, *keys)``; same inputs give the same stream."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return np.random.Generator(np.random.Philox(ss))


def resolve_seed(seed: int | None) -> int:
    """Explicit seed wins, then ``$PARKMATCH_SEED``, then 0."""
    if seed is not None:
        return int(seed)
    env = os.environ.get(SEED_ENV)
    if env:
        return int(env)
    return 0


def draw(support, probs, rng: np.random.Generator):
    """Pick one element of ``support`` with the given probabilities.

    Consumes exactly one uniform draw, so two callers sharing a stream stay
    in lock-step as long as they make the same decisions.
    """
    u = rng.random()
    acc = 0.0
    last = None
    for item, p in zip(support, probs):
        if p <= 0.0:
            continue
        acc += p
        last = item
        if u < acc:
            return item
    if last is None:
        raise ValueError("cannot draw from an all-zero distribution")
    return last
