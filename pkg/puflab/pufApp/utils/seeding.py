# pufApp/utils/seeding.py
"""Seed derivation. Every random draw in the lab comes from a Generator built here."""
import numpy as np


def derive_rng(seed, *keys):
    """Independent stream for (seed, *keys); keys are non-negative integers (trial, bit, chain ...)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *(int(key) for key in keys)]))


def derive_seed(seed, *keys):
    """A 63-bit integer seed for (seed, *keys), for objects that store their seed."""
    state = np.random.SeedSequence([int(seed), *(int(key) for key in keys)]).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))


def spawn_seed(rng):
    """Draw a fresh master seed from an existing Generator."""
    return int(rng.integers(0, 2**63 - 1))
