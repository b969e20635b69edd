"""Seed streams shared by every sampler.

A stream is keyed by (seed, *keys): replicate r of sweep point s draws from
``stream(seed, s, r)`` no matter which worker runs it or in which order.
"""
import numpy as np


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based Philox generator for the given key path"""
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(seed: int, *keys: int) -> int:
    """Integer sub-seed for components that take plain integer seeds"""
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])
