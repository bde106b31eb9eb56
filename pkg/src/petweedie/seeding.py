"""Deterministic seeding: one 64-bit master seed, labelled substreams.

A stochastic task identified by ``(label, index)`` always receives the same
stream for a given master seed, regardless of execution order or worker count.
"""
import zlib

import numpy as np

DEFAULT_SEED = 20190731
MASK64 = (1 << 64) - 1


def label_key(label):
    return zlib.crc32(str(label).encode("utf-8"))


def as_generator(seed=None):
    """Coerce ``seed`` (None, int or Generator) into a numpy Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        seed = DEFAULT_SEED
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & MASK64)))


def substream(master, label, *index):
    """Generator for task ``label`` at position ``index`` under ``master``."""
    if master is None:
        master = DEFAULT_SEED
    key = (label_key(label),) + tuple(int(i) for i in index)
    ss = np.random.SeedSequence(int(master) & MASK64, spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))
