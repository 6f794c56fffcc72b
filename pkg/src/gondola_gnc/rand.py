"""Per-source random streams.

Each noise source gets its own generator seeded from (master_seed, source
name), so toggling one source never shifts the draws of another and any run
is reproducible from its master seed alone.
"""

import zlib

import numpy as np

SOURCES = ("torque", "attitude", "gyro", "gyro_bias", "camera1", "camera2")


def source_generator(master_seed, name):
    """Deterministic generator for one named noise source."""
    tag = zlib.crc32(name.encode("ascii"))
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), tag]))


class NoiseStreams:
    """Bundle of independent per-source generators for one simulation run."""

    def __init__(self, master_seed):
        self.master_seed = int(master_seed)
        for name in SOURCES:
            setattr(self, name, source_generator(master_seed, name))

    def __repr__(self):
        return f"NoiseStreams(master_seed={self.master_seed})"
