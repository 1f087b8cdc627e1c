"""Seeded, platform-independent random streams.

All randomness in the package flows through numpy's PCG64 generator,
seeded through a SeedSequence built from an explicit integer key tuple.
Child streams are derived by extending the key (for example one stream
per image, keyed by the image index), never by drawing from a shared
generator, so results are bit-reproducible regardless of evaluation
order or parallelism.
"""

from __future__ import annotations

import numpy as np


def make_rng(*key: int) -> np.random.Generator:
    """Return a PCG64 generator for the given integer key tuple."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))
