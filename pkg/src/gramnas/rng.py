"""Named, counter-keyed random streams derived from one master seed.

Every stream is a fresh ``numpy.random.Generator`` seeded from
``SeedSequence([master_seed, purpose, *counters])``, so the stream used for a
given offspring or evaluation never depends on how many draws other parts of
the run have made.
"""

from __future__ import annotations

import numpy as np

PURPOSES = {"init": 1, "select": 2, "vary": 3, "eval": 4, "sample": 5}


def stream(master_seed: int, purpose: str, *counters: int) -> np.random.Generator:
    if master_seed < 0 or any(c < 0 for c in counters):
        raise ValueError("seeds and counters must be non-negative")
    return np.random.default_rng(np.random.SeedSequence([master_seed, PURPOSES[purpose], *counters]))


def derive_seed(master_seed: int, purpose: str, *counters: int) -> int:
    """A 63-bit integer seed for consumers that take plain ints (e.g. evaluation budgets)."""
    return int(stream(master_seed, purpose, *counters).integers(0, 2**63 - 1))
