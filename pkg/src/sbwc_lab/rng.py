"""Deterministic seed splitting.

All randomness in the package flows from a single top-level integer seed
through named sub-streams:

    substream(seed, label, index) -> numpy Generator

The sub-stream identity is the triple (seed, crc32(label), index) fed to
``numpy.random.SeedSequence``, so adding new purposes or sweep points
never perturbs existing streams.  Canonical labels: "init", "data",
"vstar", "loo", "trials", "test", "lanczos", "margin".
"""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, label: str, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed), zlib.crc32(label.encode("utf-8")), int(index)])
    return np.random.default_rng(ss)
