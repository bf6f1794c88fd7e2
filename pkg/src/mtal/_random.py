"""Seeded generator construction.

Every random draw in the package goes through :func:`make_rng`, which wraps
numpy's PCG64 bit generator. PCG64 output for a given seed is stable across
platforms and numpy releases, so selections and simulations are portable.
"""
from __future__ import annotations

import numpy as np


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Return a PCG64 generator for ``seed``, optionally split by ``stream`` keys."""
    if stream:
        return np.random.Generator(np.random.PCG64([int(seed), *map(int, stream)]))
    return np.random.Generator(np.random.PCG64(int(seed)))
