"""Quasi-random sample points inside a domain box."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .manifold import ManifoldSpec

DEFAULT_SAMPLES = 64
BOUNDARY_MARGIN = 1e-3


@dataclass(frozen=True)
class SamplingConfig:
    count: int = DEFAULT_SAMPLES
    seed: int = 0
    tol: float | None = None

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("sample count must be at least 1")


def halton(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """``count`` scrambled Halton points in the unit cube, reproducible by seed."""
    return qmc.Halton(d=dim, scramble=True, seed=seed).random(count)


def sample_points(spec: ManifoldSpec, sampling: SamplingConfig) -> np.ndarray:
    """Halton points in the domain box, kept ``BOUNDARY_MARGIN`` away from its faces."""
    lo, hi = spec.lower, spec.upper
    pad = BOUNDARY_MARGIN * np.maximum(1.0, hi - lo)
    pad = np.minimum(pad, 0.25 * (hi - lo))
    u = halton(spec.n, sampling.count, sampling.seed)
    return (lo + pad) + u * ((hi - pad) - (lo + pad))
