"""Dense pointwise tensors with per-slot variance.

Components are stored as an ``ndarray`` of shape ``(n,) * rank``; flattening
it in C order gives the row-major slot order used in reports.  A slot is
covariant (``"l"``, lower index) or contravariant (``"u"``, upper index).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CO = "l"
CONTRA = "u"

SYMMETRY_TOL = 1e-12
EIGEN_DEGENERACY = 1e-10
DET_DEGENERACY = 1e-12


class TensorError(ValueError):
    pass


class DegenerateMetricError(ArithmeticError):
    """The metric is singular (or too close to singular) at a point."""


@dataclass(frozen=True, eq=False)
class TensorValue:
    components: np.ndarray
    variance: tuple[str, ...]

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "variance", tuple(self.variance))
        if comps.ndim != len(self.variance):
            raise TensorError(f"rank {comps.ndim} does not match variance mask {self.variance}")
        if comps.ndim and len(set(comps.shape)) != 1:
            raise TensorError(f"all slots must share the chart dimension, got shape {comps.shape}")
        if any(v not in (CO, CONTRA) for v in self.variance):
            raise TensorError(f"variance flags must be {CO!r} or {CONTRA!r}")

    @property
    def rank(self) -> int:
        return len(self.variance)

    @property
    def n(self) -> int:
        return self.components.shape[0] if self.rank else 0

    def flat(self) -> np.ndarray:
        return self.components.reshape(-1)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.components))) if self.components.size else 0.0

    @classmethod
    def scalar(cls, value: float) -> "TensorValue":
        return cls(np.asarray(float(value)), ())

    @classmethod
    def covariant(cls, comps) -> "TensorValue":
        comps = np.asarray(comps, dtype=float)
        return cls(comps, (CO,) * comps.ndim)


@dataclass(frozen=True, eq=False)
class MetricAtPoint:
    g: TensorValue
    g_inv: TensorValue
    det: float
    signs: tuple[int, ...]
    frame: np.ndarray  # columns e_a with g(e_a, e_b) = signs[a] * delta_ab

    @property
    def n(self) -> int:
        return self.g.n

    @property
    def signature(self) -> tuple[int, int]:
        p = sum(1 for s in self.signs if s > 0)
        return p, len(self.signs) - p


def metric_from_components(g) -> MetricAtPoint:
    """Validate a metric matrix and build its inverse and orthonormal frame."""
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    if g.shape != (n, n):
        raise TensorError("metric must be a square matrix")
    norm = float(np.max(np.abs(g)))
    if norm == 0.0:
        raise DegenerateMetricError("metric vanishes identically")
    if np.max(np.abs(g - g.T)) > SYMMETRY_TOL * max(1.0, norm):
        raise TensorError("metric is not symmetric")
    g = 0.5 * (g + g.T)
    det = float(np.linalg.det(g))
    if abs(det) < DET_DEGENERACY * norm**n:
        raise DegenerateMetricError(f"|det g| = {abs(det):.3e} below threshold")
    lam, vecs = np.linalg.eigh(g)
    if np.min(np.abs(lam)) < EIGEN_DEGENERACY * norm:
        raise DegenerateMetricError("metric has a near-zero eigenvalue")
    signs = tuple(int(s) for s in np.sign(lam))
    frame = vecs / np.sqrt(np.abs(lam))
    g_inv = np.linalg.inv(g)
    g_inv = 0.5 * (g_inv + g_inv.T)
    return MetricAtPoint(TensorValue(g, (CO, CO)), TensorValue(g_inv, (CONTRA, CONTRA)), det, signs, frame)


def _check_slot(t: TensorValue, slot: int):
    if not 0 <= slot < t.rank:
        raise TensorError(f"slot {slot} out of range for rank {t.rank}")


def contract(t: TensorValue, slot_a: int, slot_b: int) -> TensorValue:
    """Sum over a pair of slots of opposite variance."""
    _check_slot(t, slot_a)
    _check_slot(t, slot_b)
    if slot_a == slot_b:
        raise TensorError("cannot contract a slot with itself")
    if t.variance[slot_a] == t.variance[slot_b]:
        raise TensorError(f"variance mismatch: slots {slot_a} and {slot_b} are both {t.variance[slot_a]!r}")
    comps = np.trace(t.components, axis1=slot_a, axis2=slot_b)
    var = tuple(v for i, v in enumerate(t.variance) if i not in (slot_a, slot_b))
    return TensorValue(comps, var)


def raise_lower(t: TensorValue, slot: int, metric: MetricAtPoint, direction: str) -> TensorValue:
    """Raise a covariant slot with g^-1 or lower a contravariant slot with g."""
    _check_slot(t, slot)
    if direction == "raise":
        if t.variance[slot] != CO:
            raise TensorError("can only raise a covariant slot")
        mat, new = metric.g_inv.components, CONTRA
    elif direction == "lower":
        if t.variance[slot] != CONTRA:
            raise TensorError("can only lower a contravariant slot")
        mat, new = metric.g.components, CO
    else:
        raise TensorError(f"direction must be 'raise' or 'lower', got {direction!r}")
    comps = np.moveaxis(np.tensordot(mat, t.components, axes=([1], [slot])), 0, slot)
    var = list(t.variance)
    var[slot] = new
    return TensorValue(comps, tuple(var))


def metric_trace(t: TensorValue, metric: MetricAtPoint) -> float:
    """``g^{ij} t_ij`` for a covariant rank-2 tensor."""
    if t.rank != 2 or t.variance != (CO, CO):
        raise TensorError("metric_trace needs a fully covariant rank-2 tensor")
    return float(np.einsum("ij,ij->", metric.g_inv.components, t.components))


def frame_trace(t: TensorValue, metric: MetricAtPoint) -> float:
    """``sum_a eps_a t(e_a, e_a)`` in the orthonormal frame of ``metric``."""
    if t.rank != 2 or t.variance != (CO, CO):
        raise TensorError("frame_trace needs a fully covariant rank-2 tensor")
    e = metric.frame
    diag = np.einsum("ia,ij,ja->a", e, t.components, e)
    return float(np.dot(metric.signs, diag))
