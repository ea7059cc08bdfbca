"""Conformal, concircular and quasi-conformal curvature tensors.

All tensors are (0,4) with slot order ``(X, Y, Z, V)``.  Writing
``P(A, B)(X,Y,Z,V) = A(Y,Z) B(X,V) - A(X,Z) B(Y,V)`` the three tensors are

* conformal     ``C = R - (P(S,g) + P(g,S)) / (n-2) + r P(g,g) / ((n-1)(n-2))``
* concircular   ``Z = R - r P(g,g) / (n(n-1))``
* quasi-conf.   ``C* = a R + b (P(S,g) + P(g,S)) - (r/n)(a/(n-1) + 2b) P(g,g)``

and ``C* = -(n-2) b C + (a + (n-2) b) Z`` identically.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

import numpy as np

from .geometry import CurvatureBundle, GeometryBatch, geometry_batch, scale_of, valid_mask
from .manifold import ManifoldSpec
from .sampling import SamplingConfig, sample_points
from .tensors import TensorValue

DEFAULT_TOL = 1e-8


class FamilyError(ValueError):
    pass


@dataclass(frozen=True)
class QCParams:
    """Constants ``a`` and ``b`` of the quasi-conformal tensor.

    ``Fraction`` inputs are kept exact so that ``a + (n-2) b = 0`` can be
    decided without rounding.
    """

    a: float | Fraction
    b: float | Fraction

    def __post_init__(self):
        if self.a == 0 and self.b == 0:
            raise FamilyError("a and b must not both vanish")

    @property
    def af(self) -> float:
        return float(self.a)

    @property
    def bf(self) -> float:
        return float(self.b)

    @property
    def exact(self) -> bool:
        return isinstance(self.a, Rational) and isinstance(self.b, Rational)

    def regime_value(self, n: int):
        """``a + (n-2) b``, exact when both constants are rational."""
        if self.exact:
            return Fraction(self.a) + (n - 2) * Fraction(self.b)
        return self.af + (n - 2) * self.bf

    @classmethod
    def conformal(cls, n: int) -> "QCParams":
        return cls(Fraction(1), Fraction(-1, n - 2))


# ---------------------------------------------------------------------------
# array kernels (work on arrays with leading batch axes)


def pair(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``A(Y,Z) B(X,V) - A(X,Z) B(Y,V)`` as an array indexed ``[X,Y,Z,V]``."""
    return np.einsum("...yz,...xv->...xyzv", A, B) - np.einsum("...xz,...yv->...xyzv", A, B)


def _ricci_part(S, g):
    return pair(S, g) + pair(g, S)


def conformal_array(R, S, r, g):
    n = g.shape[-1]
    if n <= 2:
        raise FamilyError("conformal curvature tensor needs n > 2")
    r = np.asarray(r)[..., None, None, None, None]
    return R - _ricci_part(S, g) / (n - 2) + r * pair(g, g) / ((n - 1) * (n - 2))


def concircular_array(R, r, g):
    n = g.shape[-1]
    r = np.asarray(r)[..., None, None, None, None]
    return R - r * pair(g, g) / (n * (n - 1))


def quasi_conformal_array(R, S, r, g, p: QCParams):
    n = g.shape[-1]
    a, b = p.af, p.bf
    r = np.asarray(r)[..., None, None, None, None]
    return a * R + b * _ricci_part(S, g) - (r / n) * (a / (n - 1) + 2 * b) * pair(g, g)


def _slot_pair(dA, B):
    """Derivative-slot version of ``pair``: ``dA[u, ...]`` with ``B`` fixed."""
    return np.einsum("...uyz,...xv->...uxyzv", dA, B) - np.einsum("...uxz,...yv->...uxyzv", dA, B)


def _slot_pair_r(A, dB):
    return np.einsum("...yz,...uxv->...uxyzv", A, dB) - np.einsum("...xz,...uyv->...uxyzv", A, dB)


def _nabla_pair(A, dA, B, dB):
    return _slot_pair(dA, B) + _slot_pair_r(A, dB)


def nabla_family_arrays(batch: GeometryBatch, p: QCParams) -> dict[str, np.ndarray]:
    """Covariant derivatives of C, Z and C* by the product rule.

    Each result is indexed ``[..., u, X, Y, Z, V]``.  The metric derivative
    (zero for a metric connection) is kept in the product rule.
    """
    n = batch.n
    g, dg = batch.g, batch.nabla_g
    S, dS = batch.S, batch.nabla_S
    r = batch.r[..., None, None, None, None, None]
    dr = batch.nabla_r[..., :, None, None, None, None]
    dR = batch.nabla_R
    gg = pair(g, g)[..., None, :, :, :, :]
    dgg = _nabla_pair(g, dg, g, dg)
    dric = _nabla_pair(S, dS, g, dg) + _nabla_pair(g, dg, S, dS)
    out = {}
    if n > 2:
        out["C"] = dR - dric / (n - 2) + (dr * gg + r * dgg) / ((n - 1) * (n - 2))
    out["Z"] = dR - (dr * gg + r * dgg) / (n * (n - 1))
    a, b = p.af, p.bf
    k = (a / (n - 1) + 2 * b) / n
    out["Cstar"] = a * dR + b * dric - k * (dr * gg + r * dgg)
    return out


# ---------------------------------------------------------------------------
# pointwise API


def _check_bundle(b: CurvatureBundle):
    return b.R.components, b.S.components, b.r, b.metric.g.components


def conformal(b: CurvatureBundle) -> TensorValue:
    R, S, r, g = _check_bundle(b)
    return TensorValue.covariant(conformal_array(R, S, r, g))


def concircular(b: CurvatureBundle) -> TensorValue:
    R, _, r, g = _check_bundle(b)
    return TensorValue.covariant(concircular_array(R, r, g))


def quasi_conformal(b: CurvatureBundle, p: QCParams) -> TensorValue:
    R, S, r, g = _check_bundle(b)
    return TensorValue.covariant(quasi_conformal_array(R, S, r, g, p))


def combination_residual(b: CurvatureBundle, p: QCParams) -> float:
    """Normalised ``max|C* - (-(n-2) b C + (a + (n-2) b) Z)|``."""
    R, S, r, g = _check_bundle(b)
    return float(_combination_residuals(R, S, r, g, p).max())


def _combination_residuals(R, S, r, g, p: QCParams) -> np.ndarray:
    n = g.shape[-1]
    cs = quasi_conformal_array(R, S, r, g, p)
    rhs = (p.af + (n - 2) * p.bf) * concircular_array(R, r, g)
    if n > 2:  # the conformal term carries the factor n - 2
        rhs = rhs - (n - 2) * p.bf * conformal_array(R, S, r, g)
    diff = np.max(np.abs(cs - rhs), axis=(-4, -3, -2, -1))
    sc = np.maximum(1.0, np.maximum(np.max(np.abs(cs), axis=(-4, -3, -2, -1)), np.max(np.abs(R), axis=(-4, -3, -2, -1))))
    return np.atleast_1d(diff / sc)


def combination_residuals_batch(batch: GeometryBatch, p: QCParams) -> np.ndarray:
    return _combination_residuals(batch.R, batch.S, batch.r, batch.g, p)


# ---------------------------------------------------------------------------
# scans and classification


@dataclass
class FlatnessReport:
    n: int
    max_conformal: float
    max_concircular: float
    max_quasi_conformal: float
    max_einstein: float
    max_curvature: float
    sample_count: int
    skipped: int
    tol: float
    worst_points: dict = field(default_factory=dict)

    @property
    def scale(self) -> float:
        return max(1.0, self.max_curvature)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "max_conformal": self.max_conformal,
            "max_concircular": self.max_concircular,
            "max_quasi_conformal": self.max_quasi_conformal,
            "max_einstein": self.max_einstein,
            "max_curvature": self.max_curvature,
            "scale": self.scale,
            "sample_count": self.sample_count,
            "skipped": self.skipped,
            "tol": self.tol,
            "worst_points": self.worst_points,
        }


def _valid_samples(spec: ManifoldSpec, sampling: SamplingConfig):
    pts = sample_points(spec, sampling)
    ok = valid_mask(spec, pts)
    good = pts[ok]
    if len(good) == 0:
        raise FamilyError(f"no valid sample points in the domain of {spec.name}")
    return good, int((~ok).sum())


def _argmax_point(values: np.ndarray, pts: np.ndarray) -> list[float]:
    return pts[int(np.argmax(values))].tolist()


def flatness_scan(spec: ManifoldSpec, p: QCParams, sampling: SamplingConfig | None = None) -> FlatnessReport:
    """Maxima of |C|, |Z|, |C*| and |E| over quasi-random points of the domain."""
    sampling = sampling or SamplingConfig()
    pts, skipped = _valid_samples(spec, sampling)
    batch = geometry_batch(spec, pts)
    n = spec.n
    red = (-4, -3, -2, -1)
    Z = np.max(np.abs(concircular_array(batch.R, batch.r, batch.g)), axis=red)
    Cs = np.max(np.abs(quasi_conformal_array(batch.R, batch.S, batch.r, batch.g, p)), axis=red)
    C = np.max(np.abs(conformal_array(batch.R, batch.S, batch.r, batch.g)), axis=red) if n > 2 else np.full(len(pts), np.nan)
    E = np.max(np.abs(batch.E), axis=(-2, -1))
    Rm = np.max(np.abs(batch.R), axis=red)
    worst = {"quasi_conformal": _argmax_point(Cs, pts), "concircular": _argmax_point(Z, pts),
             "einstein": _argmax_point(E, pts)}
    if n > 2:
        worst["conformal"] = _argmax_point(C, pts)
    return FlatnessReport(
        n=n,
        max_conformal=float(np.max(C)),
        max_concircular=float(np.max(Z)),
        max_quasi_conformal=float(np.max(Cs)),
        max_einstein=float(np.max(E)),
        max_curvature=float(np.max(Rm)),
        sample_count=len(pts),
        skipped=skipped,
        tol=sampling_tol(sampling),
        worst_points=worst,
    )


def sampling_tol(sampling: SamplingConfig) -> float:
    return sampling.tol if sampling.tol is not None else DEFAULT_TOL


@dataclass
class ClassificationReport:
    branch: str  # "(i)", "(ii)", "(iii)" or "not-flat"
    regime: str  # "a+(n-2)b=0" or "a+(n-2)b!=0"
    witnesses: dict
    consistent: bool
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"branch": self.branch, "regime": self.regime, "witnesses": self.witnesses,
                "consistent": self.consistent, "notes": self.notes}


def _is_zero(x, tol: float, scale: float) -> bool:
    if isinstance(x, Fraction):
        return x == 0
    return abs(x) <= tol * scale


def classify_flatness(report: FlatnessReport, p: QCParams, n: int, tol: float = DEFAULT_TOL) -> ClassificationReport:
    """Decide which alternative of the quasi-conformal flatness classification applies.

    Residuals are compared against ``tol * max(1, max|R|)``.  A flat ``C*``
    that fails its branch requirement, or a non-flat ``C*`` whose branch
    requirement nonetheless holds, is reported as an inconsistency.
    """
    if report.n != n:
        raise FamilyError(f"report is for n={report.n}, classification asked for n={n}")
    if n <= 2:
        raise FamilyError("classification needs n > 2")
    thr = tol * report.scale
    reg = p.regime_value(n)
    coef_scale = abs(p.af) + abs(p.bf)
    degenerate = _is_zero(reg, tol, coef_scale)
    a_zero = _is_zero(p.a if isinstance(p.a, Fraction) else p.af, tol, 1.0)
    regime = "a+(n-2)b=0" if degenerate else "a+(n-2)b!=0"
    if degenerate:
        branch, need = "(i)", {"conformal": report.max_conformal}
    elif not a_zero:
        branch, need = "(ii)", {"conformal": report.max_conformal, "concircular": report.max_concircular}
    else:
        branch, need = "(iii)", {"einstein": report.max_einstein}
    passed = {k: bool(v <= thr) for k, v in need.items()}
    flat = report.max_quasi_conformal <= thr
    witnesses = {
        "quasi_conformal": report.max_quasi_conformal,
        "threshold": thr,
        "requirements": {k: {"value": v, "passed": passed[k]} for k, v in need.items()},
    }
    notes = []
    if n == 3:
        notes.append("n = 3: conformal tensor results are informational only")
    if flat:
        return ClassificationReport(branch, regime, witnesses, all(passed.values()), notes)
    # converse: if the branch conditions hold, C* must vanish up to the combination's growth
    growth = abs((n - 2) * p.bf) + abs(float(reg)) + 1.0
    consistent = not (all(passed.values()) and report.max_quasi_conformal > growth * thr)
    return ClassificationReport("not-flat", regime, witnesses, consistent, notes)


@dataclass
class SymmetryReport:
    max_nabla_quasi_conformal: float
    max_nabla_conformal: float
    max_nabla_concircular: float
    max_nabla_ricci: float
    max_nabla_einstein: float
    max_nabla_scalar: float
    max_trace_nabla_einstein: float
    scale: float
    sample_count: int
    skipped: int
    tol: float

    def flag(self, key: str) -> bool:
        return getattr(self, key) <= self.tol * self.scale

    @property
    def quasi_conformally_symmetric(self) -> bool:
        return self.flag("max_nabla_quasi_conformal")

    @property
    def conformally_symmetric(self) -> bool:
        return self.flag("max_nabla_conformal")

    @property
    def concircularly_symmetric(self) -> bool:
        return self.flag("max_nabla_concircular")

    def to_json(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "max_nabla_quasi_conformal", "max_nabla_conformal", "max_nabla_concircular",
            "max_nabla_ricci", "max_nabla_einstein", "max_nabla_scalar", "max_trace_nabla_einstein",
            "scale", "sample_count", "skipped", "tol")}
        out["flags"] = {
            "quasi_conformally_symmetric": self.quasi_conformally_symmetric,
            "conformally_symmetric": self.conformally_symmetric,
            "concircularly_symmetric": self.concircularly_symmetric,
            "ricci_parallel": self.flag("max_nabla_ricci"),
            "einstein_parallel": self.flag("max_nabla_einstein"),
            "scalar_constant": self.flag("max_nabla_scalar"),
        }
        return out


def symmetry_scan(spec: ManifoldSpec, p: QCParams, sampling: SamplingConfig | None = None,
                  batch: GeometryBatch | None = None) -> SymmetryReport:
    """Maxima over samples and directions of the covariant derivatives."""
    sampling = sampling or SamplingConfig()
    skipped = 0
    if batch is None:
        pts, skipped = _valid_samples(spec, sampling)
        batch = geometry_batch(spec, pts, with_derivatives=True)
    d = nabla_family_arrays(batch, p)
    trace = np.einsum("bij,buij->bu", batch.g_inv, batch.nabla_E)
    return SymmetryReport(
        max_nabla_quasi_conformal=float(np.max(np.abs(d["Cstar"]))),
        max_nabla_conformal=float(np.max(np.abs(d["C"]))) if "C" in d else float("nan"),
        max_nabla_concircular=float(np.max(np.abs(d["Z"]))),
        max_nabla_ricci=float(np.max(np.abs(batch.nabla_S))),
        max_nabla_einstein=float(np.max(np.abs(batch.nabla_E))),
        max_nabla_scalar=float(np.max(np.abs(batch.nabla_r))),
        max_trace_nabla_einstein=float(np.max(np.abs(trace))),
        scale=scale_of(batch.R),
        sample_count=len(batch),
        skipped=skipped,
        tol=sampling_tol(sampling),
    )
