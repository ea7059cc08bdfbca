"""Connections and curvature at points of a chart.

Conventions
-----------
* ``Gamma[m, i, j]`` is the coefficient of ``nabla_{d_i} d_j = Gamma^m_ij d_m``.
* ``R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z`` and the
  covariant form is ``R(X, Y, Z, V) = g(R(X, Y)Z, V)``; ``Rvec[i, j, k, m]``
  is the ``d_m`` component of ``R(d_i, d_j) d_k``.
* Ricci ``S(X, Y) = sum_a eps_a R(e_a, X, Y, e_a) = g^{ab} R(d_a, X, Y, d_b)``,
  scalar ``r = g^{ij} S_ij``, Ricci operator ``S(X, Y) = g(QX, Y)`` and the
  Einstein tensor ``E = S - (r/n) g``.
* Covariant derivatives put the differentiation slot first:
  ``nabla_R[u, i, j, k, l] = (nabla_{d_u} R)(d_i, d_j, d_k, d_l)``.
* A metric connection is Levi-Civita plus a contorsion ``K^m_ij``.  With the
  torsion lowered on its first index, ``T_lij = g_lm T^m_ij``, the unique
  metric-compatible contorsion is ``K_lij = (T_lij + T_jli + T_ilj) / 2``.

Internally every quantity is a jet array of shape ``(M, *batch, *slots)``
(see :mod:`curvindex.exprjet`), so a single pass handles many points.
"""
from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

from .exprjet import algebra, eval_jet, order_of_size, to_string
from .manifold import ManifoldSpec
from .tensors import (
    CO,
    CONTRA,
    DET_DEGENERACY,
    EIGEN_DEGENERACY,
    DegenerateMetricError,
    MetricAtPoint,
    TensorValue,
    metric_from_components,
)

TORSION_ANTISYMMETRY_TOL = 1e-10


class ConnectionError_(ValueError):
    """Invalid connection data (e.g. torsion not antisymmetric)."""


def scale_of(*arrays) -> float:
    """``max(1, max|t|)`` over the given arrays; the residual normaliser."""
    m = max((float(np.max(np.abs(a))) if np.size(a) else 0.0) for a in arrays)
    return max(1.0, m)


# ---------------------------------------------------------------------------
# batched jet machinery


def _eval_grid(nodes, points, order, cache):
    key = (to_string(nodes), order)
    if key not in cache:
        cache[key] = eval_jet(nodes, points, order).values
    return cache[key]


def _truncate(a: np.ndarray, n: int, order: int) -> np.ndarray:
    return a[: algebra(n, order).size]


def _grad(a: np.ndarray, n: int, nslots: int) -> np.ndarray:
    """Stack partial derivatives; the new slot goes in front of the tensor slots."""
    alg = algebra(n, order_of_size(n, a.shape[0]))
    return np.stack([alg.deriv(a, c) for c in range(n)], axis=a.ndim - nslots)


def metric_jets(spec: ManifoldSpec, pts: np.ndarray, order: int, cache=None) -> np.ndarray:
    """Metric jet array of shape ``(M, *batch, n, n)``; ``pts`` is ``(n, *batch)``."""
    cache = {} if cache is None else cache
    n = spec.n
    out = np.empty((algebra(n, order).size,) + pts.shape[1:] + (n, n))
    for i in range(n):
        for j in range(i + 1):
            v = _eval_grid(spec.metric[i][j], pts, order, cache)
            out[..., i, j] = v
            out[..., j, i] = v
    return out


def check_metric_values(g0: np.ndarray) -> np.ndarray:
    """Per-point validity mask for metric values of shape ``(*batch, n, n)``."""
    n = g0.shape[-1]
    norm = np.max(np.abs(g0), axis=(-2, -1))
    det = np.linalg.det(g0)
    lam = np.linalg.eigvalsh(g0)
    ok = (norm > 0) & (np.abs(det) >= DET_DEGENERACY * norm**n)
    ok &= np.min(np.abs(lam), axis=-1) >= EIGEN_DEGENERACY * norm
    return ok & np.all(np.isfinite(g0), axis=(-2, -1))


def inverse_jets(G: np.ndarray, n: int) -> np.ndarray:
    """Jet of ``g^{-1}`` via the terminating Neumann series."""
    k = order_of_size(n, G.shape[0])
    alg = algebra(n, k)
    A0 = np.zeros_like(G)
    A0[0] = np.linalg.inv(G[0])
    N = G.copy()
    N[0] = 0.0
    X = -alg.einsum("ij,jk->ik", A0, N)
    term = A0
    out = A0.copy()
    for _ in range(k):
        term = alg.einsum("ij,jk->ik", X, term)
        out = out + term
    return out


def levi_civita_jets(G: np.ndarray, Ginv: np.ndarray, n: int) -> np.ndarray:
    """Christoffel symbols of the second kind, one jet order below ``G``."""
    k = order_of_size(n, G.shape[0])
    dG = _grad(G, n, 2)  # dG[c, a, b] = d_c g_ab
    first = 0.5 * (
        np.einsum("...ilj->...lij", dG) + np.einsum("...jli->...lij", dG) - dG
    )
    return algebra(n, k - 1).einsum("ml,lij->mij", _truncate(Ginv, n, k - 1), first)


def contorsion_jets(spec: ManifoldSpec, pts, G: np.ndarray, Ginv: np.ndarray, cache) -> np.ndarray:
    """Contorsion ``K^m_ij`` one jet order below ``G`` (zero for Levi-Civita)."""
    n = spec.n
    k = order_of_size(n, G.shape[0])
    lo = k - 1
    alg = algebra(n, lo)
    conn = spec.connection
    shape = (alg.size,) + G.shape[1:-2] + (n, n, n)
    if conn.kind == "levi_civita":
        return np.zeros(shape)
    Gl = _truncate(G, n, lo)
    Gil = _truncate(Ginv, n, lo)
    if conn.kind == "semi_symmetric":
        if conn.phi is not None:
            phi = _eval_grid(conn.phi, pts, k, cache)
            u = _grad(phi, n, 0)
        else:
            u = np.stack([_eval_grid(e, pts, lo, cache) for e in conn.u], axis=-1)
        U = alg.einsum("ml,l->m", Gil, u)
        return np.einsum("mi,...j->...mij", np.eye(n), u) - alg.einsum("ij,m->mij", Gl, U)
    T = np.empty(shape)
    for a in range(n):
        for i in range(n):
            for j in range(n):
                T[..., a, i, j] = _eval_grid(conn.torsion[a][i][j], pts, lo, cache)
    asym = np.max(np.abs(T[0] + np.swapaxes(T[0], -1, -2)))
    if asym > TORSION_ANTISYMMETRY_TOL * scale_of(T[0]):
        raise ConnectionError_(f"torsion not antisymmetric in its lower indices (residual {asym:.3e})")
    Tl = alg.einsum("lm,mij->lij", Gl, T)
    Kl = 0.5 * (Tl + np.einsum("...jli->...lij", Tl) + np.einsum("...ilj->...lij", Tl))
    return alg.einsum("ml,lij->mij", Gil, Kl)


def covariant_derivative(dT: np.ndarray, T: np.ndarray, Gam: np.ndarray, variance: str) -> np.ndarray:
    """Covariant derivative at a point.

    ``dT`` holds plain partials with the derivative slot first among the tensor
    slots, ``T`` the values and ``Gam`` the connection, all without a jet axis.
    ``variance`` is a string of ``'l'``/``'u'`` flags, one per slot of ``T``.
    """
    r = len(variance)
    letters = string.ascii_lowercase[:r]
    out = dT.copy()
    for s, v in enumerate(variance):
        src = letters[:s] + "m" + letters[s + 1:]
        if v == CO:
            out -= np.einsum(f"...mz{letters[s]},...{src}->...z{letters}", Gam, T)
        else:
            dst = letters
            out += np.einsum(f"...{letters[s]}zm,...{src}->...z{dst}", Gam, T)
    return out


@dataclass
class GeometryBatch:
    """Point values of every curvature quantity, batched on leading axes."""

    points: np.ndarray  # (B, n)
    g: np.ndarray
    g_inv: np.ndarray
    gamma: np.ndarray
    gamma_jets: np.ndarray  # (M, B, n, n, n)
    contorsion: np.ndarray
    torsion: np.ndarray
    Rvec: np.ndarray
    R: np.ndarray
    S: np.ndarray
    r: np.ndarray
    Q: np.ndarray
    E: np.ndarray
    nabla_g: np.ndarray | None = None
    nabla_R: np.ndarray | None = None
    nabla_S: np.ndarray | None = None
    nabla_E: np.ndarray | None = None
    nabla_r: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.g.shape[-1]

    def __len__(self) -> int:
        return self.points.shape[0]


def geometry_batch(spec: ManifoldSpec, points, with_derivatives: bool = False) -> GeometryBatch:
    """Curvature data at each row of ``points`` (shape ``(B, n)``)."""
    n = spec.n
    pts_rows = np.atleast_2d(np.asarray(points, dtype=float))
    spec.check_point(pts_rows.T)
    pts = pts_rows.T
    k = 3 if with_derivatives else 2
    cache: dict = {}
    G = metric_jets(spec, pts, k, cache)
    ok = check_metric_values(G[0])
    if not np.all(ok):
        bad = pts_rows[~ok][0]
        raise DegenerateMetricError(f"degenerate metric at {bad.tolist()}")
    Ginv = inverse_jets(G, n)
    K = contorsion_jets(spec, pts, G, Ginv, cache)
    Gam = levi_civita_jets(G, Ginv, n) + K

    alg2 = algebra(n, k - 2)
    Gam2 = _truncate(Gam, n, k - 2)
    dGam = _grad(Gam, n, 3)  # dGam[c, m, i, j] = d_c Gamma^m_ij
    Rvec = (
        np.einsum("...imjk->...ijkm", dGam)
        - np.einsum("...jmik->...ijkm", dGam)
        + alg2.einsum("mil,ljk->ijkm", Gam2, Gam2)
        - alg2.einsum("mjl,lik->ijkm", Gam2, Gam2)
    )
    G2 = _truncate(G, n, k - 2)
    Gi2 = _truncate(Ginv, n, k - 2)
    R = alg2.einsum("ijkm,lm->ijkl", Rvec, G2)
    S = alg2.einsum("ab,ajkb->jk", Gi2, R)
    r = alg2.einsum("jk,jk->", Gi2, S)
    E = S - _scalar_times(alg2, r, G2) / n
    Q = alg2.einsum("ak,jk->aj", Gi2, S)

    K0 = K[0]
    g0, Gam0 = G[0], Gam[0]
    batch = GeometryBatch(
        points=pts_rows,
        g=g0,
        g_inv=Ginv[0],
        gamma=Gam0,
        gamma_jets=Gam,
        contorsion=K0,
        torsion=Gam0 - np.swapaxes(Gam0, -1, -2),
        Rvec=Rvec[0],
        R=R[0],
        S=S[0],
        r=r[0],
        Q=Q[0],
        E=E[0],
    )
    batch.nabla_g = covariant_derivative(_grad(G, n, 2)[0], g0, Gam0, "ll")
    if with_derivatives:
        batch.nabla_R = covariant_derivative(_grad(R, n, 4)[0], R[0], Gam0, "llll")
        batch.nabla_S = covariant_derivative(_grad(S, n, 2)[0], S[0], Gam0, "ll")
        batch.nabla_E = covariant_derivative(_grad(E, n, 2)[0], E[0], Gam0, "ll")
        batch.nabla_r = _grad(r, n, 0)[0]
    return batch


def _scalar_times(alg, s: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Jet product of a scalar field with a tensor field."""
    extra = T.ndim - s.ndim
    return alg.einsum("," + "ab"[:extra] + "->" + "ab"[:extra], s, T)


def valid_mask(spec: ManifoldSpec, points) -> np.ndarray:
    """Which rows of ``points`` have a non-degenerate, finite metric."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    try:
        G = metric_jets(spec, pts.T, 0)
    except ArithmeticError:
        return np.array([_point_ok(spec, p) for p in pts], dtype=bool)
    return check_metric_values(G[0])


def _point_ok(spec, p) -> bool:
    try:
        G = metric_jets(spec, p.reshape(-1, 1), 0)
    except ArithmeticError:
        return False
    return bool(check_metric_values(G[0])[0])


# ---------------------------------------------------------------------------
# pointwise API


@dataclass(frozen=True, eq=False)
class ConnectionAtPoint:
    gamma: TensorValue  # (1,2) with slot order (m, i, j)
    gamma_jets: np.ndarray  # (M, n, n, n) partial-derivative values
    torsion: TensorValue
    contorsion: TensorValue


@dataclass(frozen=True, eq=False)
class CurvatureBundle:
    point: np.ndarray
    metric: MetricAtPoint
    connection: ConnectionAtPoint
    R: TensorValue
    S: TensorValue
    r: float
    Q: TensorValue
    E: TensorValue
    nabla_g: TensorValue
    nabla_R: TensorValue | None = None
    nabla_S: TensorValue | None = None
    nabla_E: TensorValue | None = None
    nabla_r: TensorValue | None = None

    @property
    def n(self) -> int:
        return self.metric.n

    @property
    def has_derivatives(self) -> bool:
        return self.nabla_R is not None

    @property
    def Rvec(self) -> np.ndarray:
        """``R(d_i, d_j) d_k`` components, indexed ``[i, j, k, m]``."""
        return np.einsum("ijkl,lm->ijkm", self.R.components, self.metric.g_inv.components)

    @property
    def scale(self) -> float:
        return scale_of(self.R.components)


def metric_at(spec: ManifoldSpec, point) -> MetricAtPoint:
    p = spec.check_point(point)
    G = metric_jets(spec, p.reshape(-1, 1), 0)
    return metric_from_components(G[0, 0])


def _bundle_from_batch(b: GeometryBatch, idx: int) -> CurvatureBundle:
    metric = metric_from_components(b.g[idx])
    conn = ConnectionAtPoint(
        TensorValue(b.gamma[idx], (CONTRA, CO, CO)),
        b.gamma_jets[:, idx],
        TensorValue(b.torsion[idx], (CONTRA, CO, CO)),
        TensorValue(b.contorsion[idx], (CONTRA, CO, CO)),
    )

    def opt(arr):
        return None if arr is None else TensorValue.covariant(arr[idx])

    return CurvatureBundle(
        point=b.points[idx].copy(),
        metric=metric,
        connection=conn,
        R=TensorValue.covariant(b.R[idx]),
        S=TensorValue.covariant(b.S[idx]),
        r=float(b.r[idx]),
        Q=TensorValue(b.Q[idx], (CONTRA, CO)),
        E=TensorValue.covariant(b.E[idx]),
        nabla_g=TensorValue.covariant(b.nabla_g[idx]),
        nabla_R=opt(b.nabla_R),
        nabla_S=opt(b.nabla_S),
        nabla_E=opt(b.nabla_E),
        nabla_r=opt(b.nabla_r),
    )


def connection_at(spec: ManifoldSpec, point) -> ConnectionAtPoint:
    return curvature_bundle(spec, point).connection


def curvature_bundle(spec: ManifoldSpec, point, with_derivatives: bool = False) -> CurvatureBundle:
    p = spec.check_point(point)
    metric_at(spec, p)  # raises on degeneracy with a pointwise message
    return _bundle_from_batch(geometry_batch(spec, p.reshape(1, -1), with_derivatives), 0)


def bundles(spec: ManifoldSpec, points, with_derivatives: bool = False) -> list[CurvatureBundle]:
    b = geometry_batch(spec, points, with_derivatives)
    return [_bundle_from_batch(b, i) for i in range(len(b))]


def symmetry_residuals(b: CurvatureBundle) -> tuple[float, float]:
    """Normalised residuals of the two antisymmetries of the (0,4) curvature."""
    R = b.R.components
    sc = scale_of(R)
    first = float(np.max(np.abs(R + R.transpose(1, 0, 2, 3)))) / sc
    second = float(np.max(np.abs(R + R.transpose(0, 1, 3, 2)))) / sc
    return first, second


def ricci_symmetry_residual(b: CurvatureBundle) -> float:
    S = b.S.components
    return float(np.max(np.abs(S - S.T))) / scale_of(S)


def metric_compatibility_residual(b: CurvatureBundle) -> float:
    return b.nabla_g.max_abs() / scale_of(b.metric.g.components)


def semi_symmetric_ricci_residual(spec: ManifoldSpec, point) -> float:
    """Compare the curvature-derived Ricci tensor of a semi-symmetric
    connection with ``S - (n-2) alpha - trace(alpha) g`` where
    ``alpha(X,Y) = (nabla_X u)(Y) - u(X)u(Y) + u(U)g(X,Y)/2`` and ``nabla``
    is Levi-Civita.
    """
    if spec.connection.kind != "semi_symmetric":
        raise ConnectionError_("semi_symmetric_ricci_residual needs a semi_symmetric connection")
    n = spec.n
    p = spec.check_point(point)
    bar = curvature_bundle(spec, p)
    lc = curvature_bundle(_levi_civita(spec), p)
    pts = p.reshape(-1, 1)
    conn = spec.connection
    if conn.phi is not None:
        phi = eval_jet(conn.phi, pts, 2).values
        u_jets = _grad(phi, n, 0)  # order 1
    else:
        u_jets = np.stack([eval_jet(e, pts, 1).values for e in conn.u], axis=-1)
    u = u_jets[0, 0]
    du = _grad(u_jets, n, 1)[0, 0]  # du[x, y] = d_x u_y
    gam = lc.connection.gamma.components
    nabla_u = du - np.einsum("mxy,m->xy", gam, u)
    g = bar.metric.g.components
    gi = bar.metric.g_inv.components
    uU = float(u @ gi @ u)
    alpha = nabla_u - np.outer(u, u) + 0.5 * uU * g
    rhs = lc.S.components - (n - 2) * alpha - float(np.einsum("ij,ij->", gi, alpha)) * g
    lhs = bar.S.components
    return float(np.max(np.abs(lhs - rhs))) / scale_of(lhs, rhs)


def _levi_civita(spec: ManifoldSpec) -> ManifoldSpec:
    from .manifold import ConnectionSpec

    return spec.with_connection(ConnectionSpec())


def exterior_derivative_residual(spec: ManifoldSpec, point) -> float:
    """``max|d_i u_j - d_j u_i|`` for an explicit semi-symmetric 1-form."""
    conn = spec.connection
    if conn.kind != "semi_symmetric" or conn.u is None:
        return 0.0
    pts = spec.check_point(point).reshape(-1, 1)
    u = np.stack([eval_jet(e, pts, 1).values for e in conn.u], axis=-1)
    du = _grad(u, spec.n, 1)[0, 0]
    return float(np.max(np.abs(du - du.T)))
