"""Dimension of the space of parallel symmetric (0,2) tensors.

A symmetric ``H`` with ``nabla H = 0`` commutes with every curvature
endomorphism: for all ``X, Y, Z, V``

    H(R(X,Y)Z, V) + H(Z, R(X,Y)V) = 0                 (zeroth order)
    H((nabla_U R)(X,Y)Z, V) + H(Z, (nabla_U R)(X,Y)V) = 0   (first order)

Unknowns are the coordinates of ``H`` at the base point in the
Frobenius-orthonormal basis of symmetric matrices.  Zeroth-order rows from
other points are pulled back to the base point through the parallel
transport map along a straight chart segment.  The null space of the
stacked rows is the algebraic estimate; every null vector is then
transported around a set of small loops and discarded if it does not come
back to itself.

The index counts parallel symmetric tensors, not only the non-degenerate
ones: adding a multiple of ``g`` turns any parallel symmetric tensor into
a non-degenerate one, so both counts agree.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometryBatch, geometry_batch, scale_of, valid_mask
from .manifold import ManifoldSpec
from .sampling import SamplingConfig, sample_points
from .transport import DEFAULT_STEPS, default_loops, transport_batch

NULLITY_TOL = 1e-7
LOOP_TOL = 1e-6
ROW_DROP_TOL = 1e-13
DEFAULT_SAMPLE_COUNT = 8
DEFAULT_REACH = 0.5


def symmetric_basis(n: int) -> np.ndarray:
    """Frobenius-orthonormal basis of symmetric ``n x n`` matrices, shape ``(m, n, n)``."""
    mats = []
    for i in range(n):
        for j in range(i, n):
            e = np.zeros((n, n))
            if i == j:
                e[i, i] = 1.0
            else:
                e[i, j] = e[j, i] = 1 / np.sqrt(2)
            mats.append(e)
    return np.array(mats)


def vectorize(H: np.ndarray) -> np.ndarray:
    """Coordinates of symmetric matrices in :func:`symmetric_basis`."""
    basis = symmetric_basis(H.shape[-1])
    return np.einsum("...ij,bij->...b", H, basis)


def unvectorize(c: np.ndarray, n: int) -> np.ndarray:
    return np.einsum("...b,bij->...ij", c, symmetric_basis(n))


def curvature_operators(Rvec: np.ndarray) -> np.ndarray:
    """Linear functionals on ``H`` for the zeroth-order condition.

    ``Rvec[..., i, j, k, m]`` are components of ``R(d_i, d_j) d_k``.  The result
    ``L[..., row, a, b]`` (rows over ``i < j``, ``k <= l``) satisfies
    ``sum_ab L[row, a, b] H[a, b] = H(R d_k, d_l) + H(d_k, R d_l)``.
    """
    n = Rvec.shape[-1]
    ij = [(i, j) for i in range(n) for j in range(i + 1, n)]
    kl = [(k, l) for k in range(n) for l in range(k, n)]
    batch = Rvec.shape[:-4]
    L = np.zeros(batch + (len(ij) * len(kl), n, n))
    row = 0
    for i, j in ij:
        for k, l in kl:
            # H[m, l] Rvec[i,j,k,m] + H[k, m] Rvec[i,j,l,m]
            L[..., row, :, l] += Rvec[..., i, j, k, :]
            L[..., row, k, :] += Rvec[..., i, j, l, :]
            row += 1
    return 0.5 * (L + np.swapaxes(L, -1, -2))


def _rows_from_operators(L: np.ndarray) -> np.ndarray:
    return vectorize(L).reshape(-1, L.shape[-1] * (L.shape[-1] + 1) // 2)


def _clean_rows(rows: np.ndarray, scale: float) -> np.ndarray:
    if rows.size == 0:
        return rows
    norms = np.linalg.norm(rows, axis=1)
    rows = rows[norms > ROW_DROP_TOL * scale]
    if rows.size == 0:
        return rows
    return np.unique(rows, axis=0)


def zeroth_constraints(b) -> np.ndarray:
    """Zeroth-order rows at one bundle; shape ``(rows, m)``, zero rows dropped."""
    L = curvature_operators(b.Rvec)
    return _clean_rows(_rows_from_operators(L), b.scale)


def first_constraints(b) -> np.ndarray:
    """First-order rows built from ``nabla R`` at one bundle."""
    if b.nabla_R is None:
        raise ValueError("first_constraints needs a bundle computed with derivatives")
    dRvec = np.einsum("uijkl,lm->uijkm", b.nabla_R.components, b.metric.g_inv.components)
    L = curvature_operators(dRvec)
    return _clean_rows(_rows_from_operators(L), b.scale)


def _batch_rvec_ops(batch: GeometryBatch, order: int) -> np.ndarray:
    """Operators ``L[point, row, a, b]`` for every point of a batch."""
    ops = [curvature_operators(batch.Rvec)]
    if order >= 1:
        dRvec = np.einsum("puijkl,plm->puijkm", batch.nabla_R, batch.g_inv)
        L1 = curvature_operators(dRvec)
        ops.append(L1.reshape(L1.shape[0], -1, L1.shape[-2], L1.shape[-1]))
    return np.concatenate(ops, axis=1)


@dataclass
class ConstraintSystem:
    base_point: np.ndarray
    rows: np.ndarray  # (rows, m)
    provenance: list = field(default_factory=list)  # (source point index or -1, order, row count)
    scale: float = 1.0

    @property
    def m(self) -> int:
        return self.rows.shape[1]


@dataclass
class IndexEstimate:
    index: int
    algebraic_nullity: int
    singular_values: np.ndarray
    nullity_tol: float
    basis: np.ndarray  # (index, n, n); basis[0] is g
    transport_residuals: np.ndarray
    loop_residuals: np.ndarray
    base_point: np.ndarray
    warnings: list = field(default_factory=list)
    loop_tol: float = LOOP_TOL
    sample_count: int = 0

    @property
    def decomposable(self) -> bool:
        return self.index > 1

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "algebraic_nullity": self.algebraic_nullity,
            "decomposable": self.decomposable,
            "singular_values": self.singular_values.tolist(),
            "nullity_tol": self.nullity_tol,
            "loop_tol": self.loop_tol,
            "base_point": self.base_point.tolist(),
            "basis": self.basis.tolist(),
            "transport_residuals": self.transport_residuals.tolist(),
            "loop_residuals": self.loop_residuals.tolist(),
            "sample_count": self.sample_count,
            "warnings": list(self.warnings),
        }


@dataclass
class IndexConfig:
    base_point: np.ndarray | None = None
    sample_count: int = DEFAULT_SAMPLE_COUNT
    constraint_order: int = 1
    nullity_tol: float = NULLITY_TOL
    loop_set: np.ndarray | None = None
    steps_per_segment: int = DEFAULT_STEPS
    seed: int = 0
    reach: float = DEFAULT_REACH
    loop_tol: float = LOOP_TOL
    check_second_base: bool = True


def _neighbourhood_samples(spec: ManifoldSpec, base: np.ndarray, count: int, seed: int, reach: float) -> np.ndarray:
    lo = np.maximum(spec.lower, base - reach)
    hi = np.minimum(spec.upper, base + reach)
    local = ManifoldSpec(spec.name, spec.coords, spec.metric, tuple(zip(lo, hi)), spec.connection)
    pts = sample_points(local, SamplingConfig(count=count, seed=seed))
    return pts[valid_mask(spec, pts)]


def pullback_maps(spec: ManifoldSpec, base: np.ndarray, targets: np.ndarray, steps: int) -> np.ndarray:
    """Transport of every symmetric basis matrix from ``base`` to each target.

    Returns ``P[target, b, i, j]``.
    """
    n = spec.n
    basis = symmetric_basis(n)
    if len(targets) == 0:
        return np.zeros((0,) + basis.shape)
    paths = np.stack([np.broadcast_to(base, targets.shape), targets], axis=1)
    vals = np.broadcast_to(basis, (len(targets),) + basis.shape)
    return transport_batch(spec, paths, vals, "ll", steps)


def assemble_constraints(spec: ManifoldSpec, base: np.ndarray, samples: np.ndarray, order: int,
                         steps: int) -> tuple[ConstraintSystem, np.ndarray | None]:
    """Stack base-point rows and pulled-back rows from ``samples``."""
    n = spec.n
    base_batch = geometry_batch(spec, base[None], with_derivatives=order >= 1)
    scale = scale_of(base_batch.R)
    L0 = _batch_rvec_ops(base_batch, order)[0]
    blocks = [_rows_from_operators(L0)]
    prov = [(-1, order, blocks[0].shape[0])]
    P = None
    if len(samples):
        sb = geometry_batch(spec, samples)
        scale = max(scale, scale_of(sb.R))
        Ls = curvature_operators(sb.Rvec)  # (S, rows, n, n)
        P = pullback_maps(spec, base, samples, steps)  # (S, m, n, n)
        pulled = np.einsum("srij,sbij->srb", Ls, P)
        for s in range(len(samples)):
            blocks.append(pulled[s])
            prov.append((s, 0, pulled.shape[1]))
    rows = _clean_rows(np.concatenate(blocks, axis=0), scale)
    return ConstraintSystem(base, rows if rows.size else np.zeros((0, n * (n + 1) // 2)), prov, scale), (Ls if len(samples) else None, P)


def null_space(rows: np.ndarray, m: int, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Singular values and an orthonormal null basis (columns)."""
    if rows.shape[0] == 0:
        return np.zeros(0), np.eye(m)
    _, s, vt = np.linalg.svd(rows, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        return s, np.eye(m)
    rank = int(np.sum(s > tol * s[0]))
    return s, vt[rank:].T


def _with_metric_first(null: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, float]:
    """Rebuild the null basis as ``[g, orthonormal complement]`` in coordinates."""
    cg = vectorize(g)
    cg_unit = cg / np.linalg.norm(cg)
    inside = null @ (null.T @ cg_unit)
    g_residual = float(np.linalg.norm(cg_unit - inside))
    comp = null - np.outer(cg_unit, cg_unit @ null)
    if comp.shape[1] == 0:
        return cg[None, :], g_residual
    u, s, _ = np.linalg.svd(comp, full_matrices=False)
    keep = max(0, null.shape[1] - 1)
    others = u[:, :keep].T
    return np.vstack([cg[None, :], others]), g_residual


def loop_residuals(spec: ManifoldSpec, loops: np.ndarray, mats: np.ndarray, steps: int) -> np.ndarray:
    """``|P H - H| / |H|`` per (loop, matrix)."""
    if len(loops) == 0 or len(mats) == 0:
        return np.zeros((len(loops), len(mats)))
    vals = np.broadcast_to(mats, (len(loops),) + mats.shape)
    back = transport_batch(spec, loops, vals, "ll", steps)
    num = np.linalg.norm(back - mats[None], axis=(-2, -1))
    den = np.linalg.norm(mats, axis=(-2, -1))[None]
    return num / den


def estimate_index(spec: ManifoldSpec, config: IndexConfig | None = None) -> IndexEstimate:
    config = config or IndexConfig()
    n = spec.n
    m = n * (n + 1) // 2
    base = spec.center if config.base_point is None else spec.check_point(np.asarray(config.base_point, float))
    if not valid_mask(spec, base[None])[0]:
        raise ValueError(f"base point {base.tolist()} has a degenerate metric")
    if config.sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    samples = _neighbourhood_samples(spec, base, config.sample_count, config.seed, config.reach)
    if len(samples) == 0:
        raise ValueError("no valid sample points near the base point")
    system, (Ls, P) = assemble_constraints(spec, base, samples, config.constraint_order, config.steps_per_segment)
    s, null = null_space(system.rows, m, config.nullity_tol)
    warnings = []
    g = geometry_batch(spec, base[None]).g[0]
    coords, g_res = _with_metric_first(null, g)
    if g_res > 1e-6:
        warnings.append(f"metric not in the algebraic null space (residual {g_res:.2e})")
    algebraic = null.shape[1]
    mats = unvectorize(coords, n)

    # remote residual of the zeroth-order condition for each transported basis element
    if Ls is not None:
        moved = np.einsum("bc,scij->sbij", coords, P)
        res = np.einsum("srij,sbij->sbr", Ls, moved)
        transport_res = np.max(np.abs(res), axis=(0, 2)) / system.scale
    else:
        transport_res = np.zeros(len(mats))

    loops = default_loops(spec, base) if config.loop_set is None else np.asarray(config.loop_set, float)
    lres = loop_residuals(spec, loops, mats, config.steps_per_segment)
    worst = lres.max(axis=0) if len(loops) else np.zeros(len(mats))
    keep = worst <= config.loop_tol
    if not keep[0]:
        warnings.append(f"metric failed loop validation (residual {worst[0]:.2e})")
    validated = int(keep.sum())
    if validated != algebraic:
        warnings.append(f"transport-validated count {validated} differs from algebraic nullity {algebraic}")
    basis = mats[keep]
    index = max(1, validated)

    if config.check_second_base and config.sample_count >= 16 and len(samples):
        alt = samples[0]
        sys2, _ = assemble_constraints(spec, alt, samples[1:], config.constraint_order, config.steps_per_segment)
        _, null2 = null_space(sys2.rows, m, config.nullity_tol)
        if null2.shape[1] != algebraic:
            warnings.append(f"nullity {null2.shape[1]} at second base point {alt.tolist()} differs from {algebraic}")

    return IndexEstimate(
        index=index,
        algebraic_nullity=algebraic,
        singular_values=s,
        nullity_tol=config.nullity_tol,
        basis=basis,
        transport_residuals=transport_res[keep],
        loop_residuals=worst,
        base_point=base,
        warnings=warnings,
        loop_tol=config.loop_tol,
        sample_count=len(samples),
    )
