"""Independent reference computations and the catalog-wide check suites.

The finite-difference oracle shares nothing with the jet pipeline except
the expression parser: metric values come from the plain float evaluator,
derivatives from central differences, the Levi-Civita symbols from their
textbook formula, and the contorsion from a least-squares solve of the two
linear conditions that define it (metric compatibility and prescribed
torsion).
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .catalog import catalog_instance, catalog_instances
from .exprjet import evaluate
from .family import (
    QCParams,
    classify_flatness,
    combination_residuals_batch,
    concircular_array,
    conformal_array,
    flatness_scan,
)
from .geometry import geometry_batch, scale_of, semi_symmetric_ricci_residual
from .index import estimate_index
from .manifold import ManifoldSpec, spec_from_json
from .sampling import SamplingConfig, sample_points
from .tensors import metric_from_components
from .transport import transport_batch

FD_STEP = 1e-5
FD_OUTER_STEP = 1e-4
FD_TOL = 1e-5


# ---------------------------------------------------------------------------
# finite-difference oracle

def fd_metric(spec: ManifoldSpec, x) -> np.ndarray:
    n = spec.n
    return np.array([[evaluate(spec.metric[i][j], x) for j in range(n)] for i in range(n)])


def _fd_grad(fun, x, h):
    """Central differences; result has the derivative axis first."""
    x = np.asarray(x, dtype=float)
    out = []
    for c in range(len(x)):
        e = np.zeros_like(x)
        e[c] = h
        out.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * h))
    return np.array(out)


def _one_form(spec: ManifoldSpec, x, h) -> np.ndarray:
    conn = spec.connection
    if conn.phi is not None:
        return _fd_grad(lambda y: evaluate(conn.phi, y), x, h)
    return np.array([evaluate(e, x) for e in conn.u])


def fd_torsion(spec: ManifoldSpec, x, h=FD_STEP) -> np.ndarray:
    """``T[m, i, j]`` of the spec's connection at ``x``."""
    n = spec.n
    conn = spec.connection
    if conn.kind == "levi_civita":
        return np.zeros((n, n, n))
    if conn.kind == "general_torsion":
        return np.array([[[evaluate(conn.torsion[m][i][j], x) for j in range(n)] for i in range(n)] for m in range(n)])
    u = _one_form(spec, x, h)
    d = np.eye(n)
    # nabla_X Y - nabla_Y X with the semi-symmetric term u(Y)X - u(X)Y
    return np.einsum("mi,j->mij", d, u) - np.einsum("mj,i->mij", d, u)


def solve_contorsion(g: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Least-squares solve for ``K[m, i, j]`` with ``K^m_ij - K^m_ji = T^m_ij`` and
    ``g_lm K^m_ij + g_jm K^m_il = 0``."""
    n = g.shape[0]
    N = n ** 3

    def idx(m, i, j):
        return (m * n + i) * n + j

    rows, rhs = [], []
    for m in range(n):
        for i in range(n):
            for j in range(n):
                r = np.zeros(N)
                r[idx(m, i, j)] += 1
                r[idx(m, j, i)] -= 1
                rows.append(r)
                rhs.append(T[m, i, j])
    for i in range(n):
        for j in range(n):
            for l in range(n):
                r = np.zeros(N)
                for m in range(n):
                    r[idx(m, i, j)] += g[l, m]
                    r[idx(m, i, l)] += g[j, m]
                rows.append(r)
                rhs.append(0.0)
    sol = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)[0]
    return sol.reshape(n, n, n)


def fd_christoffel(spec: ManifoldSpec, x, h=FD_STEP) -> np.ndarray:
    """``Gamma[m, i, j]`` of the full connection at ``x``."""
    g = fd_metric(spec, x)
    gi = np.linalg.inv(g)
    dg = _fd_grad(lambda y: fd_metric(spec, y), x, h)  # dg[c, a, b]
    lower = 0.5 * (np.einsum("iaj->aij", dg) + np.einsum("jai->aij", dg) - dg)  # [a, i, j]
    lc = np.einsum("ma,aij->mij", gi, lower)
    return lc + solve_contorsion(g, fd_torsion(spec, x, h))


def fd_riemann(spec: ManifoldSpec, x, h=FD_STEP, h_outer=FD_OUTER_STEP) -> np.ndarray:
    """``Rvec[i, j, k, m]`` from nested central differences of the symbols."""
    G = fd_christoffel(spec, x, h)
    dG = _fd_grad(lambda y: fd_christoffel(spec, y, h), x, h_outer)  # [c, m, i, j]
    return (np.einsum("imjk->ijkm", dG) - np.einsum("jmik->ijkm", dG)
            + np.einsum("mil,ljk->ijkm", G, G) - np.einsum("mjl,lik->ijkm", G, G))


def fd_errors(spec: ManifoldSpec, points) -> tuple[float, float]:
    """Max relative errors of the jet symbols and curvature against the oracle."""
    batch = geometry_batch(spec, points)
    eg = er = 0.0
    for k, x in enumerate(np.atleast_2d(points)):
        G_ref = fd_christoffel(spec, x)
        R_ref = fd_riemann(spec, x)
        eg = max(eg, float(np.max(np.abs(batch.gamma[k] - G_ref))) / max(1.0, float(np.max(np.abs(G_ref)))))
        er = max(er, float(np.max(np.abs(batch.Rvec[k] - R_ref))) / max(1.0, float(np.max(np.abs(R_ref)))))
    return eg, er


# ---------------------------------------------------------------------------
# holonomy of the octant triangle on the unit sphere

def _to_chart(v: np.ndarray) -> np.ndarray:
    return np.array([np.arccos(np.clip(v[2], -1, 1)), np.arctan2(v[1], v[0]) % (2 * np.pi)])


def octant_triangle(points_per_edge: int = 500) -> np.ndarray:
    """Chart polyline of a geodesic triangle with three right angles.

    The triangle is rotated so its centroid sits at ``(pi/2, pi)``, inside the
    catalog sphere chart.
    """
    c = np.ones(3) / np.sqrt(3)
    t = np.array([-1.0, 0.0, 0.0])
    v = np.cross(c, t)
    s, co = np.linalg.norm(v), c @ t
    K = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    rot = np.eye(3) + K + K @ K * (1 - co) / s ** 2
    verts = [rot @ e for e in np.eye(3)]
    pts = []
    for a, b in ((verts[0], verts[1]), (verts[1], verts[2]), (verts[2], verts[0])):
        for k in range(points_per_edge):
            w = np.sin((1 - k / points_per_edge) * np.pi / 2) * a + np.sin(k / points_per_edge * np.pi / 2) * b
            pts.append(_to_chart(w))
    pts.append(pts[0])
    return np.array(pts)


def triangle_holonomy_angle(points_per_edge: int = 500) -> float:
    """Rotation angle of a vector carried once around the octant triangle."""
    spec = catalog_instance("sphere2")
    path = octant_triangle(points_per_edge)
    g = fd_metric(spec, path[0])
    v0 = np.array([1.0, 0.0])
    v1 = transport_batch(spec, path[None], v0[None], "u", 1)[0]
    cos = (v0 @ g @ v1) / np.sqrt((v0 @ g @ v0) * (v1 @ g @ v1))
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


# ---------------------------------------------------------------------------
# suites

@dataclass
class CheckResult:
    name: str
    subject: str
    passed: bool
    value: float | int | str | None = None
    tol: float | None = None
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "subject": self.subject, "passed": self.passed,
                "value": self.value, "tol": self.tol, "detail": self.detail}


def _label(spec: ManifoldSpec) -> str:
    return spec.params.get("instance", spec.params.get("label", spec.name))


def random_params(count: int = 10, seed: int = 0) -> list[QCParams]:
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        a, b = rng.uniform(-2, 2, size=2)
        out.append(QCParams(float(a), float(b)))
    return out


def _closed_connection(spec: ManifoldSpec) -> bool:
    return spec.connection.kind == "levi_civita" or (spec.connection.kind == "semi_symmetric" and spec.connection.phi is not None)


def identity_checks(spec: ManifoldSpec, seed: int = 0) -> list[CheckResult]:
    """Pointwise identities of one spec."""
    name = _label(spec)
    out = []
    pts = sample_points(spec, SamplingConfig(count=100, seed=seed))
    batch = geometry_batch(spec, pts, with_derivatives=True)
    scale = scale_of(batch.R)

    # metric validity on 200 points
    pts200 = sample_points(spec, SamplingConfig(count=200, seed=seed))
    sigs = set()
    ok = True
    for p in pts200:
        try:
            sigs.add(metric_from_components(fd_metric(spec, p)).signature)
        except ArithmeticError:
            ok = False
    out.append(CheckResult("metric_valid", name, ok and len(sigs) == 1, str(sorted(sigs)), None))

    # combination identity over random coefficients
    worst = max(float(np.max(combination_residuals_batch(batch, p))) for p in random_params(10, seed))
    out.append(CheckResult("combination_identity", name, worst < 1e-10, worst, 1e-10))

    # curvature antisymmetries
    if _closed_connection(spec):
        R = batch.R
        first = float(np.max(np.abs(R + np.swapaxes(R, -4, -3)))) / scale
        second = float(np.max(np.abs(R + np.swapaxes(R, -2, -1)))) / scale
        out.append(CheckResult("curvature_antisymmetry", name, max(first, second) < 1e-9,
                               max(first, second), 1e-9, {"first_pair": first, "second_pair": second}))
        ricci = float(np.max(np.abs(batch.S - np.swapaxes(batch.S, -1, -2)))) / scale
        out.append(CheckResult("ricci_symmetric", name, ricci < 1e-9, ricci, 1e-9))

    # trace of nabla E
    tr = float(np.max(np.abs(np.einsum("bij,buij->bu", batch.g_inv, batch.nabla_E))))
    out.append(CheckResult("einstein_trace", name, tr < 1e-8 * scale, tr, 1e-8 * scale))

    # metric compatibility
    mc = float(np.max(np.abs(batch.nabla_g))) / max(1.0, float(np.max(np.abs(batch.g))))
    out.append(CheckResult("metric_compatible", name, mc < 1e-9, mc, 1e-9))

    # semi-symmetric Ricci formula
    if spec.connection.kind == "semi_symmetric":
        res = max(semi_symmetric_ricci_residual(spec, p) for p in pts[:10])
        out.append(CheckResult("semi_symmetric_ricci_formula", name, res < 1e-7, res, 1e-7))

    # AD vs finite differences on a few points
    eg, er = fd_errors(spec, pts[:3])
    out.append(CheckResult("fd_christoffel", name, eg < FD_TOL, eg, FD_TOL))
    out.append(CheckResult("fd_riemann", name, er < FD_TOL, er, FD_TOL))

    # transport preserves g
    base = spec.center
    targets = pts[:4]
    paths = np.stack([np.broadcast_to(base, targets.shape), targets], axis=1)
    g0 = fd_metric(spec, base)
    moved = transport_batch(spec, paths, np.broadcast_to(g0, (len(targets), spec.n, spec.n)), "ll")
    ref = np.array([fd_metric(spec, t) for t in targets])
    err = float(np.max(np.abs(moved - ref))) / max(1.0, float(np.max(np.abs(ref))))
    out.append(CheckResult("transport_preserves_metric", name, err < 1e-9, err, 1e-9))

    # JSON round trip
    again = spec_from_json(spec.to_json())
    out.append(CheckResult("json_round_trip", name, again.fingerprint() == spec.fingerprint(), None, None))

    # products are block diagonal
    if spec.name in ("product", "einstein_product"):
        nl = _left_dim(spec)
        mixed = _mixed_components(batch.R, nl)
        out.append(CheckResult("product_block_diagonal", name, mixed < 1e-9 * scale, mixed, 1e-9 * scale))
    if spec.name == "einstein_product":
        lam = batch.r / spec.n
        dev = float(np.max(np.abs(batch.S - lam[:, None, None] * batch.g)))
        lam_spread = float(np.ptp(lam))
        cmax = float(np.max(np.abs(conformal_array(batch.R, batch.S, batch.r, batch.g))))
        zmax = float(np.max(np.abs(concircular_array(batch.R, batch.r, batch.g))))
        ok = dev < 1e-8 and lam_spread < 1e-8 and cmax > 1e-3 and zmax > 1e-3
        out.append(CheckResult("einstein_not_conformally_flat", name, ok, dev, 1e-8,
                               {"lambda_spread": lam_spread, "max_conformal": cmax, "max_concircular": zmax}))
    return out


def _left_dim(spec: ManifoldSpec) -> int:
    """Dimension of the first factor of a catalog product."""
    return int(spec.params["split"])


def _mixed_components(R: np.ndarray, nl: int) -> float:
    n = R.shape[-1]
    blocks = np.array([0] * nl + [1] * (n - nl))
    idx = np.indices((n,) * 4)
    labels = blocks[idx]
    mixed = ~np.all(labels == labels[0], axis=0)
    return float(np.max(np.abs(R[..., mixed]))) if mixed.any() else 0.0


def global_identity_checks() -> list[CheckResult]:
    angle = triangle_holonomy_angle()
    return [CheckResult("triangle_holonomy", "sphere2", abs(angle - np.pi / 2) < 1e-4, angle, 1e-4,
                        {"expected": np.pi / 2})]


def _parse_ab(key: str) -> QCParams:
    a, b = key.split(",")
    return QCParams(Fraction(a), Fraction(b))


def theorem_checks(spec: ManifoldSpec, seed: int = 0) -> list[CheckResult]:
    from .audit import AuditConfig, theorem_audit

    name = _label(spec)
    exp = spec.expected
    out = []
    est = estimate_index(spec)
    if "index" in exp:
        out.append(CheckResult("index", name, est.index == exp["index"], est.index, None,
                               {"expected": exp["index"], "algebraic_nullity": est.algebraic_nullity}))
    if "decomposable" in exp:
        out.append(CheckResult("decomposable", name, est.decomposable == exp["decomposable"], est.decomposable))
    n = spec.n
    if n > 2:
        for key, branch in exp.get("branches", {}).items():
            p = _parse_ab(key)
            rep = flatness_scan(spec, p, SamplingConfig(count=64, seed=seed))
            cls = classify_flatness(rep, p, n)
            out.append(CheckResult(f"branch[{key}]", name, cls.branch == branch and cls.consistent, cls.branch,
                                   rep.tol, {"expected": branch, "consistent": cls.consistent}))
    if "audit_failures" in exp:
        p = QCParams(Fraction(1), Fraction(1))
        audit = theorem_audit(spec, p, AuditConfig(sampling=SamplingConfig(count=32, seed=seed)))
        got = sorted(audit.failures)
        want = sorted(exp["audit_failures"])
        out.append(CheckResult("audit_failures", name, got == want, ",".join(got) or "none", None,
                               {"expected": want}))
    return out


SUITES = ("identities", "theorems", "all")


def thread_count() -> int:
    raw = os.environ.get("CURVINDEX_THREADS", "")
    try:
        k = int(raw)
    except ValueError:
        k = 0
    return max(1, k) if raw else max(1, min(4, os.cpu_count() or 1))


def run_suite(suite: str, seed: int = 0) -> list[CheckResult]:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}")
    specs = catalog_instances()
    jobs = []
    if suite in ("identities", "all"):
        jobs += [(identity_checks, s) for s in specs]
        jobs.append((lambda _s, seed: global_identity_checks(), None))
    if suite in ("theorems", "all"):
        jobs += [(theorem_checks, s) for s in specs]
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        futures = [pool.submit(fn, s, seed) for fn, s in jobs]
        results = []
        for fut in futures:
            results.extend(fut.result())
    return results
