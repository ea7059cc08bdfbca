"""Numerical audit of the parallel-tensor results for symmetric manifolds.

Each entry measures its hypotheses on quasi-random samples and, only when
they hold, checks the conclusion.  Hypothesis verdicts:

``holds``
    every hypothesis measured true; a conclusion verdict is attached.
``fails``
    a structural precondition is violated (dimension, ``b = 0``, a
    connection whose Ricci tensor is not symmetric).
``vacuous``
    the geometric hypothesis is not met on this manifold.

Entries with ``fails`` or ``vacuous`` never carry a conclusion verdict.

Thresholds are ``tol * scale`` with ``scale = max(1, max|R|)``.  Conclusions
that follow algebraically from a measured hypothesis get the slack factor
``1 + n |g| |g^-1|`` to absorb the propagation of the hypothesis residual.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exprjet import Node, evaluate, parse, to_string
from .family import DEFAULT_TOL, QCParams, nabla_family_arrays
from .geometry import GeometryBatch, geometry_batch, scale_of
from .index import IndexConfig, IndexEstimate, curvature_operators, estimate_index, vectorize
from .manifold import ManifoldSpec
from .sampling import SamplingConfig, sample_points
from .geometry import valid_mask

HOLDS, FAILS, VACUOUS = "holds", "fails", "vacuous"
PASS, FAIL = "pass", "fail"

ENTRY_IDS = (
    "ricci_parallel_lemma_a",
    "ricci_parallel_lemma_a_converse",
    "ricci_parallel_lemma_b",
    "einstein_trace_lemma",
    "qc_general_solution",
    "qc_proportional_solution",
    "qc_unit_index",
    "qc_fundamental_solutions",
    "qc_index_bound",
    "concircular_determinant",
    "concircular_unit_index",
)


@dataclass
class AuditEntry:
    id: str
    hypothesis: str
    measurements: dict
    conclusion: str | None = None
    witnesses: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.hypothesis == HOLDS and self.conclusion is None:
            raise ValueError(f"{self.id}: a holding hypothesis needs a conclusion verdict")
        if self.hypothesis != HOLDS and self.conclusion is not None:
            raise ValueError(f"{self.id}: {self.hypothesis} entries carry no conclusion verdict")

    @property
    def failed(self) -> bool:
        return self.conclusion == FAIL

    def to_json(self) -> dict:
        return {"id": self.id, "hypothesis": self.hypothesis, "conclusion": self.conclusion,
                "measurements": self.measurements, "witnesses": self.witnesses, "notes": self.notes}


@dataclass
class TheoremAudit:
    entries: list
    f: Node
    psi: Node
    tol: float
    scale: float
    index: IndexEstimate

    def entry(self, entry_id: str) -> AuditEntry:
        for e in self.entries:
            if e.id == entry_id:
                return e
        raise KeyError(entry_id)

    @property
    def failures(self) -> list[str]:
        return [e.id for e in self.entries if e.failed]

    def to_json(self) -> dict:
        return {
            "scalar_fields": {"f": to_string(self.f), "psi": to_string(self.psi)},
            "tol": self.tol,
            "scale": self.scale,
            "index": self.index.index,
            "failures": self.failures,
            "entries": [e.to_json() for e in self.entries],
        }


@dataclass
class AuditConfig:
    sampling: SamplingConfig = field(default_factory=lambda: SamplingConfig(count=32))
    tol: float = DEFAULT_TOL
    f: str | Node = "1"
    psi: str | Node = "1"
    index: IndexConfig = field(default_factory=IndexConfig)


def _scalar(node, spec: ManifoldSpec) -> Node:
    return parse(node, spec.coords) if isinstance(node, str) else node


def _verdict(ok: bool) -> str:
    return PASS if ok else FAIL


def _null_projector(basis: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the span of the vectorized basis."""
    q, _ = np.linalg.qr(vectorize(basis).T)
    return q @ q.T


def _off_span(P: np.ndarray, H: np.ndarray) -> float:
    v = vectorize(H)
    nv = np.linalg.norm(v)
    return float(np.linalg.norm(v - P @ v) / nv) if nv > 0 else 0.0


def _off_metric(H: np.ndarray, g: np.ndarray) -> float:
    """Relative distance of ``H`` from the line through ``g`` (Frobenius)."""
    gh = np.sum(g * H) / np.sum(g * g)
    nh = np.linalg.norm(H)
    return float(np.linalg.norm(H - gh * g) / nh) if nh > 0 else 0.0


def _det_quasi(H: np.ndarray, dE: np.ndarray, g: np.ndarray, g_inv: np.ndarray) -> float:
    """Max of |H0(X,Z) dE(Y,V) - H0(Y,V) dE(X,Z)| over coordinate tuples, relative.

    ``H0`` is the trace-free part of ``H``; ``dE`` has shape ``(n, n, n)``
    with the direction first.
    """
    n = g.shape[0]
    H0 = H - np.einsum("ij,ij->", g_inv, H) / n * g
    det = np.einsum("xz,uyv->uxzyv", H0, dE) - np.einsum("yv,uxz->uxzyv", H0, dE)
    den = max(np.max(np.abs(H0)), 1e-300) * max(np.max(np.abs(dE)), 1e-300)
    return float(np.max(np.abs(det)) / den) if np.any(H0) and np.any(dE) else 0.0


def _det_conc(H: np.ndarray, g: np.ndarray) -> float:
    det = np.einsum("xz,yv->xzyv", H, g) - np.einsum("yv,xz->xzyv", H, g)
    return float(np.max(np.abs(det)) / (np.max(np.abs(H)) * np.max(np.abs(g))))


def _eq_con_tens_residual(batch: GeometryBatch, idx: int, H: np.ndarray) -> float:
    """Residual of the first-order holonomy condition for ``H`` at one point, relative."""
    dRvec = np.einsum("uijkl,lm->uijkm", batch.nabla_R[idx], batch.g_inv[idx])
    L = curvature_operators(dRvec)
    val = np.einsum("...ab,ab->...", L, H)
    den = max(np.max(np.abs(L)), 1e-300) * max(np.max(np.abs(H)), 1e-300)
    return float(np.max(np.abs(val)) / den) if np.any(L) else 0.0


def _witness_direction(dE_p: np.ndarray, dr_p: np.ndarray, thr: float):
    """A direction ``U`` with ``nabla_U E = 0`` and ``nabla_U r != 0``, if one exists.

    Returns ``(U, |nabla_U r|, |nabla_U E|)`` for the best null direction.
    """
    n = dr_p.shape[0]
    M = dE_p.reshape(n, -1).T  # columns: nabla_u E flattened
    _, s, vt = np.linalg.svd(M)
    s_full = np.concatenate([s, np.zeros(n - s.size)])
    null = vt[s_full <= thr]
    if len(null) == 0:
        return None, 0.0, float(s_full.min())
    proj = null.T @ (null @ dr_p)
    if not np.any(proj):
        return null[0], 0.0, 0.0
    U = proj / np.linalg.norm(proj)
    return U, float(abs(dr_p @ U)), float(np.max(np.abs(np.einsum("u,uij->ij", U, dE_p))))


def theorem_audit(spec: ManifoldSpec, p: QCParams, config: AuditConfig | None = None) -> TheoremAudit:
    """Evaluate every audit entry for ``spec`` and the coefficients ``p``."""
    config = config or AuditConfig()
    n = spec.n
    tol = config.tol
    f_node = _scalar(config.f, spec)
    psi_node = _scalar(config.psi, spec)

    est = estimate_index(spec, config.index)
    base = est.base_point
    pts = sample_points(spec, config.sampling)
    pts = pts[valid_mask(spec, pts)]
    pts = np.vstack([base[None], pts])
    batch = geometry_batch(spec, pts, with_derivatives=True)
    scale = scale_of(batch.R)
    thr = tol * scale
    slack = 1.0 + n * float(np.max(np.abs(batch.g))) * float(np.max(np.abs(batch.g_inv)))

    fam = nabla_family_arrays(batch, p)
    nabla_cstar = float(np.max(np.abs(fam["Cstar"])))
    nabla_z = float(np.max(np.abs(fam["Z"])))
    dS, dE, dr = batch.nabla_S, batch.nabla_E, batch.nabla_r
    per_dir_S = np.max(np.abs(dS), axis=(-2, -1))  # (B, n)
    per_dir_E = np.max(np.abs(dE), axis=(-2, -1))
    max_dE = float(np.max(per_dir_E))
    max_dr = float(np.max(np.abs(dr)))
    trace_dE = np.einsum("bij,buij->bu", batch.g_inv, dE)
    ricci_asym = float(np.max(np.abs(batch.S - np.swapaxes(batch.S, -1, -2))))
    ricci_symmetric = ricci_asym <= thr

    qc_symmetric = nabla_cstar <= thr
    structural = n > 2 and p.bf != 0.0
    ell = est.index
    g0, gi0 = batch.g[0], batch.g_inv[0]
    common = {"max_nabla_quasi_conformal": nabla_cstar, "max_nabla_einstein": max_dE,
              "threshold": thr, "index": ell}
    entries = []

    # -- Ricci-parallel lemma, pointwise per (sample, direction)
    def lemma_entry(eid, mask, concl_vals, extra):
        meas = {"ricci_asymmetry": ricci_asym, "threshold": thr, "points_meeting_hypothesis": int(mask.sum()),
                **extra}
        if not ricci_symmetric:
            return AuditEntry(eid, FAILS, meas, notes=["connection is not Ricci symmetric"])
        if not mask.any():
            return AuditEntry(eid, VACUOUS, meas)
        worst = float(np.max(concl_vals[mask]))
        meas["conclusion_max"] = worst
        meas["conclusion_threshold"] = slack * thr
        b_, u_ = np.unravel_index(np.argmax(np.where(mask, concl_vals, -1)), mask.shape)
        return AuditEntry(eid, HOLDS, meas, _verdict(worst <= slack * thr),
                          {"point": pts[b_].tolist(), "direction": int(u_)})

    entries.append(lemma_entry("ricci_parallel_lemma_a", per_dir_S <= thr, per_dir_E,
                               {"max_nabla_ricci": float(np.max(per_dir_S))}))
    r_const = max_dr <= thr
    entries.append(lemma_entry("ricci_parallel_lemma_a_converse",
                               (per_dir_E <= thr) & r_const, per_dir_S,
                               {"max_nabla_scalar": max_dr}))
    # (b): nabla_U S != 0 and proportional to g
    gh = np.einsum("buij,bij->bu", dS, batch.g) / np.einsum("bij,bij->b", batch.g, batch.g)[:, None]
    off_g = np.max(np.abs(dS - gh[..., None, None] * batch.g[:, None]), axis=(-2, -1))
    entries.append(lemma_entry("ricci_parallel_lemma_b", (per_dir_S > thr) & (off_g <= thr), per_dir_E,
                               {"max_nabla_ricci": float(np.max(per_dir_S))}))

    # -- trace of nabla E, always measured
    max_trace = float(np.max(np.abs(trace_dE)))
    meas = dict(common, max_trace_nabla_einstein=max_trace)
    b_, u_ = np.unravel_index(np.argmax(np.abs(trace_dE)), trace_dE.shape)
    wit = {"point": pts[b_].tolist(), "direction": int(u_)}
    if not structural:
        entries.append(AuditEntry("einstein_trace_lemma", FAILS, meas, witnesses=wit,
                                  notes=["requires n > 2 and b != 0"]))
    elif not qc_symmetric:
        entries.append(AuditEntry("einstein_trace_lemma", VACUOUS, meas, witnesses=wit,
                                  notes=["trace measured anyway; it vanishes for every metric connection"]))
    else:
        entries.append(AuditEntry("einstein_trace_lemma", HOLDS, meas, _verdict(max_trace <= thr), wit))

    def qc_gate(eid, need_nonparallel_E=True, extra_meas=None):
        meas = dict(common, **(extra_meas or {}))
        if not structural:
            return AuditEntry(eid, FAILS, meas, notes=["requires n > 2 and b != 0"])
        if not ricci_symmetric:
            return AuditEntry(eid, FAILS, meas, notes=["connection is not Ricci symmetric"])
        if not qc_symmetric:
            return AuditEntry(eid, VACUOUS, meas, notes=["not quasi-conformally symmetric"])
        if need_nonparallel_E and max_dE <= thr:
            return AuditEntry(eid, VACUOUS, meas, notes=["Einstein tensor is parallel"])
        return None

    # witness direction at the base point: the coordinate direction with largest nabla_U E
    u_star = int(np.argmax(per_dir_E[0]))
    dS_u = dS[0, u_star]
    f_val = evaluate(f_node, base)
    psi_val = evaluate(psi_node, base)
    P_null = _null_projector(est.basis)

    # -- general solution: determinant form on the null basis and on the candidate
    gate = qc_gate("qc_general_solution")
    if gate is not None:
        entries.append(gate)
    elif per_dir_E[0, u_star] <= thr:
        entries.append(AuditEntry("qc_general_solution", VACUOUS, common,
                                  notes=["Einstein tensor is parallel at the base point"]))
    else:
        det_basis = max(_det_quasi(H, dE[0], g0, gi0) for H in est.basis)
        candidate = f_val * dS_u
        det_cand = _det_quasi(candidate, dE[0, u_star][None], g0, gi0)
        cand_first = _eq_con_tens_residual(batch, 0, candidate)
        meas = dict(common, determinant_null_basis=det_basis, determinant_candidate=det_cand,
                    candidate_first_order_residual=cand_first, f_at_base=f_val)
        ok = det_basis <= slack * tol and det_cand <= slack * tol
        notes = ["candidate first-order residual is informational; the candidate solves the determinant "
                 "form but need not be parallel"]
        entries.append(AuditEntry("qc_general_solution", HOLDS, meas, _verdict(ok),
                                  {"point": base.tolist(), "direction": u_star}, notes))

    # -- directions with nabla_U E = 0 and nabla_U r != 0
    best = (None, 0.0, 0.0, -1)
    for b_ in range(len(pts)):
        U, dr_u, dE_u = _witness_direction(dE[b_], dr[b_], thr)
        if U is not None and dr_u > best[1]:
            best = (U, dr_u, dE_u, b_)
    U_w, dr_w, dE_w, b_w = best
    wmeas = {"witness_nabla_scalar": dr_w, "witness_nabla_einstein": dE_w}
    has_witness = U_w is not None and dr_w > thr
    for eid in ("qc_proportional_solution", "qc_unit_index"):
        gate = qc_gate(eid, need_nonparallel_E=False, extra_meas=wmeas)
        if gate is not None:
            entries.append(gate)
            continue
        if not has_witness:
            entries.append(AuditEntry(eid, VACUOUS, dict(common, **wmeas),
                                      notes=["no direction with parallel Einstein tensor and varying scalar curvature"]))
            continue
        wit = {"point": pts[b_w].tolist(), "direction": U_w.tolist()}
        if eid == "qc_proportional_solution":
            off = max(_off_metric(H, g0) for H in est.basis)
            entries.append(AuditEntry(eid, HOLDS, dict(common, **wmeas, max_off_metric=off),
                                      _verdict(off <= 1e-6), wit))
        else:
            entries.append(AuditEntry(eid, HOLDS, dict(common, **wmeas), _verdict(ell == 1), wit))

    # -- fundamental solutions when the index exceeds one
    gate = qc_gate("qc_fundamental_solutions")
    if gate is not None:
        entries.append(gate)
    elif ell <= 1:
        entries.append(AuditEntry("qc_fundamental_solutions", VACUOUS, common, notes=["index is 1"]))
    elif per_dir_E[0, u_star] <= thr:
        entries.append(AuditEntry("qc_fundamental_solutions", VACUOUS, common,
                                  notes=["Einstein tensor is parallel at the base point"]))
    else:
        H2 = psi_val * dS_u
        off = _off_span(P_null, H2)
        indep = _off_metric(H2, g0)
        meas = dict(common, off_null_space=off, independence_from_metric=indep, psi_at_base=psi_val)
        entries.append(AuditEntry("qc_fundamental_solutions", HOLDS, meas,
                                  _verdict(off <= 1e-6 and indep > 1e-6),
                                  {"point": base.tolist(), "direction": u_star}))

    # -- index bound
    gate = qc_gate("qc_index_bound")
    if gate is not None:
        entries.append(gate)
    else:
        entries.append(AuditEntry("qc_index_bound", HOLDS, dict(common, upper_bound=n + 1),
                                  _verdict(1 <= ell <= n + 1)))

    # -- concircular symmetry
    cmeas = {"max_nabla_concircular": nabla_z, "max_nabla_scalar": max_dr, "threshold": thr, "index": ell}
    conc = nabla_z <= thr
    if not conc:
        entries.append(AuditEntry("concircular_determinant", VACUOUS, cmeas, notes=["not concircularly symmetric"]))
    elif max_dr <= thr:
        entries.append(AuditEntry("concircular_determinant", VACUOUS, cmeas,
                                  notes=["scalar curvature is constant, so the first-order condition is empty"]))
    else:
        det = max(_det_conc(H, g0) for H in est.basis)
        entries.append(AuditEntry("concircular_determinant", HOLDS, dict(cmeas, determinant_null_basis=det),
                                  _verdict(det <= 1e-6)))
    if not conc:
        entries.append(AuditEntry("concircular_unit_index", VACUOUS, cmeas, notes=["not concircularly symmetric"]))
    else:
        notes = [] if ell == 1 else ["parallel curvature allows extra parallel tensors (flat or product geometry)"]
        entries.append(AuditEntry("concircular_unit_index", HOLDS, cmeas, _verdict(ell == 1), notes=notes))

    return TheoremAudit(entries, f_node, psi_node, tol, scale, est)
