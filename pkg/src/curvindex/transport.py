"""Parallel transport of rank <= 2 tensors along chart polylines.

Each segment ``x(t) = a + t (b - a)``, ``t in [0, 1]``, is integrated with the
classical fourth-order Runge-Kutta method, using at least ``steps_per_segment``
steps and at most ``MAX_STEP`` of chart length per step, scaled down by the
largest connection component at the segment ends.  Along the curve a covariant slot
obeys ``dT_i/dt = Gamma^m_ci xdot^c T_m`` and a contravariant slot
``dT^i/dt = -Gamma^i_cm xdot^c T^m``.

Many paths with the same vertex count are transported together; the
connection is evaluated for the whole batch in one jet pass.
"""
from __future__ import annotations

import math
import string

import numpy as np

from .geometry import check_metric_values, contorsion_jets, inverse_jets, levi_civita_jets, metric_jets
from .manifold import DomainError, ManifoldSpec
from .tensors import CO, TensorValue

DEFAULT_STEPS = 16
MAX_STEP = 0.01


class TransportError(ArithmeticError):
    """Transport broke down (degenerate metric or non-finite state)."""


def connection_values(spec: ManifoldSpec, points: np.ndarray) -> np.ndarray:
    """``Gamma^m_ij`` at each row of ``points``; shape ``(*batch, n, n, n)``."""
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, spec.n).T
    cache: dict = {}
    G = metric_jets(spec, flat, 1, cache)
    if not np.all(check_metric_values(G[0])):
        raise TransportError("degenerate metric encountered along transport path")
    Ginv = inverse_jets(G, spec.n)
    gam = levi_civita_jets(G, Ginv, spec.n) + contorsion_jets(spec, flat, G, Ginv, cache)
    return gam[0].reshape(pts.shape[:-1] + (spec.n,) * 3)


def _rhs_factory(variance: str):
    letters = string.ascii_lowercase[: len(variance)]
    specs = []
    for s, v in enumerate(variance):
        src = letters[:s] + "m" + letters[s + 1:]
        if v == CO:
            specs.append((1.0, f"...m{letters[s]},...{src}->...{letters}"))
        else:
            specs.append((-1.0, f"...{letters[s]}m,...{src}->...{letters}"))

    def rhs(A: np.ndarray, T: np.ndarray) -> np.ndarray:
        # A[..., m, i] = Gamma^m_ci xdot^c; T has extra (state) axes between batch and slots
        out = np.zeros_like(T)
        extra = T.ndim - A.ndim + 2 - len(variance)
        Ab = A.reshape(A.shape[:-2] + (1,) * extra + A.shape[-2:])
        for sign, sp in specs:
            out += sign * np.einsum(sp, Ab, T)
        return out

    return rhs


def segment_steps(length: float, steps_per_segment: int, max_step: float = MAX_STEP) -> int:
    """RK4 steps for a segment of (connection-weighted) chart length ``length``."""
    return max(int(steps_per_segment), int(math.ceil(length / max_step)))


def transport_batch(spec: ManifoldSpec, paths: np.ndarray, values: np.ndarray, variance: str,
                    steps_per_segment: int = DEFAULT_STEPS, max_step: float = MAX_STEP) -> np.ndarray:
    """Transport ``values`` along each path.

    ``paths`` has shape ``(B, V, n)``; ``values`` has shape ``(B, ..., *slots)``
    where the middle axes are independent states carried along the same path.
    """
    paths = np.asarray(paths, dtype=float)
    if paths.ndim != 3 or paths.shape[-1] != spec.n or paths.shape[1] < 2:
        raise ValueError("paths must have shape (B, V>=2, n)")
    flat = paths.reshape(-1, spec.n)
    if not spec.contains(flat.T):
        raise DomainError("transport path leaves the domain box")
    T = np.array(values, dtype=float)
    rhs = _rhs_factory(variance)
    for s in range(paths.shape[1] - 1):
        a, b = paths[:, s], paths[:, s + 1]
        d = b - a
        # step length shrinks where the connection is large
        ends = connection_values(spec, np.concatenate([a, b]))
        stiff = max(1.0, float(np.max(np.abs(ends))))
        steps = segment_steps(stiff * float(np.max(np.linalg.norm(d, axis=-1))), steps_per_segment, max_step)
        h = 1.0 / steps

        def field(t, T):
            gam = connection_values(spec, a + t * d)
            A = np.einsum("...mci,...c->...mi", gam, d)
            return rhs(A, T)

        for k in range(steps):
            t = k * h
            k1 = field(t, T)
            k2 = field(t + h / 2, T + h / 2 * k1)
            k3 = field(t + h / 2, T + h / 2 * k2)
            k4 = field(t + h, T + h * k3)
            T = T + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(T)):
            raise TransportError("non-finite state during transport")
    return T


def parallel_transport(spec: ManifoldSpec, path, value: TensorValue,
                       steps_per_segment: int = DEFAULT_STEPS) -> TensorValue:
    """Transport a tensor of rank at most 2 along a polyline of chart points."""
    if value.rank > 2:
        raise ValueError("parallel_transport supports rank <= 2")
    path = np.asarray(path, dtype=float)
    if value.rank == 0:
        spec.check_point(path.T)
        return value
    out = transport_batch(spec, path[None], value.components[None], "".join(value.variance), steps_per_segment)
    return TensorValue(out[0], value.variance)


def rectangle_loop(base: np.ndarray, i: int, j: int, si: float, sj: float) -> np.ndarray:
    """Closed rectangle in the (i, j) coordinate plane with a corner at ``base``.

    Signed sides choose the quadrant; the loop starts and ends at ``base``.
    """
    base = np.asarray(base, dtype=float)
    ei = np.zeros_like(base)
    ej = np.zeros_like(base)
    ei[i] = si
    ej[j] = sj
    return np.array([base, base + ei, base + ei + ej, base + ej, base])


_QUADRANTS = ((1, 1), (-1, 1), (1, -1), (-1, -1))


def default_loops(spec: ManifoldSpec, base: np.ndarray, count: int = 8,
                  sizes=(0.1, 0.25), reach: float = 0.5) -> np.ndarray:
    """Coordinate-plane rectangles of two sizes based at ``base``.

    Sides are fractions of twice the room available in the chosen direction
    (room capped at ``reach``), so every loop stays in the domain box.
    Repeated planes use different quadrants.
    """
    n = spec.n
    base = np.asarray(base, dtype=float)
    up = np.minimum(spec.upper - base, reach)
    down = np.minimum(base - spec.lower, reach)
    planes = [(i, j) for i in range(n) for j in range(i + 1, n)]
    per_size = max(1, count // len(sizes))
    loops = []
    for frac in sizes:
        for q in range(per_size):
            i, j = planes[q % len(planes)]
            di, dj = _QUADRANTS[(q // len(planes)) % 4]
            # fall back to the roomier side when the chosen one is too tight
            if (up if di > 0 else down)[i] < 0.5 * max(up[i], down[i]):
                di = -di
            if (up if dj > 0 else down)[j] < 0.5 * max(up[j], down[j]):
                dj = -dj
            si = di * 2 * frac * (up if di > 0 else down)[i]
            sj = dj * 2 * frac * (up if dj > 0 else down)[j]
            loops.append(rectangle_loop(base, i, j, si, sj))
    return np.array(loops)
