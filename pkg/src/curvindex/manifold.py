"""Manifold and connection specifications and their JSON form.

JSON layout (see docs/spec-format.md)::

    {
      "name": "sphere",
      "dimension": 2,
      "coordinates": ["x0", "x1"],
      "metric": [["1"], ["0", "sin(x0)^2"]],          # lower triangle or full
      "domain": {"x0": [0.3, 2.8], "x1": [0.0, 6.28]},
      "connection": {"type": "levi_civita"},
      "expected": {"index": 1}                          # optional
    }

Connection objects: ``{"type": "levi_civita"}``,
``{"type": "semi_symmetric", "phi": "x0"}`` or ``{"type": "semi_symmetric",
"u": ["x1", "-x0", "0"]}``, and ``{"type": "general_torsion", "torsion":
T}`` where ``T[k][i][j]`` is the expression for ``T^k_ij``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .exprjet import ExprError, Node, Num, parse, to_string

CONNECTION_KINDS = ("levi_civita", "semi_symmetric", "general_torsion")


class SpecError(ValueError):
    """Malformed manifold specification."""


class DomainError(ValueError):
    """A point lies outside the spec's domain box."""


@dataclass(frozen=True, eq=False)
class ConnectionSpec:
    kind: str = "levi_civita"
    phi: Node | None = None
    u: tuple[Node, ...] | None = None
    torsion: tuple | None = None  # nested n x n x n tuple of nodes, T^k_ij

    def __post_init__(self):
        if self.kind not in CONNECTION_KINDS:
            raise SpecError(f"unknown connection type {self.kind!r}")
        if self.kind == "semi_symmetric" and (self.phi is None) == (self.u is None):
            raise SpecError("semi_symmetric connection needs exactly one of 'phi' or 'u'")
        if self.kind == "general_torsion" and self.torsion is None:
            raise SpecError("general_torsion connection needs 'torsion' components")

    def to_json(self) -> dict:
        out: dict[str, Any] = {"type": self.kind}
        if self.phi is not None:
            out["phi"] = to_string(self.phi)
        if self.u is not None:
            out["u"] = [to_string(e) for e in self.u]
        if self.torsion is not None:
            out["torsion"] = [[[to_string(e) for e in row] for row in mat] for mat in self.torsion]
        return out


@dataclass(frozen=True, eq=False)
class ManifoldSpec:
    name: str
    coords: tuple[str, ...]
    metric: tuple[tuple[Node, ...], ...]  # full symmetric grid
    domain: tuple[tuple[float, float], ...]
    connection: ConnectionSpec = field(default_factory=ConnectionSpec)
    expected: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.coords)
        if n < 2:
            raise SpecError("dimension must be at least 2")
        if len(self.metric) != n or any(len(row) != n for row in self.metric):
            raise SpecError(f"metric grid must be {n}x{n}")
        for i in range(n):
            for j in range(i):
                if self.metric[i][j] != self.metric[j][i]:
                    raise SpecError(f"metric grid asymmetric at ({i},{j})")
        if len(self.domain) != n:
            raise SpecError("domain box must give one interval per coordinate")
        for (lo, hi), c in zip(self.domain, self.coords):
            if not lo < hi:
                raise SpecError(f"empty domain interval for {c}")
        conn = self.connection
        if conn.u is not None and len(conn.u) != n:
            raise SpecError(f"u needs {n} components")
        if conn.torsion is not None:
            t = conn.torsion
            if len(t) != n or any(len(r) != n or any(len(c) != n for c in r) for r in t):
                raise SpecError(f"torsion needs {n}x{n}x{n} components")

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.domain])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.domain])

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, point, atol: float = 1e-12) -> bool:
        """``point`` has shape ``(n, *batch)``; true when every column is in the box."""
        p = np.asarray(point, dtype=float)
        shape = (-1,) + (1,) * (p.ndim - 1)
        return bool(np.all(p >= self.lower.reshape(shape) - atol) and np.all(p <= self.upper.reshape(shape) + atol))

    def check_point(self, point) -> np.ndarray:
        p = np.asarray(point, dtype=float)
        if p.shape[:1] != (self.n,):
            raise DomainError(f"point has dimension {p.shape[:1]}, manifold has {self.n}")
        lo = self.lower.reshape((-1,) + (1,) * (p.ndim - 1))
        hi = self.upper.reshape((-1,) + (1,) * (p.ndim - 1))
        if np.any(p < lo - 1e-12) or np.any(p > hi + 1e-12):
            raise DomainError(f"point {p.tolist()} outside domain box of {self.name}")
        return p

    def with_connection(self, connection: ConnectionSpec) -> "ManifoldSpec":
        return ManifoldSpec(self.name, self.coords, self.metric, self.domain, connection,
                            dict(self.expected), dict(self.params))

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "dimension": self.n,
            "coordinates": list(self.coords),
            "metric": [[to_string(self.metric[i][j]) for j in range(i + 1)] for i in range(self.n)],
            "domain": {c: [lo, hi] for c, (lo, hi) in zip(self.coords, self.domain)},
            "connection": self.connection.to_json(),
        }
        if self.params:
            out["params"] = self.params
        if self.expected:
            out["expected"] = self.expected
        return out

    def fingerprint(self) -> str:
        body = self.to_json()
        body.pop("expected", None)
        text = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _parse_expr(source, coords, where: str) -> Node:
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        return Num(float(source))
    if not isinstance(source, str):
        raise SpecError(f"{where}: expected an expression string, got {type(source).__name__}")
    try:
        return parse(source, coords)
    except ExprError as exc:
        raise SpecError(f"{where}: {exc}") from exc


def connection_from_json(obj, coords) -> ConnectionSpec:
    if obj is None:
        return ConnectionSpec()
    if not isinstance(obj, dict) or "type" not in obj:
        raise SpecError("connection must be an object with a 'type'")
    kind = obj["type"]
    if kind not in CONNECTION_KINDS:
        raise SpecError(f"unknown connection type {kind!r}")
    n = len(coords)
    if kind == "levi_civita":
        return ConnectionSpec()
    if kind == "semi_symmetric":
        phi = obj.get("phi")
        u = obj.get("u")
        if (phi is None) == (u is None):
            raise SpecError("semi_symmetric connection needs exactly one of 'phi' or 'u'")
        if phi is not None:
            return ConnectionSpec(kind, phi=_parse_expr(phi, coords, "connection.phi"))
        if not isinstance(u, list) or len(u) != n:
            raise SpecError(f"connection.u must list {n} expressions")
        return ConnectionSpec(kind, u=tuple(_parse_expr(e, coords, f"connection.u[{i}]") for i, e in enumerate(u)))
    tors = obj.get("torsion")
    if not isinstance(tors, list) or len(tors) != n:
        raise SpecError(f"connection.torsion must be an {n}x{n}x{n} nested list")
    parsed = []
    for k, mat in enumerate(tors):
        if not isinstance(mat, list) or len(mat) != n or any(not isinstance(r, list) or len(r) != n for r in mat):
            raise SpecError(f"connection.torsion[{k}] must be {n}x{n}")
        parsed.append(tuple(tuple(_parse_expr(e, coords, f"connection.torsion[{k}][{i}][{j}]")
                                  for j, e in enumerate(row)) for i, row in enumerate(mat)))
    return ConnectionSpec(kind, torsion=tuple(parsed))


def spec_from_json(obj) -> ManifoldSpec:
    if not isinstance(obj, dict):
        raise SpecError("manifold spec must be a JSON object")
    for key in ("dimension", "coordinates", "metric", "domain"):
        if key not in obj:
            raise SpecError(f"missing field {key!r}")
    n = obj["dimension"]
    coords = obj["coordinates"]
    if not isinstance(n, int) or n < 2:
        raise SpecError("dimension must be an integer >= 2")
    if not isinstance(coords, list) or len(coords) != n or not all(isinstance(c, str) for c in coords):
        raise SpecError(f"coordinates must list {n} names")
    if len(set(coords)) != n:
        raise SpecError("coordinate names must be distinct")
    grid = obj["metric"]
    if not isinstance(grid, list) or len(grid) != n:
        raise SpecError(f"metric must have {n} rows")
    full = all(isinstance(r, list) and len(r) == n for r in grid)
    if not full:
        for i, row in enumerate(grid):
            if not isinstance(row, list) or len(row) != i + 1:
                length = len(row) if isinstance(row, list) else "non-list"
                raise SpecError(f"metric row {i} has {length} entries; expected {i + 1} (lower triangle) or {n} (full)")
    nodes = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1):
            nodes[i][j] = nodes[j][i] = _parse_expr(grid[i][j], coords, f"metric[{i}][{j}]")
    if full:
        for i in range(n):
            for j in range(i + 1, n):
                other = _parse_expr(grid[i][j], coords, f"metric[{i}][{j}]")
                if other != nodes[i][j]:
                    raise SpecError(f"full metric grid asymmetric at row {i}, column {j}")
    dom = obj["domain"]
    if not isinstance(dom, dict) or set(dom) != set(coords):
        raise SpecError("domain must give an interval for every coordinate")
    domain = []
    for c in coords:
        iv = dom[c]
        if not isinstance(iv, list) or len(iv) != 2:
            raise SpecError(f"domain[{c}] must be [lo, hi]")
        domain.append((float(iv[0]), float(iv[1])))
    conn = connection_from_json(obj.get("connection"), coords)
    return ManifoldSpec(
        name=str(obj.get("name", "unnamed")),
        coords=tuple(coords),
        metric=tuple(tuple(r) for r in nodes),
        domain=tuple(domain),
        connection=conn,
        expected=dict(obj.get("expected", {})),
        params=dict(obj.get("params", {})),
    )


def load_spec(path) -> ManifoldSpec:
    """Read a manifold-spec JSON file."""
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SpecError(f"malformed JSON in {path}: {exc}") from exc
    return spec_from_json(obj)


def dump_spec(spec: ManifoldSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(spec.to_json(), fh, indent=2)
        fh.write("\n")
