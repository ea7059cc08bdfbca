"""Built-in parameterized manifolds.

Every entry returns an immutable :class:`ManifoldSpec` whose JSON form can be
written with :func:`manifold.dump_spec` and read back unchanged.  Domain boxes
are kept 0.3 away from coordinate poles and from zeros of warping functions.

``expected`` blocks hold hand-derived reference values (index, flatness
branch per ``"a,b"`` key, decomposability, audit entries that are known to
fail).  They are read by tests only, never by the estimators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exprjet import ExprError, Num, evaluate, parse, remap_coords
from .manifold import ConnectionSpec, ManifoldSpec, SpecError

CLIP = 0.3


class CatalogError(SpecError):
    """Unknown catalog entry or invalid parameters."""


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    params: dict  # param name -> (default, description)
    summary: str

    def to_json(self) -> dict:
        return {"name": self.name, "summary": self.summary,
                "params": {k: {"default": d, "doc": doc} for k, (d, doc) in self.params.items()}}


_CONNECTION_PARAMS = {
    "phi": (None, "scalar field whose gradient generates a semi-symmetric connection"),
    "u": (None, "1-form components (list, or ';'-separated text) for a semi-symmetric connection"),
}

ENTRIES = (
    CatalogEntry("euclidean", {"n": (3, "dimension >= 2"), "q": (0, "number of negative signs")},
                 "flat metric diag(+1,...,+1,-1,...,-1) on (-10,10)^n"),
    CatalogEntry("sphere", {"n": (2, "dimension >= 2"), "r": (1.0, "radius > 0")},
                 "round metric in hyperspherical coordinates"),
    CatalogEntry("hyperbolic", {"n": (2, "dimension >= 2")},
                 "upper half-space metric dx^2 / x_{n-1}^2"),
    CatalogEntry("product", {"left": ("sphere(n=2,r=1)", "first factor"),
                             "right": ("euclidean(n=1)", "second factor")},
                 "block-diagonal product metric; factors may have dimension 1"),
    CatalogEntry("einstein_product", {}, "sphere(2,1) x sphere(2,1)"),
    CatalogEntry("robertson_walker", {"f": ("t^2", "warping function of t"), "k": (0, "spatial curvature in {-1,0,1}")},
                 "-dt^2 + f(t)^2 (constant curvature k spatial metric)"),
)
_BY_NAME = {e.name: e for e in ENTRIES}


def catalog_list() -> list[dict]:
    """Descriptors of all entries, in a fixed order."""
    out = []
    for e in ENTRIES:
        d = e.to_json()
        d["params"].update({k: {"default": v, "doc": doc} for k, (v, doc) in _CONNECTION_PARAMS.items()})
        d["expected"] = _expected_summary(e.name)
        out.append(d)
    return out


def _expected_summary(name: str) -> str:
    return {
        "euclidean": "index n(n+1)/2",
        "sphere": "index 1",
        "hyperbolic": "index 1",
        "product": "index >= 2 (decomposable)",
        "einstein_product": "index 2",
        "robertson_walker": "index 1 for the default warping functions",
    }[name]


def _fmt(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def _names(n: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(n))


def _grid(diag: list[str], coords) -> tuple:
    n = len(diag)
    zero = Num(0.0)
    rows = []
    for i in range(n):
        rows.append(tuple(parse(diag[i], coords) if i == j else zero for j in range(n)))
    return tuple(rows)


def _int_param(params, key, default, lo=None) -> int:
    v = params.get(key, default)
    try:
        iv = int(v)
    except (TypeError, ValueError):
        raise CatalogError(f"parameter {key} must be an integer, got {v!r}") from None
    if float(v) != iv:
        raise CatalogError(f"parameter {key} must be an integer, got {v!r}")
    if lo is not None and iv < lo:
        raise CatalogError(f"parameter {key} must be >= {lo}")
    return iv


def _euclidean(params) -> ManifoldSpec:
    n = _int_param(params, "n", 3, 1)
    q = _int_param(params, "q", 0, 0)
    if q > n:
        raise CatalogError("q cannot exceed n")
    coords = _names(n)
    diag = ["1"] * (n - q) + ["-1"] * q
    exp = {"index": n * (n + 1) // 2, "decomposable": n > 1}
    return _spec("euclidean", coords, _grid(diag, coords), [(-10.0, 10.0)] * n, {"n": n, "q": q}, exp)


def _sphere(params) -> ManifoldSpec:
    n = _int_param(params, "n", 2, 1)
    try:
        r = float(params.get("r", 1.0))
    except (TypeError, ValueError):
        raise CatalogError("parameter r must be a number") from None
    if not r > 0 or not math.isfinite(r):
        raise CatalogError("sphere radius r must be positive")
    coords = _names(n)
    r2 = r * r
    diag = []
    for k in range(n):
        factors = ([] if r2 == 1.0 else [_fmt(r2)]) + [f"sin({coords[j]})^2" for j in range(k)]
        diag.append("*".join(factors) if factors else "1")
    domain = [(CLIP, 2.8)] * (n - 1) + [(0.0, 6.28)]
    return _spec("sphere", coords, _grid(diag, coords), domain, {"n": n, "r": r},
                 {"index": 1, "decomposable": False})


def _hyperbolic(params) -> ManifoldSpec:
    n = _int_param(params, "n", 2, 2)
    coords = _names(n)
    last = coords[-1]
    diag = [f"1/{last}^2"] * n
    domain = [(-1.0, 1.0)] * (n - 1) + [(0.5, 2.0)]
    return _spec("hyperbolic", coords, _grid(diag, coords), domain, {"n": n},
                 {"index": 1, "decomposable": False})


def _split_top(text: str, sep: str = ",") -> list[str]:
    """Split on ``sep`` at parenthesis depth zero."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise CatalogError(f"unbalanced parentheses in {text!r}")
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise CatalogError(f"unbalanced parentheses in {text!r}")
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def parse_params(text: str) -> dict:
    """``"n=3,r=2"`` -> ``{"n": "3", "r": "2"}``; nested ``name(...)`` values are kept whole."""
    out = {}
    for part in _split_top(text or ""):
        if "=" not in part:
            raise CatalogError(f"parameter {part!r} is not of the form key=value")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_factor(text: str) -> ManifoldSpec:
    """``"sphere(n=2,r=1)"`` or ``"euclidean"`` -> spec."""
    text = text.strip()
    if "(" in text:
        if not text.endswith(")"):
            raise CatalogError(f"malformed factor {text!r}")
        name, inner = text[: text.index("(")].strip(), text[text.index("(") + 1: -1]
        return catalog_get(name, parse_params(inner))
    return catalog_get(text, {})


class _Factor:
    """A possibly one-dimensional factor (ManifoldSpec requires n >= 2)."""

    def __init__(self, name, coords, metric, domain, connection=ConnectionSpec(), label="", index=None):
        self.name, self.coords, self.metric, self.domain = name, coords, metric, domain
        self.connection, self.label, self.index = connection, label, index

    @property
    def n(self):
        return len(self.coords)


def _factor_from_text(text: str) -> _Factor:
    text = text.strip()
    name = text.split("(", 1)[0].strip()
    params = parse_params(text[text.index("(") + 1: -1]) if "(" in text else {}
    if name == "euclidean" and _int_param(params, "n", 3, 1) == 1:
        q = _int_param(params, "q", 0, 0)
        if q > 1:
            raise CatalogError("q cannot exceed n")
        return _Factor("euclidean", ("x0",), ((Num(-1.0 if q else 1.0),),), ((-10.0, 10.0),),
                       label=_label("euclidean", {"n": 1, "q": q}), index=1)
    if name == "sphere" and _int_param(params, "n", 2, 1) == 1:
        r = float(params.get("r", 1.0))
        if not r > 0:
            raise CatalogError("sphere radius r must be positive")
        return _Factor("sphere", ("x0",), ((Num(r * r),),), ((0.0, 6.28),),
                       label=_label("sphere", {"n": 1, "r": r}), index=1)
    spec = parse_factor(text)
    return _Factor(spec.name, spec.coords, spec.metric, spec.domain, spec.connection,
                   spec.params.get("label", spec.name), spec.expected.get("index"))


def _as_factor(value) -> _Factor:
    if isinstance(value, ManifoldSpec):
        return _Factor(value.name, value.coords, value.metric, value.domain, value.connection,
                       value.params.get("label", value.name), value.expected.get("index"))
    if isinstance(value, str):
        return _factor_from_text(value)
    raise CatalogError(f"product factor must be a spec or text, got {type(value).__name__}")


def _product(params) -> ManifoldSpec:
    left = _as_factor(params.get("left", "sphere(n=2,r=1)"))
    right = _as_factor(params.get("right", "euclidean(n=1)"))
    expected = {"decomposable": True}
    # index 2 when at most one factor is a line or circle and the others are
    # irreducible and curved (a sum of two parallel projections plus nothing else)
    lines = sum(f.n == 1 for f in (left, right))
    curved = all(f.n == 1 or (f.index == 1 and f.name != "euclidean") for f in (left, right))
    if lines <= 1 and curved:
        expected["index"] = 2
    return _block_product(left, right, "product", {"left": left.label, "right": right.label}, expected)


def _block_product(left: _Factor, right: _Factor, name: str, params: dict, expected: dict) -> ManifoldSpec:
    if left.connection.kind != "levi_civita" or right.connection.kind != "levi_civita":
        raise CatalogError("product factors must carry the Levi-Civita connection")
    nl, nr = left.n, right.n
    n = nl + nr
    coords = _names(n)
    zero = Num(0.0)
    rows = [[zero] * n for _ in range(n)]
    lmap = {i: i for i in range(nl)}
    rmap = {i: nl + i for i in range(nr)}
    for i in range(nl):
        for j in range(nl):
            rows[i][j] = remap_coords(left.metric[i][j], lmap, coords)
    for i in range(nr):
        for j in range(nr):
            rows[nl + i][nl + j] = remap_coords(right.metric[i][j], rmap, coords)
    grid = tuple(tuple(r) for r in rows)
    params = dict(params, split=nl)
    return _spec(name, coords, grid, list(left.domain) + list(right.domain), params, expected)


def _einstein_product(params) -> ManifoldSpec:
    s2 = _as_factor("sphere(n=2,r=1)")
    return _block_product(s2, s2, "einstein_product", {}, {"index": 2, "decomposable": True})


def _zeros_of(f_node, lo: float, hi: float, count: int = 4001) -> np.ndarray:
    ts = np.linspace(lo, hi, count)
    vals = np.empty(count)
    for i, t in enumerate(ts):
        try:
            vals[i] = evaluate(f_node, [t])
        except (ExprError, ArithmeticError, ValueError, OverflowError):
            vals[i] = np.nan
    finite = np.isfinite(vals)
    if not finite.any():
        raise CatalogError("warping function f is undefined on (-1, 1)")
    big = np.max(np.abs(vals[finite]))
    bad = ~finite | (np.abs(np.where(finite, vals, 0.0)) <= 1e-9 * max(big, 1.0))
    sign = np.sign(np.where(finite, vals, 0.0))
    flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    marks = list(ts[bad]) + [0.5 * (ts[i] + ts[i + 1]) for i in flips]
    return np.array(sorted(marks))


def rw_time_interval(f_node, lo: float = -1.0, hi: float = 1.0, clip: float = CLIP) -> tuple[float, float]:
    """Longest sub-interval of (lo, hi) at distance >= clip from zeros of f (later one on ties)."""
    zeros = _zeros_of(f_node, lo, hi)
    intervals = []
    cur_lo = lo
    for z in zeros:
        if z - clip > cur_lo:
            intervals.append((cur_lo, z - clip))
        cur_lo = max(cur_lo, z + clip)
    if hi > cur_lo:
        intervals.append((cur_lo, hi))
    if not intervals:
        raise CatalogError("warping function f vanishes too densely on (-1, 1)")
    best = max(intervals, key=lambda iv: (round(iv[1] - iv[0], 12), iv[0]))
    return float(round(best[0], 12)), float(round(best[1], 12))


def _robertson_walker(params) -> ManifoldSpec:
    f_text = str(params.get("f", "t^2"))
    k = _int_param(params, "k", 0)
    if k not in (-1, 0, 1):
        raise CatalogError("k must be -1, 0 or 1")
    try:
        f_node = parse(f_text, ("t",))
    except ExprError as exc:
        raise CatalogError(f"malformed warping function f: {exc}") from exc
    coords = ("t", "x", "y", "z")
    t_dom = rw_time_interval(f_node)
    if k == 0:
        spatial = f"({f_text})^2"
    else:
        spatial = f"({f_text})^2/(1+{_fmt(k)}*(x^2+y^2+z^2)/4)^2"
    diag = ["-1", spatial, spatial, spatial]
    expected = {"decomposable": False}
    if f_text.replace(" ", "") in ("t^2", "exp(t)"):
        expected["index"] = 1
    return _spec("robertson_walker", coords, _grid(diag, coords), [t_dom] + [(-1.0, 1.0)] * 3,
                 {"f": f_text, "k": k}, expected)


_BUILDERS = {
    "euclidean": _euclidean,
    "sphere": _sphere,
    "hyperbolic": _hyperbolic,
    "product": _product,
    "einstein_product": _einstein_product,
    "robertson_walker": _robertson_walker,
}


def _label(name: str, params: dict) -> str:
    if not params:
        return name
    return name + "(" + ",".join(f"{k}={_fmt(v) if isinstance(v, (int, float)) else v}" for k, v in params.items()) + ")"


def _spec(name, coords, grid, domain, params, expected) -> ManifoldSpec:
    params = dict(params)
    params["label"] = _label(name, {k: v for k, v in params.items() if k not in ("label", "split")})
    if len(coords) < 2:
        raise CatalogError(f"{name} needs dimension >= 2 on its own (dimension 1 only inside products)")
    return ManifoldSpec(name, tuple(coords), grid, tuple((float(a), float(b)) for a, b in domain),
                        ConnectionSpec(), expected, params)


def _connection_from_params(spec: ManifoldSpec, params: dict) -> ConnectionSpec | None:
    phi, u = params.get("phi"), params.get("u")
    if phi is None and u is None:
        return None
    if phi is not None and u is not None:
        raise CatalogError("give only one of phi or u")
    try:
        if phi is not None:
            return ConnectionSpec("semi_symmetric", phi=parse(str(phi), spec.coords))
        comps = u.split(";") if isinstance(u, str) else list(u)
        if len(comps) != spec.n:
            raise CatalogError(f"u needs {spec.n} components")
        return ConnectionSpec("semi_symmetric", u=tuple(parse(str(c), spec.coords) for c in comps))
    except ExprError as exc:
        raise CatalogError(f"bad connection parameter: {exc}") from exc


def catalog_get(name: str, params: dict | None = None) -> ManifoldSpec:
    """Build catalog entry ``name`` with ``params`` (missing ones take defaults)."""
    params = dict(params or {})
    if name not in _BY_NAME:
        raise CatalogError(f"unknown catalog entry {name!r}; known: {', '.join(_BY_NAME)}")
    allowed = set(_BY_NAME[name].params) | set(_CONNECTION_PARAMS)
    unknown = set(params) - allowed
    if unknown:
        raise CatalogError(f"unknown parameter(s) for {name}: {', '.join(sorted(unknown))}")
    geo = {k: v for k, v in params.items() if k not in _CONNECTION_PARAMS}
    spec = _BUILDERS[name](geo)
    conn = _connection_from_params(spec, params)
    if conn is None:
        return spec
    label = spec.params["label"]
    extra = {k: (to_text(v)) for k, v in params.items() if k in _CONNECTION_PARAMS and v is not None}
    new_params = dict(spec.params, **extra)
    new_params["label"] = label + "[" + ",".join(f"{k}={v}" for k, v in extra.items()) + "]"
    # reference values were derived for the Levi-Civita connection only
    expected = {}
    return ManifoldSpec(spec.name, spec.coords, spec.metric, spec.domain, conn, expected, new_params)


def to_text(v) -> str:
    if isinstance(v, (list, tuple)):
        return ";".join(str(x) for x in v)
    return str(v)


# ---------------------------------------------------------------------------
# canonical instances used by the verify suites and the tests

# "a,b" -> branch; derived from which of C, Z, E vanish on each geometry
_BRANCHES = {
    "euclidean3": {"1,1": "(ii)", "0,1": "(iii)", "1,-1": "(i)"},
    "euclidean4": {"1,1": "(ii)", "0,1": "(iii)", "1,-1/2": "(i)"},
    "euclidean3_q1": {"1,1": "(ii)", "0,1": "(iii)", "1,-1": "(i)"},
    "sphere3": {"1,1": "(ii)", "0,1": "(iii)", "1,-1": "(i)"},
    "hyperbolic3": {"1,1": "(ii)", "0,1": "(iii)", "1,-1": "(i)"},
    "sphere2_x_line": {"1,1": "not-flat", "0,1": "not-flat", "1,-1": "(i)"},
    "einstein_product": {"1,1": "not-flat", "0,1": "(iii)", "1,-1/2": "not-flat"},
    "rw_t2": {"1,1": "not-flat", "0,1": "not-flat", "1,-1/2": "(i)"},
    "rw_exp": {"1,1": "(ii)", "0,1": "(iii)", "1,-1/2": "(i)"},
}

# audit entries whose conclusion is known to fail on these geometries: the
# unit-index claim for concircularly symmetric manifolds is contradicted by
# any flat or product geometry (their curvature is parallel, index > 1)
_AUDIT_FAILURES = {
    "euclidean3": ["concircular_unit_index"],
    "euclidean4": ["concircular_unit_index"],
    "euclidean3_q1": ["concircular_unit_index"],
    "sphere2_x_line": ["concircular_unit_index"],
    "einstein_product": ["concircular_unit_index"],
}

_INSTANCES = (
    ("euclidean3", "euclidean", {"n": 3}),
    ("euclidean4", "euclidean", {"n": 4}),
    ("euclidean3_q1", "euclidean", {"n": 3, "q": 1}),
    ("sphere2", "sphere", {"n": 2, "r": 1}),
    ("sphere3", "sphere", {"n": 3, "r": 1}),
    ("hyperbolic2", "hyperbolic", {"n": 2}),
    ("hyperbolic3", "hyperbolic", {"n": 3}),
    ("sphere2_x_line", "product", {"left": "sphere(n=2,r=1)", "right": "euclidean(n=1)"}),
    ("einstein_product", "einstein_product", {}),
    ("rw_t2", "robertson_walker", {"f": "t^2", "k": 0}),
    ("rw_exp", "robertson_walker", {"f": "exp(t)", "k": 0}),
    ("sphere3_semi", "sphere", {"n": 3, "r": 1, "phi": "x0"}),
    ("euclidean3_semi", "euclidean", {"n": 3, "phi": "x0"}),
)


def catalog_instance(key: str) -> ManifoldSpec:
    for k, name, params in _INSTANCES:
        if k == key:
            spec = catalog_get(name, params)
            expected = dict(spec.expected)
            if k in _BRANCHES:
                expected["branches"] = dict(_BRANCHES[k])
            if expected or k in _AUDIT_FAILURES:
                expected["audit_failures"] = list(_AUDIT_FAILURES.get(k, []))
            return ManifoldSpec(spec.name, spec.coords, spec.metric, spec.domain, spec.connection,
                                expected, dict(spec.params, instance=k))
    raise CatalogError(f"unknown catalog instance {key!r}")


def instance_keys() -> list[str]:
    return [k for k, _, _ in _INSTANCES]


def catalog_instances() -> list[ManifoldSpec]:
    """The fixed list of specs swept by the verify suites."""
    return [catalog_instance(k) for k in instance_keys()]
