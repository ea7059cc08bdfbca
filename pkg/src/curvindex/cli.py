"""Command-line front end.

Every subcommand prints one RunReport JSON document (or writes it to
``--out``).  Exit codes: 0 success, 1 a checked property failed, 2 input
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from fractions import Fraction

import numpy as np

from . import __version__
from .audit import AuditConfig, theorem_audit
from .catalog import CatalogError, catalog_get, catalog_instance, catalog_list, instance_keys, parse_params
from .checks import SUITES, run_suite, thread_count
from .exprjet import ExprError, JetDomainError
from .family import (
    DEFAULT_TOL,
    QCParams,
    classify_flatness,
    concircular_array,
    conformal_array,
    flatness_scan,
    quasi_conformal_array,
    symmetry_scan,
)
from .geometry import exterior_derivative_residual, geometry_batch
from .index import NULLITY_TOL, IndexConfig, estimate_index
from .manifold import dump_spec, load_spec
from .sampling import SamplingConfig

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class InputError(ValueError):
    pass


def _json_safe(obj):
    """Replace non-finite floats with None and numpy scalars with Python ones."""
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def run_report(subcommand: str, params: dict, results: dict, fingerprint: str | None,
               warnings: list, elapsed: float) -> dict:
    return {
        "version": __version__,
        "fingerprint": fingerprint,
        "subcommand": subcommand,
        "params": params,
        "results": results,
        "warnings": warnings,
        "timing": {"seconds": elapsed},
    }


def _point(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise InputError(f"bad point {text!r}; expected comma-separated numbers") from None


def _coef(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise InputError(f"bad coefficient {text!r}; expected a number or p/q") from None


def _qc(args) -> QCParams:
    return QCParams(_coef(args.a), _coef(args.b))


def _tensor_block(arr: np.ndarray, tol: float) -> dict:
    return {"components": arr, "max_abs": float(np.max(np.abs(arr))), "tol": tol}


def cmd_tensors(args):
    spec = load_spec(args.manifold)
    p = spec.check_point(_point(args.point))
    if p.shape != (spec.n,):
        raise InputError(f"point needs {spec.n} coordinates")
    b = geometry_batch(spec, p[None], with_derivatives=True)
    tol = args.tol
    res = {
        "point": p,
        "metric": b.g[0],
        "christoffel": b.gamma[0],
        "torsion": b.torsion[0],
        "riemann": _tensor_block(b.R[0], tol),
        "ricci": _tensor_block(b.S[0], tol),
        "scalar_curvature": float(b.r[0]),
        "einstein": _tensor_block(b.E[0], tol),
        "concircular": _tensor_block(concircular_array(b.R[0], b.r[0], b.g[0]), tol),
    }
    if spec.connection.kind == "semi_symmetric":
        res["exterior_derivative_residual"] = exterior_derivative_residual(spec, p)
    if spec.n > 2:
        res["conformal"] = _tensor_block(conformal_array(b.R[0], b.S[0], b.r[0], b.g[0]), tol)
    if args.a is not None or args.b is not None:
        if args.a is None or args.b is None:
            raise InputError("--a and --b must be given together")
        q = _qc(args)
        res["quasi_conformal"] = _tensor_block(quasi_conformal_array(b.R[0], b.S[0], b.r[0], b.g[0], q), tol)
    return spec, res, [], EXIT_OK


def cmd_classify(args):
    spec = load_spec(args.manifold)
    q = _qc(args)
    rep = flatness_scan(spec, q, SamplingConfig(args.samples, args.seed, args.tol))
    cls = classify_flatness(rep, q, spec.n, args.tol)
    warnings = [] if cls.consistent else ["inconsistency witness: branch requirements and flatness disagree"]
    return spec, {"flatness": rep.to_json(), "classification": cls.to_json()}, warnings, \
        EXIT_OK if cls.consistent else EXIT_CHECK


def cmd_symmetry(args):
    spec = load_spec(args.manifold)
    rep = symmetry_scan(spec, _qc(args), SamplingConfig(args.samples, args.seed, args.tol))
    return spec, {"symmetry": rep.to_json()}, [], EXIT_OK


def _index_config(args, spec) -> IndexConfig:
    base = None
    if args.base is not None:
        base = spec.check_point(_point(args.base))
        if base.shape != (spec.n,):
            raise InputError(f"base point needs {spec.n} coordinates")
    if args.samples < 1:
        raise InputError("--samples must be at least 1")
    return IndexConfig(base_point=base, sample_count=args.samples, constraint_order=args.order,
                       nullity_tol=args.tol, seed=args.seed)


def cmd_index(args):
    spec = load_spec(args.manifold)
    est = estimate_index(spec, _index_config(args, spec))
    return spec, {"index": est.to_json()}, list(est.warnings), EXIT_OK


def cmd_audit(args):
    spec = load_spec(args.manifold)
    cfg = AuditConfig(sampling=SamplingConfig(args.samples, args.seed), tol=args.tol, f=args.f, psi=args.psi,
                      index=IndexConfig(seed=args.seed))
    audit = theorem_audit(spec, _qc(args), cfg)
    warnings = [f"audit conclusion failed: {e}" for e in audit.failures]
    return spec, {"audit": audit.to_json()}, warnings, EXIT_CHECK if audit.failures else EXIT_OK


def cmd_catalog(args):
    if args.list:
        return None, {"entries": catalog_list(), "instances": instance_keys()}, [], EXIT_OK
    if not args.emit:
        raise InputError("catalog needs --list or --emit NAME")
    params = parse_params(args.params or "")
    if args.emit in instance_keys() and not params:
        spec = catalog_instance(args.emit)
    else:
        spec = catalog_get(args.emit, params)
    res = {"spec": spec.to_json()}
    if args.out:
        dump_spec(spec, args.out)
        res["written"] = args.out
    return spec, res, [], EXIT_OK


def cmd_verify(args):
    results = run_suite(args.suite, args.seed)
    failed = [r for r in results if not r.passed]
    res = {
        "suite": args.suite,
        "threads": thread_count(),
        "checks": [r.to_json() for r in results],
        "passed": len(results) - len(failed),
        "failed": len(failed),
    }
    warnings = [f"check failed: {r.name} on {r.subject}" for r in failed]
    return None, res, warnings, EXIT_CHECK if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curvindex", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"curvindex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, manifold=True):
        if manifold:
            p.add_argument("--manifold", required=True, help="manifold spec JSON file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="write the report here instead of stdout")

    def coefs(p, required):
        p.add_argument("--a", required=required, help="coefficient a (number or p/q)")
        p.add_argument("--b", required=required, help="coefficient b (number or p/q)")

    p = sub.add_parser("tensors", help="curvature tensors at a point")
    common(p)
    p.add_argument("--point", required=True, help="comma-separated coordinates")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    coefs(p, False)
    p.set_defaults(func=cmd_tensors)

    p = sub.add_parser("classify", help="flatness classification")
    common(p)
    coefs(p, True)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("symmetry", help="covariant derivatives of the curvature family")
    common(p)
    coefs(p, True)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.set_defaults(func=cmd_symmetry)

    p = sub.add_parser("index", help="number of parallel symmetric tensors")
    common(p)
    p.add_argument("--base", help="base point, comma-separated")
    p.add_argument("--samples", type=int, default=8)
    p.add_argument("--order", type=int, choices=(0, 1), default=1)
    p.add_argument("--tol", type=float, default=NULLITY_TOL)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("audit", help="check the parallel-tensor results on a manifold")
    common(p)
    coefs(p, True)
    p.add_argument("--samples", type=int, default=32)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--f", default="1", help="scalar field f of the general solution")
    p.add_argument("--psi", default="1", help="scalar field psi of the fundamental solutions")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("catalog", help="list or emit built-in manifolds")
    common(p, manifold=False)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--list", action="store_true")
    g.add_argument("--emit", metavar="NAME")
    p.add_argument("--params", default="", help="K=V,... (nested factors keep their parentheses)")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("verify", help="run the catalog-wide check suites")
    p.add_argument("--suite", choices=SUITES, default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)
    return parser


def _emit(report: dict, out: str | None, stream) -> None:
    text = json.dumps(_json_safe(report), indent=2, allow_nan=False) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        stream.write(text)


_NUMERIC_FLAGS = ("--a", "--b")


def _attach_negative_values(argv: list[str]) -> list[str]:
    """Turn ``--b -1/2`` into ``--b=-1/2``; argparse reads ``-1/2`` as a flag."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else ""
        if tok in _NUMERIC_FLAGS and len(nxt) > 1 and nxt[0] == "-" and (nxt[1].isdigit() or nxt[1] == "."):
            out.append(f"{tok}={nxt}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    argv = _attach_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    params = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    start = time.perf_counter()
    # catalog --emit --out writes the spec there; the report still goes to stdout
    report_out = None if args.command == "catalog" else args.out
    try:
        spec, results, warnings, code = args.func(args)
    except JetDomainError as exc:
        stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except (InputError, CatalogError, ExprError, ValueError, KeyError, OSError) as exc:
        stderr.write(f"input error: {exc}\n")
        return EXIT_INPUT
    except ArithmeticError as exc:
        stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    report = run_report(args.command, params, results, spec.fingerprint() if spec else None, warnings,
                        time.perf_counter() - start)
    try:
        _emit(report, report_out, stdout)
    except OSError as exc:
        stderr.write(f"input error: cannot write report: {exc}\n")
        return EXIT_INPUT
    return code


def main() -> None:
    sys.exit(run())
