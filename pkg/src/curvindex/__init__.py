"""Curvature tensors, quasi-conformal flatness and the index of parallel
symmetric tensors for metric connections on chart-defined manifolds."""

__version__ = "0.1.0"

from .audit import AuditConfig, TheoremAudit, theorem_audit
from .catalog import catalog_get, catalog_instance, catalog_instances, catalog_list
from .estimators import CurvatureTransformer, IndexEstimator, QuasiConformalClassifier, check_manifold, check_points
from .family import QCParams, classify_flatness, flatness_scan, symmetry_scan
from .geometry import curvature_bundle, geometry_batch
from .index import IndexConfig, IndexEstimate, estimate_index
from .manifold import ConnectionSpec, ManifoldSpec, load_spec, spec_from_json
from .transport import parallel_transport

__all__ = [
    "AuditConfig",
    "ConnectionSpec",
    "CurvatureTransformer",
    "IndexConfig",
    "IndexEstimate",
    "IndexEstimator",
    "ManifoldSpec",
    "QCParams",
    "QuasiConformalClassifier",
    "TheoremAudit",
    "catalog_get",
    "catalog_instance",
    "catalog_instances",
    "catalog_list",
    "check_manifold",
    "check_points",
    "classify_flatness",
    "curvature_bundle",
    "estimate_index",
    "flatness_scan",
    "geometry_batch",
    "load_spec",
    "parallel_transport",
    "spec_from_json",
    "symmetry_scan",
    "theorem_audit",
]
