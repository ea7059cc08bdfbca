import pytest

from curvindex.audit import ENTRY_IDS, FAIL, HOLDS, PASS, VACUOUS, AuditConfig, AuditEntry, theorem_audit
from curvindex.exprjet import parse
from curvindex.family import QCParams
from curvindex.sampling import SamplingConfig

CFG = AuditConfig(sampling=SamplingConfig(16))


@pytest.fixture(scope="module")
def sphere3_audit():
    from curvindex.catalog import catalog_instance

    return theorem_audit(catalog_instance("sphere3"), QCParams(1, 1), CFG)


def test_every_entry_reported(sphere3_audit):
    assert [e.id for e in sphere3_audit.entries] == list(ENTRY_IDS)


def test_concircular_symmetry_gives_unit_index(sphere3_audit):
    e = sphere3_audit.entry("concircular_unit_index")
    assert e.hypothesis == HOLDS and e.conclusion == PASS
    assert e.measurements["max_nabla_concircular"] < 1e-8
    assert sphere3_audit.index.index == 1
    assert not sphere3_audit.failures


def test_flat_space_scalar_curvature_entries_vacuous(inst):
    audit = theorem_audit(inst("euclidean4"), QCParams(1, 1), CFG)
    for key in ("qc_proportional_solution", "qc_unit_index"):
        assert audit.entry(key).hypothesis == VACUOUS
        assert audit.entry(key).conclusion is None


def test_robertson_walker_bound(inst):
    audit = theorem_audit(inst("rw_t2"), QCParams(1, -0.5), CFG)
    e = audit.entry("qc_index_bound")
    if e.hypothesis == HOLDS:
        assert e.conclusion == PASS
    assert 1 <= audit.index.index <= 5


def test_recorded_counterexamples_reproduced(any_spec):
    if "audit_failures" not in any_spec.expected:
        pytest.skip("no recorded audit outcome")
    audit = theorem_audit(any_spec, QCParams(1, 1), CFG)
    assert sorted(audit.failures) == sorted(any_spec.expected["audit_failures"])


def test_scalar_field_slots_configurable(inst):
    cfg = AuditConfig(sampling=SamplingConfig(8), f="1+t^2", psi="exp(t)")
    spec = inst("rw_t2")
    js = theorem_audit(spec, QCParams(1, -0.5), cfg).to_json()
    assert parse(js["scalar_fields"]["f"], spec.coords) == parse("1+t^2", spec.coords)
    assert parse(js["scalar_fields"]["psi"], spec.coords) == parse("exp(t)", spec.coords)


def test_entry_invariants():
    with pytest.raises(ValueError):
        AuditEntry("x", HOLDS, {})
    with pytest.raises(ValueError):
        AuditEntry("x", VACUOUS, {}, conclusion=FAIL)
    assert AuditEntry("x", HOLDS, {}, conclusion=FAIL).failed
