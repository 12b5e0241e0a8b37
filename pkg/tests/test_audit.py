import json

import pytest
from hypothesis import given, strategies as st

from memkernel.audit import (HBAR_CGS, REFERENCE_PRESET, AuditInput, NaturalUnits,
                             PhysicalConstants, mensky_strength, ordering_check,
                             perturbative_flags, run_audit)
from memkernel.errors import DomainError


def test_preset_values():
    assert REFERENCE_PRESET == AuditInput(1e9, 1e10, 1e12, 1e-24)


def test_ordering_margins():
    order = ordering_check(REFERENCE_PRESET)
    assert order.passed
    assert order.gamma_over_eta == pytest.approx(10.0)
    assert order.omega_over_gamma == pytest.approx(100.0)
    assert not ordering_check(AuditInput(1.0, 1.0, 2.0, 1.0)).passed
    assert not ordering_check(AuditInput(1.0, 3.0, 2.0, 1.0)).passed


def test_strength_at_cutoff():
    k = mensky_strength(1e12, 1e10, 1e-24)
    # gamma m_B omega / hbar and -gamma^2 m_B / (2 hbar)
    assert k.real == pytest.approx(1e10 * 1e-24 * 1e12 / HBAR_CGS, rel=1e-15)
    assert k.imag == pytest.approx(-1e20 * 1e-24 / (2 * HBAR_CGS), rel=1e-15)
    assert k.real == pytest.approx(9.482521568277412e24, rel=1e-12)
    with pytest.raises(DomainError):
        mensky_strength(-1.0, 1.0, 1.0)


def test_flags():
    assert perturbative_flags(1e10, 1e12)[0]["level"] == "INFO"
    warn = perturbative_flags(0.5, 1.0)
    assert warn[0]["level"] == "WARN"
    assert perturbative_flags(0.0, 1.0)[0]["code"] == "gamma_zero"
    assert len(perturbative_flags(1.0, 100.0, omega_0=2.0)) == 2
    for flag in warn:
        assert set(flag) == {"level", "code", "message"}


def test_report_schema_and_verdict():
    report = run_audit()
    data = json.loads(report.to_json())
    assert set(data) == {"inputs", "ordering_pass", "margins", "k_real", "k_imag",
                         "flags", "verdict"}
    assert data["ordering_pass"] is True
    assert data["margins"] == [10.0, 100.0]
    assert data["inputs"]["hbar"] == HBAR_CGS
    assert "unphysically large" in data["verdict"]
    failing = run_audit(AuditInput(1e10, 1e9, 1e12, 1e-24))
    assert not failing.ordering_pass
    assert failing.verdict.startswith("inconsistent")


def test_json_is_deterministic():
    assert run_audit().to_json() == run_audit().to_json()


@given(st.floats(1e6, 1e14), st.floats(1e-28, 1e-20), st.floats(1e-3, 1e3))
def test_natural_units_round_trip(omega, mass, k_scale):
    units = NaturalUnits.for_bath(omega, mass)
    k = k_scale * mass * omega / HBAR_CGS
    assert units.strength_from_natural(units.strength_to_natural(k)) == pytest.approx(k, rel=1e-12)


def test_natural_units_strength():
    # in units of 1/W, m_B and hbar the cutoff strength is (gamma / W)
    units = NaturalUnits.for_bath(1e12, 1e-24)
    k = mensky_strength(1e12, 1e10, 1e-24)
    assert units.strength_to_natural(k.real) == pytest.approx(0.01, rel=1e-12)
    natural = mensky_strength(1.0, 0.01, 1.0, PhysicalConstants(hbar=1.0))
    assert natural.real == pytest.approx(0.01, rel=1e-15)


def test_input_validation():
    with pytest.raises(DomainError):
        AuditInput(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        perturbative_flags(-1.0, 1.0)
