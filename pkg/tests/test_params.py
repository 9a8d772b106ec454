import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from optamp import (ExperimentParams, amplitude_coeffs, build_model, derive,
                    validate)
from optamp.constants import TWO_PI
from optamp.errors import ParameterError
from optamp.model import coupled_cavity_resonance

# hand-evaluated (c/2) sqrt(T_0/(L_0 L_f)) with the defaults
OMEGA_C_HZ = 45631.5


def test_defaults_accepted(table1):
    validated = validate(table1)
    assert validated.warnings == ()
    assert validated.T_m == 0.8


def test_transmissivity_range_rejected(table1):
    with pytest.raises(ParameterError, match=r"T_m.*out of \[0, 1\]"):
        validate(table1.with_overrides(T_m=1.3))


def test_mass_positive(table1):
    with pytest.raises(ParameterError, match="M.*positive"):
        validate(table1.with_overrides(M=0.0))


@pytest.mark.parametrize("field,value", [
    ("eps_f", -1e-6), ("L_0", 0.0), ("P_in", -1.0), ("Q_m", 0.0),
    ("lambda_0", -1064e-9),
])
def test_range_violations(table1, field, value):
    with pytest.raises(ParameterError, match=field):
        validate(table1.with_overrides(**{field: value}))


def test_inconsistent_bandwidth_warns(table1):
    v = validate(table1.with_overrides(gamma_f=TWO_PI * 50e3))
    assert len(v.warnings) == 1
    assert "gamma_f" in v.warnings[0]


def test_amplitude_coeffs_basic():
    r, t = amplitude_coeffs(0.8)
    assert t == pytest.approx(math.sqrt(0.8), rel=1e-15)
    assert r == pytest.approx(math.sqrt(0.2), rel=1e-15)
    assert amplitude_coeffs(0.0) == (1.0, 0.0)
    assert amplitude_coeffs(1.0) == (0.0, 1.0)
    with pytest.raises(ParameterError):
        amplitude_coeffs(1.2)
    with pytest.raises(ParameterError):
        amplitude_coeffs(-0.1)


@given(st.floats(min_value=0.0, max_value=1.0))
def test_amplitude_coeffs_unitary(T):
    r, t = amplitude_coeffs(T)
    assert r * r + t * t == pytest.approx(1.0, abs=1e-15)
    assert r >= 0.0 and t >= 0.0


def test_coupled_cavity_resonance_value(table1):
    assert coupled_cavity_resonance(table1) / TWO_PI == pytest.approx(
        OMEGA_C_HZ, rel=1e-5)


def test_coupled_cavity_resonance_vanishes_with_coupler(table1):
    # omega_c ~ sqrt(T_0): scales down and tends to zero with the coupler
    base = coupled_cavity_resonance(table1)
    weak = coupled_cavity_resonance(table1.with_overrides(T_0=30e-6 / 1e4))
    assert weak == pytest.approx(base / 100.0, rel=1e-12)
    assert coupled_cavity_resonance(table1.with_overrides(T_0=1e-20)) < 1e-2


def test_gamma_0_exact(model):
    p = model.raw
    assert model.dq.gamma_0 == p.T_0 / (2.0 * model.dq.tau)


def test_derive_deterministic(table1):
    a = derive(validate(table1))
    b = derive(validate(table1))
    assert a == b


def test_spring_positive_and_offset_tracked(model):
    assert model.dq.delta_os > 0.0
    assert model.dq.omega_p_op == pytest.approx(
        model.raw.omega_m + model.dq.delta_os, abs=1e-6)


@pytest.mark.parametrize("overrides", [
    {}, {"g_ratio": 0.5}, {"T_m": 0.64}, {"eps_0": 0.0, "eps_f": 0.0},
])
def test_spring_positive_across_variants(table1, overrides):
    m = build_model(table1, **overrides)
    assert m.dq.delta_os > 0.0


def test_fixed_tuning_keeps_requested_offset(table1):
    m = build_model(table1, pump_tuning="fixed")
    assert m.dq.omega_p_op == table1.omega_p


def test_mode_power_uses_closed_form_g(table1):
    m = build_model(table1, g_mode="power")
    # closed-form estimate from the tabulated pump power
    from optamp.model import coupling_from_power
    assert m.dq.g == pytest.approx(coupling_from_power(table1, table1.P_f))
    assert m.dq.P_f_op == pytest.approx(table1.P_f)
