import math

import numpy as np
import pytest

from optamp import thermal
from optamp.errors import ConvergenceError, ParameterError


def quadratic_root_oracle(params):
    """Independent solution of T * alpha(T) = P_a R_m/(2 pi h w).

    With the linearized conductivity the fixed point is the positive root
    of a quadratic in T.
    """
    c = (thermal.ALPHA_0, thermal.ALPHA_SLOPE, thermal.T_REF)
    rhs = (params.A_abs * params.B_node * params.P_f * params.Rw_ratio
           / (2.0 * math.pi * params.h))
    a = c[1]
    b = c[0] - c[1] * c[2]
    disc = b * b + 4.0 * a * rhs
    return (-b + math.sqrt(disc)) / (2.0 * a)


def test_resistance_value(table1):
    r = thermal.thermal_resistance(table1, 10.0)
    assert r == pytest.approx(2.5 / (2.0 * math.pi * 50e-9 * 0.23), rel=1e-12)


def test_resistance_scalings(table1):
    r10 = thermal.thermal_resistance(table1, 10.0)
    # alpha doubles between the temperatures solving alpha(T) = 2*alpha(10)
    t_double = 10.0 + 0.23 / 0.032
    assert thermal.thermal_resistance(table1, t_double) == pytest.approx(
        r10 / 2.0, rel=1e-12)
    thick = table1.with_overrides(h=100e-9)
    assert thermal.thermal_resistance(thick, 10.0) == pytest.approx(
        r10 / 2.0, rel=1e-12)


def test_resistance_rejects_invalid(table1):
    with pytest.raises(ParameterError):
        thermal.thermal_resistance(table1, -1.0)
    with pytest.raises(ParameterError, match="validity"):
        thermal.thermal_resistance(table1, 100.0)


def test_absorbed_power(table1):
    assert thermal.absorbed_power(table1) == pytest.approx(
        10e-6 * 6e-3 * 3.4, rel=1e-12)
    assert thermal.absorbed_power(table1.with_overrides(B_node=0.0)) == 0.0
    double = table1.with_overrides(P_f=6.8)
    assert thermal.absorbed_power(double) == pytest.approx(
        2.0 * thermal.absorbed_power(table1), rel=1e-12)


def test_solve_temperature_value(table1):
    state = thermal.solve_temperature(table1)
    assert state.T_membrane == pytest.approx(quadratic_root_oracle(table1),
                                             abs=1e-5)
    assert state.T_membrane == pytest.approx(8.666, abs=1e-2)
    assert state.residual < 1e-6
    assert state.P_a == pytest.approx(2.04e-7, rel=1e-12)


def test_solve_matches_damped_iteration(table1):
    """Solver-choice invariance: bisection vs damped fixed-point iteration."""
    state = thermal.solve_temperature(table1)
    T = 10.0
    for _ in range(300):
        target = thermal.thermal_resistance(table1, T) * state.P_a
        T += 0.3 * (target - T)
    assert state.T_membrane == pytest.approx(T, abs=1e-6)


def test_solve_no_heating_floor(table1):
    cold = table1.with_overrides(P_f=0.0)
    state = thermal.solve_temperature(cold)
    assert state.T_membrane == 0.0
    warm = thermal.solve_temperature(cold, base_temperature=4.0)
    assert warm.T_membrane == 4.0


def test_temperature_monotone_in_pump_power(table1):
    temps = [thermal.solve_temperature(
        table1.with_overrides(P_f=p)).T_membrane
        for p in np.linspace(0.1, 10.0, 12)]
    assert np.all(np.diff(temps) > 0.0)


def test_thermal_runaway_detected(table1):
    # enough absorbed power pushes the root beyond the model's validity
    hot = table1.with_overrides(P_f=200.0)
    with pytest.raises(ConvergenceError, match="runaway|invalid"):
        thermal.solve_temperature(hot)
