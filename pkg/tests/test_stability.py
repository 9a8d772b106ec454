import math

import numpy as np
import pytest

from optamp import build_model
from optamp import sidebands, solver, stability, time_domain
from optamp.errors import SolverError
from optamp.model import pump_off


def circle_contour(turns=1, n=256, radius=1.0, center=0.0):
    th = np.linspace(0.0, 2.0 * math.pi * turns, n, endpoint=False)
    vals = center + radius * np.exp(1j * th)
    vals = np.append(vals, vals[0])
    return stability.NyquistContour(
        omegas=np.linspace(-1.0, 1.0, vals.size), values=vals, closed=True,
        phase_step_max=float(2 * math.pi * turns / n))


def test_winding_unit_circle():
    assert stability.winding_number(circle_contour()) == 1


def test_winding_reversed_circle():
    c = circle_contour()
    rev = stability.NyquistContour(omegas=c.omegas,
                                   values=c.values[::-1].copy(),
                                   closed=True,
                                   phase_step_max=c.phase_step_max)
    assert stability.winding_number(rev) == -1


def test_winding_nonenclosing():
    assert stability.winding_number(circle_contour(center=3.0)) == 0


@pytest.mark.parametrize("turns", [2, 3])
def test_winding_multiple_turns(turns):
    assert stability.winding_number(circle_contour(turns=turns,
                                                   n=1024)) == turns


def test_winding_insufficient_resolution():
    # adjacent samples nearly pi apart in phase: branch ambiguous
    vals = np.array([1.0 + 0.0j, -1.0 + 1e-6j, 1.0 + 0.0j])
    c = stability.NyquistContour(omegas=np.arange(3.0), values=vals,
                                 closed=True, phase_step_max=math.pi)
    with pytest.raises(SolverError, match="resolution"):
        stability.winding_number(c)


def test_winding_origin_rejected():
    vals = np.array([1.0 + 0.0j, 0.0 + 0.0j, 1.0 + 0.0j])
    c = stability.NyquistContour(omegas=np.arange(3.0), values=vals,
                                 closed=True, phase_step_max=0.1)
    with pytest.raises(SolverError, match="origin"):
        stability.winding_number(c)


def test_open_loop_matrix_passive_diagonal(model):
    m_ol = stability.open_loop_matrix(model.dq, pump_off(model),
                                      np.array([1e4, 1e5, 1e6]))
    assert np.all(np.isfinite(m_ol))
    assert np.abs(m_ol[:, 0, 1]).max() == 0.0
    assert np.abs(m_ol[:, 1, 0]).max() == 0.0


def test_contour_conjugate_symmetry(model):
    w = np.array([1e3, 1e4, 3e5, 2e6])
    plus = stability.characteristic(model.dq, model.pump, w)
    minus = stability.characteristic(model.dq, model.pump, -w)
    assert np.max(np.abs(minus - np.conj(plus))) < 1e-9 * np.max(np.abs(plus))


def test_passive_system_stable(model):
    contour = stability.nyquist(model.dq, pump_off(model))
    assert stability.winding_number(contour) == 0


def test_tuned_operating_point_stable(model):
    contour = stability.nyquist(model.dq, model.pump)
    assert contour.closed
    assert stability.winding_number(contour) == 0


def test_zero_offset_unstable(table1):
    m = build_model(table1, pump_tuning="fixed", omega_p=table1.omega_m)
    contour = stability.nyquist(m.dq, m.pump)
    assert stability.winding_number(contour) != 0


def test_overcritical_coupling_unstable(table1):
    m = build_model(table1, g_ratio=1.1)
    assert stability.winding_number(stability.nyquist(m.dq, m.pump)) != 0


def test_winding_invariant_under_refinement(model):
    base = stability.winding_number(
        stability.nyquist(model.dq, model.pump, points=1500))
    fine = stability.winding_number(
        stability.nyquist(model.dq, model.pump, points=6000))
    assert base == fine


def test_second_cut_same_winding(table1, model):
    for m in (model, build_model(table1, g_ratio=1.1)):
        w1 = stability.winding_number(
            stability.nyquist(m.dq, m.pump, points=2000))
        w2 = stability.winding_number(
            stability.nyquist(m.dq, m.pump, points=2000, cut="main_mirror"))
        assert w1 == w2


def test_characteristic_roots_match_full_system_poles(model):
    """A zero of det(I+M_OL) is a resonance of the full 15x15 system."""
    anchor = sidebands.isolated_mech_pole(
        solver.build_context(model.dq, model.pump))
    pole = stability.closed_loop_pole(model.dq, model.pump,
                                      anchor.real + 1e3)
    ctx = solver.build_context(model.dq, model.pump)
    a = solver.assemble_one(ctx, ctx.omega_p + pole)
    # the full coefficient matrix loses rank at the closed-loop pole
    sv = np.linalg.svd(a, compute_uv=False)
    assert sv[-1] / sv[0] < 1e-8


def test_nonfinite_contour_reported(model):
    with pytest.raises(SolverError, match="omega"):
        bad = np.array([1.0, 2.0])
        vals_patch = stability.characteristic(model.dq, model.pump, bad)
        stability._check_finite(bad, vals_patch * np.nan)


def test_stability_margin_threshold(table1):
    def builder(ratio):
        m = build_model(table1, g_ratio=ratio)
        return m.dq, m.pump

    report = stability.stability_margin(builder, ratio_operating=0.97,
                                        nyquist_points=1500)
    assert report.stable
    assert report.winding == 0
    assert report.ratio_critical == pytest.approx(1.0, abs=0.05)
    assert report.gain_margin == pytest.approx(report.ratio_critical / 0.97,
                                               rel=1e-9)


def test_stability_margin_no_bracket(table1):
    def builder(ratio):
        m = build_model(table1, g_ratio=ratio)
        return m.dq, m.pump

    with pytest.raises(SolverError, match="scan range"):
        stability.stability_margin(builder, ratio_operating=0.5,
                                   ratio_max=0.6, nyquist_points=1000)


@pytest.mark.slow
def test_time_domain_agrees_with_nyquist(table1):
    """Impulse-energy growth/decay referees the winding verdict on points
    spanning stable and unstable regimes."""
    cases = [
        build_model(table1),                                     # tuned
        build_model(table1, pump_tuning="fixed",
                    omega_p=table1.omega_m),                     # detuned
        build_model(table1, g_ratio=0.5),
        build_model(table1, g_ratio=1.1),
        build_model(table1, g_ratio=1.3),
    ]
    for m in cases:
        nyq_stable = stability.winding_number(
            stability.nyquist(m.dq, m.pump)) == 0
        td = time_domain.impulse_energy_check(m.dq, m.pump)
        assert td.stable == nyq_stable, (
            f"verdicts disagree at g_ratio={m.raw.g_ratio}, "
            f"tuning={m.raw.pump_tuning}: rate={td.growth_rate:.3g}")
