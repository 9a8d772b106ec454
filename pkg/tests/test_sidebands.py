import numpy as np
import pytest

from optamp import build_model
from optamp import sidebands, solver
from optamp.model import pump_off
from optamp.errors import SolverError

from conftest import passive_response_oracle


@pytest.fixture(scope="module")
def passive_pump(model):
    return pump_off(model)


def test_pump_off_matches_passive_oracle(model, passive_pump):
    om = 2 * np.pi * np.logspace(1, 6, 120)
    got = sidebands.signal_response(model.dq, passive_pump, om,
                                    normalize=False)
    ref = passive_response_oracle(model.dq, om)
    assert np.max(np.abs(got - ref)) / np.max(np.abs(ref)) < 1e-10


def test_pump_off_response_two_pole_rolloff(model, passive_pump):
    # monotonically falling magnitude above the coupled-cavity resonance
    om = 2 * np.pi * np.linspace(60e3, 2e6, 200)
    mag = np.abs(sidebands.signal_response(model.dq, passive_pump, om,
                                           normalize=False))
    assert np.all(np.diff(mag) < 0)


def test_zero_drive_zero_state(model):
    system = sidebands.assemble(model.dq, model.pump, 2 * np.pi * 1e3)
    state = sidebands.solve(system, sidebands.DriveVector())
    assert all(abs(s) == 0 and abs(i) == 0 for s, i in state.ports.values())
    assert state.y == 0


def test_solve_residual_and_ports(model):
    system = sidebands.assemble(model.dq, model.pump, 2 * np.pi * 3e3)
    state = sidebands.solve(
        system, sidebands.DriveVector(x_end=1e-15))
    assert state.residual < 1e-10
    assert set(state.ports) == {"a_1", "a_2", "a_f", "a_f1", "a_f2", "a_f3",
                                "a_f4", "a_in", "a_out"}
    assert abs(state.y) > 0


def test_idler_vanishes_without_pump(model, passive_pump):
    system = sidebands.assemble(model.dq, passive_pump, 2 * np.pi * 3e3)
    state = sidebands.solve(system, sidebands.DriveVector(x_end=1e-15))
    for name in ("a_1", "a_f2", "a_out"):
        assert abs(state.idler(name)) == 0.0
        assert abs(state.signal(name)) > 0.0


def test_thermal_drive_dark_without_pump(model, passive_pump):
    system = sidebands.assemble(model.dq, passive_pump, 2 * np.pi * 3e3)
    state = sidebands.solve(system, sidebands.DriveVector(f_th=1e-15))
    assert abs(state.signal("a_out")) < 1e-30
    assert abs(state.y) > 0


def test_drive_linearity(model):
    system = sidebands.assemble(model.dq, model.pump, 2 * np.pi * 2e3)
    d1 = sidebands.DriveVector(x_end=1e-15)
    d2 = sidebands.DriveVector(a_vac_in=(0.5, 0.25))
    d12 = sidebands.DriveVector(x_end=1e-15, a_vac_in=(0.5, 0.25))
    s1 = sidebands.solve(system, d1)
    s2 = sidebands.solve(system, d2)
    s12 = sidebands.solve(system, d12)
    for name in s12.ports:
        combined = s1.signal(name) + s2.signal(name)
        if abs(s12.signal(name)) > 0:
            assert s12.signal(name) == pytest.approx(combined, rel=1e-12)


def test_condition_number_over_band(model):
    for f in np.logspace(1, 6, 40):
        system = sidebands.assemble(model.dq, model.pump, 2 * np.pi * f)
        assert np.all(np.isfinite(system.matrix))
        assert system.condition_number < 1e12


def test_sweep_matches_single_solves(model):
    om = 2 * np.pi * np.array([123.0, 4.56e3, 78.9e3])
    sweep = sidebands.transfer_sweep(model.dq, model.pump, om)
    assert sweep.residual_max < 1e-10
    for k, omega in enumerate(om):
        system = sidebands.assemble(model.dq, model.pump, omega)
        state = sidebands.solve(system, sidebands.DriveVector(x_end=1.0))
        idx = solver.DRIVE_INDEX["x_end"]
        assert sweep.out_signal[k, idx] == pytest.approx(
            state.signal("a_out"), rel=1e-9)


def test_gain_passive_limits(model, passive_pump, closed_lossless_model):
    # open-port amplifier: the passive through-gain reflects the input
    # coupler leakage, still within a percent of unity
    g = sidebands.gain_exact(model.dq, passive_pump, 0.0)
    assert abs(g - 1.0) < 0.01
    # fully closed amplifier: exactly unity without the pump
    closed = closed_lossless_model
    g = sidebands.gain_exact(closed.dq, pump_off(closed), 12345.0)
    assert g == pytest.approx(1.0, abs=1e-9)


def test_gain_far_from_resonance(model):
    w = model.dq.omega_m * 3.0
    g = sidebands.gain_exact(model.dq, model.pump, w)
    assert abs(g - 1.0) < 0.01


def test_gain_exact_vs_approx_in_band(model):
    gamma_f = model.raw.gamma_f
    w = model.dq.omega_m + np.linspace(-10 * gamma_f, 10 * gamma_f, 201)
    w = w[np.abs(w - model.dq.omega_m) > 1e3]   # skip the razor-thin pole
    exact = sidebands.gain_exact(model.dq, model.pump, w)
    approx = sidebands.gain_approx(model.dq, w)
    rel = np.abs(exact - approx) / np.abs(approx)
    assert rel.max() < 0.05


def test_gain_approx_formula_values(model):
    dq = model.dq
    assert sidebands.gain_approx(dq, 0.0) == pytest.approx(
        1.0 - 2j * dq.g**2 * dq.tau_f / dq.omega_m, rel=1e-12)
    at_res = sidebands.gain_approx(dq, dq.omega_m)
    expected = 1.0 - 2.0 * dq.g**2 * dq.tau_f / dq.gamma_mech
    assert at_res == pytest.approx(expected, rel=1e-9)
    zero_pump = build_model(g_ratio=1e-9)
    assert sidebands.gain_approx(zero_pump.dq, 1e5) == pytest.approx(
        1.0, abs=1e-12)


def test_noise_coupling_values():
    assert sidebands.noise_coupling(1.0) == 0.0
    assert sidebands.noise_coupling(0.5) == 0.0
    assert sidebands.noise_coupling(2.0) == pytest.approx(np.sqrt(3.0))


def test_unitarity_closed_amplifier(closed_lossless_model):
    """|G|^2 - |K|^2 = 1 across 1000 random frequencies, lossless."""
    m = closed_lossless_model
    rng = np.random.default_rng(20240811)
    w = rng.uniform(-3.0, 3.0, size=1000) * m.dq.omega_m
    w = w[np.abs(np.abs(w) - m.dq.omega_m) > 1.0]  # avoid the bare pole
    s = sidebands.amp_scattering(m.dq, m.pump, w)
    uni = np.abs(s[:, 0, 0])**2 - np.abs(s[:, 0, 1])**2
    assert np.max(np.abs(uni - 1.0)) < 1e-6


def test_symplectic_scattering(closed_lossless_model):
    m = closed_lossless_model
    s = sidebands.amp_scattering(m.dq, m.pump, np.linspace(1e4, 3e6, 23))
    j = np.diag([1.0, -1.0])
    dev = max(np.abs(si @ j @ si.conj().T - j).max() for si in s)
    assert dev < 1e-9


def test_scatter_sign_convention_resolution(closed_lossless_model):
    """Documented resolution of the membrane-coupling sign ambiguity.

    Flipping the sign of the scattering term on the input-mirror side
    relative to the far side (the mixed-sign variant) breaks the amplifier
    unitarity; the implemented same-sign convention keeps it.
    """
    m = closed_lossless_model
    ctx = solver.build_context(m.dq, m.pump)
    w = np.linspace(1e5, 3e6, 9)

    def unitarity_dev(flip_near_side):
        a = solver.assemble_many(ctx, w + ctx.omega_p, isolated=True)
        if flip_near_side:
            a[:, solver.UF2, solver.IY] *= -1.0
            a[:, solver.VF2, solver.IY] *= -1.0
        x = solver.solve_batch(a, solver.isolated_drive_matrix())
        g2 = np.abs(x[:, solver.UF3, 0])**2
        k2 = np.abs(x[:, solver.UF3, 1])**2
        return np.max(np.abs(g2 - k2 - 1.0))

    assert unitarity_dev(False) < 1e-6
    assert unitarity_dev(True) > 1e-4


def test_force_sign_fixed_by_spring(model):
    """The spring must stiffen; the anti-physical gauge softens it."""
    import dataclasses
    ctx = solver.build_context(model.dq, model.pump)
    k_phys = sidebands._spring_stiffness_ctx(ctx, model.dq.omega_m)
    ctx_anti = dataclasses.replace(ctx, scatter_sign=-1.0)
    k_anti = sidebands._spring_stiffness_ctx(ctx_anti, model.dq.omega_m)
    assert k_phys.real > 0.0
    assert k_anti.real == pytest.approx(-k_phys.real, rel=1e-9)


def test_noise_coupling_full_solve(closed_lossless_model):
    """|G|^2 - |K_measured|^2 = 1 with K from the full two-sideband solve."""
    m = closed_lossless_model
    w = np.linspace(0.2, 2.4, 37) * m.dq.omega_m
    s = sidebands.amp_scattering(m.dq, m.pump, w)
    g = np.abs(s[:, 0, 0])
    k_measured = np.abs(s[:, 0, 1])
    assert np.max(np.abs(g**2 - k_measured**2 - 1.0)) < 1e-6
    preds = np.array([sidebands.noise_coupling(gi) for gi in s[:, 0, 0]])
    assert preds == pytest.approx(k_measured, abs=1e-6)


def test_response_normalization(model):
    om = 2 * np.pi * np.array([1.0, 50.0, 3e3])
    tf = sidebands.signal_response(model.dq, model.pump, om, normalize=True)
    assert abs(tf[0]) == pytest.approx(1.0, rel=1e-12)


def test_response_peak_maximized_at_spring_offset(model):
    om = 2 * np.pi * np.logspace(2, np.log10(20e3), 150)
    delta = model.dq.delta_os
    peak_tuned = np.abs(sidebands.signal_response(
        model.dq, model.pump, om)).max()
    for factor in (0.0, 0.5, 2.0):
        m = build_model(pump_tuning="fixed",
                        omega_p=model.raw.omega_m + factor * delta)
        peak = np.abs(sidebands.signal_response(m.dq, m.pump, om)).max()
        assert peak_tuned > peak


def test_singular_system_raises(model):
    system = sidebands.assemble(model.dq, model.pump, 2 * np.pi * 3e3)
    system.matrix[:] = 0.0
    with pytest.raises(SolverError):
        sidebands.solve(system, sidebands.DriveVector(x_end=1.0))
