"""Nyquist stability analysis of the amplifier loop.

The loop is cut at the membrane interface: the amplifier maps the
(signal, idler) pair entering from the central-mirror side to the pair
leaving toward it, and the passive propagation through the filter space,
central mirror, and main cavity closes the loop.  det(I + M_OL) over the
mechanical-frame frequency axis counts closed-loop right-half-plane poles
by the argument principle; all open-loop elements are dissipative, so zero
encirclements of the origin is equivalent to closed-loop stability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import sidebands, solver
from .errors import SolverError

_DEFAULT_F_MIN = 10.0        # Hz
_DEFAULT_F_MAX = 10e6        # Hz
_DEFAULT_POINTS = 4000       # total over both signs
_MAX_REFINE_ROUNDS = 40
_MAX_CONTOUR_POINTS = 400_000
_RESIDUE_LIMIT = 0.05


@dataclass(frozen=True)
class NyquistContour:
    """Samples of det(I + M_OL) along the frequency axis."""

    omegas: np.ndarray          # mechanical-frame frequencies [rad/s], sorted
    values: np.ndarray          # complex det(I + M_OL)
    closed: bool                # grid symmetric about omega = 0
    phase_step_max: float       # largest adjacent-point phase step [rad]


@dataclass(frozen=True)
class StabilityReport:
    winding: int
    stable: bool
    gain_margin: float          # critical-to-operating coupling ratio
    ratio_operating: float      # operating g / omega_c
    ratio_critical: float       # g / omega_c at the instability onset


def _freq_array(omega):
    om = np.atleast_1d(np.asarray(omega))
    return om if np.iscomplexobj(om) else om.astype(float)


def main_cavity_reflection(dq, omega):
    """Reflection of the main cavity system seen from the filter side."""
    e2 = np.exp(1j * _freq_array(omega) * dq.tau)
    den = 1.0 - dq.r_0 * dq.s_0 * e2
    return -dq.r_0 + dq.t_0**2 * dq.s_0 * e2 / den


def _main_cavity_reflection_conj(dq, omega):
    """Analytic continuation of conj(main_cavity_reflection) off the axis."""
    e2 = np.exp(-1j * _freq_array(omega) * dq.tau)
    den = 1.0 - dq.r_0 * dq.s_0 * e2
    return -dq.r_0 + dq.t_0**2 * dq.s_0 * e2 / den


def loop_return(dq, omega):
    """One-turn passive transfer a_f3 -> a_f4 through the central mirror."""
    om = _freq_array(omega)
    return (dq.chi**2 * np.exp(1j * om * dq.tau_f) * dq.s_f
            * main_cavity_reflection(dq, om))


def loop_return_conj(dq, omega):
    """Conjugated-channel loop transfer, analytic in complex frequency."""
    om = _freq_array(omega)
    return (np.conj(dq.chi)**2 * np.exp(-1j * om * dq.tau_f) * dq.s_f
            * _main_cavity_reflection_conj(dq, om))


def open_loop_matrix(dq, pump, w, cut: str = "membrane") -> np.ndarray:
    """Open-loop transfer matrix for the (signal, idler) pair, shape (N,2,2).

    w is the mechanical-frame frequency (complex values give the analytic
    continuation).  det(I + M_OL) is the closed-loop characteristic
    function; the sign convention folds the loop so that M_OL = -(loop
    transfer).  Both cut points give the same determinant spectrum;
    'main_mirror' is retained as a cross-check.
    """
    w = _freq_array(w)
    om_s = w + dq.omega_p_op
    om_i = dq.omega_p_op - w
    s_amp = sidebands.amp_scattering(dq, pump, w)
    m_ol = np.empty_like(s_amp)
    if cut == "membrane":
        lu = loop_return(dq, om_s)
        lv = loop_return_conj(dq, om_i)
        m_ol[:, 0, :] = -lu[:, None] * s_amp[:, 0, :]
        m_ol[:, 1, :] = -lv[:, None] * s_amp[:, 1, :]
    elif cut == "main_mirror":
        # cut at the field leaving the central mirror toward the membrane
        p1u = dq.chi * np.exp(1j * om_s * dq.tau_f / 2.0) * dq.s_f
        p1v = np.conj(dq.chi) * np.exp(-1j * om_i * dq.tau_f / 2.0) * dq.s_f
        p2u = (dq.chi * np.exp(1j * om_s * dq.tau_f / 2.0)
               * main_cavity_reflection(dq, om_s))
        p2v = (np.conj(dq.chi) * np.exp(-1j * om_i * dq.tau_f / 2.0)
               * _main_cavity_reflection_conj(dq, om_i))
        p1 = np.zeros_like(s_amp)
        p1[:, 0, 0] = p1u
        p1[:, 1, 1] = p1v
        p2 = np.zeros_like(s_amp)
        p2[:, 0, 0] = p2u
        p2[:, 1, 1] = p2v
        m_ol = -(p2 @ s_amp @ p1)
    else:
        raise ValueError(f"unknown loop cut {cut!r}")
    return m_ol


def characteristic(dq, pump, w, cut: str = "membrane") -> np.ndarray:
    """det(I + M_OL) over mechanical-frame frequencies."""
    m_ol = open_loop_matrix(dq, pump, w, cut=cut)
    eye = np.eye(2)
    return np.linalg.det(eye[None, :, :] + m_ol)


def _base_grid(f_min: float, f_max: float, points: int) -> np.ndarray:
    half = max(points // 2, 8)
    pos = 2.0 * math.pi * np.logspace(math.log10(f_min), math.log10(f_max),
                                      half)
    return np.concatenate([-pos[::-1], pos])


def _anchored_grid(dq, pump, base: np.ndarray, gamma_f: float) -> np.ndarray:
    """Densify the contour grid around the dressed mechanical resonance.

    The amplifier entries have a pole of width down to the bare mechanical
    linewidth; logarithmically spaced samples around it keep adjacent-point
    phase steps bounded where no fixed grid could.
    """
    ctx = solver.build_context(dq, pump)
    anchor = sidebands.isolated_mech_pole(ctx)
    w_r = abs(anchor.real)
    width = max(abs(anchor.imag), 1e-3)
    d = np.logspace(math.log10(0.03 * width), math.log10(8.0 * gamma_f), 120)
    patch = np.concatenate([w_r - d[::-1], [w_r], w_r + d])
    lin = np.linspace(w_r - 5.0 * gamma_f, w_r + 5.0 * gamma_f, 500)
    full = np.concatenate([base, patch, -patch, lin, -lin])
    return np.unique(full)


def nyquist(dq, pump, grid=None, f_min: float = _DEFAULT_F_MIN,
            f_max: float = _DEFAULT_F_MAX, points: int = _DEFAULT_POINTS,
            max_phase_step: float = math.pi / 8.0,
            cut: str = "membrane") -> NyquistContour:
    """Sample det(I + M_OL) with adaptive refinement of rapid phase changes.

    The default grid is logarithmic over +-[f_min, f_max] (points total)
    and is refined by interval bisection until adjacent samples differ in
    phase by less than max_phase_step.
    """
    if grid is None:
        w = _base_grid(f_min, f_max, points)
        gamma_f = dq.t_f**2 / (2.0 * dq.tau_f)
        w = _anchored_grid(dq, pump, w, gamma_f)
    else:
        w = np.sort(np.asarray(grid, dtype=float))
    vals = characteristic(dq, pump, w, cut=cut)
    _check_finite(w, vals)

    for _ in range(_MAX_REFINE_ROUNDS):
        dphi = np.abs(np.diff(np.unwrap(np.angle(vals))))
        bad = np.flatnonzero(dphi > max_phase_step)
        if bad.size == 0 or w.size > _MAX_CONTOUR_POINTS:
            break
        mids = 0.5 * (w[bad] + w[bad + 1])
        mids = np.setdiff1d(mids, w)
        if mids.size == 0:
            break
        mvals = characteristic(dq, pump, mids, cut=cut)
        _check_finite(mids, mvals)
        w = np.concatenate([w, mids])
        order = np.argsort(w)
        w = w[order]
        vals = np.concatenate([vals, mvals])[order]

    dphi = np.abs(np.diff(np.unwrap(np.angle(vals))))
    closed = bool(abs(w[0] + w[-1]) < 1e-9 * abs(w[-1]))
    return NyquistContour(omegas=w, values=vals, closed=closed,
                          phase_step_max=float(dphi.max()))


def _check_finite(w, vals):
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise SolverError(
            "non-finite contour sample at omega = "
            f"{np.asarray(w)[bad][0]:.6g} rad/s")


def winding_number(contour: NyquistContour) -> int:
    """Signed encirclements of the origin by the closed contour.

    The frequency sweep is closed through a waypoint on the positive real
    axis (the far tails cannot cross the negative real axis because the
    passive loop gain is below unity), so the closure adds no winding.
    Raises if the accumulated argument is not close to an integer turn.
    """
    vals = contour.values
    if np.any(vals == 0.0):
        raise SolverError("contour passes through the origin")
    waypoint = np.array([10.0 + 0.0j])
    closed_path = np.concatenate([vals, waypoint, vals[:1]])
    steps = np.diff(np.unwrap(np.angle(closed_path)))
    if np.any(np.abs(steps) >= 0.999 * math.pi):
        raise SolverError(
            "insufficient contour resolution: adjacent samples differ in "
            "phase by about pi, leaving the branch ambiguous")
    turns = float(np.sum(steps)) / (2.0 * math.pi)
    n = int(round(turns))
    residue = abs(turns - n)
    if residue >= _RESIDUE_LIMIT:
        raise SolverError(
            f"insufficient contour resolution: winding residue {residue:.3g}")
    return n


def is_stable(dq, pump, **nyquist_kwargs) -> bool:
    return winding_number(nyquist(dq, pump, **nyquist_kwargs)) == 0


def closed_loop_pole(dq, pump, w_guess: complex, cut: str = "membrane",
                     max_iter: int = 80) -> complex:
    """Secant root of det(I + M_OL) in the complex frequency plane.

    Im(w) > 0 marks a growing mode (time dependence exp(-i w t)).
    Diagnostic cross-check for the winding count.
    """
    def f(w):
        return complex(characteristic(dq, pump, np.array([w]), cut=cut)[0])

    w0 = complex(w_guess)
    w1 = w0 * (1.0 + 1e-7) + 1j * max(abs(w0) * 1e-7, 1e-4)
    f0, f1 = f(w0), f(w1)
    for _ in range(max_iter):
        if f1 == f0:
            break
        w2 = w1 - f1 * (w1 - w0) / (f1 - f0)
        if abs(w2 - w1) <= 1e-10 * max(abs(w2), 1.0):
            return complex(w2)
        w0, f0, w1, f1 = w1, f1, w2, f(w2)
    raise SolverError(f"pole search did not converge from {w_guess!r}")


def stability_margin(build, ratio_operating: float,
                     ratio_max: float = 1.6, rel_tol: float = 2e-3,
                     nyquist_points: int = 2000) -> StabilityReport:
    """Locate the coupling ratio at the instability onset by bisection.

    build(ratio) must return a (dq, pump) pair for the requested
    g/omega_c; the operating report carries the winding at
    ratio_operating and the margin to the onset.
    """
    def _winding(ratio: float) -> int:
        dq, pump = build(ratio)
        return winding_number(nyquist(dq, pump, points=nyquist_points))

    w_op = _winding(ratio_operating)
    lo, w_lo = ratio_operating, w_op
    if w_op != 0:
        # operating point already unstable: search downward for a bracket
        lo, hi = ratio_operating / 4.0, ratio_operating
        w_lo = _winding(lo)
        if w_lo != 0:
            raise SolverError("no instability threshold found in scan range")
    else:
        hi = ratio_max
        w_hi = _winding(hi)
        if w_hi == 0:
            raise SolverError("no instability found in scan range")
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if _winding(mid) == 0:
            lo = mid
        else:
            hi = mid
    ratio_critical = 0.5 * (lo + hi)
    return StabilityReport(
        winding=w_op, stable=(w_op == 0),
        gain_margin=ratio_critical / ratio_operating,
        ratio_operating=ratio_operating, ratio_critical=ratio_critical)
