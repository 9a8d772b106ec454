"""Radio-frequency sensing: modulation-sideband resonance conditions and the
demodulated error-signal matrix that diagonalizes the two longitudinal
degrees of freedom (main cavity, filter cavity).

The probe is phase-modulated; the reflected carrier and modulation
sidebands beat on the readout photodetector, and the demodulated slope per
unit cavity-length change gives the optical gain of each sensor.  The pump
plays no role (sensing runs on the passive system).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import solver
from .constants import C_LIGHT, TWO_PI
from .errors import SolverError

_DOF_NAMES = ("main", "filter")
_PHASE_EPS = 1e-7       # one-way phase step for numerical slopes [rad]


@dataclass(frozen=True)
class SensingMatrix:
    """Demodulated optical gains, rows normalized to unit peak magnitude."""

    f_mod_hz: tuple       # demodulation frequencies [Hz]
    dofs: tuple           # column labels
    entries: np.ndarray   # (n_rows, 2), real after phase optimization
    demod_phases: np.ndarray
    raw_slopes: np.ndarray  # complex slopes before demodulation [1/m]
    imag_residue: float   # quadrature remainder discarded by demodulation


def filter_fsr(dq) -> float:
    """Free spectral range of the filter cavity, c/(2 L_f) [Hz]."""
    return dq.fsr_f


def _reflection(dq, omega: float, psi_m: float, psi_f: float) -> complex:
    """Passive reflection a_out/a_in at sideband frequency omega."""
    ctx = solver.build_context(dq, pump=None, psi_m=psi_m, psi_f=psi_f)
    a = solver.assemble_one(ctx, omega)
    b = np.zeros(solver.N_STATE, dtype=complex)
    b[solver.UF1] = ctx.t_f
    x = solver.solve_batch(a, b)
    out_s, _ = solver.output_fields(ctx, x, a_in_s=1.0)
    return complex(out_s)


def _beat_slope(dq, omega_mod: float, dof: str) -> complex:
    """d/dL of the photocurrent component at the modulation frequency.

    Phase-modulated input: carrier plus sidebands (-b/2, +b/2) at
    -+omega_mod; the returned slope is per meter of cavity length change
    (one-way phase psi = omega_0 dL / c).
    """
    beta = 0.1      # modulation depth; cancels in normalized rows

    def beat(psi_m: float, psi_f: float) -> complex:
        c0 = _reflection(dq, 0.0, psi_m, psi_f)
        s_up = (beta / 2.0) * _reflection(dq, omega_mod, psi_m, psi_f)
        s_lo = (-beta / 2.0) * _reflection(dq, -omega_mod, psi_m, psi_f)
        return np.conj(c0) * s_up + c0 * np.conj(s_lo)

    if dof == "main":
        plus, minus = beat(_PHASE_EPS, 0.0), beat(-_PHASE_EPS, 0.0)
    elif dof == "filter":
        plus, minus = beat(0.0, _PHASE_EPS), beat(0.0, -_PHASE_EPS)
    else:
        raise ValueError(f"unknown degree of freedom {dof!r}")
    dpsi_dl = dq.omega_0 / C_LIGHT
    return (plus - minus) / (2.0 * _PHASE_EPS) * dpsi_dl


def sensing_matrix(dq, f_mods_hz=(None, 10e6)) -> SensingMatrix:
    """Optical-gain matrix over modulation frequencies and cavity DOFs.

    f_mods_hz entries of None default to the filter free spectral range.
    Each row's demodulation phase is chosen on the principal branch to
    cancel the quadrature of the dominant response, making entries real;
    rows are normalized so the largest magnitude is one.
    """
    f_mods = tuple(dq.fsr_f if f is None else float(f) for f in f_mods_hz)
    n = len(f_mods)
    slopes = np.zeros((n, 2), dtype=complex)
    for i, f_mod in enumerate(f_mods):
        for j, dof in enumerate(_DOF_NAMES):
            slopes[i, j] = _beat_slope(dq, TWO_PI * f_mod, dof)

    entries = np.zeros((n, 2))
    phases = np.zeros(n)
    residue = 0.0
    for i in range(n):
        dominant = slopes[i, np.argmax(np.abs(slopes[i]))]
        if dominant == 0.0:
            raise SolverError(
                f"no sensing response at {f_mods[i]:.6g} Hz")
        # principal-branch phase: rotate the dominant entry onto the real
        # axis without the sign freedom of a full 2*pi rotation
        phi = -math.atan2(dominant.imag, dominant.real)
        phi = (phi + math.pi / 2.0) % math.pi - math.pi / 2.0
        phases[i] = phi
        rotated = slopes[i] * np.exp(1j * phi)
        imag_frac = np.max(np.abs(rotated.imag)) / np.max(np.abs(rotated))
        residue = max(residue, float(imag_frac))
        if imag_frac > 0.05:
            raise SolverError(
                "demodulation phase failed to make the row real "
                f"(residual {imag_frac:.2g})")
        entries[i] = rotated.real / np.max(np.abs(rotated.real))

    mat = SensingMatrix(f_mod_hz=f_mods, dofs=_DOF_NAMES, entries=entries,
                        demod_phases=phases, raw_slopes=slopes,
                        imag_residue=residue)
    if abs(np.linalg.det(entries)) < 1e-3:
        raise SolverError(
            "degenerate sensing matrix: degrees of freedom not separable "
            "at the chosen modulation frequencies")
    return mat
