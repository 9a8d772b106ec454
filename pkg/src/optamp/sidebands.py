"""Frequency-domain dynamics of the signal/idler sideband pair.

The pump scatters the signal sideband at carrier+Omega into an idler at
carrier+2*omega_p-Omega through the membrane motion; the state carries both
explicitly (the idler as its conjugated amplitude) plus the displacement.
The mechanical-frame frequency is w = Omega - omega_p throughout.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import solver
from .constants import C_LIGHT
from .errors import SolverError

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class DriveVector:
    """External drives; exactly one should be nonzero per transfer evaluation.

    Vacuum drives carry a (signal, idler) component pair.
    """

    x_end: complex = 0.0                      # end-mirror displacement [m]
    a_vac_in: tuple = (0.0, 0.0)              # open-port vacuum
    a_vac_loss_main: tuple = (0.0, 0.0)       # main-cavity loss-port vacuum
    a_vac_loss_filter: tuple = (0.0, 0.0)     # filter-cavity loss-port vacuum
    f_th: complex = 0.0                       # thermal force [N]

    def as_column(self) -> np.ndarray:
        """Drive amplitudes in solver.DRIVE_NAMES order."""
        return np.array([
            self.x_end,
            self.a_vac_in[0], self.a_vac_in[1],
            self.a_vac_loss_main[0], self.a_vac_loss_main[1],
            self.a_vac_loss_filter[0], self.a_vac_loss_filter[1],
            self.f_th,
        ], dtype=complex)


@dataclass(frozen=True)
class SidebandState:
    """Signal and idler amplitudes at every labeled port plus displacement."""

    omega: float                 # signal sideband frequency [rad/s]
    ports: dict                  # name -> (signal, idler) complex pair
    y: complex                   # membrane displacement amplitude [m]
    residual: float

    def signal(self, name: str) -> complex:
        return self.ports[name][0]

    def idler(self, name: str) -> complex:
        return self.ports[name][1]


@dataclass
class LinearSystem:
    """Assembled coefficient matrix for one sideband frequency."""

    omega: float
    matrix: np.ndarray
    ctx: solver.AssemblyContext

    @functools.cached_property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.matrix))


def assemble(dq, pump, omega: float) -> LinearSystem:
    """Build the 15x15 coupled system at signal frequency omega [rad/s]."""
    ctx = solver.build_context(dq, pump)
    return LinearSystem(omega=float(omega),
                        matrix=solver.assemble_one(ctx, omega), ctx=ctx)


def solve(system: LinearSystem, drive: DriveVector) -> SidebandState:
    """Solve an assembled system for one drive vector."""
    b = solver.drive_matrix(system.ctx) @ drive.as_column()
    x = solver.solve_batch(system.matrix, b)
    res = solver.relative_residual(system.matrix, x, b)
    if not np.all(np.isfinite(x)):
        raise SolverError(
            f"system resonant/unstable at omega={system.omega:.6g} rad/s")
    if res > RESIDUAL_TOL:
        raise SolverError(
            f"solve residual {res:.3g} exceeds {RESIDUAL_TOL:g} "
            f"at omega={system.omega:.6g} rad/s")
    out_s, out_v = solver.output_fields(
        system.ctx, x, a_in_s=drive.a_vac_in[0], a_in_i=drive.a_vac_in[1])
    ports = {name: (complex(x[i]), complex(np.conj(x[i + 7])))
             for i, name in enumerate(solver.PORT_NAMES)}
    ports["a_in"] = (complex(drive.a_vac_in[0]), complex(drive.a_vac_in[1]))
    ports["a_out"] = (complex(out_s), complex(np.conj(out_v)))
    y = complex(x[solver.IY]) * solver.displacement_scale(system.ctx)
    return SidebandState(omega=system.omega, ports=ports, y=y, residual=res)


@dataclass(frozen=True)
class SweepResult:
    """Batched transfer functions over a frequency grid.

    Arrays indexed (frequency, drive) with drives in solver.DRIVE_NAMES
    order;  out_signal is the signal amplitude at the readout port per unit
    drive, out_idler_conj the conjugated idler amplitude.
    """

    omegas: np.ndarray
    states: np.ndarray           # (N, 15, n_drives)
    out_signal: np.ndarray       # (N, n_drives)
    out_idler_conj: np.ndarray   # (N, n_drives)
    residual_max: float


def transfer_sweep(dq, pump, omegas, psi_m: float = 0.0,
                   psi_f: float = 0.0) -> SweepResult:
    """Solve the full system for all standard drives over a frequency grid."""
    ctx = solver.build_context(dq, pump, psi_m=psi_m, psi_f=psi_f)
    om = np.atleast_1d(np.asarray(omegas, dtype=float))
    a = solver.assemble_many(ctx, om)
    b = solver.drive_matrix(ctx)
    x = solver.solve_batch(a, b)
    # residual over the whole batch (normwise, worst case)
    r = a @ x - np.broadcast_to(b, x.shape)
    denom = (np.linalg.norm(a, axis=(1, 2)) * np.linalg.norm(x, axis=(1, 2))
             + np.linalg.norm(b))
    res = float(np.max(np.linalg.norm(r, axis=(1, 2)) / denom))
    out_s, out_v = solver.output_fields(ctx, np.swapaxes(x, 1, 2))
    out_s = np.asarray(out_s)
    out_v = np.asarray(out_v)
    # direct reflection of the open-port vacuum drives
    out_s[:, solver.DRIVE_INDEX["a_in_s"]] += -ctx.r_f
    out_v[:, solver.DRIVE_INDEX["a_in_i"]] += -ctx.r_f
    return SweepResult(omegas=om, states=x, out_signal=out_s,
                       out_idler_conj=out_v, residual_max=res)


def amp_scattering(dq, pump, w, psi_m: float = 0.0, psi_f: float = 0.0):
    """2x2 scattering of the isolated amplifier over mechanical-frame w.

    Maps (a_f4 signal, conjugated a_f4 idler) inputs to (a_f3 signal,
    conjugated a_f3 idler) outputs with the central-mirror loop cut;
    returns shape (N, 2, 2).
    """
    ctx = solver.build_context(dq, pump, psi_m=psi_m, psi_f=psi_f)
    return _amp_scattering_ctx(ctx, w)


def _amp_scattering_ctx(ctx, w) -> np.ndarray:
    w = np.atleast_1d(np.asarray(w))
    if not np.iscomplexobj(w):
        w = w.astype(float)
    omegas = w + ctx.omega_p
    a = solver.assemble_many(ctx, omegas, isolated=True)
    b = solver.isolated_drive_matrix()
    x = solver.solve_batch(a, b)
    s = np.empty((w.shape[0], 2, 2), dtype=complex)
    s[:, 0, :] = x[:, solver.UF3, :]
    s[:, 1, :] = x[:, solver.VF3, :]
    return s


def isolated_mech_pole(ctx) -> complex:
    """Dressed mechanical pole of the isolated amplifier (complex w).

    Root of the Schur-complemented mechanical diagonal with the loop cut;
    anchors the dense part of the stability contour grid.
    """
    def d_iso(w):
        a = solver.assemble_one(ctx, ctx.omega_p + w, isolated=True)
        a_oo = a[:solver.IY, :solver.IY]
        a_oy = a[:solver.IY, solver.IY]
        a_yo = a[solver.IY, :solver.IY]
        return a[solver.IY, solver.IY] - a_yo @ np.linalg.solve(a_oo, a_oy)

    w0 = complex(ctx.omega_m)
    w1 = complex(ctx.omega_m * (1.0 + 1e-6), -ctx.gamma_mech)
    f0, f1 = d_iso(w0), d_iso(w1)
    for _ in range(60):
        if f1 == f0:
            break
        w2 = w1 - f1 * (w1 - w0) / (f1 - f0)
        if abs(w2 - w1) < 1e-9 * abs(w2):
            return complex(w2)
        w0, f0, w1, f1 = w1, f1, w2, d_iso(w2)
    return complex(w1)


def gain_exact(dq, pump, omega):
    """Amplifier gain a_f3/a_f4 from the isolated-subsystem solve.

    omega is the mechanical-frame frequency [rad/s].  Returned in the phase
    convention of gain_approx (conjugate of the internal propagation
    convention); scalar in, scalar out.
    """
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    s = amp_scattering(dq, pump, w)
    g = np.conj(s[:, 0, 0])
    if not np.all(np.isfinite(g)):
        raise SolverError("amplifier subsystem singular")
    return complex(g[0]) if np.isscalar(omega) else g


def gain_approx(dq, omega):
    """Single-pole approximate amplifier gain.

    1 + 2i g^2 omega_m tau_f / (omega^2 - i gamma omega - omega_m^2),
    with gamma the viscous mechanical damping.
    """
    om = np.asarray(omega, dtype=float)
    den = om**2 - 1j * dq.gamma_mech * om - dq.omega_m**2
    g = 1.0 + 2j * dq.g**2 * dq.omega_m * dq.tau_f / den
    return complex(g) if np.isscalar(omega) else g


def noise_coupling(G) -> float:
    """|K| = sqrt(|G|^2 - 1) on the amplifying branch, 0 for an attenuator."""
    mag2 = float(abs(G)) ** 2
    if mag2 <= 1.0:
        return 0.0
    return math.sqrt(mag2 - 1.0)


def signal_response(dq, pump, omega_grid, normalize: bool = True,
                    omega_ref: float = 2.0 * math.pi * 1.0) -> np.ndarray:
    """Readout response to end-mirror motion over a signal-frequency grid.

    Returns the complex transfer a_out/x_end [sqrt(W)/m], optionally
    normalized to its magnitude at the low-frequency reference omega_ref.
    """
    om = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    sweep = transfer_sweep(dq, pump, om)
    tf = sweep.out_signal[:, solver.DRIVE_INDEX["x_end"]]
    if normalize:
        ref = transfer_sweep(dq, pump, np.array([omega_ref]))
        ref_mag = abs(ref.out_signal[0, solver.DRIVE_INDEX["x_end"]])
        if ref_mag == 0.0:
            raise SolverError("response normalization reference vanished")
        tf = tf / ref_mag
    return tf


def optical_spring_stiffness(dq, pump, w: float) -> complex:
    """Optical stiffness K(w) [N/m] added to the membrane by the pump.

    Schur complement of the mechanical row in the full system: the force
    response to a unit displacement with all optical loops closed.
    Re K > 0 stiffens the resonance.
    """
    ctx = solver.build_context(dq, pump)
    return _spring_stiffness_ctx(ctx, w)


def _spring_stiffness_ctx(ctx, w: float) -> complex:
    a = solver.assemble_one(ctx, ctx.omega_p + w)
    a_oo = a[:solver.IY, :solver.IY]
    a_oy = a[:solver.IY, solver.IY]
    a_yo = a[solver.IY, :solver.IY]
    schur = complex(-a_yo @ np.linalg.solve(a_oo, a_oy))
    # undo the internal displacement/row scaling of the assembly
    return schur / (solver.displacement_scale(ctx) * solver.mech_row_scale(ctx))


def _realized_g2_ctx(ctx) -> float:
    """Coupling-rate square realized by a pump set, from the DC gain."""
    s = _amp_scattering_ctx(ctx, np.array([0.0]))
    return float(np.imag(s[0, 0, 0]) * ctx.omega_m / (2.0 * ctx.tau_f))
