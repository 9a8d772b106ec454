"""Shared frequency-domain machinery: assembly and solution of the coupled
sideband equations.

State vector (15 complex unknowns) for one signal/idler pair at sideband
frequency Omega (signal at carrier+Omega, idler at carrier+2*omega_p-Omega):

    index 0..6   signal amplitudes  u_1, u_2, u_f, u_f1, u_f2, u_f3, u_f4
    index 7..13  conjugated idler amplitudes (same port order)
    index 14     membrane displacement amplitude Y [m]

Port geometry: main-cavity end mirror | main space | central mirror |
filter space | membrane | filter input mirror | open port.  Each one-way
propagation across a cavity turns a time delay into the phase factor
exp(+1j*Omega*delay) on the signal and exp(-1j*Omega_i*delay) on the
conjugated idler.  The carrier phase across the filter cavity is the
explicit factor chi per pass; the main cavity carrier phase is absorbed
into the resonance condition.  Round-trip losses are lumped beam-splitter
pick-offs with amplitude sqrt(eps), one per cavity, each admitting an
independent vacuum input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .constants import C_LIGHT
from .errors import SolverError

N_STATE = 15

# unknown indices
U1, U2, UF, UF1, UF2, UF3, UF4 = range(7)
V1, V2, VF, VF1, VF2, VF3, VF4 = range(7, 14)
IY = 14

PORT_NAMES = ("a_1", "a_2", "a_f", "a_f1", "a_f2", "a_f3", "a_f4")

# drive (right-hand side) column order
DRIVE_NAMES = ("x_end", "a_in_s", "a_in_i", "loss_main_s", "loss_main_i",
               "loss_filter_s", "loss_filter_i", "f_th")
N_DRIVES = len(DRIVE_NAMES)
DRIVE_INDEX = {name: i for i, name in enumerate(DRIVE_NAMES)}

# Membrane pump-scattering and radiation-force sign conventions.  The two
# published variants differ; the combination below is the one that keeps the
# amplifier symplectic (|G|^2 - |K|^2 = 1 for a closed, lossless system) and
# the optical spring positive.  tests/test_sidebands.py demonstrates the
# resolution procedure by showing the mixed-sign variant breaks unitarity.
SCATTER_SIGN = 1.0
FORCE_SIGN = 1.0


@dataclass
class AssemblyContext:
    """Everything the matrix assembly needs, in plain numeric form."""

    r_0: float
    t_0: float
    r_f: float
    t_f: float
    r_m: float
    t_m: float
    s_0: float          # sqrt(1 - eps_0)
    s_f: float          # sqrt(1 - eps_f)
    eps_0: float
    eps_f: float
    chi: complex        # carrier phase per filter-cavity pass
    tau: float          # main round-trip time [s]
    tau_f: float        # filter round-trip time [s]
    omega_p: float      # operating pump offset [rad/s]
    k_p: float          # pump wavenumber (omega_0 + omega_p)/c [1/m]
    omega_0: float
    M: float
    omega_m: float
    gamma_mech: float
    A1: complex = 0.0   # pump amplitudes at the membrane, |A|^2 in W
    A2: complex = 0.0
    A3: complex = 0.0
    A4: complex = 0.0
    A_main: complex = 0.0   # static carrier at the main end mirror
    psi_m: float = 0.0  # extra one-way phase, main cavity (length detuning)
    psi_f: float = 0.0  # extra one-way phase, filter cavity
    scatter_sign: float = SCATTER_SIGN
    force_sign: float = FORCE_SIGN


def displacement_scale(ctx: AssemblyContext) -> float:
    """Meters per internal displacement unit.

    The solver carries the membrane coordinate as the phase-modulation
    depth 2 k_p Y, which keeps the coefficient matrix well conditioned
    despite the ~1e19 spread between field and mechanical units.
    """
    return 1.0 / (2.0 * ctx.k_p)


def mech_row_scale(ctx: AssemblyContext) -> float:
    """Equation scaling for the mechanical row (1 over static stiffness
    per displacement unit)."""
    return 2.0 * ctx.k_p / (ctx.M * ctx.omega_m**2)


def build_context(dq, pump=None, psi_m=0.0, psi_f=0.0) -> AssemblyContext:
    """Assemble a context from DerivedQuantities and an optional pump set."""
    ctx = AssemblyContext(
        r_0=dq.r_0, t_0=dq.t_0, r_f=dq.r_f, t_f=dq.t_f, r_m=dq.r_m,
        t_m=dq.t_m, s_0=dq.s_0, s_f=dq.s_f, eps_0=dq.eps_0, eps_f=dq.eps_f,
        chi=dq.chi, tau=dq.tau, tau_f=dq.tau_f, omega_p=dq.omega_p_op,
        k_p=dq.k_p, omega_0=dq.omega_0, M=dq.M, omega_m=dq.omega_m,
        gamma_mech=dq.gamma_mech, A_main=dq.A_main,
        psi_m=psi_m, psi_f=psi_f,
    )
    if pump is not None:
        ctx.A1, ctx.A2, ctx.A3, ctx.A4 = pump.A_f1, pump.A_f2, pump.A_f3, pump.A_f4
    return ctx


def assemble_many(ctx: AssemblyContext, omegas: np.ndarray,
                  isolated: bool = False) -> np.ndarray:
    """Coefficient matrices, shape (N, 15, 15), over sideband frequencies.

    omegas are signal sideband frequencies Omega [rad/s] relative to the
    carrier.  With isolated=True the loop through the central mirror is cut:
    rows for a_1, a_2, a_f are replaced by identities and a_f4 (both
    components) becomes a pure input, which defines the amplifier
    (input mirror + membrane + pump) in isolation.
    """
    om = np.atleast_1d(np.asarray(omegas))
    if not np.iscomplexobj(om):
        om = om.astype(float)
    n = om.shape[0]
    om_i = 2.0 * ctx.omega_p - om          # idler sideband frequency
    w = om - ctx.omega_p                   # mechanical-frame frequency

    e_m = np.exp(1j * (om * ctx.tau / 2.0 + ctx.psi_m))
    e_f = np.exp(1j * (om * ctx.tau_f / 2.0 + ctx.psi_f))
    e_m_v = np.exp(-1j * (om_i * ctx.tau / 2.0 + ctx.psi_m))
    e_f_v = np.exp(-1j * (om_i * ctx.tau_f / 2.0 + ctx.psi_f))
    chi = ctx.chi
    chi_v = np.conj(chi)

    s_y = displacement_scale(ctx)
    s_r = mech_row_scale(ctx)
    c2u = ctx.scatter_sign * 2j * ctx.k_p * ctx.r_m * ctx.A1 * s_y
    c3u = ctx.scatter_sign * 2j * ctx.k_p * ctx.r_m * ctx.A4 * s_y
    c2v = -ctx.scatter_sign * 2j * ctx.k_p * ctx.r_m * np.conj(ctx.A1) * s_y
    c3v = -ctx.scatter_sign * 2j * ctx.k_p * ctx.r_m * np.conj(ctx.A4) * s_y

    a = np.zeros((n, N_STATE, N_STATE), dtype=complex)
    idx = np.arange(N_STATE)
    a[:, idx, idx] = 1.0

    if not isolated:
        a[:, U1, U2] = -ctx.r_0 * e_m
        a[:, U1, UF3] = -ctx.t_0 * chi * e_f
        a[:, U2, U1] = -ctx.s_0 * e_m
        a[:, UF, UF3] = ctx.r_0 * chi * e_f
        a[:, UF, U2] = -ctx.t_0 * e_m
        a[:, UF4, UF] = -chi * e_f * ctx.s_f
        a[:, V1, V2] = -ctx.r_0 * e_m_v
        a[:, V1, VF3] = -ctx.t_0 * chi_v * e_f_v
        a[:, V2, V1] = -ctx.s_0 * e_m_v
        a[:, VF, VF3] = ctx.r_0 * chi_v * e_f_v
        a[:, VF, V2] = -ctx.t_0 * e_m_v
        a[:, VF4, VF] = -chi_v * e_f_v * ctx.s_f

    a[:, UF1, UF2] = -ctx.r_f
    a[:, UF2, UF1] = -ctx.r_m
    a[:, UF2, UF4] = -ctx.t_m
    a[:, UF2, IY] = -c2u
    a[:, UF3, UF1] = -ctx.t_m
    a[:, UF3, UF4] = ctx.r_m
    a[:, UF3, IY] = -c3u
    a[:, VF1, VF2] = -ctx.r_f
    a[:, VF2, VF1] = -ctx.r_m
    a[:, VF2, VF4] = -ctx.t_m
    a[:, VF2, IY] = -c2v
    a[:, VF3, VF1] = -ctx.t_m
    a[:, VF3, VF4] = ctx.r_m
    a[:, VF3, IY] = -c3v

    d_mech = ctx.M * (ctx.omega_m**2 - w**2 - 1j * ctx.gamma_mech * w)
    a[:, IY, IY] = d_mech * s_y * s_r
    fs = ctx.force_sign / C_LIGHT * s_r
    a[:, IY, UF1] = -fs * np.conj(ctx.A1)
    a[:, IY, UF2] = -fs * np.conj(ctx.A2)
    a[:, IY, UF3] = fs * np.conj(ctx.A3)
    a[:, IY, UF4] = fs * np.conj(ctx.A4)
    a[:, IY, VF1] = -fs * ctx.A1
    a[:, IY, VF2] = -fs * ctx.A2
    a[:, IY, VF3] = fs * ctx.A3
    a[:, IY, VF4] = fs * ctx.A4
    return a


def assemble_one(ctx: AssemblyContext, omega: float,
                 isolated: bool = False) -> np.ndarray:
    return assemble_many(ctx, np.array([omega]), isolated=isolated)[0]


def drive_matrix(ctx: AssemblyContext) -> np.ndarray:
    """Right-hand-side columns for the standard drives, shape (15, 8).

    Columns follow DRIVE_NAMES.  Vacuum drives are unit amplitudes at the
    respective pick-off ports; x_end is a unit end-mirror displacement [m];
    f_th a unit force [N].
    """
    b = np.zeros((N_STATE, N_DRIVES), dtype=complex)
    b[U2, DRIVE_INDEX["x_end"]] = -2j * ctx.A_main * ctx.omega_0 / C_LIGHT
    b[UF1, DRIVE_INDEX["a_in_s"]] = ctx.t_f
    b[VF1, DRIVE_INDEX["a_in_i"]] = ctx.t_f
    b[U2, DRIVE_INDEX["loss_main_s"]] = np.sqrt(ctx.eps_0)
    b[V2, DRIVE_INDEX["loss_main_i"]] = np.sqrt(ctx.eps_0)
    b[UF4, DRIVE_INDEX["loss_filter_s"]] = np.sqrt(ctx.eps_f)
    b[VF4, DRIVE_INDEX["loss_filter_i"]] = np.sqrt(ctx.eps_f)
    b[IY, DRIVE_INDEX["f_th"]] = mech_row_scale(ctx)
    return b


def isolated_drive_matrix() -> np.ndarray:
    """RHS for the cut-loop system: unit a_f4 inputs, signal then idler."""
    b = np.zeros((N_STATE, 2), dtype=complex)
    b[UF4, 0] = 1.0
    b[VF4, 1] = 1.0
    return b


def solve_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a batch of linear systems through the active kernel backend."""
    try:
        return _backend.solve_batch(a, b)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"linear system singular: {exc}") from exc


def relative_residual(a: np.ndarray, x: np.ndarray, b: np.ndarray) -> float:
    """Normwise relative backward residual ||Ax-b|| / (||A|| ||x|| + ||b||)."""
    r = a @ x - b
    denom = np.linalg.norm(a) * np.linalg.norm(x) + np.linalg.norm(b)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(r) / denom)


def output_fields(ctx: AssemblyContext, x: np.ndarray,
                  a_in_s: complex = 0.0, a_in_i: complex = 0.0):
    """Readout fields at the open port: a_out = -r_f a_in + t_f a_f2.

    x may be (..., 15); returns (signal, conjugated-idler) arrays.
    """
    out_s = -ctx.r_f * a_in_s + ctx.t_f * x[..., UF2]
    out_v = -ctx.r_f * np.conj(a_in_i) + ctx.t_f * x[..., VF2]
    return out_s, out_v
