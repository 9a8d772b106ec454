"""Static field distributions: pump buildup around the membrane, carrier
buildup in both cavities, and the compound-mirror effective transmissivity.

Static solves are closed-form/matrix inversions of the steady-state
equations; tests cross-check them against an independent fixed-point
iteration of the propagation loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import solver
from .errors import SolverError

_SINGULAR_COND = 1e12


@dataclass(frozen=True)
class PumpFieldSet:
    """Steady pump amplitudes at the membrane; |A|^2 is power in W."""

    A_f1: complex
    A_f2: complex
    A_f3: complex
    A_f4: complex
    mu: complex          # realized loop factor A_f4 / A_f3
    P_sub: float         # |A_f1|^2, pump power in the membrane sub-cavity
    P_in: float          # input pump power that produced this set
    residual: float

    def scaled(self, factor: float) -> "PumpFieldSet":
        s = math.sqrt(factor)
        return PumpFieldSet(
            A_f1=self.A_f1 * s, A_f2=self.A_f2 * s, A_f3=self.A_f3 * s,
            A_f4=self.A_f4 * s, mu=self.mu, P_sub=self.P_sub * factor,
            P_in=self.P_in * factor, residual=self.residual)


@dataclass(frozen=True)
class CarrierFieldSet:
    """Static probe carrier distribution and derived normalization."""

    A_main: complex      # carrier amplitude at the main-cavity end mirror
    P_main: float        # circulating carrier power, main cavity [W]
    P_filter: float      # carrier power in the filter (membrane) sub-cavity [W]
    T_eff: float         # compound-mirror effective power transmissivity
    residual: float


def _static_solve(ctx, omega: float, drive: str, amplitude: complex):
    """Solve the passive (pump-decoupled) system at one sideband frequency."""
    a1234 = (ctx.A1, ctx.A2, ctx.A3, ctx.A4)
    ctx.A1 = ctx.A2 = ctx.A3 = ctx.A4 = 0.0
    try:
        a = solver.assemble_one(ctx, omega)
    finally:
        ctx.A1, ctx.A2, ctx.A3, ctx.A4 = a1234
    b = np.zeros(solver.N_STATE, dtype=complex)
    if drive == "a_in":
        b[solver.UF1] = ctx.t_f * amplitude
    else:
        raise ValueError(f"unknown static drive {drive!r}")
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > _SINGULAR_COND:
        raise SolverError(
            "pump field singular; check pump offset detuning "
            f"(condition number {cond:.3g})")
    x = solver.solve_batch(a, b)
    res = solver.relative_residual(a, x, b)
    return x, res


def solve_pump_fields(dq, P_in: float) -> PumpFieldSet:
    """Pump amplitudes at the membrane for input pump power P_in.

    The pump is a static field at the operating offset frequency; the four
    amplitudes satisfy the sub-cavity relations exactly and the closed-loop
    propagation through the central mirror and main cavity.
    """
    ctx = solver.build_context(dq)
    amp_in = math.sqrt(max(P_in, 0.0))
    x, res = _static_solve(ctx, dq.omega_p_op, "a_in", amp_in)
    f1, f2, f3, f4 = (x[solver.UF1], x[solver.UF2], x[solver.UF3],
                      x[solver.UF4])
    mu = f4 / f3 if f3 != 0 else complex(
        dq.r_0 * dq.s_f) * np.exp(1j * dq.omega_p_op * dq.tau_f)
    return PumpFieldSet(A_f1=complex(f1), A_f2=complex(f2), A_f3=complex(f3),
                        A_f4=complex(f4), mu=complex(mu),
                        P_sub=float(abs(f1) ** 2), P_in=float(P_in),
                        residual=res)


def solve_carrier_fields(dq, P_carrier_in: float) -> CarrierFieldSet:
    """Static probe carrier solve: circulating powers and T_eff.

    The carrier is resonant in the main cavity and anti-resonant across the
    filter cavity (chi = exp(i*pi/2) per pass by default).
    """
    ctx = solver.build_context(dq)
    amp_in = math.sqrt(max(P_carrier_in, 0.0))
    x, res = _static_solve(ctx, 0.0, "a_in", amp_in)
    if not np.all(np.isfinite(x)):
        raise SolverError("carrier solve failed: non-finite amplitudes")
    a_main = complex(x[solver.U2])
    p_main = float(abs(a_main) ** 2)
    p_filter = float(abs(x[solver.UF1]) ** 2)
    return CarrierFieldSet(A_main=a_main, P_main=p_main, P_filter=p_filter,
                           T_eff=effective_transmissivity(dq), residual=res)


def effective_transmissivity(dq) -> float:
    """Power transmissivity of the compound mirror at DC.

    The compound mirror is the chain central mirror + filter space +
    membrane + filter input mirror, evaluated for a carrier-frequency field
    incident from inside the main cavity.
    """
    g0 = (dq.r_f - dq.r_m) / (1.0 - dq.r_f * dq.r_m)
    loop = 1.0 - dq.r_0 * dq.s_f * g0 * (-dq.chi**2)
    t_chain = (dq.t_0 * dq.chi * dq.s_f * dq.t_f * dq.t_m
               / ((1.0 - dq.r_f * dq.r_m) * loop))
    return float(abs(t_chain) ** 2)


def static_power_balance(dq, P_in: float, omega: float = 0.0) -> dict:
    """Incident vs (reflected + loss pick-off) powers for a static solve.

    Returns absolute powers in W; conservation holds to numerical precision
    because the end mirror is perfect and the membrane lossless.
    """
    ctx = solver.build_context(dq)
    amp_in = math.sqrt(max(P_in, 0.0))
    x, _ = _static_solve(ctx, omega, "a_in", amp_in)
    out_s, _ = solver.output_fields(ctx, x, a_in_s=amp_in)
    p_refl = float(abs(out_s) ** 2)
    p_loss_main = float(dq.eps_0 * abs(x[solver.U1]) ** 2)
    p_loss_filter = float(dq.eps_f * abs(x[solver.UF]) ** 2)
    return {
        "incident": float(P_in),
        "reflected": p_refl,
        "loss_main": p_loss_main,
        "loss_filter": p_loss_filter,
        "balance": float(P_in - p_refl - p_loss_main - p_loss_filter),
    }
