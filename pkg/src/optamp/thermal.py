"""Membrane self-heating: thermal resistance against in-plane conduction
and the temperature fixed point T = R(T) * P_a.

The conduction model is lumped: no explicit bath sink term, so the
temperature is set entirely by absorbed power against conduction, which
reproduces the design's quoted operating floor.  An optional additive base
temperature is available but off by default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConvergenceError, ParameterError

# linearized thermal conductivity alpha(T) = A0 + A1*(T - T_REF) [W/(m K)]
ALPHA_0 = 0.23
ALPHA_SLOPE = 0.032
T_REF = 10.0
# validity window of the linearization [K]
T_VALID_LOW = 3.0
T_VALID_HIGH = 30.0
_T_BRACKET = (0.1, 400.0)


@dataclass(frozen=True)
class ThermalState:
    T_membrane: float     # K
    R: float              # thermal resistance at T_membrane [K/W]
    P_a: float            # absorbed power [W]
    iterations: int
    residual: float       # |T - R(T) P_a| [K]


def conductivity(T: float) -> float:
    """Linearized thermal conductivity, clamped to its validity window."""
    if not (T_VALID_LOW <= T <= T_VALID_HIGH):
        raise ParameterError(
            f"conductivity model out of validity range at T={T:.3g} K "
            f"(valid {T_VALID_LOW}..{T_VALID_HIGH} K)")
    alpha = ALPHA_0 + ALPHA_SLOPE * (T - T_REF)
    if alpha <= 0.0:
        raise ParameterError(
            f"conductivity model out of validity range: alpha({T:.3g} K) <= 0")
    return alpha


def thermal_resistance(params, T: float) -> float:
    """Spreading resistance of a beam-heated membrane, K/W."""
    if T <= 0.0:
        raise ParameterError("temperature must be positive")
    return params.Rw_ratio / (2.0 * math.pi * params.h * conductivity(T))


def absorbed_power(params) -> float:
    """Optical power absorbed by the membrane at the field node."""
    return params.A_abs * params.B_node * params.P_f


def solve_temperature(params, base_temperature: float = 0.0,
                      tol: float = 1e-6) -> ThermalState:
    """Fixed point of T = base + R(T) * P_a by bracketed bisection.

    With zero absorbed power the temperature collapses to the model floor
    (the base temperature).
    """
    p_a = absorbed_power(params)
    if p_a == 0.0:
        r0 = thermal_resistance(params, T_REF)
        return ThermalState(T_membrane=base_temperature, R=r0, P_a=0.0,
                            iterations=0, residual=0.0)

    def f(T: float) -> float:
        return T - base_temperature - thermal_resistance(params, T) * p_a

    lo = max(_T_BRACKET[0], T_VALID_LOW)
    hi = min(_T_BRACKET[1], T_VALID_HIGH)
    flo, fhi = f(lo), f(hi)
    if flo > 0.0 and fhi > 0.0 or flo < 0.0 and fhi < 0.0:
        raise ConvergenceError(
            "thermal runaway or invalid model: no fixed point in "
            f"({lo:.3g} K, {hi:.3g} K)")
    iterations = 0
    while hi - lo > tol * 0.5:
        iterations += 1
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            hi = mid
        else:
            lo = mid
        if iterations > 200:
            raise ConvergenceError("thermal bisection failed to converge")
    T = 0.5 * (lo + hi)
    r = thermal_resistance(params, T)
    return ThermalState(T_membrane=T, R=r, P_a=p_a, iterations=iterations,
                        residual=abs(T - base_temperature - r * p_a))
