"""Experiment parameter set, validation, and mirror amplitude coefficients.

All frequencies are stored internally as angular frequencies (rad/s).
External interfaces (config files, CLI) use Hz and are converted once at
the boundary, in optamp.cli.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from .constants import C_LIGHT, TWO_PI
from .errors import ParameterError

# Fields that a JSON config file expresses in Hz (internal storage is rad/s).
FREQUENCY_FIELDS_HZ = ("gamma_f", "omega_m", "omega_p")


@dataclass(frozen=True)
class ExperimentParams:
    """Full tabletop parameter set.

    Defaults are the nominal design values of the experiment; override any
    subset via keyword arguments, a config file, or CLI flags.
    """

    L_0: float = 4.1            # main cavity length [m]
    T_0: float = 30e-6          # main input coupler power transmissivity
    eps_0: float = 10e-6        # main cavity round-trip power loss
    L_f: float = 2.0            # filter cavity length [m]
    gamma_f: float = TWO_PI * 30e3   # filter cavity bandwidth [rad/s], stored
    T_f: float = 0.5e-2         # filter input coupler power transmissivity
    eps_f: float = 2000e-6      # filter cavity round-trip power loss
    omega_m: float = TWO_PI * 300e3  # membrane eigenmode [rad/s]
    M: float = 40e-12           # motional mass [kg]
    h: float = 50e-9            # membrane thickness [m]
    T_m: float = 0.8            # membrane power transmissivity
    T_bath: float = 10.0        # membrane environment temperature [K]
    Q_m: float = 1e9            # mechanical quality factor
    P_in: float = 70e-3         # input pump power [W]
    P_f: float = 3.4            # pump power in the membrane sub-cavity [W]
    omega_p: float = TWO_PI * 303e3  # pump offset from the carrier [rad/s]
    lambda_0: float = 1064e-9   # carrier wavelength [m]
    A_abs: float = 10e-6        # membrane power absorption
    B_node: float = 6e-3        # membrane-power / peak-filter-power ratio
    Rw_ratio: float = 2.5       # membrane radius over beam size
    P_carrier_in: float = 1e-3  # input probe carrier power [W]

    # Operating-mode switches (implementation-required additions).
    g_mode: str = "ratio"       # 'ratio': g prescribed, pump power back-solved
                                # 'power': pump power taken from P_f as given
    g_ratio: float = 0.97       # target g / omega_c in 'ratio' mode
    pump_tuning: str = "auto"   # 'auto': omega_p = omega_m + optical spring
                                # 'fixed': omega_p used as given

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def with_overrides(self, **kwargs) -> "ExperimentParams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class ValidatedParams:
    """Range-checked parameters plus non-fatal consistency warnings."""

    params: ExperimentParams
    warnings: tuple = ()

    def __getattr__(self, name):
        return getattr(self.params, name)


_UNIT_INTERVAL = ("T_0", "eps_0", "T_f", "eps_f", "T_m", "A_abs", "B_node")
_STRICTLY_POSITIVE = ("L_0", "L_f", "gamma_f", "omega_m", "M", "h", "Q_m",
                      "lambda_0", "Rw_ratio")
_NONNEGATIVE = ("T_bath", "P_in", "P_f", "omega_p", "P_carrier_in")


def validate(params: ExperimentParams) -> ValidatedParams:
    """Range-check a parameter set.

    Raises ParameterError naming the offending field on nonphysical input.
    Internally inconsistent but physical pairs (stored gamma_f differing
    from T_f/(2 tau_f) by more than 20%) produce a warning, not a failure.
    """
    for name in _UNIT_INTERVAL:
        x = getattr(params, name)
        if not (0.0 <= x <= 1.0) or not math.isfinite(x):
            raise ParameterError(f"{name}={x!r}: transmissivity/loss out of [0, 1]")
    for name in _STRICTLY_POSITIVE:
        x = getattr(params, name)
        if not (x > 0.0) or not math.isfinite(x):
            raise ParameterError(f"{name}={x!r}: must be positive")
    for name in _NONNEGATIVE:
        x = getattr(params, name)
        if x < 0.0 or not math.isfinite(x):
            raise ParameterError(f"{name}={x!r}: must be nonnegative")
    if params.g_mode not in ("ratio", "power"):
        raise ParameterError(f"g_mode={params.g_mode!r}: expected 'ratio' or 'power'")
    if params.pump_tuning not in ("auto", "fixed"):
        raise ParameterError(
            f"pump_tuning={params.pump_tuning!r}: expected 'auto' or 'fixed'")
    if params.g_mode == "ratio" and params.g_ratio <= 0.0:
        raise ParameterError(f"g_ratio={params.g_ratio!r}: must be positive")

    warnings = []
    tau_f = 2.0 * params.L_f / C_LIGHT
    gamma_f_from_tf = params.T_f / (2.0 * tau_f)
    if params.gamma_f > 0 and abs(gamma_f_from_tf / params.gamma_f - 1.0) > 0.20:
        warnings.append(
            "gamma_f inconsistent with T_f: stored "
            f"{params.gamma_f:.4g} rad/s vs T_f/(2 tau_f) = "
            f"{gamma_f_from_tf:.4g} rad/s")
    return ValidatedParams(params=params, warnings=tuple(warnings))


def amplitude_coeffs(T: float) -> tuple:
    """Amplitude (r, t) for a power transmissivity T.

    Real nonnegative convention: t = sqrt(T), r = sqrt(1 - T).  Sign
    conventions (which side of a component reflects with a minus) are
    applied where the component couplings are written, not here.
    """
    if not (0.0 <= T <= 1.0):
        raise ParameterError(f"power transmissivity {T!r} out of [0, 1]")
    return math.sqrt(1.0 - T), math.sqrt(T)
