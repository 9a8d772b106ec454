"""Noise budget at the readout, displacement-referred and normalized to the
low-frequency pump-off shot-noise level.

Each open port (input vacuum, main-cavity loss, filter-cavity loss) injects
independent vacuum at both members of the sideband pair; the membrane adds
a thermal force.  Columns are incoherent sums of |transfer|^2 divided by
the signal transfer |a_out/x_end|^2, then scaled so the pump-off reference
tends to one at low frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fields, sidebands, solver
from .constants import HBAR, K_BOLTZMANN, TWO_PI
from .errors import ParameterError
from .model import equivalent_loss_value

_NORM_OMEGA = TWO_PI * 10.0     # low-frequency normalization point [rad/s]

_QUANTUM_COLS = {
    "input_vacuum": ("a_in_s", "a_in_i"),
    "loss_main": ("loss_main_s", "loss_main_i"),
    "loss_filter": ("loss_filter_s", "loss_filter_i"),
}


@dataclass(frozen=True)
class NoiseBudget:
    """Per-source normalized displacement-noise PSDs on a frequency grid."""

    freq_hz: np.ndarray
    input_vacuum: np.ndarray
    loss_main: np.ndarray
    loss_filter: np.ndarray
    thermal: np.ndarray
    total: np.ndarray
    pump_off_reference: np.ndarray
    t_over_q: float

    @property
    def improvement(self) -> np.ndarray:
        """Sensitivity improvement factor pump_off/total per frequency."""
        return self.pump_off_reference / self.total

    @property
    def peak_improvement(self) -> float:
        return float(self.improvement.max())

    @property
    def peak_improvement_freq_hz(self) -> float:
        return float(self.freq_hz[int(self.improvement.argmax())])

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)


def _raw_columns(dq, pump, omegas, t_over_q: float):
    """Displacement-referred raw PSD columns before normalization."""
    sweep = sidebands.transfer_sweep(dq, pump, omegas)
    out = sweep.out_signal
    sig2 = np.abs(out[:, solver.DRIVE_INDEX["x_end"]]) ** 2
    if np.any(sig2 == 0.0):
        raise ParameterError("signal transfer vanished on the grid; "
                             "displacement referral undefined")
    quantum = HBAR * dq.omega_0
    cols = {}
    for name, (ds, di) in _QUANTUM_COLS.items():
        p = (np.abs(out[:, solver.DRIVE_INDEX[ds]]) ** 2
             + np.abs(out[:, solver.DRIVE_INDEX[di]]) ** 2)
        cols[name] = quantum * p / sig2
    s_force = 4.0 * K_BOLTZMANN * dq.M * dq.omega_m * t_over_q
    cols["thermal"] = (s_force
                       * np.abs(out[:, solver.DRIVE_INDEX["f_th"]]) ** 2
                       / sig2)
    return cols


def _pump_off(pump) -> fields.PumpFieldSet:
    return fields.PumpFieldSet(A_f1=0.0, A_f2=0.0, A_f3=0.0, A_f4=0.0,
                               mu=pump.mu, P_sub=0.0, P_in=0.0, residual=0.0)


def total_budget(dq, pump, freq_hz, t_over_q: float) -> NoiseBudget:
    """Assemble the full normalized budget on a frequency grid [Hz]."""
    if t_over_q < 0.0:
        raise ParameterError("T/Q must be nonnegative")
    freq_hz = np.atleast_1d(np.asarray(freq_hz, dtype=float))
    omegas = TWO_PI * freq_hz
    off = _pump_off(pump)

    cols = _raw_columns(dq, pump, omegas, t_over_q)
    cols_off = _raw_columns(dq, off, omegas, t_over_q)
    norm_cols = _raw_columns(dq, off, np.array([_NORM_OMEGA]), t_over_q)
    norm = float(sum(norm_cols[k][0] for k in _QUANTUM_COLS))

    scaled = {k: v / norm for k, v in cols.items()}
    reference = sum(cols_off[k] for k in _QUANTUM_COLS) / norm
    total = sum(scaled.values())
    return NoiseBudget(freq_hz=freq_hz, total=total,
                       pump_off_reference=reference,
                       t_over_q=float(t_over_q), **scaled)


def loss_noise_main(dq, omega=0.0) -> float | np.ndarray:
    """Frequency-flat analytic main-cavity loss noise 4 eps_0 / T_eff.

    Normalized to the pump-off low-frequency shot level; the full-model
    column used in totals comes from total_budget.
    """
    t_eff = fields.effective_transmissivity(dq)
    val = 4.0 * dq.eps_0 / t_eff
    return val * np.ones_like(np.asarray(omega, dtype=float))


def loss_noise_filter(dq, omega=0.0) -> float | np.ndarray:
    """Analytic filter-cavity loss noise 2 (gamma_0^2 + w^2) tau eps_f /
    (T_eff gamma_0); rises as omega^2 above the main-cavity bandwidth."""
    t_eff = fields.effective_transmissivity(dq)
    om = np.asarray(omega, dtype=float)
    return (2.0 * (dq.gamma_0**2 + om**2) * dq.tau * dq.eps_f
            / (t_eff * dq.gamma_0))


def thermal_noise(dq, pump, t_over_q: float, freq_hz) -> np.ndarray:
    """Normalized thermal-noise column alone (full model)."""
    budget = total_budget(dq, pump, freq_hz, t_over_q)
    return budget.thermal


def equivalent_loss(dq, t_over_q: float) -> float:
    """Membrane thermal noise mapped to an equivalent main-cavity loss."""
    return equivalent_loss_value(dq.gamma_0, dq.g, t_over_q)


def dc_comparison(dq, pump, freq_hz: float = 10.0,
                  t_over_q: float = 0.0) -> dict:
    """Analytic vs full-model loss columns at low frequency.

    The ratio is tracked as a regression constant; the analytic forms are
    leading-order and not expected to be exact.
    """
    budget = total_budget(dq, pump, np.array([freq_hz]), t_over_q)
    analytic_main = float(loss_noise_main(dq))
    analytic_filter = float(loss_noise_filter(dq, TWO_PI * freq_hz))
    return {
        "full_main": float(budget.loss_main[0]),
        "analytic_main": analytic_main,
        "ratio_main": float(budget.loss_main[0]) / analytic_main,
        "full_filter": float(budget.loss_filter[0]),
        "analytic_filter": analytic_filter,
        "ratio_filter": float(budget.loss_filter[0]) / analytic_filter,
    }
