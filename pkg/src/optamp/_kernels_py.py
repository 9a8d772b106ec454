"""Pure-numpy fallback kernels.

Same signatures as the compiled module optamp._kernels; selected by
optamp._backend when the extension is unavailable.  The batched solver
delegates to LAPACK through numpy; the time-domain loop is a plain Python
loop and is substantially slower than the compiled version (see
benchmarks/bench_kernels.py).
"""

from __future__ import annotations

import cmath

import numpy as np

COMPILED = False


def solve_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a[i] @ x[i] = b (or b[i]) for a batch of square systems."""
    return np.linalg.solve(a, b)


def time_domain_run(n0: int, nf: int, dt: float,
                    r0: float, t0: float, rf: float, tf: float,
                    rm: float, tm: float, s0: float, sf: float,
                    chi: complex,
                    a1: complex, a2: complex, a3: complex, a4: complex,
                    kp: float, mass: float, om_m: float, gam: float,
                    omega_p: float, scatter_sign: float, force_sign: float,
                    y0: float, vy0: float,
                    n_steps: int, record_every: int) -> np.ndarray:
    """Delay-line time-domain iteration of the full loop.

    Propagation legs are ring buffers of n0 (main, one-way) and nf (filter,
    one-way) samples of length dt each.  Returns the membrane energy
    0.5*M*(vy^2 + om_m^2 y^2) sampled every record_every steps.
    """
    inv_c = 1.0 / 299792458.0
    line_a1 = [0.0 + 0.0j] * n0   # central mirror -> end mirror
    line_a2 = [0.0 + 0.0j] * n0   # end mirror -> central mirror
    line_af = [0.0 + 0.0j] * nf   # central mirror -> membrane
    line_f3 = [0.0 + 0.0j] * nf   # membrane -> central mirror

    y = y0
    vy = vy0
    denom = 1.0 - rm * rf
    cup = scatter_sign * 2j * kp * rm
    phase = 1.0 + 0.0j
    dphase = cmath.exp(-1j * omega_p * dt)
    a1c, a2c, a3c, a4c = (complex(a1), complex(a2), complex(a3), complex(a4))

    n_rec = n_steps // record_every + 1
    energies = np.empty(n_rec, dtype=float)
    i0 = 0
    i_f = 0
    n_out = 0
    for k in range(n_steps):
        if k % record_every == 0:
            energies[n_out] = 0.5 * mass * (vy * vy + (om_m * y) ** 2)
            n_out += 1

        a1_arr = line_a1[i0]
        a2_arr = line_a2[i0]
        af_arr = line_af[i_f]
        f3_arr = line_f3[i_f]

        # end mirror (round-trip loss lumped on the inbound leg)
        a2_new = s0 * a1_arr
        # central mirror
        f3c = chi * f3_arr
        a1_new = r0 * a2_arr + t0 * f3c
        af_new = -r0 * f3c + t0 * a2_arr
        # membrane-side sub-cavity (instantaneous)
        af4 = chi * sf * af_arr
        pscat = cup * phase * y
        uf2 = (tm * af4 + pscat * a1c) / denom
        uf1 = rf * uf2
        f3_new = tm * uf1 - rm * af4 + pscat * a4c

        beat = (a1c * uf1.conjugate() + a2c * uf2.conjugate()
                - a3c * f3_new.conjugate() - a4c * af4.conjugate())
        force = force_sign * 2.0 * inv_c * (phase * beat).real

        vy += dt * (force / mass - gam * vy - om_m * om_m * y)
        y += dt * vy

        line_a1[i0] = a1_new
        line_a2[i0] = a2_new
        line_af[i_f] = af_new
        line_f3[i_f] = f3_new
        i0 += 1
        if i0 == n0:
            i0 = 0
        i_f += 1
        if i_f == nf:
            i_f = 0
        phase *= dphase
        if k % 4096 == 4095:
            phase /= abs(phase)

    return energies[:n_out]
