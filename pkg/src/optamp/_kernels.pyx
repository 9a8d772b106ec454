# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: batched complex linear solve and the time-domain
delay-line loop.  Signature-compatible with optamp._kernels_py."""

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport free, malloc
from scipy.linalg.cython_lapack cimport zgesv

cnp.import_array()

COMPILED = True


def solve_batch(a, b):
    """Solve a[i] @ x[i] = b (or b[i]) for a batch of square systems."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] aa
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] xx
    a = np.ascontiguousarray(a, dtype=np.complex128)
    squeeze_batch = False
    if a.ndim == 2:
        a = a[None, :, :]
        squeeze_batch = True
    n_batch = a.shape[0]
    n = a.shape[1]
    b = np.asarray(b, dtype=np.complex128)
    squeeze_rhs = False
    if b.ndim == 1:
        b = b[:, None]
        squeeze_rhs = True
    if b.ndim == 2:
        b = np.broadcast_to(b[None, :, :], (n_batch, b.shape[0], b.shape[1]))
    b = np.ascontiguousarray(b)
    if b.shape[1] != n:
        raise ValueError("rhs rows do not match matrix dimension")
    nrhs = b.shape[2]

    aa = a
    xx = b.copy()

    cdef int info = 0, cn = n, cnrhs = nrhs, i
    cdef int first_fail = -1
    # LAPACK is column-major: pass A^T and X^T; A^T x^T = ... use the
    # identity (A x = b) <=> solving with the transposed layout of the
    # row-major arrays after an explicit transpose copy per system.
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] at
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] xt
    cdef int* ipiv = <int*> malloc(n * sizeof(int))
    if ipiv == NULL:
        raise MemoryError()
    try:
        for i in range(n_batch):
            at = np.asfortranarray(aa[i])
            xt = np.asfortranarray(xx[i])
            zgesv(&cn, &cnrhs, &at[0, 0], &cn, ipiv, &xt[0, 0], &cn, &info)
            if info != 0 and first_fail < 0:
                first_fail = i
            xx[i] = xt
    finally:
        free(ipiv)
    if first_fail >= 0:
        raise np.linalg.LinAlgError(
            f"zgesv failed on batch element {first_fail}")
    out = np.asarray(xx)
    if squeeze_rhs:
        out = out[:, :, 0]
    if squeeze_batch:
        out = out[0]
    return out


def time_domain_run(int n0, int nf, double dt,
                    double r0, double t0, double rf, double tf,
                    double rm, double tm, double s0, double sf,
                    double complex chi,
                    double complex a1, double complex a2,
                    double complex a3, double complex a4,
                    double kp, double mass, double om_m, double gam,
                    double omega_p, double scatter_sign, double force_sign,
                    double y0, double vy0,
                    long n_steps, long record_every):
    """Delay-line time-domain iteration of the full loop.

    Mirrors optamp._kernels_py.time_domain_run; returns membrane energy
    samples taken every record_every steps.
    """
    cdef double complex* line_a1 = <double complex*> malloc(n0 * sizeof(double complex))
    cdef double complex* line_a2 = <double complex*> malloc(n0 * sizeof(double complex))
    cdef double complex* line_af = <double complex*> malloc(nf * sizeof(double complex))
    cdef double complex* line_f3 = <double complex*> malloc(nf * sizeof(double complex))
    if line_a1 == NULL or line_a2 == NULL or line_af == NULL or line_f3 == NULL:
        free(line_a1); free(line_a2); free(line_af); free(line_f3)
        raise MemoryError()

    cdef long n_rec = n_steps // record_every + 1
    energies_arr = np.empty(n_rec, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] energies = energies_arr

    cdef double inv_c = 1.0 / 299792458.0
    cdef double y = y0, vy = vy0
    cdef double denom = 1.0 - rm * rf
    cdef double complex cup = scatter_sign * 2j * kp * rm
    cdef double complex phase = 1.0
    cdef double complex dphase
    cdef double complex a1_arr, a2_arr, af_arr, f3_arr
    cdef double complex a1_new, a2_new, af_new, f3c, af4, pscat, uf1, uf2, f3_new
    cdef double complex beat, zf
    cdef double force, pm
    cdef long k, n_out = 0
    cdef int i0 = 0, i_f = 0, i

    dphase = np.exp(-1j * omega_p * dt)
    for i in range(n0):
        line_a1[i] = 0.0
        line_a2[i] = 0.0
    for i in range(nf):
        line_af[i] = 0.0
        line_f3[i] = 0.0

    with nogil:
        for k in range(n_steps):
            if k % record_every == 0:
                energies[n_out] = 0.5 * mass * (vy * vy + om_m * om_m * y * y)
                n_out += 1

            a1_arr = line_a1[i0]
            a2_arr = line_a2[i0]
            af_arr = line_af[i_f]
            f3_arr = line_f3[i_f]

            a2_new = s0 * a1_arr
            f3c = chi * f3_arr
            a1_new = r0 * a2_arr + t0 * f3c
            af_new = -r0 * f3c + t0 * a2_arr
            af4 = chi * sf * af_arr
            pscat = cup * phase * y
            uf2 = (tm * af4 + pscat * a1) / denom
            uf1 = rf * uf2
            f3_new = tm * uf1 - rm * af4 + pscat * a4

            beat = (a1 * uf1.conjugate() + a2 * uf2.conjugate()
                    - a3 * f3_new.conjugate() - a4 * af4.conjugate())
            zf = phase * beat
            force = force_sign * 2.0 * inv_c * zf.real

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
            phase = phase * dphase
            if k % 4096 == 4095:
                pm = abs(phase)
                phase = phase / pm

    free(line_a1)
    free(line_a2)
    free(line_af)
    free(line_f3)
    return energies_arr[:n_out]
