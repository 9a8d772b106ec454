import numpy as np
import pytest

from optamp import ExperimentParams, build_model


@pytest.fixture(scope="session")
def table1():
    return ExperimentParams()


@pytest.fixture(scope="session")
def model():
    return build_model()


@pytest.fixture(scope="session")
def closed_lossless_model():
    """Amplifier with every open port closed: T_f -> 0, no losses, no
    mechanical damping.  The isolated amplifier is then exactly symplectic."""
    return build_model(T_f=1e-12, eps_0=0.0, eps_f=0.0, Q_m=1e18)


def passive_response_oracle(dq, omegas):
    """Closed-form two-cavity transfer a_out/x_end with the pump off.

    Independent elimination of the field equations; kept free of the matrix
    solver on purpose.
    """
    om = np.asarray(omegas, dtype=float)
    e_m = np.exp(1j * om * dq.tau / 2.0)
    e_f = np.exp(1j * om * dq.tau_f / 2.0)
    chi = dq.chi
    g0 = (dq.r_f - dq.r_m) / (1.0 - dq.r_f * dq.r_m)
    lf = g0 * chi * e_f * dq.s_f
    uf3_per_u2 = lf * dq.t_0 * e_m / (1.0 + lf * dq.r_0 * chi * e_f)
    u1_per_u2 = dq.r_0 * e_m + dq.t_0 * chi * e_f * uf3_per_u2
    u2_per_d = 1.0 / (1.0 - dq.s_0 * e_m * u1_per_u2)
    uf3 = uf3_per_u2 * u2_per_d
    uf = -dq.r_0 * chi * e_f * uf3 + dq.t_0 * e_m * u2_per_d
    uf4 = chi * e_f * dq.s_f * uf
    uf2 = dq.t_m * uf4 / (1.0 - dq.r_f * dq.r_m)
    drive = -2j * dq.A_main * dq.omega_0 / 299792458.0
    return dq.t_f * uf2 * drive
