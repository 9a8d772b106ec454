"""Physical constants (SI)."""

from scipy.constants import c as C_LIGHT
from scipy.constants import hbar as HBAR
from scipy.constants import k as K_BOLTZMANN

TWO_PI = 6.283185307179586

__all__ = ["C_LIGHT", "HBAR", "K_BOLTZMANN", "TWO_PI"]
