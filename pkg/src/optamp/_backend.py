"""Kernel backend selection: compiled extension if available, numpy fallback
otherwise.  Both expose solve_batch and time_domain_run with identical
signatures."""

try:
    from . import _kernels as _impl
except ImportError:  # extension not built
    from . import _kernels_py as _impl

COMPILED = _impl.COMPILED
solve_batch = _impl.solve_batch
time_domain_run = _impl.time_domain_run


def backend_name() -> str:
    return "compiled" if COMPILED else "python"
