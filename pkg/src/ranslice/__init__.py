"""Stochastic-geometry RAN slicing toolkit.

Closed-form potential spectral efficiency of Poisson cellular networks,
a Monte Carlo validator, a Lagrangian-dual slice allocator with admission
control, and a reproducible experiment CLI.
"""

from .model import (
    Allocation,
    NetworkParams,
    SliceRequest,
    cell_load_pmf,
    load_factor,
    pse,
    pse_grad,
    pse_no_slicing,
)
from .specfun import SpecFunConfig, gauss_2f1_slice, ln_gamma, upsilon, upsilon_oracle

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "NetworkParams",
    "SliceRequest",
    "SpecFunConfig",
    "cell_load_pmf",
    "gauss_2f1_slice",
    "ln_gamma",
    "load_factor",
    "pse",
    "pse_grad",
    "pse_no_slicing",
    "upsilon",
    "upsilon_oracle",
    "__version__",
]
