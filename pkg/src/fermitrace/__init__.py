"""Spectral mean-field dynamics of lattice fermions with exact-oracle checks.

Modules
-------
grid         periodic grids, unitary DFT, Fourier multipliers
operators    quadrature-weighted kernels, norms, spectral helpers
states       one-particle density matrices and reference state builders
hartree      Strang split-step mean-field flows (plain, exchange, relativistic)
manybody     exact few-fermion evolution, reduced density matrices, dilation check
fock         Jordan-Wigner Fock space, particle-hole maps, fluctuation tracking
diagnostics  localization operators and trace-norm structure functionals
harness      sweep configs, study runners, deterministic report emission
"""

__version__ = "0.1.0"

from . import (diagnostics, fock, grid, harness, hartree, manybody, operators,
               states)
from .grid import Grid
from .operators import OperatorKernel
from .states import OnePDM

__all__ = ["Grid", "OnePDM", "OperatorKernel", "__version__", "diagnostics",
           "fock", "grid", "harness", "hartree", "manybody", "operators",
           "states"]
