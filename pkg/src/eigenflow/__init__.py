"""Spectral-measure flows of Gaussian matrix-valued processes.

Simulates symmetric matrix processes with i.i.d. Gaussian entry paths of a
configurable covariance kernel, tracks eigenvalue flows and empirical
spectral measures, and verifies numerically that the measure flow follows
its deterministic limit (a time-rescaled Burgers' evolution of the Cauchy
transform; the semicircle family when started from a point mass).
"""

__version__ = "0.1.0"

from .grids import TimeGrid
from .kernels import (BrownianKernel, CovarianceKernel, FractionalBrownianKernel,
                      TableKernel, check_h1, check_h2, diag_variance_derivative,
                      eval_kernel, make_kernel)
from .limitlaw import (AtomicMeasure, BurgersEvolved, LimitLaw, Semicircle,
                       burgers_solve, density_and_cdf, law_at_time, limit_at_time,
                       moment_from_stieltjes, semicircle_stieltjes)
from .matrixflow import (MatrixFlowSample, SpectralFlow, assemble_flow,
                         eigendecompose, eigenvalue_derivatives, make_shift,
                         sample_flows)
from .measures import (EmpiricalMeasure, cauchy_transform, divided_difference_form,
                       integrate, kolmogorov_distance, wasserstein1_distance)
from .sampling import (EntryPath, PathFactor, circulant_fbm_sampler, factor_grid,
                       sample_entry_path)
from .testfunctions import (GaussianBump, Resolvent, SmoothBump, TestFunction,
                            TruncatedPolynomial)

__all__ = [
    "TimeGrid",
    "CovarianceKernel", "BrownianKernel", "FractionalBrownianKernel", "TableKernel",
    "eval_kernel", "diag_variance_derivative", "check_h1", "check_h2", "make_kernel",
    "AtomicMeasure", "LimitLaw", "Semicircle", "BurgersEvolved",
    "semicircle_stieltjes", "burgers_solve", "limit_at_time", "law_at_time",
    "density_and_cdf", "moment_from_stieltjes",
    "MatrixFlowSample", "SpectralFlow", "assemble_flow", "eigendecompose",
    "eigenvalue_derivatives", "make_shift", "sample_flows",
    "EmpiricalMeasure", "integrate", "cauchy_transform", "divided_difference_form",
    "kolmogorov_distance", "wasserstein1_distance",
    "PathFactor", "EntryPath", "factor_grid", "sample_entry_path", "circulant_fbm_sampler",
    "TestFunction", "Resolvent", "GaussianBump", "SmoothBump", "TruncatedPolynomial",
]
