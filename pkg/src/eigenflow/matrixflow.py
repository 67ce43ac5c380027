"""Scaled symmetric matrix flows, their spectra and spectral derivatives.

A matrix flow is Y(t) = scaled Gaussian part + deterministic shift A:

    Y_ij(t) = X_ij(t) / sqrt(n) + A_ij          (i < j)
    Y_ii(t) = sqrt(2) X_ii(t) / sqrt(n) + A_ii

built from one Gaussian path per upper-triangle entry.  The spectral flow
holds descending eigenvalues per grid time and, optionally, eigenvector
frames.  ``eigenvalue_derivatives`` produces the first and second
derivatives of a single eigenvalue with respect to the free coordinates
``y_{k,h}`` (k <= h) of the scaled Gaussian part, in which the diagonal
coordinate enters the matrix with weight sqrt(2); these feed the gradient
and curvature identities used throughout the diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from . import eigensolvers, sampling
from .grids import TimeGrid
from .kernels import CovarianceKernel

DEGENERATE_GAP = 1e-8


class DegenerateEigenvalueError(RuntimeError):
    """Requested a derivative at an eigenvalue with a near-zero gap."""

    def __init__(self, index: int, gap: float):
        super().__init__(
            f"eigenvalue {index} has spectral gap {gap:.3e} < {DEGENERATE_GAP}; "
            "derivatives are skipped at degenerate times")
        self.gap = gap


@dataclass(frozen=True)
class MatrixFlowSample:
    """One realisation {Y(t_k)} of the scaled symmetric flow."""

    n: int
    grid: TimeGrid
    shift: np.ndarray          # (n, n) symmetric
    matrices: np.ndarray       # (K+1, n, n) symmetric

    def __post_init__(self):
        if self.matrices.shape != (len(self.grid), self.n, self.n):
            raise ValueError("matrix stack shape does not match grid and dimension")


@dataclass(frozen=True)
class SpectralFlow:
    """Per-time descending eigenvalues and optional eigenvector frames."""

    grid: TimeGrid
    eigenvalues: np.ndarray               # (K+1, n), descending
    eigenvectors: Optional[np.ndarray]    # (K+1, n, n) columns match eigenvalues

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[1]

    def min_gap(self, t_index: int) -> float:
        lam = self.eigenvalues[t_index]
        if lam.size < 2:
            return np.inf
        return float(np.min(np.abs(np.diff(lam))))


def diagonal_scale(n: int) -> Tuple[float, float]:
    """(off-diagonal, diagonal) multipliers of the Gaussian part."""
    return 1.0 / np.sqrt(n), np.sqrt(2.0) / np.sqrt(n)


def assemble_flow(entries: Dict[Tuple[int, int], np.ndarray],
                  shift: np.ndarray, n: int, grid: TimeGrid) -> MatrixFlowSample:
    """Assemble one flow sample from per-entry paths for all i <= j."""
    shift = np.asarray(shift, dtype=float)
    if shift.shape != (n, n):
        raise ValueError(f"shift must be {n}x{n}")
    if not np.allclose(shift, shift.T, atol=0, rtol=0):
        raise ValueError("shift matrix must be symmetric")
    k = len(grid)
    off, diag = diagonal_scale(n)
    y = np.zeros((k, n, n))
    for i in range(n):
        for j in range(i, n):
            try:
                path = np.asarray(entries[(i, j)], dtype=float)
            except KeyError:
                raise ValueError(f"missing entry path for ({i},{j})") from None
            if path.shape != (k,):
                raise ValueError(f"entry ({i},{j}) path length {path.shape} != grid length {k}")
            scale = diag if i == j else off
            y[:, i, j] = scale * path + shift[i, j]
            y[:, j, i] = y[:, i, j]
    return MatrixFlowSample(n=n, grid=grid, shift=shift, matrices=y)


def assemble_from_triangle(values: np.ndarray, shift: np.ndarray, n: int,
                           grid: TimeGrid) -> np.ndarray:
    """Vectorised assembly: ``values`` is (..., n(n+1)/2, K+1) in
    ``triu_indices`` order; returns matrices of shape (..., K+1, n, n)."""
    iu, ju = np.triu_indices(n)
    off, diag = diagonal_scale(n)
    scale = np.where(iu == ju, diag, off)
    lead = values.shape[:-2]
    k = values.shape[-1]
    y = np.zeros(lead + (k, n, n))
    scaled = values * scale[..., :, None]
    y[..., iu, ju] = np.moveaxis(scaled, -1, -2)
    y[..., ju, iu] = np.moveaxis(scaled, -1, -2)
    return y + np.asarray(shift, dtype=float)


def sample_flows(kernel: CovarianceKernel, grid: TimeGrid, n: int,
                 shift: np.ndarray, seed: int, paths: Sequence[int],
                 method: str = "cholesky", chunk: int = 0) -> np.ndarray:
    """Matrix stacks (P, K+1, n, n) for a batch of path indices.

    Pure function of (seed, path index); chunking only bounds memory.
    """
    paths = np.asarray(list(paths), dtype=np.uint64)
    if chunk <= 0:
        # keep the working set of triangle paths around 200 MB
        per_path = (n * (n + 1) // 2) * len(grid) * 8
        chunk = max(1, min(len(paths), int(2e8 / max(per_path, 1))))
    out = np.empty((len(paths), len(grid), n, n))
    for lo in range(0, len(paths), chunk):
        block = paths[lo:lo + chunk]
        tri = sampling.upper_triangle_paths(kernel, grid, n, seed, block, method=method)
        out[lo:lo + len(block)] = assemble_from_triangle(tri, shift, n, grid)
    return out


def eigendecompose(flow: MatrixFlowSample, want_vectors: bool = False,
                   engine: str = "auto") -> SpectralFlow:
    """Spectral decomposition of a flow sample at every grid time."""
    k = len(flow.grid)
    lam = np.empty((k, flow.n))
    vec = np.empty((k, flow.n, flow.n)) if want_vectors else None
    for t in range(k):
        w, v = eigensolvers.eigh(flow.matrices[t], want_vectors=want_vectors, engine=engine)
        lam[t] = w
        if want_vectors:
            vec[t] = v
    return SpectralFlow(grid=flow.grid, eigenvalues=lam, eigenvectors=vec)


def spectra_of_stack(matrices: np.ndarray) -> np.ndarray:
    """Descending eigenvalues of (..., n, n) symmetric stacks via LAPACK."""
    return eigensolvers.eigvalsh_stack(matrices)


# ---------------------------------------------------------------------------
# Eigenvalue perturbation quantities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenvalueDerivatives:
    """First and second derivatives of one eigenvalue in the free
    upper-triangle coordinates (entries with k <= h)."""

    index: int
    grad: np.ndarray        # (n, n), valid on k <= h
    hess_diag: np.ndarray   # (n, n), valid on k <= h

    def grad_square_sum(self) -> float:
        iu = np.triu_indices(self.grad.shape[0])
        return float(np.sum(self.grad[iu] ** 2))

    def hess_sum(self) -> float:
        iu = np.triu_indices(self.hess_diag.shape[0])
        return float(np.sum(self.hess_diag[iu]))


def eigenvalue_derivatives(spec: SpectralFlow, t_index: int, i: int) -> EigenvalueDerivatives:
    """Derivatives of eigenvalue ``i`` at grid time ``t_index``.

    grad_{k,h} = 2 u_k u_h for k < h and sqrt(2) u_k^2 on the diagonal,
    where u is the i-th eigenvector; hess_diag_{k,h} sums the usual
    second-order perturbation quotients over the other eigenvalues.
    Requires eigenvectors and a simple eigenvalue.
    """
    if spec.eigenvectors is None:
        raise ValueError("eigenvalue derivatives require eigenvectors")
    lam = spec.eigenvalues[t_index]
    n = lam.size
    if not (0 <= i < n):
        raise IndexError(f"eigenvalue index {i} out of range")
    gaps = lam[i] - np.delete(lam, i)
    if n > 1:
        min_gap = float(np.min(np.abs(gaps)))
        if min_gap < DEGENERATE_GAP:
            raise DegenerateEigenvalueError(i, min_gap)

    U = spec.eigenvectors[t_index]
    u = U[:, i]

    grad = 2.0 * np.outer(u, u)
    np.fill_diagonal(grad, np.sqrt(2.0) * u ** 2)

    others = np.delete(np.arange(n), i)
    V = U[:, others]                        # (n, n-1)
    inv_gap = 1.0 / (lam[i] - lam[others])  # (n-1,)

    # cross_{k,h,j} = u_k V_{h,j} + u_h V_{k,j}
    cross = u[:, None, None] * V[None, :, :] + u[None, :, None] * V[:, None, :]
    hess = 2.0 * np.einsum("khj,j->kh", cross ** 2, inv_gap)
    diag_terms = 4.0 * np.einsum("kj,j->k", (u[:, None] * V) ** 2, inv_gap)
    np.fill_diagonal(hess, diag_terms)

    return EigenvalueDerivatives(index=i, grad=grad, hess_diag=hess)


# ---------------------------------------------------------------------------
# Shift matrices
# ---------------------------------------------------------------------------

def make_shift(spec: str, n: int) -> np.ndarray:
    """Build the deterministic shift from its configuration string.

    ``zero``, ``diag:<comma separated diagonal>`` or ``file:<csv path>``.
    """
    if spec == "zero":
        return np.zeros((n, n))
    if spec.startswith("diag:"):
        vals = np.array([float(x) for x in spec[len("diag:"):].split(",")])
        if vals.size != n:
            raise ValueError(f"diagonal shift has {vals.size} entries, expected {n}")
        return np.diag(vals)
    if spec.startswith("file:"):
        a = np.loadtxt(spec[len("file:"):], delimiter=",")
        a = np.atleast_2d(a)
        if a.shape != (n, n):
            raise ValueError(f"shift file has shape {a.shape}, expected ({n},{n})")
        if np.max(np.abs(a - a.T)) > 1e-12 * max(1.0, float(np.max(np.abs(a)))):
            raise ValueError("shift file must hold a symmetric matrix")
        return 0.5 * (a + a.T)
    raise ValueError(f"unknown shift spec {spec!r}")


def hoffman_wielandt_holds(y1: np.ndarray, y2: np.ndarray,
                           lam1: np.ndarray, lam2: np.ndarray,
                           slack: float = 1e-9) -> bool:
    """Sum of squared sorted-eigenvalue differences is bounded by the
    squared Frobenius distance of the matrices."""
    lhs = float(np.sum((np.sort(lam1) - np.sort(lam2)) ** 2))
    rhs = float(np.sum((y1 - y2) ** 2))
    return lhs <= rhs * (1.0 + slack) + slack
