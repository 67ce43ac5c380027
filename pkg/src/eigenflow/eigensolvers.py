"""Symmetric eigensolvers.

Three interchangeable engines behind one contract (descending eigenvalues,
orthonormal eigenvector columns, deterministic sign convention):

* ``jacobi``  - cyclic Jacobi rotations, the default for n <= 32;
* ``ql``      - Householder tridiagonalisation followed by implicit-shift
                QL, the default above n = 32;
* ``lapack``  - ``numpy.linalg.eigh``, used by the ensemble drivers where
                throughput matters.

The two hand-rolled engines exist so every production decomposition can be
cross-checked against an independent implementation; all three must pass
the same oracle suite.  Non-convergence is a hard error carrying the
offending matrix for reproduction.
"""

from __future__ import annotations

import math

import numpy as np

JACOBI_MAX_SWEEPS = 30
QL_MAX_ITERS_PER_N = 50


class EigenConvergenceError(RuntimeError):
    """Iteration cap exceeded; ``.matrix`` holds the offending input."""

    def __init__(self, message: str, matrix: np.ndarray):
        super().__init__(message + f"; offending matrix:\n{np.array2string(matrix, precision=17)}")
        self.matrix = matrix


def _check_symmetric(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.array_equal(a, a.T):
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(np.abs(a - a.T)) > 1e-12 * scale:
            raise ValueError("matrix is not symmetric")
    return a


def fix_eigenvector_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the first nonzero component of each column positive."""
    v = vectors
    n = v.shape[0]
    tiny = 1e-12
    first = np.argmax(np.abs(v) > tiny * np.max(np.abs(v), axis=0, keepdims=True), axis=0)
    signs = np.sign(v[first, np.arange(n)])
    signs[signs == 0] = 1.0
    return v * signs[None, :]


def _sorted_descending(values: np.ndarray, vectors: np.ndarray | None):
    order = np.argsort(-values, kind="stable")
    values = values[order]
    if vectors is None:
        return values, None
    return values, fix_eigenvector_signs(vectors[:, order])


# ---------------------------------------------------------------------------
# Cyclic Jacobi
# ---------------------------------------------------------------------------

def _offdiag_idx(n: int):
    return np.triu_indices(n, k=1)


def eigh_jacobi(a: np.ndarray, want_vectors: bool = True,
                max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi diagonalisation of a symmetric matrix."""
    a0 = _check_symmetric(a)
    A = a0.copy()
    n = A.shape[0]
    V = np.eye(n) if want_vectors else None
    if n == 1:
        return _sorted_descending(np.diag(A).copy(), V)

    for sweep in range(max_sweeps):
        off_sum = float(np.sum(np.abs(A[_offdiag_idx(n)])))
        if off_sum == 0.0:
            return _sorted_descending(np.diag(A).copy(), V)
        # gentle threshold for the first sweeps, then rotate on anything
        # that the small-element rule below does not zero outright
        thresh = 0.2 * off_sum / (n * n) if sweep < 3 else 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                probe = 100.0 * abs(apq)
                if sweep >= 3 and abs(A[p, p]) + probe == abs(A[p, p]) \
                        and abs(A[q, q]) + probe == abs(A[q, q]):
                    A[p, q] = 0.0
                    A[q, p] = 0.0
                    continue
                if abs(apq) <= thresh:
                    continue
                diff = A[q, q] - A[p, p]
                if abs(diff) + probe == abs(diff):
                    t = apq / diff  # |theta| huge: t = 1/(2 theta)
                else:
                    theta = 0.5 * diff / apq
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # rotate rows/cols p and q
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                A[p, q] = 0.0
                A[q, p] = 0.0
                if V is not None:
                    vp = V[:, p].copy()
                    V[:, p] = c * vp - s * V[:, q]
                    V[:, q] = s * vp + c * V[:, q]
    off_sum = float(np.sum(np.abs(A[_offdiag_idx(n)])))
    if off_sum == 0.0:
        return _sorted_descending(np.diag(A).copy(), V)
    raise EigenConvergenceError(
        f"cyclic Jacobi did not converge in {max_sweeps} sweeps (n={n})", a0)


# ---------------------------------------------------------------------------
# Householder tridiagonalisation + implicit-shift QL
# ---------------------------------------------------------------------------

def householder_tridiagonal(a: np.ndarray, want_vectors: bool = True):
    """Reduce a symmetric matrix to tridiagonal form by Householder
    reflections.  Returns (diagonal, subdiagonal, Q) with Q.T @ A @ Q
    tridiagonal (Q is None when vectors are not requested)."""
    A = _check_symmetric(a).copy()
    n = A.shape[0]
    Q = np.eye(n) if want_vectors else None
    for k in range(n - 2):
        x = A[k + 1:, k]
        normx = np.linalg.norm(x)
        if normx == 0.0:
            continue
        alpha = -math.copysign(normx, x[0] if x[0] != 0 else 1.0)
        v = x.copy()
        v[0] -= alpha
        vnorm = np.linalg.norm(v)
        if vnorm < 1e-300:
            continue
        v /= vnorm
        sub = A[k + 1:, k + 1:]
        w = sub @ v
        u = w - v * (v @ w)
        sub -= 2.0 * np.outer(v, u)
        sub -= 2.0 * np.outer(u, v)
        A[k + 1, k] = alpha
        A[k, k + 1] = alpha
        A[k + 2:, k] = 0.0
        A[k, k + 2:] = 0.0
        if Q is not None:
            qsub = Q[:, k + 1:]
            qsub -= 2.0 * np.outer(qsub @ v, v)
    d = np.diag(A).copy()
    e = np.diag(A, -1).copy()
    return d, e, Q


def ql_implicit(d: np.ndarray, e: np.ndarray, q: np.ndarray | None,
                source: np.ndarray, max_total_iters: int):
    """Implicit-shift QL iteration on a tridiagonal (d, e(sub)) pair.

    Accumulates rotations into q when given.  ``source`` is only used for
    the error report.
    """
    n = d.size
    d = d.copy()
    e = np.concatenate([e, [0.0]])
    iters = 0
    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= np.finfo(float).eps * dd:
                    break
                m += 1
            if m == l:
                break
            iters += 1
            if iters > max_total_iters:
                raise EigenConvergenceError(
                    f"implicit QL exceeded {max_total_iters} iterations (n={n})", source)
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if q is not None:
                    qi = q[:, i].copy()
                    qi1 = q[:, i + 1].copy()
                    q[:, i + 1] = s * qi + c * qi1
                    q[:, i] = c * qi - s * qi1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, q


def eigh_ql(a: np.ndarray, want_vectors: bool = True):
    """Householder tridiagonalisation + implicit-shift QL."""
    a0 = _check_symmetric(a)
    n = a0.shape[0]
    d, e, q = householder_tridiagonal(a0, want_vectors=want_vectors)
    d, q = ql_implicit(d, e, q, a0, max_total_iters=QL_MAX_ITERS_PER_N * max(n, 1))
    return _sorted_descending(d, q)


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

def eigh_lapack(a: np.ndarray, want_vectors: bool = True):
    a0 = _check_symmetric(a)
    if want_vectors:
        w, v = np.linalg.eigh(a0)
        return _sorted_descending(w, v)
    return _sorted_descending(np.linalg.eigvalsh(a0), None)


ENGINES = ("auto", "jacobi", "ql", "lapack")


def eigh(a: np.ndarray, want_vectors: bool = True, engine: str = "auto"):
    """Eigendecompose with the requested engine.

    ``auto`` follows the size rule: Jacobi for n <= 32, QL above.
    """
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; choose from {ENGINES}")
    n = np.asarray(a).shape[0]
    if engine == "auto":
        engine = "jacobi" if n <= 32 else "ql"
    if engine == "jacobi":
        return eigh_jacobi(a, want_vectors)
    if engine == "ql":
        return eigh_ql(a, want_vectors)
    return eigh_lapack(a, want_vectors)


def eigvalsh_stack(matrices: np.ndarray) -> np.ndarray:
    """Descending eigenvalues of a stack of symmetric matrices (LAPACK)."""
    w = np.linalg.eigvalsh(matrices)
    return w[..., ::-1]
