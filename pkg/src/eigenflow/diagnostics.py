"""Experiments that confront the simulated spectral flow with its limit.

* ``weak_equation_residual``: the part of the evolution of <mu_t, f> not
  explained by the deterministic drift.  Writing dd(s) for the pairwise
  divided-difference average and S2(s) for the sum of f'' over the
  eigenvalues,

      G = <mu_t, f> - <mu_0, f>
          - 1/2 * int_0^t dd(s) dR(s,s)
          - 1/(2 n^2) * int_0^t S2(s) dR(s,s),

  where both time integrals are trapezoid in the measure factor and exact
  (telescoped, R(b,b) - R(a,a)) in the dR factor, so rough kernels with a
  divergent rate at s=0 are integrated without touching the singularity.
  G is a centered quantity whose second moment must vanish as n grows.
* ``convergence_study``: Kolmogorov distance of empirical spectra to the
  deterministic limit law, per (n, t), with the sup over grid times.
* ``holder_increments``: moment scaling of measure increments in the time
  separation, fitted as a log-log slope.
* ``collision_proximity``: minimum spectral gap statistics.
* ``dyson_crosscheck``: Brownian-only Euler-Maruyama integration of the
  n-rescaled non-colliding eigenvalue SDE

      d lambda_i = sqrt(2/n) dW_i + (1/n) sum_{j != i} dt / (lambda_i - lambda_j)

  compared against exactly sampled matrix spectra through the Wasserstein-1
  distance of path-averaged sorted spectra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import rng
from .grids import TimeGrid
from .kernels import BrownianKernel, CovarianceKernel
from .limitlaw import AtomicMeasure, LimitLaw, law_at_time, limit_stieltjes
from .matrixflow import make_shift, sample_flows, spectra_of_stack
from .measures import EmpiricalMeasure, divided_difference_stack, kolmogorov_distance
from .testfunctions import TestFunction

DEGENERATE_GAP = 1e-8


# ---------------------------------------------------------------------------
# Weak-equation residual
# ---------------------------------------------------------------------------

def weak_equation_residual(lambdas: np.ndarray, kernel: CovarianceKernel,
                           grid: TimeGrid, f: TestFunction,
                           t_index: Optional[int] = None) -> np.ndarray:
    """Residual G for each eigenvalue flow in ``lambdas`` (..., K+1, n).

    Returns the residuals with shape ``lambdas.shape[:-2]``.
    """
    lam = np.asarray(lambdas, dtype=float)
    if t_index is None:
        t_index = len(grid) - 1
    n = lam.shape[-1]
    times = grid.times[:t_index + 1]

    mu_f = np.mean(f.f(lam), axis=-1)               # (..., K+1)
    dd = divided_difference_stack(lam, f)            # (..., K+1)
    s2 = np.sum(f.d2(lam), axis=-1)                  # (..., K+1)
    integrand = 0.5 * dd + s2 / (2.0 * n ** 2)

    dr = kernel.diag_increment(times[:-1], times[1:])           # (t_index,)
    pair_mean = 0.5 * (integrand[..., :t_index] + integrand[..., 1:t_index + 1])
    drift = np.sum(pair_mean * dr, axis=-1)

    return mu_f[..., t_index] - mu_f[..., 0] - drift


@dataclass(frozen=True)
class ResidualReport:
    n: int
    paths: int
    test_function: str
    mean_residual: float
    mean_residual_se: float
    mean_square: float
    mean_square_se: float
    residuals: np.ndarray = field(repr=False)


def _chunk_ranges(total: int, chunk: int) -> List[range]:
    return [range(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]


def residual_experiment(kernel: CovarianceKernel, grid: TimeGrid,
                        n_values: Sequence[int], f: TestFunction, paths: int,
                        seed: int, shift_spec: str = "zero",
                        method: str = "cholesky", mapper=map) -> List[ResidualReport]:
    """Monte Carlo estimate of E[G^2] for each matrix dimension.

    ``mapper`` may be a thread pool's map; chunks are pure functions of
    (seed, path range) and results are placed by index, so the output does
    not depend on the worker count.
    """
    reports = []
    for n in n_values:
        shift = make_shift(shift_spec, n)
        resid = np.empty(paths)
        chunk = max(1, int(4e7 / (len(grid) * n * n * 8)))

        def task(pid, n=n, shift=shift):
            y = sample_flows(kernel, grid, n, shift, seed, pid, method=method)
            return weak_equation_residual(spectra_of_stack(y), kernel, grid, f)

        ranges = _chunk_ranges(paths, chunk)
        for pid, part in zip(ranges, mapper(task, ranges)):
            resid[pid.start:pid.stop] = part
        sq = resid ** 2
        reports.append(ResidualReport(
            n=n, paths=paths, test_function=f.name,
            mean_residual=float(resid.mean()),
            mean_residual_se=float(resid.std(ddof=1) / math.sqrt(paths)),
            mean_square=float(sq.mean()),
            mean_square_se=float(sq.std(ddof=1) / math.sqrt(paths)),
            residuals=resid))
    return reports


def fit_loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log y against log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# Convergence to the limit law
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    t: Optional[float]          # None marks the sup-over-grid-times row
    mean_distance: float
    stderr: float
    paths: int


def convergence_study(kernel: CovarianceKernel, grid: TimeGrid,
                      n_values: Sequence[int], paths: int, seed: int,
                      shift_spec: str = "zero",
                      method: str = "cholesky", mapper=map) -> List[ConvergenceRow]:
    """Mean Kolmogorov distance to the limit law per (n, grid time).

    The initial law is the spectral distribution of the shift matrix, so
    the limit at time t is the evolved law with tau = R(t,t); a sup row
    (t = None) reports the uniform-over-grid-times distance per path.
    """
    rows: List[ConvergenceRow] = []
    for n in n_values:
        shift = make_shift(shift_spec, n)
        mu0 = AtomicMeasure.from_eigenvalues(np.linalg.eigvalsh(shift))
        laws: List[LimitLaw] = [law_at_time(kernel, mu0, float(t)) for t in grid.times]
        dist = np.empty((paths, len(grid)))
        chunk = max(1, int(4e7 / (len(grid) * n * n * 8)))

        def task(pid, n=n, shift=shift, laws=laws):
            lam = spectra_of_stack(sample_flows(kernel, grid, n, shift, seed, pid, method=method))
            out = np.empty(lam.shape[:2])
            for p in range(lam.shape[0]):
                for k in range(len(grid)):
                    out[p, k] = kolmogorov_distance(EmpiricalMeasure(lam[p, k]), laws[k])
            return out

        ranges = _chunk_ranges(paths, chunk)
        for pid, part in zip(ranges, mapper(task, ranges)):
            dist[pid.start:pid.stop] = part
        for k, t in enumerate(grid.times):
            rows.append(ConvergenceRow(
                n=n, t=float(t), mean_distance=float(dist[:, k].mean()),
                stderr=float(dist[:, k].std(ddof=1) / math.sqrt(paths)), paths=paths))
        sup = dist.max(axis=1)
        rows.append(ConvergenceRow(
            n=n, t=None, mean_distance=float(sup.mean()),
            stderr=float(sup.std(ddof=1) / math.sqrt(paths)), paths=paths))
    return rows


# ---------------------------------------------------------------------------
# Hoelder increments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HolderPair:
    t1: float
    t2: float
    moment: float
    stderr: float


@dataclass(frozen=True)
class HolderReport:
    p: float
    pairs: List[HolderPair]
    slope: Optional[float]      # None when every increment vanishes
    paths: int
    test_function: str


def holder_increments(kernel: CovarianceKernel, n: int, f: TestFunction,
                      p: float, t_base: float, separations: Sequence[float],
                      paths: int, seed: int, shift_spec: str = "zero") -> HolderReport:
    """E|<mu_{t2}, f> - <mu_{t1}, f>|^p for pairs (t_base, t_base + delta).

    The fitted log-log slope is meaningful when the separations span at
    least a decade; a constant f yields the degenerate report.
    """
    seps = np.asarray(sorted(separations), dtype=float)
    if np.any(seps <= 0):
        raise ValueError("separations must be positive")
    times = np.unique(np.concatenate([[0.0, t_base], t_base + seps]))
    grid = TimeGrid.from_times(times)
    base_idx = grid.index_of(t_base)
    shift = make_shift(shift_spec, n)

    moments = np.empty(seps.size)
    errs = np.empty(seps.size)
    incr_all = np.empty((paths, seps.size))
    chunk = max(1, int(4e7 / (len(grid) * n * n * 8)))
    for lo in range(0, paths, chunk):
        pid = range(lo, min(lo + chunk, paths))
        lam = spectra_of_stack(sample_flows(kernel, grid, n, shift, seed, pid))
        mu_f = np.mean(f.f(lam), axis=-1)            # (P, K+1)
        for k, d in enumerate(seps):
            idx = grid.index_of(t_base + d)
            incr_all[lo:lo + mu_f.shape[0], k] = np.abs(mu_f[:, idx] - mu_f[:, base_idx]) ** p

    for k in range(seps.size):
        moments[k] = incr_all[:, k].mean()
        errs[k] = incr_all[:, k].std(ddof=1) / math.sqrt(paths)

    pairs = [HolderPair(t1=t_base, t2=float(t_base + d), moment=float(m), stderr=float(e))
             for d, m, e in zip(seps, moments, errs)]
    slope = None
    # a slope is only meaningful when the separations span at least a decade
    if np.all(moments > 0) and seps[-1] / seps[0] >= 10.0 * (1 - 1e-12):
        slope = fit_loglog_slope(seps, moments)
        if math.isnan(slope):
            slope = None
    return HolderReport(p=p, pairs=pairs, slope=slope, paths=paths, test_function=f.name)


# ---------------------------------------------------------------------------
# Collision proximity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CollisionReport:
    n: int
    paths: int
    quantiles: dict
    degenerate_fraction: float


GAP_QUANTILES = (0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0)


def collision_proximity(lambdas: np.ndarray, n: int, paths: int) -> CollisionReport:
    """Minimum spectral gap per (path, time); n = 1 reports infinity."""
    if n < 2:
        return CollisionReport(n=n, paths=paths,
                               quantiles={q: math.inf for q in GAP_QUANTILES},
                               degenerate_fraction=0.0)
    gaps = np.min(np.abs(np.diff(np.asarray(lambdas), axis=-1)), axis=-1)
    flat = gaps.reshape(-1)
    qs = {q: float(np.quantile(flat, q)) for q in GAP_QUANTILES}
    return CollisionReport(n=n, paths=paths, quantiles=qs,
                           degenerate_fraction=float(np.mean(flat < DEGENERATE_GAP)))


def collision_experiment(kernel: CovarianceKernel, grid: TimeGrid, n: int,
                         paths: int, seed: int, shift_spec: str = "zero",
                         method: str = "cholesky") -> CollisionReport:
    shift = make_shift(shift_spec, n)
    lam = spectra_of_stack(sample_flows(kernel, grid, n, shift, seed, range(paths), method=method))
    return collision_proximity(lam, n, paths)


# ---------------------------------------------------------------------------
# Dyson cross-check (Brownian kernel only)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DysonRow:
    n: int
    t: float
    dt: float
    paths: int
    w1_distance: float
    w1_mc_error: float
    forced_sorts: int


def _sde_drift(lam: np.ndarray, n: int) -> np.ndarray:
    """(1/n) sum_{j != i} 1 / (lambda_i - lambda_j), coincident pairs skipped."""
    diff = lam[:, :, None] - lam[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(diff != 0.0, 1.0 / diff, 0.0)
    return inv.sum(axis=2) / n


def _refinement_noise(seed: int, counter: int, shape) -> np.ndarray:
    """Fresh noise for refined sub-steps from a keyed counter-based stream."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, (3 << 60) | counter], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.standard_normal(shape)


_SDE_MAX_DEPTH = 3


def _tamed_displacement(drift: np.ndarray, dt: float, lam: np.ndarray, n: int) -> np.ndarray:
    """Drift displacement bounded by half the local gap.

    The taming factor 1 / (1 + 2 dt |drift| / gap) tends to one as dt
    shrinks at a fixed gap, so the scheme stays consistent while the
    repulsion can never overshoot a neighbour within one step.
    """
    disp = drift * dt
    if n == 1:
        return disp
    d = np.diff(lam, axis=1)
    big = np.max(np.abs(lam), axis=1, keepdims=True) + 1.0
    gap_lo = np.concatenate([big, d], axis=1)
    gap_hi = np.concatenate([d, big], axis=1)
    gap = np.minimum(np.maximum(gap_lo, 0.0), np.maximum(gap_hi, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        tame = np.where(gap > 0.0, 1.0 / (1.0 + 2.0 * np.abs(disp) / np.maximum(gap, 1e-300)), 1.0)
    return disp * tame


def _sde_step(lam: np.ndarray, dt: float, noise: np.ndarray, n: int,
              depth: int, stats: dict, seed: int, counter: list) -> np.ndarray:
    """One Euler-Maruyama step with step-size rejection near collisions.

    A step is rejected and redone as two halves (fresh noise) when the
    starting state cannot resolve the repulsion at this step size (minimum
    gap below the step-dependent threshold 2 dt max|drift|).  The
    criterion depends only on the starting state, so refinement is pure
    step-size adaptivity and does not condition the outcome.  At the
    recursion cap the drift is gap-tamed instead.  Crossed proposals are
    reflected by sorting (exact relabelling for coincident starts, counted
    otherwise).
    """
    drift = _sde_drift(lam, n)
    sigma = math.sqrt(2.0 / n)
    if n > 1:
        gap = np.min(np.diff(lam, axis=1), axis=1)
        stiff = (2.0 * dt * np.max(np.abs(drift), axis=1) > gap) & (gap > 0.0)
    else:
        stiff = np.zeros(lam.shape[0], dtype=bool)

    if depth >= _SDE_MAX_DEPTH:
        prop = lam + _tamed_displacement(drift, dt, lam, n) + sigma * math.sqrt(dt) * noise
    else:
        prop = lam + drift * dt + sigma * math.sqrt(dt) * noise
        if np.any(stiff):
            sub = lam[stiff]
            for _ in range(2):
                counter[0] += 1
                fresh = _refinement_noise(seed, counter[0], sub.shape)
                sub = _sde_step(sub, 0.5 * dt, fresh, n, depth + 1, stats, seed, counter)
            prop[stiff] = sub

    if n > 1:
        crossed = np.any(np.diff(prop, axis=1) < 0.0, axis=1)
        if np.any(crossed):
            degenerate = np.min(np.diff(lam, axis=1), axis=1) <= 0.0
            stats["forced_sorts"] += int(np.sum(crossed & ~degenerate))
            prop[crossed] = np.sort(prop[crossed], axis=1)
    return prop


def dyson_crosscheck(n: int, t_max: float, dt: float, paths: int, seed: int,
                     shift_spec: str = "zero", steps_grid: int = 1) -> DysonRow:
    """Wasserstein-1 distance between SDE and matrix spectra at time t_max.

    Both ensembles start from the spectrum of the shift matrix; the matrix
    side is sampled exactly, the SDE side by Euler-Maruyama with
    non-collision step rejection.  Sorted spectra are averaged over paths
    before the distance; ``w1_mc_error`` combines the standard errors of
    the two averages.
    """
    kernel = BrownianKernel()
    shift = make_shift(shift_spec, n)
    if t_max == 0.0:
        # both ensembles sit at the spectrum of the shift
        return DysonRow(n=n, t=0.0, dt=dt, paths=paths, w1_distance=0.0,
                        w1_mc_error=0.0, forced_sorts=0)
    grid = TimeGrid.uniform(t_max, max(steps_grid, 1))

    lam_matrix = np.sort(spectra_of_stack(
        sample_flows(kernel, grid, n, shift, seed, range(paths)))[:, -1, :], axis=1)
    mean_matrix = lam_matrix.mean(axis=0)
    se_matrix = lam_matrix.std(axis=0, ddof=1) / math.sqrt(paths)

    lam0 = np.sort(np.linalg.eigvalsh(shift))
    lam = np.tile(lam0, (paths, 1)).astype(float)
    n_steps = int(round(t_max / dt))
    if not math.isclose(n_steps * dt, t_max, rel_tol=1e-9):
        raise ValueError("dt must divide t_max")
    sid_base = np.array([rng.stream_id(rng.DOMAIN_SDE, 0, 0, p) for p in range(paths)],
                        dtype=np.uint64)
    stats = {"forced_sorts": 0}
    counter = [0]
    # base noise drawn in step blocks (cache-friendly), block-aligned streams:
    # step k consumes positions [k*n, (k+1)*n) of each path stream
    block_steps = 2 * max(1, 256 // max(n, 1))
    base_noise = None
    for step in range(n_steps):
        k = step % block_steps
        if k == 0:
            m = min(block_steps, n_steps - step)
            base_noise = rng.normals(seed, sid_base, m * n,
                                     start=step * n).reshape(paths, m, n)
        lam = _sde_step(lam, dt, base_noise[:, k, :], n, 0, stats, seed, counter)

    lam = np.sort(lam, axis=1)
    mean_sde = lam.mean(axis=0)
    se_sde = lam.std(axis=0, ddof=1) / math.sqrt(paths)
    w1 = float(np.mean(np.abs(mean_sde - mean_matrix)))
    mc_err = float(np.mean(np.sqrt(se_sde ** 2 + se_matrix ** 2)))
    return DysonRow(n=n, t=t_max, dt=dt, paths=paths, w1_distance=w1,
                    w1_mc_error=mc_err, forced_sorts=stats["forced_sorts"])


# ---------------------------------------------------------------------------
# Burgers PDE finite-difference check
# ---------------------------------------------------------------------------

def burgers_pde_residual(mu0: AtomicMeasure, taus: np.ndarray, zs: np.ndarray,
                         h: float = 1e-4) -> float:
    """max |dF/dtau - F dF/dz| over a (tau, z) grid, by central differences."""
    worst = 0.0
    for tau in np.asarray(taus, dtype=float):
        for z in np.atleast_1d(zs):
            z = complex(z)
            f0 = limit_stieltjes(mu0, tau, z)
            dtau = (limit_stieltjes(mu0, tau + h, z) - limit_stieltjes(mu0, tau - h, z)) / (2 * h)
            dz = (limit_stieltjes(mu0, tau, z + h) - limit_stieltjes(mu0, tau, z - h)) / (2 * h)
            worst = max(worst, abs(dtau - f0 * dz))
    return worst
