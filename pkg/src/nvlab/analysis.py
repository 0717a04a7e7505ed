"""Strong-error measurement and asymptotic-error-law verification.

The statistical core of the lab:

* coupled strong errors  E[max_k |X_{t_k} - X^scheme_{t_k}|^{2p}]^{1/(2p)}
  against an exact or refined reference sharing the same Brownian bundle;
* log-log rate fits over a step ladder;
* samples of the rescaled terminal error sqrt(N) (X_T - X^nv_T);
* an Euler simulator for the limiting affine SDE of that rescaled error,
    dV = sqrt(T/2) sum_{m<j} [s^j, s^m](X) dB^{jm}
         + (db)(X) V dt + sum_j (ds^j)(X) V dW^j,    V_0 = 0,
  driven by a fresh d(d-1)/2-dimensional Brownian motion B independent of W;
* distribution comparison (moments + per-coordinate two-sample KS);
* the variance of the sign-ordered within-step integral
    Y^{j,m,N}_t = sqrt(N) ( int Psi1 (W^m - W^m-lagged) dW^j
                          + int Psi2 (W^j - W^j-lagged) dW^m ),
  with Psi1 = (eta - 1)/2 and Psi2 = (eta + 1)/2 selecting one term per step;
  its quadratic variation has mean T t / 2 at grid-aligned t for every N -
  the scalar fingerprint of the bracket source term.

Every estimator fills a per-path value array in memory-bounded chunks (chunk
grouping cannot change per-path values because all kernels act path-wise) and
then reduces over a fixed 20-slice batching, so results are byte-identical
for any worker count; the batch spread also supplies the standard errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as _sstats

from .flows import DEFAULT_FLOW_CONFIG, FlowConfig
from .models import Problem
from .paths import AUX_DOMAIN, GridSpec, StreamPool, coarsen, make_bundle_batch
from .schemes import exact_trajectory, nv_trajectory, trajectory
from .util import STAT_BATCHES, compute_chunks, run_batches, split_paths

# Seed stride separating the limit-SDE sample stream from the scheme stream,
# so the two sides of the KS comparison are independent.
LIMIT_SEED_STRIDE = 2**32


def _fill_by_chunks(out: np.ndarray, chunks, worker, threads: int) -> None:
    """Run ``worker(start, count) -> array`` over chunks, writing disjoint slices."""

    def task(spec):
        start, count = spec
        out[start : start + count] = worker(start, count)

    run_batches(task, chunks, threads)


def _batch_mean_se(values: np.ndarray, batches: int = STAT_BATCHES) -> tuple[float, float]:
    """Grand mean and its standard error from contiguous batch means."""
    slices = split_paths(len(values), batches)
    means = np.array([values[s : s + c].mean() for s, c in slices])
    grand = float(values.mean())
    if len(means) < 2:
        return grand, 0.0
    return grand, float(np.std(means, ddof=1) / math.sqrt(len(means)))


def _batch_var_se(values: np.ndarray, batches: int = STAT_BATCHES) -> tuple[float, float]:
    """Sample variance and its standard error from contiguous batch variances."""
    var = float(np.var(values, ddof=1))
    slices = [(s, c) for s, c in split_paths(len(values), batches) if c >= 2]
    if len(slices) < 2:
        return var, 0.0
    bvars = np.array([np.var(values[s : s + c], ddof=1) for s, c in slices])
    return var, float(np.std(bvars, ddof=1) / math.sqrt(len(bvars)))


@dataclass(frozen=True)
class ErrorPoint:
    """One rung of a convergence ladder: L^{2p} max-over-grid coupled error."""

    N: int
    err: float
    stderr: float
    p: int = 1


@dataclass(frozen=True)
class RateFit:
    """OLS fit of log(err) against log(h); slope is the empirical strong order."""

    points: tuple[ErrorPoint, ...]
    slope: float
    intercept: float
    r_squared: float
    excluded: tuple[int, ...] = ()  # N values dropped because err == 0


@dataclass(frozen=True)
class SourceTermEstimate:
    N: int
    j: int
    m: int
    t: float
    var_est: float
    stderr: float
    theory: float
    substeps: int
    paths: int


@dataclass(frozen=True)
class LimitLawReport:
    """Moment and KS comparison of rescaled scheme error vs simulated limit law."""

    N: int | None
    samples_scheme: int
    samples_limit: int
    mean_scheme: np.ndarray
    mean_limit: np.ndarray
    cov_scheme: np.ndarray
    cov_limit: np.ndarray
    ks_stat: np.ndarray
    ks_pvalue: np.ndarray


def _check_reference(problem: Problem, refine_factor: int):
    if refine_factor < 1:
        raise ValueError("refine_factor must be >= 1")
    if problem.exact_solution is None and refine_factor < 2:
        raise ValueError(
            f"problem {problem.name!r} has no closed form; a refined proxy reference "
            "needs refine_factor >= 2"
        )


def strong_error(
    problem: Problem,
    scheme: str,
    N: int,
    paths: int,
    master_seed: int,
    p: int = 1,
    refine_factor: int = 64,
    threads: int = 1,
    flow_config: FlowConfig = DEFAULT_FLOW_CONFIG,
) -> ErrorPoint:
    """Coupled L^{2p} max-over-grid error of ``scheme`` at N steps.

    The scheme at N and the reference run on the same bundle generated at
    N * refine_factor fine steps; problems without a closed form use the
    splitting scheme at full fine resolution as reference, so refine_factor
    must be >= 2 for them.
    """
    if paths < 100:
        raise ValueError("strong_error needs paths >= 100")
    if p < 1:
        raise ValueError("moment order p must be >= 1")
    _check_reference(problem, refine_factor)
    n_fine = N * refine_factor
    grid = GridSpec(N, problem.T)

    def worker(start, count):
        bundle = make_bundle_batch(master_seed, start, count, n_fine, problem.d, problem.T)
        ref = exact_trajectory(problem, bundle, grid, flow_config).states
        sch = trajectory(problem, scheme, bundle, grid, flow_config).states
        sup = np.linalg.norm(ref - sch, axis=2).max(axis=1)
        return sup ** (2 * p)

    values = np.empty(paths)
    chunks = compute_chunks(paths, n_fine * (problem.d + 3), threads)
    _fill_by_chunks(values, chunks, worker, threads)
    grand, se = _batch_mean_se(values)
    if grand > 0.0:
        err = grand ** (1.0 / (2 * p))
        stderr = se * err / (2 * p * grand)
    else:
        err, stderr = 0.0, 0.0
    return ErrorPoint(N=N, err=err, stderr=stderr, p=p)


def scheme_gap(
    problem: Problem,
    scheme_a: str,
    scheme_b: str,
    N: int,
    paths: int,
    master_seed: int,
    p: int = 1,
    threads: int = 1,
    flow_config: FlowConfig = DEFAULT_FLOW_CONFIG,
) -> ErrorPoint:
    """L^{2p} max-over-grid distance between two schemes run on shared bundles.

    No reference is involved: both schemes consume the same increments at the
    same resolution, so this directly measures how close the adapted surrogate
    tracks the splitting scheme.
    """
    if p < 1:
        raise ValueError("moment order p must be >= 1")
    grid = GridSpec(N, problem.T)

    def worker(start, count):
        bundle = make_bundle_batch(master_seed, start, count, N, problem.d, problem.T)
        a = trajectory(problem, scheme_a, bundle, grid, flow_config).states
        b = trajectory(problem, scheme_b, bundle, grid, flow_config).states
        sup = np.linalg.norm(a - b, axis=2).max(axis=1)
        return sup ** (2 * p)

    values = np.empty(paths)
    chunks = compute_chunks(paths, N * (problem.d + 3), threads)
    _fill_by_chunks(values, chunks, worker, threads)
    grand, se = _batch_mean_se(values)
    if grand > 0.0:
        err = grand ** (1.0 / (2 * p))
        stderr = se * err / (2 * p * grand)
    else:
        err, stderr = 0.0, 0.0
    return ErrorPoint(N=N, err=err, stderr=stderr, p=p)


def fit_rate(points: Sequence[ErrorPoint], T: float = 1.0) -> RateFit:
    """OLS on (log h, log err). Zero-error points are excluded and flagged."""
    if len(points) < 3:
        raise ValueError("need at least 3 ladder points")
    if len({pt.N for pt in points}) != len(points):
        raise ValueError("ladder points must have distinct N")
    usable = [pt for pt in points if pt.err > 0.0]
    excluded = tuple(pt.N for pt in points if pt.err <= 0.0)
    if len(usable) < 2:
        raise ValueError("fewer than 2 nonzero error points; nothing to fit")
    x = np.log([T / pt.N for pt in usable])
    y = np.log([pt.err for pt in usable])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return RateFit(
        points=tuple(points),
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r2,
        excluded=excluded,
    )


def normalized_error_samples(
    problem: Problem,
    N: int,
    paths: int,
    master_seed: int,
    refine_factor: int = 64,
    threads: int = 1,
    flow_config: FlowConfig = DEFAULT_FLOW_CONFIG,
) -> np.ndarray:
    """Per-path rescaled terminal error sqrt(N)(X_T - X^nv_T), shape (paths, n)."""
    _check_reference(problem, refine_factor)
    n_fine = N * refine_factor
    grid = GridSpec(N, problem.T)
    scale = math.sqrt(N)

    def worker(start, count):
        bundle = make_bundle_batch(master_seed, start, count, n_fine, problem.d, problem.T)
        ref = exact_trajectory(problem, bundle, grid, flow_config).states[:, -1, :]
        nv = nv_trajectory(problem, bundle, grid, flow_config).states[:, -1, :]
        return scale * (ref - nv)

    values = np.empty((paths, problem.n))
    chunks = compute_chunks(paths, n_fine * (problem.d + 3), threads)
    _fill_by_chunks(values, chunks, worker, threads)
    return values


def simulate_limit_sde(
    problem: Problem,
    paths: int,
    n_fine: int = 4096,
    master_seed: int = 0,
    threads: int = 1,
) -> np.ndarray:
    """Terminal samples of the limiting affine error SDE, shape (paths, n).

    Jointly Euler-discretizes the base SDE X (Ito form) and the error process V
    on an n_fine grid. The bracket source term is driven by fresh increments of
    an independent d(d-1)/2-dimensional Brownian motion drawn from each path's
    auxiliary stream. For commuting Brownian fields the source vanishes and V
    stays exactly zero.
    """
    f = problem.fields
    table = problem.brackets()
    pairs = table.pairs
    n_pairs = len(pairs)
    delta = problem.T / n_fine
    coef = math.sqrt(problem.T / 2.0)

    def worker(start, count):
        bundle = make_bundle_batch(master_seed, start, count, n_fine, problem.d, problem.T)
        if n_pairs:
            dB = np.empty((count, n_fine, n_pairs))
            pool = StreamPool(master_seed)
            for i in range(count):
                pool.seek(start + i, AUX_DOMAIN).standard_normal((n_fine, n_pairs), out=dB[i])
            dB *= math.sqrt(delta)
        x = np.broadcast_to(problem.x0, (count, problem.n)).copy()
        v = np.zeros((count, problem.n))
        for k in range(n_fine):
            dWk = bundle.dW[:, k, :]
            dx = f.b(x) * delta
            dv = np.einsum("...ik,...k->...i", f.jac_b(x), v) * delta
            for j in range(problem.d):
                w = dWk[:, j][:, None]
                dx = dx + f.sigma[j](x) * w
                dv = dv + np.einsum("...ik,...k->...i", f.jac_sigma[j](x), v) * w
            for idx, (j, m) in enumerate(pairs):
                dv = dv + coef * table(j, m, x) * dB[:, k, idx][:, None]
            x = x + dx
            v = v + dv
        return v

    values = np.empty((paths, problem.n))
    chunks = compute_chunks(paths, n_fine * (problem.d + max(1, n_pairs)), threads)
    _fill_by_chunks(values, chunks, worker, threads)
    return values


def _as_samples(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[:, None]  # a flat vector is m scalar samples
    if x.ndim != 2:
        raise ValueError("sample sets must be 1- or 2-dimensional arrays")
    return x


def compare_distributions(a: np.ndarray, b: np.ndarray, N: int | None = None) -> LimitLawReport:
    """Moments plus per-coordinate two-sample Kolmogorov-Smirnov comparison."""
    a = _as_samples(a)
    b = _as_samples(b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("sample sets must be non-empty")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    n = a.shape[1]
    ks_stat = np.empty(n)
    ks_p = np.empty(n)
    for i in range(n):
        res = _sstats.ks_2samp(a[:, i], b[:, i], method="asymp")
        ks_stat[i] = res.statistic
        ks_p[i] = res.pvalue
    cov_a = np.atleast_2d(np.cov(a, rowvar=False))
    cov_b = np.atleast_2d(np.cov(b, rowvar=False))
    return LimitLawReport(
        N=N,
        samples_scheme=a.shape[0],
        samples_limit=b.shape[0],
        mean_scheme=a.mean(axis=0),
        mean_limit=b.mean(axis=0),
        cov_scheme=cov_a,
        cov_limit=cov_b,
        ks_stat=ks_stat,
        ks_pvalue=ks_p,
    )


def limit_law_study(
    problem: Problem,
    N: int,
    paths: int,
    master_seed: int,
    n_fine_limit: int = 4096,
    refine_factor: int = 64,
    threads: int = 1,
    flow_config: FlowConfig = DEFAULT_FLOW_CONFIG,
) -> LimitLawReport:
    """Full pipeline: rescaled scheme error vs simulated limit, on separate seeds."""
    scheme_samples = normalized_error_samples(
        problem, N, paths, master_seed, refine_factor, threads, flow_config
    )
    limit_samples = simulate_limit_sde(
        problem, paths, n_fine_limit, master_seed + LIMIT_SEED_STRIDE, threads
    )
    return compare_distributions(scheme_samples, limit_samples, N=N)


def source_term_variance(
    N: int,
    j: int,
    m: int,
    t: float,
    paths: int,
    master_seed: int,
    substeps: int = 64,
    T: float = 1.0,
    threads: int = 1,
) -> SourceTermEstimate:
    """Sample variance of the sign-ordered within-step integral Y^{j,m,N}_t.

    Within-step stochastic integrals are resolved by sub-discretization with
    ``substeps`` points per step (left-endpoint sums), which biases the
    variance down by exactly the factor (1 - 1/substeps) at grid-aligned t.
    The analytic target is T*t/2, independent of N at grid-aligned t.
    """
    if not 1 <= m < j:
        raise ValueError(f"need 1 <= m < j, got j={j}, m={m}")
    if N < 1 or substeps < 2:
        raise ValueError("need N >= 1 and substeps >= 2")
    if t < 0 or t > T:
        raise ValueError(f"t must lie in [0, {T}]")
    theory = 0.5 * T * t
    if t == 0.0:
        return SourceTermEstimate(N, j, m, t, 0.0, 0.0, theory, substeps, 0)

    n_fine = N * substeps
    delta = T / n_fine
    kept = min(n_fine, int(math.floor(t / delta + 1e-9)))
    # substep (k, i) enters iff its right endpoint is <= t
    mask = (np.arange(n_fine) < kept).reshape(N, substeps).astype(float)
    scale = math.sqrt(N)

    def worker(start, count):
        bundle = make_bundle_batch(master_seed, start, count, n_fine, 2, T)
        eta = coarsen(bundle, N).eta
        dWm = bundle.dW[:, :, 0].reshape(count, N, substeps)
        dWj = bundle.dW[:, :, 1].reshape(count, N, substeps)
        lag_m = np.zeros_like(dWm)
        lag_m[:, :, 1:] = np.cumsum(dWm[:, :, :-1], axis=2)
        lag_j = np.zeros_like(dWj)
        lag_j[:, :, 1:] = np.cumsum(dWj[:, :, :-1], axis=2)
        per_step_minus = np.einsum("pks,ks->pk", lag_m * dWj, mask)
        per_step_plus = np.einsum("pks,ks->pk", lag_j * dWm, mask)
        return scale * np.sum(np.where(eta < 0, -per_step_minus, per_step_plus), axis=1)

    values = np.empty(paths)
    chunks = compute_chunks(paths, n_fine * 6, threads)
    _fill_by_chunks(values, chunks, worker, threads)
    var_est, stderr = _batch_var_se(values)
    return SourceTermEstimate(N, j, m, t, var_est, stderr, theory, substeps, paths)
