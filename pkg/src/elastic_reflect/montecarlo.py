"""Monte Carlo statistics and eps-convergence studies."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import ks_2samp

from .errors import EmptySamples, ValidationError
from .laplace import LaplaceQuery, cell_count, discrete_lt, limit_lt
from .model import BoundarySpec, ValidatedModel, validate_model
from .rng import batch_noise
from .simulator import default_step, map_path_chunks, run_batch, sample_inverse_local_times

UPPER_SLACK = 1e-12


def estimate_lt(samples, lam: float):
    """Sample mean of ``exp(-lam * tau)`` and its standard error.

    ``inf`` draws (censored paths) contribute zero.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise EmptySamples("no samples")
    if not lam > 0:
        raise ValidationError(f"lambda must be positive, got {lam}")
    vals = np.exp(-lam * samples)
    mean = math.fsum(vals) / vals.size
    if vals.size == 1:
        return mean, 0.0
    var = math.fsum((vals - mean) ** 2) / (vals.size - 1)
    return mean, math.sqrt(var / vals.size)


def tau_samples(model, g, eps, ell, n, seed, *, coupled=True, stream=0, h=None, threads=1):
    """``n`` excursion-sum draws of ``tau^eps_ell``.

    With ``coupled`` every eps reuses path indices ``0..n-1`` (common random
    numbers); otherwise ``stream`` selects a disjoint block of indices.
    ``h`` is the Euler step used when no exact hitting sampler exists.
    """
    start = 0 if coupled else stream * n
    return sample_inverse_local_times(model, g, eps, ell, seed, range(start, start + n),
                                      "excursion_sum", h=h, threads=threads)


def ks_ladder(model, g, ell, eps_ladder: Sequence[float], n, seed, *, coupled=True, h=None,
              threads=1, cache: Optional[Dict[float, np.ndarray]] = None):
    """Two-sample KS statistic between ``tau^eps`` and ``tau^(eps/2)`` for each rung.

    ``cache`` (eps -> draws) is filled in place and may be reused by the caller.
    """
    out = []
    cache = {} if cache is None else cache

    def draws(e, i):
        if e not in cache:
            cache[e] = tau_samples(model, g, e, ell, n, seed, coupled=coupled, stream=i,
                                   h=h, threads=threads)
        return cache[e]

    for i, eps in enumerate(eps_ladder):
        a = draws(eps, 2 * i)
        b = draws(eps / 2, 2 * i + 1)
        out.append(float(ks_2samp(a, b).statistic))
    return out


def coupled_local_time_gap(model, g, eps, T, h, n_paths, seed, *, window=0.1, threads=1):
    """Per-path ``sup_t |L^eps_t - L^(eps/2)_t|`` from runs sharing one noise stream.

    Also returns the largest number of eps-jumps seen in any time window of
    length ``window``.
    """
    n_steps = max(1, math.ceil(T / h - 1e-9))
    h = T / n_steps
    w = max(1, int(round(window / h)))

    def chunk_fn(idx):
        z, u = batch_noise(seed, idx, n_steps)
        coarse = run_batch(model, g, eps, h, z, u, record=True)
        fine = run_batch(model, g, eps / 2, h, z, u, record=True)
        diff = np.abs(coarse.counts_path * eps - fine.counts_path * (eps / 2)).max(axis=1)
        cp = coarse.counts_path
        burst = (cp[:, w:] - cp[:, :-w]).max() if cp.shape[1] > w else cp[:, -1].max()
        return diff, burst

    parts = map_path_chunks(chunk_fn, range(n_paths), threads, chunk=128)
    return np.concatenate([p[0] for p in parts]), int(max(p[1] for p in parts))


@dataclass
class ConvergenceRung:
    eps: float
    mc_mean: float
    mc_se: float
    analytic_discrete: float
    analytic_limit: float
    gap: float
    ks_to_next: float
    ucp_sup_median: float
    max_jumps_per_window: int


@dataclass
class ConvergenceReport:
    lam: float
    ell: float
    eps_ladder: List[float]
    n_paths: int
    seed: int
    rungs: List[ConvergenceRung] = field(default_factory=list)

    @property
    def gap_ratios(self):
        gaps = [r.gap for r in self.rungs]
        return [a / b if b > 0 else math.inf for a, b in zip(gaps, gaps[1:])]

    def to_dict(self):
        d = asdict(self)
        d["gap_ratios"] = self.gap_ratios
        return d


def _check_ladder(eps_ladder, ell):
    if len(eps_ladder) == 0:
        raise ValidationError("empty eps ladder")
    if any(b >= a for a, b in zip(eps_ladder, eps_ladder[1:])):
        raise ValidationError("eps ladder must be strictly decreasing")
    for e in eps_ladder:
        if not e > 0:
            raise ValidationError("eps values must be positive")
        k = cell_count(ell, e)
        if abs(k * e - ell) > 1e-9 * max(1.0, ell):
            raise ValidationError(f"eps={e} does not divide ell={ell}")


def convergence_study(model, g: BoundarySpec, lam: float, ell: float, eps_ladder,
                      n_paths: int, seed: int, *, ucp_paths: Optional[int] = None,
                      T: float = 1.0, h: Optional[float] = None, window: float = 0.1,
                      threads: int = 1) -> ConvergenceReport:
    """Monte Carlo and analytic transforms along a ladder of eps values.

    For each eps: the excursion-sum estimate of ``E exp(-lam tau^eps_ell)``
    from ``n_paths`` draws, the discrete and limit transforms, the KS
    distance to ``tau^(eps/2)`` (common random numbers), and the median over
    ``ucp_paths`` coupled paths of ``sup_{t<=T} |L^eps - L^(eps/2)|``.
    ``h`` defaults to :func:`default_step` at the finest ``eps/2``, shared
    by all rungs; when given it is also the Euler step of excursion draws
    that lack an exact sampler.
    """
    model = validate_model(model)
    eps_ladder = [float(e) for e in eps_ladder]
    _check_ladder(eps_ladder, ell)
    if n_paths < 1000:
        raise ValidationError(f"n_paths must be >= 1000, got {n_paths}")
    ucp_paths = n_paths if ucp_paths is None else ucp_paths
    if ucp_paths < 1:
        raise EmptySamples("ucp_paths must be positive")
    h_draws = h
    if h is None:
        h = default_step(model, eps_ladder[-1] / 2)

    limit = limit_lt(LaplaceQuery(model, g, lam, ell)).value
    draws_by_eps: Dict[float, np.ndarray] = {}
    ks = ks_ladder(model, g, ell, eps_ladder, n_paths, seed, h=h_draws, threads=threads,
                   cache=draws_by_eps)
    report = ConvergenceReport(lam, ell, eps_ladder, n_paths, seed)
    for eps, ks_val in zip(eps_ladder, ks):
        mean, se = estimate_lt(draws_by_eps[eps], lam)
        disc = discrete_lt(LaplaceQuery(model, g, lam, ell, eps)).value
        sup_gap, burst = coupled_local_time_gap(model, g, eps, T, h, ucp_paths, seed,
                                                window=window, threads=threads)
        report.rungs.append(ConvergenceRung(
            eps=eps, mc_mean=mean, mc_se=se, analytic_discrete=disc, analytic_limit=limit,
            gap=abs(disc - limit), ks_to_next=ks_val,
            ucp_sup_median=float(np.median(sup_gap)), max_jumps_per_window=burst))
    return report


@dataclass
class ComparisonResult:
    upper_violations: int
    lower_violations: int
    n_paths: int
    n_steps: int

    @property
    def violation_count(self) -> int:
        return self.upper_violations + self.lower_violations


def pathwise_comparison(model, g: BoundarySpec, eps: float, h: float, T: float,
                        n_paths: int, seed: int, *, threads=1) -> ComparisonResult:
    """Check ``Y_low <= X^eps <= Y`` on coupled paths.

    ``Y`` is the free diffusion started at ``g(0)``; ``Y_low`` is reflected
    by eps-jumps at the constant level ``g(0) - eps``, started at
    ``g(0) - 2 eps``.  All three share the Brownian increments and the
    bridge uniforms.
    """
    model = validate_model(model)
    if n_paths <= 0:
        raise EmptySamples("n_paths must be positive")
    n_steps = max(1, math.ceil(T / h - 1e-9))
    h = T / n_steps
    floor_boundary = BoundarySpec.constant(g.c0 - eps)

    def chunk_fn(idx):
        z, u = batch_noise(seed, idx, n_steps)
        x = run_batch(model, g, eps, h, z, u, record=True).x_path
        y = run_batch(model, None, eps, h, z, u, x0=g.c0, record=True).x_path
        y_low = run_batch(model, floor_boundary, eps, h, z, u, record=True).x_path
        return (int(np.count_nonzero(x > y + UPPER_SLACK)),
                int(np.count_nonzero(x < y_low - UPPER_SLACK)))

    parts = map_path_chunks(chunk_fn, range(n_paths), threads, chunk=128)
    return ComparisonResult(sum(p[0] for p in parts), sum(p[1] for p in parts), n_paths, n_steps)


def pathwise_comparison_check(model, g, eps, h, T, n_paths, seed, **kw) -> int:
    """Number of grid nodes violating either comparison bound."""
    return pathwise_comparison(model, g, eps, h, T, n_paths, seed, **kw).violation_count
