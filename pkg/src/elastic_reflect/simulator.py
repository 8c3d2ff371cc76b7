"""Sampling the eps-jump approximation of elastic reflection.

Between boundary hits the diffusion follows an Euler-Maruyama step.  Within
a step the running maximum of the frozen-coefficient Brownian bridge is
sampled exactly, which makes the crossing event fire with probability
``exp(-2 (g - x_k)+ (g - x_{k+1})+ / (sigma^2 h))``.  Every time the
maximum reaches the current boundary level the path jumps down by ``eps``
and the local time moves up by ``eps``; the remainder of the step is
carried along shifted by ``-eps``, so several jumps may occur in one step.
For additive noise this reproduces the continuous-time scheme exactly up to
the Euler drift error.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.signal import lfilter

from .errors import (
    DescendingHit,
    DomainExit,
    ExcessiveJumps,
    MethodUnavailable,
    NonHittingDrift,
    ValidationError,
)
from .laplace import cell_count
from .model import BoundarySpec, ValidatedModel, validate_model
from .rng import batch_noise, path_generator

DEFAULT_JUMP_CAP = 10 ** 7
PATH_CHUNK = 512
METHODS = ("excursion_sum", "path")


def default_step(model: ValidatedModel, eps: float) -> float:
    """Largest ``h`` with ``sigma * sqrt(h) <= eps / 4``."""
    return (eps / (4.0 * model.sigma0)) ** 2


@dataclass(frozen=True)
class SchemeConfig:
    """Discretization and randomness settings for one simulation.

    ``h=None`` selects :func:`default_step`.  ``path_index`` picks the
    random substream of ``seed``.
    """

    eps: float
    T: float
    h: Optional[float] = None
    bridge_correction: bool = True
    seed: int = 0
    path_index: int = 0
    jump_cap: int = DEFAULT_JUMP_CAP

    def __post_init__(self):
        if not self.eps > 0:
            raise ValidationError(f"eps must be positive, got {self.eps}")
        if not self.T > 0:
            raise ValidationError(f"T must be positive, got {self.T}")
        if self.h is not None and not self.h > 0:
            raise ValidationError(f"h must be positive, got {self.h}")

    def grid(self, model):
        """Return ``(n_steps, h_eff)`` with ``n_steps * h_eff == T``."""
        h = self.h if self.h is not None else default_step(model, self.eps)
        n = max(1, math.ceil(self.T / h - 1e-9))
        return n, self.T / n


@dataclass
class ReflectedPath:
    """One discretized sample of ``(t, X, L)``.

    ``jump_times`` lists every jump, the initial one at ``t=0`` included;
    jumps detected inside step ``k`` are stamped with the step's right end.
    """

    times: np.ndarray
    x_values: np.ndarray
    l_values: np.ndarray
    jump_times: List[float]
    eps: float
    boundary: BoundarySpec
    aborted: bool = False
    abort_reason: str = ""

    def jump_ledger(self):
        """Per-jump records ``(time, l_before, l_after, x_after)``.

        ``x_after`` is the state right after the jump, ``g(l_before) - eps``.
        """
        out = []
        for n, t in enumerate(self.jump_times):
            l_before = n * self.eps
            out.append({
                "time": float(t),
                "l_before": l_before,
                "l_after": l_before + self.eps,
                "x_after": float(self.boundary.value(l_before)) - self.eps,
            })
        return out


@dataclass
class BatchResult:
    """Output of :func:`run_batch`; ``counts`` are local times in units of eps."""

    x_final: np.ndarray
    counts_final: np.ndarray
    aborted: np.ndarray
    abort_step: np.ndarray
    hit_step: Optional[np.ndarray] = None
    x_path: Optional[np.ndarray] = None
    counts_path: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)


def run_batch(model, g, eps, h, z, u, *, x0=None, bridge=True, record=False,
              target_count=None, jump_cap=DEFAULT_JUMP_CAP) -> BatchResult:
    """Advance a batch of paths driven by the noise arrays ``z`` and ``u``.

    Parameters
    ----------
    g : BoundarySpec or None
        ``None`` simulates the free (unreflected) diffusion.
    z, u : ndarray, shape (n_paths, n_steps)
        Standard normals and uniforms on ``(0, 1]``.
    x0 : float, optional
        Start value; defaults to ``g(0) - eps`` (state after the initial jump).
    target_count : int, optional
        Also report the first step index after which the jump count
        (initial jump included) reaches this value; ``-1`` if never.
    """
    n_paths, n_steps = z.shape
    alpha, beta, sig = model.drift_intercept, model.drift_slope, model.sigma0
    lo, hi = model.domain_lo, model.domain_hi
    sqh = math.sqrt(h)
    two_var = 2.0 * sig * sig * h
    if x0 is None:
        x0 = g.c0 - eps
    x = np.full(n_paths, float(x0))
    counts = np.ones(n_paths, dtype=np.int64) if g is not None else np.zeros(n_paths, np.int64)
    aborted = np.zeros(n_paths, dtype=bool)
    abort_step = np.full(n_paths, -1, dtype=np.int64)
    hit_step = None
    if target_count is not None:
        hit_step = np.where(counts >= target_count, 0, -1).astype(np.int64)
    x_path = counts_path = None
    if record:
        x_path = np.empty((n_paths, n_steps + 1))
        counts_path = np.empty((n_paths, n_steps + 1), dtype=np.int64)
        x_path[:, 0] = x
        counts_path[:, 0] = counts
    level = g.value(counts * eps) if g is not None else None

    for k in range(n_steps):
        xn = x + (alpha - beta * x) * h + sig * sqh * z[:, k]
        if g is not None:
            if bridge:
                d = xn - x
                m = 0.5 * (x + xn + np.sqrt(d * d - two_var * np.log(u[:, k])))
            else:
                m = xn.copy()
            hit = np.flatnonzero((m >= level) & ~aborted)
            while hit.size:
                counts[hit] += 1
                m[hit] -= eps
                xn[hit] -= eps
                level[hit] = g.value(counts[hit] * eps)
                hit = hit[m[hit] >= level[hit]]
            if counts.max() > jump_cap:
                raise ExcessiveJumps(
                    f"more than {jump_cap} jumps by step {k}; eps or h is mis-scaled")
        out = (xn < lo) | (xn > hi)
        if out.any():
            new = out & ~aborted
            abort_step[new] = k + 1
            aborted |= out
        x = np.where(aborted & (abort_step != k + 1), x, xn)
        if hit_step is not None:
            hit_step[(hit_step < 0) & (counts >= target_count) & ~aborted] = k + 1
        if record:
            x_path[:, k + 1] = x
            counts_path[:, k + 1] = counts
    return BatchResult(x, counts, aborted, abort_step, hit_step, x_path, counts_path)


def _chunked(indices, size):
    for start in range(0, len(indices), size):
        yield indices[start:start + size]


def map_path_chunks(fn, path_indices, threads=1, chunk=PATH_CHUNK):
    """Apply ``fn`` to consecutive chunks of path indices, in order.

    Each path owns its random stream, so the result does not depend on
    ``threads`` or ``chunk``.
    """
    pieces = list(_chunked(list(path_indices), chunk))
    if threads <= 1 or len(pieces) == 1:
        return [fn(p) for p in pieces]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, pieces))


def simulate_reflected_path(model, g: BoundarySpec, cfg: SchemeConfig, strict=False) -> ReflectedPath:
    """Sample one path of ``(X^eps, L^eps)`` on ``[0, T]``.

    A path leaving the model window is returned with ``aborted=True`` and
    frozen from the exit step on, or raises :class:`DomainExit` when
    ``strict`` is set.
    """
    model = validate_model(model)
    n_steps, h = cfg.grid(model)
    z, u = batch_noise(cfg.seed, [cfg.path_index], n_steps)
    res = run_batch(model, g, cfg.eps, h, z, u, bridge=cfg.bridge_correction, record=True,
                    jump_cap=cfg.jump_cap)
    times = np.linspace(0.0, cfg.T, n_steps + 1)
    counts = res.counts_path[0]
    jumps = [0.0]
    for k in np.flatnonzero(np.diff(counts)):
        jumps.extend([float(times[k + 1])] * int(counts[k + 1] - counts[k]))
    reason = ""
    if res.aborted[0]:
        reason = f"left window [{model.domain_lo}, {model.domain_hi}] at t={times[res.abort_step[0]]}"
        if strict:
            raise DomainExit(reason)
    return ReflectedPath(times, res.x_path[0], counts * cfg.eps, jumps, cfg.eps, g,
                         bool(res.aborted[0]), reason)


# -- hitting times ---------------------------------------------------------

def _euler_first_passage(model, x, z, rng, h, t_cap):
    """Bridge-corrected Euler first passages from ``x`` up to ``z`` (arrays, one row each).

    All rows advance together in blocks drawn from ``rng``; a row is retired
    at its first crossing, and rows still running at ``t_cap`` return ``inf``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    a = 1.0 - model.drift_slope * h
    c = model.drift_intercept * h
    s = model.sigma0 * math.sqrt(h)
    inv_var = 2.0 / (model.sigma0 ** 2 * h)
    out = np.full(x.size, math.inf)
    live = np.flatnonzero(z > x)
    out[z <= x] = 0.0
    pos = x[live].copy()
    # short excursions are the common case: start small and double
    block, t0 = 64, 0.0
    while live.size and t0 < t_cap:
        w = c + s * rng.standard_normal((live.size, block))
        un = 1.0 - rng.random((live.size, block))
        y, _ = lfilter([1.0], [1.0, -a], w, axis=1, zi=(a * pos)[:, None])
        prev = np.concatenate((pos[:, None], y[:, :-1]), axis=1)
        zt = z[live][:, None]
        p = np.exp(-inv_var * np.maximum(zt - prev, 0.0) * np.maximum(zt - y, 0.0))
        crossed = un <= p
        hit = crossed.any(axis=1)
        first = crossed.argmax(axis=1)
        out[live[hit]] = t0 + (first[hit] + 1) * h
        live, pos = live[~hit], y[~hit, -1]
        t0 += block * h
        block = min(2 * block, 4096)
    out[out > t_cap] = math.inf
    return out


def _hitting_draws(model, distances, starts, rng, h, t_cap):
    """Independent hitting times over ``distances`` (upward), in order, from one stream."""
    sig, mu = model.sigma0, model.drift_intercept
    distances = np.asarray(distances, dtype=float)
    if model.constant_coefficients and mu == 0.0:
        zs = rng.standard_normal(distances.size)
        return (distances / (sig * zs)) ** 2
    if model.constant_coefficients and mu > 0.0:
        out = np.zeros(distances.size)
        pos = distances > 0
        out[pos] = rng.wald(distances[pos] / mu, distances[pos] ** 2 / sig ** 2)
        return out
    if model.constant_coefficients and mu < 0.0:
        warnings.warn("negative drift: hitting is not certain; simulating paths with a time cap",
                      NonHittingDrift, stacklevel=3)
    starts = np.asarray(starts, dtype=float)
    return _euler_first_passage(model, starts, starts + distances, rng, h, t_cap)


def sample_hitting_time(model, x: float, z: float, seed: int, path_index: int,
                        h: float = 1e-4, t_cap: float = 1e3) -> float:
    """One draw of the first time the free diffusion started at ``x`` reaches ``z >= x``.

    Exact for driftless Brownian motion (Levy law) and for positive constant
    drift (inverse Gaussian); otherwise a bridge-corrected Euler path with
    step ``h``, returning ``inf`` if ``z`` is not reached by ``t_cap``.
    """
    model = validate_model(model)
    if z < x:
        raise DescendingHit(f"target {z} lies below start {x}")
    if z == x:
        return 0.0
    rng = path_generator(seed, path_index)
    return float(_hitting_draws(model, [z - x], [x], rng, h, t_cap)[0])


def excursion_bounds(g: BoundarySpec, eps: float, ell: float):
    """Starts ``g((n-1) eps) - eps`` and targets ``g(n eps)`` of the excursions up to ``ell``."""
    k = cell_count(ell, eps)
    levels = g.value(eps * np.arange(k + 1))
    return np.asarray(levels[:-1], dtype=float) - eps, np.asarray(levels[1:], dtype=float)


def sample_inverse_local_time(model, g: BoundarySpec, eps: float, ell: float, seed: int,
                              path_index: int, method: str = "excursion_sum", *,
                              h: Optional[float] = None, T: float = 100.0,
                              bridge: bool = True) -> float:
    """One draw of ``tau^eps_ell``.

    ``excursion_sum`` adds independent excursion lengths (exact in law when
    an exact hitting sampler exists); ``path`` reads the jump time off a
    simulated path on ``[0, T]`` and returns ``inf`` if it is not reached.
    """
    return float(sample_inverse_local_times(model, g, eps, ell, seed, [path_index], method,
                                            h=h, T=T, bridge=bridge)[0])


def sample_inverse_local_times(model, g, eps, ell, seed, path_indices, method="excursion_sum",
                               *, h=None, T=100.0, bridge=True, threads=1):
    """Vectorized :func:`sample_inverse_local_time` over ``path_indices``."""
    model = validate_model(model)
    if method not in METHODS:
        raise MethodUnavailable(f"unknown method {method!r}; expected one of {METHODS}")
    if not eps > 0 or not ell >= 0:
        raise ValidationError("need eps > 0 and ell >= 0")
    path_indices = list(path_indices)
    k = cell_count(ell, eps)
    if k == 0:
        return np.zeros(len(path_indices))
    if method == "excursion_sum":
        starts, targets = excursion_bounds(g, eps, ell)
        dist = targets - starts
        h_fb = h if h is not None else 1e-4

        def one(idx):
            rng = path_generator(seed, idx)
            return math.fsum(_hitting_draws(model, dist, starts, rng, h_fb, T))

        return np.array([one(i) for i in path_indices])

    n_steps, h_eff = SchemeConfig(eps=eps, T=T, h=h).grid(model)

    def chunk_fn(idx):
        z, u = batch_noise(seed, idx, n_steps)
        res = run_batch(model, g, eps, h_eff, z, u, bridge=bridge, target_count=k + 1)
        return np.where(res.hit_step >= 0, res.hit_step * h_eff, np.inf)

    return np.concatenate(map_path_chunks(chunk_fn, path_indices, threads))
