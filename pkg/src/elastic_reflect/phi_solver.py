"""Log-derivative of the increasing eigenfunction and hitting-time transforms.

For ``lam > 0`` let ``Phi`` be the positive increasing solution of
``0.5 sigma^2 Phi'' + b Phi' = lam Phi``.  Only ``u = Phi'/Phi`` is ever
computed; it solves the Riccati equation

    u' = 2 (lam - b(x) u) / sigma^2 - u^2 .

With constant coefficients ``u`` is the positive root of
``0.5 sigma^2 u^2 + b u - lam = 0``.  For affine drift the equation is
integrated left to right from a far-left anchor started at the frozen
coefficient root; the forward flow is contracting around the increasing
branch, so the anchor is forgotten exponentially fast.
"""
from __future__ import annotations

import math
import threading
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp

from .errors import AnchorDivergence, DescendingHit, NonPositive, OutOfDomain, ValidationError
from .model import ValidatedModel, validate_model

DEFAULT_REL_TOL = 1e-9
DEFAULT_ABS_TOL = 1e-12
MAX_ANCHOR_REFINEMENTS = 8
# the integrator runs this much tighter than rel_tol: near its stability limit
# DOP853 wanders at the level of its tolerance, which would swamp the anchor test
INTEGRATOR_MARGIN = 1e-4
MIN_RTOL = 1e-13

# 8-point Gauss-Legendre integrates the degree-7 DOP853 interpolant exactly
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL6_NODES, _GL6_WEIGHTS = np.polynomial.legendre.leggauss(6)


def positive_root(b, sigma, lam):
    """Positive root of ``0.5 sigma^2 u^2 + b u = lam``, stable for either sign of ``b``."""
    disc = np.sqrt(b * b + 2.0 * lam * sigma * sigma)
    # (-b + disc)/sigma^2 loses digits when b >> 0; use the conjugate form there
    return np.where(b > 0, 2.0 * lam / (b + disc), (disc - b) / (sigma * sigma))


class LogDerivativeSolver:
    """Cached solution ``x -> u_lam(x)`` for one model and one ``lam``.

    Parameters
    ----------
    model : ValidatedModel
    lam : float
        Laplace variable, must be positive.
    rel_tol, abs_tol : float
        Accuracy targets.  The anchor refinement stops once ``u`` moves by
        less than ``rel_tol``; the Runge-Kutta local error controls are set
        ``INTEGRATOR_MARGIN`` times tighter.
    force_riccati : bool
        Integrate the Riccati equation even when the closed form is exact.

    A solver grows its cache on demand and is therefore single-writer; use
    one instance per thread.
    """

    def __init__(self, model, lam, rel_tol=DEFAULT_REL_TOL, abs_tol=DEFAULT_ABS_TOL,
                 force_riccati=False):
        if not lam > 0:
            raise ValidationError(f"lambda must be positive, got {lam}")
        self.model = validate_model(model)
        self.lam = float(lam)
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol
        self.closed_form = self.model.constant_coefficients and not force_riccati
        self.x_anchor = None
        self._sol = None
        self._covered = (math.inf, -math.inf)
        self._lock = threading.Lock()
        if self.closed_form:
            self.u_constant = float(positive_root(self.model.drift_intercept, self.model.sigma0,
                                                self.lam))

    # -- Riccati integration ------------------------------------------------

    def _rhs(self, x, u):
        s2 = self.model.sigma0 ** 2
        return 2.0 * (self.lam - self.model.drift(x) * u) / s2 - u * u

    def _contraction_rate(self, x):
        b = self.model.drift(x)
        s2 = self.model.sigma0 ** 2
        return 2.0 * math.sqrt(b * b + 2.0 * self.lam * s2) / s2

    def _integrate(self, anchor, x_hi):
        u0 = float(positive_root(self.model.drift(anchor), self.model.sigma0, self.lam))
        sol = solve_ivp(self._rhs, (anchor, x_hi), [u0], method="DOP853",
                        rtol=max(self.rel_tol * INTEGRATOR_MARGIN, MIN_RTOL),
                        atol=self.abs_tol * INTEGRATOR_MARGIN, dense_output=True)
        if not sol.success:
            raise AnchorDivergence(f"Riccati integration failed: {sol.message}")
        if np.any(sol.y[0] <= 0):
            raise NonPositive("log-derivative crossed zero; tighten the tolerances")
        return sol

    def _solve(self, x_lo, x_hi):
        width = max(1.0, 40.0 / self._contraction_rate(x_lo))
        probes = np.linspace(x_lo, x_hi, 5)
        previous = None
        for k in range(MAX_ANCHOR_REFINEMENTS + 1):
            anchor = x_lo - width * 2.0 ** k
            sol = self._integrate(anchor, x_hi)
            values = sol.sol(probes)[0]
            if previous is not None:
                change = np.max(np.abs(values - previous) / np.abs(values))
                if change <= self.rel_tol:
                    self.x_anchor = anchor
                    return sol
            previous = values
        raise AnchorDivergence(
            f"anchor refinement did not stabilize after {MAX_ANCHOR_REFINEMENTS} steps")

    def ensure(self, x_lo, x_hi):
        """Make sure ``[x_lo, x_hi]`` is covered by the cached solution."""
        if self.closed_form:
            return
        lo, hi = self._covered
        if x_lo >= lo and x_hi <= hi:
            return
        with self._lock:
            lo, hi = self._covered
            if x_lo >= lo and x_hi <= hi:
                return
            new_lo = min(lo, x_lo) - 1.0
            new_hi = max(hi, x_hi) + 1.0
            self._sol = self._solve(new_lo, new_hi)
            self._covered = (new_lo, new_hi)

    @property
    def nodes(self):
        """The integrator's accepted grid and the values of ``u`` there."""
        if self.closed_form:
            return np.empty(0), np.empty(0)
        return self._sol.t, self._sol.y[0]

    # -- evaluation ---------------------------------------------------------

    def __call__(self, x):
        if self.closed_form:
            return self.u_constant if np.ndim(x) == 0 else np.full(np.shape(x), self.u_constant)
        xmin, xmax = float(np.min(x)), float(np.max(x))
        self.ensure(xmin, xmax)
        u = self._sol.sol(np.atleast_1d(x))[0]
        return float(u[0]) if np.ndim(x) == 0 else u

    def derivative(self, x):
        """``u'(x)`` from the dense output.

        On each integrator step the interpolant is a degree-7 polynomial; it
        is recovered from 8 Chebyshev samples and differentiated exactly.
        """
        x = np.asarray(x, dtype=float)
        if self.closed_form:
            return 0.0 * x
        self.ensure(float(np.min(x)), float(np.max(x)))
        flat = np.atleast_1d(x).ravel()
        ts = self._sol.sol.ts
        seg = np.clip(np.searchsorted(ts, flat, side="right") - 1, 0, len(ts) - 2)
        out = np.empty_like(flat)
        cheb = np.cos(np.pi * (np.arange(8) + 0.5) / 8)
        for i in np.unique(seg):
            a, b = ts[i], ts[i + 1]
            nodes = 0.5 * (a + b) + 0.5 * (b - a) * cheb
            vals = self._sol.sol.interpolants[i](nodes)[0]
            poly = np.polynomial.Chebyshev.fit(nodes, vals, 7, domain=[a, b])
            mask = seg == i
            out[mask] = poly.deriv()(flat[mask])
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def riccati_residual(self, x):
        """``0.5 sigma^2 (u' + u^2) + b u - lam`` with ``u'`` from the interpolant."""
        x = np.asarray(x, dtype=float)
        u = self(x)
        du = self.derivative(x)
        return 0.5 * self.model.sigma0 ** 2 * (du + u * u) + self.model.drift(x) * u - self.lam

    def integral(self, x, z):
        """Return ``(int_x^z u dy, error_estimate)`` for ``x <= z``.

        The interpolant is a polynomial of degree 7 on each integrator step,
        so Gauss-Legendre on the step partition is exact up to rounding; the
        reported error compares against a lower-order rule.
        """
        if z < x:
            raise ValidationError(f"integration bounds reversed: {x} > {z}")
        if z == x:
            return 0.0, 0.0
        if self.closed_form:
            return self.u_constant * (z - x), 0.0
        self.ensure(x, z)
        ts = self._sol.t
        inner = ts[(ts > x) & (ts < z)]
        edges = np.concatenate(([x], inner, [z]))
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        pts8 = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
        pts6 = (mid[:, None] + half[:, None] * _GL6_NODES[None, :]).ravel()
        u8 = self._sol.sol(pts8)[0].reshape(len(mid), -1)
        u6 = self._sol.sol(pts6)[0].reshape(len(mid), -1)
        value = math.fsum(half * (u8 @ _GL_WEIGHTS))
        coarse = math.fsum(half * (u6 @ _GL6_WEIGHTS))
        return value, abs(value - coarse)


@lru_cache(maxsize=256)
def _cached_solver(model, lam, rel_tol, abs_tol, force_riccati):
    return LogDerivativeSolver(model, lam, rel_tol, abs_tol, force_riccati)


def get_solver(model, lam, rel_tol=DEFAULT_REL_TOL, abs_tol=DEFAULT_ABS_TOL,
               force_riccati=False) -> LogDerivativeSolver:
    """Shared solver instance for ``(model, lam, tolerances)``."""
    return _cached_solver(validate_model(model), float(lam), rel_tol, abs_tol, force_riccati)


def _check_window(model, *points):
    for x in points:
        arr = np.asarray(x, dtype=float)
        if np.any(arr < model.domain_lo) or np.any(arr > model.domain_hi):
            raise OutOfDomain(f"x={x} outside [{model.domain_lo}, {model.domain_hi}]")


def log_derivative(model: ValidatedModel, lam: float, x, **solver_kw):
    """``u_lam(x) = Phi'(x) / Phi(x)`` of the increasing solution."""
    solver = get_solver(model, lam, **solver_kw)
    _check_window(solver.model, x)
    return solver(x)


def log_derivative_integral(model: ValidatedModel, lam: float, x: float, z: float,
                            **solver_kw) -> float:
    """``int_x^z u_lam(y) dy`` for ``x <= z``."""
    if z < x:
        raise DescendingHit(f"target {z} lies below start {x}")
    solver = get_solver(model, lam, **solver_kw)
    _check_window(solver.model, x, z)
    return solver.integral(x, z)[0]


def hitting_lt(model: ValidatedModel, lam: float, x: float, z: float, **solver_kw) -> float:
    """``E_x[exp(-lam T_z)]`` for an upward hit ``x <= z``.

    Equals ``Phi(x) / Phi(z)``, evaluated as ``exp(-int_x^z u)``.  Downward
    hits would need the decreasing eigenfunction and are not supported.
    """
    if z < x:
        raise DescendingHit(f"target {z} lies below start {x}; only upward hits are supported")
    return math.exp(-log_derivative_integral(model, lam, x, z, **solver_kw))
