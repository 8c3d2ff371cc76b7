"""Laplace transforms of inverse local times.

Three evaluations are provided for a query ``(model, g, lam, ell, eps)``:

* :func:`limit_lt`, the transform of the limiting inverse local time
  ``exp(-int_0^ell (g'(a) + 1) u(g(a)) da)``;
* :func:`discrete_lt`, the transform for the eps-jump scheme, integrating
  ``(g'(a) + 1) u(g(a) + a - eps*ceil(a/eps))`` cell by cell;
* :func:`discrete_lt_product`, the same quantity assembled as a product of
  per-excursion hitting-time transforms.

The last two are equal in exact arithmetic and are kept as mutually
independent checks.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import BoundaryOrder, MethodUnavailable, QuadratureFailure, ValidationError
from .model import BoundarySpec, ValidatedModel, validate_model
from .phi_solver import get_solver

QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-13
QUAD_LIMIT = 500

ROUTES = ("integral", "product", "closed_form")


def cell_count(ell: float, eps: float) -> int:
    """``floor(ell / eps)``, robust to representation error when ``eps`` divides ``ell``."""
    k = math.floor(ell / eps)
    if (k + 1) * eps <= ell * (1 + 1e-12) + 1e-15:
        k += 1
    elif k * eps > ell * (1 + 1e-12) + 1e-15:
        k -= 1
    return max(k, 0)


@dataclass(frozen=True)
class LaplaceQuery:
    model: ValidatedModel
    g: BoundarySpec
    lam: float
    ell: float
    eps: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "model", validate_model(self.model))
        if not self.lam > 0:
            raise ValidationError(f"lambda must be positive, got {self.lam}")
        if not self.ell >= 0:
            raise ValidationError(f"ell must be >= 0, got {self.ell}")
        if self.eps is not None and not self.eps > 0:
            raise ValidationError(f"eps must be positive, got {self.eps}")


@dataclass(frozen=True)
class LaplaceResult:
    value: float
    quadrature_error: float
    route: str


def boundary_substitution(g: BoundarySpec):
    """Integrand pieces after the substitution ``a = s**(1/p)``.

    Returns ``(jac, level, a_of_s)`` with ``(g'(a) + 1) da = jac(s) ds`` and
    ``g(a) = level(s)``.  For ``p < 1`` this removes the ``a**(p-1)``
    singularity of ``g'`` at the origin.
    """
    c0, c1, p = g.c0, g.c1, g.p
    if p == 1.0:
        return (lambda s: c1 + 1.0), (lambda s: c0 + c1 * s), (lambda s: s)
    q = 1.0 / p
    return ((lambda s: c1 + q * s ** (q - 1.0)),
            (lambda s: c0 + c1 * s),
            (lambda s: s ** q))


def _quad(f, lo, hi):
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            val, err = quad(f, lo, hi, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT)
        except IntegrationWarning as exc:
            raise QuadratureFailure(f"quadrature on [{lo}, {hi}] did not converge: {exc}") from exc
    if err > max(QUAD_EPSABS, QUAD_EPSREL * abs(val)):
        raise QuadratureFailure(f"quadrature error {err:.3g} above tolerance on [{lo}, {hi}]")
    return val, err


def _result(exponent, err, route):
    value = math.exp(-exponent)
    return LaplaceResult(value, value * err, route)


def limit_lt(q: LaplaceQuery, **solver_kw) -> LaplaceResult:
    """Transform ``E[exp(-lam tau_ell)]`` of the limiting inverse local time."""
    if q.ell == 0:
        return LaplaceResult(1.0, 0.0, "integral")
    g = q.g
    u = get_solver(q.model, q.lam, **solver_kw)
    u.ensure(g.c0, float(g.value(q.ell)))
    jac, level, _ = boundary_substitution(g)
    exponent, err = _quad(lambda s: jac(s) * u(level(s)), 0.0, q.ell ** g.p)
    return _result(exponent, err, "integral")


def discrete_cell_exponents(q: LaplaceQuery, **solver_kw):
    """Per-cell integrals ``int_{(n-1)eps}^{n eps} (g'(a)+1) u(g(a) + a - n eps) da``.

    Returns ``(values, error_estimates)`` for ``n = 1 .. floor(ell/eps)``.
    """
    if q.eps is None:
        raise ValidationError("discrete transform needs eps")
    cells = cell_count(q.ell, q.eps)
    if cells == 0:
        return np.empty(0), np.empty(0)
    g, eps = q.g, q.eps
    u = get_solver(q.model, q.lam, **solver_kw)
    u.ensure(g.c0 - eps, float(g.value(cells * eps)))
    jac, level, a_of = boundary_substitution(g)
    parts, errs = np.empty(cells), np.empty(cells)
    for n in range(1, cells + 1):
        shift = n * eps
        lo, hi = ((n - 1) * eps) ** g.p, (n * eps) ** g.p
        parts[n - 1], errs[n - 1] = _quad(lambda s: jac(s) * u(level(s) + a_of(s) - shift),
                                          lo, hi)
    return parts, errs


def discrete_lt(q: LaplaceQuery, **solver_kw) -> LaplaceResult:
    """Transform ``E[exp(-lam tau^eps_ell)]`` by cell-wise quadrature.

    Panels coincide with the cells ``[(n-1) eps, n eps]`` so the integrand's
    jumps at multiples of ``eps`` never fall inside a panel.
    """
    parts, errs = discrete_cell_exponents(q, **solver_kw)
    return _result(math.fsum(parts), math.fsum(errs), "integral")


def discrete_lt_product(q: LaplaceQuery, **solver_kw) -> LaplaceResult:
    """Same transform as :func:`discrete_lt`, as a product over excursions.

    Excursion ``n`` runs from ``g((n-1) eps) - eps`` up to ``g(n eps)``; its
    transform is ``exp(-int u)`` over that interval.
    """
    if q.eps is None:
        raise ValidationError("discrete_lt_product needs eps")
    cells = cell_count(q.ell, q.eps)
    if cells == 0:
        return LaplaceResult(1.0, 0.0, "product")
    g, eps = q.g, q.eps
    u = get_solver(q.model, q.lam, **solver_kw)
    levels = g.value(eps * np.arange(cells + 1))
    u.ensure(float(levels[0]) - eps, float(levels[-1]))
    parts, errs = [], []
    for n in range(1, cells + 1):
        start, target = float(levels[n - 1]) - eps, float(levels[n])
        if start > target:
            raise BoundaryOrder(f"excursion {n} starts above its target ({start} > {target})")
        val, err = u.integral(start, target)
        parts.append(val)
        errs.append(err)
    return _result(math.fsum(parts), math.fsum(errs), "product")


def closed_form_lt(q: LaplaceQuery) -> LaplaceResult:
    """Exact transform for constant coefficients (``u`` is constant).

    With ``eps`` given this is the discrete transform, otherwise the limit.
    """
    model = q.model
    if not model.constant_coefficients:
        raise MethodUnavailable("closed form needs constant drift and volatility")
    u = get_solver(model, q.lam).u_constant
    ell = q.ell if q.eps is None else cell_count(q.ell, q.eps) * q.eps
    exponent = u * (float(q.g.value(ell)) - q.g.c0 + ell)
    return LaplaceResult(math.exp(-exponent), 0.0, "closed_form")


def evaluate(q: LaplaceQuery, route: str = "integral", **solver_kw) -> LaplaceResult:
    """Dispatch on ``route``; ``eps=None`` selects the limit transform."""
    if route not in ROUTES:
        raise ValidationError(f"unknown route {route!r}")
    if route == "closed_form":
        return closed_form_lt(q)
    if q.eps is None:
        if route == "product":
            raise MethodUnavailable("the product route needs eps")
        return limit_lt(q, **solver_kw)
    if route == "product":
        return discrete_lt_product(q, **solver_kw)
    return discrete_lt(q, **solver_kw)
