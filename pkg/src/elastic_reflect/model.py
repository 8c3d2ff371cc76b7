"""Diffusion coefficients and elastic boundaries.

The diffusion ``dZ = b(Z) dt + sigma dW`` is restricted to constant or affine
drift and constant volatility, so that Lipschitz constants and recurrence can
be certified rather than assumed.  The elastic boundary ``g`` is a
nondecreasing function of the reflection local time from the family
``g(l) = c0 + c1 * l**p`` with ``c1 >= 0`` and ``0 < p <= 1``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from .errors import (
    EmptyDomain,
    NegativeLocalTime,
    NonRecurrentModel,
    NonPositiveVolatility,
    OutOfDomain,
    ValidationError,
)

DRIFT_FAMILIES = ("constant", "affine")
BOUNDARY_FAMILIES = ("constant", "linear", "sqrt", "power")

DEFAULT_DOMAIN = (-50.0, 50.0)


@dataclass(frozen=True)
class DiffusionModel:
    """Raw (unvalidated) description of a (b, sigma)-diffusion.

    Parameters
    ----------
    drift_family : {"constant", "affine"}
        ``constant`` means ``b(x) = mu``; ``affine`` means ``b(x) = alpha - beta * x``.
    sigma0 : float
        Constant volatility.
    mu, alpha, beta : float
        Drift parameters; only those of the selected family are used.
    domain_lo, domain_hi : float
        Simulation window.  Paths leaving it are aborted.
    """

    drift_family: str = "constant"
    sigma0: float = 1.0
    mu: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    domain_lo: float = DEFAULT_DOMAIN[0]
    domain_hi: float = DEFAULT_DOMAIN[1]

    @classmethod
    def brownian(cls, sigma=1.0, mu=0.0, domain=DEFAULT_DOMAIN):
        return cls("constant", sigma0=sigma, mu=mu, domain_lo=domain[0], domain_hi=domain[1])

    @classmethod
    def ornstein_uhlenbeck(cls, beta, sigma=1.0, alpha=0.0, domain=DEFAULT_DOMAIN):
        return cls("affine", sigma0=sigma, alpha=alpha, beta=beta,
                   domain_lo=domain[0], domain_hi=domain[1])


@dataclass(frozen=True)
class ValidatedModel(DiffusionModel):
    """A :class:`DiffusionModel` that passed :func:`validate_model`.

    Carries the certified lower volatility bound, the Lipschitz constants of
    drift and volatility, and a recurrence flag.
    """

    sigma_min: float = field(default=1.0)
    lipschitz_drift: float = 0.0
    lipschitz_vol: float = 0.0
    recurrent: bool = True

    @property
    def drift_intercept(self) -> float:
        return self.mu if self.drift_family == "constant" else self.alpha

    @property
    def drift_slope(self) -> float:
        """Coefficient ``beta`` in ``b(x) = intercept - beta * x``."""
        return 0.0 if self.drift_family == "constant" else self.beta

    @property
    def constant_coefficients(self) -> bool:
        return self.drift_slope == 0.0

    def drift(self, x):
        return self.drift_intercept - self.drift_slope * x

    def in_domain(self, x) -> bool:
        return self.domain_lo <= x <= self.domain_hi


def validate_model(model: DiffusionModel) -> ValidatedModel:
    """Check the standing assumptions and annotate the model.

    Raises
    ------
    NonPositiveVolatility
        If ``sigma0 <= 0``.
    EmptyDomain
        If ``domain_lo >= domain_hi``.

    Non-recurrent parameter choices are accepted with ``recurrent=False``
    and a :class:`NonRecurrentModel` warning.
    """
    if isinstance(model, ValidatedModel):
        return model
    if model.drift_family not in DRIFT_FAMILIES:
        raise ValidationError(f"unknown drift family {model.drift_family!r}")
    values = (model.sigma0, model.mu, model.alpha, model.beta, model.domain_lo, model.domain_hi)
    if not all(math.isfinite(v) for v in values):
        raise ValidationError("model parameters must be finite")
    if not model.sigma0 > 0:
        raise NonPositiveVolatility(f"sigma0 must be positive, got {model.sigma0}")
    if not model.domain_lo < model.domain_hi:
        raise EmptyDomain(f"empty window [{model.domain_lo}, {model.domain_hi}]")

    if model.drift_family == "constant":
        recurrent = model.mu == 0.0
        lip_b = 0.0
    else:
        recurrent = model.beta > 0 or (model.beta == 0 and model.alpha == 0)
        lip_b = abs(model.beta)
    if not recurrent:
        warnings.warn(f"{model.drift_family} drift {(model.mu, model.alpha, model.beta)} "
                      "is not recurrent", NonRecurrentModel, stacklevel=2)
    base = {f: getattr(model, f) for f in DiffusionModel.__dataclass_fields__}
    return ValidatedModel(
        **base,
        sigma_min=float(model.sigma0),
        lipschitz_drift=lip_b,
        lipschitz_vol=0.0,
        recurrent=recurrent,
    )


def eval_coefficients(model: ValidatedModel, x: float) -> Tuple[float, float]:
    """Return ``(b(x), sigma(x))``; raise :class:`OutOfDomain` outside the window."""
    if not model.in_domain(x):
        raise OutOfDomain(f"x={x} outside [{model.domain_lo}, {model.domain_hi}]")
    return float(model.drift(x)), float(model.sigma0)


def eval_generator_residual(model: ValidatedModel, lam: float, x: float,
                            phi: float, dphi: float, d2phi: float) -> float:
    """Residual ``0.5 sigma^2 phi'' + b phi' - lam phi`` of ``G phi = lam phi`` at ``x``."""
    if not lam > 0:
        raise ValidationError(f"lambda must be positive, got {lam}")
    b, sigma = eval_coefficients(model, x)
    return 0.5 * sigma * sigma * d2phi + b * dphi - lam * phi


@dataclass(frozen=True)
class BoundarySpec:
    """Elastic boundary ``g(l) = c0 + c1 * l**p``.

    Use the named constructors; ``family`` is kept for reporting and
    serialization.  For ``p < 1`` the derivative at ``l = 0`` is reported
    as ``+inf``.
    """

    family: str
    c0: float
    c1: float = 0.0
    p: float = 1.0

    def __post_init__(self):
        if self.family not in BOUNDARY_FAMILIES:
            raise ValidationError(f"unknown boundary family {self.family!r}")
        if not (math.isfinite(self.c0) and math.isfinite(self.c1) and math.isfinite(self.p)):
            raise ValidationError("boundary parameters must be finite")
        if self.c1 < 0:
            raise ValidationError(f"boundary slope c1 must be >= 0, got {self.c1}")
        if not 0 < self.p <= 1:
            raise ValidationError(f"boundary exponent must lie in (0, 1], got {self.p}")

    @classmethod
    def constant(cls, a: float) -> "BoundarySpec":
        return cls("constant", float(a), 0.0, 1.0)

    @classmethod
    def linear(cls, c0: float, c1: float) -> "BoundarySpec":
        return cls("linear", float(c0), float(c1), 1.0)

    @classmethod
    def sqrt(cls, c0: float, c1: float) -> "BoundarySpec":
        return cls("sqrt", float(c0), float(c1), 0.5)

    @classmethod
    def power(cls, c0: float, c1: float, p: float) -> "BoundarySpec":
        return cls("power", float(c0), float(c1), float(p))

    @property
    def singular_at_zero(self) -> bool:
        return self.c1 > 0 and self.p < 1

    def value(self, ell):
        """Vectorized ``g``; no sign checks."""
        return self.c0 + self.c1 * np.power(ell, self.p)

    def derivative(self, ell):
        if self.c1 == 0:
            return np.zeros_like(ell, dtype=float) if np.ndim(ell) else 0.0
        with np.errstate(divide="ignore"):
            return self.c1 * self.p * np.power(ell, self.p - 1.0)

    def to_dict(self) -> dict:
        out = {"family": self.family, "c0": self.c0}
        if self.family in ("linear", "sqrt", "power"):
            out["c1"] = self.c1
        if self.family == "power":
            out["p"] = self.p
        if self.family == "constant":
            out = {"family": "constant", "a": self.c0}
        return out


def eval_boundary(g: BoundarySpec, ell: float) -> Tuple[float, float]:
    """Return ``(g(ell), g'(ell))``; ``g'(0)`` is ``inf`` for sqrt/power shapes."""
    if ell < 0:
        raise NegativeLocalTime(f"local time must be >= 0, got {ell}")
    if ell == 0 and g.singular_at_zero:
        return float(g.c0), math.inf
    return float(g.value(ell)), float(g.derivative(ell))


def model_with_domain(model: ValidatedModel, lo: float, hi: float) -> ValidatedModel:
    return validate_model(replace(DiffusionModel(**{f: getattr(model, f)
                                                    for f in DiffusionModel.__dataclass_fields__}),
                                  domain_lo=lo, domain_hi=hi))
