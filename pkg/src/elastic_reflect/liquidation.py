"""Expected proceeds of reflection-type liquidation strategies.

Selling a position ``theta`` by keeping the impact-adjusted state below an
elastic boundary ``g`` yields expected discounted proceeds

    int_0^theta f(g(l)) E[exp(-delta tau_l)] dl ,

with ``tau_l`` the inverse local time.  The block-trade version sells ``eps``
units at each jump of the eps-scheme: block ``n`` is sold at the ``n``-th
jump time (block 0 at time zero), walking the price down from ``g(n eps)``,
and is discounted with the eps-scheme transform at ``lam = delta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import NumericalError, ValidationError
from .laplace import LaplaceQuery, boundary_substitution, discrete_cell_exponents
from .model import BoundarySpec, DiffusionModel, ValidatedModel, validate_model
from .phi_solver import get_solver

IMPACT_FAMILIES = ("constant", "exponential", "linear")


@dataclass(frozen=True)
class ImpactFunction:
    """Price impact factor ``f``: ``c``, ``exp(eta*y)`` or ``p + q*y``."""

    family: str
    c: float = 1.0
    eta: float = 0.0
    p: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if self.family not in IMPACT_FAMILIES:
            raise ValidationError(f"unknown impact family {self.family!r}")

    def __call__(self, y):
        if self.family == "constant":
            return self.c + 0.0 * np.asarray(y, dtype=float)
        if self.family == "exponential":
            return np.exp(self.eta * np.asarray(y, dtype=float))
        return self.p + self.q * np.asarray(y, dtype=float)

    def block_integral(self, y: float, w: float) -> float:
        """``int_0^w f(y - x) dx``, the price of selling ``w`` units from level ``y``."""
        if w <= 0:
            return 0.0
        if self.family == "constant":
            return self.c * w
        if self.family == "exponential":
            if self.eta == 0:
                return w
            return math.exp(self.eta * y) * -math.expm1(-self.eta * w) / self.eta
        return self.p * w + self.q * (y * w - 0.5 * w * w)

    def to_dict(self):
        keys = {"constant": ("c",), "exponential": ("eta",), "linear": ("p", "q")}[self.family]
        return {"family": self.family, **{k: getattr(self, k) for k in keys}}


@dataclass(frozen=True)
class LiquidationProblem:
    """Model, impact function, discount rate ``delta`` and position ``theta``."""

    model: ValidatedModel
    impact: ImpactFunction
    delta: float
    theta: float
    g: BoundarySpec

    def __post_init__(self):
        object.__setattr__(self, "model", validate_model(self.model))
        if not self.delta > 0:
            raise ValidationError(f"delta must be positive, got {self.delta}")
        if not self.theta >= 0:
            raise ValidationError(f"theta must be >= 0, got {self.theta}")
        lo = self.g.c0 - self.theta - 1.0
        hi = float(self.g.value(self.theta))
        grid = np.linspace(lo, hi, 257)
        vals = self.impact(grid)
        if np.any(np.diff(vals) < -1e-12 * np.max(np.abs(vals))):
            raise ValidationError("impact function must be nondecreasing on the trading range")
        if np.any(vals <= 0):
            raise ValidationError("impact function must be positive on the trading range")

    @classmethod
    def from_market(cls, rho, sigma, sigma_hat, beta, impact, delta, theta, g, domain=(-50, 50)):
        """Build the OU model with drift ``rho*sigma*sigma_hat - beta*x`` and volatility ``sigma_hat``."""
        model = DiffusionModel.ornstein_uhlenbeck(beta, sigma=sigma_hat,
                                                  alpha=rho * sigma * sigma_hat, domain=domain)
        return cls(validate_model(model), impact, delta, theta, g)


def continuous_proceeds(p: LiquidationProblem, rtol: float = 1e-11, atol: float = 1e-14) -> float:
    """``int_0^theta f(g(l)) E[exp(-delta tau_l)] dl`` in one adaptive sweep.

    The exponent of the transform and the proceeds are integrated together
    in the variable ``s = l**p`` of the boundary, which also removes the
    singular slope of root-type boundaries at zero.
    """
    if p.theta == 0:
        return 0.0
    g = p.g
    u = get_solver(p.model, p.delta)
    u.ensure(g.c0, float(g.value(p.theta)))
    jac, level, _ = boundary_substitution(g)
    inv = 1.0 / g.p

    def rhs(s, y):
        lvl = level(s)
        da = inv * s ** (inv - 1.0) if g.p != 1.0 else 1.0
        return [jac(s) * u(lvl), float(p.impact(lvl)) * da * math.exp(-y[0])]

    sol = solve_ivp(rhs, (0.0, p.theta ** g.p), [0.0, 0.0], method="DOP853",
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise NumericalError(f"proceeds integration failed: {sol.message}")
    return float(sol.y[1, -1])


def discrete_proceeds(p: LiquidationProblem, eps: float) -> float:
    """Expected proceeds of the block strategy with block size ``eps``.

    Sum over blocks ``n = 0 .. ceil(theta/eps) - 1`` of the transform of the
    ``n``-th jump time times ``int_0^w f(g(n eps) - x) dx``; the last block
    ``w`` is the remainder so both strategies sell exactly ``theta``.
    """
    if not eps > 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    if p.theta == 0:
        return 0.0
    if eps > p.theta:
        raise ValidationError(f"eps={eps} exceeds the position theta={p.theta}")
    n_blocks = math.ceil(p.theta / eps - 1e-12)
    exps, _ = discrete_cell_exponents(LaplaceQuery(p.model, p.g, p.delta,
                                                   (n_blocks - 1) * eps, eps))
    exps = np.concatenate(([0.0], exps))[:n_blocks]
    if exps.size < n_blocks:
        raise NumericalError("block count and cell count disagree")
    transforms = np.exp(-np.cumsum(exps))
    terms = []
    for n in range(n_blocks):
        w = min(eps, p.theta - n * eps)
        terms.append(transforms[n] * p.impact.block_integral(float(p.g.value(n * eps)), w))
    return math.fsum(terms)


def proceeds_report(p: LiquidationProblem, eps_values: Sequence[float]) -> dict:
    """Continuous proceeds, per-eps discrete proceeds, gaps and gap/eps."""
    cont = continuous_proceeds(p)
    rows = []
    for eps in eps_values:
        disc = discrete_proceeds(p, eps)
        gap = abs(disc - cont)
        rows.append({"eps": eps, "discrete": disc, "gap": gap, "gap_over_eps": gap / eps})
    return {"continuous": cont, "discrete": rows}
