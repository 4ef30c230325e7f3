"""Planted scalar problems whose endpoint value encodes a hidden mean.

A vector of coefficients ``lambda_0..lambda_{n-1}`` in [-1, 1] is planted
into ``g(y) = 1 + sum_i lambda_i h_i(y)`` via disjoint smooth bumps on the
uniform partition of [eta, eta + 1/2]; the problem to solve is
``z' = f(z) = 1/g(z)`` on [0, 1].  Integrating 1/f across the bump region
shows that the endpoint satisfies

    z(1) = eta + 1 - mean_scale * n^-(r+rho+1) * sum_i lambda_i,

so any estimate of z(1) recovers the planted mean after an affine map that
amplifies errors by exactly ``n^(r+rho) / mean_scale``.  These problems are
verification fixtures: solving them and recovering the mean checks solver
accuracy at the amplification scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import HolderParams, IvpProblem
from .scalar import inverse_class_params

__all__ = [
    "BumpSpec",
    "PlantedProblem",
    "make_bump",
    "make_planted",
    "recover_mean",
    "bump_template",
    "TEMPLATE_UNIT_INTEGRAL",
    "TEMPLATE_SUP_DERIV",
]

# One-time constants of the unit-peak template psi(u)/psi(1/2) with
# psi(u) = exp(-1/(u(1-u))): its integral over [0, 1] and the sup norms of
# its first three derivatives.  Frozen from a high-precision quadrature and
# extrema scan; cross-checked in the test suite.
TEMPLATE_PEAK = math.exp(-4.0)
TEMPLATE_UNIT_INTEGRAL = 0.3838172639958343
TEMPLATE_SUP_DERIV = {
    0: 1.0,
    1: 4.235640422134888,
    2: 32.254257570540753,
    3: 456.74360320333440,
}


def bump_template(u, order: int = 0):
    """Derivatives of the unit-peak bump template, vanishing outside (0, 1)."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = (u > 0.0) & (u < 1.0)
    if not np.any(inside):
        return out if out.ndim else float(out)
    ui = u[inside]
    s = ui * (1.0 - ui)
    sp = 1.0 - 2.0 * ui
    psi = np.exp(4.0 - 1.0 / s)  # includes the 1/peak normalization
    if order == 0:
        val = psi
    else:
        w = sp / s ** 2
        if order == 1:
            val = psi * w
        else:
            wp = -2.0 / s ** 2 - 2.0 * sp ** 2 / s ** 3
            if order == 2:
                val = psi * (w ** 2 + wp)
            elif order == 3:
                wpp = 12.0 * sp / s ** 3 + 6.0 * sp ** 3 / s ** 4
                val = psi * (w ** 3 + 3.0 * w * wp + wpp)
            else:
                raise ValueError("template derivatives available up to order 3")
    out[inside] = val
    return out if out.ndim else float(out)


def default_peak_coeff(r: int, rho: float, H: float) -> float:
    """Largest peak coefficient keeping the bump sums inside the class.

    The binding constraints are the Holder condition of the r-th derivative
    for nearby points (template derivative of order r+1) and for far pairs
    (twice the order-r sup); a 5% safety margin absorbs the frozen-constant
    rounding.
    """
    near = TEMPLATE_SUP_DERIV[r + 1]
    far = 2.0 * TEMPLATE_SUP_DERIV[r]
    return 0.95 * H / max(near, far)


@dataclass
class BumpSpec:
    """One scaled bump: support, peak and mass laws, evaluable profile."""

    support: tuple
    peak: float
    mass: float
    scale: float          # multiplies the unit-peak template
    width: float

    def eval(self, y, order: int = 0):
        u = (np.asarray(y, dtype=float) - self.support[0]) / self.width
        return self.scale * bump_template(u, order) / self.width ** order


def make_bump(i: int, n: int, params: HolderParams, eta: float = 0.0,
              peak_coeff: Optional[float] = None) -> BumpSpec:
    """The i-th bump on the uniform partition of [eta, eta + 1/2].

    Peak value ``peak_coeff * width^(r+rho)`` at the support midpoint; mass
    ``peak_coeff * unit_integral * width^(r+rho+1)``.  The bump vanishes
    with all derivatives at both support endpoints.
    """
    if not 0 <= i < n:
        raise ValueError("bump index must satisfy 0 <= i < n")
    c1 = default_peak_coeff(params.r, params.rho, params.H) \
        if peak_coeff is None else float(peak_coeff)
    width = 1.0 / (2.0 * n)
    lo = eta + i * width
    scale = c1 * width ** params.order
    return BumpSpec(support=(lo, lo + width), peak=scale,
                    mass=scale * width * TEMPLATE_UNIT_INTEGRAL,
                    scale=scale, width=width)


class PlantedProblem:
    """A hidden-mean problem: g = 1 + sum lambda_i h_i, f = 1/g on [0, 1]."""

    def __init__(self, lambdas, params: HolderParams, eta: float = 0.0,
                 peak_coeff: Optional[float] = None):
        lambdas = np.asarray(lambdas, dtype=float)
        if np.any(np.abs(lambdas) > 1.0):
            raise ValueError("planted coefficients must lie in [-1, 1]")
        self.lambdas = lambdas
        self.n = lambdas.size
        self.params_g = params
        self.eta = float(eta)
        self.peak_coeff = default_peak_coeff(params.r, params.rho, params.H) \
            if peak_coeff is None else float(peak_coeff)
        self.width = 1.0 / (2.0 * self.n)
        self.mass_coeff = self.peak_coeff * TEMPLATE_UNIT_INTEGRAL
        # bump mass = mass_coeff * (1/(2n))^(r+rho+1) = mean_scale * n^-(r+rho+1)
        self.mean_scale = self.mass_coeff * 0.5 ** (params.order + 1.0)
        self._bump_scale = self.peak_coeff * self.width ** params.order
        self.problem = IvpProblem(1, self.f, self.derivs,
                                  np.array([self.eta]), (0.0, 1.0),
                                  name="planted_n%d" % self.n)
        self.params_f = self._derive_f_params()

    # -- g and its derivatives (supports are disjoint: one bump per point)

    def g(self, y, order: int = 0):
        y = np.asarray(y, dtype=float)
        u_all = (y - self.eta) / self.width
        idx = np.clip(np.floor(u_all).astype(int), 0, self.n - 1)
        u = u_all - idx
        lam = self.lambdas[idx]
        inside = (u_all > 0.0) & (u_all < self.n)
        base = 1.0 if order == 0 else 0.0
        prof = bump_template(u, order) / self.width ** order
        return base + np.where(inside, lam * self._bump_scale * prof, 0.0)

    def f(self, y):
        y = np.asarray(y, dtype=float)
        flat = y.reshape(-1)
        out = 1.0 / self.g(flat)
        return out.reshape(y.shape)

    def derivs(self, k: int, y):
        y = np.asarray(y, dtype=float).reshape(-1)
        g0 = self.g(y)
        if k == 0:
            return (1.0 / g0).reshape(1)
        g1 = self.g(y, 1)
        if k == 1:
            return (-g1 / g0 ** 2).reshape(1, 1)
        g2 = self.g(y, 2)
        if k == 2:
            return (-g2 / g0 ** 2 + 2.0 * g1 ** 2 / g0 ** 3).reshape(1, 1, 1)
        raise ValueError("planted problems supply derivatives up to order 2")

    def _derive_f_params(self) -> HolderParams:
        """Class declaration for f = 1/g from the g-construction bounds."""
        pg = self.params_g
        gamma = self.peak_coeff * 0.5 ** pg.order    # sup |g - 1|, any n >= 1
        g_lo = 1.0 - gamma
        Dg = [1.0 + gamma]
        for k in range(1, pg.r + 1):
            Dg.append(self.peak_coeff * 0.5 ** (pg.order - k)
                      * TEMPLATE_SUP_DERIV[k])
        Hg = self.peak_coeff * max(TEMPLATE_SUP_DERIV[pg.r + 1],
                                   2.0 * TEMPLATE_SUP_DERIV[pg.r])
        g_params = HolderParams(r=pg.r, rho=pg.rho, D=tuple(Dg), H=Hg, p=g_lo)
        inv = inverse_class_params(g_params, span=0.5)
        return HolderParams(r=pg.r, rho=pg.rho, D=tuple(inv["Dt"]),
                            H=inv["Ht"], p=1.0 / (1.0 + gamma))

    def true_mean(self) -> float:
        return float(np.mean(self.lambdas))

    def closed_form_endpoint(self) -> float:
        """z(1) from the time-1 arrival identity (exact up to rounding)."""
        total = self.mean_scale * self.n ** (-(self.params_g.order + 1.0)) \
            * float(np.sum(self.lambdas))
        return self.eta + 1.0 - total

    def to_entry(self, name: str) -> dict:
        """Declarative fixture entry (loadable by the fixtures module)."""
        return {
            "name": name, "family": "planted", "d": 1,
            "r": self.params_g.r, "rho": self.params_g.rho,
            "D": list(self.params_g.D), "H": self.params_g.H,
            "a": 0.0, "b": 1.0, "eta": [self.eta],
            "lambdas": self.lambdas.tolist(),
            "peak_coeff": self.peak_coeff,
            "mass_coeff": self.mass_coeff,
            "mean_scale": self.mean_scale,
        }


def make_planted(lambdas, params: HolderParams, eta: float = 0.0,
                 peak_coeff: Optional[float] = None) -> PlantedProblem:
    """Build the planted problem for the given coefficients and class."""
    return PlantedProblem(lambdas, params, eta=eta, peak_coeff=peak_coeff)


def recover_mean(z1_est: float, eta: float, n: int, mean_scale: float,
                 order: float) -> float:
    """Invert the endpoint identity: estimate of mean(lambda) from z(1).

    Affine in the estimate; an endpoint error of e maps to a mean error of
    exactly ``e * n^order / mean_scale``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if mean_scale <= 0:
        raise ValueError("mean_scale must be positive")
    return (1.0 - z1_est + eta) / (mean_scale * float(n) ** (-float(order)))


def planted_fixture_from_entry(entry: dict):
    from .fixtures import Fixture
    params = HolderParams(r=int(entry["r"]), rho=float(entry["rho"]),
                          D=tuple(entry["D"]), H=float(entry["H"]))
    planted = PlantedProblem(entry["lambdas"], params,
                             eta=float(entry["eta"][0]),
                             peak_coeff=entry.get("peak_coeff"))
    return Fixture(name=entry["name"], problem=planted.problem,
                   params=planted.params_f, reference=None,
                   y_star=planted.closed_form_endpoint(),
                   meta={"planted": planted, **entry})
