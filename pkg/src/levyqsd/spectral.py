"""Right inverse of the Laplace exponent and the critical rates theta0, lambda0."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from ._roots import bracketed_newton
from .levy import BMDrift, CPExpDrift, DomainError, LevyModel, psi_raw

__all__ = [
    "SpectralData",
    "compute_spectral",
    "phi",
    "phi_extended",
    "phi_prime",
]


@dataclass(frozen=True)
class SpectralData:
    """Critical quantities of a model.

    ``theta0`` is the location of the minimum of ``psi`` on the negative
    half-line and ``lambda0 = -psi(-theta0)`` the largest decay rate of a
    quasi-stationary distribution; both are 0 when ``psi'(0) <= 0``.
    ``argmin`` is the global minimiser of ``psi`` on ``(-r, inf)``.
    """

    model: LevyModel
    theta0: float
    lambda0: float
    r: float
    argmin: float

    @property
    def has_qsd(self) -> bool:
        return self.lambda0 > 0


def _argmin(model: LevyModel) -> float:
    can = model.canonical
    if isinstance(model, BMDrift):
        return -model.mu / model.sigma ** 2
    if isinstance(model, CPExpDrift):
        return math.sqrt(model.c * model.rho / model.mu) - model.rho
    # psi' -> -inf at the first pole, so the bracket always holds a sign change
    lo = -can.boundary * (1 - 1e-12)
    d1 = lambda b: psi_raw(model, b, 1)
    d2 = lambda b: psi_raw(model, b, 2)
    hi = 1.0
    while d1(hi) <= 0:
        hi *= 2
    return bracketed_newton(d1, d2, lo, hi, -1.0, 1.0)


@lru_cache(maxsize=128)
def compute_spectral(model: LevyModel) -> SpectralData:
    """Critical rates of ``model``; closed forms for the two elementary families."""
    can = model.canonical
    beta_star = _argmin(model)
    if psi_raw(model, 0.0, 1) <= 0 or beta_star >= 0:
        return SpectralData(model, 0.0, 0.0, can.boundary, beta_star)
    theta0 = -beta_star
    if isinstance(model, BMDrift):
        lambda0 = model.mu ** 2 / (2 * model.sigma ** 2)
    elif isinstance(model, CPExpDrift):
        lambda0 = (math.sqrt(model.mu * model.rho) - math.sqrt(model.c)) ** 2
    else:
        lambda0 = -psi_raw(model, beta_star)
    return SpectralData(model, theta0, lambda0, can.boundary, beta_star)


def _root_above(model: LevyModel, q: float, lo: float, flo: float) -> float:
    """Root of psi(beta) = q on [lo, inf) where psi is increasing and psi(lo) <= q."""
    f = lambda b: psi_raw(model, b) - q
    fp = lambda b: psi_raw(model, b, 1)
    hi = max(1.0, abs(lo))
    while f(hi) <= 0:
        hi *= 2
    if flo == 0:
        return lo
    return bracketed_newton(f, fp, lo, hi, -1.0, 1.0)


def phi_extended(sd: SpectralData, q: float) -> float:
    """Increasing-branch root of ``psi(beta) = q`` for ``q >= -lambda0``.

    Coincides with the right inverse for ``q >= 0`` and is continuous at
    ``q = -lambda0`` where it equals ``-theta0``.
    """
    q = float(q)
    model = sd.model
    if q < 0 and q < -sd.lambda0:
        raise DomainError(f"q = {q} below -lambda0 = {-sd.lambda0}")
    if q == -sd.lambda0 and q < 0:
        return -sd.theta0
    if isinstance(model, BMDrift):
        mu, s2 = model.mu, model.sigma ** 2
        d = mu * mu + 2 * q * s2
        root = math.sqrt(max(d, 0.0))
        if root + mu == 0:
            return 0.0
        return 2 * q / (root + mu)
    if isinstance(model, CPExpDrift):
        mu, c, rho = model.mu, model.c, model.rho
        g = mu * rho - c - q
        dq = g * g + 4 * mu * rho * q
        root = math.sqrt(max(dq, 0.0))
        if g > 0:
            return 2 * rho * q / (root + g)
        return (root - g) / (2 * mu)
    lo = max(sd.argmin, 0.0) if q >= 0 else sd.argmin
    flo = psi_raw(model, lo) - q
    if q < 0 and abs(q + sd.lambda0) < 1e-6 * sd.lambda0:
        # near the double root the Newton slope vanishes; bisect on [-theta0, 0]
        f = lambda b: psi_raw(model, b) - q
        return bracketed_newton(f, lambda b: math.nan, lo, 0.0, -1.0, 1.0, max_newton=0)
    return _root_above(model, q, lo, flo)


def phi(sd: SpectralData, q: float) -> float:
    """Right inverse ``sup{beta >= 0 : psi(beta) = q}`` for ``q >= 0``."""
    if q < 0:
        raise DomainError(f"phi needs q >= 0, got {q}")
    return phi_extended(sd, q)


def phi_prime(sd: SpectralData, q: float) -> float:
    """Derivative ``1 / psi'(Phi(q))``; ``+inf`` at ``q = -lambda0``."""
    b = phi_extended(sd, q)
    d = psi_raw(sd.model, b, 1)
    if d <= 0:
        return math.inf
    return 1.0 / d
