"""Quasi-stationary distributions ``nu_lambda(dx) = lambda W^(-lambda)(x) dx``.

For ``0 < lambda <= lambda0`` the density is tabulated on the closed-form scale
grid, and the part beyond ``x_max`` is handled analytically through the
residue expansion of ``W^(-lambda)``.  The total mass is checked, never
rescaled: a deviation means the scale function is wrong.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .levy import DomainError, LevyModel, psi
from .scale import Expansion, ScaleGrid, grid_laplace, gregory, scale_expansion, scale_grid
from .spectral import SpectralData, compute_spectral, phi_extended, phi_prime

__all__ = [
    "NormalizationError",
    "QsdDensity",
    "OrderVerdict",
    "ScanRow",
    "build_qsd",
    "qsd_laplace",
    "qsd_sample",
    "order_check",
    "lambda_scan",
]

MASS_TOL = 1e-5


class NormalizationError(RuntimeError):
    """Total mass of a candidate density is not 1 within tolerance."""


def _check_lambda(sd: SpectralData, lam: float) -> float:
    lam = float(lam)
    if sd.lambda0 <= 0:
        raise DomainError("lambda0 = 0: psi'(0) <= 0 or no exponential moment, so no "
                          "quasi-stationary distribution exists")
    if not 0 < lam <= sd.lambda0 * (1 + 1e-12):
        raise DomainError(f"lambda = {lam} outside (0, lambda0] = (0, {sd.lambda0}]: "
                          "no quasi-stationary distribution decays at this rate")
    return min(lam, sd.lambda0)


@dataclass(frozen=True)
class _Tail:
    """``lam (c0 + c1 x) exp(b x)`` restricted to ``x > x0``, the slowest expansion term."""

    x0: float
    b: float
    c0: float
    c1: float
    lam: float

    @property
    def weights(self) -> tuple[float, float]:
        # mass of the exponential and of the Gamma(2) part after shifting to x0
        k = -self.b
        amp = self.lam * math.exp(self.b * self.x0)
        return amp * (self.c0 + self.c1 * self.x0) / k, amp * self.c1 / (k * k)

    def sample(self, u: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        k = -self.b
        we, wg = self.weights
        p_exp = we / (we + wg) if we + wg > 0 else 1.0
        e1 = -np.log1p(-u) / k
        gamma_part = rng.random(u.size) >= p_exp
        extra = rng.exponential(1.0 / k, size=u.size)
        return self.x0 + e1 + np.where(gamma_part, extra, 0.0)


def _dominant_tail(exp_: Expansion, lam: float, x0: float) -> _Tail:
    rates = exp_.rates
    top = np.argmax(rates.real)
    if abs(rates[top].imag) > 0:
        raise DomainError("oscillating scale function: no exponential tail")
    return _Tail(x0, float(rates[top].real), float(exp_.c0[top].real), float(exp_.c1[top].real), lam)


@dataclass(frozen=True)
class QsdDensity:
    """Density, CDF table and analytic tail of ``nu_lambda``.

    ``tail_rate`` is ``Phi(-lambda) < 0`` and ``tail_coeff`` is
    ``Phi'(-lambda)`` (infinite at ``lambda = lambda0``, where the tail is
    linear times exponential instead).
    """

    model: LevyModel
    lam: float
    grid: ScaleGrid
    tail_coeff: float
    tail_rate: float
    cdf_table: np.ndarray
    mass: float
    _expansion: Expansion = field(repr=False)
    _tail: _Tail = field(repr=False)

    def __post_init__(self):
        self.cdf_table.setflags(write=False)

    @property
    def xs(self) -> np.ndarray:
        return self.grid.xs

    @property
    def x_max(self) -> float:
        return self.grid.x_max

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.interp(x, self.grid.xs, self.grid.values)
        outside = self._expansion(np.maximum(x, self.x_max))
        out = self.lam * np.where(x <= self.x_max, inside, outside)
        out = np.where(x < 0, 0.0, out)
        return out.item() if out.ndim == 0 else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.interp(x, self.grid.xs, self.cdf_table)
        xt = np.maximum(x, self.x_max)
        b = self._tail.b
        we, wg = self._tail.weights
        y = xt - self.x_max
        # survival of exponential and Gamma(2) parts at y
        s_tail = we * np.exp(b * y) + wg * (1 - b * y) * np.exp(b * y)
        outside = self.cdf_table[-1] + (we + wg) - s_tail
        out = np.where(x <= self.x_max, inside, outside)
        out = np.where(x < 0, 0.0, out)
        return out.item() if out.ndim == 0 else out

    def inverse_cdf(self, u):
        """Quantile on the table by linear interpolation of the CDF (``u < F(x_max)``)."""
        u = np.asarray(u, dtype=float)
        out = np.interp(u, self.cdf_table, self.grid.xs)
        return out.item() if out.ndim == 0 else out

    def laplace(self, beta: float) -> float:
        """Quadrature Laplace transform of the density with exact tail."""
        if beta < 0:
            raise DomainError(f"beta must be >= 0, got {beta}")
        body = gregory(np.exp(-beta * self.grid.xs) * self.grid.values, self.grid.h)
        return self.lam * (body + self._expansion.tail_integral(beta, self.x_max))


def build_qsd(model: LevyModel, spectral: SpectralData | None, lam: float, *,
              h: float = 1e-3, x_max: float = 50.0) -> QsdDensity:
    """Tabulate ``nu_lambda`` for ``0 < lambda <= lambda0``."""
    sd = spectral or compute_spectral(model)
    lam = _check_lambda(sd, lam)
    sg = scale_grid(model, -lam, h, x_max)
    exp_ = scale_expansion(model, -lam)
    vals = sg.values
    if np.min(vals) < -1e-10 * max(1.0, float(np.max(np.abs(vals)))):
        raise NormalizationError(f"W^(-{lam}) takes negative values; not a density")
    cdf = lam * cumulative_trapezoid(vals, dx=h, initial=0.0)
    mass = lam * grid_laplace(model, sg, 0.0)
    if abs(mass - 1) > MASS_TOL:
        raise NormalizationError(f"mass of nu_{lam} is {mass!r}, expected 1 within {MASS_TOL}")
    tail = _dominant_tail(exp_, lam, x_max)
    return QsdDensity(model, lam, sg, phi_prime(sd, -lam), phi_extended(sd, -lam),
                      cdf, mass, exp_, tail)


def qsd_laplace(model: LevyModel, lam: float, beta: float, spectral: SpectralData | None = None) -> float:
    """``int exp(-beta x) nu_lambda(dx) = lambda / (psi(beta) + lambda)``."""
    sd = spectral or compute_spectral(model)
    lam = _check_lambda(sd, lam)
    if beta < 0:
        raise DomainError(f"beta must be >= 0, got {beta}")
    return lam / (psi(model, beta) + lam)


def qsd_sample(qsd: QsdDensity, n: int, rng) -> np.ndarray:
    """``n`` draws from ``nu_lambda``; ``rng`` is a seed or a numpy Generator."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    rng = np.random.default_rng(rng)
    if n == 0:
        return np.empty(0)
    u = rng.random(n)
    f_end = float(qsd.cdf_table[-1])
    out = np.empty(n)
    body = u < f_end
    out[body] = qsd.inverse_cdf(u[body])
    if not np.all(body):
        ut = (u[~body] - f_end) / (1 - f_end)
        out[~body] = qsd._tail.sample(ut, rng)
    return out


@dataclass(frozen=True)
class OrderVerdict:
    passed: bool
    max_increment_scaled: float  # (lam/lam') (psi + lam') / (psi + lam)
    max_increment_plain: float  # (psi + lam') / (psi + lam)


def order_check(model: LevyModel, lam: float, lam_prime: float, betas,
                spectral: SpectralData | None = None) -> OrderVerdict:
    """Check that both Laplace-ratio functions are non-increasing on ``betas``.

    For ``lam < lam'`` this says ``nu_lam`` is below ``nu_lam'`` in the
    Laplace-transform and Laplace-transform-ratio orders.
    """
    sd = spectral or compute_spectral(model)
    if not 0 < lam <= lam_prime:
        raise DomainError(f"need 0 < lambda <= lambda' (got {lam}, {lam_prime})")
    _check_lambda(sd, lam_prime)
    betas = np.sort(np.asarray(betas, dtype=float))
    if betas.size < 2:
        return OrderVerdict(True, 0.0, 0.0)
    if betas[0] < 0:
        raise DomainError("betas must be >= 0")
    p = np.asarray(psi(model, betas), dtype=float)
    plain = (p + lam_prime) / (p + lam)
    scaled = lam / lam_prime * plain
    inc_p = float(np.max(np.diff(plain)))
    inc_s = float(np.max(np.diff(scaled)))
    slack = 4 * np.finfo(float).eps * max(1.0, float(np.max(plain)))
    return OrderVerdict(bool(inc_p <= slack and inc_s <= slack), inc_s, inc_p)


@dataclass(frozen=True)
class ScanRow:
    lam: float
    min_w: float
    mass: float  # nan when lambda W^(-lambda) is not integrable


def lambda_scan(model: LevyModel, spectral: SpectralData | None, lambdas, x_max: float = 50.0,
                h: float = 1e-3) -> list[ScanRow]:
    """Grid minimum of ``W^(-lambda)`` on ``[0, x_max]`` and mass ``lambda int W^(-lambda)``.

    Positivity and integrability are reported separately; above ``lambda0``
    the mass can still be 1 while the minimum is already negative.
    """
    rows = []
    for lam in lambdas:
        lam = float(lam)
        if lam <= 0:
            raise DomainError(f"lambda must be positive, got {lam}")
        sg = scale_grid(model, -lam, h, x_max)
        try:
            mass = lam * grid_laplace(model, sg, 0.0)
        except DomainError:
            mass = math.nan
        rows.append(ScanRow(lam, float(np.min(sg.values)), mass))
    return rows
