"""Parametric spectrally positive Lévy processes and their Laplace exponents.

Three families are supported:

* :class:`BMDrift` -- ``X_t = -mu t + sigma B_t``;
* :class:`CPExpDrift` -- drift ``-mu`` plus compound Poisson jumps at rate ``c``
  with ``Exp(rho)`` sizes;
* :class:`Meromorphic` -- linear coefficient ``a``, Gaussian part ``sigma`` and a
  finite mixture of exponential jump densities, parameterised by atoms
  ``(a_i, rho_i)``.

Every model reduces to the same canonical form

    psi(beta) = m beta + sigma^2 beta^2 / 2 - beta * sum_i c_i / (beta + rho_i)

where ``m`` is the drift magnitude (the process drifts at rate ``-m`` between
jumps), ``c_i`` are jump intensities and ``rho_i`` the exponential rates of the
jump sizes.  All numerics below work on that form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

__all__ = [
    "BMDrift",
    "CPExpDrift",
    "Meromorphic",
    "LevyModel",
    "ModelError",
    "DomainError",
    "ValidationReport",
    "psi",
    "psi_derivative",
    "psi_raw",
    "validate",
    "esscher",
]


class ModelError(ValueError):
    """Parameters outside a family's admissible set."""


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ModelError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class Canonical:
    drift: float
    sigma: float
    rates: np.ndarray  # jump intensities c_i
    sizes: np.ndarray  # exponential rates rho_i of the jump sizes

    @property
    def boundary(self) -> float:
        """Exponential-moment boundary r (psi finite exactly on (-r, inf))."""
        return float(self.sizes[0]) if self.sizes.size else math.inf

    @property
    def total_rate(self) -> float:
        return math.fsum(self.rates.tolist())


@dataclass(frozen=True)
class BMDrift:
    """Brownian motion with drift ``-mu``."""

    mu: float
    sigma: float

    def __post_init__(self):
        mu = _finite("mu", self.mu)
        sigma = _finite("sigma", self.sigma)
        # mu = 0 is admitted so that the Esscher transform at theta0 stays in the family
        if mu < 0:
            raise ModelError(f"BMDrift needs mu >= 0, got {mu}")
        if sigma <= 0:
            raise ModelError(f"BMDrift needs sigma > 0, got {sigma}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @cached_property
    def canonical(self) -> Canonical:
        return Canonical(self.mu, self.sigma, np.zeros(0), np.zeros(0))


@dataclass(frozen=True)
class CPExpDrift:
    """Drift ``-mu`` plus jumps at rate ``c`` with ``Exp(rho)`` sizes."""

    mu: float
    c: float
    rho: float

    def __post_init__(self):
        for name in ("mu", "c", "rho"):
            value = _finite(name, getattr(self, name))
            if value <= 0:
                raise ModelError(f"CPExpDrift needs {name} > 0, got {value}")
            object.__setattr__(self, name, value)

    @cached_property
    def canonical(self) -> Canonical:
        return Canonical(self.mu, 0.0, np.array([self.c]), np.array([self.rho]))


@dataclass(frozen=True)
class Meromorphic:
    """Finite meromorphic model.

    ``psi(beta) = -a beta + sigma^2 beta^2/2
    + sum_i a_i rho_i e^{-rho_i} (1/(beta+rho_i) - 1/rho_i + beta/rho_i^2)
    - beta sum_i a_i e^{-2 rho_i} (rho_i + 1)/rho_i``

    so the jump measure is ``sum_i a_i e^{-rho_i} rho_i e^{-rho_i x} dx``.
    """

    a: float
    sigma: float
    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        a = _finite("a", self.a)
        sigma = _finite("sigma", self.sigma)
        if sigma < 0:
            raise ModelError(f"sigma must be >= 0, got {sigma}")
        atoms = tuple((_finite("a_i", w), _finite("rho_i", r)) for w, r in self.atoms)
        if not atoms:
            raise ModelError("Meromorphic needs at least one atom")
        for w, r in atoms:
            if w <= 0 or r <= 0:
                raise ModelError(f"atoms need a_i > 0 and rho_i > 0, got {(w, r)}")
        rhos = [r for _, r in atoms]
        if any(r1 >= r2 for r1, r2 in zip(rhos, rhos[1:])):
            raise ModelError("atom rates rho_i must be strictly increasing")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "atoms", atoms)
        can = self.canonical
        if np.any(can.rates <= 0):
            raise ModelError("atom weight underflows: a_i * exp(-rho_i) == 0")
        if sigma == 0 and can.drift <= 0:
            # a >= int_0^1 x Pi(dx): the process is a subordinator or a pure drift
            raise ModelError(
                "sigma = 0 requires a < int_0^1 x Pi(dx) (otherwise the process is a subordinator)"
            )

    @cached_property
    def canonical(self) -> Canonical:
        w = np.array([w for w, _ in self.atoms])
        r = np.array([r for _, r in self.atoms])
        c = w * np.exp(-r)
        drift = math.fsum([-self.a, *(c / r).tolist(), *(-(c * np.exp(-r) * (r + 1) / r)).tolist()])
        return Canonical(drift, self.sigma, c, r)

    @classmethod
    def from_canonical(cls, drift: float, sigma: float, rates, sizes) -> "Meromorphic":
        """Build the model whose canonical form has the given drift and jump parts."""
        c = np.asarray(rates, dtype=float)
        r = np.asarray(sizes, dtype=float)
        a = math.fsum([-drift, *(c / r).tolist(), *(-(c * np.exp(-r) * (r + 1) / r)).tolist()])
        atoms = tuple(zip((c * np.exp(r)).tolist(), r.tolist()))
        return cls(a, sigma, atoms)


LevyModel = Union[BMDrift, CPExpDrift, Meromorphic]


def _sum_atoms(terms: np.ndarray):
    if terms.shape[-1] == 0:
        return 0.0
    if terms.ndim == 1 and not np.iscomplexobj(terms):
        return math.fsum(terms.tolist())
    return np.sum(terms, axis=-1)


def psi_raw(model: LevyModel, beta, order: int = 0):
    """Rational expression of psi (or a derivative) with no domain check.

    Accepts real or complex scalars/arrays.  Beyond ``-r`` this is the
    meromorphic continuation, not the Laplace exponent.
    """
    can = model.canonical
    b = np.asarray(beta)
    bb = b[..., None]
    c, r = can.rates, can.sizes
    s2 = can.sigma ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        if order == 0:
            poly = can.drift * b + 0.5 * s2 * b * b
            terms = -bb * c / (bb + r)
        elif order == 1:
            poly = can.drift + s2 * b
            terms = -c * r / (bb + r) ** 2
        elif order == 2:
            poly = s2 + 0 * b
            terms = 2 * c * r / (bb + r) ** 3
        elif order == 3:
            poly = 0 * b
            terms = -6 * c * r / (bb + r) ** 4
        else:
            raise ValueError(f"order must be 0..3, got {order}")
        out = np.asarray(poly + _sum_atoms(terms))
    return out.item() if out.ndim == 0 else out


def psi(model: LevyModel, beta):
    """Laplace exponent ``log E[exp(-beta X_1)]``; ``+inf`` left of the boundary."""
    r = model.canonical.boundary
    b = np.asarray(beta, dtype=float)
    if b.ndim == 0:
        bf = float(b)
        if bf == 0.0:
            return 0.0
        if bf <= -r:
            return math.inf
        return float(psi_raw(model, bf))
    out = np.full(b.shape, math.inf)
    ok = b > -r
    if np.any(ok):
        out[ok] = psi_raw(model, b[ok])
    out[b == 0] = 0.0
    return out


def psi_derivative(model: LevyModel, beta, order: int = 1):
    """Derivative of ``psi`` of order 1, 2 or 3 on ``(-r, inf)``."""
    if order not in (1, 2, 3):
        raise ValueError(f"order must be 1, 2 or 3, got {order}")
    r = model.canonical.boundary
    b = np.asarray(beta, dtype=float)
    if np.any(b <= -r):
        raise DomainError(f"psi is infinite for beta <= -r = {-r}")
    out = psi_raw(model, b if b.ndim else float(b), order)
    return float(out) if b.ndim == 0 else out


@dataclass(frozen=True)
class ValidationReport:
    condition: str  # "i": sigma > 0, "iii": sigma = 0 with finite variation
    psi_prime0: float
    boundary: float
    exists: bool


def validate(model: LevyModel) -> ValidationReport:
    """Classify the model and report whether quasi-stationary distributions exist.

    Construction already rejects subordinators and pure drifts, so a model
    reaching this point satisfies one of the non-degeneracy conditions.
    Finite atom mixtures have finite variation jumps, so the unbounded
    variation case without a Gaussian part never occurs here.
    """
    can = model.canonical
    d0 = float(psi_raw(model, 0.0, 1))
    condition = "i" if can.sigma > 0 else "iii"
    return ValidationReport(condition, d0, can.boundary, d0 > 0 and can.boundary > 0)


def esscher(model: LevyModel, theta: float) -> LevyModel:
    """Exponentially tilted model with exponent ``psi(beta - theta) - psi(-theta)``.

    The result belongs to the same family.  Requires ``0 <= theta < r`` and
    ``psi'(-theta) >= 0``.
    """
    theta = float(theta)
    if theta == 0:
        return model
    can = model.canonical
    if theta < 0 or theta >= can.boundary:
        raise DomainError(f"theta must lie in [0, r) = [0, {can.boundary}), got {theta}")
    slope = float(psi_raw(model, -theta, 1))
    scale = abs(can.drift) + can.sigma ** 2 * theta + 1.0
    if slope < -1e-12 * scale:
        raise DomainError(f"psi'(-theta) = {slope} < 0: tilted process drifts upward")
    slope = max(slope, 0.0)
    if isinstance(model, BMDrift):
        return BMDrift(slope, model.sigma)
    if isinstance(model, CPExpDrift):
        rho = model.rho - theta
        return CPExpDrift(model.mu, model.c * model.rho / rho, rho)
    sizes = can.sizes - theta
    rates = can.rates * can.sizes / sizes
    # psi_theta'(0) = psi'(-theta) fixes the drift of the tilted canonical form
    drift = slope + math.fsum((rates / sizes).tolist())
    return Meromorphic.from_canonical(drift, can.sigma, rates, sizes)
