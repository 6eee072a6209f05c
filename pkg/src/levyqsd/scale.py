"""q-scale functions for real q, by closed form, convolution series and renewal equation.

The closed forms come from the partial-fraction expansion of
``1 / (psi(beta) - q)``: every family has a rational Laplace exponent, so

    W^(q)(x) = Re sum_j (c0_j + c1_j x) exp(beta_j x),   x > 0,

where ``beta_j`` runs over the roots of ``psi(beta) = q`` (complex pairs
counted once with a doubled coefficient) and ``c1_j`` is non-zero only at a
double root.  That expansion also supplies exact tails for semi-infinite
integrals beyond the end of a grid.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import fftconvolve

from ._roots import bracketed_newton
from .levy import BMDrift, CPExpDrift, DomainError, LevyModel, Meromorphic, psi, psi_raw
from .spectral import SpectralData, compute_spectral, phi_extended

__all__ = [
    "Method",
    "ScaleGrid",
    "Expansion",
    "ConvergenceError",
    "StepSizeError",
    "scale_expansion",
    "scale_closed_form",
    "scale_grid",
    "scale_series",
    "scale_renewal",
    "meromorphic_roots",
    "grid_laplace",
    "gregory",
    "laplace_residual",
    "potential_density",
    "w_phi",
]

# relative distance in q below which two roots are merged into a double root
_DOUBLE_ROOT_TOL = 1e-10
_ATOM_CUTOFF = 1e-14


class ConvergenceError(RuntimeError):
    pass


class StepSizeError(RuntimeError):
    pass


class Method(enum.Enum):
    CLOSED_FORM = "closed_form"
    SERIES = "series"
    RENEWAL = "renewal"


@dataclass(frozen=True)
class ScaleGrid:
    q: float
    h: float
    xs: np.ndarray
    values: np.ndarray
    method: Method
    err_estimate: float

    def __post_init__(self):
        self.xs.setflags(write=False)
        self.values.setflags(write=False)

    @property
    def x_max(self) -> float:
        return float(self.xs[-1])

    def sup_distance(self, other: "ScaleGrid", x_max: float | None = None) -> float:
        """Sup-norm distance on the common grid points up to ``x_max``."""
        if not math.isclose(self.h, other.h, rel_tol=1e-12):
            raise ValueError("grids have different steps")
        n = min(self.xs.size, other.xs.size)
        if x_max is not None:
            n = min(n, int(round(x_max / self.h)) + 1)
        return float(np.max(np.abs(self.values[:n] - other.values[:n])))


def _make_xs(h: float, x_max: float) -> np.ndarray:
    if h <= 0 or x_max <= 0:
        raise ValueError("need h > 0 and x_max > 0")
    n = int(round(x_max / h))
    if abs(n * h - x_max) > 1e-9 * x_max:
        raise ValueError(f"x_max = {x_max} is not a multiple of h = {h}")
    return h * np.arange(n + 1)


# --- residue expansion -----------------------------------------------------


@dataclass(frozen=True)
class Expansion:
    """``W(x) = Re sum (c0 + c1 x) exp(rate x)`` for ``x > 0``."""

    q: float
    rates: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    w0: float  # right limit W(0+)

    def __call__(self, x, cutoff: float = 0.0):
        x = np.asarray(x, dtype=float)
        keep = np.ones(self.rates.size, dtype=bool)
        if cutoff > 0:
            # drop fast-decaying simple-root terms that are negligible at x = cutoff
            mag = np.abs(self.c0) * np.exp(self.rates.real * cutoff)
            keep = (self.c1 != 0) | (mag >= _ATOM_CUTOFF) | (self.rates.real >= 0)
        xx = x[..., None]
        terms = (self.c0[keep] + self.c1[keep] * xx) * np.exp(self.rates[keep] * xx)
        out = np.sum(terms, axis=-1).real
        out = np.where(x > 0, out, np.where(x == 0, self.w0, 0.0))
        return out.item() if out.ndim == 0 else out

    def decay_rate(self) -> float:
        """Largest real part among the exponential rates."""
        return float(np.max(self.rates.real))

    def tail_integral(self, s: float, x0: float) -> float:
        """``int_{x0}^inf exp(-s x) W(x) dx``; requires ``s`` above every rate."""
        k = s - self.rates
        if np.any(k.real <= 0):
            raise DomainError(f"exp(-{s} x) W(x) is not integrable (rates {self.rates})")
        e = np.exp(-k * x0)
        val = e * (self.c0 / k + self.c1 * (x0 / k + 1 / k ** 2))
        return float(np.sum(val).real)

    def times_exp(self, s: float, x):
        """``exp(-s x) W(x)`` evaluated without forming the two factors separately."""
        x = np.asarray(x, dtype=float)
        xx = x[..., None]
        out = np.sum((self.c0 + self.c1 * xx) * np.exp((self.rates - s) * xx), axis=-1).real
        out = np.where(x > 0, out, np.where(x == 0, self.w0, 0.0))
        return out.item() if out.ndim == 0 else out


def _w0(model: LevyModel) -> float:
    can = model.canonical
    return 0.0 if can.sigma > 0 else 1.0 / can.drift


def _simple(model, roots):
    roots = np.asarray(roots, dtype=complex)
    return roots, 1.0 / np.asarray(psi_raw(model, roots, 1), dtype=complex), np.zeros(roots.size, complex)


def _double(model, root):
    d2 = complex(psi_raw(model, complex(root), 2))
    d3 = complex(psi_raw(model, complex(root), 3))
    return (np.array([root], complex), np.array([-2 * d3 / (3 * d2 * d2)]), np.array([2 / d2]))


def _quadratic_expansion(model, q, a2, a1, a0, degenerate):
    """Roots of ``a2 b^2 + a1 b + a0`` (numerator of psi - q)."""
    disc = a1 * a1 - 4 * a2 * a0
    if any(abs(q - qd) <= _DOUBLE_ROOT_TOL * max(1.0, abs(qd)) for qd in degenerate):
        return _double(model, -a1 / (2 * a2))
    if disc > 0:
        r = math.sqrt(disc)
        # avoid cancellation in the smaller-magnitude root
        big = (-a1 - math.copysign(r, a1)) / (2 * a2) if a1 != 0 else r / (2 * a2)
        small = a0 / (a2 * big) if big != 0 else -big
        return _simple(model, [big, small])
    root = (-a1 + 1j * math.sqrt(-disc)) / (2 * a2)
    rates, c0, c1 = _simple(model, [root])
    return rates, 2 * c0, c1


def _zeta_brackets(model: LevyModel, q: float, upper_lo: float):
    """Negative roots -zeta_i of psi(beta) = q between and beyond the poles."""
    can = model.canonical
    rho = can.sizes
    f = lambda z: psi_raw(model, -z) - q
    fp = lambda z: -psi_raw(model, -z, 1)
    out = []
    brackets = [(upper_lo, rho[0])] if upper_lo is not None else []
    brackets += list(zip(rho[:-1], rho[1:]))
    if can.sigma > 0:
        hi = 2 * rho[-1] + 1
        while f(hi) <= 0:
            hi *= 2
        brackets.append((rho[-1], hi))
    for lo, hi in brackets:
        out.append(bracketed_newton(f, fp, float(lo), float(hi), -1.0, 1.0))
    return out


def _meromorphic_expansion(model: Meromorphic, q: float, sd: SpectralData):
    q_crit = psi_raw(model, sd.argmin)
    rates, c0, c1 = [], [], []

    def add(parts):
        rates.append(parts[0]), c0.append(parts[1]), c1.append(parts[2])

    if abs(q - q_crit) <= _DOUBLE_ROOT_TOL * max(1.0, abs(q_crit)):
        add(_double(model, sd.argmin))
        zetas = _zeta_brackets(model, q, None)
    elif q > q_crit:
        upper = _upper_root(model, q, sd)
        zetas = _zeta_brackets(model, q, -sd.argmin)
        add(_simple(model, [upper]))
    else:
        # complex pair emerging from the minimum of psi
        b = complex(sd.argmin, math.sqrt(2 * (q_crit - q) / psi_raw(model, sd.argmin, 2)))
        for _ in range(100):
            step = (complex(psi_raw(model, b)) - q) / complex(psi_raw(model, b, 1))
            b -= step
            if abs(step) <= 1e-15 * max(1.0, abs(b)):
                break
        else:
            raise ConvergenceError(f"complex root search failed for q = {q}")
        if abs(b.imag) < 1e-12:
            raise ConvergenceError(f"complex root collapsed onto the real axis for q = {q}")
        r_, a_, b_ = _simple(model, [b])
        add((r_, 2 * a_, b_))
        zetas = _zeta_brackets(model, q, None)
    add(_simple(model, [-z for z in zetas]))
    return np.concatenate(rates), np.concatenate(c0), np.concatenate(c1)


def _upper_root(model, q, sd):
    if isinstance(model, Meromorphic) and q >= -sd.lambda0:
        return phi_extended(sd, q)
    f = lambda b: psi_raw(model, b) - q
    hi = max(1.0, abs(sd.argmin))
    while f(hi) <= 0:
        hi *= 2
    return bracketed_newton(f, lambda b: psi_raw(model, b, 1), sd.argmin, hi, -1.0, 1.0)


@lru_cache(maxsize=256)
def scale_expansion(model: LevyModel, q: float) -> Expansion:
    """Residue expansion of ``W^(q)`` for real ``q``."""
    q = float(q)
    if isinstance(model, BMDrift):
        mu, s2 = model.mu, model.sigma ** 2
        parts = _quadratic_expansion(model, q, 0.5 * s2, mu, -q, [-mu * mu / (2 * s2)])
    elif isinstance(model, CPExpDrift):
        mu, c, rho = model.mu, model.c, model.rho
        degenerate = [-(math.sqrt(mu * rho) - math.sqrt(c)) ** 2, -(math.sqrt(mu * rho) + math.sqrt(c)) ** 2]
        parts = _quadratic_expansion(model, q, mu, mu * rho - c - q, -q * rho, degenerate)
    else:
        parts = _meromorphic_expansion(model, q, compute_spectral(model))
    return Expansion(q, *parts, _w0(model))


def meromorphic_roots(model: Meromorphic, q: float, spectral: SpectralData | None = None) -> list[float]:
    """Positive numbers ``zeta_i(q)`` with ``psi(-zeta_i) = q``, sorted.

    One root per gap between consecutive poles, the first lying in
    ``(theta0, rho_1)``; with a Gaussian part there is one more beyond the last
    pole.  At ``q = -lambda0`` the first root equals ``theta0``.
    """
    if not isinstance(model, Meromorphic):
        raise TypeError("meromorphic_roots needs a Meromorphic model")
    sd = spectral or compute_spectral(model)
    q_crit = psi_raw(model, sd.argmin)
    if q < q_crit and not math.isclose(q, q_crit, rel_tol=_DOUBLE_ROOT_TOL, abs_tol=_DOUBLE_ROOT_TOL):
        raise DomainError(f"q = {q} below the minimum {q_crit} of psi: zeta_1 is not real")
    if abs(q - q_crit) <= _DOUBLE_ROOT_TOL * max(1.0, abs(q_crit)):
        return [-sd.argmin] + _zeta_brackets(model, q, None)
    return _zeta_brackets(model, q, -sd.argmin)


# --- closed forms ------------------------------------------------------------


def _hyperbolic(z: float, y: np.ndarray, shift: float):
    """``exp(shift y) sinh(sqrt(z) y)/sqrt(z)`` and ``exp(shift y) cosh(sqrt(z) y)``.

    Both are entire in ``z``; negative ``z`` gives the trigonometric forms and
    a short Taylor series covers ``|z y^2|`` small.
    """
    t = z * y * y
    small = np.abs(t) < 1e-2
    ex = np.exp(shift * y)
    s = y * (1 + t / 6 * (1 + t / 20 * (1 + t / 42 * (1 + t / 72))))
    c = 1 + t / 2 * (1 + t / 12 * (1 + t / 30 * (1 + t / 56)))
    s, c = s * ex, c * ex
    if z > 0:
        r = math.sqrt(z)
        with np.errstate(over="ignore"):
            up = np.exp((shift + r) * y)
            dn = np.exp((shift - r) * y)
        s = np.where(small, s, (up - dn) / (2 * r))
        c = np.where(small, c, (up + dn) / 2)
    elif z < 0:
        w = math.sqrt(-z)
        s = np.where(small, s, ex * np.sin(w * y) / w)
        c = np.where(small, c, ex * np.cos(w * y))
    return s, c


def scale_closed_form(model: LevyModel, q: float, x, spectral: SpectralData | None = None):
    """``W^(q)(x)`` from the explicit formulas; 0 for ``x < 0``.

    Works for every real ``q``; below ``-lambda0`` the result oscillates in sign.
    """
    q = float(q)
    x = np.asarray(x, dtype=float)
    xp = np.maximum(x, 0.0)
    if isinstance(model, BMDrift):
        mu, s2 = model.mu, model.sigma ** 2
        s, _ = _hyperbolic(mu * mu + 2 * q * s2, xp / s2, -mu)
        out = 2 * s
    elif isinstance(model, CPExpDrift):
        mu, c, rho = model.mu, model.c, model.rho
        g = mu * rho - c - q
        dq = g * g + 4 * mu * rho * q
        s, ch = _hyperbolic(dq, xp / (2 * mu), -g)
        out = (2 * rho - g / mu) * s + ch / mu
    else:
        exp_ = scale_expansion(model, q)
        out = exp_(xp)
    out = np.where(x >= 0, out, 0.0)
    return out.item() if out.ndim == 0 else out


def scale_grid(model: LevyModel, q: float, h: float = 1e-3, x_max: float = 50.0) -> ScaleGrid:
    """Closed-form tabulation of ``W^(q)`` on ``0, h, ..., x_max``."""
    xs = _make_xs(h, x_max)
    if isinstance(model, Meromorphic):
        exp_ = scale_expansion(model, float(q))
        vals = np.asarray(exp_(xs, cutoff=h), dtype=float)
    else:
        vals = np.asarray(scale_closed_form(model, q, xs), dtype=float)
    err = 64 * np.finfo(float).eps * float(np.max(np.abs(vals)))
    return ScaleGrid(float(q), h, xs, vals, Method.CLOSED_FORM, err)


# --- convolution series ------------------------------------------------------


def _trap_conv(f: np.ndarray, g: np.ndarray, h: float) -> np.ndarray:
    """Trapezoid rule for ``int_0^x f(x-y) g(y) dy`` at every grid point."""
    n = f.size
    full = fftconvolve(f, g)[:n]
    out = h * (full - 0.5 * (f * g[0] + f[0] * g))
    out[0] = 0.0
    return out


def _series_values(w: np.ndarray, q: float, h: float, max_terms: int):
    total = w.copy()
    term = w.copy()
    if q == 0:
        return total, 0.0, 1
    prev = math.inf
    peak = float(np.max(np.abs(w)))
    for k in range(1, max_terms + 1):
        term = q * _trap_conv(term, w, h)
        total += term
        tn = float(np.max(np.abs(term)))
        peak = max(peak, tn)
        size = float(np.max(np.abs(total)))
        if tn < 1e-10 * size:
            if peak * 1e-16 > 1e-10 * size:
                raise ConvergenceError(
                    f"convolution series for q = {q} lost all accuracy to cancellation "
                    f"(largest term {peak:.3g}, sum {size:.3g})"
                )
            return total, tn, k + 1
        if k > 20 and tn >= prev:
            break
        prev = tn
    raise ConvergenceError(
        f"convolution series for q = {q} did not converge in {max_terms} terms "
        "(grid too coarse or |q| * int W too large)"
    )


def scale_series(model: LevyModel, q: float, h: float = 1e-3, x_max: float = 5.0,
                 max_terms: int = 200) -> ScaleGrid:
    """``W^(q) = sum_k q^k W^{*(k+1)}`` with trapezoid convolutions of the 0-scale function."""
    q = float(q)
    base = scale_grid(model, 0.0, h, x_max)
    w = np.array(base.values)
    vals, trunc, _ = _series_values(w, q, h, max_terms)
    err = trunc
    if q != 0 and w.size > 4:
        # Richardson estimate of the O(h^2) quadrature error from the 2h grid
        coarse, _, _ = _series_values(w[::2].copy(), q, 2 * h, max_terms)
        err += float(np.max(np.abs(vals[::2] - coarse))) / 3
    return ScaleGrid(q, h, base.xs, vals, Method.SERIES, err)


# --- renewal equation --------------------------------------------------------


def _renewal_solve(wr: np.ndarray, k: float, h: float) -> np.ndarray:
    n = wr.size
    diag = 1.0 - k * 0.5 * h * wr[0]
    if abs(diag) < 1e-8:
        raise StepSizeError(f"renewal diagonal weight {diag} too close to 0; reduce h")
    f = np.empty(n)
    f[0] = wr[0]
    for i in range(1, n):
        acc = np.dot(wr[i - 1:0:-1], f[1:i]) + 0.5 * wr[i] * f[0]
        f[i] = (wr[i] + k * h * acc) / diag
    return f


def scale_renewal(model: LevyModel, q: float, r: float = 0.0, h: float = 1e-3, x_max: float = 5.0,
                  base: ScaleGrid | None = None) -> ScaleGrid:
    """Solve ``f = W^(r) + (q - r) W^(r) * f`` by trapezoid forward substitution."""
    q, r = float(q), float(r)
    if r < 0:
        raise DomainError(f"renewal needs r >= 0, got {r}")
    if base is None:
        base = scale_grid(model, r, h, x_max)
    elif base.q != r or not math.isclose(base.h, h) or not math.isclose(base.x_max, x_max):
        raise ValueError("base grid does not match (r, h, x_max)")
    wr = np.array(base.values)
    if q == r:
        return ScaleGrid(q, h, base.xs, wr, Method.RENEWAL, base.err_estimate)
    vals = _renewal_solve(wr, q - r, h)
    err = base.err_estimate
    if wr.size > 4:
        coarse = _renewal_solve(wr[::2].copy(), q - r, 2 * h)
        err += float(np.max(np.abs(vals[::2] - coarse))) / 3
    return ScaleGrid(q, h, base.xs, vals, Method.RENEWAL, err)


# --- integrals and derived quantities ------------------------------------------


_GREGORY = np.array([3 / 8, 7 / 6, 23 / 24])


def gregory(f: np.ndarray, h: float) -> float:
    """Trapezoid rule with Gregory end corrections (fourth order for smooth ``f``)."""
    n = f.size
    if n < 7:
        return float(trapezoid(f, dx=h))
    w = np.ones(n)
    w[:3] = _GREGORY
    w[-3:] = _GREGORY[::-1]
    return h * math.fsum((w * f).tolist())


def grid_laplace(model: LevyModel, sg: ScaleGrid, s: float) -> float:
    """``int_0^inf exp(-s x) W^(q)(x) dx``: end-corrected trapezoid on the grid plus exact tail."""
    body = gregory(np.exp(-s * sg.xs) * sg.values, sg.h)
    return body + scale_expansion(model, sg.q).tail_integral(s, sg.x_max)


def laplace_residual(model: LevyModel, q: float, sg: ScaleGrid, beta: float,
                     spectral: SpectralData | None = None) -> float:
    """``|int exp(-beta x) W^(q)(x) dx - 1/(psi(beta) - q)|`` for ``beta > Phi(|q|) + 0.1``."""
    sd = spectral or compute_spectral(model)
    floor = phi_extended(sd, abs(q)) + 0.1
    if beta <= floor:
        raise DomainError(f"beta = {beta} must exceed Phi(|q|) + 0.1 = {floor}")
    if sg.q != float(q):
        raise ValueError("grid was built for a different q")
    return abs(grid_laplace(model, sg, beta) - 1.0 / (psi(model, beta) - q))


def potential_density(model: LevyModel, spectral: SpectralData, q: float, x: float, y: float) -> float:
    """Density ``u^(q)(x, y)`` of the q-potential measure killed below 0."""
    if q < 0 or x < 0 or y < 0:
        raise DomainError("potential density needs q, x, y >= 0")
    if q == 0 and psi_raw(model, 0.0, 1) < 0:
        raise DomainError("q = 0 needs psi'(0) >= 0 (almost sure exit)")
    ph = phi_extended(spectral, q)
    val = math.exp(-x * ph) * scale_closed_form(model, q, y) - scale_closed_form(model, q, y - x)
    return max(val, 0.0) if val > -1e-12 else val


def w_phi(model: LevyModel, spectral: SpectralData, lam: float, x):
    """``exp(-Phi(-lam) x) W^(-lam)(x)``, increasing in ``x`` for ``0 < lam <= lambda0``."""
    if not 0 < lam <= spectral.lambda0 * (1 + 1e-12):
        raise DomainError(f"lambda = {lam} outside (0, lambda0 = {spectral.lambda0}]")
    lam = min(lam, spectral.lambda0)
    ph = phi_extended(spectral, -lam)
    return scale_expansion(model, -lam).times_exp(ph, x)
