"""Named numerical checks with target, achieved value, tolerance and verdict.

Used by the ``verify-analytic`` and ``verify-mc`` CLI tasks and by the
acceptance tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .levy import LevyModel
from .montecarlo import SimConfig, conditional_law, estimate_exit_laplace, estimate_survival
from .qsd import build_qsd, lambda_scan, order_check
from .scale import (grid_laplace, laplace_residual, scale_grid, scale_renewal, scale_series,
                    w_phi)
from .spectral import SpectralData, compute_spectral, phi, phi_extended, phi_prime

__all__ = [
    "Check",
    "triple_agreement",
    "laplace_identity",
    "qsd_mass",
    "positivity_threshold",
    "stochastic_orders",
    "w_phi_suite",
    "exit_laplace",
    "survival",
    "stationarity",
    "analytic_checks",
]


@dataclass(frozen=True)
class Check:
    name: str
    target: float
    achieved: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{self.name}: target={self.target:.10g} achieved={self.achieved:.10g} "
                f"tolerance={self.tolerance:.3g} {verdict}")


def _abs_check(name, target, achieved, tol) -> Check:
    return Check(name, target, achieved, tol, bool(abs(achieved - target) <= tol))


def _q_levels(sd: SpectralData) -> list[float]:
    return [0.0, -sd.lambda0 / 2, -sd.lambda0] if sd.has_qsd else [0.0]


def _lambdas(sd: SpectralData) -> list[float]:
    return [sd.lambda0 / 4, sd.lambda0 / 2, sd.lambda0]


def triple_agreement(model: LevyModel, sd: SpectralData, h: float = 1e-3, x_max: float = 5.0,
                     tol: float = 1e-5) -> list[Check]:
    """Closed form, series and renewal grids agree in sup norm."""
    out = []
    for q in _q_levels(sd):
        cf = scale_grid(model, q, h, x_max)
        se = scale_series(model, q, h, x_max)
        rn = scale_renewal(model, q, 0.0, h, x_max)
        dist = max(cf.sup_distance(se), cf.sup_distance(rn), se.sup_distance(rn))
        out.append(Check(f"scale agreement q={q:.6g}", 0.0, dist, tol, dist <= tol))
    return out


def laplace_pairs(sd: SpectralData) -> list[tuple[float, float]]:
    """Twenty ``(q, beta)`` pairs with ``beta > Phi(|q|) + 0.1``."""
    qs = (_q_levels(sd) + [0.5, 1.0, 2.0, 4.0])[:5]
    pairs = []
    for q in qs:
        floor = phi_extended(sd, abs(q)) + 0.1
        pairs += [(q, floor + d) for d in (0.05, 0.5, 2.0, 6.0)]
    return pairs


def laplace_identity(model: LevyModel, sd: SpectralData, h: float = 1e-3, x_max: float = 50.0,
                     tol: float = 1e-6) -> Check:
    grids = {}
    worst = 0.0
    for q, beta in laplace_pairs(sd):
        if q not in grids:
            grids[q] = scale_grid(model, q, h, x_max)
        worst = max(worst, laplace_residual(model, q, grids[q], beta, sd))
    return Check("laplace identity (20 pairs)", 0.0, worst, tol, worst <= tol)


def qsd_mass(model: LevyModel, sd: SpectralData, tol: float = 1e-5) -> list[Check]:
    out = []
    for lam in _lambdas(sd):
        row = lambda_scan(model, sd, [lam])[0]
        out.append(_abs_check(f"qsd mass lambda={lam:.6g}", 1.0, row.mass, tol))
    return out


def positivity_threshold(model: LevyModel, sd: SpectralData, x_max: float = 50.0,
                         factor: float = 1.05) -> list[Check]:
    at, above = lambda_scan(model, sd, [sd.lambda0, factor * sd.lambda0], x_max=x_max)
    return [
        Check("min W at lambda0", 0.0, at.min_w, 1e-10, at.min_w >= -1e-10),
        Check(f"min W at {factor}*lambda0 < 0", 0.0, above.min_w, 0.0, above.min_w < 0),
    ]


def stochastic_orders(model: LevyModel, sd: SpectralData, beta_max: float = 10.0,
                      n_beta: int = 100) -> Check:
    betas = np.linspace(0.0, beta_max, n_beta)
    worst = -math.inf
    ok = True
    for lam, lam2 in combinations(_lambdas(sd), 2):
        v = order_check(model, lam, lam2, betas, sd)
        worst = max(worst, v.max_increment_scaled, v.max_increment_plain)
        ok &= v.passed
    return Check("Laplace ratio orders: max increment", 0.0, worst, 0.0, bool(ok))


def w_phi_suite(model: LevyModel, sd: SpectralData, h: float = 1e-3, x_max: float = 50.0) -> list[Check]:
    """Monotonicity and limit of ``exp(-Phi(-lam) x) W^(-lam)(x)`` and the r-integral identity."""
    out = []
    xs = np.arange(int(round(x_max / h)) + 1) * h
    for lam in (sd.lambda0 / 2, sd.lambda0):
        w = w_phi(model, sd, lam, xs)
        worst = float(np.min(np.diff(w)))
        # once w_phi has reached its limit the increments are pure rounding
        tol = 64 * np.finfo(float).eps * float(np.max(np.abs(w)))
        out.append(Check(f"w_phi increasing lambda={lam:.6g}", 0.0, worst, tol, worst >= -tol))
    # the limit Phi'(-lam) is infinite at lambda0, so check strictly inside
    for lam in (sd.lambda0 / 4, sd.lambda0 / 2):
        out.append(_abs_check(f"w_phi(x={x_max:g}) limit lambda={lam:.6g}", phi_prime(sd, -lam),
                              w_phi(model, sd, lam, x_max), 1e-4))
    for lam in (sd.lambda0 / 2, sd.lambda0):
        sg = scale_grid(model, -lam, h, x_max)
        for r in (0.0, lam / 2):
            got = grid_laplace(model, sg, phi_extended(sd, -r))
            out.append(_abs_check(f"r-integral lambda={lam:.6g} r={r:.6g}", 1 / (lam - r), got, 1e-5))
    return out


def analytic_checks(model: LevyModel, positivity_x_max: float = 50.0) -> list[Check]:
    sd = compute_spectral(model)
    checks = triple_agreement(model, sd) + [laplace_identity(model, sd)]
    if sd.has_qsd:
        checks += qsd_mass(model, sd)
        checks += positivity_threshold(model, sd, positivity_x_max)
        checks.append(stochastic_orders(model, sd))
        checks += w_phi_suite(model, sd)
    return checks


# --- Monte Carlo -----------------------------------------------------------------


def exit_laplace(model: LevyModel, sd: SpectralData, x: float, q: float, cfg: SimConfig) -> Check:
    est, se = estimate_exit_laplace(model, sd, x, q, cfg)
    target = math.exp(-x * phi(sd, q))
    return _abs_check(f"exit Laplace x={x:g} q={q:g}", target, est, 3 * se)


def survival(model: LevyModel, sd: SpectralData, lam: float, t: float, cfg: SimConfig, qsd=None) -> Check:
    qsd = qsd or build_qsd(model, sd, lam)
    est, se = estimate_survival(model, qsd, t, cfg)
    return _abs_check(f"survival from nu lambda={lam:.6g} t={t:g}", math.exp(-lam * t), est, 3 * se)


def stationarity(model: LevyModel, sd: SpectralData, lam: float, t_obs: float, cfg: SimConfig,
                 qsd=None) -> Check:
    qsd = qsd or build_qsd(model, sd, lam)
    law = conditional_law(model, qsd, t_obs, cfg)
    return Check(f"KS survivors vs nu lambda={lam:.6g} t={t_obs:g} (n={law.n})", 0.0, law.ks_stat,
                 law.critical, law.passed)
