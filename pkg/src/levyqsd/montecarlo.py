"""Monte Carlo simulation of the process killed on going below 0.

Jumps are upward, so exit can only happen along the continuous part of the
path.  Jump times and sizes are drawn exactly.  Between jumps the Gaussian part
is advanced in equal sub-steps of length at most ``dt``, and a
Brownian-bridge test catches crossings inside a step.  Without a Gaussian
part the path is piecewise linear and the simulation is exact.

Every path draws from its own Philox stream keyed by ``(seed, path index)``,
so results depend on ``(seed, n_paths)`` only, never on the thread count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numba
import numpy as np
from numba import njit, prange
from scipy import stats

from .levy import LevyModel, ModelError
from .qsd import QsdDensity, qsd_sample
from .rng import next_exponential, next_normal_pair, next_uniform, stream_init
from .spectral import SpectralData, compute_spectral, phi

__all__ = [
    "SimConfig",
    "ExitSamples",
    "TooFewSurvivors",
    "ConditionalLaw",
    "default_horizon",
    "simulate_exit",
    "estimate_exit_laplace",
    "estimate_survival",
    "conditional_law",
    "yaglom_estimate",
]

# prefer OpenMP; probing an outdated TBB only produces a warning
numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

MIN_SURVIVORS = 1000
# bridge crossing probabilities below exp(-_BRIDGE_CUT) are treated as 0
_BRIDGE_CUT = 40.0


class TooFewSurvivors(RuntimeError):
    pass


def default_horizon(sd: SpectralData) -> float:
    """``80 / lambda0`` capped at 200."""
    if sd.lambda0 <= 0:
        return 200.0
    return min(80.0 / sd.lambda0, 200.0)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    horizon: float | None = None  # None: default_horizon of the model
    n_paths: int = 100_000
    seed: int = 0
    bridge_correction: bool = True
    threads: int | None = None  # must not change results

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.horizon is not None and not self.dt <= self.horizon:
            raise ValueError(f"need dt <= horizon, got dt={self.dt}, horizon={self.horizon}")
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class ExitSamples:
    """Exit times (``inf`` when censored at ``horizon``) and optional observed positions.

    ``x_at[i]`` is the position at ``t_obs`` for paths alive then, ``nan``
    otherwise.
    """

    tau: np.ndarray
    horizon: float
    t_obs: float | None = None
    x_at: np.ndarray | None = None

    @property
    def censored(self) -> np.ndarray:
        return np.isinf(self.tau)

    @property
    def survivors(self) -> np.ndarray:
        if self.x_at is None:
            raise ValueError("no observation time was requested")
        return self.x_at[~np.isnan(self.x_at)]


# --- kernels -------------------------------------------------------------------


@njit
def _jump(st, cum, sizes):
    u = next_uniform(st)
    i = 0
    while i < cum.size - 1 and u > cum[i]:
        i += 1
    return next_exponential(st) / sizes[i]


@njit
def _path_gauss(st, x, drift, sigma, cum, sizes, total, dt, horizon, t_obs, bridge):
    t = 0.0
    xo = np.nan
    pending = t_obs >= 0.0
    if pending and t_obs == 0.0:
        xo = x
        pending = False
    tj = next_exponential(st) / total if total > 0 else np.inf
    s2 = sigma * sigma
    spare = 0.0
    have_spare = False
    while True:
        stop = min(tj, horizon)
        if pending and t_obs < stop:
            stop = t_obs
        nsub = max(1, int(math.ceil((stop - t) / dt - 1e-9)))
        d = (stop - t) / nsub
        sd = sigma * math.sqrt(d)
        for k in range(nsub):
            if have_spare:
                z = spare
                have_spare = False
            else:
                z, spare = next_normal_pair(st)
                have_spare = True
            v = x - drift * d + sd * z
            if v <= 0.0:
                return t + d * x / (x - v), xo
            if bridge:
                e = 2.0 * x * v / (s2 * d)
                if e < _BRIDGE_CUT and next_uniform(st) < math.exp(-e):
                    return t + 0.5 * d, xo
            x = v
            t = t + d
        t = stop
        if pending and t == t_obs:
            xo = x
            pending = False
        if t >= horizon:
            return np.inf, xo
        if t == tj:
            x += _jump(st, cum, sizes)
            tj = t + next_exponential(st) / total


@njit
def _path_linear(st, x, drift, cum, sizes, total, horizon, t_obs):
    t = 0.0
    xo = np.nan
    pending = t_obs >= 0.0
    tj = next_exponential(st) / total
    while True:
        stop = min(tj, horizon)
        cross = t + x / drift
        if pending and t_obs <= stop:
            if t_obs < cross:
                xo = x - drift * (t_obs - t)
            pending = False
        if cross <= stop:
            return cross, xo
        x -= drift * (stop - t)
        t = stop
        if t >= horizon:
            return np.inf, xo
        x += _jump(st, cum, sizes)
        tj = t + next_exponential(st) / total


@njit(parallel=True, cache=True)
def _simulate(x0, seed, drift, sigma, cum, sizes, total, dt, horizon, t_obs, bridge, tau, xo):
    for p in prange(x0.size):
        st = stream_init(seed, np.uint64(p))
        if sigma > 0.0:
            a, b = _path_gauss(st, x0[p], drift, sigma, cum, sizes, total, dt, horizon, t_obs, bridge)
        else:
            a, b = _path_linear(st, x0[p], drift, cum, sizes, total, horizon, t_obs)
        tau[p] = a
        xo[p] = b


# --- public API --------------------------------------------------------------


def _set_threads(threads: int | None) -> None:
    if threads is not None:
        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))


def simulate_exit(model: LevyModel, x0, cfg: SimConfig, t_obs: float | None = None,
                  spectral: SpectralData | None = None) -> ExitSamples:
    """Simulate ``cfg.n_paths`` paths from ``x0`` (scalar or one value per path)."""
    can = model.canonical
    total = can.total_rate
    if not math.isfinite(total):
        raise ModelError("Monte Carlo needs finite jump activity")
    if can.sigma == 0 and not can.drift > 0:
        raise ModelError("without a Gaussian part the drift must point downward")
    horizon = cfg.horizon if cfg.horizon is not None else default_horizon(spectral or compute_spectral(model))
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (cfg.n_paths,)).copy()
    if np.any(x0 < 0) or not np.all(np.isfinite(x0)):
        raise ValueError("starting points must be finite and >= 0")
    if t_obs is not None and not 0 <= t_obs <= horizon:
        raise ValueError(f"t_obs = {t_obs} must lie in [0, horizon = {horizon}]")
    if total > 0:
        cum = np.cumsum(can.rates) / total
        cum[-1] = 1.0
    else:
        cum = np.ones(1)
    sizes = can.sizes if can.sizes.size else np.ones(1)
    tau = np.empty(cfg.n_paths)
    xo = np.empty(cfg.n_paths)
    _set_threads(cfg.threads)
    _simulate(x0, np.uint64(cfg.seed), float(can.drift), float(can.sigma), cum, sizes.astype(float),
              float(total), float(cfg.dt), float(horizon), -1.0 if t_obs is None else float(t_obs),
              bool(cfg.bridge_correction), tau, xo)
    return ExitSamples(tau, float(horizon), t_obs, None if t_obs is None else xo)


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = math.fsum(values.tolist()) / n
    var = math.fsum(((values - mean) ** 2).tolist()) / max(n - 1, 1)
    return mean, math.sqrt(var / n)


def estimate_exit_laplace(model: LevyModel, spectral: SpectralData | None, x: float, q: float,
                          cfg: SimConfig) -> tuple[float, float]:
    """Estimate ``E_x[exp(-q tau), tau < inf]``; target ``exp(-x Phi(q))``.

    Censored paths contribute 0, which biases the estimate by at most
    ``exp(-q horizon)``.
    """
    if q < 0:
        raise ValueError(f"q must be >= 0, got {q}")
    s = simulate_exit(model, x, cfg, spectral=spectral)
    vals = np.where(s.censored, 0.0, np.exp(-q * np.where(s.censored, 0.0, s.tau)))
    return _mean_stderr(vals)


def exit_laplace_target(spectral: SpectralData, x: float, q: float) -> float:
    return math.exp(-x * phi(spectral, q))


def _start_rng(seed: int) -> np.random.Generator:
    # initial positions use a stream disjoint from the path streams
    return np.random.Generator(np.random.Philox(key=np.array([seed, 2 ** 64 - 1], dtype=np.uint64)))


def estimate_survival(model: LevyModel, qsd: QsdDensity, t: float, cfg: SimConfig) -> tuple[float, float]:
    """Fraction of paths started from ``nu_lambda`` alive at ``t``; target ``exp(-lambda t)``."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if cfg.horizon is not None and t > cfg.horizon:
        raise ValueError(f"t = {t} beyond horizon {cfg.horizon}")
    if t == 0:
        return 1.0, 0.0
    x0 = qsd_sample(qsd, cfg.n_paths, _start_rng(cfg.seed))
    s = simulate_exit(model, x0, replace(cfg, horizon=float(t)))
    alive = s.censored.astype(float)
    return _mean_stderr(alive)


@dataclass(frozen=True)
class ConditionalLaw:
    samples: np.ndarray
    ks_stat: float
    critical: float  # 1% two-sided Kolmogorov-Smirnov critical value

    @property
    def n(self) -> int:
        return int(self.samples.size)

    @property
    def passed(self) -> bool:
        return self.ks_stat <= self.critical


def _survivors_at(model, x0, t_obs, cfg) -> np.ndarray:
    if t_obs == 0:
        return np.asarray(x0, dtype=float).copy()
    s = simulate_exit(model, x0, replace(cfg, horizon=float(t_obs)), t_obs=float(t_obs))
    out = s.survivors
    if out.size < MIN_SURVIVORS:
        raise TooFewSurvivors(f"only {out.size} of {cfg.n_paths} paths survive to t = {t_obs}; "
                              f"need {MIN_SURVIVORS}")
    return out


def conditional_law(model: LevyModel, qsd: QsdDensity, t_obs: float, cfg: SimConfig) -> ConditionalLaw:
    """Positions at ``t_obs`` of survivors started from ``nu_lambda``, with KS distance to it."""
    expected = cfg.n_paths * math.exp(-qsd.lam * t_obs)
    if expected < MIN_SURVIVORS:
        raise TooFewSurvivors(f"expected {expected:.0f} survivors at t = {t_obs}; need {MIN_SURVIVORS}")
    x0 = qsd_sample(qsd, cfg.n_paths, _start_rng(cfg.seed))
    surv = _survivors_at(model, x0, t_obs, cfg)
    ks = stats.kstest(surv, qsd.cdf).statistic
    return ConditionalLaw(surv, float(ks), 1.63 / math.sqrt(surv.size))


def yaglom_estimate(model: LevyModel, x0: float, t_obs: float, cfg: SimConfig,
                    qsd: QsdDensity | None = None) -> ConditionalLaw:
    """Law at ``t_obs`` conditioned on survival, from a point mass at ``x0``.

    The KS distance to ``qsd`` (normally ``nu_lambda0``) is a diagnostic only;
    ``nan`` when no reference is given.
    """
    surv = _survivors_at(model, np.full(cfg.n_paths, float(x0)), t_obs, cfg)
    ks = float(stats.kstest(surv, qsd.cdf).statistic) if qsd is not None else math.nan
    return ConditionalLaw(surv, ks, 1.63 / math.sqrt(surv.size))
