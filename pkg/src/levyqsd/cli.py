"""Batch front end: ``python -m levyqsd --config run.ini --out results/run``.

The config is an INI file with a ``[run]`` section (task and its parameters)
and a ``[model]`` section::

    [run]
    task = qsd
    lambda = 0.25

    [model]
    family = BMDrift
    mu = 1
    sigma = 1

Meromorphic atoms are written as ``atoms = 1:1, 2:3`` (pairs ``a_i:rho_i``).
Numbers must be plain decimal literals.  Exit status: 0 success, 2 parse
error, 3 invalid model or parameters, 4 failed verification.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import verify
from .levy import BMDrift, CPExpDrift, DomainError, Meromorphic, ModelError, validate
from .montecarlo import SimConfig, TooFewSurvivors, simulate_exit
from .qsd import NormalizationError, build_qsd
from .scale import ConvergenceError, StepSizeError, scale_grid, scale_renewal, scale_series
from .spectral import compute_spectral, phi_extended, phi_prime

TASKS = ("describe", "spectral", "scale", "qsd", "verify-analytic", "verify-mc")
_DECIMAL = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_FAMILY_KEYS = {
    "bmdrift": ("mu", "sigma"),
    "cpexpdrift": ("mu", "c", "rho"),
    "meromorphic": ("a", "sigma", "atoms"),
}


class ParseError(ValueError):
    pass


class ToleranceFailure(RuntimeError):
    pass


def fmt(v) -> str:
    """Round-trip exact float rendering (17 significant digits)."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.16e" % v
    return str(v)


def parse_decimal(text: str, name: str) -> float:
    text = text.strip()
    if not _DECIMAL.fullmatch(text):
        raise ParseError(f"{name}: {text!r} is not a decimal number")
    value = float(text)
    if not math.isfinite(value):
        raise ParseError(f"{name}: {text!r} overflows")
    return value


def parse_int(text: str, name: str) -> int:
    text = text.strip()
    if not re.fullmatch(r"\+?\d+", text):
        raise ParseError(f"{name}: {text!r} is not a non-negative integer")
    return int(text)


def parse_bool(text: str, name: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ParseError(f"{name}: {text!r} is not a boolean")


def parse_pairs(text: str, name: str) -> list[tuple[float, float]]:
    out = []
    for item in text.split(","):
        parts = item.split(":")
        if len(parts) != 2:
            raise ParseError(f"{name}: expected 'u:v' pairs, got {item.strip()!r}")
        out.append((parse_decimal(parts[0], name), parse_decimal(parts[1], name)))
    return out


def parse_list(text: str, name: str) -> list[float]:
    return [parse_decimal(t, name) for t in text.split(",")]


class RunConfig:
    """Parsed ``[run]`` parameters plus the model."""

    def __init__(self, task: str, params: dict[str, str], model_spec: dict[str, str]):
        self.task = task
        self.params = params
        self.model_spec = model_spec

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except OSError as exc:
            raise ParseError(f"cannot read config {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ParseError(f"malformed config: {exc}") from exc
        for section in ("run", "model"):
            if not cp.has_section(section):
                raise ParseError(f"missing [{section}] section")
        extra = [s for s in cp.sections() if s not in ("run", "model")]
        if extra:
            raise ParseError(f"unexpected sections {extra}: exactly one model and one run block allowed")
        params = dict(cp["run"])
        task = params.pop("task", None)
        if task not in TASKS:
            raise ParseError(f"task must be one of {', '.join(TASKS)}; got {task!r}")
        return cls(task, params, dict(cp["model"]))

    # typed accessors; all raise ParseError
    def num(self, key: str, default=None) -> float:
        if key not in self.params:
            if default is None:
                raise ParseError(f"missing parameter {key!r} for task {self.task}")
            return default
        return parse_decimal(self.params[key], key)

    def integer(self, key: str, default: int) -> int:
        return parse_int(self.params[key], key) if key in self.params else default

    def flag(self, key: str, default: bool) -> bool:
        return parse_bool(self.params[key], key) if key in self.params else default

    def build_model(self):
        spec = dict(self.model_spec)
        family = spec.pop("family", "").strip()
        keys = _FAMILY_KEYS.get(family.lower())
        if keys is None:
            raise ParseError(f"unknown model family {family!r}; use BMDrift, CPExpDrift or Meromorphic")
        missing = [k for k in keys if k not in spec]
        unknown = [k for k in spec if k not in keys]
        if missing or unknown:
            raise ParseError(f"{family}: missing {missing}, unknown {unknown}")
        if family.lower() == "meromorphic":
            atoms = tuple(parse_pairs(spec["atoms"], "atoms"))
            return Meromorphic(parse_decimal(spec["a"], "a"), parse_decimal(spec["sigma"], "sigma"), atoms)
        vals = [parse_decimal(spec[k], k) for k in keys]
        return BMDrift(*vals) if family.lower() == "bmdrift" else CPExpDrift(*vals)


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _model_rows(model) -> list[tuple[str, object]]:
    rows: list[tuple[str, object]] = [("family", type(model).__name__)]
    if isinstance(model, Meromorphic):
        rows += [("a", model.a), ("sigma", model.sigma)]
        for i, (w, r) in enumerate(model.atoms, 1):
            rows += [(f"a_{i}", w), (f"rho_{i}", r)]
    elif isinstance(model, BMDrift):
        rows += [("mu", model.mu), ("sigma", model.sigma)]
    else:
        rows += [("mu", model.mu), ("c", model.c), ("rho", model.rho)]
    return rows


def _checks_rows(checks):
    for c in checks:
        print(c.line())
    return [(c.name, c.target, c.achieved, c.tolerance, "pass" if c.passed else "fail") for c in checks]


def _run_task(cfg: RunConfig, out: Path, seed: int | None, threads: int | None) -> list[tuple[str, object]]:
    model = cfg.build_model()
    sd = compute_spectral(model)
    rep = validate(model)
    summary = _model_rows(model) + [
        ("task", cfg.task),
        ("condition", rep.condition),
        ("psi_prime0", rep.psi_prime0),
        ("r", rep.boundary),
        ("exists", rep.exists),
        ("theta0", sd.theta0),
        ("lambda0", sd.lambda0),
    ]
    task_csv = Path(f"{out}-{cfg.task}.csv")

    if cfg.task == "describe":
        pass

    elif cfg.task == "spectral":
        lo = cfg.num("q_min", -sd.lambda0)
        hi = cfg.num("q_max", 10.0)
        n = cfg.integer("n_q", 101)
        qs = np.linspace(lo, hi, n)
        rows = [(q, phi_extended(sd, q), phi_prime(sd, q)) for q in qs]
        _write_csv(task_csv, ["q", "phi", "phi_prime"], rows)

    elif cfg.task == "scale":
        q = cfg.num("q")
        h = cfg.num("h", 1e-3)
        x_max = cfg.num("x_max", 5.0)
        method = cfg.params.get("method", "closed_form").strip()
        if method == "closed_form":
            sg = scale_grid(model, q, h, x_max)
        elif method == "series":
            sg = scale_series(model, q, h, x_max)
        elif method == "renewal":
            sg = scale_renewal(model, q, cfg.num("r", 0.0), h, x_max)
        else:
            raise ParseError(f"method must be closed_form, series or renewal; got {method!r}")
        _write_csv(task_csv, ["x", "value"], zip(sg.xs, sg.values))
        summary += [("q", q), ("method", sg.method.value), ("err_estimate", sg.err_estimate)]

    elif cfg.task == "qsd":
        lam = cfg.num("lambda")
        if not sd.has_qsd or lam > sd.lambda0:
            raise DomainError(
                f"lambda = {lam} exceeds lambda0 = {sd.lambda0}: quasi-stationary distributions "
                "exist exactly for decay rates in (0, lambda0]")
        qsd = build_qsd(model, sd, lam, h=cfg.num("h", 1e-3), x_max=cfg.num("x_max", 50.0))
        dens = qsd.lam * np.asarray(qsd.grid.values)
        _write_csv(task_csv, ["x", "density", "cdf"], zip(qsd.xs, dens, qsd.cdf_table))
        summary += [("lambda", qsd.lam), ("mass", qsd.mass), ("tail_rate", qsd.tail_rate),
                    ("tail_coeff", qsd.tail_coeff)]

    elif cfg.task == "verify-analytic":
        checks = verify.analytic_checks(model, cfg.num("positivity_x_max", 50.0))
        _write_csv(task_csv, ["name", "target", "achieved", "tolerance", "result"], _checks_rows(checks))
        summary += [("checks", len(checks)), ("failed", sum(not c.passed for c in checks))]
        if not all(c.passed for c in checks):
            raise ToleranceFailure(summary)

    elif cfg.task == "verify-mc":
        mc = SimConfig(
            dt=cfg.num("dt", 1e-3),
            horizon=cfg.num("horizon") if "horizon" in cfg.params else None,
            n_paths=cfg.integer("n_paths", 100_000),
            seed=seed if seed is not None else cfg.integer("seed", 0),
            bridge_correction=cfg.flag("bridge_correction", True),
            threads=threads,
        )
        pairs = parse_pairs(cfg.params.get("pairs", "1:1, 0.5:0.5, 2:0.25, 1.5:2"), "pairs")
        checks = [verify.exit_laplace(model, sd, x, q, mc) for x, q in pairs]
        if sd.has_qsd:
            lams = parse_list(cfg.params["lambdas"], "lambdas") if "lambdas" in cfg.params else [sd.lambda0]
            times = parse_list(cfg.params.get("times", "1, 2"), "times")
            for lam in lams:
                qsd = build_qsd(model, sd, lam)
                checks += [verify.survival(model, sd, lam, t, mc, qsd) for t in times]
                if cfg.flag("stationarity", True):
                    checks.append(verify.stationarity(model, sd, lam, max(times), mc, qsd))
        _write_csv(task_csv, ["name", "target", "achieved", "tolerance", "result"], _checks_rows(checks))
        if cfg.flag("raw_tau", False):
            rows = []
            for i, (x, q) in enumerate(pairs):
                s = simulate_exit(model, x, mc, spectral=sd)
                rows += [(i, x, q, t) for t in s.tau]
            _write_csv(Path(f"{out}-tau.csv"), ["pair", "x", "q", "tau"], rows)
        summary += [("seed", mc.seed), ("n_paths", mc.n_paths), ("dt", mc.dt),
                    ("checks", len(checks)), ("failed", sum(not c.passed for c in checks))]
        if not all(c.passed for c in checks):
            raise ToleranceFailure(summary)
    return summary


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="levyqsd", description=__doc__.split("\n")[0])
    ap.add_argument("--config", required=True, help="INI run configuration")
    ap.add_argument("--out", required=True, help="output path prefix")
    ap.add_argument("--seed", type=int, default=None, help="Monte Carlo seed (overrides the config)")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (results do not depend on it)")
    args = ap.parse_args(argv)
    out = Path(args.out)
    summary_path = Path(f"{out}-summary.csv")
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ParseError("--seed must be a 64-bit unsigned integer")
        cfg = RunConfig.load(args.config)
        summary = _run_task(cfg, out, args.seed, args.threads)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ToleranceFailure as exc:
        _write_csv(summary_path, ["key", "value"], exc.args[0] + [("status", "fail")])
        print("error: verification failed", file=sys.stderr)
        return 4
    except (ModelError, DomainError, NormalizationError, TooFewSurvivors, ConvergenceError,
            StepSizeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    _write_csv(summary_path, ["key", "value"], summary + [("status", "ok")])
    for key, value in summary:
        print(f"{key}={fmt(value)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
