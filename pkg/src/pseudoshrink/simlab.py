"""Monte Carlo harness for the convergence, PRIAL and rOSV studies.

Replication r of every cell uses the generator seeded with base_seed + r,
draws its own Haar eigenbasis and data from it, and returns plain numbers.
Replications may run in worker processes; results are reduced in
replication order, so the CSV output does not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import shrink_gmv, shrink_prec
from .detlim import v_derivatives
from .errors import ArgumentError, PseudoshrinkError
from .plugin_est import PluginContext, hat_v_derivative
from .randmat import SpectralModel, generate_observations, paper_mix_eigenvalues, sample_haar_basis

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "DEFAULT_METHODS",
    "CSV_COLUMNS",
    "load_config",
    "parse_config",
    "run_experiment",
    "write_csv",
    "format_csv",
]

KINDS = ("vconv", "prial", "rosv")

DEFAULT_METHODS = {
    "vconv": ("hat_v0", "hat_v1"),
    "prial": ("mp", "ridge", "mpr", "empirical_bayes", "optimal_ridge", "oracle_nl"),
    "rosv": ("mp", "plugin", "reflexive", "double"),
}

KNOWN_METHODS = {
    "vconv": ("hat_v0", "hat_v1", "hat_v2", "hat_v3"),
    "prial": (
        "mp", "ridge", "mpr", "empirical_bayes", "optimal_ridge", "oracle_nl",
        "true_precision", "mp_plugin", "identity",
    ),
    "rosv": ("mp", "plugin", "reflexive", "double", "true"),
}

CSV_COLUMNS = {
    "vconv": ("dist", "n", "c", "t", "method", "mean_ratio", "sd", "reps", "errors"),
    "prial": ("dist", "n", "c", "method", "prial_pct", "se", "reps", "errors"),
    "rosv": ("dist", "n", "c", "method", "rosv", "se", "reps", "errors"),
}

# a cell is reported as failed when more than this share of replications raise
FAIL_SHARE = 0.20


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    dist: str = "normal"
    n_list: tuple = (100,)
    c_grid: tuple = (2.0,)
    t_grid: tuple = (0.0,)
    reps: int = 100
    base_seed: int = 1
    spectrum: str = "paper_mix"
    methods: tuple = ()
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArgumentError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.dist not in ("normal", "scaled_t5"):
            raise ArgumentError(f"dist must be normal or scaled_t5, got {self.dist!r}")
        if int(self.reps) != self.reps or self.reps < 1:
            raise ArgumentError("reps must be a positive integer")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ArgumentError("workers must be a positive integer")
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "c_grid", tuple(float(c) for c in self.c_grid))
        object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))
        if any(n < 2 for n in self.n_list):
            raise ArgumentError("every n must be >= 2")
        if any(not c > 1.0 for c in self.c_grid):
            raise ArgumentError("every c must be > 1")
        if any(t < 0 for t in self.t_grid):
            raise ArgumentError("every t must be >= 0")
        methods = tuple(self.methods) or DEFAULT_METHODS[self.kind]
        bad = [m for m in methods if m not in KNOWN_METHODS[self.kind]]
        if bad:
            raise ArgumentError(f"unknown {self.kind} methods {bad}; known: {KNOWN_METHODS[self.kind]}")
        object.__setattr__(self, "methods", methods)

    def dimension(self, n: int, c: float) -> int:
        return int(round(c * n))


@dataclass(frozen=True)
class ResultRow:
    kind: str
    dist: str
    n: int
    c: float
    method: str
    value: float
    spread: float
    reps: int
    errors: int
    seed: int
    t: float = float("nan")
    per_rep: tuple = field(default=(), repr=False, compare=False)

    def csv_fields(self) -> list:
        head = [self.dist, self.n, self.c]
        if self.kind == "vconv":
            head.append(self.t)
        return head + [self.method, self.value, self.spread, self.reps, self.errors]


# ---------------------------------------------------------------- config file


_LIST_KEYS = {"n_list", "c_grid", "t_grid", "methods"}
_ALIASES = {"n": "n_list", "c": "c_grid", "t": "t_grid", "seed": "base_seed"}


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse ``key=value`` lines (``#`` starts a comment); lists are comma separated."""
    raw: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ArgumentError(f"config line {lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = _ALIASES.get(key, key)
        raw[key] = value
    raw.update({_ALIASES.get(k, k): v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
    if "kind" not in raw:
        raise ArgumentError("config needs a kind")
    kw: dict = {}
    for key, value in raw.items():
        if key in _LIST_KEYS:
            items = value if isinstance(value, (list, tuple)) else [v.strip() for v in str(value).split(",") if v.strip()]
            kw[key] = tuple(items)
        elif key in ("reps", "base_seed", "workers"):
            try:
                kw[key] = int(value)
            except ValueError as exc:
                raise ArgumentError(f"{key} must be an integer, got {value!r}") from exc
        else:
            kw[key] = str(value)
    try:
        return ExperimentConfig(**kw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ArgumentError):
            raise
        raise ArgumentError(str(exc)) from exc


def load_config(path: str | os.PathLike, **overrides) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), **overrides)


# ---------------------------------------------------------------- one replication


def _eigenvalues(spectrum: str, p: int) -> np.ndarray:
    if spectrum == "paper_mix":
        return paper_mix_eigenvalues(p)
    vals = np.loadtxt(spectrum, delimiter=",", ndmin=1).reshape(-1)
    if vals.size != p:
        raise ArgumentError(f"spectrum file has {vals.size} eigenvalues, the cell needs p={p}")
    return vals


def _draw(cfg: ExperimentConfig, n: int, c: float, rep: int):
    p = cfg.dimension(n, c)
    rng = np.random.default_rng(cfg.base_seed + rep)
    basis = sample_haar_basis(p, rng)
    model = SpectralModel(_eigenvalues(cfg.spectrum, p), basis)
    y = generate_observations(model, n, cfg.dist, seed=rng)
    return model, y


def _vconv_rep(cfg: ExperimentConfig, n: int, c: float, rep: int, truth: dict) -> dict:
    model, y = _draw(cfg, n, c, rep)
    ctx = PluginContext.from_data(y)
    out = {}
    for t in cfg.t_grid:
        for method in cfg.methods:
            order = int(method[-1])
            try:
                out[(t, method)] = hat_v_derivative(ctx, order, t) / truth[(t, order)]
            except PseudoshrinkError:
                out[(t, method)] = None
    return out


def _prial_loss(method: str, ctx: PluginContext, model: SpectralModel) -> float:
    if method == "true_precision":
        return shrink_prec.frobenius_loss(model.inverse(), model)
    if method == "mp_plugin":
        return shrink_prec.frobenius_loss(ctx.dof_scale * ctx.mp, model)
    if method == "identity":
        return shrink_prec.frobenius_loss(np.eye(ctx.p), model)
    if method in ("mp", "ridge", "mpr"):
        return shrink_prec.frobenius_loss(shrink_prec.bona_fide(ctx, method).estimate, model)
    return shrink_prec.frobenius_loss(shrink_prec.benchmark(method, ctx, model).estimate, model)


def _prial_rep(cfg: ExperimentConfig, n: int, c: float, rep: int, truth: dict) -> dict:
    model, y = _draw(cfg, n, c, rep)
    ctx = PluginContext.from_data(y)
    # the reference loss uses the Moore-Penrose inverse of the centered sample covariance
    out = {"__base__": shrink_prec.frobenius_loss(ctx.dof_scale * ctx.mp, model)}
    for method in cfg.methods:
        try:
            out[method] = _prial_loss(method, ctx, model)
        except PseudoshrinkError:
            out[method] = None
    return out


def _rosv_weights(method: str, ctx: PluginContext, model: SpectralModel):
    if method == "true":
        return shrink_gmv.true_gmv(model)
    if method == "plugin":
        return shrink_gmv.plugin_weights(ctx.mp)
    if method == "mp":
        return shrink_gmv.bona_fide_alpha_mp(ctx)
    return shrink_gmv.benchmark(method, ctx)


def _rosv_rep(cfg: ExperimentConfig, n: int, c: float, rep: int, truth: dict) -> dict:
    model, y = _draw(cfg, n, c, rep)
    ctx = PluginContext.from_data(y)
    out = {}
    for method in cfg.methods:
        try:
            out[method] = shrink_gmv.rosv(_rosv_weights(method, ctx, model), model)
        except PseudoshrinkError:
            out[method] = None
    return out


_REP_FUNCS = {"vconv": _vconv_rep, "prial": _prial_rep, "rosv": _rosv_rep}


def _run_rep(args):
    cfg, n, c, rep, truth = args
    return _REP_FUNCS[cfg.kind](cfg, n, c, rep, truth)


# ---------------------------------------------------------------- reduction


def _mean_sd(values: list) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return float("nan"), float("nan")
    sd = float(arr.std(ddof=1)) if arr.size > 1 else float("nan")
    return float(arr.mean()), sd


def _failed(errors: int, reps: int) -> bool:
    return errors > FAIL_SHARE * reps


def _reduce(cfg: ExperimentConfig, n: int, c: float, results: list) -> list[ResultRow]:
    reps = len(results)
    rows = []
    if cfg.kind == "vconv":
        for t in cfg.t_grid:
            for method in cfg.methods:
                vals = [r[(t, method)] for r in results if r[(t, method)] is not None]
                errors = reps - len(vals)
                mean, sd = _mean_sd(vals)
                if _failed(errors, reps):
                    mean = sd = float("nan")
                rows.append(ResultRow("vconv", cfg.dist, n, c, method, mean, sd, reps, errors, cfg.base_seed, t, tuple(vals)))
        return rows
    if cfg.kind == "prial":
        for method in cfg.methods:
            ok = [r for r in results if r[method] is not None]
            errors = reps - len(ok)
            loss = np.array([r[method] for r in ok], dtype=float)
            base = np.array([r["__base__"] for r in ok], dtype=float)
            if ok and not _failed(errors, reps):
                # ratio of replication means
                prial = 100.0 * (1.0 - loss.mean() / base.mean())
                per = 100.0 * (1.0 - loss / base)
                se = float(per.std(ddof=1) / math.sqrt(per.size)) if per.size > 1 else float("nan")
            else:
                prial = se = float("nan")
                per = np.array([])
            rows.append(ResultRow("prial", cfg.dist, n, c, method, float(prial), se, reps, errors, cfg.base_seed, per_rep=tuple(per)))
        return rows
    for method in cfg.methods:
        vals = [r[method] for r in results if r[method] is not None]
        errors = reps - len(vals)
        mean, sd = _mean_sd(vals)
        se = sd / math.sqrt(len(vals)) if len(vals) > 1 else float("nan")
        if _failed(errors, reps):
            mean = se = float("nan")
        rows.append(ResultRow("rosv", cfg.dist, n, c, method, mean, se, reps, errors, cfg.base_seed, per_rep=tuple(vals)))
    return rows


def _truth(cfg: ExperimentConfig, n: int, c: float) -> dict:
    """Population v^(m)(t) needed by the convergence study (empty otherwise)."""
    if cfg.kind != "vconv":
        return {}
    p = cfg.dimension(n, c)
    lam = _eigenvalues(cfg.spectrum, p)
    orders = sorted({int(m[-1]) for m in cfg.methods})
    out = {}
    for t in cfg.t_grid:
        stack = v_derivatives(t, max(orders), p / n, lam)
        for m in orders:
            out[(t, m)] = stack[m]
    return out


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> list[ResultRow]:
    """Run every (n, c) cell of ``config`` and return one row per (cell, method[, t])."""
    workers = config.workers if workers is None else int(workers)
    if workers < 1:
        raise ArgumentError("workers must be >= 1")
    cells = [(n, c) for n in config.n_list for c in config.c_grid]
    rows: list[ResultRow] = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for n, c in cells:
            truth = _truth(config, n, c)
            jobs = [(config, n, c, rep, truth) for rep in range(config.reps)]
            if pool is None:
                results = [_run_rep(job) for job in jobs]
            else:
                # map preserves submission order
                results = list(pool.map(_run_rep, jobs))
            rows.extend(_reduce(config, n, c, results))
    finally:
        if pool is not None:
            pool.shutdown()
    return rows


# ---------------------------------------------------------------- CSV


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def format_csv(kind: str, rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS[kind])
    for row in rows:
        w.writerow([_fmt(x) for x in row.csv_fields()])
    return buf.getvalue()


def write_csv(path: str | os.PathLike, kind: str, rows: list[ResultRow]) -> None:
    Path(path).write_text(format_csv(kind, rows))


def with_overrides(config: ExperimentConfig, **kw) -> ExperimentConfig:
    """Copy of ``config`` with the given non-None fields replaced."""
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
