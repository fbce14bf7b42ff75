"""Linear shrinkage of generalized inverses toward a target precision matrix.

The estimators have the form ``alpha * G + beta * Pi0`` where G is the
Moore-Penrose, ridge or Moore-Penrose-ridge inverse of the sample
covariance. Oracle intensities minimize ||(alpha G + beta Pi0) Sigma - I||_F
with Sigma known; bona fide intensities replace every Sigma-dependent trace
by its plug-in estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from numbers import Real
from typing import Callable

import numpy as np

from .errors import ArgumentError, DegeneracyError, DomainError, SearchError
from .plugin_est import PluginContext, hat_d, hat_h, hat_q, hat_v_derivative
from .randmat import GeneralizedInverse, ObservationMatrix, SpectralModel

__all__ = [
    "PrecisionShrinkagePlan",
    "OracleIntensities",
    "SearchResult",
    "oracle_intensities",
    "bona_fide",
    "mp_intensities",
    "ridge_intensities",
    "mpr_intensities",
    "ridge_objective",
    "mpr_objective",
    "search_tstar",
    "benchmark",
    "frobenius_loss",
]

U_LO = 0.01
U_HI = math.pi / 2 - 0.01
GRID_POINTS = 64
GOLDEN_TOL = 1e-6


@dataclass(frozen=True)
class PrecisionShrinkagePlan:
    method: str
    alpha: float
    beta: float
    t_star: float
    target: np.ndarray
    estimate: np.ndarray
    objective: float = float("nan")
    flags: tuple = ()
    inverse: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class OracleIntensities:
    alpha: float
    beta: float
    objective: float


@dataclass(frozen=True)
class SearchResult:
    t_star: float
    u_star: float
    value: float
    flat: bool
    grid_u: np.ndarray = field(repr=False)
    grid_values: np.ndarray = field(repr=False)


# ---------------------------------------------------------------- target


class _Target:
    """Pi0 as either a scalar multiple of I or a dense symmetric matrix."""

    def __init__(self, target, p: int):
        self.p = p
        if target is None or (isinstance(target, str) and target == "identity"):
            self.scale: float | None = 1.0
            self.mat = None
        elif isinstance(target, Real):
            self.scale = float(target)
            self.mat = None
        else:
            m = np.asarray(target, dtype=float)
            if m.shape != (p, p):
                raise ArgumentError(f"target must be {p}x{p}, got {m.shape}")
            if np.abs(m - m.T).max() > 1e-10 * max(1.0, np.abs(m).max()):
                raise ArgumentError("target must be symmetric")
            self.scale = None
            self.mat = (m + m.T) / 2

    def dense(self) -> np.ndarray:
        if self.mat is not None:
            return self.mat
        return self.scale * np.eye(self.p)

    def over_p(self):
        return self.scale / self.p if self.mat is None else self.mat / self.p

    def sq_over_p(self):
        return self.scale**2 / self.p if self.mat is None else self.mat @ self.mat / self.p

    def trace_over_p(self) -> float:
        return self.scale if self.mat is None else float(np.trace(self.mat)) / self.p


def _ctx(y) -> PluginContext:
    if isinstance(y, PluginContext):
        return y
    return PluginContext.from_data(y)


def _ratio(num: float, den: float, name: str) -> float:
    if den == 0.0 or not math.isfinite(den) or not math.isfinite(num):
        raise DegeneracyError(f"{name} has a zero or non-finite denominator ({den!r})", name)
    return num / den


# ---------------------------------------------------------------- oracle


def oracle_intensities(ginv: GeneralizedInverse | np.ndarray, sigma: SpectralModel | np.ndarray, target=None) -> OracleIntensities:
    """Exact minimizers of ||(alpha G + beta Pi0) Sigma - I||_F^2 and the t-objective.

    The objective is the G-dependent part of the loss reduction,
    (tr(G Sigma) - b r2 / e)^2 / (a - b^2 / e) with a = ||G Sigma||^2,
    b = tr(G Sigma^2 Pi0), e = ||Sigma Pi0||^2, r2 = tr(Sigma Pi0); the optimal
    loss is p - r2^2 / e - objective.
    """
    g = ginv.matrix if isinstance(ginv, GeneralizedInverse) else np.asarray(ginv, dtype=float)
    sig = sigma.matrix() if isinstance(sigma, SpectralModel) else np.asarray(sigma, dtype=float)
    p = g.shape[0]
    pi0 = _Target(target, p).dense()
    gs = g @ sig
    sp = sig @ pi0
    a = float(np.sum(gs * gs))
    b = float(np.sum(gs * sp.T))
    e = float(np.sum(sp * sp))
    r1 = float(np.trace(gs))
    r2 = float(np.trace(sp))
    det = a * e - b * b
    if not det > 1e-12 * a * e:
        raise DegeneracyError("G Sigma is proportional to Pi0 Sigma; intensities are not identified", "oracle_det")
    alpha = (e * r1 - b * r2) / det
    beta = (a * r2 - b * r1) / det
    objective = (r1 - b * r2 / e) ** 2 / (a - b * b / e)
    return OracleIntensities(alpha, beta, objective)


def frobenius_loss(estimate: np.ndarray, sigma: SpectralModel | np.ndarray) -> float:
    """||estimate @ Sigma - I||_F^2."""
    sig = sigma.matrix() if isinstance(sigma, SpectralModel) else np.asarray(sigma, dtype=float)
    r = np.asarray(estimate, dtype=float) @ sig
    r[np.diag_indices_from(r)] -= 1.0
    return float(np.sum(r * r))


# ---------------------------------------------------------------- bona fide pieces


def _mp_pieces(ctx: PluginContext, tg: _Target) -> dict:
    c = ctx.cn
    v = hat_v_derivative(ctx, 0, 0.0)
    h2 = hat_h(ctx, 2)
    h3 = hat_h(ctx, 3)
    d1i = hat_d(ctx, 1, 1.0 / ctx.p)
    d2i = hat_d(ctx, 2, 1.0 / ctx.p)
    tr_s = ctx.trace_power(1)
    q1 = hat_q(ctx, 1, tg.over_p())
    q2 = hat_q(ctx, 2, tg.sq_over_p())
    d1s = (1.0 / v) * (1.0 / (c * v) - d1i)
    d1s2 = (tr_s + d1i - 2.0 / (c * v)) / v**2
    d1pi = hat_d(ctx, 1, tg.over_p())
    d0pi = hat_d(ctx, 0, tg.over_p(), 0.0)
    d1s2pi = (q1 + d1pi) / v**2 - 2.0 / v**3 * (tg.trace_over_p() - d0pi)
    d2s2 = d1s2 / v - (d1s - d2i) / v**2
    return dict(v=v, h2=h2, h3=h3, q1=q1, q2=q2, d1s=d1s, d1s2=d1s2, d1s2pi=d1s2pi, d2s2=d2s2)


def mp_intensities(ctx: PluginContext, target=None) -> tuple[float, float, float]:
    """(alpha, beta, objective at t = 0) for the Moore-Penrose inverse."""
    ctx = _ctx(ctx)
    if ctx.p <= ctx.n:
        raise DomainError("Moore-Penrose shrinkage needs p > n")
    tg = _Target(target, ctx.p)
    k = _mp_pieces(ctx, tg)
    x = k["d2s2"] - k["d1s2"] * k["h3"] / k["h2"]
    d1s, d1s2pi, q1, q2, h2 = k["d1s"], k["d1s2pi"], k["q1"], k["q2"], k["h2"]
    alpha = _ratio(d1s * q2 - d1s2pi * q1, -(x * q2) / h2 - d1s2pi**2 / h2, "mp_alpha_denominator")
    beta = _ratio(x * q1 + d1s * d1s2pi, x * q2 + d1s2pi**2, "mp_beta_denominator")
    # objective at t = 0 in the Moore-Penrose-ridge parametrization
    v1 = hat_v_derivative(ctx, 1, 0.0)
    v2 = hat_v_derivative(ctx, 2, 0.0)
    s2 = -(v1**2 * k["d2s2"] - 0.5 * v2 * k["d1s2"])
    den = s2 * q2 - v1**2 * d1s2pi**2
    obj = _ratio(v1**2 * (d1s * q2 - d1s2pi * q1) ** 2, q2 * den, "mp_objective")
    return alpha, beta, obj


def _ridge_pieces(ctx: PluginContext, t: float, tg: _Target) -> dict:
    c = ctx.cn
    v = hat_v_derivative(ctx, 0, t)
    v1 = hat_v_derivative(ctx, 1, t)
    tr_s = ctx.trace_power(1)
    q1 = hat_q(ctx, 1, tg.over_p())
    q2 = hat_q(ctx, 2, tg.sq_over_p())
    d0s = 1.0 / (c * v) - t / c
    d0s2 = (tr_s - 1.0 / (c * v) + t / c) / v
    d0pi = hat_d(ctx, 0, tg.over_p(), t)
    d0s2pi = q1 / v - (tg.trace_over_p() - d0pi) / v**2
    d1i = hat_d(ctx, 1, 1.0 / ctx.p, t)
    d1s2 = (tr_s + d1i - 2.0 / (c * v) + 2.0 * t / c) / v**2
    return dict(v=v, v1=v1, q1=q1, q2=q2, d0s=d0s, d0s2=d0s2, d0pi=d0pi, d0s2pi=d0s2pi, d1s2=d1s2)


def _check_t(t) -> float:
    t = float(t)
    if not (t > 0 and math.isfinite(t)):
        raise ArgumentError(f"t must be finite and > 0, got {t}")
    return t


def ridge_intensities(ctx: PluginContext, t: float, target=None) -> tuple[float, float]:
    ctx = _ctx(ctx)
    t = _check_t(t)
    k = _ridge_pieces(ctx, t, _Target(target, ctx.p))
    bracket = k["d0s2"] / t + k["v1"] * k["d1s2"]
    den = bracket * k["q2"] - k["d0s2pi"] ** 2 / t
    alpha = _ratio(k["d0s"] * k["q2"] - k["d0s2pi"] * k["q1"], den, "ridge_denominator")
    beta = _ratio(bracket * k["q1"] - k["d0s"] * k["d0s2pi"] / t, den, "ridge_denominator")
    return alpha, beta


def ridge_objective(ctx: PluginContext, t: float, target=None) -> float:
    """Estimated t-objective of the ridge shrinkage (to be maximized)."""
    ctx = _ctx(ctx)
    t = _check_t(t)
    k = _ridge_pieces(ctx, t, _Target(target, ctx.p))
    num = (k["d0s"] * k["q2"] - k["d0s2pi"] * k["q1"]) ** 2
    den = (k["d0s2"] + t * k["v1"] * k["d1s2"]) * k["q2"] - k["d0s2pi"] ** 2
    return _ratio(num, k["q2"] * den, "ridge_objective")


def _mpr_pieces(ctx: PluginContext, t: float, tg: _Target) -> dict:
    c = ctx.cn
    v = hat_v_derivative(ctx, 0, t)
    v1 = hat_v_derivative(ctx, 1, t)
    v2 = hat_v_derivative(ctx, 2, t)
    v3 = hat_v_derivative(ctx, 3, t)
    tr_s = ctx.trace_power(1)
    q1 = hat_q(ctx, 1, tg.over_p())
    q2 = hat_q(ctx, 2, tg.sq_over_p())
    d1s = (v**-2 + 1.0 / v1) / c
    d0s2 = (tr_s - 1.0 / (c * v) + t / c) / v
    d1s2 = (d0s2 - d1s) / v
    d0pi = hat_d(ctx, 0, tg.over_p(), t)
    d1pi = hat_d(ctx, 1, tg.over_p(), t)
    d0s2pi = q1 / v - (tg.trace_over_p() - d0pi) / v**2
    d1s2pi = d0s2pi / v + d1pi / v**2 - (tg.trace_over_p() - d0pi) / v**3
    d2s2 = (d1s2 - (v**-3 + v2 / (2.0 * v1**3)) / c) / v
    d3s2 = (d2s2 - (v**-4 + 0.5 * v2**2 / v1**5 - v3 / (6.0 * v1**4)) / c) / v
    s2 = -(v1**2 * d2s2 - 0.5 * v2 * d1s2) + t * (v3 / 6.0 * d1s2 - v1 * v2 * d2s2 + v1**3 * d3s2)
    return dict(v1=v1, q1=q1, q2=q2, d1s=d1s, d1s2pi=d1s2pi, s2=s2)


def mpr_intensities(ctx: PluginContext, t: float, target=None) -> tuple[float, float]:
    ctx = _ctx(ctx)
    t = _check_t(t)
    k = _mpr_pieces(ctx, t, _Target(target, ctx.p))
    v1, q1, q2, d1s, d1s2pi, s2 = (k[x] for x in ("v1", "q1", "q2", "d1s", "d1s2pi", "s2"))
    den = s2 * q2 - v1**2 * d1s2pi**2
    alpha = _ratio(-v1 * d1s * q2 + v1 * d1s2pi * q1, den, "mpr_denominator")
    beta = _ratio(s2 * q1 - v1**2 * d1s * d1s2pi, den, "mpr_denominator")
    return alpha, beta


def mpr_objective(ctx: PluginContext, t: float, target=None) -> float:
    """Estimated t-objective of the Moore-Penrose-ridge shrinkage; t = 0 uses the MP plug-ins."""
    ctx = _ctx(ctx)
    if float(t) == 0.0:
        return mp_intensities(ctx, target)[2]
    t = _check_t(t)
    k = _mpr_pieces(ctx, t, _Target(target, ctx.p))
    v1, q1, q2, d1s, d1s2pi, s2 = (k[x] for x in ("v1", "q1", "q2", "d1s", "d1s2pi", "s2"))
    den = s2 * q2 - v1**2 * d1s2pi**2
    return _ratio(v1**2 * (d1s * q2 - d1s2pi * q1) ** 2, q2 * den, "mpr_objective")


# ---------------------------------------------------------------- t search


def search_tstar(
    objective: Callable[[float], float],
    *,
    u_range: tuple[float, float] = (U_LO, U_HI),
    grid_points: int = GRID_POINTS,
    tol: float = GOLDEN_TOL,
    variable: str = "t",
) -> SearchResult:
    """Maximize objective(t) with t = tan(u) over u in ``u_range``.

    A coarse grid locates the best cell, golden-section search refines it.
    Points where the objective raises or is non-finite count as -inf.
    A constant objective returns the middle of the u-range, flagged flat.
    ``variable="u"`` passes u instead of t to the objective.
    """
    if variable not in ("t", "u"):
        raise ArgumentError("variable must be 't' or 'u'")
    lo, hi = u_range

    def f(u: float) -> float:
        arg = math.tan(u) if variable == "t" else u
        try:
            val = float(objective(arg))
        except (ArithmeticError, ValueError):
            return -math.inf
        return val if math.isfinite(val) else -math.inf

    grid = np.linspace(lo, hi, grid_points)
    vals = np.array([f(u) for u in grid])
    finite = np.isfinite(vals)
    if not finite.any():
        raise SearchError("objective is non-finite on the whole search grid")
    vmax = vals[finite].max()
    vmin = vals[finite].min()
    if finite.all() and vmax - vmin <= 1e-12 * max(1.0, abs(vmax)):
        u_mid = 0.5 * (lo + hi)
        return SearchResult(math.tan(u_mid), u_mid, f(u_mid), True, grid, vals)
    i = int(np.argmax(np.where(finite, vals, -np.inf)))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid_points - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    u_star = 0.5 * (a + b)
    best = f(u_star)
    if best < vals[i]:
        u_star, best = float(grid[i]), float(vals[i])
    return SearchResult(math.tan(u_star), float(u_star), best, False, grid, vals)


# ---------------------------------------------------------------- plans


def _flags(alpha: float, ctx: PluginContext, extra=()) -> tuple:
    out = list(ctx.flags) + list(extra)
    if alpha < 0:
        out.append("negative_alpha")
    return tuple(out)


def _ridge_matrix(ctx: PluginContext, t: float) -> np.ndarray:
    return ctx.spectrum.matrix(lambda x: 1.0 / (x + t), 1.0 / t)


def _mpr_matrix(ctx: PluginContext, t: float) -> np.ndarray:
    return ctx.spectrum.matrix(lambda x: x / (x + t) ** 2, 0.0)


def _plan(method, alpha, beta, t, tg: _Target, g: np.ndarray, obj, flags) -> PrecisionShrinkagePlan:
    pi0 = tg.dense()
    est = alpha * g + beta * pi0
    return PrecisionShrinkagePlan(method, float(alpha), float(beta), float(t), pi0, (est + est.T) / 2, float(obj), flags, g)


def bona_fide(y, method: str = "mp", target=None, t: float | None = None) -> PrecisionShrinkagePlan:
    """Data-driven shrinkage plan for ``method`` in {mp, ridge, mpr}.

    ``y`` may be data (p x n), an ObservationMatrix or a PluginContext. For
    ridge and mpr an omitted ``t`` triggers the tan-substituted search. The
    mpr search falls back to the Moore-Penrose plan when the searched
    objective does not beat its t = 0 value.
    """
    ctx = _ctx(y)
    tg = _Target(target, ctx.p)
    if method == "mp":
        a, b, obj = mp_intensities(ctx, target)
        return _plan("mp", a, b, 0.0, tg, ctx.mp, obj, _flags(a, ctx))
    if method == "ridge":
        extra = ()
        if t is None:
            res = search_tstar(lambda s: ridge_objective(ctx, s, target))
            t = res.t_star
            extra = ("flat",) if res.flat else ()
        t = _check_t(t)
        a, b = ridge_intensities(ctx, t, target)
        obj = ridge_objective(ctx, t, target)
        return _plan("ridge", a, b, t, tg, _ridge_matrix(ctx, t), obj, _flags(a, ctx, extra))
    if method == "mpr":
        extra = []
        if t is None:
            res = search_tstar(lambda s: mpr_objective(ctx, s, target))
            t = res.t_star
            if res.flat:
                extra.append("flat")
            if ctx.p > ctx.n:
                obj0 = mp_intensities(ctx, target)[2]
                if not res.value > obj0:
                    a, b, _ = mp_intensities(ctx, target)
                    extra.append("fallback_mp")
                    return _plan("mpr", a, b, 0.0, tg, ctx.mp, obj0, _flags(a, ctx, extra))
        t = _check_t(t)
        a, b = mpr_intensities(ctx, t, target)
        obj = mpr_objective(ctx, t, target)
        return _plan("mpr", a, b, t, tg, _mpr_matrix(ctx, t), obj, _flags(a, ctx, extra))
    raise ArgumentError(f"unknown bona fide method {method!r}; use mp, ridge or mpr")


# ---------------------------------------------------------------- benchmarks


def _optimal_ridge_parts(ctx: PluginContext, lam: float) -> tuple[float, float, float]:
    """(a1, R1, R2) at ridge level lam; (S/lam + I)^{-1} = lam (S + lam I)^{-1}."""
    c = ctx.cn
    m1 = lam * ctx.trace_ridge_power(1, lam)
    m2 = lam**2 * ctx.trace_ridge_power(2, lam)
    a1 = 1.0 - m1
    a2 = m1 - m2
    g = 1.0 - c * a1
    if g <= 1e-10:
        raise DegeneracyError("1 - c a1 is not positive at this ridge level", "or_gap")
    r1 = a1 / g
    r2 = a1 / g**3 - a2 / g**4
    return a1, r1, r2


def _optimal_ridge(ctx: PluginContext) -> PrecisionShrinkagePlan:
    def score(lam: float) -> float:
        _, r1, r2 = _optimal_ridge_parts(ctx, lam)
        if not r2 > 0:
            raise DegeneracyError("R2 is not positive", "or_r2")
        return r1**2 / r2  # maximizing this minimizes 1 - R1^2/R2

    res = search_tstar(score)
    lam = res.t_star
    _, r1, r2 = _optimal_ridge_parts(ctx, lam)
    alpha = r1 / r2
    g = _ridge_matrix(ctx, lam)
    est = alpha * g
    flags = ctx.flags + (("flat",) if res.flat else ())
    return PrecisionShrinkagePlan(
        "optimal_ridge", alpha, 0.0, lam, np.zeros_like(est), est, 1.0 - res.value, flags, g
    )


def benchmark(method: str, y, sigma: SpectralModel | np.ndarray | None = None) -> PrecisionShrinkagePlan:
    """Reference estimators: empirical_bayes, optimal_ridge and oracle_nl (needs Sigma).

    Empirical Bayes p((n-1)S + tr(S) I)^{-1} is reported as alpha (S + t I)^{-1}
    with alpha = p/(n-1), t = tr(S)/(n-1).
    """
    ctx = _ctx(y)
    p, n = ctx.p, ctx.n_obs
    if method in ("empirical_bayes", "eb"):
        # stated for the centered sample covariance and the column count
        if n < 2:
            raise ArgumentError("empirical Bayes needs n >= 2")
        scale = ctx.dof_scale
        tr_s = ctx.trace_power(1) * p / scale
        if not tr_s > 0:
            raise DegeneracyError("tr(S) is zero", "trace_S")
        t = tr_s / (n - 1)
        alpha = p / (n - 1)
        g = ctx.spectrum.matrix(lambda x: 1.0 / (x / scale + t), 1.0 / t)
        est = alpha * g
        return PrecisionShrinkagePlan("empirical_bayes", alpha, 0.0, t, np.zeros_like(est), est, float("nan"), ctx.flags, g)
    if method in ("optimal_ridge", "or"):
        return _optimal_ridge(ctx)
    if method == "oracle_nl":
        if sigma is None:
            raise ArgumentError("oracle_nl needs the population covariance")
        sig = sigma.matrix() if isinstance(sigma, SpectralModel) else np.asarray(sigma, dtype=float)
        _, u = np.linalg.eigh(ctx.S)
        su = sig @ u
        num = np.einsum("ij,ij->j", su, su)  # u_i' Sigma^2 u_i
        den = np.einsum("ij,ij->j", u, su)  # u_i' Sigma u_i
        dt = num / den
        est = (u / dt) @ u.T
        est = (est + est.T) / 2
        return PrecisionShrinkagePlan("oracle_nl", float("nan"), float("nan"), 0.0, np.zeros_like(est), est, float("nan"), ctx.flags, None)
    raise ArgumentError(f"unknown benchmark {method!r}; use empirical_bayes, optimal_ridge or oracle_nl")
