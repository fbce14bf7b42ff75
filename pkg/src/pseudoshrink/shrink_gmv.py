"""Global-minimum-variance portfolio weights and their linear shrinkage.

Every estimator returns weights of the form alpha * w_hat + (1 - alpha) * b,
where w_hat is built from a generalized inverse and b is a target portfolio
(equal weights by default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DegeneracyError, DomainError
from .plugin_est import PluginContext, hat_d, hat_h, hat_v_derivative
from .randmat import GeneralizedInverse, SpectralModel, WeightMatrix
from .shrink_prec import search_tstar

__all__ = [
    "PortfolioWeights",
    "true_gmv",
    "plugin_weights",
    "oracle_alpha",
    "bona_fide_alpha_mp",
    "reflexive_alpha",
    "double_v",
    "benchmark",
    "rosv",
]

SUM_TOL = 1e-10


@dataclass(frozen=True)
class PortfolioWeights:
    weights: np.ndarray
    method: str
    alpha: float = float("nan")
    target: np.ndarray | None = None
    eta: float = float("nan")
    variance: float = float("nan")
    flags: tuple = ()


def _sigma(sigma) -> np.ndarray:
    return sigma.matrix() if isinstance(sigma, SpectralModel) else np.asarray(sigma, dtype=float)


def _target(b, p: int) -> np.ndarray:
    if b is None or (isinstance(b, str) and b == "equal"):
        return np.full(p, 1.0 / p)
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.shape != (p,):
        raise ArgumentError(f"target portfolio must have length {p}, got {b.shape}")
    if abs(b.sum() - 1.0) > SUM_TOL:
        raise ArgumentError(f"target portfolio must sum to one, got {b.sum()!r}")
    return b


def _ctx(y) -> PluginContext:
    return y if isinstance(y, PluginContext) else PluginContext.from_data(y)


def _mix(alpha: float, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return alpha * w + (1.0 - alpha) * b


def _alpha_flags(alpha: float, base=()) -> tuple:
    return tuple(base) + (("alpha_outside_unit",) if not 0.0 <= alpha <= 1.0 else ())


def true_gmv(sigma: SpectralModel | np.ndarray) -> PortfolioWeights:
    """w = Sigma^{-1} 1 / (1' Sigma^{-1} 1) with variance V = 1 / (1' Sigma^{-1} 1)."""
    if isinstance(sigma, SpectralModel):
        x = sigma.inverse() @ np.ones(sigma.p)
    else:
        s = np.asarray(sigma, dtype=float)
        x = np.linalg.solve(s, np.ones(s.shape[0]))
    denom = float(x.sum())
    return PortfolioWeights(x / denom, "true", 1.0, None, variance=1.0 / denom)


def plugin_weights(ginv: GeneralizedInverse | np.ndarray) -> PortfolioWeights:
    """G 1 / (1' G 1)."""
    g = ginv.matrix if isinstance(ginv, GeneralizedInverse) else np.asarray(ginv, dtype=float)
    x = g @ np.ones(g.shape[0])
    denom = float(x.sum())
    if abs(denom) < 1e-12:
        raise DegeneracyError("1' G 1 vanishes; plug-in weights undefined", "one_G_one")
    return PortfolioWeights(x / denom, "plugin", 1.0, None)


def oracle_alpha(ginv: GeneralizedInverse | np.ndarray, sigma, b=None) -> tuple[float, float]:
    """(alpha*, objective) minimizing the out-of-sample variance along alpha.

    alpha* = b' Sigma (b - w) / ((b - w)' Sigma (b - w)) and the objective is
    the relative variance reduction (b' Sigma (b - w))^2 / ((b - w)' Sigma (b - w)) / (b' Sigma b).
    """
    sig = _sigma(sigma)
    w = plugin_weights(ginv).weights
    b = _target(b, w.size)
    dlt = b - w
    sd = sig @ dlt
    quad = float(dlt @ sd)
    bsb = float(b @ sig @ b)
    if not quad > 1e-14 * bsb:
        raise DegeneracyError("plug-in weights coincide with the target", "gmv_quad")
    num = float(b @ sd)
    return num / quad, num**2 / quad / bsb


def _sigma_chain(ctx: PluginContext, v: float, theta, kmax: int) -> list[float]:
    """Plug-in d_k(Sigma Theta) for k = 0..kmax via Sigma (v Sigma + I)^{-1} = (I - (v Sigma + I)^{-1}) / v."""
    tr = as_weight_trace(theta)
    out = [(tr - hat_d(ctx, 0, theta, 0.0)) / v]
    for k in range(1, kmax + 1):
        out.append((out[-1] - hat_d(ctx, k, theta)) / v)
    return out


def as_weight_trace(theta) -> float:
    return theta.trace() if isinstance(theta, WeightMatrix) else float(np.trace(theta))


def bona_fide_alpha_mp(y, b=None, form: str = "corrected") -> PortfolioWeights:
    """Data-driven shrinkage of the Moore-Penrose GMV weights toward ``b`` (p > n).

    The intensity estimates b'S(b - w)/((b - w)'S(b - w)) with w the
    Moore-Penrose weights. ``form="printed"`` estimates the quadratic term
    p w'Sigma w by d_3(11'/p)/d_1(11'/p)^2. That expression is not the limit
    of p w'Sigma w, so the default ``"corrected"`` form uses
    -(d_2(Sigma 11'/p) - d_1(Sigma 11'/p) h_3/h_2) / d_1(11'/p)^2 instead,
    the same second-order limit that governs ||S^+ Sigma||_F^2.
    """
    if form not in ("corrected", "printed"):
        raise ArgumentError("form must be 'corrected' or 'printed'")
    ctx = _ctx(y)
    p = ctx.p
    if p <= ctx.n:
        raise DomainError(f"Moore-Penrose GMV shrinkage needs p > n (got p={p}, n={ctx.n})")
    b = _target(b, p)
    ones = np.ones(p)
    th11 = WeightMatrix.symmetrized_outer(ones, ones, "11'/p").scaled(1.0 / p)
    th1b = WeightMatrix.symmetrized_outer(ones, b, "sym(1b')")
    v = hat_v_derivative(ctx, 0, 0.0)
    d1_11 = hat_d(ctx, 1, th11)
    # d_1(1 b' Sigma); tr(1 b') = b'1 = 1
    d1_1bs = _sigma_chain(ctx, v, th1b, 1)[1]
    if form == "printed":
        quad = hat_d(ctx, 3, th11) / d1_11**2
    else:
        e = _sigma_chain(ctx, v, th11, 2)
        quad = -(e[2] - e[1] * hat_h(ctx, 3) / hat_h(ctx, 2)) / d1_11**2
    pbsb = p * float(b @ ctx.S @ b)
    ratio = d1_1bs / d1_11
    num = pbsb - ratio
    den = pbsb - 2.0 * ratio + quad
    if not den > 0 or not math.isfinite(den):
        raise DegeneracyError(f"denominator of the GMV intensity is not positive ({den!r})", "gmv_mp_denominator")
    alpha = num / den
    w_s = plugin_weights(ctx.mp).weights
    return PortfolioWeights(_mix(alpha, w_s, b), "mp", alpha, b, flags=_alpha_flags(alpha, ctx.flags))


def reflexive_alpha(r_hat: float, cn: float) -> float:
    """((c-1) R) / ((c-1)^2 + c + (c-1) R)."""
    g = cn - 1.0
    return g * r_hat / (g * g + cn + g * r_hat)


def _reflexive(ctx: PluginContext, b: np.ndarray) -> PortfolioWeights:
    if ctx.p <= ctx.n:
        raise DomainError("the reflexive estimator needs p > n")
    c = ctx.cn
    ones = np.ones(ctx.p)
    pinv1 = ctx.mp @ ones
    one_pinv_one = float(ones @ pinv1)
    r_hat = c * (c - 1.0) * float(b @ ctx.S @ b) * one_pinv_one - 1.0
    alpha = reflexive_alpha(r_hat, c)
    w_s = pinv1 / one_pinv_one
    return PortfolioWeights(_mix(alpha, w_s, b), "reflexive", alpha, b, flags=_alpha_flags(alpha, ctx.flags))


def double_v(ctx: PluginContext, eta: float) -> float:
    """v(eta, 0) = 1 - c (1 - eta (1/p) tr[(S + eta I)^{-1}]) of the double-shrinkage benchmark."""
    return 1.0 - ctx.cn * (1.0 - eta * ctx.trace_ridge_power(1, eta))


def _double_parts(ctx: PluginContext, eta: float, b: np.ndarray, th11, th1b, form: str) -> tuple[float, float]:
    """(numerator, denominator) of the double-shrinkage intensity at eta."""
    c = ctx.cn
    bsb = float(b @ ctx.S @ b)
    tr1 = ctx.trace_ridge_power(1, eta)
    tr2 = ctx.trace_ridge_power(2, eta)
    one_s1 = ctx.trace_ridge_power(1, eta, th11)
    b_s1 = ctx.trace_ridge_power(1, eta, th1b)
    v = double_v(ctx, eta)
    d1 = (1.0 + eta) / v * (1.0 - eta * b_s1)
    lead = d1 / ((1.0 + eta) * bsb * one_s1)
    if form == "printed":
        one_s2 = ctx.trace_ridge_power(2, eta, th11)
        v1 = v * c * (tr1 - eta * tr2)
        v2 = 1.0 - 1.0 / v + eta * v1 / v**2
        d2 = (1.0 + eta) ** 2 / v * (one_s1 - eta * one_s2)
        quad = (1.0 - v2) * d2 / (1.0 + eta) ** 2
    else:
        # 1'S^-(eta) Sigma S^-(eta) 1 through d_0, d_1 of Sigma 11' in the ridge family
        vt = hat_v_derivative(ctx, 0, eta)
        vp = hat_v_derivative(ctx, 1, eta)
        e0 = (th11.trace() - hat_d(ctx, 0, th11, eta)) / vt
        e1 = (e0 - hat_d(ctx, 1, th11, eta)) / vt
        quad = e0 / eta**2 + vp * e1 / eta
    num = 1.0 - lead
    den = 1.0 - 2.0 * lead + quad / (bsb * one_s1**2)
    return num, den


def _double(ctx: PluginContext, b: np.ndarray, form: str = "corrected") -> PortfolioWeights:
    if form not in ("corrected", "printed"):
        raise ArgumentError("form must be 'corrected' or 'printed'")
    p = ctx.p
    ones = np.ones(p)
    th11 = WeightMatrix.symmetrized_outer(ones, ones, "11'")
    th1b = WeightMatrix.symmetrized_outer(ones, b, "sym(1b')")

    def score(eta: float) -> float:
        num, den = _double_parts(ctx, eta, b, th11, th1b, form)
        if not den > 0:
            raise DegeneracyError("double shrinkage denominator is not positive", "double_den")
        score = num * num / den
        # a relative variance reduction cannot exceed one (Cauchy-Schwarz);
        # larger values only occur where the denominator collapses
        if score > 1.0:
            raise DegeneracyError("estimated variance reduction exceeds one", "double_score")
        return score

    res = search_tstar(score)
    eta = res.t_star
    num, den = _double_parts(ctx, eta, b, th11, th1b, form)
    alpha = num / den
    u = ctx.spectrum.vectors
    proj = u.T @ ones
    x = u @ (proj * (1.0 / (ctx.spectrum.values + eta) - 1.0 / eta)) + ones / eta
    w_r = x / x.sum()
    flags = _alpha_flags(alpha, ctx.flags) + (("flat",) if res.flat else ())
    return PortfolioWeights(_mix(alpha, w_r, b), "double", alpha, b, eta=eta, flags=flags)


def benchmark(method: str, y, b=None, form: str = "corrected") -> PortfolioWeights:
    """Reference GMV estimators: ``reflexive`` or ``double_shrinkage`` (alias ``double``).

    ``form`` selects the quadratic term of the double-shrinkage intensity as in
    :func:`bona_fide_alpha_mp`.
    """
    ctx = _ctx(y)
    b = _target(b, ctx.p)
    if method == "reflexive":
        return _reflexive(ctx, b)
    if method in ("double_shrinkage", "double"):
        return _double(ctx, b, form)
    raise ArgumentError(f"unknown GMV benchmark {method!r}; use reflexive or double_shrinkage")


def rosv(weights: PortfolioWeights | np.ndarray, sigma) -> float:
    """w' Sigma w / V_GMV - 1."""
    w = weights.weights if isinstance(weights, PortfolioWeights) else np.asarray(weights, dtype=float)
    sig = _sigma(sigma)
    v_gmv = true_gmv(sigma).variance
    return float(w @ sig @ w) / v_gmv - 1.0
