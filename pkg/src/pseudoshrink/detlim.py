"""Deterministic equivalents of weighted trace moments.

The limits are expressed through the scalar function v(t) solving

    (1/p) tr[(v Sigma + I)^{-1}] = (c - 1 + t v) / c,

its derivatives, and weighted spectral traces of Sigma. Analogous functions
w (ordinary inverse, c < 1) and u (sample covariance moments) are provided.
Derivatives are built by Bell-polynomial recursions; :func:`identity_closed_form`
gives an independent route for Sigma = I from the explicit quadratic roots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial, sqrt
from typing import Literal, Mapping

import numpy as np

from .bellpoly import bell_partial
from .errors import ArgumentError, ConvergenceError, DomainError
from .randmat import SpectralModel, WeightMatrix, as_weight

__all__ = [
    "MAX_ORDER",
    "DerivativeStack",
    "MomentLimit",
    "solve_v",
    "v_derivatives",
    "h_values",
    "w_derivatives",
    "u_derivatives",
    "dk_weighted",
    "d_tilde",
    "D_value",
    "limit_moment",
    "identity_closed_form",
    "v_identity",
    "w_identity",
]

MAX_ORDER = 8
Family = Literal["mp", "ridge", "mpr", "samplecov", "ordinary"]
FAMILIES = ("mp", "ridge", "mpr", "samplecov", "ordinary")


@dataclass(frozen=True)
class DerivativeStack:
    """Values f(t), f'(t), ..., f^(order)(t) of one of the scalar functions.

    For the ``w_under_one`` regime ``aux`` carries the companion w~ = t/w
    derivatives (w~(0), w~'(0), ...).
    """

    t: float
    order: int
    values: tuple
    regime: str
    cn: float = float("nan")
    aux: tuple = ()

    def __getitem__(self, i: int) -> float:
        return self.values[i]

    def __len__(self) -> int:
        return len(self.values)

    @property
    def derivs(self) -> tuple:
        """(f', ..., f^(order)), the Bell-polynomial argument list."""
        return self.values[1:]


@dataclass(frozen=True)
class MomentLimit:
    family: str
    m: int
    t: float
    value: float
    power: int
    components: Mapping[str, float] = field(default_factory=dict)

    def __float__(self) -> float:
        return float(self.value)


# ---------------------------------------------------------------- helpers


def _lam(model: SpectralModel | np.ndarray) -> np.ndarray:
    if isinstance(model, SpectralModel):
        return model.eigenvalues
    lam = np.asarray(model, dtype=float).reshape(-1)
    if lam.size == 0 or lam.min() <= 0:
        raise ArgumentError("spectrum must be non-empty and positive")
    return lam


def _check_cn(cn: float) -> float:
    cn = float(cn)
    if not np.isfinite(cn) or cn <= 0:
        raise ArgumentError(f"concentration ratio must be positive, got {cn}")
    return cn


def _check_order(m: int, lo: int = 0) -> int:
    if int(m) != m or m < lo:
        raise ArgumentError(f"order must be an integer >= {lo}, got {m}")
    if m > MAX_ORDER:
        raise ArgumentError(f"order {m} exceeds the cap {MAX_ORDER}")
    return int(m)


def _theta_diag(theta, model: SpectralModel) -> np.ndarray:
    """q_i^T Theta q_i over the eigenvectors q_i of Sigma."""
    w = as_weight(theta, model.p)
    if model.basis is not None:
        return w.quad_diag(model.basis)
    if w.dense is not None:
        return np.diag(w.dense).copy()
    return (w.vectors**2) @ w.signs


def _default_theta(theta, model: SpectralModel):
    return WeightMatrix.identity_over_p(model.p) if theta is None else theta


def _g(v: float, lam: np.ndarray, k: int) -> float:
    return float(np.mean((lam / (v * lam + 1.0)) ** k))


# ---------------------------------------------------------------- v function


def _v_residual(v: float, t: float, cn: float, lam: np.ndarray) -> float:
    return float(np.mean(1.0 / (v * lam + 1.0))) - (cn - 1.0 + t * v) / cn


def solve_v(t: float, cn: float, model: SpectralModel | np.ndarray, tol: float = 1e-12) -> float:
    """Positive root v(t) of the defining equation, by bracketing bisection.

    The residual is strictly decreasing in v with value 1/c at v = 0, so the
    bracket starts at 0 and its upper end doubles until the sign flips.
    Bisection then runs until the bracket collapses to adjacent floats.
    """
    t = float(t)
    cn = _check_cn(cn)
    if t < 0 or not np.isfinite(t):
        raise ArgumentError(f"t must be finite and >= 0, got {t}")
    if tol <= 0:
        raise ArgumentError("tol must be positive")
    if t == 0 and cn <= 1:
        raise DomainError(f"v(0) exists only for c > 1, got c = {cn}")
    lam = _lam(model)
    lo, hi = 0.0, 1.0
    for _ in range(200):
        if _v_residual(hi, t, cn, lam) < 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ConvergenceError("no sign change after 200 doublings")
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _v_residual(mid, t, cn, lam) > 0:
            lo = mid
        else:
            hi = mid
    v = 0.5 * (lo + hi)
    if abs(_v_residual(v, t, cn, lam)) > max(tol, 1e3 * np.finfo(float).eps):
        raise ConvergenceError(f"residual {_v_residual(v, t, cn, lam):.3e} above tol at v={v}")
    return v


def h_values(v: float, cn: float, model: SpectralModel | np.ndarray, kmax: int) -> dict[int, float]:
    """h_k = v^{-k} - c (1/p) tr{[Sigma (v Sigma + I)^{-1}]^k} for k = 1..kmax."""
    lam = _lam(model)
    return {k: v ** (-k) - cn * _g(v, lam, k) for k in range(1, kmax + 1)}


def v_derivatives(
    t: float, m: int, cn: float, model: SpectralModel | np.ndarray, tol: float = 1e-12
) -> DerivativeStack:
    """v(t) and its first m derivatives via the Bell recursion."""
    m = _check_order(m)
    v = solve_v(t, cn, model, tol)
    h = h_values(v, cn, model, m + 1)
    vals = [v]
    if m >= 1:
        vals.append(-1.0 / h[2])
    for order in range(2, m + 1):
        d = vals[1:]
        acc = 0.0
        for k in range(2, order + 1):
            acc += (-1) ** k * factorial(k) * h[k + 1] * bell_partial(order, k, tuple(d[: order - k + 1]))
        vals.append(-vals[1] * acc)
    regime = "v_over_one" if float(t) == 0.0 else "v_general"
    return DerivativeStack(float(t), m, tuple(vals), regime, float(cn))


# ---------------------------------------------------------------- w and u


def d_tilde(k: int, theta, model: SpectralModel) -> float:
    """tr[Sigma^{-(k+1)} Theta]."""
    if k < 0:
        raise ArgumentError("k must be >= 0")
    q = _theta_diag(theta, model)
    return float(np.sum(model.eigenvalues ** (-(k + 1)) * q))


def w_derivatives(m: int, cn: float, model: SpectralModel) -> DerivativeStack:
    """w(0) = 1 - c and derivatives, interleaved with w~ = t/w (c < 1).

    w~^(j)(0) depends on w' .. w^(j-1) and w^(j)(0) on w~' .. w~^(j), so the
    two sequences are filled alternately.
    """
    m = _check_order(m)
    cn = _check_cn(cn)
    if cn >= 1:
        raise DomainError(f"the ordinary inverse needs c < 1, got c = {cn}")
    dts = [float(np.mean(model.eigenvalues ** (-k))) for k in range(0, m + 2)]  # d~_k(Sigma/p)
    w = [1.0 - cn]
    wt = [0.0]
    for j in range(1, m + 2):
        if j == 1:
            wt.append(1.0 / (1.0 - cn))
        else:
            acc = 0.0
            for k in range(1, j):
                acc += (-1) ** k * factorial(k) / (1.0 - cn) ** (k + 1) * bell_partial(j - 1, k, tuple(w[1 : j - k + 1]))
            wt.append(j * acc)
        if j <= m:
            acc = 0.0
            for k in range(1, j + 1):
                acc += (-1) ** k * factorial(k) * dts[k] * bell_partial(j, k, tuple(wt[1 : j - k + 2]))
            w.append(-cn * acc)
    return DerivativeStack(0.0, m, tuple(w), "w_under_one", cn, tuple(wt))


def u_derivatives(m: int, cn: float, model: SpectralModel | np.ndarray) -> DerivativeStack:
    """u'(0) = 1 and u^(j)(0) = j c sum_k (-1)^k k! (1/p)tr(Sigma^k) B_{j-1,k}(u', ...)."""
    m = _check_order(m, 1)
    cn = _check_cn(cn)
    lam = _lam(model)
    u = [0.0, 1.0]
    for j in range(2, m + 1):
        acc = 0.0
        for k in range(1, j):
            acc += (-1) ** k * factorial(k) * float(np.mean(lam**k)) * bell_partial(j - 1, k, tuple(u[1 : j - k + 1]))
        u.append(j * cn * acc)
    return DerivativeStack(0.0, m, tuple(u), "u_samplecov", cn)


# ---------------------------------------------------------------- d_k and D_m


def dk_weighted(stack: DerivativeStack, k: int, theta, model: SpectralModel) -> float:
    """tr{(v Sigma + I)^{-1} [Sigma (v Sigma + I)^{-1}]^k Theta} at v = stack[0].

    k = 0 is only meaningful for the t-parameterized family, so it is
    rejected when the stack sits at t = 0.
    """
    if stack.regime not in ("v_over_one", "v_general"):
        raise ArgumentError(f"d_k needs a v-stack, got regime {stack.regime!r}")
    if int(k) != k or k < 0:
        raise ArgumentError("k must be a non-negative integer")
    if k == 0 and stack.t == 0.0:
        raise ArgumentError("k = 0 is defined only for t > 0")
    v = stack.values[0]
    lam = model.eigenvalues
    q = _theta_diag(theta, model)
    r = 1.0 / (v * lam + 1.0)
    return float(np.sum(r * (lam * r) ** k * q))


def D_value(stack: DerivativeStack, m: int, theta, model: SpectralModel, dk: Mapping[int, float] | None = None) -> float:
    """D_m = sum_k ((-1)^{m+k} k!/m!) d_k B_{m,k}(v', ...); D_0 = d_0."""
    if dk is None:
        lo = 0 if stack.t > 0 else 1
        dk = {k: dk_weighted(stack, k, theta, model) for k in range(lo, m + 1)}
    if m == 0:
        return dk[0]
    if m > stack.order:
        raise ArgumentError(f"D_{m} needs {m} derivatives, stack has {stack.order}")
    d = stack.derivs
    acc = 0.0
    for k in range(1, m + 1):
        acc += (-1) ** (m + k) * factorial(k) * dk[k] * bell_partial(m, k, tuple(d[: m - k + 1]))
    return acc / factorial(m)


# ---------------------------------------------------------------- moments


def _as_model(model) -> SpectralModel:
    return model if isinstance(model, SpectralModel) else SpectralModel(np.asarray(model, dtype=float))


def limit_moment(
    family: Family,
    m: int,
    t: float = 0.0,
    theta=None,
    cn: float = 2.0,
    model: SpectralModel | np.ndarray | None = None,
    *,
    form: str = "default",
    tol: float = 1e-12,
) -> MomentLimit:
    """Deterministic equivalent of a weighted trace moment.

    Index conventions: ``mp``, ``mpr`` and ``samplecov`` use m as the power;
    ``ridge`` and ``ordinary`` use m with power m + 1. Theta defaults to I/p.
    ``form`` selects an alternative route: ridge accepts "recursive", mpr
    accepts "binomial"; the default ridge form is the direct double sum and
    the default mpr form uses D_m.
    """
    if family not in FAMILIES:
        raise ArgumentError(f"unknown family {family!r}; choose from {FAMILIES}")
    if model is None:
        raise ArgumentError("a spectral model is required")
    model = _as_model(model)
    cn = _check_cn(cn)
    t = float(t)
    theta = _default_theta(theta, model)

    if family == "mp":
        m = _check_order(m, 1)
        if cn <= 1:
            raise DomainError("the Moore-Penrose limit needs c > 1")
        st = v_derivatives(0.0, m, cn, model, tol)
        dk = {k: dk_weighted(st, k, theta, model) for k in range(1, m + 1)}
        val = -D_value(st, m, theta, model, dk)
        comps = {"v": st[0], **{f"v{j}": st[j] for j in range(1, m + 1)}, **{f"d{k}": x for k, x in dk.items()}}
        return MomentLimit("mp", m, 0.0, val, m, comps)

    if family == "ridge":
        m = _check_order(m, 0)
        if not t > 0:
            raise DomainError("the ridge limit needs t > 0")
        st = v_derivatives(t, m, cn, model, tol)
        dk = {k: dk_weighted(st, k, theta, model) for k in range(0, m + 1)}
        Ds = [D_value(st, l, theta, model, dk) for l in range(0, m + 1)]
        if form in ("default", "direct"):
            val = sum(t ** (-(m - l) - 1) * Ds[l] for l in range(0, m + 1))
        elif form == "recursive":
            val = Ds[0] / t
            for l in range(1, m + 1):
                val = val / t + Ds[l] / t
        else:
            raise ArgumentError(f"unknown ridge form {form!r}")
        comps = {"v": st[0], **{f"v{j}": st[j] for j in range(1, m + 1)}, **{f"d{k}": x for k, x in dk.items()}}
        return MomentLimit("ridge", m, t, val, m + 1, comps)

    if family == "mpr":
        m = _check_order(m, 1)
        if t == 0.0:
            if cn <= 1:
                raise DomainError("the t = 0 Moore-Penrose-ridge limit needs c > 1")
            base = limit_moment("mp", m, 0.0, theta, cn, model, tol=tol)
            return MomentLimit("mpr", m, 0.0, base.value, m, dict(base.components))
        if t < 0:
            raise DomainError("the Moore-Penrose-ridge limit needs t >= 0")
        if form in ("default", "dform"):
            top = 2 * m - 1
            st = v_derivatives(t, top, cn, model, tol)
            dk = {k: dk_weighted(st, k, theta, model) for k in range(0, top + 1)}
            D = {j: D_value(st, j, theta, model, dk) for j in range(m, top + 1)}
            val = -D[m]
            for j in range(1, m):
                coef = sum((-1) ** k * comb(m, k) for k in range(j + 1, m + 1))
                val += t**j * D[m + j] * coef
            comps = {"v": st[0], **{f"v{j}": st[j] for j in range(1, top + 1)}, **{f"D{j}": x for j, x in D.items()}}
        elif form == "binomial":
            val = 0.0
            comps = {}
            for k in range(0, m + 1):
                s = limit_moment("ridge", m + k - 1, t, theta, cn, model, tol=tol).value
                comps[f"ridge{m + k}"] = s
                val += (-1) ** k * t**k * comb(m, k) * s
        else:
            raise ArgumentError(f"unknown mpr form {form!r}")
        return MomentLimit("mpr", m, t, val, m, comps)

    if family == "samplecov":
        m = _check_order(m, 1)
        st = u_derivatives(m, cn, model)
        lam = model.eigenvalues
        q = _theta_diag(theta, model)
        val = 0.0
        for k in range(1, m + 1):
            tr_k = float(np.sum(lam**k * q))
            val += (-1) ** (m + k) * factorial(k) / factorial(m) * tr_k * bell_partial(m, k, tuple(st.derivs[: m - k + 1]))
        comps = {f"u{j}": st[j] for j in range(1, m + 1)}
        return MomentLimit("samplecov", m, 0.0, val, m, comps)

    # ordinary inverse, c < 1
    m = _check_order(m, 0)
    if t != 0.0:
        raise DomainError("the ordinary-inverse limit is defined at t = 0 only; use ridge for t > 0")
    st = w_derivatives(m, cn, model)
    wt = st.aux
    dtk = [d_tilde(k, theta, model) for k in range(0, m + 1)]
    acc = 0.0
    for k in range(1, m + 2):
        acc += (-1) ** k * factorial(k) * dtk[k - 1] * bell_partial(m + 1, k, tuple(wt[1 : m + 1 - k + 2]))
    val = (-1) ** (m + 1) / factorial(m + 1) * acc
    comps = {"w": st[0], **{f"w{j}": st[j] for j in range(1, m + 1)}, **{f"wt{j}": wt[j] for j in range(1, m + 2)}}
    return MomentLimit("ordinary", m, 0.0, val, m + 1, comps)


# ---------------------------------------------------------------- identity case


def _v0_identity(t: float, cn: float) -> float:
    if t == 0.0:
        if cn <= 1:
            raise DomainError("v(0) exists only for c > 1")
        return 1.0 / (cn - 1.0)
    a = cn - 1.0 + t
    return 2.0 / (a + sqrt(a * a + 4.0 * t))


def _v_series(t: float, cn: float, order: int) -> list[float]:
    """Taylor coefficients of v around t for Sigma = I, from t v^2 + (t + c - 1) v - 1 = 0."""
    a = [_v0_identity(t, cn)]
    lead = 2.0 * t * a[0] + t + cn - 1.0
    for j in range(1, order + 1):
        conv = sum(a[i] * a[j - i] for i in range(1, j))
        sq_prev = sum(a[i] * a[j - 1 - i] for i in range(0, j))
        a.append(-(t * conv + sq_prev + a[j - 1]) / lead)
    return a


def _w_series(t: float, cn: float, order: int) -> list[float]:
    """Taylor coefficients of w around t for Sigma = I, from w^2 - (1 - c - t) w - t = 0."""
    r = 1.0 - cn - t
    b = [(r + sqrt(r * r + 4.0 * t)) / 2.0]
    lead = 2.0 * b[0] - r
    for j in range(1, order + 1):
        conv = sum(b[i] * b[j - i] for i in range(1, j))
        b.append(-(conv + b[j - 1] - (1.0 if j == 1 else 0.0)) / lead)
    return b


def v_identity(t: float, cn: float, order: int = 0) -> list[float]:
    """[v(t), v'(t), ..., v^(order)(t)] for Sigma = I from the explicit root."""
    cn = _check_cn(cn)
    a = _v_series(float(t), cn, order)
    return [factorial(j) * a[j] for j in range(order + 1)]


def w_identity(t: float, cn: float, order: int = 0) -> list[float]:
    """[w(t), ..., w^(order)(t)] with w(t) = ((1-c-t) + sqrt((1-c-t)^2 + 4t))/2."""
    cn = _check_cn(cn)
    if float(t) == 0.0 and cn >= 1:
        raise DomainError("w is used only for c < 1 at t = 0")
    b = _w_series(float(t), cn, order)
    return [factorial(j) * b[j] for j in range(order + 1)]


def identity_closed_form(family: Family, m: int, t: float = 0.0, cn: float = 2.0) -> float:
    """Coefficient of tr(Theta) in the Sigma = I limit, from the explicit roots only.

    Same index conventions as :func:`limit_moment`.
    """
    cn = _check_cn(cn)
    t = float(t)
    if family == "mp":
        m = _check_order(m, 1)
        if cn <= 1:
            raise DomainError("the Moore-Penrose limit needs c > 1")
        a = _v_series(0.0, cn, m - 1)
        return (-1) ** (m - 1) * a[m - 1] / cn
    if family == "ridge":
        m = _check_order(m, 0)
        if not t > 0:
            raise DomainError("the ridge limit needs t > 0")
        a = _v_series(t, cn, m)
        return t ** (-(m + 1)) * (cn - 1.0) / cn + (-1) ** m * a[m] / cn
    if family == "mpr":
        m = _check_order(m, 1)
        if t == 0.0:
            return identity_closed_form("mp", m, 0.0, cn)
        if t < 0:
            raise DomainError("the Moore-Penrose-ridge limit needs t >= 0")
        a = _v_series(t, cn, 2 * m - 1)
        return (-1) ** (m - 1) / cn * sum(comb(m, k) * a[m + k - 1] * t**k for k in range(0, m + 1))
    if family == "samplecov":
        m = _check_order(m, 1)
        # Narayana polynomial: sum_k N(m, k) c^{k-1}
        return sum(comb(m, k) * comb(m, k - 1) // m * cn ** (k - 1) for k in range(1, m + 1))
    if family == "ordinary":
        m = _check_order(m, 0)
        if t != 0.0:
            raise DomainError("the ordinary-inverse limit is defined at t = 0 only")
        if cn >= 1:
            raise DomainError("the ordinary inverse needs c < 1")
        b = _w_series(0.0, cn, m + 1)
        return (-1) ** m * b[m + 1] / cn
    raise ArgumentError(f"unknown family {family!r}; choose from {FAMILIES}")
