"""Data-driven estimators of v^(m)(t), h_k, d_k and q_k.

Every quantity is computed from the cached thin spectrum of the sample
covariance, so no dense matrix powers are formed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import factorial
from numbers import Real

import numpy as np

from .errors import ArgumentError, DegeneracyError, DomainError
from .randmat import (
    ObservationMatrix,
    SampleSpectrum,
    WeightMatrix,
    as_weight,
    sample_covariance,
    sample_spectrum,
)

__all__ = [
    "PluginContext",
    "UNSTABLE_BAND",
    "hat_v_derivative",
    "hat_h",
    "hat_d",
    "hat_q",
]

# concentration ratios just above one make S^+ numerically unstable
UNSTABLE_BAND = (1.0, 1.05)


@dataclass(frozen=True)
class PluginContext:
    """Sample covariance of one data set with its cached thin spectrum.

    Built from raw data, the context removes the sample mean and then works
    with the effective sample size n - 1 and the matching unbiased covariance
    n S / (n - 1), so that ``S`` and ``n`` describe a Wishart matrix with
    ``n`` degrees of freedom. ``n_obs`` keeps the number of columns and
    ``dof_scale`` the factor applied to the centered sample covariance.
    """

    S: np.ndarray
    n: int
    spectrum: SampleSpectrum
    flags: tuple = ()
    n_obs: int | None = None
    dof_scale: float = 1.0
    _mp: list = field(default_factory=list, repr=False, compare=False)

    @property
    def p(self) -> int:
        return self.S.shape[0]

    @property
    def cn(self) -> float:
        return self.p / self.n

    @property
    def mp(self) -> np.ndarray:
        """Moore-Penrose inverse of S (built once on first use)."""
        if not self._mp:
            self._mp.append(self.spectrum.matrix(lambda x: 1.0 / x, 0.0))
        return self._mp[0]

    @property
    def unstable(self) -> bool:
        return "near_singular_ratio" in self.flags

    @property
    def sample_cov(self) -> np.ndarray:
        """The centered sample covariance (1/n_obs) Y Y^T - ybar ybar^T."""
        return self.S / self.dof_scale

    @classmethod
    def from_data(
        cls, y: ObservationMatrix | np.ndarray, rank_tol: float | None = None, effective_n: bool = True
    ) -> "PluginContext":
        obs = y if isinstance(y, ObservationMatrix) else ObservationMatrix(np.asarray(y, dtype=float))
        s = sample_covariance(obs)
        spec = sample_spectrum(obs, rank_tol=rank_tol)
        if not effective_n:
            return cls._build(s, obs.n, spec, n_obs=obs.n)
        scale = obs.n / (obs.n - 1)
        spec = SampleSpectrum(spec.p, spec.values * scale, spec.vectors)
        return cls._build(s * scale, obs.n - 1, spec, n_obs=obs.n, dof_scale=scale)

    @classmethod
    def from_covariance(cls, s: np.ndarray, n: int, rank_tol: float | None = None) -> "PluginContext":
        s = np.asarray(s, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ArgumentError("S must be square")
        if int(n) != n or n < 1:
            raise ArgumentError("n must be a positive integer")
        return cls._build((s + s.T) / 2, int(n), sample_spectrum(s=s, rank_tol=rank_tol))

    @classmethod
    def _build(cls, s: np.ndarray, n: int, spec: SampleSpectrum, n_obs=None, dof_scale=1.0) -> "PluginContext":
        flags = []
        cn = s.shape[0] / n
        if UNSTABLE_BAND[0] < cn <= UNSTABLE_BAND[1]:
            flags.append("near_singular_ratio")
            warnings.warn(
                f"c = {cn:.4f} is close to one; Moore-Penrose based estimates are unstable",
                RuntimeWarning,
                stacklevel=3,
            )
        return cls(s, n, spec, tuple(flags), n if n_obs is None else n_obs, dof_scale)

    # ------------------------------------------------------------ traces

    def weight_diag(self, theta) -> tuple[np.ndarray, float]:
        """(u_i^T Theta u_i over kept eigenvectors, tr Theta).

        A real scalar a stands for a * I; scalar multiples of I given as
        dense matrices are detected to skip the projection.
        """
        r = self.spectrum.rank
        if isinstance(theta, Real):
            a = float(theta)
            return np.full(r, a), a * self.p
        w = as_weight(theta, self.p)
        if w.dense is not None:
            d = w.dense
            a = d[0, 0]
            diag = np.diag(d)
            if np.all(diag == a) and np.count_nonzero(d) == np.count_nonzero(diag):
                return np.full(r, a), a * self.p
        return w.quad_diag(self.spectrum.vectors), w.trace()

    def trace_pinv_power(self, j: int, theta=None) -> float:
        """tr[(S^+)^j Theta], or (1/p) tr[(S^+)^j] when theta is None."""
        lam = self.spectrum.values
        if theta is None:
            return float(np.sum(lam ** (-j))) / self.p
        q, _ = self.weight_diag(theta)
        return float(np.sum(lam ** (-j) * q))

    def trace_ridge_power(self, j: int, t: float, theta=None) -> float:
        """tr[(S + tI)^{-j} Theta], or (1/p) tr[(S + tI)^{-j}] when theta is None."""
        lam = self.spectrum.values
        null = t ** (-j)
        if theta is None:
            return (float(np.sum((lam + t) ** (-j))) + null * (self.p - lam.size)) / self.p
        q, tr = self.weight_diag(theta)
        return float(np.sum((lam + t) ** (-j) * q) + null * (tr - q.sum()))

    def trace_power(self, j: int, theta=None) -> float:
        """tr[S^j Theta], or (1/p) tr[S^j] when theta is None (j >= 1)."""
        lam = self.spectrum.values
        if theta is None:
            return float(np.sum(lam**j)) / self.p
        q, _ = self.weight_diag(theta)
        return float(np.sum(lam**j * q))

    def null_trace(self, theta) -> float:
        """tr[(I - S S^+) Theta]."""
        q, tr = self.weight_diag(theta)
        return float(tr - q.sum())



def _need_singular(ctx: PluginContext, what: str):
    if ctx.p <= ctx.n:
        raise DomainError(f"{what} at t = 0 needs p > n (got p={ctx.p}, n={ctx.n})")


def _pinv_p2(ctx: PluginContext) -> float:
    p2 = ctx.trace_pinv_power(2)
    if not p2 > 0 or not np.isfinite(p2):
        raise DegeneracyError("(1/p) tr[(S^+)^2] is zero; S is degenerate", "tr_pinv2")
    return p2


def hat_v_derivative(ctx: PluginContext, m: int, t: float = 0.0) -> float:
    """Plug-in estimate of v^(m)(t).

    t = 0:  (-1)^m m! c (1/p) tr[(S^+)^{m+1}]
    t > 0:  (-1)^m m! c ((1/p) tr[(S + tI)^{-(m+1)}] - t^{-(m+1)} (c - 1)/c)
    """
    if int(m) != m or m < 0 or m > 8:
        raise ArgumentError(f"m must be an integer in [0, 8], got {m}")
    m = int(m)
    t = float(t)
    if t < 0:
        raise ArgumentError("t must be >= 0")
    c = ctx.cn
    sign = (-1) ** m * factorial(m) * c
    if t == 0.0:
        _need_singular(ctx, "v-hat")
        return sign * ctx.trace_pinv_power(m + 1)
    lam = ctx.spectrum.values
    # the null-space part t^{-(m+1)} (p - r)/p and the correction t^{-(m+1)} (p - n)/p
    # are combined first; they cancel exactly when rank S = n
    null = (ctx.n - lam.size) / ctx.p
    return sign * (float(np.sum((lam + t) ** (-(m + 1)))) / ctx.p + null * t ** (-(m + 1)))


def hat_h(ctx: PluginContext, k: int) -> float:
    """h_2 = 1/(c P_2), h_3 = P_3/(c^2 P_2^3) with P_j = (1/p) tr[(S^+)^j]."""
    _need_singular(ctx, "h-hat")
    c = ctx.cn
    p2 = _pinv_p2(ctx)
    if k == 2:
        return 1.0 / (c * p2)
    if k == 3:
        return ctx.trace_pinv_power(3) / (c**2 * p2**3)
    raise ArgumentError(f"h-hat is available for k in (2, 3), got {k}")


def hat_d(ctx: PluginContext, k: int, theta, t: float = 0.0) -> float:
    """Plug-in estimate of d_k(Theta) (t = 0, k = 1..3) or d_k(t, Theta) (k = 0, 1).

    k = 0 works for every t >= 0; at t = 0 it is tr[(I - S S^+) Theta].
    k >= 1 at t = 0 uses the Moore-Penrose family, k = 1 at t > 0 the ridge family.
    """
    t = float(t)
    if t < 0:
        raise ArgumentError("t must be >= 0")
    c = ctx.cn
    if k == 0:
        if t == 0.0:
            return ctx.null_trace(theta)
        return t * ctx.trace_ridge_power(1, t, theta)
    if t > 0:
        if k != 1:
            raise ArgumentError(f"for t > 0 only k in (0, 1) is available, got k={k}")
        # t tr[(S+tI)^{-2} Theta] - tr[(S+tI)^{-1} Theta]; the null-space parts cancel
        q, _ = ctx.weight_diag(theta)
        lam = ctx.spectrum.values
        num = -float(np.sum(q * lam / (lam + t) ** 2))
        vp = hat_v_derivative(ctx, 1, t)
        if vp == 0.0:
            raise DegeneracyError("v-hat'(t) vanished", "hat_v1")
        return num / vp
    _need_singular(ctx, "d-hat")
    p2 = _pinv_p2(ctx)
    t1 = ctx.trace_pinv_power(1, theta)
    if k == 1:
        return t1 / (c * p2)
    p3 = ctx.trace_pinv_power(3)
    t2 = ctx.trace_pinv_power(2, theta)
    if k == 2:
        return (t1 * p3 - p2 * t2) / (c**2 * p2**3)
    if k == 3:
        p4 = ctx.trace_pinv_power(4)
        t3 = ctx.trace_pinv_power(3, theta)
        # expansion of (v'v''d_2 - v'''d_1/6 - s_3)/v'^3 in the P_j, T_j traces
        return (
            t3 / (c**3 * p2**3)
            + 2.0 * p3**2 * t1 / (c**3 * p2**5)
            - (2.0 * p3 * t2 + p4 * t1) / (c**3 * p2**4)
        )
    raise ArgumentError(f"d-hat at t = 0 is available for k in (0, 1, 2, 3), got {k}")


def hat_q(ctx: PluginContext, order: int, theta) -> float:
    """q_1 = tr[S Theta]; q_2 = tr[S^2 Theta] - c (1/p) tr[S] tr[S Theta]."""
    s1 = ctx.trace_power(1, theta)
    if order == 1:
        return s1
    if order == 2:
        return ctx.trace_power(2, theta) - ctx.cn * ctx.trace_power(1) * s1
    raise ArgumentError(f"q-hat order must be 1 or 2, got {order}")
