"""Data model, sample covariance and the generalized inverses of it.

The population covariance is carried spectrally (eigenvalues plus an
orthonormal basis). Every inverse of the sample covariance is built from a
symmetric eigendecomposition, so the spectrum can be reused by estimators
that need it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
import numpy.typing as npt

from .errors import ArgumentError, SingularityError

__all__ = [
    "SpectralModel",
    "ObservationMatrix",
    "GeneralizedInverse",
    "WeightMatrix",
    "SampleSpectrum",
    "as_rng",
    "as_weight",
    "paper_mix_eigenvalues",
    "sample_haar_basis",
    "generate_observations",
    "sample_covariance",
    "sample_spectrum",
    "generalized_inverse",
    "weighted_trace_power",
]

InverseKind = Literal["mp", "ridge", "mpr", "ordinary"]
_KIND_ALIASES = {
    "mp": "mp",
    "moorepenrose": "mp",
    "moore_penrose": "mp",
    "ridge": "ridge",
    "mpr": "mpr",
    "ordinary": "ordinary",
    "inverse": "ordinary",
}


def as_rng(seed: int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------- population


@dataclass(frozen=True)
class SpectralModel:
    """Population covariance Sigma = basis @ diag(eigenvalues) @ basis.T."""

    eigenvalues: np.ndarray
    basis: np.ndarray | None = None

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float).reshape(-1)
        if lam.size == 0:
            raise ArgumentError("empty spectrum")
        if not np.all(np.isfinite(lam)) or lam.min() <= 0:
            raise ArgumentError("eigenvalues must be finite and strictly positive")
        object.__setattr__(self, "eigenvalues", lam)
        if self.basis is not None:
            q = np.asarray(self.basis, dtype=float)
            if q.shape != (lam.size, lam.size):
                raise ArgumentError(f"basis must be {lam.size}x{lam.size}, got {q.shape}")
            if np.abs(q.T @ q - np.eye(lam.size)).max() > 1e-10:
                raise ArgumentError("basis is not orthonormal")
            object.__setattr__(self, "basis", q)

    @property
    def p(self) -> int:
        return self.eigenvalues.size

    @classmethod
    def identity(cls, p: int) -> "SpectralModel":
        return cls(np.ones(p))

    @classmethod
    def paper_mix(cls, p: int, basis: np.ndarray | None = None) -> "SpectralModel":
        return cls(paper_mix_eigenvalues(p), basis)

    def matrix_function(self, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        vals = f(self.eigenvalues)
        if self.basis is None:
            return np.diag(vals)
        return (self.basis * vals) @ self.basis.T

    def matrix(self) -> np.ndarray:
        return self.matrix_function(lambda x: x)

    def sqrt(self) -> np.ndarray:
        return self.matrix_function(np.sqrt)

    def inverse(self) -> np.ndarray:
        return self.matrix_function(lambda x: 1.0 / x)

    def rotate(self, x: np.ndarray) -> np.ndarray:
        """Express vectors (columns of x) in the eigenbasis."""
        return x if self.basis is None else self.basis.T @ x


def paper_mix_eigenvalues(p: int) -> np.ndarray:
    """20% ones, 40% threes, the remainder tens (counts rounded down, tens fill)."""
    if p < 1:
        raise ArgumentError("p must be >= 1")
    n1 = int(round(0.2 * p))
    n3 = int(round(0.4 * p))
    n10 = p - n1 - n3
    return np.concatenate([np.ones(n1), np.full(n3, 3.0), np.full(n10, 10.0)])


def sample_haar_basis(p: int, seed: int | np.random.Generator | None = None) -> np.ndarray:
    """Haar-distributed orthogonal p x p matrix via QR with R-diagonal sign fix."""
    if p < 1:
        raise ArgumentError("p must be >= 1")
    rng = as_rng(seed)
    z = rng.standard_normal((p, p))
    q, r = np.linalg.qr(z)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


# ---------------------------------------------------------------- sample side


@dataclass(frozen=True)
class ObservationMatrix:
    """p x n data matrix; columns are observations."""

    data: np.ndarray
    mean: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.data, dtype=float)
        if y.ndim != 2:
            raise ArgumentError("data must be a 2-d array (p x n)")
        if not np.all(np.isfinite(y)):
            raise ArgumentError("data contains non-finite entries")
        object.__setattr__(self, "data", y)
        if self.mean is not None:
            mu = np.asarray(self.mean, dtype=float).reshape(-1)
            if mu.size != y.shape[0]:
                raise ArgumentError("mean length must equal p")
            object.__setattr__(self, "mean", mu)

    @property
    def p(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def cn(self) -> float:
        return self.p / self.n


def _as_obs(y) -> ObservationMatrix:
    return y if isinstance(y, ObservationMatrix) else ObservationMatrix(np.asarray(y, dtype=float))


def generate_observations(
    model: SpectralModel,
    n: int,
    dist: str = "normal",
    mean: npt.ArrayLike | None = None,
    seed: int | np.random.Generator | None = None,
) -> ObservationMatrix:
    """Y = mu 1^T + Sigma^{1/2} X with unit-variance iid entries of X."""
    if n < 2:
        raise ArgumentError("n must be >= 2")
    rng = as_rng(seed)
    p = model.p
    if dist == "normal":
        x = rng.standard_normal((p, n))
    elif dist == "scaled_t5":
        z = rng.standard_normal((p, n))
        chi = rng.chisquare(5, size=(p, n))
        x = z / np.sqrt(chi / 5.0) * np.sqrt(3.0 / 5.0)
    else:
        raise ArgumentError(f"unknown distribution {dist!r}; use 'normal' or 'scaled_t5'")
    if model.basis is None:
        y = np.sqrt(model.eigenvalues)[:, None] * x
    else:
        y = model.basis @ (np.sqrt(model.eigenvalues)[:, None] * (model.basis.T @ x))
    mu = np.zeros(p) if mean is None else np.asarray(mean, dtype=float).reshape(-1)
    if mu.size != p:
        raise ArgumentError("mean length must equal p")
    return ObservationMatrix(y + mu[:, None], mu)


def sample_covariance(y: ObservationMatrix | np.ndarray) -> np.ndarray:
    """S = (1/n) Y Y^T - ybar ybar^T."""
    obs = _as_obs(y)
    if obs.n < 2:
        raise ArgumentError("n must be >= 2")
    yc = obs.data - obs.data.mean(axis=1, keepdims=True)
    s = yc @ yc.T / obs.n
    return (s + s.T) / 2


@dataclass(frozen=True)
class SampleSpectrum:
    """Thin eigendecomposition of a PSD matrix: only the non-null part is kept.

    ``values`` are the r eigenvalues above the rank cutoff and ``vectors`` the
    matching p x r orthonormal columns. Spectral functions f(S) are applied as
    f(S) = U diag(f(values)) U^T + f(0) (I - U U^T).
    """

    p: int
    values: np.ndarray
    vectors: np.ndarray

    @property
    def rank(self) -> int:
        return self.values.size

    def quad_diag(self, theta: "WeightMatrix") -> tuple[np.ndarray, float]:
        """(u_i^T Theta u_i for each kept i, tr Theta)."""
        return theta.quad_diag(self.vectors), theta.trace()

    def trace(self, f: Callable[[np.ndarray], np.ndarray], f0: float, theta: "WeightMatrix | None" = None) -> float:
        """tr[f(S) Theta]; Theta = I when omitted."""
        fv = f(self.values)
        if theta is None:
            return float(fv.sum() + f0 * (self.p - self.rank))
        qd, tr = self.quad_diag(theta)
        return float(fv @ qd + f0 * (tr - qd.sum()))

    def matrix(self, f: Callable[[np.ndarray], np.ndarray], f0: float) -> np.ndarray:
        u = self.vectors
        out = (u * (f(self.values) - f0)) @ u.T
        if f0 != 0.0:
            out[np.diag_indices(self.p)] += f0
        return (out + out.T) / 2


def _cutoff(values: np.ndarray, p: int, rank_tol: float | None) -> float:
    top = float(values.max()) if values.size else 0.0
    tol = p * np.finfo(float).eps if rank_tol is None else rank_tol
    return tol * top


def sample_spectrum(
    y: ObservationMatrix | np.ndarray | None = None,
    *,
    s: np.ndarray | None = None,
    rank_tol: float | None = None,
) -> SampleSpectrum:
    """Non-null spectrum of S, from data (dual Gram trick when p > n) or from S."""
    if (y is None) == (s is None):
        raise ArgumentError("pass exactly one of y or s")
    if s is not None:
        s = np.asarray(s, dtype=float)
        p = s.shape[0]
        vals, vecs = np.linalg.eigh((s + s.T) / 2)
    else:
        obs = _as_obs(y)
        p, n = obs.p, obs.n
        yc = (obs.data - obs.data.mean(axis=1, keepdims=True)) / np.sqrt(n)
        if p > n:
            # nonzero spectrum of yc yc^T equals that of the n x n Gram matrix
            gvals, gvecs = np.linalg.eigh(yc.T @ yc)
            keep = gvals > _cutoff(gvals, p, rank_tol)
            gvals, gvecs = gvals[keep], gvecs[:, keep]
            vecs = yc @ gvecs / np.sqrt(gvals)
            # one Gram-Schmidt pass restores orthonormality lost to rounding
            vecs, _ = np.linalg.qr(vecs)
            vecs = vecs * np.sign(np.sum(vecs * (yc @ gvecs), axis=0))
            return SampleSpectrum(p, gvals, vecs)
        s_mat = yc @ yc.T
        vals, vecs = np.linalg.eigh((s_mat + s_mat.T) / 2)
    keep = vals > _cutoff(vals, p, rank_tol)
    return SampleSpectrum(p, vals[keep], vecs[:, keep])


# ---------------------------------------------------------------- weights


@dataclass(frozen=True)
class WeightMatrix:
    """Symmetric weight Theta, either dense or sum_i s_i theta_i theta_i^T.

    ``signs`` default to +1; a signed low-rank form represents symmetrized
    outer products such as (a b^T + b a^T)/2.
    """

    dense: np.ndarray | None = None
    vectors: np.ndarray | None = None
    signs: np.ndarray | None = None
    scale_note: str = ""

    def __post_init__(self):
        if (self.dense is None) == (self.vectors is None):
            raise ArgumentError("give exactly one of dense or vectors")
        if self.dense is not None:
            d = np.asarray(self.dense, dtype=float)
            if d.ndim != 2 or d.shape[0] != d.shape[1]:
                raise ArgumentError("dense weight must be square")
            if np.abs(d - d.T).max() > 1e-10 * max(1.0, np.abs(d).max()):
                raise ArgumentError("dense weight must be symmetric; symmetrize first")
            object.__setattr__(self, "dense", (d + d.T) / 2)
        else:
            v = np.asarray(self.vectors, dtype=float)
            if v.ndim == 1:
                v = v[:, None]
            if not np.all(np.isfinite(v)):
                raise ArgumentError("weight vectors must be finite")
            object.__setattr__(self, "vectors", v)
            sg = np.ones(v.shape[1]) if self.signs is None else np.asarray(self.signs, dtype=float)
            if sg.shape != (v.shape[1],):
                raise ArgumentError("one sign per vector")
            object.__setattr__(self, "signs", sg)

    @property
    def p(self) -> int:
        return self.dense.shape[0] if self.dense is not None else self.vectors.shape[0]

    @property
    def is_lowrank(self) -> bool:
        return self.vectors is not None

    @classmethod
    def identity_over_p(cls, p: int) -> "WeightMatrix":
        return cls(dense=np.eye(p) / p, scale_note="I/p")

    @classmethod
    def symmetrized_outer(cls, a: npt.ArrayLike, b: npt.ArrayLike, note: str = "") -> "WeightMatrix":
        """(a b^T + b a^T)/2 = ((a+b)(a+b)^T - (a-b)(a-b)^T)/4, in signed low-rank form."""
        a = np.asarray(a, dtype=float).reshape(-1)
        b = np.asarray(b, dtype=float).reshape(-1)
        vecs = np.column_stack([(a + b) / 2, (a - b) / 2])
        return cls(vectors=vecs, signs=np.array([1.0, -1.0]), scale_note=note or "sym(ab^T)")

    def to_dense(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        return (self.vectors * self.signs) @ self.vectors.T

    def trace(self) -> float:
        if self.dense is not None:
            return float(np.trace(self.dense))
        return float(np.sum(self.signs * np.sum(self.vectors**2, axis=0)))

    def quad_diag(self, u: np.ndarray) -> np.ndarray:
        """diag(U^T Theta U) for the columns of u."""
        if self.dense is not None:
            return np.einsum("ij,ij->j", u, self.dense @ u)
        proj = u.T @ self.vectors
        return (proj**2) @ self.signs

    def scaled(self, factor: float) -> "WeightMatrix":
        if self.dense is not None:
            return WeightMatrix(dense=self.dense * factor, scale_note=self.scale_note)
        return WeightMatrix(vectors=self.vectors, signs=self.signs * factor, scale_note=self.scale_note)


def as_weight(theta, p: int | None = None) -> WeightMatrix:
    if isinstance(theta, WeightMatrix):
        w = theta
    else:
        w = WeightMatrix(dense=np.asarray(theta, dtype=float))
    if p is not None and w.p != p:
        raise ArgumentError(f"weight dimension {w.p} does not match p={p}")
    return w


# ---------------------------------------------------------------- inverses


@dataclass(frozen=True)
class GeneralizedInverse:
    kind: str
    t: float
    matrix: np.ndarray
    rank: int
    spectrum: SampleSpectrum | None = field(default=None, repr=False, compare=False)

    @property
    def p(self) -> int:
        return self.matrix.shape[0]


def _inverse_functions(kind: str, t: float) -> tuple[Callable, float]:
    if kind == "mp":
        return (lambda x: 1.0 / x), 0.0
    if kind == "ridge":
        return (lambda x: 1.0 / (x + t)), 1.0 / t
    if kind == "mpr":
        return (lambda x: x / (x + t) ** 2), 0.0
    if kind == "ordinary":
        return (lambda x: 1.0 / x), 0.0
    raise ArgumentError(f"unknown inverse kind {kind!r}")


def _normalize_kind(kind: str) -> str:
    key = str(kind).lower().replace("-", "_")
    if key not in _KIND_ALIASES:
        raise ArgumentError(f"unknown inverse kind {kind!r}; use mp, ridge, mpr or ordinary")
    return _KIND_ALIASES[key]


def generalized_inverse(
    s: np.ndarray | SampleSpectrum,
    kind: str = "mp",
    t: float = 0.0,
    rank_tol: float | None = None,
) -> GeneralizedInverse:
    """Moore-Penrose, ridge (S+tI)^{-1}, MPR (S+tI)^{-1} S (S+tI)^{-1} or S^{-1}."""
    kind = _normalize_kind(kind)
    if kind in ("ridge", "mpr") and not t > 0:
        raise ArgumentError(f"{kind} inverse needs t > 0, got {t}")
    spec = s if isinstance(s, SampleSpectrum) else sample_spectrum(s=np.asarray(s, dtype=float), rank_tol=rank_tol)
    if kind == "ordinary" and spec.rank < spec.p:
        raise SingularityError(f"S has rank {spec.rank} < p={spec.p}; ordinary inverse undefined")
    f, f0 = _inverse_functions(kind, t)
    mat = spec.matrix(f, f0)
    rank = spec.p if kind == "ridge" else spec.rank
    return GeneralizedInverse(kind, float(t), mat, rank, spec)


def weighted_trace_power(g: GeneralizedInverse | np.ndarray, m: int, theta) -> float:
    """tr(G^m Theta); low-rank Theta uses quadratic forms theta_i^T G^m theta_i."""
    if m < 1:
        raise ArgumentError("m must be >= 1")
    mat = g.matrix if isinstance(g, GeneralizedInverse) else np.asarray(g, dtype=float)
    w = as_weight(theta, mat.shape[0])
    if w.is_lowrank and m <= 4:
        x = w.vectors
        # G^m = G^{h} G^{m-h}: one or two matrix-vector sweeps, no dense power
        half = m // 2
        left = x
        for _ in range(half):
            left = mat @ left
        right = left
        for _ in range(m - 2 * half):
            right = mat @ right
        return float(np.sum(w.signs * np.sum(left * right, axis=0)))
    gm = np.linalg.matrix_power(mat, m)
    return float(np.sum(gm * w.to_dense()))
