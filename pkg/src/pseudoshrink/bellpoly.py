"""Partial exponential Bell polynomials B_{m,k}.

B_{m,k}(x_1, ..., x_{m-k+1}) sums, over all non-negative integer sequences
(j_1, ..., j_{m-k+1}) with sum j_l = k and sum l*j_l = m, the terms

    m! / (j_1! ... j_{m-k+1}!) * prod_l (x_l / l!)^{j_l}.

Coefficients are Python integers, so the result is exact whenever the
arguments are ints or Fractions. Float arguments give a float.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial
from numbers import Rational
from typing import Iterator, Sequence

from .errors import ArgumentError

__all__ = [
    "BellArguments",
    "bell_partial",
    "bell_terms",
    "bell_row",
]


@dataclass(frozen=True)
class BellArguments:
    m: int
    k: int
    x: tuple

    def __post_init__(self):
        if not isinstance(self.m, int) or not isinstance(self.k, int):
            raise ArgumentError("m and k must be integers")
        if self.k < 1 or self.m < self.k:
            raise ArgumentError(f"need m >= k >= 1, got m={self.m}, k={self.k}")
        if len(self.x) != self.m - self.k + 1:
            raise ArgumentError(
                f"B_{{{self.m},{self.k}}} takes {self.m - self.k + 1} arguments, got {len(self.x)}"
            )


def _sequences(m: int, k: int, width: int) -> Iterator[tuple[int, ...]]:
    # depth-first over j_width, j_{width-1}, ..., j_1; largest part first keeps
    # the remaining budget small so dead branches are cut early
    out = [0] * width

    def rec(pos: int, parts_left: int, weight_left: int):
        if pos == 0:
            if parts_left == weight_left:  # j_1 absorbs the rest
                out[0] = parts_left
                yield tuple(out)
            return
        size = pos + 1
        top = min(parts_left, weight_left // size)
        for j in range(top, -1, -1):
            # remaining parts each weigh at least 1
            if weight_left - j * size < parts_left - j:
                continue
            out[pos] = j
            yield from rec(pos - 1, parts_left - j, weight_left - j * size)
        out[pos] = 0

    yield from rec(width - 1, k, m)


@lru_cache(maxsize=None)
def bell_terms(m: int, k: int) -> tuple[tuple[int, tuple[int, ...]], ...]:
    """All (integer coefficient, j-sequence) pairs of B_{m,k}.

    The coefficient folds in the 1/l! factors, i.e. it is
    m! / prod(j_l! * (l!)^{j_l}), which is always an integer.
    """
    BellArguments(m, k, (0,) * (m - k + 1))
    width = m - k + 1
    terms = []
    for js in _sequences(m, k, width):
        denom = 1
        for l, j in enumerate(js, start=1):
            denom *= factorial(j) * factorial(l) ** j
        coef, rem = divmod(factorial(m), denom)
        assert rem == 0
        terms.append((coef, js))
    return tuple(terms)


def _is_exact(v) -> bool:
    return isinstance(v, (int, Fraction, Rational)) and not isinstance(v, bool)


def bell_partial(m: int, k: int, x: Sequence) -> int | Fraction | float:
    """Evaluate B_{m,k}(x_1, ..., x_{m-k+1}).

    >>> bell_partial(4, 2, (1, 2, 3))
    24
    """
    args = BellArguments(int(m), int(k), tuple(x))
    xs = args.x
    exact = all(_is_exact(v) for v in xs)
    if not exact:
        xs = tuple(float(v) for v in xs)
    total = 0 if exact else 0.0
    for coef, js in bell_terms(args.m, args.k):
        term = coef
        for xl, j in zip(xs, js):
            if j:
                term = term * xl**j
        total += term
    return total


def bell_row(m: int, x: Sequence) -> list:
    """Return [B_{m,1}, ..., B_{m,m}] using x_1..x_m (extra entries ignored)."""
    if m < 1:
        raise ArgumentError("m must be >= 1")
    if len(x) < m:
        raise ArgumentError(f"need at least {m} arguments, got {len(x)}")
    return [bell_partial(m, k, tuple(x[: m - k + 1])) for k in range(1, m + 1)]
