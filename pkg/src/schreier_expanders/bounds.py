"""Upper bounds on E|mu_2| for random Schreier graphs of GL_k(F_2).

``d`` here is the number of random matrices: regular graphs have degree
2d, bipartite graphs degree d on each side.

The improved bounds are assembled as one exact rational
    T(m) = n * P(closed walk of length 2m)
from integer word counts; only the final (T - 1)^(1/2m) is taken in
floating point, with a 256-bit mantissa.  T <= 1 makes the bound vacuous at
that m, which is recorded as +inf rather than raised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import List, Optional, Tuple

import mpmath

from .census import CensusTable

PRECISION_BITS = 256
VARIANTS = ("single-normalization", "as-printed")
DEFAULT_BIPARTITE_VARIANT = "single-normalization"


class BoundError(ValueError):
    pass


@dataclass
class BoundResult:
    kind: str
    k: int
    d: int
    value: float
    m_used: int
    ramanujan: float
    trace: List[Tuple[int, float]] = field(default_factory=list)
    variant: str = ""

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "k": self.k,
            "d": self.d,
            "m_used": self.m_used,
            "value": _finite_or_none(self.value),
            "ramanujan": _finite_or_none(self.ramanujan),
            "trace": [[m, _finite_or_none(v)] for m, v in self.trace],
            "variant": self.variant,
        }


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


def _root(numerator: int, denominator: int, two_m: int) -> float:
    """(numerator/denominator - 1)^(1/2m), or inf when the base is <= 0."""
    excess = numerator - denominator
    if excess <= 0:
        return math.inf
    with mpmath.workprec(PRECISION_BITS):
        return float(mpmath.root(mpmath.mpf(excess) / mpmath.mpf(denominator), two_m))


def _check_q(q: int) -> None:
    if q != 2:
        raise BoundError("the improved bounds are proven for F_2 only (q = 2)")


def _check(k: int, d: int, m: int) -> None:
    if k < 2:
        raise BoundError("k must be >= 2")
    if d < 1 or m < 1:
        raise BoundError("d and m must be >= 1")


def ramanujan_regular(d: int) -> float:
    """Normalized Ramanujan threshold for degree 2d."""
    return 2 * math.sqrt(2 * d - 1) / (2 * d)


def ramanujan_bipartite(d: int) -> float:
    return 2 * math.sqrt(d - 1) / d


def bound_prop1(n: int, d: int) -> float:
    """e * sqrt(ln n / d)."""
    if n < 2 or d < 1:
        raise BoundError("need n >= 2 and d >= 1")
    return math.e * math.sqrt(math.log(n) / d)


def regular_terms(k: int, d: int, m: int, table: Optional[CensusTable] = None) -> Tuple[int, int]:
    """T(m) for the regular bound as an integer fraction (numerator, denominator)."""
    _check(k, d, m)
    t = CensusTable() if table is None else table
    n = 2**k - 1
    L = 2 * m
    scale = factorial(m + 1)  # clears the 2^i/(i+1)! denominators
    num = 0
    falling = 1
    choose_d = 1
    for i in range(1, m + 1):
        falling *= (L - 2 * i + 2) * (L - 2 * i + 1)
        choose_d = choose_d * (d - i + 1) // i
        if choose_d == 0:
            break
        x3 = t.count(True, 3, 1, L - 2 * i, d - i)
        x4 = t.count(True, 4, 0, L - 2 * i, d - i)
        same_sign = (2**i - 1) * (x3 + x4) * 2
        crossing = x3 + x4
        nested = (scale // factorial(i + 1)) * 2**i * (5 * x3 + n * x4)
        num += choose_d * falling * ((same_sign + crossing) * scale + nested)
    x1 = t.count(True, 1, 1, L, d)
    x3 = t.count(True, 3, 1, L, d)
    x4 = t.count(True, 4, 0, L, d)
    num += scale * (x1 + 5 * x3 + n * x4)
    return num, scale * (2 * d) ** L


def bound_regular(k: int, d: int, m: int, q: int = 2, table: Optional[CensusTable] = None) -> float:
    _check_q(q)
    num, den = regular_terms(k, d, m, table)
    return _root(num, den, 2 * m)


def bipartite_terms(k: int, d: int, m: int, variant: str = DEFAULT_BIPARTITE_VARIANT,
                    table: Optional[CensusTable] = None) -> Tuple[int, int]:
    """T(m) for the bipartite bound.

    ``as-printed`` applies the 1/d^(2m) word normalization a second time to
    the well-parenthesized sum; ``single-normalization`` applies it once to
    the whole bracket.
    """
    _check(k, d, m)
    if variant not in VARIANTS:
        raise BoundError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    t = CensusTable() if table is None else table
    n = 2**k - 1
    L = 2 * m
    scale = factorial(m + 1)
    nested = 0
    falling = 1
    choose_d = 1
    for i in range(1, m + 1):
        falling *= (L - 2 * i + 2) * (L - 2 * i + 1)
        choose_d = choose_d * (d - i + 1) // i
        if choose_d == 0:
            break
        y3 = t.count(False, 3, 1, L - 2 * i, d - i)
        y4 = t.count(False, 4, 0, L - 2 * i, d - i)
        # (1/2)^i * 2^i cancel
        nested += choose_d * falling * (scale // factorial(i + 1)) * (5 * y3 + n * y4)
    y1 = t.count(False, 1, 1, L, d)
    y2 = t.count(False, 2, 1, L, d)
    y3 = t.count(False, 3, 1, L, d)
    y4 = t.count(False, 4, 0, L, d)
    rest = scale * (y1 + 2 * y2 + 5 * y3 + n * y4)
    words = d**L
    if variant == "as-printed":
        return nested + rest * words, scale * words * words
    return nested + rest, scale * words


def bound_bipartite(k: int, d: int, m: int, variant: str = DEFAULT_BIPARTITE_VARIANT,
                    q: int = 2, table: Optional[CensusTable] = None) -> float:
    _check_q(q)
    num, den = bipartite_terms(k, d, m, variant, table)
    return _root(num, den, 2 * m)


def m_cap(k: int) -> int:
    return max(2 * k, 200)


def optimize_m(kind: str, k: int, d: int, variant: str = DEFAULT_BIPARTITE_VARIANT,
               q: int = 2) -> BoundResult:
    """Sweep m = 1, 2, ... until the bound rises above the previous value.

    One census table is shared across the sweep.
    """
    _check_q(q)
    table = CensusTable()
    if kind == "regular":
        evaluate = lambda m: bound_regular(k, d, m, table=table)
        ram, variant = ramanujan_regular(d), "trace-regular"
    elif kind == "bipartite":
        evaluate = lambda m: bound_bipartite(k, d, m, variant, table=table)
        ram = ramanujan_bipartite(d)
    else:
        raise BoundError(f"optimize_m handles 'regular' or 'bipartite', not {kind!r}")
    trace: List[Tuple[int, float]] = []
    prev = None
    for m in range(1, m_cap(k) + 1):
        v = evaluate(m)
        trace.append((m, v))
        if prev is not None and v > prev:
            break
        prev = v
    best_m, best = min(trace, key=lambda mv: (mv[1], mv[0]))
    return BoundResult(kind, k, d, best, best_m, ram, trace, variant)


def prop1_result(k: int, d: int, q: int = 2) -> BoundResult:
    """Closed-form bound wrapped as a BoundResult; m_used = 0 (no sweep)."""
    n = q**k - 1
    return BoundResult("prop1", k, d, bound_prop1(n, d), 0, ramanujan_regular(d), [], "closed-form")


def bound_merged(d1: int, gamma: int, alpha: float) -> float:
    """sqrt(d1 * d2) * alpha with d2 = gamma * d1 (non-normalized eigenvalue)."""
    if d1 < 1 or gamma < 1 or alpha < 0:
        raise BoundError("need d1 >= 1, gamma >= 1, alpha >= 0")
    return math.sqrt(d1 * gamma * d1) * alpha


def merged_result(k: int, d: int, gamma: int, alpha: Optional[float] = None,
                  variant: str = DEFAULT_BIPARTITE_VARIANT) -> BoundResult:
    """Merged-graph bound; alpha defaults to the optimized bipartite bound."""
    if alpha is None:
        base = optimize_m("bipartite", k, d, variant)
        alpha, m_used, trace = base.value, base.m_used, base.trace
        how = f"bipartite-{variant}"
    else:
        m_used, trace, how = 0, [], "given-alpha"
    d2 = gamma * d
    ram = math.sqrt(d - 1) + math.sqrt(d2 - 1) if d >= 2 else math.nan
    return BoundResult("merged", k, d, bound_merged(d, gamma, alpha), m_used, ram, trace, how)


def collapse_bound_holds(m: int, d: int) -> bool:
    """Exact check of P(collapse) <= (2/d)^m."""
    from .census import collapse_probability

    return collapse_probability(m, d) <= Fraction(2, d) ** m
