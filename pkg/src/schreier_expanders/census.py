"""Exact word counts for the trace method.

Words have length 2m over d letters.  In the signed setting every letter
comes as s or s^-1 (alphabet of 2d literals); in the unsigned setting
(bipartite walks, signs fixed by parity) there are d symbols.  Words are
classified by how often each letter occurs:

    X1  some letter occurs exactly once
    X2  not X1, some letter occurs twice with the same sign
    X2' not X1, some letter occurs twice, all such pairs have opposite signs
    X3  no letter occurs once or twice, some letter exactly three times
    X4  every occurring letter occurs at least four times

and Y1..Y4 likewise without signs.  All counts are exact Python ints.
"""

from __future__ import annotations

import itertools
import threading
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import Dict, Optional, Tuple

ENUMERATION_CAP = 10**7


class CensusTable:
    """Memo for X_p(0, l, d) and Y_p(0, l, d).

    Only c = 0 is stored: X_p(1, l, d) = X_p(0, l, d) - X_{p+1}(0, l, d),
    since the i = 0 term of the sum is exactly X_{p+1}(0, l, d).
    Inserts are guarded so one table can be shared by worker threads.
    """

    def __init__(self):
        self._memo: Dict[Tuple[bool, int, int, int], int] = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._memo)

    def _zero(self, signed: bool, p: int, l: int, d: int) -> int:
        if l == 0:
            return 1
        if p > l:
            return 0
        if 2 * p > l:
            # room for one letter only, repeated l times
            return d * (2**l if signed else 1)
        key = (signed, p, l, d)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        # ways to lay out i letters with p occurrences each, one letter at a time:
        # prod_j (2^p) C(l - jp, p) signed, prod_j C(l - jp, p) unsigned
        sign_factor = 2**p if signed else 1
        total = 0
        ways = 1
        choose_d = 1
        for i in range(0, min(l // p, d) + 1):
            if i:
                ways *= sign_factor * comb(l - (i - 1) * p, p)
                choose_d = choose_d * (d - i + 1) // i
            total += choose_d * ways * self._zero(signed, p + 1, l - p * i, d - i)
        with self._lock:
            self._memo.setdefault(key, total)
        return total

    def count(self, signed: bool, p: int, c: int, l: int, d: int) -> int:
        if min(p, c, l, d) < 0:
            raise ValueError("census arguments must be non-negative")
        if p == 0:
            raise ValueError("occurrence level p must be >= 1")
        if c == 0:
            return self._zero(signed, p, l, d)
        if c == 1:
            if l == 0 or p > l:
                return 0
            return self._zero(signed, p, l, d) - self._zero(signed, p + 1, l, d)
        return _count_direct(self, signed, p, c, l, d)


def _count_direct(table: CensusTable, signed: bool, p: int, c: int, l: int, d: int) -> int:
    # general c: the recursion as written, lower summation limit c
    if c == 0 and l == 0:
        return 1
    if p > l:
        return 0
    sign_factor = 2**p if signed else 1
    total = 0
    ways = 1
    for i in range(0, min(l // p, d) + 1):
        if i:
            ways *= sign_factor * comb(l - (i - 1) * p, p)
        if i >= c:
            total += comb(d, i) * ways * table._zero(signed, p + 1, l - p * i, d - i)
    return total


_default_table = CensusTable()


def count_X(p: int, c: int, l: int, d: int, table: Optional[CensusTable] = None) -> int:
    """Signed words of length l over d letters: at least c letters occur exactly p
    times, every other occurring letter more than p times."""
    return (_default_table if table is None else table).count(True, p, c, l, d)


def count_Y(p: int, c: int, l: int, d: int, table: Optional[CensusTable] = None) -> int:
    """Unsigned analogue of count_X."""
    return (_default_table if table is None else table).count(False, p, c, l, d)


@dataclass(frozen=True)
class WordCensus:
    m: int
    d: int
    signed: bool
    sizes: Dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.sizes.values())


def census_sizes(m: int, d: int, signed: bool = True, table: Optional[CensusTable] = None) -> WordCensus:
    if m < 1 or d < 1:
        raise ValueError("m and d must be >= 1")
    t = _default_table if table is None else table
    L = 2 * m
    if not signed:
        sizes = {
            "Y1": count_Y(1, 1, L, d, t),
            "Y2": count_Y(2, 1, L, d, t),
            "Y3": count_Y(3, 1, L, d, t),
            "Y4": count_Y(4, 0, L, d, t),
        }
        return WordCensus(m, d, False, sizes)
    x2 = x2p = 0
    for i in range(1, m + 1):
        if i > d:
            break
        placed = comb(d, i) * (factorial(L) // factorial(L - 2 * i)) * count_X(3, 0, L - 2 * i, d - i, t)
        x2 += (2**i - 1) * placed
        x2p += placed
    sizes = {
        "X1": count_X(1, 1, L, d, t),
        "X2": x2,
        "X2'": x2p,
        "X3": count_X(3, 1, L, d, t),
        "X4": count_X(4, 0, L, d, t),
    }
    return WordCensus(m, d, True, sizes)


def classify_word(word, signed: bool = True) -> str:
    """Class label of one word; literals are (letter, sign) pairs when signed."""
    letters = Counter(w[0] for w in word) if signed else Counter(word)
    counts = set(letters.values())
    if 1 in counts:
        return "X1" if signed else "Y1"
    if 2 in counts:
        if not signed:
            return "Y2"
        signs: Dict[int, list] = {}
        for letter, sign in word:
            if letters[letter] == 2:
                signs.setdefault(letter, []).append(sign)
        if any(a == b for a, b in signs.values()):
            return "X2"
        return "X2'"
    if 3 in counts:
        return "X3" if signed else "Y3"
    return "X4" if signed else "Y4"


def enumerate_census(m: int, d: int, signed: bool = True) -> WordCensus:
    """Brute-force class sizes by listing every word."""
    size = (2 * d if signed else d) ** (2 * m)
    if size > ENUMERATION_CAP:
        raise ValueError(f"{size} words exceed the enumeration cap {ENUMERATION_CAP}")
    alphabet = [(a, s) for a in range(d) for s in (1, -1)] if signed else list(range(d))
    names = ["X1", "X2", "X2'", "X3", "X4"] if signed else ["Y1", "Y2", "Y3", "Y4"]
    tally = dict.fromkeys(names, 0)
    for word in itertools.product(alphabet, repeat=2 * m):
        tally[classify_word(word, signed)] += 1
    return WordCensus(m, d, signed, tally)


# -- collapse and parenthesization ------------------------------------------

def collapse_probability(m: int, d: int) -> Fraction:
    """Catalan(m) (2d)^m / (2d)^(2m): well-parenthesized words with 2d bracket kinds."""
    if m < 1 or d < 1:
        raise ValueError("m and d must be >= 1")
    return Fraction(comb(2 * m + 1, m) * (2 * d) ** m, (2 * m + 1) * (2 * d) ** (2 * m))


def parenthesized_fraction(i: int) -> Fraction:
    """Fraction of orderings of i inverse pairs with no crossing pattern s..t..s'..t'."""
    if i < 1:
        raise ValueError("i must be >= 1")
    return Fraction(2**i, factorial(i + 1))


def _noncrossing_matchings(positions):
    """All non-crossing perfect matchings of an ordered tuple of positions."""
    if not positions:
        yield ()
        return
    first = positions[0]
    for j in range(1, len(positions), 2):
        inside, outside = positions[1:j], positions[j + 1:]
        for a in _noncrossing_matchings(inside):
            for b in _noncrossing_matchings(outside):
                yield ((first, positions[j]),) + a + b


def count_parenthesized_words(m: int, d: int) -> int:
    """Pairs (word, matching) where the word's 2m literals are split into nested
    inverse pairs; the count behind collapse_probability, by enumeration."""
    if (2 * d) ** (2 * m) > ENUMERATION_CAP:
        raise ValueError("too many words to enumerate")
    literals = [(a, s) for a in range(d) for s in (1, -1)]
    matchings = list(_noncrossing_matchings(tuple(range(2 * m))))
    total = 0
    for word in itertools.product(literals, repeat=2 * m):
        for mt in matchings:
            if all(word[a][0] == word[b][0] and word[a][1] == -word[b][1] for a, b in mt):
                total += 1
    return total


def count_reducing_words(m: int, d: int) -> int:
    """Words of length 2m that freely reduce to the empty word."""
    if (2 * d) ** (2 * m) > ENUMERATION_CAP:
        raise ValueError("too many words to enumerate")
    literals = [(a, s) for a in range(d) for s in (1, -1)]
    total = 0
    for word in itertools.product(literals, repeat=2 * m):
        stack = []
        for a, s in word:
            if stack and stack[-1] == (a, -s):
                stack.pop()
            else:
                stack.append((a, s))
        total += not stack
    return total


def enumerate_parenthesized_fraction(i: int) -> Fraction:
    """Share of the (2i)! orderings of s_1, s_1^-1, ..., s_i, s_i^-1 whose pairs do not cross."""
    symbols = [(a, s) for a in range(i) for s in (0, 1)]
    good = total = 0
    for order in itertools.permutations(symbols):
        total += 1
        where = {}
        for pos, (a, _) in enumerate(order):
            where.setdefault(a, []).append(pos)
        spans = list(where.values())
        crossing = any(
            p[0] < r[0] < p[1] < r[1] or r[0] < p[0] < r[1] < p[1]
            for p, r in itertools.combinations(spans, 2)
        )
        good += not crossing
    return Fraction(good, total)
