"""Words and exact-rational polynomials over the alphabet ``{0, 1, ..., d}``.

Letter ``0`` is the time letter; ``1..d`` are spatial letters. A word is a plain
tuple of ints, so it hashes and compares canonically. :class:`TensorPoly` is a
sparse linear combination of words with :class:`~fractions.Fraction`
coefficients and provides the shuffle and quasi-shuffle products.
"""

from __future__ import annotations

import json
from collections import Counter
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Iterable, Iterator, Mapping, Union

Word = tuple[int, ...]
EMPTY: Word = ()

Scalar = Union[int, Fraction]


def word(text: str | Iterable[int]) -> Word:
    """Build a word from a digit string (``"011"``) or an iterable of letters."""
    if isinstance(text, str):
        return tuple(int(ch) for ch in text)
    return tuple(int(x) for x in text)


def word_str(w: Word) -> str:
    return "".join(str(a) for a in w)


def tensor_degree(w: Word) -> int:
    return len(w)


def weighted_degree(w: Word) -> int:
    """``#w`` plus the number of time letters."""
    return len(w) + w.count(0)


def strip_zeros(w: Word) -> Word:
    return tuple(a for a in w if a != 0)


def pattern(w: Word) -> Word:
    """Binary pattern of ``w``: every nonzero letter replaced by ``1``."""
    return tuple(1 if a else 0 for a in w)


def concat(u: Word, v: Word) -> Word:
    return u + v


def word_key(w: Word) -> tuple[int, Word]:
    return (len(w), w)


def words_up_to(letters: Iterable[int], max_len: int) -> list[Word]:
    """All words of length ``<= max_len`` ordered by (length, lexicographic)."""
    letters = sorted(letters)
    out: list[Word] = []
    for n in range(max_len + 1):
        out.extend(product(letters, repeat=n))
    return out


def words_of_len(letters: Iterable[int], n: int) -> list[Word]:
    return list(product(sorted(letters), repeat=n))


class TensorPoly:
    """Finite exact-rational combination of words; zero coefficients are never stored."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Word, Scalar] | None = None):
        clean: dict[Word, Fraction] = {}
        if terms:
            for w, c in terms.items():
                c = Fraction(c)
                if c:
                    clean[tuple(w)] = c
        self._terms = dict(sorted(clean.items(), key=lambda kv: word_key(kv[0])))
        self._hash: int | None = None

    @classmethod
    def of(cls, w: Word | str, coeff: Scalar = 1) -> TensorPoly:
        return cls({word(w) if isinstance(w, str) else w: coeff})

    @classmethod
    def unit(cls) -> TensorPoly:
        return cls({EMPTY: 1})

    @classmethod
    def zero(cls) -> TensorPoly:
        return cls()

    @property
    def terms(self) -> dict[Word, Fraction]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def words(self) -> list[Word]:
        return list(self._terms)

    def coeff(self, w: Word | str) -> Fraction:
        if isinstance(w, str):
            w = word(w)
        return self._terms.get(w, Fraction(0))

    def __iter__(self) -> Iterator[Word]:
        return iter(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, TensorPoly):
            return self._terms == other._terms
        if other == 0:
            return not self._terms
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __add__(self, other: TensorPoly) -> TensorPoly:
        if not isinstance(other, TensorPoly):
            return NotImplemented
        acc = dict(self._terms)
        for w, c in other._terms.items():
            acc[w] = acc.get(w, 0) + c
        return TensorPoly(acc)

    def __sub__(self, other: TensorPoly) -> TensorPoly:
        return self + (-other)

    def __neg__(self) -> TensorPoly:
        return TensorPoly({w: -c for w, c in self._terms.items()})

    def __mul__(self, scalar: Scalar) -> TensorPoly:
        if isinstance(scalar, TensorPoly):
            return NotImplemented
        s = Fraction(scalar)
        return TensorPoly({w: s * c for w, c in self._terms.items()})

    __rmul__ = __mul__

    def degree(self) -> int:
        return max((len(w) for w in self._terms), default=-1)

    def weighted_degree(self) -> int:
        return max((weighted_degree(w) for w in self._terms), default=-1)

    def is_homogeneous(self) -> bool:
        return len({len(w) for w in self._terms}) <= 1

    def restrict(self, pred) -> TensorPoly:
        return TensorPoly({w: c for w, c in self._terms.items() if pred(w)})

    def map_words(self, fn) -> TensorPoly:
        acc: dict[Word, Fraction] = {}
        for w, c in self._terms.items():
            nw = fn(w)
            acc[nw] = acc.get(nw, 0) + c
        return TensorPoly(acc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    def to_dict(self) -> dict[str, str]:
        return {word_str(w): _frac_str(c) for w, c in self._terms.items()}

    @classmethod
    def from_dict(cls, data: Mapping[str, str]) -> TensorPoly:
        return cls({word(k): Fraction(v) for k, v in data.items()})

    @classmethod
    def from_json(cls, text: str) -> TensorPoly:
        return cls.from_dict(json.loads(text))

    def __repr__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for w, c in self._terms.items():
            ws = word_str(w) or "∅"
            if c == 1:
                parts.append(ws)
            elif c == -1:
                parts.append(f"-{ws}")
            else:
                parts.append(f"{c}·{ws}")
        return " + ".join(parts).replace("+ -", "- ")


def _frac_str(c: Fraction) -> str:
    return f"{c.numerator}/{c.denominator}"


def linear_combination(pairs: Iterable[tuple[Scalar, TensorPoly]]) -> TensorPoly:
    acc: dict[Word, Fraction] = {}
    for s, p in pairs:
        s = Fraction(s)
        if not s:
            continue
        for w, c in p.items():
            acc[w] = acc.get(w, 0) + s * c
    return TensorPoly(acc)


def _bilinear(fn, u: TensorPoly, v: TensorPoly) -> TensorPoly:
    acc: dict[Word, Fraction] = {}
    for wu, cu in u.items():
        for wv, cv in v.items():
            for w, n in fn(wu, wv).items():
                acc[w] = acc.get(w, 0) + cu * cv * n
    return TensorPoly(acc)


@lru_cache(maxsize=200_000)
def shuffle_words(u: Word, v: Word) -> dict[Word, int]:
    """Integer-weighted shuffle of two words, by last-letter recursion."""
    if not u:
        return {v: 1}
    if not v:
        return {u: 1}
    out: Counter = Counter()
    a, b = u[-1], v[-1]
    for w, n in shuffle_words(u[:-1], v).items():
        out[w + (a,)] += n
    for w, n in shuffle_words(u, v[:-1]).items():
        out[w + (b,)] += n
    return dict(out)


@lru_cache(maxsize=200_000)
def quasi_shuffle_words(u: Word, v: Word) -> dict[Word, int]:
    """Quasi-shuffle with bracket ``[a, a] = 0`` for ``a != 0`` and zero otherwise."""
    if not u:
        return {v: 1}
    if not v:
        return {u: 1}
    out: Counter = Counter()
    a, b = u[-1], v[-1]
    for w, n in quasi_shuffle_words(u[:-1], v).items():
        out[w + (a,)] += n
    for w, n in quasi_shuffle_words(u, v[:-1]).items():
        out[w + (b,)] += n
    if a == b and a != 0:
        for w, n in quasi_shuffle_words(u[:-1], v[:-1]).items():
            out[w + (0,)] += n
    return dict(out)


def shuffle(u: TensorPoly, v: TensorPoly) -> TensorPoly:
    return _bilinear(shuffle_words, u, v)


def quasi_shuffle(u: TensorPoly, v: TensorPoly) -> TensorPoly:
    return _bilinear(quasi_shuffle_words, u, v)


def shuffle_power(factors: Iterable[TensorPoly]) -> TensorPoly:
    acc = TensorPoly.unit()
    for f in factors:
        acc = shuffle(acc, f)
    return acc


# --- Lyndon words and Radford monomials ------------------------------------


def is_lyndon(w: Word) -> bool:
    """Strictly smaller than every proper rotation."""
    if not w:
        return False
    return all(w < w[i:] + w[:i] for i in range(1, len(w)))


def lyndon_words(d: int, max_len: int) -> dict[int, list[Word]]:
    """Lyndon words over ``1..d`` grouped by length, each group in lexicographic order.

    Uses Duval's generation of Lyndon words in lexicographic order.
    """
    if d < 1 or max_len < 1:
        raise ValueError("need d >= 1 and max_len >= 1")
    groups: dict[int, list[Word]] = {m: [] for m in range(1, max_len + 1)}
    w = [0]
    while w:
        w[-1] += 1
        groups[len(w)].append(tuple(w))
        m = len(w)
        while len(w) < max_len:
            w.append(w[len(w) - m])
        while w and w[-1] == d:
            w.pop()
    return groups


def _mobius(n: int) -> int:
    res, p, m = 1, 2, n
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            res = -res
        p += 1
    if m > 1:
        res = -res
    return res


def witt_number(d: int, m: int) -> int:
    """Number of Lyndon words of length ``m`` over ``d`` letters."""
    total = sum(_mobius(k) * d ** (m // k) for k in range(1, m + 1) if m % k == 0)
    return total // m


RadfordMonomial = tuple[Word, ...]


def radford_monomials(d: int, n: int) -> list[RadfordMonomial]:
    """Multisets of Lyndon words with total length ``n``, as sorted tuples."""
    if n == 0:
        return [()]
    lyn = [w for m, ws in lyndon_words(d, n).items() for w in ws]
    lyn.sort(key=word_key)
    out: list[RadfordMonomial] = []

    def rec(start: int, remaining: int, acc: list[Word]) -> None:
        if remaining == 0:
            out.append(tuple(acc))
            return
        for i in range(start, len(lyn)):
            if len(lyn[i]) <= remaining:
                acc.append(lyn[i])
                rec(i, remaining - len(lyn[i]), acc)
                acc.pop()

    rec(0, n, [])
    return out


def radford_expand(monomial: Iterable[Word]) -> TensorPoly:
    """Shuffle product of the monomial's Lyndon words (with multiplicity)."""
    return shuffle_power(TensorPoly.of(tuple(w)) for w in monomial)


def monomial_degree(monomial: Iterable[Word]) -> int:
    return sum(len(w) for w in monomial)
