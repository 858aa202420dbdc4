"""Expected-signature pairings of Brownian motion and the inner products they induce.

Three pairings are provided, all exact:

* Fawcett: Stratonovich signature of d-dimensional BM without time,
  ``E S = exp(T/2 · Σ γγ)``.
* Itô: Itô signature of time-augmented BM, ``E Ŝ = Σ T^n/n! · 0^n``.
* Stratonovich with time: ``E S = exp(T · (0 + ½ Σ γγ))``. Used to check the
  Hoffman isometry and the Stratonovich orthogonal family.

Each pairing ``φ`` induces ``(u, v) = φ(u ⧢ v)`` (or ``φ(u ⧢̂ v)`` for Itô).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from typing import Callable, Sequence, Union

from .words import (
    TensorPoly,
    Word,
    quasi_shuffle_words,
    shuffle_words,
    word_str,
)

Horizon = Union[int, Fraction, str]

ONE = Fraction(1)


def _horizon(T: Horizon) -> Fraction:
    T = Fraction(T)
    if T <= 0:
        raise ValueError("time horizon T must be positive")
    return T


def _as_poly(p: TensorPoly | Word | str) -> TensorPoly:
    if isinstance(p, TensorPoly):
        return p
    return TensorPoly.of(p)


# --- Fawcett (no time letter) -------------------------------------------------


def _check_no_time(w: Word) -> None:
    if 0 in w:
        raise ValueError(f"word {word_str(w)!r} contains the time letter; Fawcett pairing needs letters 1..d")


def _doubled_half_length(w: Word) -> int | None:
    if len(w) % 2:
        return None
    if any(w[2 * i] != w[2 * i + 1] for i in range(len(w) // 2)):
        return None
    return len(w) // 2


def fawcett_word(w: Word, T: Horizon = 1) -> Fraction:
    _check_no_time(w)
    T = _horizon(T)
    n = _doubled_half_length(w)
    if n is None:
        return Fraction(0)
    return T**n / (2**n * factorial(n))


def fawcett_pair(p: TensorPoly | Word | str, T: Horizon = 1, d: int | None = None) -> Fraction:
    """``⟨p, E S(W)_{0,T}⟩`` for standard BM without time augmentation."""
    p = _as_poly(p)
    total = Fraction(0)
    for w, c in p.items():
        if d is not None and any(a > d for a in w):
            raise ValueError(f"word {word_str(w)!r} uses letters beyond d={d}")
        total += c * fawcett_word(w, T)
    return total


@lru_cache(maxsize=500_000)
def _doubled_interleavings(u: Word, v: Word) -> int:
    """Number of interleavings of ``u`` and ``v`` that form a doubled word."""
    if not u and not v:
        return 1
    total = 0
    if len(u) >= 2 and u[0] == u[1]:
        total += _doubled_interleavings(u[2:], v)
    if u and v and u[0] == v[0]:
        total += 2 * _doubled_interleavings(u[1:], v[1:])
    if len(v) >= 2 and v[0] == v[1]:
        total += _doubled_interleavings(u, v[2:])
    return total


def fawcett_inner_words(u: Word, v: Word, T: Horizon = 1) -> Fraction:
    _check_no_time(u)
    _check_no_time(v)
    T = _horizon(T)
    if (len(u) + len(v)) % 2:
        return Fraction(0)
    if u > v:
        u, v = v, u
    n = (len(u) + len(v)) // 2
    c = _doubled_interleavings(u, v)
    return c * T**n / (2**n * factorial(n)) if c else Fraction(0)


def inner_fawcett(u: TensorPoly | Word | str, v: TensorPoly | Word | str, T: Horizon = 1, d: int | None = None) -> Fraction:
    """``fawcett_pair(u ⧢ v)``, evaluated word pair by word pair with a memoised count."""
    u, v = _as_poly(u), _as_poly(v)
    if d is not None:
        for w in list(u) + list(v):
            if any(a > d for a in w):
                raise ValueError(f"word {word_str(w)!r} uses letters beyond d={d}")
    return _bilinear_scalar(lambda a, b: fawcett_inner_words(a, b, T), u, v)


# --- Itô signature of time-augmented BM --------------------------------------


def ito_word(w: Word, T: Horizon = 1) -> Fraction:
    T = _horizon(T)
    if any(w):
        return Fraction(0)
    return T ** len(w) / factorial(len(w))


def ito_pair(p: TensorPoly | Word | str, T: Horizon = 1) -> Fraction:
    """``⟨p, E Ŝ(B̃)_{0,T}⟩``: only the words ``0^n`` contribute, with weight ``T^n/n!``."""
    p = _as_poly(p)
    return sum((c * ito_word(w, T) for w, c in p.items()), Fraction(0))


@lru_cache(maxsize=500_000)
def _ito_inner_cached(u: Word, v: Word, T: Fraction) -> Fraction:
    return sum((n * ito_word(w, T) for w, n in quasi_shuffle_words(u, v).items()), Fraction(0))


def ito_inner_words(u: Word, v: Word, T: Horizon = 1) -> Fraction:
    if u > v:
        u, v = v, u
    return _ito_inner_cached(u, v, _horizon(T))


def inner_ito(u: TensorPoly | Word | str, v: TensorPoly | Word | str, T: Horizon = 1) -> Fraction:
    """``ito_pair(u ⧢̂ v)``."""
    return _bilinear_scalar(lambda a, b: ito_inner_words(a, b, T), _as_poly(u), _as_poly(v))


def zero_profile(w: Word) -> tuple[int, ...]:
    """Zero-block profile ``(i_1, …, i_k)`` of a binary pattern ``0^{i1}1…0^{ik}1``."""
    if w and w[-1] == 0:
        raise ValueError(f"binary pattern {word_str(w)!r} must end in 1")
    prof, run = [], 0
    for a in w:
        if a == 0:
            run += 1
        elif a == 1:
            prof.append(run)
            run = 0
        else:
            raise ValueError(f"binary pattern {word_str(w)!r} has letters outside {{0, 1}}")
    return tuple(prof)


def binary_inner(u: Word | str, v: Word | str, T: Horizon = 1) -> Fraction:
    """Closed form of the Itô inner product of two binary patterns.

    ``T^{i+j+k}/(i+j+k)! · Π_{r=1..k} C(i_r + j_r, i_r)`` with ``i = Σ i_r`` and
    ``j = Σ j_r``. The product starts at ``r = 1``: there is no ``i_0``.
    """
    from .words import word as _word

    u = _word(u) if isinstance(u, str) else u
    v = _word(v) if isinstance(v, str) else v
    T = _horizon(T)
    iu, jv = zero_profile(u), zero_profile(v)
    if len(iu) != len(jv):
        return Fraction(0)
    k, i, j = len(iu), sum(iu), sum(jv)
    prod = 1
    for a, b in zip(iu, jv):
        prod *= comb(a + b, a)
    n = i + j + k
    return T**n / factorial(n) * prod


# --- Stratonovich signature of time-augmented BM -----------------------------


@lru_cache(maxsize=200_000)
def _strat_time_word(w: Word, T: Fraction) -> Fraction:
    # Sum over tilings of w by blocks "0" and "γγ" (weight ½), block count b -> T^b/b!.
    n = len(w)
    # ways[pos][b]: weighted count of tilings of w[:pos] with b blocks
    ways: list[dict[int, Fraction]] = [dict() for _ in range(n + 1)]
    ways[0][0] = ONE
    for pos in range(n):
        if not ways[pos]:
            continue
        if w[pos] == 0:
            tgt = ways[pos + 1]
            for b, c in ways[pos].items():
                tgt[b + 1] = tgt.get(b + 1, 0) + c
        if pos + 1 < n and w[pos] != 0 and w[pos] == w[pos + 1]:
            tgt = ways[pos + 2]
            for b, c in ways[pos].items():
                tgt[b + 1] = tgt.get(b + 1, 0) + c / 2
    return sum((c * T**b / factorial(b) for b, c in ways[n].items()), Fraction(0))


def strat_time_pair(p: TensorPoly | Word | str, T: Horizon = 1) -> Fraction:
    """``⟨p, E S(B̃)_{0,T}⟩`` for the Stratonovich signature of ``(t, B_t)``."""
    T = _horizon(T)
    p = _as_poly(p)
    return sum((c * _strat_time_word(w, T) for w, c in p.items()), Fraction(0))


@lru_cache(maxsize=500_000)
def _strat_inner_cached(u: Word, v: Word, T: Fraction) -> Fraction:
    return sum((n * _strat_time_word(w, T) for w, n in shuffle_words(u, v).items()), Fraction(0))


def inner_strat(u: TensorPoly | Word | str, v: TensorPoly | Word | str, T: Horizon = 1) -> Fraction:
    """``strat_time_pair(u ⧢ v)``."""
    T = _horizon(T)

    def pair(a: Word, b: Word) -> Fraction:
        return _strat_inner_cached(*sorted((a, b)), T)

    return _bilinear_scalar(pair, _as_poly(u), _as_poly(v))


def _bilinear_scalar(fn: Callable[[Word, Word], Fraction], u: TensorPoly, v: TensorPoly) -> Fraction:
    total = Fraction(0)
    for wu, cu in u.items():
        for wv, cv in v.items():
            x = fn(wu, wv)
            if x:
                total += cu * cv * x
    return total


# --- inner product handle and Gram blocks ------------------------------------

KINDS = ("fawcett", "ito", "strat")


@dataclass(frozen=True)
class InnerProduct:
    """A named expected-signature inner product at horizon ``T``."""

    kind: str = "ito"
    T: Fraction = field(default=Fraction(1))

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown inner product {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "T", _horizon(self.T))

    def words(self, u: Word, v: Word) -> Fraction:
        if self.kind == "fawcett":
            return fawcett_inner_words(u, v, self.T)
        if self.kind == "ito":
            return ito_inner_words(u, v, self.T)
        return _strat_inner_cached(*sorted((u, v)), self.T)

    def __call__(self, u: TensorPoly | Word | str, v: TensorPoly | Word | str) -> Fraction:
        return _bilinear_scalar(self.words, _as_poly(u), _as_poly(v))

    @property
    def tag(self) -> str:
        return f"{self.kind}(T={self.T})"


@dataclass(frozen=True)
class GramBlock:
    rows: tuple[str, ...]
    cols: tuple[str, ...]
    entries: tuple[tuple[Fraction, ...], ...]

    def matrix(self) -> list[list[Fraction]]:
        return [list(r) for r in self.entries]

    def is_symmetric(self) -> bool:
        n = len(self.entries)
        return self.rows == self.cols and all(
            self.entries[i][j] == self.entries[j][i] for i in range(n) for j in range(i)
        )

    def to_float(self):
        import numpy as np

        return np.array([[float(x) for x in r] for r in self.entries], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "col", "exact", "float"])
        for r, label_r in enumerate(self.rows):
            for c, label_c in enumerate(self.cols):
                x = self.entries[r][c]
                w.writerow([label_r, label_c, f"{x.numerator}/{x.denominator}", repr(float(x))])
        return buf.getvalue()


def _label(p: TensorPoly | Word | str) -> str:
    if isinstance(p, str):
        return p
    if isinstance(p, tuple):
        return word_str(p)
    return repr(p)


def gram_block(
    basis_u: Sequence[TensorPoly | Word | str],
    basis_v: Sequence[TensorPoly | Word | str],
    inner: InnerProduct | Callable[[TensorPoly, TensorPoly], Fraction],
) -> GramBlock:
    us = [_as_poly(p) for p in basis_u]
    vs = [_as_poly(p) for p in basis_v]
    same = list(basis_u) == list(basis_v)
    entries: list[list[Fraction]] = [[Fraction(0)] * len(vs) for _ in us]
    for i, a in enumerate(us):
        for j, b in enumerate(vs):
            if same and j < i:
                entries[i][j] = entries[j][i]
            else:
                entries[i][j] = Fraction(inner(a, b))
    return GramBlock(
        rows=tuple(_label(p) for p in basis_u),
        cols=tuple(_label(p) for p in basis_v),
        entries=tuple(tuple(r) for r in entries),
    )
