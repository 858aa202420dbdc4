"""Hoffman exponential and logarithm between the shuffle and quasi-shuffle algebras.

With the bracket ``[α, α] = 0`` (the time letter) for ``α != 0`` and all other
brackets zero, the general Hoffman exponential collapses to a sum over sets of
disjoint adjacent pairs of equal nonzero letters. Each chosen pair becomes a
single ``0`` and contributes a factor ``1/2``. The logarithm is the same sum
with factor ``-1/2``.

``hoffman_exp`` turns a Stratonovich functional into its Itô representation:
``⟨u, S⟩ = ⟨exp(u), Ŝ⟩``. Dually ``⟨w, Ŝ⟩ = ⟨log(w), S⟩``, which is how Itô
features are computed from Stratonovich signatures.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .words import TensorPoly, Word, word_str, words_up_to

HALF = Fraction(1, 2)


@lru_cache(maxsize=200_000)
def _merge_expansion(w: Word, weight: Fraction) -> dict[Word, Fraction]:
    if len(w) < 2:
        return {w: Fraction(1)}
    out: dict[Word, Fraction] = {}
    # leave w[0] alone
    for tail, c in _merge_expansion(w[1:], weight).items():
        key = (w[0],) + tail
        out[key] = out.get(key, 0) + c
    # merge w[0] w[1] into 0
    if w[0] != 0 and w[0] == w[1]:
        for tail, c in _merge_expansion(w[2:], weight).items():
            key = (0,) + tail
            out[key] = out.get(key, 0) + weight * c
    return {k: v for k, v in out.items() if v}


def _apply(p: TensorPoly | Word | str, weight: Fraction) -> TensorPoly:
    if not isinstance(p, TensorPoly):
        p = TensorPoly.of(p)
    acc: dict[Word, Fraction] = {}
    for w, c in p.items():
        for img, x in _merge_expansion(w, weight).items():
            acc[img] = acc.get(img, 0) + c * x
    return TensorPoly(acc)


def hoffman_exp(p: TensorPoly | Word | str) -> TensorPoly:
    """Shuffle-to-quasi-shuffle isomorphism (weight ``+1/2`` per merged pair)."""
    return _apply(p, HALF)


def hoffman_log(p: TensorPoly | Word | str) -> TensorPoly:
    """Inverse of :func:`hoffman_exp` (weight ``-1/2`` per merged pair)."""
    return _apply(p, -HALF)


@dataclass(frozen=True)
class ConversionMatrix:
    """A Hoffman map on words of tensor degree ``<= N`` over ``{0..d}``.

    ``entries[(row, col)]`` is the coefficient of word ``row`` in the image of
    word ``col``, so the dense form acts on column vectors of coordinates and
    right-multiplies row-wise feature matrices.
    """

    d: int
    N: int
    kind: str
    words: tuple[Word, ...]
    entries: dict[tuple[Word, Word], Fraction]

    def image(self, w: Word) -> TensorPoly:
        return TensorPoly({r: x for (r, c), x in self.entries.items() if c == w})

    def dense(self) -> np.ndarray:
        index = {w: i for i, w in enumerate(self.words)}
        out = np.zeros((len(self.words), len(self.words)))
        for (r, c), x in self.entries.items():
            out[index[r], index[c]] = float(x)
        return out

    def exact(self) -> list[list[Fraction]]:
        index = {w: i for i, w in enumerate(self.words)}
        n = len(self.words)
        out = [[Fraction(0)] * n for _ in range(n)]
        for (r, c), x in self.entries.items():
            out[index[r]][index[c]] = x
        return out

    def compose(self, other: ConversionMatrix) -> dict[tuple[Word, Word], Fraction]:
        """Sparse product ``self · other`` (apply ``other`` first)."""
        by_row: dict[Word, list[tuple[Word, Fraction]]] = {}
        for (r, c), x in self.entries.items():
            by_row.setdefault(c, []).append((r, x))
        out: dict[tuple[Word, Word], Fraction] = {}
        for (mid, c), y in other.entries.items():
            for r, x in by_row.get(mid, ()):
                out[(r, c)] = out.get((r, c), 0) + x * y
        return {k: v for k, v in out.items() if v}

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["row", "col", "value"])
        order = {w: i for i, w in enumerate(self.words)}
        for (r, c), x in sorted(self.entries.items(), key=lambda kv: (order[kv[0][1]], order[kv[0][0]])):
            wr.writerow([word_str(r), word_str(c), f"{x.numerator}/{x.denominator}"])
        return buf.getvalue()


def _conversion(d: int, N: int, kind: str) -> ConversionMatrix:
    if N < 0:
        raise ValueError("truncation level N must be non-negative")
    fn = hoffman_log if kind == "log" else hoffman_exp
    ws = tuple(words_up_to(range(d + 1), N))
    entries: dict[tuple[Word, Word], Fraction] = {}
    for w in ws:
        for r, x in fn(TensorPoly.of(w)).items():
            entries[(r, w)] = x
    return ConversionMatrix(d=d, N=N, kind=kind, words=ws, entries=entries)


@lru_cache(maxsize=32)
def strat_to_ito_map(d: int, N: int) -> ConversionMatrix:
    """Matrix of ``hoffman_log``; ``F_ito = F_strat @ M.dense()`` for row feature matrices."""
    return _conversion(d, N, "log")


@lru_cache(maxsize=32)
def ito_to_strat_map(d: int, N: int) -> ConversionMatrix:
    """Matrix of ``hoffman_exp``; inverse of :func:`strat_to_ito_map`."""
    return _conversion(d, N, "exp")
