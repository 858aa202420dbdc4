"""Orthogonalisation of signature coordinates.

* :class:`BlockOrthogonalizer` makes each word orthogonal to every word of lower
  tensor degree while keeping it monic.
* :func:`gram_schmidt` is plain Gram-Schmidt against an arbitrary inner product,
  skipping targets of zero norm.
* :func:`ito_orthogonal_basis` builds the Itô orthogonal polynomials on binary
  patterns; :func:`lift_pattern` substitutes letters for the ``1``'s, which
  gives the basis over any alphabet because the coefficients only depend on
  the pattern.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .exact import SingularMatrixError, solve
from .expected import InnerProduct, binary_inner, inner_ito
from .hoffman import hoffman_log
from .words import (
    EMPTY,
    TensorPoly,
    Word,
    linear_combination,
    pattern,
    strip_zeros,
    weighted_degree,
    word,
    word_str,
    words_of_len,
    words_up_to,
)

InnerFn = Callable[[TensorPoly, TensorPoly], Fraction]


class DegenerateInnerProduct(ValueError):
    pass


def order0_key(w: Word) -> tuple:
    """The order ``<_0``: fewer zeros first, then lexicographic with ``0 < 1 < …``."""
    return (w.count(0), w)


def basis_key(w: Word) -> tuple:
    """Export order of basis entries: weighted degree, then ``<_0``."""
    return (weighted_degree(w), w.count(0), w)


@dataclass(frozen=True)
class OrthoEntry:
    key: Word
    poly: TensorPoly
    sq_norm: Fraction

    def to_dict(self) -> dict:
        return {
            "word": word_str(self.key),
            "terms": self.poly.to_dict(),
            "sq_norm": f"{self.sq_norm.numerator}/{self.sq_norm.denominator}",
        }

    @classmethod
    def from_dict(cls, data: dict) -> OrthoEntry:
        return cls(word(data["word"]), TensorPoly.from_dict(data["terms"]), Fraction(data["sq_norm"]))


@dataclass(frozen=True)
class OrthoBasis:
    """An ordered family of monic orthogonal polynomials keyed by their leading word."""

    entries: tuple[OrthoEntry, ...]
    inner: str = "ito"
    d: int = 1
    T: Fraction = Fraction(1)
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_index", {e.key: e for e in self.entries})

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, w: Word) -> bool:
        return w in self._index

    def __getitem__(self, w: Word | str) -> OrthoEntry:
        return self._index[word(w) if isinstance(w, str) else w]

    def keys(self) -> list[Word]:
        return [e.key for e in self.entries]

    def truncate(self, max_weighted_degree: int) -> OrthoBasis:
        return OrthoBasis(
            tuple(e for e in self.entries if weighted_degree(e.key) <= max_weighted_degree),
            self.inner,
            self.d,
            self.T,
        )

    def support(self) -> list[Word]:
        """All words used by any entry, in (tensor degree, lexicographic) order."""
        ws = {w for e in self.entries for w in e.poly}
        return sorted(ws, key=lambda w: (len(w), w))

    def coefficient_matrix(self, columns: Sequence[Word]) -> np.ndarray:
        """``C`` with ``features @ C`` giving the orthogonal coordinates.

        ``columns`` labels the feature columns; every word an entry uses must be
        present.
        """
        index = {w: i for i, w in enumerate(columns)}
        out = np.zeros((len(columns), len(self.entries)))
        for j, e in enumerate(self.entries):
            for w, c in e.poly.items():
                if w not in index:
                    raise KeyError(f"feature column for word {word_str(w)!r} is missing")
                out[index[w], j] = float(c)
        return out

    def basis_id(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def to_json(self) -> str:
        payload = {
            "inner": self.inner,
            "d": self.d,
            "T": f"{self.T.numerator}/{self.T.denominator}",
            "entries": [e.to_dict() for e in self.entries],
        }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> OrthoBasis:
        data = json.loads(text)
        entries = tuple(OrthoEntry.from_dict(e) for e in data["entries"])
        return cls(entries, data["inner"], int(data["d"]), Fraction(data["T"]))


# --- block orthogonalisation --------------------------------------------------


def _components(nodes: Sequence[Word], gram: dict[tuple[int, int], Fraction]) -> list[list[int]]:
    parent = list(range(len(nodes)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in gram:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    groups: dict[int, list[int]] = {}
    for i in range(len(nodes)):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values())


class BlockOrthogonalizer:
    """Solves ``G λ = b`` over all words of lower tensor degree.

    The lower-degree Gram matrix is split into connected components of its
    nonzero pattern; each component is checked for invertibility once per degree.
    """

    def __init__(self, inner: InnerProduct, letters: Iterable[int]):
        self.inner = inner
        self.letters = tuple(sorted(letters))
        self._cache: dict[int, tuple[list[Word], list[list[int]], dict]] = {}

    def _lower(self, n: int):
        if n in self._cache:
            return self._cache[n]
        lower = words_up_to(self.letters, n - 1)
        gram: dict[tuple[int, int], Fraction] = {}
        for i, u in enumerate(lower):
            for j in range(i, len(lower)):
                x = self.inner.words(u, lower[j])
                if x:
                    gram[(i, j)] = x
                    gram[(j, i)] = x
        comps = _components(lower, gram)
        for comp in comps:
            mat = [[gram.get((i, j), Fraction(0)) for j in comp] for i in comp]
            try:
                solve(mat, [[Fraction(0)] for _ in comp])
            except SingularMatrixError:
                raise DegenerateInnerProduct(
                    "degenerate inner product; no canonical complement chosen"
                ) from None
        self._cache[n] = (lower, comps, gram)
        return self._cache[n]

    def __call__(self, w: Word | str) -> TensorPoly:
        w = word(w) if isinstance(w, str) else w
        if any(a not in self.letters for a in w):
            raise ValueError(f"word {word_str(w)!r} uses letters outside {self.letters}")
        n = len(w)
        if n == 0:
            return TensorPoly.unit()
        lower, comps, gram = self._lower(n)
        b = [self.inner.words(w, u) for u in lower]
        terms: dict[Word, Fraction] = {w: Fraction(1)}
        for comp in comps:
            rhs = [[b[i]] for i in comp]
            if not any(r[0] for r in rhs):
                continue
            mat = [[gram.get((i, j), Fraction(0)) for j in comp] for i in comp]
            lam = solve(mat, rhs)
            for i, row in zip(comp, lam):
                if row[0]:
                    terms[lower[i]] = -row[0]
        return TensorPoly(terms)


def block_orthogonalize(w: Word | str, inner: InnerProduct, letters: Iterable[int]) -> TensorPoly:
    """``p_w = w − Σ_{#u < #w} λ_u u`` with ``(p_w, u) = 0`` for every lower-degree word ``u``."""
    return _cached_orthogonalizer(inner, tuple(sorted(letters)))(w)


@lru_cache(maxsize=16)
def _cached_orthogonalizer(inner: InnerProduct, letters: tuple[int, ...]) -> BlockOrthogonalizer:
    return BlockOrthogonalizer(inner, letters)


# --- Gram-Schmidt -------------------------------------------------------------


def gram_schmidt(
    words: Sequence[Word | str],
    inner: InnerFn,
    *,
    tag: str = "custom",
    d: int = 1,
    T: Fraction = Fraction(1),
) -> OrthoBasis:
    """Gram-Schmidt in the given order; zero-norm elements are kept but never projected on."""
    done: list[OrthoEntry] = []
    for w in words:
        w = word(w) if isinstance(w, str) else w
        base = TensorPoly.of(w)
        parts = []
        for e in done:
            if e.sq_norm > 0:
                c = inner(base, e.poly)
                if c:
                    parts.append((-c / e.sq_norm, e.poly))
        poly = base + linear_combination(parts)
        done.append(OrthoEntry(w, poly, Fraction(inner(poly, poly))))
    return OrthoBasis(tuple(done), tag, d, Fraction(T))


# --- Itô basis ----------------------------------------------------------------


def reduce_trailing_zeros(w: Word | str, T: Fraction | int = 1) -> TensorPoly:
    """Rewrite ``w`` on ∅ and words not ending in 0, as a functional of the Itô signature.

    Uses ``⟨0 ⧢̂ u, Ŝ⟩ = T ⟨u, Ŝ⟩`` where ``0 ⧢̂ u`` is the sum of single-zero
    insertions into ``u``.
    """
    w = word(w) if isinstance(w, str) else w
    return _reduce(w, Fraction(T))


@lru_cache(maxsize=100_000)
def _reduce(w: Word, T: Fraction) -> TensorPoly:
    if not w or w[-1] != 0:
        return TensorPoly.of(w)
    u = w[:-1]
    t = _trailing_zeros(u)
    mult = t + 1
    head = len(u) - t
    acc = _reduce(u, T) * T
    for i in range(head):
        acc = acc - _reduce(u[:i] + (0,) + u[i:], T)
    return acc * Fraction(1, mult)


def _trailing_zeros(u: Word) -> int:
    t = 0
    while t < len(u) and u[-1 - t] == 0:
        t += 1
    return t


GRADINGS = ("weighted", "tensor")


def _degree_fn(grading: str) -> Callable[[Word], int]:
    if grading == "weighted":
        return weighted_degree
    if grading == "tensor":
        return len
    raise ValueError(f"unknown grading {grading!r}; expected one of {GRADINGS}")


def binary_patterns(max_degree: int, grading: str = "weighted") -> list[Word]:
    """∅ and every word over {0, 1} ending in 1 with degree ``<= max_degree``."""
    deg = _degree_fn(grading)
    out: list[Word] = [EMPTY] if max_degree >= 0 else []
    for n in range(1, max_degree + 1):
        for w in words_of_len((0, 1), n):
            if w[-1] == 1 and deg(w) <= max_degree:
                out.append(w)
    return sorted(out, key=basis_key)


def _binary_ip(T: Fraction) -> InnerFn:
    def ip(u: TensorPoly, v: TensorPoly) -> Fraction:
        total = Fraction(0)
        for a, ca in u.items():
            for b, cb in v.items():
                total += ca * cb * binary_inner(a, b, T)
        return total

    return ip


@lru_cache(maxsize=32)
def ito_orthogonal_basis(max_degree: int, T: Fraction | int = 1, grading: str = "weighted") -> OrthoBasis:
    """Itô orthogonal polynomials ``p̂_w`` on binary patterns, via the closed-form inner product.

    Gram-Schmidt runs separately within each class of patterns with the same
    number of 1's, in the order ``<_0``. ``grading`` selects whether
    ``max_degree`` bounds ``|w|`` or ``#w``; since ``<_0`` puts shorter words
    first, the polynomials themselves do not depend on it.
    """
    if max_degree < 0:
        raise ValueError("max_degree must be non-negative")
    T = Fraction(T)
    ip = _binary_ip(T)
    pats = binary_patterns(max_degree, grading)
    classes: dict[int, list[Word]] = {}
    for p in pats:
        classes.setdefault(p.count(1), []).append(p)
    made: dict[Word, OrthoEntry] = {}
    for k, members in classes.items():
        sub = gram_schmidt(sorted(members, key=order0_key), ip, T=T)
        made.update({e.key: e for e in sub})
    entries = tuple(made[p] for p in pats)
    return OrthoBasis(entries, "ito", 1, T)


def lift_pattern(p: TensorPoly, letters: Sequence[int]) -> TensorPoly:
    """Replace the 1's of every term of a binary polynomial by ``letters`` in order."""
    letters = tuple(letters)
    if any(a <= 0 for a in letters):
        raise ValueError("lift letters must be nonzero")
    acc: dict[Word, Fraction] = {}
    for w, c in p.items():
        if w.count(1) != len(letters) or any(a not in (0, 1) for a in w):
            raise ValueError(f"term {word_str(w)!r} does not have {len(letters)} ones")
        it = iter(letters)
        lifted = tuple(next(it) if a == 1 else 0 for a in w)
        acc[lifted] = acc.get(lifted, 0) + c
    return TensorPoly(acc)


def nondegenerate_words(d: int, max_degree: int, grading: str = "weighted") -> list[Word]:
    """∅ and the words over ``{0..d}`` not ending in 0, with degree ``<= max_degree``."""
    deg = _degree_fn(grading)
    out = [EMPTY]
    for n in range(1, max_degree + 1):
        for w in words_of_len(range(d + 1), n):
            if w[-1] != 0 and deg(w) <= max_degree:
                out.append(w)
    return sorted(out, key=basis_key)


@lru_cache(maxsize=32)
def ito_basis(d: int, max_degree: int, T: Fraction | int = 1, grading: str = "weighted") -> OrthoBasis:
    """The Itô orthogonal basis over ``{0..d}`` obtained by lifting binary patterns."""
    T = Fraction(T)
    binary = ito_orthogonal_basis(max_degree, T, grading)
    entries = []
    for w in nondegenerate_words(d, max_degree, grading):
        e = binary[pattern(w)]
        entries.append(OrthoEntry(w, lift_pattern(e.poly, strip_zeros(w)), e.sq_norm))
    return OrthoBasis(tuple(entries), "ito", d, T)


def direct_ito_basis(d: int, max_weighted_degree: int, T: Fraction | int = 1) -> OrthoBasis:
    """Same basis computed by brute force: Gram-Schmidt under ``inner_ito`` per stripped class."""
    T = Fraction(T)
    words = nondegenerate_words(d, max_weighted_degree)
    classes: dict[Word, list[Word]] = {}
    for w in words:
        classes.setdefault(strip_zeros(w), []).append(w)
    made: dict[Word, OrthoEntry] = {}
    ip = lambda u, v: inner_ito(u, v, T)  # noqa: E731
    for members in classes.values():
        sub = gram_schmidt(sorted(members, key=order0_key), ip, T=T)
        made.update({e.key: e for e in sub})
    return OrthoBasis(tuple(made[w] for w in words), "ito", d, T)


def stratonovich_basis(d: int, max_degree: int, T: Fraction | int = 1, grading: str = "weighted") -> OrthoBasis:
    """Stratonovich polynomials ``q_w = log(p̂_w)`` with ``⟨q_w, S⟩ = ⟨p̂_w, Ŝ⟩``.

    They are orthogonal under the Stratonovich inner product of time-augmented
    BM with the same squared norms.
    """
    ito = ito_basis(d, max_degree, T, grading)
    entries = tuple(OrthoEntry(e.key, hoffman_log(e.poly), e.sq_norm) for e in ito)
    return OrthoBasis(entries, "strat", d, ito.T)
