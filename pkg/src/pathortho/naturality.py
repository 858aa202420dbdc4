"""Symbolic test of whether block orthogonalisation under Fawcett's formula is natural.

The candidate map on a word ``x_1…x_n`` of generic letters is a sum over
pairings (set partitions with blocks of size at most 2):

    p = x_1…x_n + Σ_π a_π · Π_{(i,j)∈π} δ(x_i, x_j) · (x with positions of π removed)

Orthogonality against every lower-degree word, evaluated with generic fresh
symbols, gives one linear equation per (test length, δ-monomial). The
resulting exact system is either solved or refuted with a certificate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import factorial
from typing import Iterable, Sequence

from .exact import SparseEliminator
from .words import TensorPoly, Word

Pair = tuple[int, int]
Pairing = tuple[Pair, ...]
Matching = frozenset  # of Pair


def involution_number(n: int) -> int:
    a, b = 1, 1
    for k in range(2, n + 1):
        a, b = b, b + (k - 1) * a
    return b if n >= 1 else 1


def pairings(n: int) -> list[Pairing]:
    """All partitions of ``{1..n}`` into blocks of size ``<= 2``, as sorted tuples of pairs."""
    if n < 0:
        raise ValueError("n must be non-negative")

    def rec(items: tuple[int, ...]) -> list[list[Pair]]:
        if not items:
            return [[]]
        first, rest = items[0], items[1:]
        out = [r for r in rec(rest)]
        for k, other in enumerate(rest):
            remaining = rest[:k] + rest[k + 1:]
            out.extend([[(first, other)] + r for r in rec(remaining)])
        return out

    found = [tuple(sorted(p)) for p in rec(tuple(range(1, n + 1)))]
    return sorted(found, key=lambda p: (len(p), p))


def is_crossing(p: Pairing) -> bool:
    return any(a < c < b < d or c < a < d < b for (a, b), (c, d) in combinations(p, 2))


def is_cap_diagram(p: Pairing) -> bool:
    """Noncrossing, and every position strictly under an arc is itself paired."""
    if is_crossing(p):
        return False
    paired = {x for pr in p for x in pr}
    return all(all(x in paired for x in range(a + 1, b)) for a, b in p)


def pairing_label(p: Pairing) -> str:
    return "".join(f"{{{a}{b}}}" for a, b in p) or "id"


# --- δ-polynomials ------------------------------------------------------------


def _norm_pair(a: int, b: int) -> Pair:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class DeltaPoly:
    """Exact combination of δ-monomials times residual words of formal symbols."""

    terms: dict[tuple[Matching, Word], Fraction] = field(default_factory=dict)

    @classmethod
    def monomial(cls, pairs: Iterable[Pair] = (), word: Word = (), coeff=1) -> DeltaPoly:
        key = (frozenset(_norm_pair(a, b) for a, b in pairs), tuple(word))
        return cls({key: Fraction(coeff)} if coeff else {})

    def __add__(self, other: DeltaPoly) -> DeltaPoly:
        acc = dict(self.terms)
        for k, v in other.terms.items():
            acc[k] = acc.get(k, 0) + v
        return DeltaPoly({k: v for k, v in acc.items() if v})

    def scale(self, c) -> DeltaPoly:
        c = Fraction(c)
        return DeltaPoly({k: c * v for k, v in self.terms.items() if c * v})

    def __eq__(self, other: object) -> bool:
        return isinstance(other, DeltaPoly) and self.terms == other.terms

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for (mono, w), c in sorted(self.terms.items(), key=lambda kv: (sorted(kv[0][0]), kv[0][1])):
            ds = "".join(f"δ{a},{b}" for a, b in sorted(mono))
            ws = "·".join(f"x{a}" for a in w)
            parts.append(f"{c}" + (f"·{ds}" if ds else "") + (f"·{ws}" if ws else ""))
        return " + ".join(parts)


def esig_generic(poly: DeltaPoly) -> DeltaPoly:
    """Pair every residual word with Fawcett's expected signature at ``T = 1``.

    ``x_1…x_{2m}`` maps to ``1/(2^m m!) · Π δ(x_{2i−1}, x_{2i})``; odd lengths map to 0.
    """
    out = DeltaPoly()
    for (mono, w), c in poly.terms.items():
        if len(w) % 2:
            continue
        m = len(w) // 2
        pairs = list(mono) + [_norm_pair(w[2 * i], w[2 * i + 1]) for i in range(m)]
        out = out + DeltaPoly.monomial(pairs, (), c / (2**m * factorial(m)))
    return out


@lru_cache(maxsize=None)
def _interleavings(a: Word, b: Word) -> tuple[Word, ...]:
    if not a:
        return (b,)
    if not b:
        return (a,)
    return tuple((a[0],) + w for w in _interleavings(a[1:], b)) + tuple(
        (b[0],) + w for w in _interleavings(a, b[1:])
    )


def _residual(n: int, p: Pairing) -> Word:
    paired = {x for pr in p for x in pr}
    return tuple(x for x in range(1, n + 1) if x not in paired)


def _pairing_against(n: int, p: Pairing, test: Word) -> dict[Matching, Fraction]:
    """``esig_generic(term_π ⧢ test)`` grouped by full matching."""
    res = _residual(n, p)
    total = len(res) + len(test)
    if total % 2:
        return {}
    m = total // 2
    weight = Fraction(1, 2**m * factorial(m))
    base = [tuple(pr) for pr in p]
    out: dict[Matching, Fraction] = {}
    for z in _interleavings(res, test):
        key = frozenset(base + [_norm_pair(z[2 * i], z[2 * i + 1]) for i in range(m)])
        out[key] = out.get(key, 0) + weight
    return out


# --- the linear system --------------------------------------------------------


RowKey = tuple[int, Matching]


@dataclass
class AnsatzSystem:
    n: int
    noncrossing: bool
    variables: list[Pairing]
    rows: list[dict[int, Fraction]]
    row_keys: list[RowKey]

    @property
    def rhs(self) -> int:
        return len(self.variables)

    def b(self, r: int) -> Fraction:
        return self.rows[r].get(self.rhs, Fraction(0))

    def find_row(self, test_len: int, matching: Iterable[Pair]) -> int:
        key = (test_len, frozenset(_norm_pair(*pr) for pr in matching))
        return self.row_keys.index(key)

    def variable_index(self, p: Iterable[Pair]) -> int:
        return self.variables.index(tuple(sorted(_norm_pair(*pr) for pr in p)))


def build_system(n: int, noncrossing: bool = False) -> AnsatzSystem:
    """Rows are keyed by (test word length, full matching of all symbols); ``[A | b]`` exact."""
    if n < 2:
        raise ValueError("n must be at least 2")
    allp = pairings(n)
    identity: Pairing = ()
    if noncrossing:
        allp = [p for p in allp if is_cap_diagram(p)]
    variables = [p for p in allp if p != identity]
    col = {p: j for j, p in enumerate(variables)}
    rhs = len(variables)
    rows: list[dict[int, Fraction]] = []
    keys: list[RowKey] = []
    for l in range(n - 2, -1, -2):
        test = tuple(range(n + 1, n + 1 + l))
        acc: dict[Matching, dict[int, Fraction]] = {}
        for p in [identity] + variables:
            for mt, c in _pairing_against(n, p, test).items():
                row = acc.setdefault(mt, {})
                j = rhs if p == identity else col[p]
                # identity term moves to the right-hand side
                row[j] = row.get(j, 0) + (-c if p == identity else c)
        for mt in sorted(acc, key=lambda m: sorted(m)):
            row = {j: v for j, v in acc[mt].items() if v}
            if row:
                rows.append(row)
                keys.append((l, mt))
    return AnsatzSystem(n, noncrossing, variables, rows, keys)


@dataclass
class Certification:
    n: int
    noncrossing: bool
    n_vars: int
    n_rows: int
    rank_A: int
    rank_aug: int
    solution: dict[Pairing, Fraction] | None
    certificate: dict[int, Fraction] | None
    support: list[int] | None

    @property
    def consistent(self) -> bool:
        return self.rank_A == self.rank_aug

    @property
    def unique(self) -> bool:
        return self.consistent and self.rank_A == self.n_vars

    def to_dict(self, system: AnsatzSystem | None = None) -> dict:
        out: dict = {
            "degree": self.n,
            "noncrossing": self.noncrossing,
            "vars": self.n_vars,
            "equations": self.n_rows,
            "rank_A": self.rank_A,
            "rank_aug": self.rank_aug,
            "consistent": self.consistent,
        }
        if self.solution is not None:
            out["unique"] = self.unique
            out["solution"] = {pairing_label(p): _fs(v) for p, v in self.solution.items()}
        if self.certificate is not None:
            cert = []
            for r, y in sorted(self.certificate.items()):
                entry = {"row": r, "y": _fs(y)}
                if system is not None:
                    l, mt = system.row_keys[r]
                    entry["test_length"] = l
                    entry["matching"] = pairing_label(tuple(sorted(mt)))
                    entry["equation"] = equation_str(system, r)
                cert.append(entry)
            out["certificate"] = cert
        return out

    def to_json(self, system: AnsatzSystem | None = None) -> str:
        return json.dumps(self.to_dict(system), indent=1)


def _fs(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def equation_str(system: AnsatzSystem, r: int) -> str:
    row = system.rows[r]
    lhs = " + ".join(
        f"{v}*a{pairing_label(system.variables[j])}" for j, v in sorted(row.items()) if j != system.rhs
    )
    return f"{lhs or '0'} = {system.b(r)}"


def _eliminate(system: AnsatzSystem, rows: Sequence[int], track: bool) -> SparseEliminator:
    el = SparseEliminator(system.rhs, track=track)
    for r in rows:
        el.add_row(system.rows[r])
    return el


def rank_certify(system: AnsatzSystem, minimize: bool = True) -> Certification:
    """Exact ranks of ``A`` and ``[A | b]``; a solution if consistent, else a Farkas certificate.

    The certificate ``y`` satisfies ``yᵀA = 0`` and ``yᵀb ≠ 0``. With ``minimize``
    its support is shrunk greedily to an inclusion-minimal inconsistent subset.
    """
    all_rows = list(range(len(system.rows)))
    el = _eliminate(system, all_rows, track=True)
    rank_A, rank_aug = el.rank_a, el.rank_aug
    solution = cert = support = None
    if el.certificate is None:
        sol = el.back_substitute()
        solution = {p: sol.get(j, Fraction(0)) for j, p in enumerate(system.variables)}
    else:
        idx = sorted(el.certificate)
        if minimize:
            idx = _minimal_support(system, idx)
        sub = _eliminate(system, idx, track=True)
        cert = {idx[k]: v for k, v in sub.certificate.items()}
        support = sorted(cert)
    return Certification(
        system.n, system.noncrossing, len(system.variables), len(system.rows), rank_A, rank_aug, solution, cert, support
    )


def _minimal_support(system: AnsatzSystem, rows: list[int]) -> list[int]:
    keep = list(rows)
    for r in sorted(rows, key=lambda r: -len(system.rows[r])):
        trial = [x for x in keep if x != r]
        if _eliminate(system, trial, track=False).certificate is not None:
            keep = trial
    return keep


def check_certificate(system: AnsatzSystem, cert: dict[int, Fraction]) -> bool:
    acc: dict[int, Fraction] = {}
    for r, y in cert.items():
        for j, v in system.rows[r].items():
            acc[j] = acc.get(j, 0) + y * v
    return all(v == 0 for j, v in acc.items() if j != system.rhs) and acc.get(system.rhs, 0) != 0


def evaluate_solution(n: int, solution: dict[Pairing, Fraction], letters: Sequence[int]) -> TensorPoly:
    """Substitute concrete letters into the solved ansatz."""
    if len(letters) != n:
        raise ValueError("need one letter per position")
    acc: dict[Word, Fraction] = {tuple(letters): Fraction(1)}
    for p, a in solution.items():
        if not a or any(letters[i - 1] != letters[j - 1] for i, j in p):
            continue
        res = tuple(letters[x - 1] for x in _residual(n, p))
        acc[res] = acc.get(res, 0) + a
    return TensorPoly(acc)
