"""Block orthogonal polynomials on the shuffle algebra graded by Lyndon generators.

Generators of degree ``m`` are the Lyndon words of length ``m``; a monomial is
a multiset of them, realised as the shuffle product of its words. For every
total degree ``n`` the monomials give a vector ``w_n`` of ``r_n = d^n``
polynomials, and block orthogonalisation yields ``p_n = w_n + lower`` with
block norms ``H_n``.

Multiplication by a generator expands in the ``p`` basis with at most
``2m + 1`` nonzero blocks ``M^k_{n,m,i}``. Everything here is exact except the
orthonormalised Jacobi truncations, which need matrix square roots.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exact import (
    Matrix,
    SingularMatrixError,
    identity,
    inverse,
    is_zero,
    left_inverse,
    matmul,
    matsub,
    rank,
    transpose,
    vstack,
    zeros,
)
from .expected import InnerProduct
from .words import (
    RadfordMonomial,
    TensorPoly,
    Word,
    linear_combination,
    lyndon_words,
    radford_expand,
    radford_monomials,
    shuffle,
    word_key,
    word_str,
)

PolyVec = list[TensorPoly]


class NotQuasiDefinite(ValueError):
    pass


@dataclass(frozen=True)
class GradedFrame:
    d: int
    n_max: int
    generators: dict[int, tuple[Word, ...]]
    monomials: dict[int, tuple[RadfordMonomial, ...]]

    @classmethod
    def build(cls, d: int, n_max: int) -> GradedFrame:
        if d < 1 or n_max < 0:
            raise ValueError("need d >= 1 and n_max >= 0")
        gens = {m: tuple(ws) for m, ws in lyndon_words(d, max(n_max, 1)).items() if m <= n_max}
        monos = {n: tuple(radford_monomials(d, n)) for n in range(n_max + 1)}
        return cls(d, n_max, gens, monos)

    def r(self, n: int) -> int:
        return len(self.monomials[n])

    def N(self, m: int) -> int:
        return len(self.generators.get(m, ()))

    def w(self, n: int) -> PolyVec:
        return [radford_expand(a) for a in self.monomials[n]]

    def generator(self, m: int, i: int) -> TensorPoly:
        return TensorPoly.of(self.generators[m][i])

    def L(self, n: int, m: int, i: int) -> Matrix:
        """``L_{n,m,i}`` with ``L w_n = w_{m,i} · w_{n-m}`` (a 0/1 row selection)."""
        index = {a: j for j, a in enumerate(self.monomials[n])}
        g = self.generators[m][i]
        out = zeros(self.r(n - m), self.r(n))
        for row, a in enumerate(self.monomials[n - m]):
            prod = tuple(sorted(a + (g,), key=word_key))
            out[row][index[prod]] = Fraction(1)
        return out

    def generator_indices(self, n: int) -> list[tuple[int, int]]:
        return [(m, i) for m in range(1, n + 1) for i in range(self.N(m))]


def apply(mat: Matrix, vec: PolyVec) -> PolyVec:
    return [linear_combination(zip(row, vec)) for row in mat]


def gram(inner: InnerProduct, a: PolyVec, b: PolyVec) -> Matrix:
    return [[inner(x, y) for y in b] for x in a]


@dataclass
class BlockPolys:
    frame: GradedFrame
    inner: InnerProduct
    p: dict[int, PolyVec] = field(default_factory=dict)
    H: dict[int, Matrix] = field(default_factory=dict)
    H_inv: dict[int, Matrix] = field(default_factory=dict)

    def G(self, n: int) -> Matrix:
        """Leading coefficients in the monomial basis; identity by construction."""
        return identity(self.frame.r(n))


def block_orth_polys(frame: GradedFrame, inner: InnerProduct) -> BlockPolys:
    """``p_n = w_n − Σ_{k<n} (w_n, p_kᵀ) H_k⁻¹ p_k`` for ``n <= n_max``."""
    out = BlockPolys(frame, inner)
    for n in range(frame.n_max + 1):
        wn = frame.w(n)
        pn = list(wn)
        for k in range(n):
            coef = matmul(gram(inner, wn, out.p[k]), out.H_inv[k])
            corr = apply(coef, out.p[k])
            pn = [a - b for a, b in zip(pn, corr)]
        Hn = gram(inner, pn, pn)
        try:
            Hinv = inverse(Hn)
        except SingularMatrixError:
            raise NotQuasiDefinite(f"functional not quasi-definite at degree {n}") from None
        out.p[n], out.H[n], out.H_inv[n] = pn, Hn, Hinv
    return out


class RecurrenceSet:
    """Lazily computed recurrence matrices ``M^k_{n,m,i}``."""

    def __init__(self, polys: BlockPolys):
        self.polys = polys
        self.frame = polys.frame
        self._M: dict[tuple[int, int, int, int], Matrix] = {}
        self._prod: dict[tuple[int, int, int], PolyVec] = {}

    def product(self, a: int, m: int, i: int) -> PolyVec:
        """``w_{m,i} · p_a`` with the generator acting by shuffle."""
        key = (a, m, i)
        if key not in self._prod:
            g = self.frame.generator(m, i)
            self._prod[key] = [shuffle(g, q) for q in self.polys.p[a]]
        return self._prod[key]

    def available(self, n: int, m: int, k: int) -> bool:
        a, b = n - m, n - m + k
        return 0 <= a <= self.frame.n_max and 0 <= b <= self.frame.n_max

    def M(self, n: int, m: int, i: int, k: int) -> Matrix:
        key = (n, m, i, k)
        if key not in self._M:
            if not self.available(n, m, k):
                raise KeyError(f"M^{k}_{{{n},{m},{i}}} needs polynomials outside degrees 0..{self.frame.n_max}")
            a, b = n - m, n - m + k
            raw = gram(self.polys.inner, self.product(a, m, i), self.polys.p[b])
            self._M[key] = matmul(raw, self.polys.H_inv[b])
        return self._M[key]

    def A(self, n: int, m: int, i: int) -> Matrix:
        return self.M(n, m, i, m)

    def C(self, n: int, m: int, i: int) -> Matrix:
        return self.M(n + m, m, i, -m)

    def joint_A(self, n: int) -> Matrix:
        return vstack([self.A(n, m, i) for m, i in self.frame.generator_indices(n)])

    def joint_Ct(self, n: int) -> Matrix:
        return vstack([transpose(self.C(n, m, i)) for m, i in self.frame.generator_indices(n)])

    def expansion(self, n: int, m: int, i: int) -> PolyVec:
        """Right-hand side of the recurrence: ``Σ_k M^k p_{n-m+k}``."""
        terms: list[PolyVec] = []
        for k in range(-m, m + 1):
            b = n - m + k
            if b < 0:
                continue
            terms.append(apply(self.M(n, m, i, k), self.polys.p[b]))
        return [linear_combination((1, t[r]) for t in terms) for r in range(self.frame.r(n - m))]

    def below_window(self, n: int, m: int, i: int) -> list[int]:
        """Degrees ``j < n − 2m`` where ``(w_{m,i} p_{n-m}, p_jᵀ)`` is nonzero (should be none)."""
        bad = []
        for j in range(0, max(0, n - 2 * m)):
            raw = gram(self.polys.inner, self.product(n - m, m, i), self.polys.p[j])
            if not is_zero(raw):
                bad.append(j)
        return bad


def recurrence_matrices(frame: GradedFrame, polys: BlockPolys) -> RecurrenceSet:
    if polys.frame is not frame:
        raise ValueError("polynomials were built on a different frame")
    return RecurrenceSet(polys)


def reconstruct_via_generalized_inverse(rset: RecurrenceSet, n: int) -> PolyVec:
    """``p_n`` from lower degrees using a left inverse ``Dᵀ = (AᵀA)⁻¹Aᵀ`` of ``A_n``."""
    frame = rset.frame
    A = rset.joint_A(n)
    if rank(A) != frame.r(n):
        raise ValueError(f"joint matrix A_{n} is rank deficient")
    Dt = left_inverse(A)
    out = [TensorPoly() for _ in range(frame.r(n))]
    col = 0
    for m, i in frame.generator_indices(n):
        width = frame.r(n - m)
        Dblk = [row[col:col + width] for row in Dt]
        col += width
        g = frame.generator(m, i)
        lead = [shuffle(g, q) for q in apply(Dblk, rset.polys.p[n - m])]
        out = [a + b for a, b in zip(out, lead)]
        for k in range(-m, m):
            b = n - m + k
            if b < 0:
                continue
            corr = apply(matmul(Dblk, rset.M(n, m, i, k)), rset.polys.p[b])
            out = [a - c for a, c in zip(out, corr)]
    return out


# --- audit --------------------------------------------------------------------


@dataclass
class Check:
    name: str
    ok: bool
    n: int
    m: int | None = None
    i: int | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None and v != ""}


@dataclass
class AuditReport:
    d: int
    n_max: int
    inner: str
    checks: list[Check]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.ok]

    def to_json(self) -> str:
        names = sorted({c.name for c in self.checks})
        summary = {nm: all(c.ok for c in self.checks if c.name == nm) for nm in names}
        return json.dumps(
            {
                "d": self.d,
                "n_max": self.n_max,
                "inner": self.inner,
                "all_ok": self.ok,
                "summary": summary,
                "checks": [c.to_dict() for c in self.checks],
            },
            indent=1,
        )


def rank_audit(rset: RecurrenceSet) -> AuditReport:
    """Exact checks of the recurrence, the M identity, the L/A/C rank conditions and reconstruction."""
    frame, polys = rset.frame, rset.polys
    checks: list[Check] = []
    nmax = frame.n_max
    for n in range(1, nmax + 1):
        for a in range(n):
            ok = is_zero(gram(polys.inner, polys.p[a], polys.p[n]))
            checks.append(Check("block_orthogonality", ok, n, detail=f"against degree {a}"))
        for m, i in frame.generator_indices(n):
            rec = rset.expansion(n, m, i)
            ok = all(x == y for x, y in zip(rset.product(n - m, m, i), rec))
            checks.append(Check("recurrence", ok, n, m, i))
            bad = rset.below_window(n, m, i)
            checks.append(Check("window", not bad, n, m, i, detail=f"nonzero below window at {bad}" if bad else ""))
            for k in range(-m, m + 1):
                if n - m + k < 0 or n + k > nmax or not rset.available(n + k, m, -k):
                    continue
                lhs = matmul(rset.M(n, m, i, k), polys.H[n - m + k])
                rhs = matmul(polys.H[n - m], transpose(rset.M(n + k, m, i, -k)))
                checks.append(Check("M_identity", is_zero(matsub(lhs, rhs)), n, m, i, detail=f"k={k}"))
            L = frame.L(n, m, i)
            checks.append(Check("L_orthonormal_rows", matmul(L, transpose(L)) == identity(frame.r(n - m)), n, m, i))
            checks.append(Check("L_rank", rank(L) == frame.r(n - m), n, m, i))
            A = rset.A(n, m, i)
            lead = matmul(polys.G(n - m), L)
            checks.append(Check("leading_coefficients", is_zero(matsub(lead, matmul(A, polys.G(n)))), n, m, i))
            checks.append(Check("A_rank", rank(A) == frame.r(n - m), n, m, i))
            C = rset.C(n, m, i)
            checks.append(Check("C_rank", rank(C) == frame.r(n - m), n, m, i))
            ac = matsub(matmul(A, polys.H[n]), matmul(polys.H[n - m], transpose(C)))
            checks.append(Check("A_C_relation", is_zero(ac), n, m, i))
        checks.append(Check("joint_A_rank", rank(rset.joint_A(n)) == frame.r(n), n))
        checks.append(Check("joint_Ct_rank", rank(rset.joint_Ct(n)) == frame.r(n), n))
        checks.append(
            Check(
                "joint_L_rank",
                rank(vstack([frame.L(n, m, i) for m, i in frame.generator_indices(n)])) == frame.r(n),
                n,
            )
        )
        rec = reconstruct_via_generalized_inverse(rset, n)
        checks.append(Check("generalized_inverse", rec == polys.p[n], n))
    return AuditReport(frame.d, nmax, polys.inner.tag, checks)


# --- orthonormal Jacobi truncations -------------------------------------------


def _sqrt_pair(H: Matrix) -> tuple[np.ndarray, np.ndarray]:
    h = np.array([[float(x) for x in row] for row in H])
    vals, vecs = np.linalg.eigh((h + h.T) / 2)
    if vals.min() <= 0:
        raise ValueError("block norm matrix is not numerically positive definite")
    root = vecs @ np.diag(np.sqrt(vals)) @ vecs.T
    inv_root = vecs @ np.diag(1 / np.sqrt(vals)) @ vecs.T
    return root, inv_root


def orthonormal_M(rset: RecurrenceSet, n: int, m: int, i: int, k: int) -> np.ndarray:
    """``H_{n-m}^{-1/2} M^k_{n,m,i} H_{n-m+k}^{1/2}``."""
    H = rset.polys.H
    _, inv_a = _sqrt_pair(H[n - m])
    root_b, _ = _sqrt_pair(H[n - m + k])
    M = np.array([[float(x) for x in row] for row in rset.M(n, m, i, k)])
    return inv_a @ M @ root_b


def jacobi_truncation(rset: RecurrenceSet, m: int, i: int, degree_cut: int | None = None) -> np.ndarray:
    """Block matrix with block ``(s, t) = M̃^{t−s}_{s+m,m,i}`` for ``|t − s| <= m``, ``s, t <= degree_cut``."""
    frame = rset.frame
    cut = frame.n_max if degree_cut is None else degree_cut
    if cut > frame.n_max:
        raise ValueError("degree_cut exceeds the computed polynomial degree")
    offs = np.cumsum([0] + [frame.r(s) for s in range(cut + 1)])
    J = np.zeros((offs[-1], offs[-1]))
    for s in range(cut + 1):
        for t in range(max(0, s - m), min(cut, s + m) + 1):
            J[offs[s]:offs[s + 1], offs[t]:offs[t + 1]] = orthonormal_M(rset, s + m, m, i, t - s)
    return J


def commutativity_residual(
    rset: RecurrenceSet, pairs: Sequence[tuple[tuple[int, int], tuple[int, int]]], degree_cut: int | None = None
) -> float:
    """Max entry of ``J1 J2 − J2 J1`` over block rows unaffected by truncation."""
    frame = rset.frame
    cut = frame.n_max if degree_cut is None else degree_cut
    offs = np.cumsum([0] + [frame.r(s) for s in range(cut + 1)])
    worst = 0.0
    for (m1, i1), (m2, i2) in pairs:
        J1 = jacobi_truncation(rset, m1, i1, cut)
        J2 = jacobi_truncation(rset, m2, i2, cut)
        last = cut - max(m1, m2)
        if last < 0:
            continue
        rows = slice(0, offs[last + 1])
        comm = (J1 @ J2 - J2 @ J1)[rows]
        worst = max(worst, float(np.abs(comm).max()) if comm.size else 0.0)
    return worst


def all_generator_pairs(frame: GradedFrame) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    gens = [(m, i) for m in sorted(frame.generators) for i in range(frame.N(m))]
    return [(a, b) for x, a in enumerate(gens) for b in gens[x + 1:]]


def matrix_csv(mat: Matrix) -> str:
    return "\n".join(",".join(f"{x.numerator}/{x.denominator}" for x in row) for row in mat) + "\n"


def poly_vector_repr(vec: PolyVec) -> list[dict[str, str]]:
    return [p.to_dict() for p in vec]


__all__ = [
    "GradedFrame",
    "BlockPolys",
    "RecurrenceSet",
    "AuditReport",
    "NotQuasiDefinite",
    "block_orth_polys",
    "recurrence_matrices",
    "rank_audit",
    "reconstruct_via_generalized_inverse",
    "jacobi_truncation",
    "commutativity_residual",
    "orthonormal_M",
    "all_generator_pairs",
    "word_str",
]
