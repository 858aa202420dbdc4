"""Exact rational linear algebra on plain Python lists of ``Fraction``.

Dense helpers (``rank``, ``solve``, ``inverse``) are used for the small Gram
blocks of the orthogonalisation code; :class:`SparseEliminator` handles the
larger, sparse constraint systems of the naturality audit and can produce
inconsistency certificates.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

Matrix = list[list[Fraction]]


class SingularMatrixError(ValueError):
    pass


def as_matrix(rows: Iterable[Iterable]) -> Matrix:
    return [[Fraction(x) for x in row] for row in rows]


def zeros(n: int, m: int) -> Matrix:
    return [[Fraction(0)] * m for _ in range(n)]


def identity(n: int) -> Matrix:
    out = zeros(n, n)
    for i in range(n):
        out[i][i] = Fraction(1)
    return out


def transpose(a: Sequence[Sequence[Fraction]]) -> Matrix:
    if not a:
        return []
    return [list(col) for col in zip(*a)]


def matmul(a: Sequence[Sequence[Fraction]], b: Sequence[Sequence[Fraction]]) -> Matrix:
    if not a:
        return []
    inner = len(b)
    ncols = len(b[0]) if b else 0
    if any(len(row) != inner for row in a):
        raise ValueError("shape mismatch in matmul")
    bt = transpose(b) if b else [[] for _ in range(ncols)]
    out = []
    for row in a:
        nz = [(k, x) for k, x in enumerate(row) if x]
        out.append([sum((x * col[k] for k, x in nz), Fraction(0)) for col in bt])
    return out


def matsub(a: Matrix, b: Matrix) -> Matrix:
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def is_zero(a: Sequence[Sequence[Fraction]]) -> bool:
    return all(x == 0 for row in a for x in row)


def vstack(blocks: Sequence[Matrix]) -> Matrix:
    out: Matrix = []
    for blk in blocks:
        out.extend([list(r) for r in blk])
    return out


def _rref(a: Matrix) -> tuple[Matrix, list[int]]:
    m = [list(r) for r in a]
    pivots: list[int] = []
    nrows = len(m)
    ncols = len(m[0]) if m else 0
    r = 0
    for c in range(ncols):
        if r >= nrows:
            break
        p = next((i for i in range(r, nrows) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        piv = m[r][c]
        if piv != 1:
            m[r] = [x / piv for x in m[r]]
        for i in range(nrows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                ri = m[i]
                rr = m[r]
                m[i] = [x - f * y for x, y in zip(ri, rr)]
        pivots.append(c)
        r += 1
    return m, pivots


def rank(a: Sequence[Sequence[Fraction]]) -> int:
    if not a or not a[0]:
        return 0
    return len(_rref([list(r) for r in a])[1])


def solve(a: Matrix, b: Matrix) -> Matrix:
    """Solve ``a @ x = b`` for square nonsingular ``a`` (``b`` may have many columns)."""
    n = len(a)
    if any(len(r) != n for r in a):
        raise ValueError("solve needs a square matrix")
    aug = [list(a[i]) + list(b[i]) for i in range(n)]
    red, piv = _rref(aug)
    if piv[:n] != list(range(n)):
        raise SingularMatrixError("matrix is singular")
    return [row[n:] for row in red[:n]]


def inverse(a: Matrix) -> Matrix:
    return solve(a, identity(len(a)))


def left_inverse(a: Matrix) -> Matrix:
    """A left inverse ``(aᵀa)⁻¹aᵀ`` of a full-column-rank matrix."""
    at = transpose(a)
    return matmul(inverse(matmul(at, a)), at)


def leading_minors_positive(a: Matrix) -> bool:
    """Sylvester's criterion evaluated by exact pivoting."""
    m = [list(r) for r in a]
    n = len(m)
    for k in range(n):
        if m[k][k] <= 0:
            return False
        for i in range(k + 1, n):
            f = m[i][k] / m[k][k]
            if f:
                m[i] = [x - f * y for x, y in zip(m[i], m[k])]
    return True


class SparseEliminator:
    """Incremental exact row reduction of ``[A | b]`` with sparse rows.

    Rows are dicts ``column -> Fraction``; the right-hand side lives in the
    column ``rhs`` (which must exceed every column index of ``A``). When
    ``track`` is set, each stored pivot row remembers the combination of input
    rows that produced it, so an inconsistent row yields a Farkas-type
    certificate ``y`` with ``yᵀA = 0`` and ``yᵀb ≠ 0``.
    """

    def __init__(self, rhs: int, track: bool = False):
        self.rhs = rhs
        self.track = track
        self.pivots: dict[int, dict[int, Fraction]] = {}
        self.combos: dict[int, dict[int, Fraction]] = {}
        self.certificate: dict[int, Fraction] | None = None
        self.n_rows = 0

    @property
    def rank_a(self) -> int:
        return len(self.pivots)

    @property
    def rank_aug(self) -> int:
        return len(self.pivots) + (1 if self.certificate is not None else 0)

    def add_row(self, row: dict[int, Fraction]) -> None:
        idx = self.n_rows
        self.n_rows += 1
        row = {c: Fraction(v) for c, v in row.items() if v}
        combo = {idx: Fraction(1)} if self.track else {}
        while True:
            cols = [c for c in row if c != self.rhs]
            if not cols:
                break
            hit = [c for c in cols if c in self.pivots]
            if not hit:
                break
            c = min(hit)
            f = row[c]
            for k, v in self.pivots[c].items():
                nv = row.get(k, 0) - f * v
                if nv:
                    row[k] = nv
                else:
                    row.pop(k, None)
            if self.track:
                for k, v in self.combos[c].items():
                    nv = combo.get(k, 0) - f * v
                    if nv:
                        combo[k] = nv
                    else:
                        combo.pop(k, None)
        if not row:
            return
        cols = [c for c in row if c != self.rhs]
        if not cols:
            if self.certificate is None:
                self.certificate = combo if self.track else {}
            return
        c = min(cols)
        piv = row[c]
        self.pivots[c] = {k: v / piv for k, v in row.items()}
        if self.track:
            self.combos[c] = {k: v / piv for k, v in combo.items()}

    def back_substitute(self) -> dict[int, Fraction]:
        """Solution with free variables set to zero; call only when consistent."""
        sol: dict[int, Fraction] = {}
        for c in sorted(self.pivots, reverse=True):
            row = self.pivots[c]
            val = row.get(self.rhs, Fraction(0))
            for k, v in row.items():
                if k != c and k != self.rhs:
                    val -= v * sol.get(k, Fraction(0))
            sol[c] = val
        return sol


def sparse_ranks(rows: Sequence[dict[int, Fraction]], rhs: int) -> tuple[int, int]:
    el = SparseEliminator(rhs)
    for r in rows:
        el.add_row(r)
    return el.rank_a, el.rank_aug
