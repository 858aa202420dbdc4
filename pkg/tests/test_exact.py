from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathortho.exact import (
    SingularMatrixError,
    SparseEliminator,
    identity,
    inverse,
    leading_minors_positive,
    left_inverse,
    matmul,
    rank,
    solve,
    sparse_ranks,
)

small_ints = st.integers(-3, 3)


def int_matrix(rows, cols):
    return st.lists(st.lists(small_ints, min_size=cols, max_size=cols), min_size=rows, max_size=rows)


@given(st.integers(1, 5).flatmap(lambda r: st.integers(1, 5).flatmap(lambda c: int_matrix(r, c))))
@settings(max_examples=150, deadline=None)
def test_rank_matches_numpy(m):
    assert rank([[Fraction(x) for x in row] for row in m]) == np.linalg.matrix_rank(np.array(m, dtype=float))


@given(st.integers(1, 5).flatmap(lambda r: st.integers(1, 5).flatmap(lambda c: int_matrix(r, c + 1))))
@settings(max_examples=150, deadline=None)
def test_sparse_eliminator_ranks(m):
    A = [row[:-1] for row in m]
    rows = [{j: Fraction(v) for j, v in enumerate(row) if v} for row in m]
    rhs = len(m[0]) - 1
    ra, raug = sparse_ranks(rows, rhs)
    assert ra == np.linalg.matrix_rank(np.array(A, dtype=float)) if any(any(r) for r in A) else ra == 0
    assert raug == np.linalg.matrix_rank(np.array(m, dtype=float))
    el = SparseEliminator(rhs, track=True)
    for r in rows:
        el.add_row(r)
    if el.certificate is None:
        sol = el.back_substitute()
        for row in m:
            assert sum(Fraction(row[j]) * sol.get(j, 0) for j in range(rhs)) == row[rhs]
    else:
        # yᵀA = 0 and yᵀb ≠ 0
        acc = [sum(el.certificate.get(i, 0) * Fraction(m[i][j]) for i in range(len(m))) for j in range(rhs + 1)]
        assert all(x == 0 for x in acc[:rhs]) and acc[rhs] != 0


def test_solve_and_inverse():
    A = [[Fraction(2), Fraction(1)], [Fraction(1), Fraction(3)]]
    x = solve(A, [[Fraction(3)], [Fraction(5)]])
    assert x == [[Fraction(4, 5)], [Fraction(7, 5)]]
    assert matmul(A, inverse(A)) == identity(2)
    with pytest.raises(SingularMatrixError):
        inverse([[Fraction(1), Fraction(2)], [Fraction(2), Fraction(4)]])


def test_left_inverse_and_minors():
    A = [[Fraction(1), Fraction(0)], [Fraction(1), Fraction(1)], [Fraction(0), Fraction(2)]]
    assert matmul(left_inverse(A), A) == identity(2)
    assert leading_minors_positive([[Fraction(2), Fraction(1)], [Fraction(1), Fraction(2)]])
    assert not leading_minors_positive([[Fraction(1), Fraction(2)], [Fraction(2), Fraction(1)]])
