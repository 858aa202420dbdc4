from math import factorial

import numpy as np
import pytest

from pathortho.paths import (
    FeatureMatrix,
    PathSpec,
    _expm_apply,
    feature_dimension,
    geometric_bm,
    ito_features,
    iter_chunks,
    sample_paths,
    segment_exp,
    solve_linear_sde,
    strat_features,
    strat_signature,
)
from pathortho.words import shuffle, TensorPoly, words_up_to


def riemann_signature(points: np.ndarray, word, refine: int = 400) -> float:
    """Nested left-point sums on a finely refined polyline."""
    pts = [points[0]]
    for a, b in zip(points[:-1], points[1:]):
        for k in range(1, refine + 1):
            pts.append(a + (b - a) * k / refine)
    inc = np.diff(np.array(pts), axis=0)
    acc = np.ones(len(inc) + 1)
    for letter in word:
        # acc[i] = value of the prefix integral up to step i
        nxt = np.concatenate([[0.0], np.cumsum(acc[:-1] * inc[:, letter])])
        acc = nxt
    return float(acc[-1])


def test_spec_validation():
    with pytest.raises(ValueError):
        PathSpec(d=0)
    with pytest.raises(ValueError):
        PathSpec(T=0)
    with pytest.raises(ValueError):
        PathSpec(steps=0)


def test_time_row_and_terminal():
    spec = PathSpec(d=2, steps=8, paths=3, seed=1, T=2.0)
    b = sample_paths(spec)
    assert np.allclose(np.cumsum(b.increments[0, :, 0]), np.arange(1, 9) * 0.25)
    assert np.allclose(b.brownian()[:, -1, :], b.terminal())
    assert b.brownian().shape == (3, 9, 2)


def test_determinism_and_chunking():
    spec = PathSpec(d=2, steps=10, paths=50, seed=3)
    a = sample_paths(spec).increments
    assert np.array_equal(a, sample_paths(spec).increments)
    parts = np.concatenate([sample_paths(s).increments for s in iter_chunks(spec, 7)])
    assert np.array_equal(a, parts)
    other = sample_paths(PathSpec(d=2, steps=10, paths=50, seed=4)).increments
    assert not np.array_equal(a, other)


def test_variance_of_terminal():
    b = sample_paths(PathSpec(d=1, steps=4, paths=100_000, seed=11, T=1.5))
    x = b.terminal()[:, 0]
    v = x.var(ddof=1)
    se = np.sqrt(2.0 / (len(x) - 1)) * 1.5
    assert abs(v - 1.5) < 3 * se


def test_single_segment_signature():
    delta = np.array([0.3, -1.2, 0.7])
    sig = strat_signature(delta[None, None, :], 3)
    assert np.allclose(sig.levels[2][0], np.outer(delta, delta).ravel() / 2)
    assert sig.levels[0][0, 0] == 1.0
    for k, lev in enumerate(segment_exp(delta, 3)):
        assert np.allclose(sig.levels[k][0], lev)


def test_two_segments_against_quadrature():
    rng = np.random.default_rng(0)
    pts = np.vstack([np.zeros(2), rng.standard_normal((2, 2))])
    sig = strat_signature(np.diff(pts, axis=0)[None], 3)
    for w in [(0,), (0, 1), (1, 0), (1, 1, 0), (0, 1, 0)]:
        assert abs(sig.coordinate(w)[0] - riemann_signature(pts, w)) < 2e-2


def test_chen_against_segment_product():
    rng = np.random.default_rng(1)
    d1, d2 = rng.standard_normal(2), rng.standard_normal(2)
    sig = strat_signature(np.stack([d1, d2])[None], 2)
    a, b = segment_exp(d1, 2), segment_exp(d2, 2)
    level2 = a[2] + b[2] + np.outer(a[1], b[1]).ravel()
    assert np.allclose(sig.levels[2][0], level2)


def test_shuffle_identity_on_polyline():
    rng = np.random.default_rng(2)
    sig = strat_signature(rng.standard_normal((5, 20, 3)) * 0.3, 4)
    for u, v in [((1,), (2,)), ((0, 1), (2,)), ((1, 2), (2, 1))]:
        prod = shuffle(TensorPoly.of(u), TensorPoly.of(v))
        rhs = sum(float(c) * sig.coordinate(w) for w, c in prod.items())
        assert np.allclose(sig.coordinate(u) * sig.coordinate(v), rhs)


def test_feature_dimensions():
    b = sample_paths(PathSpec(d=2, steps=5, paths=4))
    f = strat_features(b, 3)
    assert f.values.shape == (4, feature_dimension(3, 3)) == (4, 40)
    assert f.columns == tuple(words_up_to(range(3), 3))
    assert feature_dimension(1, 4) == 5


def test_ito_feature_columns():
    T = 1.3
    b = sample_paths(PathSpec(d=2, steps=50, paths=200, seed=5, T=T))
    s, i = strat_features(b, 3), ito_features(b, 3)
    for n in range(4):
        assert np.allclose(i.column((0,) * n), T**n / factorial(n))
    assert np.allclose(i.column((1,)), s.column((1,)))
    assert np.allclose(i.column((1, 1)), s.column((1, 1)) - T / 2)


def test_ito_martingale_mean():
    b = sample_paths(PathSpec(d=1, steps=20, paths=100_000, seed=8))
    x = ito_features(b, 2).column((1, 1))
    assert abs(x.mean()) < 3 * x.std(ddof=1) / np.sqrt(len(x))


def test_ito_features_need_time():
    b = sample_paths(PathSpec(d=1, steps=5, paths=3, augment_time=False))
    with pytest.raises(ValueError):
        ito_features(b, 2)
    assert strat_features(b, 2).columns[1] == (1,)


def test_threads_do_not_change_results():
    b = sample_paths(PathSpec(d=2, steps=20, paths=300, seed=9))
    a = strat_features(b, 3, chunk=64, threads=1).values
    c = strat_features(b, 3, chunk=64, threads=4).values
    assert np.array_equal(a, c)


def test_feature_csv():
    f = FeatureMatrix(np.array([[1.0, 0.5]]), ((), (1,)), "stratonovich")
    text = f.to_csv("seed=0")
    assert text.splitlines() == ["# seed=0", "(),1", "1.0,0.5"]


def test_geometric_bm():
    b = sample_paths(PathSpec(d=1, steps=10, paths=100_000, seed=2))
    assert np.allclose(geometric_bm(b, 2.0, 0.0, 0.0), 2.0)
    s = geometric_bm(b, 1.0, 0.2, 0.05)[:, -1]
    assert abs(s.mean() - np.exp(0.05)) < 4 * s.std() / np.sqrt(len(s))
    with pytest.raises(ValueError):
        geometric_bm(b, sigma=-0.1)


def test_expm_apply_matches_series():
    rng = np.random.default_rng(3)
    g = rng.standard_normal((4, 3, 3)) * 2
    y = rng.standard_normal((4, 3))
    ref = []
    for k in range(4):
        # scaling and squaring by hand with a long series
        m = g[k] / 64
        e, term = np.eye(3), np.eye(3)
        for j in range(1, 30):
            term = term @ m / j
            e = e + term
        ref.append(np.linalg.matrix_power(e, 64) @ y[k])
    assert np.allclose(_expm_apply(g, y), np.array(ref), rtol=1e-12, atol=1e-12)


def test_linear_sde_commuting_case():
    # commuting coefficients: Y_T = exp(Σ A_α B^α_T) y0 exactly
    b = sample_paths(PathSpec(d=2, steps=30, paths=20, seed=4))
    A = np.stack([np.diag([0.3, -0.2]), np.diag([0.1, 0.5])])
    y0 = np.array([1.0, 2.0])
    y = solve_linear_sde(A, y0, b)
    BT = b.terminal()
    ref = y0 * np.exp(BT @ np.array([[0.3, -0.2], [0.1, 0.5]]))
    assert np.allclose(y, ref)


def _bridge_refine(inc: np.ndarray, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Split every increment at its midpoint with a Brownian bridge draw."""
    z = rng.standard_normal(inc.shape) * np.sqrt(dt / 4)
    out = np.empty((inc.shape[0], 2 * inc.shape[1], inc.shape[2]))
    out[:, 0::2] = inc / 2 + z
    out[:, 1::2] = inc / 2 - z
    return out


def test_levy_area_converges_under_refinement():
    rng = np.random.default_rng(12)
    steps = 8
    inc = rng.standard_normal((400, steps, 2)) * np.sqrt(1 / steps)
    levels = [inc]
    for k in range(2):
        levels.append(_bridge_refine(levels[-1], 1 / (steps * 2**k), rng))

    def area(x):
        s = strat_signature(x, 2)
        return 0.5 * (s.coordinate((0, 1)) - s.coordinate((1, 0)))

    ref = area(levels[2])
    coarse = np.median(np.abs(area(levels[0]) - ref))
    fine = np.median(np.abs(area(levels[1]) - ref))
    assert fine < coarse
