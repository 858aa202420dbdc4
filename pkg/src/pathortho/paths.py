"""Sampled Brownian paths, their truncated Stratonovich signatures, and Itô features.

Every path has its own random stream derived from ``(seed, path index)``, so a
batch can be produced in any number of chunks or threads and still be
bit-identical. Signatures are built step by step with Chen's relation.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import factorial
from typing import Iterator, Sequence

import numpy as np

from .hoffman import strat_to_ito_map
from .words import Word, word_str, words_up_to


@dataclass(frozen=True)
class PathSpec:
    d: int = 1
    steps: int = 100
    paths: int = 1000
    seed: int = 0
    T: float = 1.0
    augment_time: bool = True
    start: int = 0

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.paths < 1:
            raise ValueError("paths must be at least 1")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if self.seed < 0 or self.start < 0:
            raise ValueError("seed and start index must be non-negative")

    @property
    def d_aug(self) -> int:
        return self.d + 1 if self.augment_time else self.d

    def chunk(self, start: int, paths: int) -> PathSpec:
        """The sub-batch of paths ``start .. start+paths`` (indices relative to this spec)."""
        return PathSpec(self.d, self.steps, paths, self.seed, self.T, self.augment_time, self.start + start)


@dataclass(frozen=True)
class PathBatch:
    """Piecewise-linear paths stored as increments of shape ``(paths, steps, d_aug)``.

    With time augmentation, channel 0 is time and channels ``1..d`` are the
    Brownian coordinates, matching the letter convention of the word algebra.
    """

    spec: PathSpec
    increments: np.ndarray

    @property
    def augmented(self) -> bool:
        return self.spec.augment_time

    @property
    def n_paths(self) -> int:
        return self.increments.shape[0]

    def brownian_increments(self) -> np.ndarray:
        return self.increments[:, :, 1:] if self.augmented else self.increments

    def brownian(self) -> np.ndarray:
        """Brownian values on the grid, shape ``(paths, steps + 1, d)`` starting at 0."""
        inc = self.brownian_increments()
        out = np.zeros((inc.shape[0], inc.shape[1] + 1, inc.shape[2]))
        np.cumsum(inc, axis=1, out=out[:, 1:, :])
        return out

    def terminal(self) -> np.ndarray:
        return self.brownian_increments().sum(axis=1)

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.spec.T, self.spec.steps + 1)


def _path_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def sample_paths(spec: PathSpec) -> PathBatch:
    """Standard BM increments ``N(0, T/steps)`` per coordinate; optional uniform time channel."""
    dt = spec.T / spec.steps
    sd = np.sqrt(dt)
    out = np.empty((spec.paths, spec.steps, spec.d_aug))
    off = 1 if spec.augment_time else 0
    if spec.augment_time:
        out[:, :, 0] = dt
    for i in range(spec.paths):
        rng = _path_rng(spec.seed, spec.start + i)
        out[i, :, off:] = rng.standard_normal((spec.steps, spec.d)) * sd
    return PathBatch(spec, out)


def iter_chunks(spec: PathSpec, chunk: int) -> Iterator[PathSpec]:
    for s in range(0, spec.paths, chunk):
        yield spec.chunk(s, min(chunk, spec.paths - s))


# --- signatures ---------------------------------------------------------------


@dataclass(frozen=True)
class SigTensor:
    """Truncated signatures of a batch: ``levels[k]`` has shape ``(paths, dim**k)``."""

    dim: int
    N: int
    levels: tuple[np.ndarray, ...]

    @property
    def n_paths(self) -> int:
        return self.levels[0].shape[0]

    def coordinate(self, w: Word) -> np.ndarray:
        if len(w) > self.N:
            raise ValueError(f"word {word_str(w)!r} exceeds truncation level {self.N}")
        idx = 0
        for a in w:
            if not 0 <= a < self.dim:
                raise ValueError(f"letter {a} outside the {self.dim}-letter alphabet")
            idx = idx * self.dim + a
        return self.levels[len(w)][:, idx]

    def flat(self) -> np.ndarray:
        """All levels side by side; column order is (degree, lexicographic)."""
        return np.concatenate(self.levels, axis=1)


def _segment_update(levels: list[np.ndarray], delta: np.ndarray, N: int) -> None:
    """In place: ``S <- S ⊗ exp(delta)`` truncated at ``N`` (Horner form)."""
    P, D = delta.shape
    for n in range(N, 0, -1):
        acc = delta / n
        for j in range(1, n):
            acc = ((acc + levels[j])[:, :, None] * (delta[:, None, :] / (n - j))).reshape(P, -1)
        levels[n] = levels[n] + acc


def strat_signature(increments: np.ndarray, N: int) -> SigTensor:
    """Signature of the polylines with the given increments ``(paths, steps, dim)``."""
    if N < 0:
        raise ValueError("truncation level N must be non-negative")
    inc = np.asarray(increments, dtype=float)
    if inc.ndim == 2:
        inc = inc[None]
    P, S, D = inc.shape
    levels = [np.ones((P, 1))] + [np.zeros((P, D**k)) for k in range(1, N + 1)]
    for s in range(S):
        _segment_update(levels, inc[:, s, :], N)
    return SigTensor(D, N, tuple(levels))


def segment_exp(delta: np.ndarray, N: int) -> list[np.ndarray]:
    """Levels of ``exp⊗(delta)`` for a single increment vector."""
    delta = np.asarray(delta, dtype=float)
    out = [np.ones(1)]
    cur = np.ones(1)
    for k in range(1, N + 1):
        cur = np.multiply.outer(cur, delta).ravel()
        out.append(cur / factorial(k))
    return out


# --- features -----------------------------------------------------------------


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    columns: tuple[Word, ...]
    tag: str
    T: float | None = None

    def __post_init__(self) -> None:
        if self.values.shape[1] != len(self.columns):
            raise ValueError("column labels do not match the feature matrix width")

    def index(self, w: Word) -> int:
        return self.columns.index(w)

    def column(self, w: Word) -> np.ndarray:
        return self.values[:, self.index(w)]

    def select(self, words: Sequence[Word]) -> FeatureMatrix:
        pos = {w: i for i, w in enumerate(self.columns)}
        idx = [pos[w] for w in words]
        return FeatureMatrix(self.values[:, idx], tuple(words), self.tag, self.T)

    def to_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            for line in header.splitlines():
                buf.write(f"# {line}\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow([word_str(w) or "()" for w in self.columns])
        for row in self.values:
            wr.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def feature_dimension(d_aug: int, N: int) -> int:
    if d_aug == 1:
        return N + 1
    return (d_aug ** (N + 1) - 1) // (d_aug - 1)


def _chunked(batch: PathBatch, N: int, fn, chunk: int, threads: int) -> np.ndarray:
    P = batch.n_paths
    bounds = [(s, min(s + chunk, P)) for s in range(0, P, chunk)]

    def work(b):
        return fn(strat_signature(batch.increments[b[0]:b[1]], N))

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    return np.concatenate(parts, axis=0)


def strat_features(batch: PathBatch, N: int, *, chunk: int = 2048, threads: int = 1) -> FeatureMatrix:
    """Stratonovich signature coordinates of every word with ``#w <= N``."""
    D = batch.increments.shape[2]
    vals = _chunked(batch, N, lambda s: s.flat(), chunk, threads)
    letters = range(D) if batch.augmented else range(1, D + 1)
    return FeatureMatrix(vals, tuple(words_up_to(letters, N)), "stratonovich", batch.spec.T)


def ito_features(batch: PathBatch, N: int, *, chunk: int = 2048, threads: int = 1) -> FeatureMatrix:
    """Itô coordinates ``⟨w, Ŝ⟩ = ⟨log(w), S⟩`` via the Hoffman logarithm."""
    if not batch.augmented:
        raise ValueError("Itô features need a time-augmented batch")
    strat = strat_features(batch, N, chunk=chunk, threads=threads)
    conv = strat_to_ito_map(batch.spec.d, N)
    if tuple(conv.words) != strat.columns:
        raise RuntimeError("conversion matrix and feature columns are misaligned")
    return FeatureMatrix(strat.values @ conv.dense(), strat.columns, "ito", batch.spec.T)


# --- models driven by the sampled paths --------------------------------------


def geometric_bm(batch: PathBatch, S0: float = 1.0, sigma: float = 0.2, mu: float = 0.0) -> np.ndarray:
    """Prices ``S0·exp(σB_t + (μ − σ²/2)t)`` on the grid, shape ``(paths, steps + 1)``."""
    if batch.spec.d != 1:
        raise ValueError("geometric_bm needs a scalar Brownian motion")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    B = batch.brownian()[:, :, 0]
    t = batch.times()
    return S0 * np.exp(sigma * B + (mu - 0.5 * sigma**2) * t[None, :])


def solve_linear_sde(A: np.ndarray, y0: np.ndarray, batch: PathBatch) -> np.ndarray:
    """Exact solution of ``dY = Σ_α A_α Y ∘ dB^α`` along each sampled polyline.

    On each linear piece the equation has constant coefficients, so the update
    is the matrix exponential of ``Σ_α A_α ΔB^α``. Returns ``Y_T`` per path.
    """
    A = np.asarray(A, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    inc = batch.brownian_increments()
    if A.ndim != 3 or A.shape[0] != inc.shape[2] or A.shape[1] != A.shape[2] or A.shape[1] != y0.shape[0]:
        raise ValueError("A must have shape (d, n, n) matching the batch and y0")
    P, S, _ = inc.shape
    y = np.broadcast_to(y0, (P, y0.shape[0])).copy()
    for s in range(S):
        gen = np.einsum("pa,aij->pij", inc[:, s, :], A)
        y = _expm_apply(gen, y)
    return y


def _expm_apply(gen: np.ndarray, y: np.ndarray, order: int = 12) -> np.ndarray:
    """``exp(gen) @ y`` for a stack of small matrices, by scaled Taylor series."""
    norm = np.abs(gen).sum(axis=2).max()
    squarings = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0.5 else 0
    g = gen / 2**squarings
    for _ in range(2**squarings):
        term = y
        acc = y.copy()
        for k in range(1, order + 1):
            term = np.einsum("pij,pj->pi", g, term) / k
            acc += term
        y = acc
    return y
