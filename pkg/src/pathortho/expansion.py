"""Expansion and regression of Brownian functionals in signature coordinates.

``fit_expansion`` estimates the coefficients of the orthogonal series
``Y ≈ Σ_w E[Y⟨p̂_w, Ŝ⟩]/(p̂_w, p̂_w) · ⟨p̂_w, Ŝ⟩`` by Monte Carlo means;
``ols_fit`` is ordinary least squares on the same coordinates. The linear SDE
and the Black-Scholes payoffs supply targets with known structure, and
:func:`sde_compare` / :func:`bs_compare` run the two experiments end to end.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .ortho import OrthoBasis, ito_basis, nondegenerate_words
from .paths import (
    FeatureMatrix,
    PathSpec,
    SigTensor,
    geometric_bm,
    ito_features,
    sample_paths,
    solve_linear_sde,
    strat_signature,
)
from .words import Word, weighted_degree, word_str


def orthogonal_features(features: FeatureMatrix, basis: OrthoBasis) -> np.ndarray:
    """Per-path values ``⟨p̂_w, Ŝ⟩`` for every basis entry, columns in basis order."""
    if features.tag != "ito":
        raise ValueError("orthogonal features need Itô features")
    if features.T is not None and not np.isclose(features.T, float(basis.T)):
        raise ValueError(f"feature horizon {features.T} does not match basis horizon {basis.T}")
    max_letter = max((max(w) for w in features.columns if w), default=0)
    if max_letter != basis.d:
        raise ValueError(f"features are over {max_letter} letters but the basis has d={basis.d}")
    support = basis.support()
    sub = features.select(support)
    return sub.values @ basis.coefficient_matrix(support)


@dataclass(frozen=True)
class ExpansionModel:
    basis: OrthoBasis
    N: int
    coefficients: dict[Word, float]
    stderr: dict[Word, float] = field(default_factory=dict)

    @property
    def basis_id(self) -> str:
        return self.basis.basis_id()

    def truncate(self, N: int) -> ExpansionModel:
        basis = self.basis.truncate(N)
        keep = set(basis.keys())
        return ExpansionModel(
            basis,
            N,
            {w: c for w, c in self.coefficients.items() if w in keep},
            {w: s for w, s in self.stderr.items() if w in keep},
        )

    def predict(self, features: FeatureMatrix) -> np.ndarray:
        orth = orthogonal_features(features, self.basis)
        coef = np.array([self.coefficients[e.key] for e in self.basis])
        return orth @ coef

    def to_json(self) -> str:
        return json.dumps(
            {
                "basis_id": self.basis_id,
                "N": self.N,
                "coefficients": {word_str(w): c for w, c in self.coefficients.items()},
            },
            indent=1,
        )


CONTROLS = ("none", "mean", "sequential")


def fit_expansion(
    Y: np.ndarray,
    features: FeatureMatrix,
    basis: OrthoBasis,
    N: int | None = None,
    *,
    control: str = "none",
) -> ExpansionModel:
    """Monte Carlo coefficients ``mean(Y·⟨p̂_w, Ŝ⟩) / (p̂_w, p̂_w)``.

    ``control`` selects an optional control variate. Each replaces ``Y`` by
    ``Y − g`` where ``g`` is a combination of basis functions other than
    ``p̂_w``, which leaves ``E[Y p̂_w]`` unchanged:

    * ``"none"``: the plain sample mean;
    * ``"mean"``: ``g`` is the sample mean of ``Y``;
    * ``"sequential"``: ``g`` is the series already fitted on all lower weighted
      degrees (on the same sample, so the bias is ``O(1/M)``).

    Lower-degree coefficients never depend on higher-degree entries, whatever
    the control.
    """
    if control not in CONTROLS:
        raise ValueError(f"unknown control {control!r}; expected one of {CONTROLS}")
    if N is not None:
        basis = basis.truncate(N)
    else:
        N = max((weighted_degree(e.key) for e in basis), default=0)
    Y = np.asarray(Y, dtype=float).ravel()
    if Y.shape[0] != features.values.shape[0]:
        raise ValueError("target length does not match the number of feature rows")
    orth = orthogonal_features(features, basis)
    M = Y.shape[0]
    coefs: dict[Word, float] = {}
    errs: dict[Word, float] = {}
    fitted = np.zeros(M)
    by_degree: dict[int, list[int]] = {}
    for j, e in enumerate(basis):
        by_degree.setdefault(weighted_degree(e.key), []).append(j)
    for deg in sorted(by_degree):
        if control == "none":
            resid = Y
        elif control == "mean":
            resid = Y - Y.mean() if deg > 0 else Y
        else:
            resid = Y - fitted
        update = np.zeros(M)
        for j in by_degree[deg]:
            e = basis.entries[j]
            if e.sq_norm == 0:
                coefs[e.key], errs[e.key] = 0.0, 0.0
                continue
            prod = resid * orth[:, j]
            norm = float(e.sq_norm)
            coefs[e.key] = float(prod.mean() / norm)
            errs[e.key] = float(prod.std(ddof=1) / np.sqrt(M) / norm) if M > 1 else float("nan")
            update += coefs[e.key] * orth[:, j]
        fitted += update
    return ExpansionModel(basis, N, coefs, errs)


def covariance_series(m1: ExpansionModel, m2: ExpansionModel) -> float:
    """``Σ_w c1(w)·c2(w)·(p̂_w, p̂_w)``; the constant term is excluded, giving a covariance."""
    if m1.basis_id != m2.basis_id:
        raise ValueError("models are expanded in different bases")
    total = 0.0
    for e in m1.basis:
        if e.key:
            total += m1.coefficients[e.key] * m2.coefficients[e.key] * float(e.sq_norm)
    return total


# --- least squares ------------------------------------------------------------


@dataclass(frozen=True)
class RegressionModel:
    columns: tuple[Word, ...]
    beta: np.ndarray
    ridge: float
    rank: int
    condition: float
    fallback: bool

    def predict(self, features: FeatureMatrix) -> np.ndarray:
        return features.select(self.columns).values @ self.beta


def ols_fit(
    Y: np.ndarray,
    features: FeatureMatrix,
    N: int | None = None,
    ridge: float = 0.0,
    *,
    columns: Sequence[Word] | None = None,
) -> RegressionModel:
    """Minimise ``‖Φβ − Y‖² + λ‖β‖²`` by an orthogonal (SVD-based) least-squares solve.

    ``columns`` picks the regressors; by default every feature word of weighted
    degree ``<= N``. When ``λ = 0`` and ``Φ`` is rank deficient, a tiny ridge
    relative to the largest singular value is used instead and flagged.
    """
    if features.values.shape[0] < 1:
        raise ValueError("need at least one observation")
    if columns is None:
        columns = [w for w in features.columns if N is None or weighted_degree(w) <= N]
    phi = features.select(columns).values
    Y = np.asarray(Y, dtype=float).ravel()
    sv = np.linalg.svd(phi, compute_uv=False)
    tol = sv[0] * max(phi.shape) * np.finfo(float).eps if sv.size else 0.0
    rank = int((sv > tol).sum())
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else float("inf")
    fallback = False
    lam = float(ridge)
    if lam == 0.0 and rank < phi.shape[1]:
        lam = 1e-10 * float(sv[0] ** 2)
        fallback = True
    if lam > 0:
        k = phi.shape[1]
        aug = np.vstack([phi, np.sqrt(lam) * np.eye(k)])
        beta = np.linalg.lstsq(aug, np.concatenate([Y, np.zeros(k)]), rcond=None)[0]
    else:
        beta = np.linalg.lstsq(phi, Y, rcond=None)[0]
    return RegressionModel(tuple(columns), beta, lam, rank, cond, fallback)


# --- metrics and payoffs ------------------------------------------------------


def metrics(predictions: np.ndarray, targets: np.ndarray) -> dict[str, float]:
    """Root-mean-square error ``L2`` and ``R2 = 1 − SSE/SST``."""
    p = np.asarray(predictions, dtype=float).ravel()
    y = np.asarray(targets, dtype=float).ravel()
    if p.shape != y.shape:
        raise ValueError("predictions and targets differ in length")
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0:
        raise ValueError("R2 is undefined for zero-variance targets")
    sse = float(((y - p) ** 2).sum())
    return {"L2": float(np.sqrt(sse / y.size)), "R2": 1.0 - sse / sst}


def call_payoff(prices: np.ndarray, K: float = 1.0) -> np.ndarray:
    return np.maximum(prices[:, -1] - K, 0.0)


def lookback_payoff(prices: np.ndarray) -> np.ndarray:
    return prices.max(axis=1)


# --- linear SDE ---------------------------------------------------------------


@dataclass(frozen=True)
class LinearSDESpec:
    """``dY = Σ_α A_α Y ∘ dB^α`` with ``A`` of shape ``(d, n, n)``."""

    A: np.ndarray
    y0: np.ndarray

    def __post_init__(self) -> None:
        A = np.asarray(self.A, dtype=float)
        y0 = np.asarray(self.y0, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2] or A.shape[1] != y0.shape[0]:
            raise ValueError("A must have shape (d, n, n) with n = len(y0)")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y0", y0)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @classmethod
    def random(cls, d: int, n: int, rng: np.random.Generator) -> LinearSDESpec:
        """Gaussian ``A`` rescaled to unit Frobenius norm, started at ``e_1``."""
        A = rng.standard_normal((d, n, n))
        A /= np.linalg.norm(A)
        y0 = np.zeros(n)
        y0[0] = 1.0
        return cls(A, y0)


def linear_sde_taylor(spec: LinearSDESpec, sig: SigTensor, N: int) -> np.ndarray:
    """Truncated Taylor value ``Σ_{#w<=N} A_{w_n}⋯A_{w_1} y0 ⟨w, S⟩`` per path.

    ``sig`` may be over ``{1..d}`` (dim ``d``) or time-augmented (dim ``d+1``);
    the time letter carries no vector field.
    """
    if N > sig.N:
        raise ValueError(f"signature truncated at {sig.N} < {N}")
    if sig.dim == spec.d:
        fields = list(spec.A)
    elif sig.dim == spec.d + 1:
        fields = [np.zeros((spec.n, spec.n))] + list(spec.A)
    else:
        raise ValueError("signature alphabet does not match the SDE dimension")
    Fs = np.stack(fields)  # (dim, n, n)
    coef = spec.y0[None, :]  # (dim^k, n)
    out = np.broadcast_to(spec.y0, (sig.n_paths, spec.n)).copy()
    for k in range(1, N + 1):
        coef = np.einsum("aij,pj->pai", Fs, coef).reshape(-1, spec.n)
        out += sig.levels[k] @ coef
    return out


# --- experiments --------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    method: str
    N: int
    paths: int
    seed: int
    metric: str
    value: float


def rows_to_csv(rows: Iterable[ResultRow], header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        for line in header.splitlines():
            buf.write(f"# {line}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["method", "N", "paths", "seed", "metric", "value"])
    for r in rows:
        wr.writerow([r.method, r.N, r.paths, r.seed, r.metric, repr(r.value)])
    return buf.getvalue()


TEST_SEED_OFFSET = 1_000_003


def _orth_and_regr(
    Y_train: np.ndarray,
    Y_test: np.ndarray,
    F_train: FeatureMatrix,
    F_test: FeatureMatrix,
    d: int,
    N: int,
    T: float,
    control: str,
    ridge: float,
) -> dict[str, dict[str, float]]:
    basis = ito_basis(d, N, Fraction(T).limit_denominator(10**6))
    model = fit_expansion(Y_train, F_train, basis, control=control)
    out = {"Orth": metrics(model.predict(F_test), Y_test)}
    cols = nondegenerate_words(d, N)
    reg = ols_fit(Y_train, F_train, ridge=ridge, columns=cols)
    out["Regr"] = metrics(reg.predict(F_test), Y_test)
    return out


def sde_compare(
    *,
    d: int = 2,
    n_state: int = 2,
    degrees: Sequence[int] = (1, 2, 3, 4, 5),
    paths: int = 10_000,
    test_paths: int | None = None,
    steps: int = 100,
    seeds: Sequence[int] = tuple(range(10)),
    T: float = 1.0,
    control: str = "none",
    threads: int = 1,
) -> list[ResultRow]:
    """Taylor expansion versus orthogonal series for random unit-norm linear SDEs."""
    rows: list[ResultRow] = []
    Nmax = max(degrees)
    test_paths = test_paths or paths
    for seed in seeds:
        sde = LinearSDESpec.random(d, n_state, np.random.default_rng(seed))
        train = sample_paths(PathSpec(d, steps, paths, seed, T, True))
        test = sample_paths(PathSpec(d, steps, test_paths, seed + TEST_SEED_OFFSET, T, True))
        y_train = solve_linear_sde(sde.A, sde.y0, train)[:, 0]
        y_test = solve_linear_sde(sde.A, sde.y0, test)[:, 0]
        F_train = ito_features(train, Nmax, threads=threads)
        F_test = ito_features(test, Nmax, threads=threads)
        sig_test = strat_signature(test.increments, Nmax)
        for N in degrees:
            taylor = linear_sde_taylor(sde, sig_test, N)[:, 0]
            res = {"Taylor": metrics(taylor, y_test)}
            basis = ito_basis(d, N, Fraction(T).limit_denominator(10**6))
            model = fit_expansion(y_train, F_train, basis, control=control)
            res["Orth"] = metrics(model.predict(F_test), y_test)
            for method, m in res.items():
                for key, val in m.items():
                    rows.append(ResultRow(method, N, paths, seed, key, val))
    return rows


def bs_compare(
    *,
    degrees: Sequence[int] = (1, 2, 3, 4, 5),
    paths: int = 10_000,
    test_paths: int | None = None,
    steps: int = 100,
    seed: int = 0,
    T: float = 1.0,
    S0: float = 1.0,
    sigma: float = 0.2,
    mu: float = 0.0,
    K: float = 1.0,
    ridge: float = 0.0,
    control: str = "none",
    threads: int = 1,
) -> list[ResultRow]:
    """Regr (least squares) and Orth (series) R² and L² for call and lookback payoffs."""
    test_paths = test_paths or paths
    train = sample_paths(PathSpec(1, steps, paths, seed, T, True))
    test = sample_paths(PathSpec(1, steps, test_paths, seed + TEST_SEED_OFFSET, T, True))
    s_train = geometric_bm(train, S0, sigma, mu)
    s_test = geometric_bm(test, S0, sigma, mu)
    targets = {
        "call": (call_payoff(s_train, K), call_payoff(s_test, K)),
        "lookback": (lookback_payoff(s_train), lookback_payoff(s_test)),
    }
    Nmax = max(degrees)
    F_train = ito_features(train, Nmax, threads=threads)
    F_test = ito_features(test, Nmax, threads=threads)
    rows: list[ResultRow] = []
    for name, (ytr, yte) in targets.items():
        for N in degrees:
            res = _orth_and_regr(ytr, yte, F_train, F_test, 1, N, T, control, ridge)
            for method, m in res.items():
                for key, val in m.items():
                    rows.append(ResultRow(f"{method}-{name}", N, paths, seed, key, val))
    return rows


# --- empirical orthogonality -------------------------------------------------


@dataclass(frozen=True)
class OrthogonalityCheck:
    """Empirical correlations of three feature families on one sample.

    ``corr`` maps ``"stratonovich"``, ``"ito"`` and ``"orthogonal"`` to matrices
    over ``words`` (the non-degenerate words without ∅). ``gram_z`` holds
    ``|mean(p̂_u p̂_v) − (p̂_u, p̂_v)| / SE`` for the orthogonal family and
    ``rho_z`` the orthogonal correlations divided by their standard errors
    under zero correlation, ``sqrt(E[x²y²]/M)`` for standardised ``x, y``.
    """

    words: tuple[Word, ...]
    corr: dict[str, np.ndarray]
    gram_z: np.ndarray
    rho_z: np.ndarray
    paths: int

    def max_offdiag(self, family: str) -> float:
        c = np.abs(self.corr[family]).copy()
        np.fill_diagonal(c, 0.0)
        return float(c.max()) if c.size else 0.0

    def inter_chaos_max(self, family: str = "ito") -> float:
        """Largest ``|ρ|`` between words with different numbers of non-time letters."""
        chaos = np.array([sum(1 for a in w if a) for w in self.words])
        mask = chaos[:, None] != chaos[None, :]
        c = np.abs(self.corr[family])
        return float(c[mask].max()) if mask.any() else 0.0

    def summary(self) -> dict[str, float]:
        out = {f"max_offdiag_{f}": self.max_offdiag(f) for f in self.corr}
        out["inter_chaos_max_ito"] = self.inter_chaos_max("ito")
        out["gram_max_z"] = float(self.gram_z.max()) if self.gram_z.size else 0.0
        z = self.rho_z.copy()
        np.fill_diagonal(z, 0.0)
        out["orthogonal_rho_max_z"] = float(z.max()) if z.size else 0.0
        return out

    def to_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            for line in header.splitlines():
                buf.write(f"# {line}\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["family", "row", "col", "rho"])
        labels = [word_str(w) for w in self.words]
        for fam, mat in self.corr.items():
            for i, a in enumerate(labels):
                for j, b in enumerate(labels):
                    wr.writerow([fam, a, b, repr(float(mat[i, j]))])
        return buf.getvalue()


def orthogonality_check(ito: FeatureMatrix, strat: FeatureMatrix, basis: OrthoBasis) -> OrthogonalityCheck:
    """Correlations of Stratonovich, Itô and orthogonalised coordinates over ``basis.keys()``."""
    words = tuple(w for w in basis.keys() if w)
    orth_all = orthogonal_features(ito, basis)
    keep = [j for j, e in enumerate(basis) if e.key]
    orth = orth_all[:, keep]
    corr = {
        "stratonovich": np.corrcoef(strat.select(words).values, rowvar=False),
        "ito": np.corrcoef(ito.select(words).values, rowvar=False),
        "orthogonal": np.corrcoef(orth, rowvar=False),
    }
    M = orth.shape[0]
    exact = np.diag([float(basis[w].sq_norm) for w in words])
    prods = orth[:, :, None] * orth[:, None, :]
    mean = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / np.sqrt(M)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, np.abs(mean - exact) / se, 0.0)
        std = (orth - orth.mean(axis=0)) / orth.std(axis=0)
        rho_se = np.sqrt((std**2).T @ (std**2) / M / M)
        rho_z = np.where(rho_se > 0, np.abs(corr["orthogonal"]) / rho_se, 0.0)
    return OrthogonalityCheck(words, corr, z, rho_z, M)
