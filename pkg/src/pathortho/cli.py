"""Command-line entry point: ``pathortho <subcommand> [flags]``.

Every output starts with the run configuration (a ``# key=value`` block for
CSV, a ``config`` object for JSON), so a file alone is enough to rerun it.
Exit codes: 0 success, 2 usage error, 1 computational failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .expansion import (
    CONTROLS,
    LinearSDESpec,
    bs_compare,
    call_payoff,
    fit_expansion,
    lookback_payoff,
    metrics,
    ols_fit,
    orthogonality_check,
    rows_to_csv,
    sde_compare,
    TEST_SEED_OFFSET,
)
from .expected import InnerProduct
from .ortho import GRADINGS, DegenerateInnerProduct, OrthoBasis, ito_basis, nondegenerate_words
from .paths import PathSpec, geometric_bm, ito_features, sample_paths, solve_linear_sde, strat_features
from .recurrence import (
    GradedFrame,
    NotQuasiDefinite,
    all_generator_pairs,
    block_orth_polys,
    commutativity_residual,
    rank_audit,
    recurrence_matrices,
)
from .naturality import build_system, rank_certify
from .words import TensorPoly, word_str

LARGE_NATURALITY_DEGREE = 7


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Parsed flags of one invocation, echoed into the output header."""

    values: dict

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> RunConfig:
        # the destination is not part of the computation
        skip = {"func", "out"}
        vals = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
        vals["version"] = __version__
        return cls(vals)

    def header_lines(self) -> list[str]:
        return [f"{k}={_plain(v)}" for k, v in self.values.items()]

    def as_dict(self) -> dict:
        return {k: _plain(v) for k, v in self.values.items()}


def _plain(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


# --- argument types -----------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def _horizon(text: str) -> Fraction:
    try:
        v = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a rational or decimal horizon, got {text!r}")
    if v <= 0:
        raise argparse.ArgumentTypeError("horizon must be positive")
    return v


def _nonneg_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text!r}")
    return v


def _degree_list(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("degrees must be positive")
    return sorted(set(out))


# --- output -------------------------------------------------------------------


def _emit(args: argparse.Namespace, config: RunConfig, payload: dict, csv_body: Callable[[str], str]) -> None:
    if args.format == "json":
        text = json.dumps({"config": config.as_dict(), **payload}, indent=1, ensure_ascii=False) + "\n"
    else:
        text = csv_body("\n".join(config.header_lines()))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _with_header(header: str, body: str) -> str:
    return "".join(f"# {line}\n" for line in header.splitlines()) + body


def _fs(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def format_poly(p: TensorPoly) -> str:
    """Highest words first, e.g. ``001 − 1/2·01 + 1/12·1``."""
    parts: list[str] = []
    for w, c in sorted(p.items(), key=lambda kv: (len(kv[0]), kv[0]), reverse=True):
        label = word_str(w) or "∅"
        mag = abs(c)
        term = label if mag == 1 else f"{_fs(mag)}·{label}"
        if not parts:
            parts.append(term if c > 0 else f"−{term}")
        else:
            parts.append(("+ " if c > 0 else "− ") + term)
    return " ".join(parts) if parts else "0"


def basis_rows(basis: OrthoBasis) -> list[str]:
    return [f"{word_str(e.key) or '∅'} → {format_poly(e.poly)}" for e in basis]


# --- commands -----------------------------------------------------------------


def _sample(args: argparse.Namespace, seed_offset: int = 0):
    spec = PathSpec(args.d, args.steps, args.paths, args.seed + seed_offset, float(args.horizon), args.augment_time)
    return sample_paths(spec)


def cmd_basis(args: argparse.Namespace, config: RunConfig) -> None:
    basis = ito_basis(args.d, args.max_degree, args.horizon, args.grading)
    rows = basis_rows(basis)
    payload = {
        "basis_id": basis.basis_id(),
        "rows": rows,
        "entries": [e.to_dict() for e in basis],
        "gram_diagonal": {word_str(e.key): _fs(e.sq_norm) for e in basis},
    }

    def body(header: str) -> str:
        lines = ["word,polynomial,sq_norm"]
        lines += [f'{word_str(e.key)},"{r}",{_fs(e.sq_norm)}' for e, r in zip(basis, rows)]
        return _with_header(header, "\n".join(lines) + "\n")

    _emit(args, config, payload, body)


def cmd_orthcheck(args: argparse.Namespace, config: RunConfig) -> None:
    if not args.augment_time:
        raise UsageError("orthcheck needs time-augmented paths")
    batch = _sample(args)
    N = args.max_degree
    strat = strat_features(batch, N, threads=args.threads)
    ito = ito_features(batch, N, threads=args.threads)
    basis = ito_basis(args.d, N, args.horizon)
    check = orthogonality_check(ito, strat, basis)
    payload = {
        "words": [word_str(w) for w in check.words],
        "summary": check.summary(),
        "correlations": {k: np.round(v, 12).tolist() for k, v in check.corr.items()},
    }
    _emit(args, config, payload, lambda h: check.to_csv(h))


def _target(args: argparse.Namespace, batch) -> np.ndarray:
    name = args.target
    if name in ("call", "lookback"):
        if args.d != 1:
            raise UsageError(f"target {name!r} needs --d 1")
        prices = geometric_bm(batch, args.s0, args.sigma, args.mu)
        return call_payoff(prices, args.strike) if name == "call" else lookback_payoff(prices)
    if name == "hermite3":
        b = batch.terminal()[:, 0]
        T = float(args.horizon)
        return b**3 - 3 * T * b
    if name == "sde":
        sde = LinearSDESpec.random(args.d, 2, np.random.default_rng(args.seed))
        return solve_linear_sde(sde.A, sde.y0, batch)[:, 0]
    raise UsageError(f"unknown target {name!r}")


def _train_test(args: argparse.Namespace):
    if not args.augment_time:
        raise UsageError(f"{args.command} needs time-augmented paths")
    train, test = _sample(args), _sample(args, TEST_SEED_OFFSET)
    N = args.max_degree
    F_train = ito_features(train, N, threads=args.threads)
    F_test = ito_features(test, N, threads=args.threads)
    return F_train, F_test, _target(args, train), _target(args, test)


def _metric_payload(train: dict, test: dict) -> dict:
    return {"in_sample": train, "out_of_sample": test}


def cmd_expand(args: argparse.Namespace, config: RunConfig) -> None:
    F_train, F_test, y_train, y_test = _train_test(args)
    basis = ito_basis(args.d, args.max_degree, args.horizon)
    model = fit_expansion(y_train, F_train, basis, control=args.control)
    payload = {
        "model": json.loads(model.to_json()),
        "stderr": {word_str(w): s for w, s in model.stderr.items()},
        "metrics": _metric_payload(metrics(model.predict(F_train), y_train), metrics(model.predict(F_test), y_test)),
    }

    def body(header: str) -> str:
        lines = [f"# basis_id={model.basis_id}", "word,coefficient,stderr"]
        lines += [f"{word_str(w)},{model.coefficients[w]!r},{model.stderr.get(w, float('nan'))!r}" for w in basis.keys()]
        return _with_header(header, "\n".join(lines) + "\n")

    _emit(args, config, payload, body)


def cmd_regress(args: argparse.Namespace, config: RunConfig) -> None:
    F_train, F_test, y_train, y_test = _train_test(args)
    cols = nondegenerate_words(args.d, args.max_degree)
    reg = ols_fit(y_train, F_train, ridge=args.ridge, columns=cols)
    payload = {
        "columns": [word_str(w) for w in reg.columns],
        "beta": reg.beta.tolist(),
        "ridge": reg.ridge,
        "rank": reg.rank,
        "condition": reg.condition,
        "ridge_fallback": reg.fallback,
        "metrics": _metric_payload(metrics(reg.predict(F_train), y_train), metrics(reg.predict(F_test), y_test)),
    }

    def body(header: str) -> str:
        lines = [f"# rank={reg.rank} ridge={reg.ridge!r} fallback={reg.fallback}", "word,beta"]
        lines += [f"{word_str(w)},{float(b)!r}" for w, b in zip(reg.columns, reg.beta)]
        return _with_header(header, "\n".join(lines) + "\n")

    _emit(args, config, payload, body)


def _rows_payload(rows) -> dict:
    return {"rows": [r.__dict__ for r in rows]}


def cmd_sde_compare(args: argparse.Namespace, config: RunConfig) -> None:
    rows = sde_compare(
        d=args.d,
        n_state=args.n_state,
        degrees=args.degrees,
        paths=args.paths,
        steps=args.steps,
        seeds=range(args.seed, args.seed + args.repeats),
        T=float(args.horizon),
        control=args.control,
        threads=args.threads,
    )
    _emit(args, config, _rows_payload(rows), lambda h: rows_to_csv(rows, h))


def cmd_bs(args: argparse.Namespace, config: RunConfig) -> None:
    rows = bs_compare(
        degrees=args.degrees,
        paths=args.paths,
        steps=args.steps,
        seed=args.seed,
        T=float(args.horizon),
        S0=args.s0,
        sigma=args.sigma,
        mu=args.mu,
        K=args.strike,
        ridge=args.ridge,
        control=args.control,
        threads=args.threads,
    )
    _emit(args, config, _rows_payload(rows), lambda h: rows_to_csv(rows, h))


def cmd_naturality(args: argparse.Namespace, config: RunConfig) -> None:
    if args.degree >= LARGE_NATURALITY_DEGREE and not args.allow_large:
        raise UsageError(f"degree {args.degree} is a long run; pass --allow-large to confirm")
    system = build_system(args.degree, noncrossing=args.noncrossing)
    cert = rank_certify(system)
    report = cert.to_dict(system)

    def body(header: str) -> str:
        lines = ["key,value"]
        for k in ("degree", "noncrossing", "vars", "equations", "rank_A", "rank_aug", "consistent"):
            lines.append(f"{k},{report[k]}")
        for k, v in report.get("solution", {}).items():
            lines.append(f"solution{k},{v}")
        for c in report.get("certificate", []):
            lines.append(f'certificate[{c["row"]}],"{c["y"]} × ({c["equation"]})"')
        return _with_header(header, "\n".join(lines) + "\n")

    _emit(args, config, report, body)


def cmd_recurrence(args: argparse.Namespace, config: RunConfig) -> None:
    frame = GradedFrame.build(args.d, args.degree)
    inner = InnerProduct(args.inner, args.horizon)
    rset = recurrence_matrices(frame, block_orth_polys(frame, inner))
    report = rank_audit(rset)
    payload = json.loads(report.to_json())
    pairs = all_generator_pairs(frame)
    if pairs:
        payload["commutativity_residual"] = commutativity_residual(rset, pairs, args.degree)

    def body(header: str) -> str:
        lines = ["check,n,m,i,ok,detail"]
        for c in report.checks:
            lines.append(f'{c.name},{c.n},{"" if c.m is None else c.m},{"" if c.i is None else c.i},{c.ok},"{c.detail}"')
        return _with_header(header, "\n".join(lines) + "\n")

    _emit(args, config, payload, body)


# --- parser -------------------------------------------------------------------


def _io(format_default: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--format", choices=("csv", "json"), default=format_default)
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    return p


def _alphabet() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--d", type=_positive_int, default=1, help="number of Brownian letters")
    p.add_argument("--horizon", type=_horizon, default=Fraction(1), help="time horizon T (e.g. 1, 0.5, 1/2)")
    return p


def _truncation(default: int) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--max-degree", type=_nonneg_int, default=default, help="truncation degree")
    return p


def _threads() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--threads", type=_positive_int, default=1, help="worker cap for signature computation")
    return p


def _sampling() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--steps", type=_positive_int, default=100)
    p.add_argument("--paths", type=_positive_int, default=10_000)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--augment-time", action=argparse.BooleanOptionalAction, default=True)
    return p


def _market() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--s0", type=float, default=1.0)
    p.add_argument("--sigma", type=_nonneg_float, default=0.2)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--strike", type=float, default=1.0)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathortho", description="Orthogonal polynomials on Brownian path space.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    def mc() -> list[argparse.ArgumentParser]:
        # fresh parents: set_defaults on a subparser mutates the shared actions
        return [_alphabet(), _sampling(), _threads()]

    p = sub.add_parser("basis", parents=[_io("json"), _alphabet(), _truncation(3)], help="exact Itô orthogonal basis")
    p.add_argument("--grading", choices=GRADINGS, default="tensor", help="how --max-degree bounds the words")
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("orthcheck", parents=[_io("csv"), *mc(), _truncation(4)], help="empirical feature correlations")
    p.set_defaults(func=cmd_orthcheck, d=2)

    targets = ("hermite3", "call", "lookback", "sde")
    for name, func, helptext in (
        ("expand", cmd_expand, "orthogonal series fit"),
        ("regress", cmd_regress, "least-squares fit"),
    ):
        p = sub.add_parser(name, parents=[_io("json"), *mc(), _truncation(3), _market()], help=helptext)
        p.add_argument("--target", choices=targets, default="hermite3")
        if name == "expand":
            p.add_argument("--control", choices=CONTROLS, default="none")
        else:
            p.add_argument("--ridge", type=_nonneg_float, default=0.0)
        p.set_defaults(func=func)

    p = sub.add_parser("sde-compare", parents=[_io("csv"), *mc()], help="Taylor vs orthogonal series")
    p.add_argument("--degrees", type=_degree_list, default=[1, 2, 3, 4, 5])
    p.add_argument("--repeats", type=_positive_int, default=10, help="number of random SDEs (seeds seed..seed+k-1)")
    p.add_argument("--n-state", type=_positive_int, default=2)
    p.add_argument("--control", choices=CONTROLS, default="none")
    p.set_defaults(func=cmd_sde_compare, d=2)

    p = sub.add_parser("bs", parents=[_io("csv"), *mc(), _market()], help="Black-Scholes call and lookback")
    p.add_argument("--degrees", type=_degree_list, default=[1, 2, 3, 4, 5])
    p.add_argument("--ridge", type=_nonneg_float, default=0.0)
    p.add_argument("--control", choices=CONTROLS, default="none")
    p.set_defaults(func=cmd_bs)

    p = sub.add_parser("naturality", parents=[_io("json")], help="pairing ansatz rank certificate")
    p.add_argument("--degree", type=_positive_int, required=True)
    p.add_argument("--noncrossing", action="store_true", help="restrict to noncrossing cap diagrams")
    p.add_argument("--allow-large", action="store_true", help=f"permit degree >= {LARGE_NATURALITY_DEGREE}")
    p.set_defaults(func=cmd_naturality)

    p = sub.add_parser("recurrence", parents=[_io("json"), _alphabet()], help="graded recurrence rank audit")
    p.add_argument("--degree", type=_positive_int, default=3)
    p.add_argument("--inner", choices=("fawcett", "ito"), default="fawcett")
    p.set_defaults(func=cmd_recurrence)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bs" and args.d != 1:
        parser.error("bs is a scalar model; use --d 1")
    if args.command == "naturality" and args.degree < 2:
        parser.error("--degree must be at least 2")
    config = RunConfig.from_args(args)
    try:
        args.func(args, config)
    except UsageError as exc:
        parser.error(str(exc))
    except (ValueError, ArithmeticError, DegenerateInnerProduct, NotQuasiDefinite, KeyError) as exc:
        print(f"pathortho {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
