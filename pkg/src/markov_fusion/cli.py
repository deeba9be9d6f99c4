"""``markov-fusion`` command line.

Exit status: 0 success, 1 usage error, 2 numerical failure, 3 I/O error.
Every failure prints one ``CODE: message`` line on standard error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .chain import Mode, count_transitions, extract_equality_classes, sequence_from_counts, simulate_sequence
from .datasets import EQUALITY_DEMO_TRUTH, SIMULATION_TRUTH
from .errors import FileFormatError, MarkovFusionError, ValidationError
from .estimators import bootstrap_mle, lrt, mle
from .experiments import DESK_GRID, FULL_GRID, StudyConfig, difference_histogram, run_study, write_study
from .io import (
    AlphabetMap,
    ACGT,
    counts_csv,
    load_alphabet,
    matrix_csv,
    parse_null,
    read_counts,
    read_matrix,
    read_sequence,
    write_sequence,
)
from .metrics import exact_partition, frobenius_distance, purity, selection_accuracy
from .penalized import fit as penalized_fit, pair_set, refit
from .selection import log_grid, select_lambda

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3
METHOD_ALIASES = {"lasso": "mclasso", "mclasso": "mclasso", "alasso": "mcalasso", "mcalasso": "mcalasso"}
BUILTIN_TRUTHS = {"simulation": SIMULATION_TRUTH, "equality-demo": EQUALITY_DEMO_TRUTH}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(text: str, out: str | None = None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _matrix_text(P, fmt: str, out: str | None) -> str:
    if fmt == "json":
        return _dumps({"m": P.m, "rows": P.entries.tolist()})
    # stdout gets 6 decimals for reading; files keep full precision
    return matrix_csv(P, None if out else 6)


def _parse_grid(text: str | None, default):
    if text is None:
        return list(default)
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            return log_grid(float(lo), float(hi), int(n))
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot read grid {text!r}; use lo:hi:n or a comma list") from None


def _load_counts(args):
    alphabet = load_alphabet(getattr(args, "alphabet", None))
    if getattr(args, "counts", None):
        return read_counts(args.counts), None, alphabet
    if getattr(args, "sequence", None):
        seq = read_sequence(args.sequence, alphabet, getattr(args, "states", None))
        return count_transitions(seq), seq, alphabet
    raise UsageError("give --counts or --sequence")


def _load_truth(name: str):
    if name in BUILTIN_TRUTHS:
        return BUILTIN_TRUTHS[name]
    return read_matrix(name, Mode.STRICT_ERGODIC)


def _add_input(p, counts=True):
    src = p.add_mutually_exclusive_group(required=True)
    if counts:
        src.add_argument("--counts", help="CSV of m integer rows")
    src.add_argument("--sequence", help="one state or symbol per line")
    p.add_argument("--alphabet", help="ACGT or file:<path>")
    p.add_argument("--states", type=int, help="number of states for integer sequences (default: max token)")


def _add_format(p, default="json"):
    p.add_argument("--format", choices=("json", "csv"), default=default)
    p.add_argument("--out", help="write to this file instead of standard output")


def cmd_simulate(args) -> int:
    P = read_matrix(args.matrix, Mode.STOCHASTIC) if args.matrix not in BUILTIN_TRUTHS else BUILTIN_TRUTHS[args.matrix]
    initial = args.initial
    if initial not in ("stationary", "uniform"):
        if not initial.isdigit():
            raise UsageError("--initial must be stationary, uniform or a state number")
        initial = int(initial)
    seq = simulate_sequence(P, args.N, args.seed, initial)
    alphabet = load_alphabet(args.alphabet)
    if alphabet is not None and alphabet.m != P.m:
        raise ValidationError(f"alphabet has {alphabet.m} symbols for a {P.m}-state chain")
    if args.format == "json":
        _emit(_dumps({"m": seq.m, "seed": args.seed, "states": seq.tolist()}), args.out)
    else:
        _emit(write_sequence(seq, alphabet), args.out)
    return EXIT_OK


def cmd_counts(args) -> int:
    counts, _, _ = _load_counts(args)
    if args.format == "json":
        _emit(_dumps({"m": counts.m, "counts": counts.counts.tolist()}), args.out)
    else:
        _emit(counts_csv(counts), args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    counts, _, _ = _load_counts(args)
    if args.method == "mle":
        P = mle(counts, args.zero_rows)
    else:
        if args.q is None or args.alpha is None:
            raise UsageError("--method bootstrap needs --q and --alpha")
        Q = read_matrix(args.q, Mode.STRICT_ERGODIC)
        P = bootstrap_mle(counts, Q, args.alpha)
    _emit(_matrix_text(P, args.format, args.out), args.out)
    return EXIT_OK


def _null_alphabet(alphabet: AlphabetMap | None, m: int) -> AlphabetMap | None:
    if alphabet is None and m == ACGT.m:
        return ACGT
    return alphabet


def cmd_lrt(args) -> int:
    counts, _, alphabet = _load_counts(args)
    null = parse_null(args.null, counts.m, _null_alphabet(alphabet, counts.m))
    res = lrt(counts, null, args.level)
    if args.format == "json":
        _emit(_dumps(res.to_dict()), args.out)
    else:
        rows = ["gamma,df,critical,level,reject,p_value\n",
                f"{res.gamma!r},{res.df},{res.critical!r},{res.level!r},{str(res.reject).lower()},{res.p_value!r}\n"]
        _emit("".join(rows), args.out)
    return EXIT_OK


def cmd_fit(args) -> int:
    counts, seq, _ = _load_counts(args)
    method = METHOD_ALIASES[args.method]
    report = None
    if args.cv:
        if seq is None:
            seq = sequence_from_counts(counts, args.seed)
        report = select_lambda(seq, _parse_grid(args.grid, DESK_GRID), args.k, method, args.gamma)
        lam = report.best_lambda
    elif args.lam is not None:
        lam = args.lam
    else:
        raise UsageError("give --lambda or --cv")
    res = penalized_fit(counts, lam, method, args.gamma)
    if args.format == "json":
        out = res.to_dict()
        if report is not None:
            out["cv"] = report.to_dict()
        if args.refit:
            out["refit"] = refit(res, counts).entries.tolist()
        _emit(_dumps(out), args.out)
    else:
        P = refit(res, counts) if args.refit else res.estimate
        _emit(_matrix_text(P, "csv", args.out), args.out)
    return EXIT_OK


def cmd_cv(args) -> int:
    counts, seq, _ = _load_counts(args)
    if seq is None:
        seq = sequence_from_counts(counts, args.seed)
    report = select_lambda(seq, _parse_grid(args.grid, DESK_GRID), args.k, METHOD_ALIASES[args.method], args.gamma)
    _emit(_dumps(report.to_dict()) if args.format == "json" else report.to_csv(), args.out)
    return EXIT_OK


def cmd_metrics(args) -> int:
    truth = read_matrix(args.truth, Mode.STOCHASTIC)
    est = read_matrix(args.estimate, Mode.STOCHASTIC)
    pairs = pair_set(truth.m)
    part = exact_partition(est) if args.tie_tol == 0 else extract_equality_classes(est, args.tie_tol)
    out = {
        "purity": purity(exact_partition(truth), part),
        "frobenius": frobenius_distance(truth, est),
        "selection_accuracy": selection_accuracy(truth, part, pairs),
    }
    if args.format == "json":
        _emit(_dumps(out), args.out)
    else:
        _emit("purity,frobenius,selection_accuracy\n"
              f"{out['purity']!r},{out['frobenius']!r},{out['selection_accuracy']!r}\n", args.out)
    return EXIT_OK


def _parse_cell(text: str) -> tuple[int, int]:
    try:
        i, j = text.split(",")
        return int(i), int(j)
    except ValueError:
        raise UsageError(f"cannot read cell {text!r}; use i,j") from None


def cmd_study(args) -> int:
    truth = _load_truth(args.truth)
    full = args.preset == "full"
    config = StudyConfig(
        truth,
        n_reps=args.n_reps if args.n_reps is not None else (100 if full else 20),
        N=args.N if args.N is not None else (50_000 if full else 20_000),
        seed_base=args.seed,
        grid=tuple(_parse_grid(args.grid, FULL_GRID if full else DESK_GRID)),
        k=args.k,
        methods=tuple(args.methods.split(",")),
        gamma=args.gamma,
        fixed_lambda=args.fixed_lambda,
    )
    summary = run_study(config)
    hist = None
    if args.hist:
        a, b = (_parse_cell(c) for c in args.hist)
        hist = difference_histogram(truth, a, b, args.hist_N or config.N, args.hist_reps or config.n_reps, args.seed)
    if args.outdir:
        write_study(summary, args.outdir, hist)
    if args.format == "json":
        sys.stdout.write(_dumps(summary.to_dict()))
    else:
        sys.stdout.write(summary.summary_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="markov-fusion", description="Markov transition-matrix estimation with equality fusion.")
    parser.add_argument("--version", action="version", version=f"markov-fusion {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="draw a sequence from a transition matrix")
    p.add_argument("--matrix", required=True, help="matrix file, or 'simulation' / 'equality-demo'")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--initial", default="stationary", help="stationary, uniform or a state 1..m")
    p.add_argument("--alphabet")
    _add_format(p, "csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("counts", help="count transitions in a sequence")
    _add_input(p, counts=False)
    _add_format(p, "csv")
    p.set_defaults(func=cmd_counts)

    p = sub.add_parser("estimate", help="MLE or bootstrap-smoothed MLE")
    _add_input(p)
    p.add_argument("--method", choices=("mle", "bootstrap"), default="mle")
    p.add_argument("--q", help="reference matrix for --method bootstrap")
    p.add_argument("--alpha", type=float, help="smoothing strength for --method bootstrap")
    p.add_argument("--zero-rows", choices=("error", "uniform"), default="error")
    _add_format(p, "csv")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("lrt", help="likelihood-ratio test of equal transitions")
    _add_input(p)
    p.add_argument("--null", required=True, help="fused groups, e.g. 'AG=GC' or '1,2=2,3'")
    p.add_argument("--level", type=float, default=0.05)
    _add_format(p)
    p.set_defaults(func=cmd_lrt)

    for name, helptext in (("fit", "McLasso / McALasso fit"), ("cv", "cross-validation curve")):
        p = sub.add_parser(name, help=helptext)
        _add_input(p)
        p.add_argument("--method", choices=sorted(METHOD_ALIASES), default="mcalasso")
        p.add_argument("--gamma", type=float, default=1.0)
        p.add_argument("--grid", help="lo:hi:n for a log grid, or a comma list")
        p.add_argument("--k", type=int, default=5)
        _add_format(p, "json")
        if name == "fit":
            p.add_argument("--lambda", dest="lam", type=float)
            p.add_argument("--cv", action="store_true", help="select lambda by ordered k-fold CV")
            p.add_argument("--refit", action="store_true", help="also report the MLE constrained to the fused classes")
            p.add_argument("--seed", type=int, default=None)
            p.set_defaults(func=_fit_with_seed)
        else:
            p.add_argument("--seed", type=int, required=True)
            p.set_defaults(func=cmd_cv)

    p = sub.add_parser("metrics", help="score an estimate against a truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--estimate", required=True)
    p.add_argument("--tie-tol", type=float, default=0.0, help="fuse estimate cells closer than this (0: exact ties)")
    _add_format(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("study", help="seeded Monte Carlo study")
    p.add_argument("--truth", default="simulation", help="matrix file, or 'simulation' / 'equality-demo'")
    p.add_argument("--preset", choices=("desk", "full"), default="desk")
    p.add_argument("--n-reps", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--seed", type=int, required=True, help="seed of the first replicate")
    p.add_argument("--grid")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--methods", default="mle,mclasso,mcalasso")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--fixed-lambda", type=float, help="skip CV and use this penalty")
    p.add_argument("--hist", nargs=2, metavar="CELL", help="two cells i,j for the MLE difference histogram")
    p.add_argument("--hist-N", type=int)
    p.add_argument("--hist-reps", type=int)
    p.add_argument("--outdir", help="directory for summary.csv, raw.csv and hist.csv")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.set_defaults(func=cmd_study)
    return parser


def _fit_with_seed(args) -> int:
    if args.cv and args.counts and args.seed is None:
        raise UsageError("--cv on a count table needs --seed")
    return cmd_fit(args)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        _fail("E_USAGE", exc)
        return EXIT_USAGE
    except FileFormatError as exc:
        _fail(exc.code, exc)
        return EXIT_IO
    except OSError as exc:
        _fail("E_IO", f"{exc.strerror or exc}: {exc.filename}" if exc.filename else exc)
        return EXIT_IO
    except MarkovFusionError as exc:
        _fail(exc.code, exc)
        return EXIT_USAGE if exc.kind == "usage" else EXIT_NUMERICAL
    except (ValueError, np.linalg.LinAlgError) as exc:
        _fail("E_NUMERICAL", exc)
        return EXIT_NUMERICAL


def _fail(code: str, message) -> None:
    text = " ".join(str(message).split())
    sys.stderr.write(f"{code}: {text}\n")


if __name__ == "__main__":
    sys.exit(main())
