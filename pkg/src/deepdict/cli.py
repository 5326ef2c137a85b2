"""Command-line interface: ``ddl train|extract|eval|bench|synth``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys

from .bench import format_bench, run_bench
from .data import SyntheticSpec, gen_synthetic, load_dataset, load_model, save_model, write_csv_matrix
from .exceptions import DataError, NumericError, ShapeError
from .knn import evaluate
from .trainers import TrainConfig, train_greedy, train_mm

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

DATASET_HELP = (
    "dataset: idx:IMAGES,LABELS | csv:PATH | synth:SPEC, with optional "
    "?norm=scale|none|l2&label=COL&limit=N&per_class=N&block=B&seed=S"
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _layers(text: str) -> tuple[int, ...]:
    try:
        layers = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad layer list {text!r}") from None
    if not layers or min(layers) < 1:
        raise argparse.ArgumentTypeError("layers must be positive integers")
    return layers


def _add_train_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--layers", type=_layers, default=(200, 100, 50), help="atoms per level, e.g. 200,100,50")
    p.add_argument("--activation", choices=["identity", "tanh", "sigmoid"], default="tanh")
    p.add_argument("--outer", type=int, default=100, help="outer MM iterations")
    p.add_argument("--deepest", type=int, default=10, help="ALS passes on the deepest level")
    p.add_argument("--middle", type=int, default=1, help="updates per intermediate level")
    p.add_argument("--mod-iters", type=int, default=10, help="ALS passes per level (greedy)")
    p.add_argument("--tol", type=float, default=1e-6, help="relative objective change for early stop")
    p.add_argument("--rcond", type=float, default=1e-2, help="singular-value cutoff of least squares")


def _config(args) -> TrainConfig:
    return TrainConfig(
        layer_atoms=args.layers,
        activation=args.activation,
        outer_iters=args.outer,
        deepest_iters=args.deepest,
        middle_iters=args.middle,
        mod_iters=args.mod_iters,
        stop_rel_tol=args.tol,
        rcond=args.rcond,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ddl", description="Deep dictionary learning: greedy MOD and joint MM training.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model", epilog=DATASET_HELP)
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=["mm", "greedy"], default="mm")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--trace", help="CSV with outer_iter,objective,seconds")
    _add_train_options(p)

    p = sub.add_parser("extract", help="write deepest-level features as CSV", epilog=DATASET_HELP)
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="nearest-neighbor accuracy on deep features", epilog=DATASET_HELP)
    p.add_argument("--model", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--k", type=int, default=1)

    p = sub.add_parser("bench", help="compare greedy and MM training", epilog=DATASET_HELP)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--repeats", type=int, default=5, help="extraction timing repeats (best is reported)")
    _add_train_options(p)

    p = sub.add_parser("synth", help="generate data from a random ground-truth model")
    p.add_argument("--spec", required=True, help='JSON or key=value list, e.g. "input_dim=50 layer_atoms=25,12 n_samples=500"')
    p.add_argument("--out", required=True, help="CSV for X (rows are samples)")
    p.add_argument("--truth", required=True, help="model file for the ground truth")
    p.add_argument("--z", help="optional CSV for the true coefficients")
    return parser


def _train(args) -> None:
    data = load_dataset(args.input)
    trainer = train_mm if args.method == "mm" else train_greedy
    result = trainer(data.features, _config(args))
    save_model(result.model, args.out)
    if args.trace:
        with open(args.trace, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["outer_iter", "objective", "seconds"])
            for i, (j, s) in enumerate(zip(result.trace.objective_per_outer, result.trace.seconds_per_outer), 1):
                w.writerow([i, format(j, ".17g"), format(s, ".6f")])
    t = result.trace
    print(f"{args.method}: {t.iters_run} iterations, objective {t.objective_per_outer[-1]:.6g} "
          f"(init {t.objective_init:.6g}), {t.wall_seconds:.3f} s")


def _extract(args) -> None:
    model = load_model(args.model)
    data = load_dataset(args.input)
    feats = model.freeze().transform(data.features)
    write_csv_matrix(args.out, feats, data.labels)
    print(f"wrote {feats.shape[1]} samples x {feats.shape[0]} features to {args.out}")


def _eval(args) -> None:
    model = load_model(args.model)
    report = evaluate(model, load_dataset(args.train), load_dataset(args.test), args.k)
    print(report.format())


def _bench(args) -> None:
    train, test = load_dataset(args.train), load_dataset(args.test)
    if train.labels is None or test.labels is None:
        raise DataError("bench needs labelled train and test sets")
    rows = run_bench(train, test, _config(args), k=args.k, repeats=args.repeats)
    print(format_bench(rows))


def _synth(args) -> None:
    spec = SyntheticSpec.from_text(args.spec)
    x, truth, z = gen_synthetic(spec)
    write_csv_matrix(args.out, x)
    save_model(truth, args.truth)
    if args.z:
        write_csv_matrix(args.z, z, prefix="z")
    print(f"wrote {x.shape[1]} samples of dimension {x.shape[0]} to {args.out}")


COMMANDS = {"train": _train, "extract": _extract, "eval": _eval, "bench": _bench, "synth": _synth}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except NumericError as exc:
        print(f"ddl: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ShapeError, OSError) as exc:
        print(f"ddl: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"ddl: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
