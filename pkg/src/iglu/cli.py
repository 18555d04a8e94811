"""Command line entry point: ``iglu {verify,eval,data,train,bench}``.

Exit status is 0 only when the command (and any verification it runs)
succeeded.  Relative output paths are resolved against ``$IGLU_OUTPUT_DIR``
when that variable is set.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from iglu import activations as act
from iglu import verify as verify_mod
from iglu.activations import ActivationSpec

OUTPUT_DIR_ENV = "IGLU_OUTPUT_DIR"


def _out_path(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _emit(text: str, path: str | None) -> None:
    p = _out_path(path)
    if p is None:
        sys.stdout.write(text)
    else:
        p.write_text(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def parse_activation(text: str, sigma: float = 1.0, a: float = 1.0,
                     learnable: bool = False) -> ActivationSpec:
    """``name[:param][:learnable]``, e.g. ``iglu:0.5`` or ``gelu_a:1.702``."""
    parts = text.split(":")
    name = parts[0]
    if len(parts) > 1 and parts[1]:
        sigma = a = float(parts[1])
    if len(parts) > 2:
        if parts[2] != "learnable":
            raise ValueError(f"bad activation suffix in {text!r}")
        learnable = True
    return ActivationSpec.from_name(name, sigma=sigma, a=a, learnable=learnable)


def _activation_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--activation", default="iglu",
                   help="activation kind, optionally name:param[:learnable] (default: %(default)s)")
    p.add_argument("--sigma", type=float, default=1.0, help="IGLU sharpness sigma (default: %(default)s)")
    p.add_argument("--a", type=float, default=1.0, help="gelu_a gate scale (default: %(default)s)")
    p.add_argument("--learnable", action="store_true", help="make sigma learnable (default: off)")


def _spec_from(args) -> ActivationSpec:
    return parse_activation(args.activation, args.sigma, args.a, args.learnable)


# ---- verify -------------------------------------------------------------------

def cmd_verify(args) -> int:
    report = verify_mod.run(args.target, args.tol)
    _emit(_json(report.to_dict()), args.out)
    for name in report.failed:
        print(f"FAILED: {name}", file=sys.stderr)
    return 0 if report.passed else 1


# ---- eval ---------------------------------------------------------------------

def cmd_eval(args) -> int:
    spec = _spec_from(args)
    if not args.lo < args.hi or args.steps < 2:
        raise ValueError("eval: need lo < hi and steps >= 2")
    x = np.linspace(args.lo, args.hi, args.steps)
    f = act.forward(spec, x, np.float64)
    df = act.backward_x(spec, x, np.float64)
    g = np.asarray(act.gate(spec, x), dtype=np.float64)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "f", "df", "gate"])
    for row in zip(x, f, df, g):
        w.writerow([repr(float(v)) for v in row])
    _emit(buf.getvalue(), args.out)
    return 0


# ---- data ---------------------------------------------------------------------

def _longtail_args(p: argparse.ArgumentParser, classes=10, nmax=200, ratio=10.0, dim=16,
                   separation=3.0, test_per_class=50) -> None:
    p.add_argument("--classes", type=int, default=classes, help="number of classes K (default: %(default)s)")
    p.add_argument("--nmax", type=int, default=nmax, help="samples in the largest class (default: %(default)s)")
    p.add_argument("--ratio", type=float, default=ratio, help="imbalance ratio n_max/n_min (default: %(default)s)")
    p.add_argument("--dim", type=int, default=dim, help="feature dimension (default: %(default)s)")
    p.add_argument("--separation", type=float, default=separation,
                   help="minimum distance between class means (default: %(default)s)")
    p.add_argument("--test-per-class", type=int, default=test_per_class,
                   help="balanced test samples per class (default: %(default)s)")
    p.add_argument("--data-seed", type=int, default=0, help="dataset seed (default: %(default)s)")


def _longtail_cfg(args):
    from iglu.longtail import LongTailConfig
    return LongTailConfig(num_classes=args.classes, n_max=args.nmax, imbalance_ratio=args.ratio,
                          feature_dim=args.dim, seed=args.data_seed,
                          class_separation=args.separation, test_per_class=args.test_per_class)


def cmd_data(args) -> int:
    from iglu.longtail import class_counts, generate, write_csv
    cfg = _longtail_cfg(args)
    train, test = generate(cfg)
    out = _out_path(os.path.join(args.out, "train.csv"))
    write_csv(train, out)
    write_csv(test, out.parent / "test.csv")
    print(_json({"schema": "iglu-data/1", "counts": class_counts(cfg), "dir": str(out.parent)}), end="")
    return 0


# ---- train --------------------------------------------------------------------

def _train_cfg(args, loss=None):
    from iglu.trainer import TrainConfig
    return TrainConfig(epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr,
                       weight_decay=args.weight_decay, optimizer=args.optimizer,
                       lr_schedule=args.schedule, loss=loss or args.loss, seed=args.seed)


def _hidden(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v)


def cmd_train(args) -> int:
    from iglu import trainer
    from iglu.longtail import generate, read_csv
    if args.smoke:
        args.epochs, args.classes, args.nmax, args.dim, args.lr = 10, 3, 60, 4, 1e-2
        args.hidden = "8"
    if args.mode == "suite":
        ratios = [float(r) for r in args.ratios.split(",")]
        specs = [parse_activation(t, args.sigma, args.a) for t in args.activations.split(",")]
        base = trainer.SuiteBase(data=_longtail_cfg(args), hidden=_hidden(args.hidden),
                                 train=_train_cfg(args, loss="weighted_ce"), model_seed=args.seed)
        result = trainer.run_imbalance_suite(ratios, specs, base)
        _emit(result.to_csv(), args.out)
        print(_json(result.observations()), end="", file=sys.stderr)
        return 0
    if args.train_csv:
        train = read_csv(args.train_csv)
        test = read_csv(args.test_csv) if args.test_csv else train
        data = (train, test)
    else:
        data = generate(_longtail_cfg(args))
    k = data[0].num_classes
    mlp = trainer.MLPConfig(layer_sizes=(data[0].feature_dim, *_hidden(args.hidden), k),
                            activation=_spec_from(args), sigma_sharing=args.sigma_sharing,
                            init_scheme=args.init, seed=args.seed)
    try:
        report = trainer.train(mlp, data, _train_cfg(args))
    except trainer.TrainingDivergedError as exc:
        print(f"training diverged at epoch {exc.epoch}", file=sys.stderr)
        return 1
    _emit(_json(report.to_dict()), args.out)
    return 0


# ---- bench --------------------------------------------------------------------

def cmd_bench(args) -> int:
    from iglu.bench import BenchProtocol, run_bench
    if args.smoke:
        args.dim, args.iters, args.warmup = 1000, 50, 5
    zoo = [parse_activation(t, args.sigma) for t in args.zoo.split(",")]
    proto = BenchProtocol(input_dim=args.dim, iterations=args.iters,
                          warmup_iterations=args.warmup, seed=args.seed, precision=args.precision)
    report = run_bench(zoo, proto)
    _emit(report.to_markdown(), args.out)
    if args.out:
        _out_path(args.out).with_suffix(".json").write_text(report.to_json() + "\n")
    bad = [r.name for r in report.rows
           if r.name != "identity" and (r.forward_ratio_vs_identity < 1 or r.backward_ratio_vs_identity < 1)]
    if bad:
        print(f"faster than identity (timing noise?): {', '.join(bad)}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iglu", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run derivation, gradient, approximation and limit checks",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("target", choices=verify_mod.TARGETS + ("all",), help="which suite to run")
    p.add_argument("--tol", type=float, default=None,
                   help="override tolerance (mixture: abs dev, default 1e-8; grads: rel err, default 1e-6)")
    p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("eval", help="tabulate x, f(x), f'(x), gate(x) as CSV")
    _activation_arg(p)
    p.add_argument("--lo", type=float, default=-5.0, help="grid start (default: %(default)s)")
    p.add_argument("--hi", type=float, default=5.0, help="grid end, inclusive (default: %(default)s)")
    p.add_argument("--steps", type=int, default=101, help="number of grid points (default: %(default)s)")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("data", help="synthetic long-tailed datasets")
    dsub = p.add_subparsers(dest="data_command", required=True)
    g = dsub.add_parser("gen", help="write train.csv and test.csv")
    _longtail_args(g)
    g.add_argument("--seed", dest="data_seed", type=int, default=0, help="alias of --data-seed")
    g.add_argument("--out", default="data", help="output directory (default: %(default)s)")
    g.set_defaults(func=cmd_data)

    p = sub.add_parser("train", help="train the MLP (run) or the imbalance grid (suite)")
    p.add_argument("mode", nargs="?", choices=("run", "suite"), default="run",
                   help="single run emitting JSON, or suite emitting a CSV grid (default: %(default)s)")
    _activation_arg(p)
    _longtail_args(p)
    p.add_argument("--hidden", default="64", help="comma-separated hidden widths (default: %(default)s)")
    p.add_argument("--sigma-sharing", choices=("per_layer", "global"), default="per_layer",
                   help="one learnable sigma per layer or one overall (default: %(default)s)")
    p.add_argument("--init", choices=("fan_in_scaled", "constant_negative_bias"), default="fan_in_scaled",
                   help="weight initialization (default: %(default)s)")
    p.add_argument("--epochs", type=int, default=30, help="(default: %(default)s)")
    p.add_argument("--batch-size", type=int, default=64, help="(default: %(default)s)")
    p.add_argument("--lr", type=float, default=3e-3, help="learning rate (default: %(default)s)")
    p.add_argument("--weight-decay", type=float, default=1e-4, help="(default: %(default)s)")
    p.add_argument("--optimizer", choices=("sgd", "adamw"), default="adamw", help="(default: %(default)s)")
    p.add_argument("--schedule", choices=("constant", "cosine"), default="cosine", help="(default: %(default)s)")
    p.add_argument("--loss", choices=("ce", "weighted_ce"), default="weighted_ce", help="(default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="model and shuffling seed (default: %(default)s)")
    p.add_argument("--train-csv", default=None, help="load training data instead of generating (default: off)")
    p.add_argument("--test-csv", default=None, help="test data to pair with --train-csv (default: off)")
    p.add_argument("--ratios", default="10,100", help="suite: imbalance ratios (default: %(default)s)")
    p.add_argument("--activations", default="iglu:0.5,iglu_approx:0.5,relu,gelu_tanh",
                   help="suite: comma-separated activations (default: %(default)s)")
    p.add_argument("--smoke", action="store_true", help="tiny configuration for a quick check (default: off)")
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="identity-normalized forward/backward timings")
    p.add_argument("--dim", type=int, default=10_000, help="input dimension (default: %(default)s)")
    p.add_argument("--iters", type=int, default=1_000, help="timed iterations (default: %(default)s)")
    p.add_argument("--warmup", type=int, default=20, help="untimed warmup calls (default: %(default)s)")
    p.add_argument("--zoo", default="identity,relu,iglu,iglu_approx,gelu_tanh",
                   help="comma-separated activations, identity required (default: %(default)s)")
    p.add_argument("--sigma", type=float, default=1.0, help="sigma for IGLU kinds (default: %(default)s)")
    p.add_argument("--precision", choices=("single", "double"), default="single", help="(default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="input seed (default: %(default)s)")
    p.add_argument("--smoke", action="store_true", help="small, fast protocol (default: off)")
    p.add_argument("--out", default=None, help="markdown path; a .json sidecar is written next to it (default: stdout, no sidecar)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError) as exc:
        parser.error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
