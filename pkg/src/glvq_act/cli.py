"""Command line entry point: ``train``, ``bench`` and ``report`` subcommands.

Exit status is 0 on success, 1 on configuration errors and 2 on data errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .activation import ActivationError, parse_activation
from .bench import DEFAULT_GRID, RatioReport, accuracy, parse_activation_list, run_benchmark
from .core import ConfigurationError, GlvqError, GlvqModel, Projection, model_to_json
from .data import DEFAULT_MANIFEST, DataError, load_manifest, split
from .trainer import TrainConfig, init_prototypes, train

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key=value file with TrainConfig fields")
    p.add_argument("--lr", type=float, help="learning rate")
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--epsilon", type=float, help="convergence threshold on the gradient measure")
    p.add_argument("--window", type=int, help="epochs the measure must stay below epsilon")
    p.add_argument("--measure", choices=["norm_of_mean", "mean_norm"])
    p.add_argument("--jitter", type=float, help="prototype init jitter, in data std units")
    p.add_argument("--prototypes-per-class", type=int)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="glvq-act", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one model and write it as JSON")
    p.add_argument("--manifest", type=Path, default=DEFAULT_MANIFEST)
    p.add_argument("--dataset", required=True)
    p.add_argument("--activation", default="swish:1", help="kind[:beta[:alpha]]")
    p.add_argument("--out", type=Path, help="model JSON path (stdout summary only when omitted)")
    _add_training_flags(p)

    p = sub.add_parser("bench", help="grid-search activations and write a ratio report")
    p.add_argument("--manifest", type=Path, default=DEFAULT_MANIFEST)
    p.add_argument("--dataset", required=True, help="manifest name, or comma list for a cross-dataset report")
    p.add_argument("--activations", default="all", help='comma list of kind[:beta|:grid], or "all"')
    p.add_argument("--grid", type=_floats, default=list(DEFAULT_GRID), help="beta grid for :grid entries")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--format", choices=["csv", "json", "md"], default="json")
    p.add_argument("--out", type=Path)
    _add_training_flags(p)

    p = sub.add_parser("report", help="render a stored JSON report")
    p.add_argument("--in", dest="infile", type=Path, required=True)
    p.add_argument("--format", choices=["csv", "json", "md"], default="md")
    p.add_argument("--out", type=Path)
    return parser


def _train_config(args) -> TrainConfig:
    cfg = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    return cfg.with_overrides(
        learning_rate=args.lr,
        max_epochs=args.max_epochs,
        convergence_epsilon=args.epsilon,
        convergence_window=args.window,
        convergence_measure=args.measure,
        jitter_scale=args.jitter,
        prototypes_per_class=args.prototypes_per_class,
        seed=args.seed,
    )


def _load_entry(manifest: Path, name: str):
    entries = load_manifest(manifest)
    if name not in entries:
        raise DataError(f"dataset {name!r} not in {manifest} (known: {', '.join(sorted(entries))})")
    return entries[name].load()


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def cmd_train(args) -> int:
    cfg = _train_config(args)
    act = parse_activation(args.activation)
    ds = _load_entry(args.manifest, args.dataset)
    train_set, test_set = split(ds, args.test_fraction, args.seed)
    protos = init_prototypes(train_set, cfg.prototypes_per_class, cfg.init_strategy, cfg.jitter_scale,
                             np.random.default_rng(cfg.seed))
    result = train(train_set, GlvqModel(protos, act, Projection(), args.gamma), cfg)
    last = result.history[-1]
    print(f"activation       {act}")
    print(f"epochs           {result.epochs_run}")
    print(f"converged        {result.converged} (epoch {result.convergence_epoch})")
    print(f"final cost       {last.cost:.6g}")
    print(f"train accuracy   {last.train_accuracy:.4f}")
    print(f"test accuracy    {accuracy(result.model, test_set):.4f}")
    if args.out:
        args.out.write_text(model_to_json(result.model) + "\n", encoding="utf-8")
        print(f"model written to {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _train_config(args)
    activations = parse_activation_list(args.activations, args.grid)
    if args.runs < 1 or args.parallel < 1:
        raise ConfigurationError("--runs and --parallel must be >= 1")
    names = [n.strip() for n in args.dataset.split(",") if n.strip()]
    datasets = {n: _load_entry(args.manifest, n) for n in names}
    report, _ = run_benchmark(datasets, activations, args.runs, cfg, args.seed, args.test_fraction,
                              args.gamma, args.parallel)
    _emit(report.render(args.format), args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        report = RatioReport.from_json(args.infile.read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read report {args.infile}: {exc}") from exc
    _emit(report.render(args.format), args.out)
    return EXIT_OK


def run_cli(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return {"train": cmd_train, "bench": cmd_bench, "report": cmd_report}[args.command](args)
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigurationError, ActivationError, GlvqError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
