"""Command line entry points: ``pretrain``, ``run``, ``compare`` and ``plot``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .corpus import CorpusEmpty, CorpusInvalidLine, generate_corpus, read_corpus, write_corpus
from .oracle import OracleError
from .plots import box_chart, line_chart
from .policy import CheckpointError, NonFiniteGradient, pretrain, save_checkpoint
from .recipe import PriorRecipe
from .runner import (
    CUMULATIVE,
    CheckpointMissing,
    ConfigError,
    compare,
    load_config,
    moving_average,
    read_csv,
    run,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _cmd_pretrain(args) -> int:
    if args.generate:
        corpus = generate_corpus(args.generate, seed=args.seed)
        if args.save_corpus:
            write_corpus(corpus, args.save_corpus)
    elif args.corpus:
        corpus = read_corpus(args.corpus)
    else:
        raise ConfigError("give a corpus path or --generate N")
    net = pretrain(corpus, args.epochs, seed=args.seed, embed_dim=args.embed_dim, hidden_dim=args.hidden_dim,
                   layers=args.layers, lr=args.lr, batch_size=args.batch_size, lr_decay=args.lr_decay,
                   log=None if args.quiet else lambda m: print(m, file=sys.stderr, flush=True))
    save_checkpoint(net, args.out)
    print(f"wrote {args.out} ({len(corpus)} training lines)")
    return EXIT_OK


def _overrides(args):
    changes = {}
    if args.output_dir:
        changes["output_dir"] = args.output_dir
    if args.workers:
        changes["workers"] = args.workers
    return changes


def _cmd_run(args) -> int:
    config = load_config(args.config).replace(**_overrides(args))
    results = run(config)
    code = EXIT_OK
    for r in results:
        s = r.summary()
        status = f"aborted ({r.error})" if r.error else "ok"
        print(f"seed {r.seed}: " + " ".join(f"{k}={s[k]}" for k in CUMULATIVE) + f" resets={r.resets} {status}")
        if r.error:
            code = EXIT_RUNTIME
    return code


def _cmd_compare(args) -> int:
    configs = [load_config(p).replace(**_overrides(args)) for p in args.configs]
    cmp = compare(configs, output_dir=args.out, window=args.window)
    print("strategy,metric,median,mean,iqr")
    for row in cmp.table():
        print(",".join(str(x) for x in row))
    failed = any(r.error for rs in cmp.results.values() for r in rs)
    return EXIT_RUNTIME if failed else EXIT_OK


def _cmd_plot(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runs = {Path(p).stem: read_csv(p) for p in args.csv}
    curves = {k: moving_average([row["mean_extrinsic"] for row in rows], args.window) for k, rows in runs.items()}
    (out / "reward.svg").write_text(line_chart(curves, title="extrinsic reward (moving average)"), encoding="utf-8")
    for name in CUMULATIVE[1:]:
        series = {k: [row[name] for row in rows] for k, rows in runs.items()}
        (out / f"{name}_curve.svg").write_text(line_chart(series, title=name), encoding="utf-8")
        finals = {k: [rows[-1][name]] for k, rows in runs.items() if rows}
        (out / f"{name}.svg").write_text(box_chart(finals, title=name), encoding="utf-8")
    print(f"wrote plots for {len(runs)} run(s) to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="divmol", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="train a prior on a corpus file or a generated corpus")
    p.add_argument("corpus", nargs="?", help="molecule lines, one per line")
    p.add_argument("--generate", type=int, metavar="N", help="generate N training lines instead of reading a file")
    p.add_argument("--save-corpus", metavar="PATH", help="also write the generated corpus")
    recipe = PriorRecipe()
    p.add_argument("--epochs", type=int, default=recipe.epochs)
    p.add_argument("--seed", type=int, default=recipe.seed)
    p.add_argument("--lr", type=float, default=recipe.lr)
    p.add_argument("--lr-decay", type=float, default=recipe.lr_decay, help="learning-rate factor applied per epoch")
    p.add_argument("--batch-size", type=int, default=recipe.batch_size)
    p.add_argument("--embed-dim", type=int, default=recipe.embed_dim)
    p.add_argument("--hidden-dim", type=int, default=recipe.hidden_dim)
    p.add_argument("--layers", type=int, default=recipe.layers)
    p.add_argument("--out", default="prior.ckpt")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_pretrain)

    for name, func, helptext in (("run", _cmd_run, "run every rerun of one config"),
                                 ("compare", _cmd_compare, "run several configs and summarise them")):
        p = sub.add_parser(name, help=helptext)
        if name == "run":
            p.add_argument("config")
        else:
            p.add_argument("configs", nargs="+")
            p.add_argument("--out", default="comparison")
            p.add_argument("--window", type=int, default=101)
        p.add_argument("--output-dir")
        p.add_argument("--workers", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("plot", help="draw SVG charts from per-step CSV files")
    p.add_argument("csv", nargs="+")
    p.add_argument("--out", default="plots")
    p.add_argument("--window", type=int, default=101)
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OracleError, CorpusEmpty, CorpusInvalidLine, CheckpointMissing, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteGradient, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
