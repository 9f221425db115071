"""Command-line entry point: ``edusynth seed-data|generate|evaluate|bench``.

Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure.
Messages go to stderr; data only to files.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench import (
    METHODS,
    ConfigError,
    RunReport,
    derive_seed,
    emit_json,
    emit_kde,
    emit_markdown,
    evaluate_pair,
    generate,
    load_config,
    load_schema,
    run_bench,
    write_outputs,
    MethodResult,
)
from .dataset import DomainError, SchemaError, load_csv, seed_dataset, student_schema, write_csv
from .resample import ConfigError as ResampleConfigError
from .utility import split_holdout, utility_scores

log = logging.getLogger("edusynth")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="edusynth", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("seed-data", help="write the deterministic stand-in dataset")
    s.add_argument("--rows", type=int, default=10000)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--out", required=True)

    g = sub.add_parser("generate", help="fit one method and write synthetic rows")
    g.add_argument("--input", help="real CSV (default: stand-in dataset)")
    g.add_argument("--schema", help="schema TOML/JSON (default: student schema)")
    g.add_argument("--method", required=True, choices=METHODS)
    g.add_argument("--rows", type=int, default=10000)
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--out", required=True)
    g.add_argument("--seed-rows", type=int, default=2000, help="stand-in size when --input is absent")
    g.add_argument("--epochs", type=int, help="override training epochs of deep methods")

    e = sub.add_parser("evaluate", help="score a synthetic CSV against a real CSV")
    e.add_argument("--real", required=True)
    e.add_argument("--synth", required=True)
    e.add_argument("--schema")
    e.add_argument("--class-target")
    e.add_argument("--reg-target")
    e.add_argument("--json", required=True)
    e.add_argument("--markdown")
    e.add_argument("--kde")
    e.add_argument("--seed", type=int, default=42)
    e.add_argument("--test-fraction", type=float, default=0.30)
    e.add_argument("--trees-classifier", type=int, default=200)
    e.add_argument("--trees-regressor", type=int, default=300)

    b = sub.add_parser("bench", help="run the full benchmark from a config file")
    b.add_argument("--config", required=True)
    return p


def _schema(args):
    schema = load_schema(args.schema) if args.schema else student_schema()
    ct = getattr(args, "class_target", None)
    rt = getattr(args, "reg_target", None)
    return schema.with_targets(ct, rt)


def _load(path, schema):
    try:
        table, rep = load_csv(path, schema)
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    if rep.dropped:
        log.info("%s: dropped %d rows (%s)", path, rep.dropped, rep)
    return table


def cmd_seed_data(args) -> None:
    write_csv(seed_dataset(args.rows, args.seed), args.out)
    log.info("wrote %d rows to %s", args.rows, args.out)


def cmd_generate(args) -> None:
    schema = _schema(args)
    real = _load(args.input, schema) if args.input else seed_dataset(args.seed_rows, 42)
    overrides = {"epochs": args.epochs} if args.epochs and args.method in ("dae", "vae", "copulagan") else None
    synth = generate(args.method, real, args.rows, args.seed, overrides)
    write_csv(synth, args.out)
    log.info("wrote %d %s rows to %s", synth.n_rows, args.method, args.out)


def cmd_evaluate(args) -> None:
    schema = _schema(args)
    real = _load(args.real, schema)
    synth = _load(args.synth, schema)
    split_seed = derive_seed(args.seed, "holdout")
    util_seed = derive_seed(args.seed, "utility")
    train, test = split_holdout(real, schema.class_target, args.test_fraction, split_seed)
    trees = dict(n_trees_classifier=args.trees_classifier, n_trees_regressor=args.trees_regressor)
    baseline = utility_scores(train, test, schema.class_target, schema.regression_target, util_seed, **trees)
    fid, res = evaluate_pair(real, synth, (train, test), util_seed, baseline, **trees)
    config = {"real": args.real, "synth": args.synth, "seed": args.seed, "schema": schema.to_dict(),
              "test_fraction": args.test_fraction, **trees}
    report = RunReport(
        [MethodResult(Path(args.synth).stem, util_seed, synth.n_rows, fid, res)],
        config, "", baseline,
        {"seed": split_seed, "train_rows": train.n_rows, "test_rows": test.n_rows, "utility_seed": util_seed},
    )
    Path(args.json).write_bytes(emit_json(report))
    if args.markdown:
        Path(args.markdown).write_text(emit_markdown(report), encoding="utf-8")
    if args.kde:
        Path(args.kde).write_text(emit_kde(real, {Path(args.synth).stem: synth}), encoding="utf-8")


def cmd_bench(args) -> None:
    cfg = load_config(args.config)
    report, synths = run_bench(cfg, keep_synthetic=True)
    from .bench import load_real

    out = write_outputs(cfg, report, load_real(cfg), synths)
    failed = [r.method for r in report.methods if r.error]
    log.info("report written to %s", out)
    if failed:
        log.error("methods failed: %s", ", ".join(failed))


COMMANDS = {"seed-data": cmd_seed_data, "generate": cmd_generate, "evaluate": cmd_evaluate, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        COMMANDS[args.command](args)
    except (ConfigError, SchemaError, ResampleConfigError) as exc:
        print(f"edusynth: configuration error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, OSError, RuntimeError, ValueError) as exc:
        print(f"edusynth: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
