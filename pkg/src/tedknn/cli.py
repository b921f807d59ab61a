"""Command-line entry point: ``tedknn run|synth|gradcheck|report|sweep``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .dataset import DatasetError, generate_synthetic, save_csv, write_schema
from .experiment import (
    ConfigError,
    load_config,
    read_synthetic_spec,
    run_experiment,
    run_sweep,
)

log = logging.getLogger("tedknn")

SYNTH_EXPERIMENT = """\
[experiment]
name = {name}
seed = {seed}
arms = baseline_Y, baseline_E, multitask, embed_Y_knn, embed_E_knn, pairwise_Y_knn, pairwise_E_knn, pairwise_YE_knn
output_dir = runs

[data]
source = csv
path = data.csv
schema = schema.cfg
split = {split}

[preprocess]
standardize = true

[knn]
k_list = 1, 2, 5, 10, 15, 20

[metrics]
y_thresholds = auto
e_thresholds = auto

[network]
embedding_dim = 64

[train]
epochs = 200
batch_size = 64
learning_rate = 0.001

[multitask]
lambdas = 0.1, 1, 10

[train.pairwise]
epochs = 20
batch_size = 256
learning_rate = 0.05

[pairloss]
kind = {kind}
c1 = {c1}
c2 = {c2}
c3 = {c3}
c4 = {c4}
m1 = 0.25
m2 = 0.25
w = 1.0
n_pairs = 20000
"""


def _cmd_run(args) -> int:
    path = args.config_opt or args.config
    if path is None:
        print("error: run needs a config path", file=sys.stderr)
        return 2
    overrides = {}
    if args.seed is not None:
        overrides["experiment.seed"] = str(args.seed)
    if args.arms:
        overrides["experiment.arms"] = args.arms
    cfg = load_config(path, overrides)
    res = run_experiment(cfg, args.out)
    if res.report is not None:
        print(res.report.to_table(), end="")
    print(f"outputs written to {res.out_dir}")
    for msg in res.failures.values():
        print(f"error: {msg}", file=sys.stderr)
    return 1 if res.failures else 0


def _cmd_synth(args) -> int:
    spec = read_synthetic_spec(args.spec)
    if spec.split is None:
        n_val = n_test = spec.n_samples // 5
        spec = replace(spec, split=(spec.n_samples - n_val - n_test, n_val, n_test))
    d = generate_synthetic(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    schema = save_csv(d, out / "data.csv")
    write_schema(schema, out / "schema.cfg")
    categorical = d.explanation_kind == "categorical" or d.label_kind == "categorical"
    # continuous thresholds: neighbors within ~a quarter of a label std
    ystd = float(d.labels.std()) if not categorical else 1.0
    estd = float(d.explanations.std()) * (d.explanations.shape[1] if d.explanations.ndim > 1 else 1)
    (out / "experiment.cfg").write_text(
        SYNTH_EXPERIMENT.format(
            name=out.name or "synthetic",
            seed=spec.seed,
            split=", ".join(map(str, spec.split)),
            kind="categorical" if categorical else "continuous",
            c1=f"{0.25 * ystd:.6g}",
            c2=f"{0.5 * ystd:.6g}",
            c3=f"{0.25 * estd:.6g}",
            c4=f"{0.5 * estd:.6g}",
        )
    )
    print(f"wrote {out / 'data.csv'}, {out / 'schema.cfg'}, {out / 'experiment.cfg'}")
    return 0


def _cmd_gradcheck(args) -> int:
    from .gradcheck import run_suite

    results = run_suite(args.instances, args.seed)
    failed = [r for r in results if not r.passed]
    by_loss: dict[str, list] = {}
    for r in results:
        by_loss.setdefault(r.loss, []).append(r)
    for name, rs in by_loss.items():
        worst = max(r.max_rel_error for r in rs)
        status = "ok" if all(r.passed for r in rs) else "FAIL"
        print(f"{name:14s} {len(rs):3d} instances  max rel err {worst:.2e}  {status}")
    for r in failed:
        print(f"error: {r.loss} seed {r.seed}: relative error {r.max_rel_error:.3e}", file=sys.stderr)
    return 1 if failed else 0


def _cmd_report(args) -> int:
    from .metrics import read_report
    from .plotting import render_figures

    out = Path(args.dir)
    report = read_report(out)
    (out / "report.txt").write_text(report.to_table())
    render_figures(report, out)
    print(report.to_table(), end="")
    return 0


def _parse_grid(items):
    grid = {}
    for item in items:
        key, sep, values = item.partition("=")
        if not sep:
            raise ConfigError(f"--grid expects section.key=v1,v2 (got {item!r})")
        grid[key.strip()] = [v.strip() for v in values.split(",") if v.strip()]
    return grid


def _cmd_sweep(args) -> int:
    grid = _parse_grid(args.grid)
    out = Path(args.out) if args.out else Path(args.config).parent / "sweep"
    records = run_sweep(args.config, grid, out)
    for rec in records:
        combo = ", ".join(f"{k}={v}" for k, v in rec["combo"].items())
        best = ", ".join(f"{a}={v:.4f}" for a, v in rec["best_y_acc"].items())
        print(f"{combo}: {best}")
    return 1 if any(r["failures"] for r in records) else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tedknn", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the arms listed in a config")
    run.add_argument("config", nargs="?")
    run.add_argument("--config", dest="config_opt")
    run.add_argument("--out", help="output directory (default: <output_dir>/<name>)")
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--arms", help="comma-separated subset of arms")
    run.set_defaults(func=_cmd_run)

    synth = sub.add_parser("synth", help="write a synthetic dataset plus schema and config")
    synth.add_argument("spec")
    synth.add_argument("out")
    synth.set_defaults(func=_cmd_synth)

    gc = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    gc.add_argument("--instances", type=int, default=20)
    gc.add_argument("--seed", type=int, default=0)
    gc.set_defaults(func=_cmd_gradcheck)

    rep = sub.add_parser("report", help="re-render report.txt and figures from report.json")
    rep.add_argument("dir")
    rep.set_defaults(func=_cmd_report)

    sw = sub.add_parser("sweep", help="grid search scored on the validation split")
    sw.add_argument("config")
    sw.add_argument("--grid", action="append", default=[], help="section.key=v1,v2 (repeatable)")
    sw.add_argument("--out")
    sw.set_defaults(func=_cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (FileNotFoundError, ConfigError, DatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
