"""Command line entry point: ``fiddle-ate {simulate,fit,export-dgp,selftest}``."""
from __future__ import annotations

import argparse
import itertools
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import benchmark, config as cfgmod, fastnn
from .ate import fit_fiddle
from .data import DataError, load_csv, write_csv
from .dgp import DgpSpec, generate
from .numerics import SeededRng
from .selftest import run_selftest


def parse_grid(text: str):
    """``"n=2000;p=10,500"`` -> ``[(2000, 10), (2000, 500)]``."""
    parts = {}
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        key, _, vals = chunk.partition("=")
        key = key.strip()
        if key not in ("n", "p") or not vals:
            raise ValueError(f"bad grid component {chunk!r}; expected n=... or p=...")
        parts[key] = [int(v) for v in vals.split(",") if v.strip()]
    if set(parts) != {"n", "p"}:
        raise ValueError("grid needs both n=... and p=...")
    return list(itertools.product(parts["n"], parts["p"]))


def _load_config(args) -> cfgmod.PipelineConfig:
    d = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            d = json.load(fh)
    if getattr(args, "preset", None):
        d["preset"] = args.preset
    conf = cfgmod.from_dict(d)
    overrides = {}
    for key in ("method", "seed", "reps", "width", "epochs", "depth", "m_pretrain", "rbar"):
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v
    if getattr(args, "low_dim", False):
        overrides["low_dim"] = True
    if getattr(args, "grid", None):
        overrides["grid"] = parse_grid(args.grid)
    return replace(conf, **overrides)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with PipelineConfig fields")
    p.add_argument("--preset", choices=sorted(cfgmod.PRESETS))
    p.add_argument("--seed", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--m-pretrain", dest="m_pretrain", type=int)
    p.add_argument("--rbar", type=int)
    p.add_argument("--low-dim", dest="low_dim", action="store_true",
                   help="skip factor augmentation and feed raw covariates")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fiddle-ate", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="replication benchmark on the synthetic design")
    _common(sim)
    sim.add_argument("--method", help="comma separated methods")
    sim.add_argument("--reps", type=int)
    sim.add_argument("--grid", help='e.g. "n=2000;p=10,500,1000"')
    sim.add_argument("--out", help="output stem; writes <out>.csv and <out>.json")
    sim.add_argument("--noiseless", action="store_true")

    fit = sub.add_parser("fit", help="estimate the ATE on one CSV dataset")
    _common(fit)
    fit.add_argument("--data", required=True)
    fit.add_argument("--method", choices=cfgmod.METHODS)
    fit.add_argument("--out", help="result JSON path (default: stdout)")
    fit.add_argument("--save-models", dest="save_models", help="directory for fitted network blobs")

    exp = sub.add_parser("export-dgp", help="write one synthetic dataset as CSV")
    exp.add_argument("--n", type=int, required=True)
    exp.add_argument("--p", type=int, required=True)
    exp.add_argument("--seed", type=int, default=0)
    exp.add_argument("--noiseless", action="store_true")
    exp.add_argument("--no-oracle", dest="no_oracle", action="store_true")
    exp.add_argument("--out", required=True)

    sub.add_parser("selftest", help="run the fast invariant checks")
    return ap


def cmd_simulate(args) -> int:
    methods = (args.method or "fiddle").split(",")
    args.method = None
    conf = _load_config(args)
    for m in methods:
        if m not in cfgmod.METHODS:
            raise ValueError(f"unknown method {m!r}")
    grid = conf.grid or [(5000, 1000)]
    rows = benchmark.run_benchmark(conf, grid, methods, conf.reps, base_seed=conf.seed,
                                   noiseless=args.noiseless)
    print(benchmark.format_table(rows))
    if args.out:
        benchmark.write_rows(rows, args.out)
    return 0


def cmd_fit(args) -> int:
    conf = _load_config(args)
    data = load_csv(args.data)
    if args.save_models:
        res, nuis = fit_fiddle(data, conf, return_nuisances=True)
        out = Path(args.save_models)
        out.mkdir(parents=True, exist_ok=True)
        for name, model in (nuis.models if nuis else {}).items():
            fastnn.save_model(model, out / f"{name}.json")
    else:
        res = fit_fiddle(data, conf)
    text = res.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def cmd_export(args) -> int:
    spec = DgpSpec(n=args.n, p=args.p, seed=args.seed)
    syn = generate(spec, SeededRng(spec.seed), noiseless=args.noiseless)
    write_csv(syn.to_dataset(oracle=not args.no_oracle), args.out)
    return 0


def cmd_selftest(args) -> int:
    ok, report = run_selftest(stream=sys.stdout)
    if not ok:
        failed = [name for name, passed, _, _ in report if not passed]
        print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"simulate": cmd_simulate, "fit": cmd_fit, "export-dgp": cmd_export,
               "selftest": cmd_selftest}[args.command]
    try:
        return handler(args)
    except (DataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
