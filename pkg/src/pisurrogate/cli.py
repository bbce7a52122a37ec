"""``pi-surrogate`` command line: experiments, FANOVA, designs, training and prediction."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .buckingham import BasisError
from .dataset import Dataset
from .design import design, request_for
from .dimensions import DimensionError, load_system
from .fanova import fanova
from .gasp import GaspModel, OptimizerConfig, predict, train
from .harness import MODES, ConfigError, fanova_stage, preset_config, run_experiment, write_outputs
from .presets import UnavailableStrategy
from .testbeds import TESTBEDS, get_testbed


def _csv_list(text: str | None) -> tuple[str, ...] | None:
    if text is None:
        return None
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _int_list(text: str | None) -> tuple[int, ...] | None:
    items = _csv_list(text)
    return None if items is None else tuple(int(t) for t in items)


def cmd_run(args) -> int:
    modes = MODES if args.mode == "both" else (args.mode,)
    cfg = preset_config(
        args.testbed, args.preset,
        strategies=_csv_list(args.strategies),
        arrangements=_csv_list(args.inputs),
        trends=_csv_list(args.trend),
        n_values=_int_list(args.n),
        replicates=args.replicates,
        test_size=args.test_size,
        modes=modes,
        master_seed=args.seed,
        workers=args.workers,
        kernel=args.kernel,
        design_budget=args.maximin_budget,
    )
    records = run_experiment(cfg)
    summary = write_outputs(records, args.out, cfg)
    for cell in summary["cells"].values():
        for n, s in cell["by_n"].items():
            print(f"{cell['strategy']:>10} {cell['arrangement']:>12} {cell['trend']:>8} {cell['mode']:>13} "
                  f"n={n:<4} mean={s['mean']:.4g}%  median={s['median']:.4g}%")
    if summary["failures"]:
        print(f"{summary['failures']} record(s) failed; see records.csv", file=sys.stderr)
    print(f"wrote {Path(args.out) / 'records.csv'} and summary.json")
    return 0


def cmd_fanova(args) -> int:
    cfg = preset_config(args.testbed, "desk", replicates=args.replicates, master_seed=args.seed,
                        n_values=(args.n,), kernel=args.kernel)
    stage = fanova_stage(cfg)
    names = list(stage.reports[0].main_effects)
    print(f"{'input':>10} " + " ".join(f"rep{r:<3}" for r in range(len(stage.reports))) + "  median")
    for c in names:
        vals = [rep.main_effects[c] for rep in stage.reports]
        print(f"{c:>10} " + " ".join(f"{v:6.1f}" for v in vals) + f"  {np.median(vals):6.1f}")
    for b, count in stage.counts.items():
        print(f"basis {{{', '.join(b)}}}: {count} replicate(s)")
    print(f"consensus basis: {{{', '.join(stage.consensus.members)}}}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for r, rep in enumerate(stage.reports):
            rep.to_csv(out / f"fanova_rep{r}.csv")
    return 0


def _spec_for(args):
    if args.spec:
        return load_system(args.spec), None
    tb = get_testbed(args.testbed)
    return tb.spec, tb


def cmd_design(args) -> int:
    spec, tb = _spec_for(args)
    if args.evaluate and tb is None:
        raise ConfigError("--evaluate needs --testbed")
    out = Path(args.out)
    for r in range(args.replicates):
        # replicate seeds follow the harness convention
        seed = args.seed ^ r if args.replicates > 1 else args.seed
        req = request_for(spec.inputs, args.n, seed, range_mode=args.range, optimize=not args.random)
        data = design(req, args.maximin_budget)
        if args.evaluate:
            data = tb.with_output(data)
        path = out if args.replicates == 1 else out.with_name(f"{out.stem}_{r}{out.suffix}")
        data.to_csv(path)
        print(f"wrote {data.n} runs x {len(data.columns)} columns to {path}")
    return 0


def cmd_train(args) -> int:
    data = Dataset.from_csv(args.data, output=args.output)
    if data.output is None:
        raise ConfigError(f"output column {args.output!r} not found in {args.data}")
    model = train(data, args.kernel, args.trend, config=OptimizerConfig(n_starts=args.starts, seed=args.seed))
    model.save(args.out)
    print(f"trained on {data.n} runs; nugget={model.nugget:g}; log-likelihood={model.loglik:.6g}; saved {args.out}")
    if args.fanova:
        rep = fanova(model, curves=False)
        for name, pct in rep.ranked()[:10]:
            print(f"{name:>24} {pct:6.2f}%")
    return 0


def cmd_predict(args) -> int:
    model = GaspModel.load(args.model)
    points = Dataset.from_csv(args.points, output=None, provenance="test")
    pred = predict(model, points)
    rows = np.column_stack([pred.mean, pred.se])
    if args.out:
        Dataset(("mean", "se"), rows, provenance="test").to_csv(args.out)
        print(f"wrote {len(rows)} predictions to {args.out}")
    else:
        print("mean,se")
        for m, s in rows:
            print(f"{float(m)!r},{float(s)!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pi-surrogate", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="replicated accuracy experiment")
    r.add_argument("--testbed", required=True, choices=sorted(TESTBEDS))
    r.add_argument("--strategies", help="comma list, e.g. non-da,fanova-da,slc-da")
    r.add_argument("--inputs", help="comma list of raw,log,expanded-log")
    r.add_argument("--trend", help="comma list of constant,linear")
    r.add_argument("--mode", default="both", choices=("interpolation", "extrapolation", "both"))
    r.add_argument("--preset", default="desk", choices=("desk", "full"))
    r.add_argument("--n", help="comma list of training sizes (overrides the preset)")
    r.add_argument("--replicates", type=int)
    r.add_argument("--test-size", type=int)
    r.add_argument("--kernel", choices=("power_exponential", "squared_exponential"))
    r.add_argument("--maximin-budget", type=int, help="swap attempts per design (default 20000 per input)")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--seed", type=int, default=1)
    r.add_argument("--out", default="results")
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("fanova", help="FANOVA stage and recommended basis")
    f.add_argument("--testbed", required=True, choices=sorted(TESTBEDS))
    f.add_argument("--n", type=int, required=True)
    f.add_argument("--replicates", type=int, default=20)
    f.add_argument("--kernel", choices=("power_exponential", "squared_exponential"))
    f.add_argument("--seed", type=int, default=1)
    f.add_argument("--out", help="directory for per-replicate percentage CSVs")
    f.set_defaults(func=cmd_fanova)

    d = sub.add_parser("design", help="maximin Latin hypercube design")
    src = d.add_mutually_exclusive_group(required=True)
    src.add_argument("--testbed", choices=sorted(TESTBEDS))
    src.add_argument("--spec", help="system spec file (.json, .yaml)")
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--seed", type=int, default=1)
    d.add_argument("--range", default="training", choices=("training", "extrapolation"))
    d.add_argument("--random", action="store_true", help="plain random LHD, no maximin swaps")
    d.add_argument("--replicates", type=int, default=1, help="independent designs, seeds derived from --seed")
    d.add_argument("--maximin-budget", type=int, help="swap attempts (default 20000 per input)")
    d.add_argument("--evaluate", action="store_true", help="append the testbed output")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_design)

    t = sub.add_parser("train", help="fit a GaSP model to a CSV file")
    t.add_argument("--data", required=True)
    t.add_argument("--output", required=True, help="name of the output column")
    t.add_argument("--kernel", default="power_exponential", choices=("power_exponential", "squared_exponential"))
    t.add_argument("--trend", default="constant", choices=("constant", "linear"))
    t.add_argument("--starts", type=int, default=8)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--fanova", action="store_true", help="print the FANOVA percentages")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    q = sub.add_parser("predict", help="predict with a saved model")
    q.add_argument("--model", required=True)
    q.add_argument("--points", required=True)
    q.add_argument("--out")
    q.set_defaults(func=cmd_predict)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UnavailableStrategy, BasisError, DimensionError, FileNotFoundError, KeyError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
