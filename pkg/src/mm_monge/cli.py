"""Command-line entry point: ``mm-monge {train,sweep,gen-data}``.

Exit codes: 0 success, 2 usage, 3 numeric failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import json
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .data import CsvParseError, MarginalSpec, generate, save_csv
from .net import save_checkpoint
from .train import (
    TrainConfig,
    TrainingAborted,
    evaluate,
    fit,
    gauss_shift_config,
    moons_circles_config,
    thread_count,
)
from .tensor_rng import Rng

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

EXPERIMENTS = {"gauss-shift": gauss_shift_config, "moons-circles": moons_circles_config}
OPTIMIZER_ORDER = ("adam", "adagrad", "sgd", "rmsprop")
COSTS = {"chain": "chain_quadratic", "pairwise": "pairwise_quadratic"}
ORDINALS = {2: "Second", 3: "Final"}


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"not a comma-separated list of numbers: {text!r}") from None
    return vals


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"not a comma-separated list of integers: {text!r}") from None


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    src = p.add_argument_group("problem")
    src.add_argument("--experiment", choices=sorted(EXPERIMENTS), help="built-in preset")
    src.add_argument("--marginal", action="append", default=[], metavar="CSV",
                     help="sample file; repeat N times, the first one is the source")
    src.add_argument("--config", help="replay a config.json written by an earlier run")
    p.add_argument("--epochs", type=int, help="iterations (default: 2000 gauss-shift, 5000 moons-circles)")
    p.add_argument("--batch-size", type=int, default=500, help="minibatch size M (default 500)")
    p.add_argument("--alpha", type=float, default=1.0, help="Gaussian kernel coefficient (default 1)")
    p.add_argument("--cost", choices=sorted(COSTS), default="chain", help="transport cost (default chain)")
    p.add_argument("--loss-form", choices=("standard", "paper_normalized"), default="standard")
    p.add_argument("--hidden", default="128,128", help="hidden widths (default 128,128)")
    p.add_argument("--activation", choices=("relu", "tanh"), default="relu")
    p.add_argument("--lr", type=float, default=1e-4, help="learning rate (default 1e-4)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eval-seed", type=int, help="seed of the evaluation batch (default seed + 10000)")
    p.add_argument("--eval-n", type=int, default=500)


def _config_from_args(args, optimizer=None, lambdas=None, seed=None) -> TrainConfig:
    if args.config:
        try:
            d = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise OSError(f"cannot read {args.config}: {exc}") from exc
        cfg = TrainConfig.from_dict(d)
        overrides = {}
        if optimizer:
            overrides["optimizer"] = optimizer
        if lambdas:
            overrides["lambdas"] = lambdas
        if seed is not None:
            overrides["seed"] = seed
        return TrainConfig.from_dict({**cfg.to_dict(), **overrides}) if overrides else cfg

    if bool(args.experiment) == bool(args.marginal):
        raise UsageError("give exactly one of --experiment or --marginal (repeated)")
    hidden = tuple(_ints(args.hidden))
    common = dict(
        batch_size=args.batch_size,
        alpha=args.alpha,
        cost=COSTS[args.cost],
        loss_form=args.loss_form,
        hidden=hidden,
        activation=args.activation,
        lr=args.lr,
        optimizer=optimizer or "adam",
        seed=args.seed if seed is None else seed,
        eval_seed=args.eval_seed,
        eval_n=args.eval_n,
    )
    if args.epochs is not None:
        common["epochs"] = args.epochs
    if args.experiment:
        common["lambdas"] = tuple(lambdas or [100.0])
        try:
            return EXPERIMENTS[args.experiment](**common)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if len(args.marginal) < 2:
        raise UsageError("need at least two --marginal files")
    marg = [MarginalSpec("csv_file", path=str(Path(m).resolve())) for m in args.marginal]
    for m in marg:
        if not Path(m.path).is_file():
            raise UsageError(f"no such file: {m.path}")
    common["lambdas"] = tuple(lambdas or [100.0])
    try:
        return TrainConfig(marginals=marg, **common)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write_loss_csv(path: Path, loss) -> None:
    lines = ["epoch,loss"] + [f"{i},{v:.17g}" for i, v in enumerate(loss, start=1)]
    path.write_text("\n".join(lines) + "\n")


def run_to_dir(cfg: TrainConfig, out: Path) -> dict:
    """Train, evaluate, and write the run manifest to ``out``.

    Files go to ``<out>.partial`` first and are renamed on success.  On a
    numeric abort the partial directory becomes ``<out>.failed`` holding the
    config and the partial report, then the exception propagates.
    """
    out = Path(out)
    tmp = out.with_name(out.name + ".partial")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    try:
        (tmp / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2))
        try:
            ens, report = fit(cfg)
        except TrainingAborted as exc:
            (tmp / "report.json").write_text(exc.report.to_json())
            _write_loss_csv(tmp / "loss.csv", exc.report.loss)
            failed = out.with_name(out.name + ".failed")
            if failed.exists():
                shutil.rmtree(failed)
            tmp.rename(failed)
            raise
        eval_seed = cfg.eval_seed if cfg.eval_seed is not None else cfg.seed + 10_000
        stats = evaluate(ens, cfg, eval_seed)
        (tmp / "report.json").write_text(report.to_json())
        _write_loss_csv(tmp / "loss.csv", report.loss)
        for h, (p, t) in enumerate(zip(stats["pushed"], stats["targets"]), start=2):
            save_csv(tmp / f"samples_h{h}.csv", p)
            save_csv(tmp / f"targets_h{h}.csv", t)
        save_checkpoint(tmp / "maps.bin", ens)
    except BaseException:
        if tmp.exists():
            shutil.rmtree(tmp)
        raise
    if out.exists():
        shutil.rmtree(out)
    tmp.rename(out)
    return json.loads((out / "report.json").read_text())


def _table_lines(report: dict) -> list[str]:
    lines = []
    three = len(report["marginals"]) == 2
    for m in report["marginals"]:
        name = ORDINALS[m["index"]] if three else f"h={m['index']}"
        flag = "  [unstable]" if m.get("unstable") else ""
        lines.append(f"{name} (mean, SD): {m['mean']:.4f}, {m['sd']:.4f}   MMD2 {m['mmd2']:.3e}{flag}")
    return lines


def cmd_train(args) -> int:
    lambdas = _floats(args.lam) if args.lam else None
    cfg = _config_from_args(args, optimizer=args.optimizer, lambdas=lambdas)
    report = run_to_dir(cfg, Path(args.out))
    print(f"{cfg.optimizer}  lambda={','.join(f'{v:g}' for v in cfg.lambdas)}  epochs={cfg.epochs}")
    for line in _table_lines(report):
        print(line)
    print(f"wrote {args.out}")
    return EXIT_OK


def _sweep_job(job):
    cfg, out = job
    try:
        return run_to_dir(cfg, out), None
    except TrainingAborted as exc:
        return None, str(exc)


def cmd_sweep(args) -> int:
    optimizers = [o.strip().lower() for o in args.optimizers.split(",") if o.strip()] if args.optimizers else []
    lambdas = _floats(args.lambdas) if args.lambdas else []
    seeds = _ints(args.seeds) if args.seeds else [args.seed]
    if not optimizers and not lambdas:
        raise UsageError("sweep needs --optimizers and/or --lambdas")
    bad = [o for o in optimizers if o not in OPTIMIZER_ORDER]
    if bad:
        raise UsageError(f"unknown optimizer(s): {', '.join(bad)}")
    optimizers = [o for o in OPTIMIZER_ORDER if o in optimizers] or [args.optimizer]
    lambdas = lambdas or [100.0]
    root = Path(args.out)
    root.mkdir(parents=True, exist_ok=True)
    jobs, labels = [], []
    for opt in optimizers:
        for lam in lambdas:
            for seed in seeds:
                cfg = _config_from_args(args, optimizer=opt, lambdas=[lam], seed=seed)
                label = f"{opt}_lam{lam:g}_s{seed}"
                jobs.append((cfg, root / label))
                labels.append((label, opt, lam, seed))
    workers = thread_count()
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]

    n_marg = len(jobs[0][0].marginals)
    header = ["run", "optimizer", "lambda", "seed"]
    for h in range(2, n_marg + 1):
        header += [f"h{h}_mean", f"h{h}_sd", f"h{h}_mmd2"]
    header += ["unstable", "status"]
    failures = 0
    with open(root / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for (label, opt, lam, seed), (report, err) in zip(labels, results):
            row = [label, opt, f"{lam:g}", seed]
            if report is None:
                failures += 1
                row += [""] * (3 * (n_marg - 1)) + ["", f"aborted: {err}"]
            else:
                for m in report["marginals"]:
                    row += [f"{m['mean']:.4f}", f"{m['sd']:.4f}", f"{m['mmd2']:.6g}"]
                row += [int(any(m["unstable"] for m in report["marginals"])), "ok"]
                print(f"{label:>24}  " + "  ".join(
                    f"({m['mean']:.4f}, {m['sd']:.4f})" for m in report["marginals"]))
            w.writerow(row)
    print(f"wrote {root / 'summary.csv'}")
    return EXIT_NUMERIC if failures else EXIT_OK


GEN_KINDS = {"gaussian": "isotropic_gaussian", "two-moons": "two_moons", "two-circles": "two_circles"}


def cmd_gen_data(args) -> int:
    try:
        spec = MarginalSpec(
            GEN_KINDS[args.kind], mean=args.mean, sd=args.sd, noise=args.noise,
            factor=args.factor, n=args.n,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    save_csv(args.out, generate(spec, Rng(args.seed)))
    print(f"wrote {args.n} points to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mm-monge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one map ensemble and write a run directory")
    _add_run_flags(p)
    p.add_argument("--optimizer", choices=OPTIMIZER_ORDER, default="adam")
    p.add_argument("--lambda", dest="lam", help="penalty weight(s), one value or one per target (default 100)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="one run per optimizer / lambda / seed setting")
    _add_run_flags(p)
    p.add_argument("--optimizers", help="e.g. adam,adagrad,sgd,rmsprop")
    p.add_argument("--lambdas", help="e.g. 1,10,100,1000")
    p.add_argument("--seeds", help="e.g. 1,2,3 (default: --seed)")
    p.add_argument("--optimizer", choices=OPTIMIZER_ORDER, default="adam",
                   help="optimizer for a lambda-only sweep")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-data", help="write a synthetic marginal as CSV")
    p.add_argument("--kind", choices=sorted(GEN_KINDS), required=True)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--mean", type=float, default=0.0)
    p.add_argument("--sd", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--factor", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mm-monge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingAborted, FloatingPointError) as exc:
        print(f"mm-monge: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CsvParseError, OSError) as exc:
        print(f"mm-monge: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
