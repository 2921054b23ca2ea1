"""Command line entry point: ``cfjoint <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Errors go to stderr as ``ERROR:<category>: message``.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .baselines import fit_control_only, fit_disjoint, fit_pooled, fit_treatment_only
from .closed_form import fit_joint_ridge
from .experiment import (hyperparam_grid, run_benchmark, select_best,
                         simulate_trial_split, validation_split)
from .general import SolveConfig, fit_joint_general
from .ingest import DataError, load_csv, load_schema, read_table, standardize
from .kernel import KernelSpec, fit_kernel_joint
from .metrics import MetricSet, accuracy, mean_effect_abs_diff, r2
from .model import Hyperparams, LossSpec, TrialDataset
from .persistence import SavedModel, dumps, load_model, save_model
from .protocols import BenchmarkConfig, check_grid, load_config, load_protocol

EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 1, 2, 3
METHODS = ("delta", "delta-kernel", "treatment-only", "control-only", "pooled", "disjoint")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _hyperparams(args, required=True):
    given = [v is not None for v in (args.gamma, args.lam, args.eta)]
    if not any(given) and not required:
        return None
    try:
        return Hyperparams(gamma=0.5 if args.gamma is None else args.gamma,
                           lam=1.0 if args.lam is None else args.lam,
                           eta=1.0 if args.eta is None else args.eta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read_json_arg(value: str, what: str) -> dict:
    """A JSON object given inline or as a file path."""
    text = value
    if not value.lstrip().startswith("{"):
        try:
            text = Path(value).read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read {what} {value}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{what} is not valid JSON: {exc}") from None


def _trial_data(ds) -> TrialDataset:
    if ds.treated is None:
        raise DataError("fitting needs a condition column in the schema")
    t = ds.treated
    trial = ds.trial[~t] if ds.trial is not None else None
    return TrialDataset(ds.X[~t], ds.y[~t], ds.X[t], ds.y[t], trial)


def _fitter(args, spec_kw):
    method = args.method
    loss = LossSpec(loss=args.loss, q_reg=args.q_reg, r_reg=args.r_reg)
    if method == "delta":
        if loss.loss.value == "squared" and loss.is_smooth:
            return fit_joint_ridge
        cfg = SolveConfig(seed=args.seed)
        return lambda data, hp: fit_joint_general(data, hp, loss, cfg)
    if method == "delta-kernel":
        return lambda data, hp: fit_kernel_joint(
            data, hp, KernelSpec.for_hyperparams(hp, **spec_kw))
    if method == "treatment-only":
        return lambda data, hp: fit_treatment_only(data, hp.lam)
    if method == "control-only":
        return lambda data, hp: fit_control_only(data, hp.lam)
    if method == "pooled":
        return fit_pooled
    return fit_disjoint


def _candidates(method, grid):
    hps = hyperparam_grid(grid)
    if method in ("treatment-only", "control-only"):
        return [Hyperparams(0.5, lam, 1.0) for lam in sorted(set(grid["lambda"]))]
    if method in ("pooled", "disjoint"):
        return sorted({Hyperparams(h.gamma, h.lam, 1.0) for h in hps},
                      key=lambda h: (h.lam, h.gamma))
    return hps


def cmd_fit(args):
    if args.method == "delta-kernel" and (args.loss != "squared" or args.q_reg != "sqL2"
                                          or args.r_reg != "sqL2"):
        raise UsageError("delta-kernel supports only the squared loss with squared L2 penalties")
    schema = load_schema(args.schema)
    ds = load_csv(args.data, schema)
    (ds,), scaler = standardize(ds)
    data = _trial_data(ds)
    spec_kw = {"base": args.kernel, "width": args.width, "degree": args.degree,
               "offset": args.offset}
    fit = _fitter(args, spec_kw)
    if args.grid:
        grid = _read_json_arg(args.grid, "grid")
        grid = grid.get("grid", grid)  # a whole benchmark config is accepted too
        try:
            cands = _candidates(args.method, grid)
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"bad grid: {exc}") from None
        if _hyperparams(args, required=False) is not None:
            raise UsageError("give either --grid or --gamma/--lambda/--eta, not both")
        train, X_val, y_val = validation_split(data, 0.2, args.seed)
        hp = select_best(cands, fit, train, X_val, y_val)
    else:
        hp = _hyperparams(args)
    model = fit(data, hp)
    saved = SavedModel(method=args.method, model=model, encoder=ds.encoder, scaler=scaler,
                       hyperparams=hp)
    save_model(saved, args.out)
    print(f"wrote {args.out} ({args.method}, gamma={hp.gamma:g}, lambda={hp.lam:g}, "
          f"eta={hp.eta:g}, {data.n_treatment} treatment / {data.n_control} control rows)")
    return 0


def _load_for_model(saved: SavedModel, path, require_labels):
    return load_csv(path, saved.encoder.schema, encoder=saved.encoder,
                    require_labels=require_labels)


def cmd_predict(args):
    saved = load_model(args.model)
    ds = _load_for_model(saved, args.data, require_labels=False)
    y_t, y_c, eff = saved.predict_all(ds.X)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["id", "y_t_hat", "y_c_hat", "y_effect_hat"])
        for i, a, b, c in zip(ds.ids, y_t, y_c, eff):
            w.writerow([i, repr(float(a)), repr(float(b)), repr(float(c))])
    finally:
        if out is not sys.stdout:
            out.close()
    if args.out:
        print(f"wrote {len(ds.ids)} predictions to {args.out}")
    return 0


def cmd_evaluate(args):
    saved = load_model(args.model)
    ds = _load_for_model(saved, args.data, require_labels=True)
    rows = np.ones(ds.n_rows, dtype=bool) if ds.treated is None else ds.treated
    if ds.y_treatment is not None:
        y = ds.y_treatment
    else:
        y = ds.y[rows]
    if y.size < 2:
        raise DataError("evaluation needs at least two treatment-labeled rows")
    X = ds.X if ds.y_treatment is not None else ds.X[rows]
    pred = saved.predict(X)
    acc = None
    if args.threshold is not None:
        acc = accuracy(np.where(pred >= args.threshold, 1, -1), np.where(y >= args.threshold, 1, -1))
    eff = None
    if ds.y_treatment is not None:
        eff = mean_effect_abs_diff(_Effect(saved), ds.X, ds.y_treatment, ds.y)
    metrics = MetricSet(r2=r2(pred, y), accuracy=acc, mean_effect_abs_diff=eff)
    report = {"metrics": metrics.as_dict(), "method": saved.method,
              "rows": {"file": len(read_table(args.data)[1]), "loaded": int(ds.n_rows),
                       "evaluated": int(y.size)}}
    text = dumps(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


class _Effect:
    """Adapter exposing ``predict_effect`` for a saved model."""

    def __init__(self, saved):
        self.saved = saved

    def predict_effect(self, X):
        return self.saved.predict_all(X)[2]


def _split_config(args) -> BenchmarkConfig:
    cfg = load_config(args.config) if args.config else BenchmarkConfig()
    if args.seed is not None:
        cfg.split = replace(cfg.split, seed=args.seed)
    return cfg


def cmd_simulate_trial(args):
    schema = load_schema(args.schema)
    cfg = _split_config(args)
    table = read_table(args.data)
    header, rows = table
    ds = load_csv(args.data, schema, table=table)
    split = simulate_trial_split(ds, cfg.split, cfg.split.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    raw_label = header.index(schema.label_column)
    raw_treat = (header.index(schema.treatment_label_column)
                 if schema.treatment_label_column else raw_label)
    sub = split.subpopulation
    records = []
    for i in split.control_idx:
        records.append((i, "control", rows[ds.source_rows[i]][raw_label], int(sub[i])))
    for i in split.treatment_idx:
        records.append((i, "treatment", rows[ds.source_rows[i]][raw_treat], 1))
    records.sort(key=lambda r: (r[0], r[1]))
    with open(out / "train.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header + ["cf_condition", "cf_label", "cf_trial"])
        for i, cond, label, trial in records:
            w.writerow(rows[ds.source_rows[i]] + [cond, label, trial])
    with open(out / "test.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header + ["cf_condition", "cf_label", "cf_trial"])
        for i in split.test_idx:
            row = rows[ds.source_rows[i]]
            w.writerow(row + ["treatment", row[raw_treat], int(sub[i])])

    train_schema = schema.to_dict()
    train_schema.pop("treatment_label_column", None)
    train_schema.pop("row_filter", None)
    train_schema.update({"label_column": "cf_label", "condition_column": "cf_condition",
                         "trial_column": "cf_trial", "treatment_values": ["treatment"],
                         "control_values": ["control"]})
    (out / "train_schema.json").write_text(dumps(train_schema), encoding="utf-8")
    ids = lambda idx: [str(ds.ids[i]) for i in idx]  # noqa: E731
    meta = {"seed": cfg.split.seed, "split": cfg.split.as_dict(),
            "sizes": {"control": int(split.control_idx.size),
                      "trial_treatment": int(split.treatment_idx.size),
                      "trial_control": int(split.data.trial_control.sum()),
                      "test": int(split.test_idx.size)},
            "ids": {"control": ids(split.control_idx), "trial_treatment": ids(split.treatment_idx),
                    "test": ids(split.test_idx)}}
    (out / "split.json").write_text(dumps(meta), encoding="utf-8")
    print(f"wrote {out}/train.csv ({len(records)} rows), test.csv ({split.test_idx.size} rows), "
          f"train_schema.json, split.json")
    return 0


def cmd_benchmark(args):
    if args.protocol:
        proto = load_protocol(args.protocol, args.data)
        schema, data_path, cfg = proto.schema, proto.data_path, proto.config
        if args.schema:
            schema = load_schema(args.schema)
        if args.config:
            cfg = load_config(args.config)
    else:
        if not (args.data and args.schema):
            raise UsageError("benchmark needs --protocol or both --data and --schema")
        schema, data_path = load_schema(args.schema), Path(args.data)
        cfg = load_config(args.config) if args.config else BenchmarkConfig()
    if args.seed is not None:
        cfg.split = replace(cfg.split, seed=args.seed)
    if args.grid:
        try:
            grid = _read_json_arg(args.grid, "grid")
            cfg.grid = check_grid(grid.get("grid", grid))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    table = read_table(data_path)
    ds = load_csv(data_path, schema, table=table)
    result = run_benchmark(ds, cfg.split, cfg.grid, cfg.tasks)
    report = {"dataset": {"file": Path(data_path).name, "file_rows": len(table[1]),
                          "rows": int(ds.n_rows), "features": int(ds.dimension)},
              "config": cfg.as_dict(), "results": result.as_dict()}
    text = dumps(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(result.format())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cfjoint", description="Joint treatment/control prediction from a small "
                                            "trial plus historical control data.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, data=True, schema=True):
        if data:
            sp.add_argument("--data", required=True, help="CSV file (optionally .gz)")
        if schema:
            sp.add_argument("--schema", required=True, help="dataset schema JSON")

    f = sub.add_parser("fit", help="fit one model and write a model file")
    common(f)
    f.add_argument("--method", choices=METHODS, default="delta")
    f.add_argument("--gamma", type=float)
    f.add_argument("--lambda", dest="lam", type=float)
    f.add_argument("--eta", type=float)
    f.add_argument("--grid", help="JSON grid (inline or file) searched on held-out trial rows")
    f.add_argument("--loss", choices=("squared", "logistic"), default="squared")
    f.add_argument("--q-reg", choices=("sqL2", "L1"), default="sqL2")
    f.add_argument("--r-reg", choices=("sqL2", "L1"), default="sqL2")
    f.add_argument("--kernel", choices=("linear", "rbf", "polynomial"), default="rbf")
    f.add_argument("--width", type=float, default=1.0)
    f.add_argument("--degree", type=int, default=2)
    f.add_argument("--offset", type=float, default=1.0)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", help="write treatment, control and effect predictions")
    pr.add_argument("--model", required=True)
    common(pr, schema=False)
    pr.add_argument("--out", help="CSV output (default stdout)")
    pr.set_defaults(func=cmd_predict)

    ev = sub.add_parser("evaluate", help="score a model on labeled test data")
    ev.add_argument("--model", required=True)
    common(ev, schema=False)
    ev.add_argument("--threshold", type=float, help="label threshold for accuracy")
    ev.add_argument("--out", help="JSON report path (also printed)")
    ev.set_defaults(func=cmd_evaluate)

    st = sub.add_parser("simulate-trial", help="materialize one simulated trial split")
    common(st)
    st.add_argument("--config", help="benchmark config JSON (its split section is used)")
    st.add_argument("--seed", type=int)
    st.add_argument("--out", required=True, help="output directory")
    st.set_defaults(func=cmd_simulate_trial)

    b = sub.add_parser("benchmark", help="replicated comparison of all methods")
    b.add_argument("--protocol", choices=("housing", "diabetes"))
    b.add_argument("--data")
    b.add_argument("--schema")
    b.add_argument("--config")
    b.add_argument("--grid")
    b.add_argument("--seed", type=int)
    b.add_argument("--out", help="JSON report path")
    b.set_defaults(func=cmd_benchmark)
    return p


def _fail(category: str, message: str, code: int) -> int:
    print(f"ERROR:{category}: {message}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("a subcommand is required (" + ", ".join(
                ("fit", "predict", "evaluate", "simulate-trial", "benchmark")) + ")")
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except DataError as exc:
        return _fail("data", str(exc), EXIT_DATA)
    except (np.linalg.LinAlgError, FloatingPointError, MemoryError, OverflowError) as exc:
        return _fail("numerical", str(exc) or type(exc).__name__, EXIT_NUMERICAL)
    except (ValueError, KeyError) as exc:
        return _fail("data", str(exc), EXIT_DATA)
    except OSError as exc:
        return _fail("data", str(exc), EXIT_DATA)


if __name__ == "__main__":
    sys.exit(main())
