"""Trial simulation, hyperparameter selection and replicated evaluation.

A run takes a fully labeled dataset (either condition tagged, or carrying
both potential outcomes per row), carves out a small biased trial plus a
held-out treatment-labeled test set, fits every method on the same split
and reports per-method means in the layout of the results tables.
"""
from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .baselines import fit_benchmark, fit_control_only, fit_pooled, fit_treatment_only
from .closed_form import fit_joint_ridge
from .ingest import Dataset, standardize
from .metrics import accuracy, mean_effect_abs_diff, r2
from .model import Hyperparams, JointLinearModel, TrialDataset

METHODS = ("treatment_only", "control_only", "pooled", "delta", "benchmark")
METHOD_LABELS = {
    "treatment_only": "S'_t",
    "control_only": "S_c",
    "pooled": "S_t'+c",
    "delta": "delta",
    "benchmark": "S_t",
}
DEFAULT_GRID = {
    "gamma": [0.1, 0.25, 0.5, 0.75],
    "lambda": [1e-4, 1e-3, 1e-2, 1e-1],
    "eta": [1e-2, 1e-1, 1.0, 10.0, 100.0],
}


@dataclass(frozen=True)
class SplitConfig:
    """How to carve a trial out of a fully labeled dataset.

    ``subpop`` is ``"random_fraction"`` (keep a random ``fraction`` of rows),
    ``"group_subset"`` (keep every row of a random ``fraction`` of groups) or
    ``"frequency_quantile"`` (keep rows whose frequency lies above the
    ``tau`` quantile). ``discard`` drops that fraction of qualifying trial
    treatment rows; ``train_fraction`` is the train share of the train:test
    ratio.
    """

    subpop: str = "random_fraction"
    fraction: float = 1.0
    tau: float = 0.75
    discard: float = 0.0
    train_fraction: float = 0.75
    replications: int = 10
    seed: int = 0
    validation_fraction: float = 0.2
    pooled_gamma: float = 0.5

    def __post_init__(self):
        if self.subpop not in ("random_fraction", "group_subset", "frequency_quantile"):
            raise ValueError(f"unknown sub-population rule {self.subpop!r}")
        if not 0 < self.fraction <= 1:
            raise ValueError("fraction must lie in (0, 1]")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")
        if not 0 <= self.discard < 1:
            raise ValueError("discard must lie in [0, 1)")
        if not 0 < self.train_fraction <= 1:
            raise ValueError("train_fraction must lie in (0, 1]")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in (0, 1)")
        if not 0 < self.pooled_gamma < 1:
            raise ValueError("pooled_gamma must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "SplitConfig":
        d = dict(d)
        if "train_test_ratio" in d:
            a, b = d.pop("train_test_ratio")
            d["train_fraction"] = a / (a + b)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown split option(s): {sorted(unknown)}")
        return cls(**d)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class TrialSplit:
    """One simulated trial: the training sets plus held-out evaluation data.

    Index arrays refer to rows of the source :class:`Dataset`.
    """

    data: TrialDataset
    control_idx: np.ndarray
    treatment_idx: np.ndarray
    test_idx: np.ndarray
    benchmark_idx: np.ndarray
    subpopulation: np.ndarray
    test: Dataset
    X_benchmark: np.ndarray
    y_benchmark: np.ndarray

    @property
    def train_idx(self) -> np.ndarray:
        return np.union1d(self.control_idx, self.treatment_idx)


def select_subpopulation(full: Dataset, cfg: SplitConfig, rng) -> np.ndarray:
    n = full.n_rows
    if cfg.subpop == "random_fraction":
        keep = np.zeros(n, dtype=bool)
        keep[rng.permutation(n)[:int(round(cfg.fraction * n))]] = True
        return keep
    if cfg.subpop == "group_subset":
        if full.group is None:
            raise ValueError("group_subset needs a group column")
        groups = np.array(sorted(set(full.group.tolist())), dtype=object)
        k = max(1, int(round(cfg.fraction * groups.size)))
        chosen = set(groups[rng.permutation(groups.size)[:k]].tolist())
        return np.array([g in chosen for g in full.group], dtype=bool)
    if full.frequency is None:
        raise ValueError("frequency_quantile needs a frequency column")
    return full.frequency > np.quantile(full.frequency, cfg.tau)


def _split(idx, train_fraction, rng):
    idx = rng.permutation(idx)
    n_train = int(round(train_fraction * idx.size))
    return np.sort(idx[:n_train]), np.sort(idx[n_train:])


def simulate_trial_split(full: Dataset, cfg: SplitConfig, seed: int) -> TrialSplit:
    """Carve a trial out of ``full``, deterministically given ``seed``.

    Condition-tagged data: treated rows are split train/test; the trial
    treatment arm is the treated training rows inside the sub-population
    (after the random discard), every control row goes to the control set
    and those inside the sub-population are flagged as the trial control arm.

    Dual-label data: rows are split train/test; the control set is every
    training row with its control label, the trial treatment arm the
    training rows inside the sub-population (after discard) with their
    treatment label.
    """
    rng = np.random.default_rng(seed)
    sub = select_subpopulation(full, cfg, rng)
    rows = np.arange(full.n_rows)
    if full.dual_label:
        train, test = _split(rows, cfg.train_fraction, rng)
        control_idx = train
        qualified = train[sub[train]]
        y_control = full.y[control_idx]
        bench_idx = train
        y_bench = full.y_treatment[bench_idx]
        y_of_treated = full.y_treatment
    else:
        if full.treated is None:
            raise ValueError("data needs either a condition column or a treatment label column")
        treated_rows = rows[full.treated]
        if treated_rows.size == 0:
            raise ValueError("no treatment-condition rows in the data")
        train, test = _split(treated_rows, cfg.train_fraction, rng)
        control_idx = rows[~full.treated]
        qualified = train[sub[train]]
        y_control = full.y[control_idx]
        bench_idx = train
        y_bench = full.y[bench_idx]
        y_of_treated = full.y
    n_keep = qualified.size - int(round(cfg.discard * qualified.size))
    treatment_idx = np.sort(rng.permutation(qualified)[:n_keep])
    if treatment_idx.size == 0:
        raise ValueError("trial treatment set is empty; enlarge the sub-population")
    data = TrialDataset(
        X_control=full.X[control_idx], y_control=y_control,
        X_treatment=full.X[treatment_idx], y_treatment=y_of_treated[treatment_idx],
        trial_control=sub[control_idx])
    return TrialSplit(data=data, control_idx=control_idx, treatment_idx=treatment_idx,
                      test_idx=test, benchmark_idx=bench_idx, subpopulation=sub,
                      test=full.subset(test), X_benchmark=full.X[bench_idx], y_benchmark=y_bench)


def hyperparam_grid(grid: dict) -> list:
    """Grid points ordered lexicographically by ``(eta, lambda, gamma)``."""
    points = [Hyperparams(gamma=g, lam=lam, eta=e)
              for g, lam, e in itertools.product(grid["gamma"], grid["lambda"], grid["eta"])]
    if not points:
        raise ValueError("empty hyperparameter grid")
    return sorted(set(points), key=lambda h: (h.eta, h.lam, h.gamma))


def _score(model: JointLinearModel, X, y, scoring: str) -> float:
    if scoring == "r2":
        # on a fixed validation set the R^2 ordering is the negative MSE ordering
        resid = model.predict_treatment(X) - y
        return -float(resid @ resid) / y.size
    if scoring == "accuracy":
        return accuracy(model.classify(X), y)
    raise ValueError(f"unknown scoring {scoring!r}")


def validation_split(data: TrialDataset, validation_fraction: float, seed: int):
    """Hold out part of the trial treatment arm; returns ``(train, X_val, y_val)``."""
    m = data.n_treatment
    n_val = max(1, int(round(validation_fraction * m)))
    if m - n_val < 1:
        raise ValueError(f"trial treatment set of size {m} is too small to hold out validation data")
    perm = np.random.default_rng(seed).permutation(m)
    val, keep = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    train = TrialDataset(data.X_control, data.y_control, data.X_treatment[keep],
                         data.y_treatment[keep], data.trial_control)
    return train, data.X_treatment[val], data.y_treatment[val]


def select_best(candidates, fit: Callable, train, X_val, y_val, scoring="r2"):
    """First candidate (in the given order) with the best validation score."""
    best, best_score = None, -np.inf
    for cand in candidates:
        score = _score(fit(train, cand), X_val, y_val, scoring)
        if score > best_score:
            best, best_score = cand, score
    return best


def grid_search(data: TrialDataset, grid: dict, validation_fraction: float = 0.2, seed: int = 0,
                scoring: str = "r2", fit: Callable = fit_joint_ridge) -> Hyperparams:
    """Pick ``(gamma, lambda, eta)`` by validation on held-out trial treatment rows.

    Ties go to the smallest ``(eta, lambda, gamma)`` in lexicographic order.
    """
    train, X_val, y_val = validation_split(data, validation_fraction, seed)
    return select_best(hyperparam_grid(grid), fit, train, X_val, y_val, scoring)


@dataclass
class ResultsTable:
    """Per-task, per-method mean metrics plus percent of the benchmark."""

    rows: list
    methods: tuple = METHODS
    replications: list = field(default_factory=list)

    def value(self, task: str, method: str) -> float:
        for row in self.rows:
            if row["task"] == task:
                return row["values"][method]
        raise KeyError(task)

    def as_dict(self) -> dict:
        return {"methods": list(self.methods),
                "labels": {m: METHOD_LABELS[m] for m in self.methods},
                "rows": self.rows, "replications": self.replications}

    def format(self) -> str:
        head = f"{'task':<28}{'metric':<12}" + "".join(f"{METHOD_LABELS[m]:>10}" for m in self.methods)
        lines = [head]
        for row in self.rows:
            lines.append(f"{row['task']:<28}{row['metric']:<12}"
                         + "".join(f"{row['values'][m]:>10.3f}" for m in self.methods))
            if row["percent_of_benchmark"] is not None:
                lines.append(f"{'':<28}{'% bench.':<12}"
                             + "".join(f"{row['percent_of_benchmark'][m]:>9.0f}%"
                                       for m in self.methods))
        return "\n".join(lines)


def _task_name(task: dict) -> str:
    kind = task["kind"]
    if kind == "classification":
        return f"classification@q{task['quantile']:g}"
    return kind


def _fit_all(split: TrialSplit, grid: dict, cfg: SplitConfig, seed: int):
    data = split.data
    train, X_val, y_val = validation_split(data, cfg.validation_fraction, seed)
    lams = sorted(set(grid["lambda"]))
    hps = hyperparam_grid(grid)
    # the pooled column keeps its documented default weight and tunes lambda only
    pooled_grid = [Hyperparams(cfg.pooled_gamma, lam, 1.0) for lam in lams]

    chosen = {
        "treatment_only": select_best(lams, fit_treatment_only, train, X_val, y_val),
        "control_only": select_best(lams, fit_control_only, train, X_val, y_val),
        "pooled": select_best(pooled_grid, fit_pooled, train, X_val, y_val),
        "delta": select_best(hps, fit_joint_ridge, train, X_val, y_val),
    }
    models = {
        "treatment_only": fit_treatment_only(data, chosen["treatment_only"]),
        "control_only": fit_control_only(data, chosen["control_only"]),
        "pooled": fit_pooled(data, chosen["pooled"]),
        "delta": fit_joint_ridge(data, chosen["delta"]),
    }
    # the benchmark tunes on its own held-out share of the large treatment set
    n = split.y_benchmark.size
    perm = np.random.default_rng(seed + 7919).permutation(n)
    n_val = max(1, int(round(cfg.validation_fraction * n)))
    bval, btrain = perm[:n_val], perm[n_val:]
    best, best_score = None, -np.inf
    for lam in lams:
        m = fit_benchmark(split.X_benchmark[btrain], split.y_benchmark[btrain], lam)
        s = _score(m, split.X_benchmark[bval], split.y_benchmark[bval], "r2")
        if s > best_score:
            best, best_score = lam, s
    chosen["benchmark"] = best
    models["benchmark"] = fit_benchmark(split.X_benchmark, split.y_benchmark, best)
    return models, chosen


def _evaluate(models, split: TrialSplit, tasks) -> dict:
    test = split.test
    y_test = test.y_treatment if test.dual_label else test.y
    out = {}
    for task in tasks:
        name = _task_name(task)
        kind = task["kind"]
        if kind == "regression":
            out[name] = {m: r2(models[m].predict_treatment(test.X), y_test) for m in METHODS}
        elif kind == "classification":
            thr = float(np.quantile(split.y_benchmark, task["quantile"]))
            truth = np.where(y_test >= thr, 1.0, -1.0)
            out[name] = {m: accuracy(models[m].classify(test.X, threshold=thr), truth)
                         for m in METHODS}
        elif kind == "effect":
            if not test.dual_label:
                continue
            effect = test.y_treatment - test.y
            out[name] = {m: r2(models[m].predict_effect(test.X), effect) for m in METHODS}
        elif kind == "mean_effect":
            if not test.dual_label:
                continue
            out[name] = {m: mean_effect_abs_diff(models[m], test.X, test.y_treatment, test.y)
                         for m in METHODS}
        else:
            raise ValueError(f"unknown task kind {kind!r}")
    return out


_METRIC = {"regression": "r2", "classification": "accuracy", "effect": "r2",
           "mean_effect": "abs_diff"}


def _standardized(split: TrialSplit) -> TrialSplit:
    """Scale every part of a split with statistics of its training rows only
    (control set plus trial treatment arm)."""
    d = split.data
    train = Dataset(X=np.vstack([d.X_control, d.X_treatment]), y=np.zeros(0),
                    feature_names=split.test.feature_names, ids=np.zeros(0), source_rows=np.zeros(0))
    (_, ), scaler = standardize(train)
    t = scaler.transform
    return replace(
        split,
        data=TrialDataset(t(d.X_control), d.y_control, t(d.X_treatment), d.y_treatment,
                          d.trial_control),
        test=replace(split.test, X=t(split.test.X), scaled=True),
        X_benchmark=t(split.X_benchmark))


def run_replication(full: Dataset, cfg: SplitConfig, grid: dict, tasks, seed: int) -> dict:
    split = _standardized(simulate_trial_split(full, cfg, seed))
    models, chosen = _fit_all(split, grid, cfg, seed)
    return {
        "seed": seed,
        "sizes": {"control": int(split.data.n_control),
                  "trial_control": int(split.data.trial_control.sum()),
                  "trial_treatment": int(split.data.n_treatment),
                  "benchmark": int(split.y_benchmark.size),
                  "test": int(split.test_idx.size)},
        "hyperparams": {
            "delta": chosen["delta"].as_dict(),
            "pooled": {"gamma": chosen["pooled"].gamma, "lambda": chosen["pooled"].lam},
            "treatment_only": {"lambda": chosen["treatment_only"]},
            "control_only": {"lambda": chosen["control_only"]},
            "benchmark": {"lambda": chosen["benchmark"]},
        },
        "metrics": _evaluate(models, split, tasks),
    }


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CF_JOINT_THREADS", "1")))
    except ValueError:
        return 1


def run_benchmark(full: Dataset, cfg: SplitConfig, grid: Optional[dict] = None,
                  tasks=({"kind": "regression"},)) -> ResultsTable:
    """Replicate split, select, fit and evaluate over ``cfg.replications`` seeds.

    Replication ``i`` uses seed ``cfg.seed + i``; they are independent and
    run on up to ``CF_JOINT_THREADS`` threads, reduced in index order.
    """
    grid = grid or DEFAULT_GRID
    tasks = [dict(t) for t in tasks]
    seeds = [cfg.seed + i for i in range(cfg.replications)]
    workers = min(_threads(), len(seeds))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reps = list(pool.map(lambda s: run_replication(full, cfg, grid, tasks, s), seeds))
    else:
        reps = [run_replication(full, cfg, grid, tasks, s) for s in seeds]

    rows = []
    for task in tasks:
        name = _task_name(task)
        per = [r["metrics"][name] for r in reps if name in r["metrics"]]
        if not per:
            continue
        means = {m: float(np.mean([p[m] for p in per])) for m in METHODS}
        pct = None
        if task["kind"] != "mean_effect" and means["benchmark"] != 0:
            pct = {m: 100.0 * means[m] / means["benchmark"] for m in METHODS}
        rows.append({"task": name, "metric": _METRIC[task["kind"]], "values": means,
                     "percent_of_benchmark": pct})
    return ResultsTable(rows=rows, replications=reps)
