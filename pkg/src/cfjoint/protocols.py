"""Benchmark configurations and the bundled dataset protocols.

A benchmark config is a JSON object with three keys::

    {"split": {...SplitConfig fields...},
     "grid": {"gamma": [...], "lambda": [...], "eta": [...]},
     "tasks": [{"kind": "regression"}, {"kind": "classification", "quantile": 0.9}]}

``housing`` ships with the package (King County house sales, renovated
houses as the treatment condition). ``diabetes`` needs the public
130-hospitals file, looked up in ``$CF_JOINT_DIABETES_CSV`` and then
``data/diabetic_data.csv``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .experiment import DEFAULT_GRID, SplitConfig
from .ingest import DataError, Dataset, DatasetSchema, load_csv

TASK_KINDS = ("regression", "classification", "effect", "mean_effect")
DIABETES_ENV = "CF_JOINT_DIABETES_CSV"


def _check_tasks(tasks) -> list:
    out = []
    for t in tasks:
        if not isinstance(t, dict) or t.get("kind") not in TASK_KINDS:
            raise ValueError(f"bad task {t!r}; kind must be one of {TASK_KINDS}")
        if t["kind"] == "classification":
            q = t.get("quantile")
            if not isinstance(q, (int, float)) or not 0 < q < 1:
                raise ValueError("classification tasks need a quantile in (0, 1)")
        out.append(dict(t))
    if not out:
        raise ValueError("no tasks given")
    return out


def check_grid(grid: dict) -> dict:
    try:
        out = {k: [float(v) for v in grid[k]] for k in ("gamma", "lambda", "eta")}
    except (KeyError, TypeError, ValueError):
        raise ValueError("grid needs numeric lists for gamma, lambda and eta") from None
    if not all(out.values()):
        raise ValueError("grid lists must be nonempty")
    return out


@dataclass
class BenchmarkConfig:
    split: SplitConfig = SplitConfig()
    grid: dict = field(default_factory=lambda: dict(DEFAULT_GRID))
    tasks: list = field(default_factory=lambda: [{"kind": "regression"}])

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkConfig":
        unknown = set(d) - {"split", "grid", "tasks"}
        if unknown:
            raise ValueError(f"unknown config key(s): {sorted(unknown)}")
        return cls(split=SplitConfig.from_dict(d.get("split", {})),
                   grid=check_grid(d.get("grid", DEFAULT_GRID)),
                   tasks=_check_tasks(d.get("tasks", [{"kind": "regression"}])))

    def as_dict(self) -> dict:
        return {"split": self.split.as_dict(), "grid": self.grid, "tasks": self.tasks}


def load_config(path) -> BenchmarkConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"config {path} is not valid JSON: {exc}") from None
    return BenchmarkConfig.from_dict(d)


def bundled(name: str) -> Path:
    """Path of a file shipped in ``cfjoint/datasets``."""
    return Path(str(resources.files("cfjoint") / "datasets" / name))


def _bundled_json(name: str) -> dict:
    return json.loads(bundled(name).read_text(encoding="utf-8"))


def diabetes_path(data: Optional[str] = None) -> Path:
    candidates = [data, os.environ.get(DIABETES_ENV), "data/diabetic_data.csv"]
    for c in candidates:
        if c and Path(c).is_file():
            return Path(c)
    raise DataError(
        "diabetes data not found; download diabetic_data.csv (Diabetes 130-US hospitals) "
        f"and pass --data or set {DIABETES_ENV}")


@dataclass
class Protocol:
    name: str
    data_path: Path
    schema: DatasetSchema
    config: BenchmarkConfig

    def load(self) -> Dataset:
        return load_csv(self.data_path, self.schema)


def load_protocol(name: str, data: Optional[str] = None) -> Protocol:
    """One of the bundled experiment setups, ``"housing"`` or ``"diabetes"``."""
    if name == "housing":
        path = Path(data) if data else bundled("kc_house_data.csv.gz")
    elif name == "diabetes":
        path = diabetes_path(data)
    else:
        raise ValueError(f"unknown protocol {name!r}; expected 'housing' or 'diabetes'")
    return Protocol(name=name, data_path=path,
                    schema=DatasetSchema.from_dict(_bundled_json(f"{name}_schema.json")),
                    config=BenchmarkConfig.from_dict(_bundled_json(f"{name}_benchmark.json")))
