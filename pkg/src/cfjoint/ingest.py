"""CSV ingestion: schema handling, feature encoding, hashed text features and
train-only standardization."""
from __future__ import annotations

import csv
import gzip
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

INTERCEPT = "intercept"

_TREATMENT_TOKENS = {"1", "true", "t", "yes", "y", "treatment", "treated"}
_CONTROL_TOKENS = {"0", "false", "f", "no", "n", "control"}

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class DataError(ValueError):
    """Input data or schema problem (bad file, missing column, bad cell)."""


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class HashedTextConfig:
    dimension: int = 256
    basic_stats: bool = True

    def __post_init__(self):
        if self.dimension < 2 or self.dimension & (self.dimension - 1):
            raise DataError(f"hash dimension must be a power of two >= 2, got {self.dimension}")

    @property
    def width(self) -> int:
        return self.dimension + (5 if self.basic_stats else 0)


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def hash_text_features(tokens, cfg: HashedTextConfig) -> np.ndarray:
    """Signed hashed bag of words, optionally followed by five basic stats.

    Each token's UTF-8 bytes go through 64-bit FNV-1a; the bucket is the hash
    modulo ``cfg.dimension`` and the sign is -1 when bit 63 is set. The stats
    are character count of the space-joined text, token count, shortest and
    longest token length and a 0/1 flag for any numeric token.
    """
    vec = np.zeros(cfg.dimension)
    for tok in tokens:
        h = fnv1a_64(tok.encode("utf-8"))
        vec[h % cfg.dimension] += -1.0 if h >> 63 else 1.0
    if not cfg.basic_stats:
        return vec
    lengths = [len(t) for t in tokens]
    stats = [
        float(sum(lengths) + max(len(tokens) - 1, 0)),
        float(len(tokens)),
        float(min(lengths, default=0)),
        float(max(lengths, default=0)),
        float(any(_is_number(t) for t in tokens)),
    ]
    return np.concatenate([vec, stats])


@dataclass(frozen=True)
class FeatureColumn:
    name: str
    kind: str = "numeric"  # numeric | categorical | text

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical", "text"):
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class DatasetSchema:
    feature_columns: tuple
    label_column: str
    condition_column: Optional[str] = None
    treatment_label_column: Optional[str] = None
    group_column: Optional[str] = None
    frequency_column: Optional[str] = None
    id_column: Optional[str] = None
    trial_column: Optional[str] = None
    treatment_values: Optional[tuple] = None
    control_values: Optional[tuple] = None
    label_transform: Optional[dict] = None
    text_hashing: HashedTextConfig = HashedTextConfig()
    row_filter: Optional[dict] = None

    def __post_init__(self):
        if self.label_transform is not None:
            kind = self.label_transform.get("kind")
            if kind not in (None, "none", "log_eps"):
                raise DataError(f"unknown label transform {kind!r}")
            if kind == "log_eps" and not float(self.label_transform.get("eps", 0)) > 0:
                raise DataError("log_eps transform needs eps > 0")

    @property
    def dual_label(self) -> bool:
        return self.treatment_label_column is not None

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        try:
            cols = tuple(FeatureColumn(c["name"], c.get("kind", "numeric"))
                         if isinstance(c, dict) else FeatureColumn(c)
                         for c in d["feature_columns"])
            label = d["label_column"]
        except (KeyError, TypeError) as exc:
            raise DataError(f"schema is missing a required field: {exc}") from None
        th = d.get("text_hashing") or {}
        return cls(
            feature_columns=cols,
            label_column=label,
            condition_column=d.get("condition_column"),
            treatment_label_column=d.get("treatment_label_column"),
            group_column=d.get("group_column"),
            frequency_column=d.get("frequency_column"),
            id_column=d.get("id_column"),
            trial_column=d.get("trial_column"),
            treatment_values=tuple(d["treatment_values"]) if d.get("treatment_values") else None,
            control_values=tuple(d["control_values"]) if d.get("control_values") else None,
            label_transform=d.get("label_transform"),
            text_hashing=HashedTextConfig(int(th.get("dimension", 256)),
                                          bool(th.get("basic_stats", True))),
            row_filter=d.get("row_filter"),
        )

    def to_dict(self) -> dict:
        out = {
            "feature_columns": [{"name": c.name, "kind": c.kind} for c in self.feature_columns],
            "label_column": self.label_column,
            "text_hashing": {"dimension": self.text_hashing.dimension,
                             "basic_stats": self.text_hashing.basic_stats},
        }
        for key in ("condition_column", "treatment_label_column", "group_column",
                    "frequency_column", "id_column", "trial_column", "label_transform",
                    "row_filter"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        for key in ("treatment_values", "control_values"):
            if getattr(self, key) is not None:
                out[key] = list(getattr(self, key))
        return out

    def transform_label(self, y: np.ndarray) -> np.ndarray:
        t = self.label_transform
        if t and t.get("kind") == "log_eps":
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.log(y + float(t["eps"]))
        return y


def load_schema(path) -> DatasetSchema:
    try:
        with open(path, encoding="utf-8") as fh:
            return DatasetSchema.from_dict(json.load(fh))
    except OSError as exc:
        raise DataError(f"cannot read schema {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"schema {path} is not valid JSON: {exc}") from None


def _open_text(path):
    path = str(path)
    if path.endswith(".gz"):
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, encoding="utf-8", newline="")


def read_table(path):
    """Header and raw string rows of a CSV file (optionally gzipped)."""
    try:
        with _open_text(path) as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise DataError(f"{path}: empty file, a header row is required")
            rows = [r for r in reader if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    except csv.Error as exc:
        raise DataError(f"{path}: malformed CSV: {exc}") from None
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise DataError(f"{path}: row {i + 1} has {len(r)} fields, header has {len(header)}")
    return header, rows


@dataclass
class FeatureEncoder:
    """Column-to-feature mapping; categorical levels are fixed at fit time in
    order of first appearance. An all-ones intercept column comes last."""

    schema: DatasetSchema
    categories: dict = field(default_factory=dict)

    def fit(self, header, rows) -> "FeatureEncoder":
        cats = {}
        for col in self.schema.feature_columns:
            if col.kind == "categorical":
                j = header.index(col.name)
                cats[col.name] = list(dict.fromkeys(r[j] for r in rows))
        self.categories = cats
        return self

    def feature_names(self) -> list:
        names = []
        for col in self.schema.feature_columns:
            if col.kind == "numeric":
                names.append(col.name)
            elif col.kind == "categorical":
                names.extend(f"{col.name}={v}" for v in self.categories[col.name])
            else:
                cfg = self.schema.text_hashing
                names.extend(f"{col.name}#h{k}" for k in range(cfg.dimension))
                if cfg.basic_stats:
                    names.extend(f"{col.name}#{s}" for s in
                                 ("chars", "tokens", "min_tok", "max_tok", "numeric"))
        names.append(INTERCEPT)
        return names

    def transform(self, header, rows, path="<data>") -> np.ndarray:
        blocks = []
        for col in self.schema.feature_columns:
            j = header.index(col.name)
            if col.kind == "numeric":
                blocks.append(_parse_numeric(rows, j, col.name, path)[:, None])
            elif col.kind == "categorical":
                levels = {v: k for k, v in enumerate(self.categories[col.name])}
                block = np.zeros((len(rows), len(levels)))
                for i, r in enumerate(rows):
                    k = levels.get(r[j])
                    if k is not None:
                        block[i, k] = 1.0
                blocks.append(block)
            else:
                cfg = self.schema.text_hashing
                blocks.append(np.array([hash_text_features(r[j].lower().split(), cfg)
                                        for r in rows]).reshape(len(rows), cfg.width))
        blocks.append(np.ones((len(rows), 1)))
        return np.hstack(blocks)

    def to_dict(self) -> dict:
        return {"schema": self.schema.to_dict(), "categories": self.categories}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureEncoder":
        return cls(schema=DatasetSchema.from_dict(d["schema"]), categories=d["categories"])


def _parse_numeric(rows, j, name, path) -> np.ndarray:
    out = np.empty(len(rows))
    for i, r in enumerate(rows):
        try:
            v = float(r[j])
        except ValueError:
            raise DataError(f"{path}: row {i + 1}, column {name!r}: "
                            f"cannot parse {r[j]!r} as a number") from None
        if not math.isfinite(v):
            raise DataError(f"{path}: row {i + 1}, column {name!r}: non-finite value {r[j]!r}")
        out[i] = v
    return out


@dataclass
class Dataset:
    """Encoded rows of one file.

    ``y`` is the observed label (the control label for dual-label data),
    ``treated`` the condition of each row when the data is condition tagged,
    and ``y_treatment`` the treatment label when each row carries both.
    ``source_rows`` indexes the kept rows in the raw file.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: list
    ids: np.ndarray
    source_rows: np.ndarray
    treated: Optional[np.ndarray] = None
    y_treatment: Optional[np.ndarray] = None
    group: Optional[np.ndarray] = None
    frequency: Optional[np.ndarray] = None
    trial: Optional[np.ndarray] = None
    encoder: Optional[FeatureEncoder] = None
    scaled: bool = False

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def dimension(self) -> int:
        return self.X.shape[1]

    @property
    def dual_label(self) -> bool:
        return self.y_treatment is not None

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        pick = lambda a: None if a is None else a[idx]  # noqa: E731
        return replace(self, X=self.X[idx], y=self.y[idx], ids=self.ids[idx],
                       source_rows=self.source_rows[idx], treated=pick(self.treated),
                       y_treatment=pick(self.y_treatment), group=pick(self.group),
                       frequency=pick(self.frequency), trial=pick(self.trial))


def _condition_mask(values, schema: DatasetSchema, path) -> np.ndarray:
    treat = {v.lower() for v in schema.treatment_values} if schema.treatment_values else _TREATMENT_TOKENS
    ctrl = {v.lower() for v in schema.control_values} if schema.control_values else _CONTROL_TOKENS
    out = np.empty(len(values), dtype=bool)
    for i, v in enumerate(values):
        key = v.strip().lower()
        if key in treat:
            out[i] = True
        elif key in ctrl:
            out[i] = False
        else:
            raise DataError(f"{path}: row {i + 1}: unknown condition value {v!r}")
    return out


def load_csv(path, schema: DatasetSchema, encoder: Optional[FeatureEncoder] = None,
             table=None, require_labels: bool = True) -> Dataset:
    """Parse and encode a CSV file according to ``schema``.

    When ``encoder`` is given its categorical levels are reused (prediction
    time); otherwise a new encoder is fitted on this file. ``table`` may
    carry an already-read ``(header, rows)`` pair. With ``require_labels``
    off, files without label or condition columns load with NaN labels.
    """
    header, rows = table if table is not None else read_table(path)
    needed = [c.name for c in schema.feature_columns]
    optional = ("label_column", "treatment_label_column", "condition_column", "trial_column")
    for key in optional + ("group_column", "frequency_column", "id_column", "trial_column"):
        name = getattr(schema, key)
        if not name or (not require_labels and key in optional and name not in header):
            continue
        needed.append(name)
    if schema.row_filter:
        needed.append(schema.row_filter["column"])
    missing = [c for c in dict.fromkeys(needed) if c not in header]
    if missing:
        raise DataError(f"{path}: missing column(s) {', '.join(map(repr, missing))}")

    source = np.arange(len(rows))
    if schema.row_filter:
        j = header.index(schema.row_filter["column"])
        keep = {str(v) for v in schema.row_filter["values"]}
        source = np.array([i for i, r in enumerate(rows) if r[j] in keep], dtype=int)
        rows = [rows[i] for i in source]
    if not rows:
        raise DataError(f"{path}: no data rows")

    if encoder is None:
        encoder = FeatureEncoder(schema).fit(header, rows)
    X = encoder.transform(header, rows, path)

    def col(name):
        j = header.index(name)
        return [r[j] for r in rows]

    labeled = schema.label_column in header
    y = (schema.transform_label(_parse_numeric(rows, header.index(schema.label_column),
                                               schema.label_column, path))
         if labeled else np.full(len(rows), np.nan))
    y_t = None
    if schema.treatment_label_column and schema.treatment_label_column in header:
        y_t = schema.transform_label(_parse_numeric(
            rows, header.index(schema.treatment_label_column), schema.treatment_label_column, path))
    if not ((not labeled or np.all(np.isfinite(y)))
            and (y_t is None or np.all(np.isfinite(y_t)))):
        raise DataError(f"{path}: label transform produced non-finite values")
    treated = (_condition_mask(col(schema.condition_column), schema, path)
               if schema.condition_column and schema.condition_column in header else None)
    trial = None
    if schema.trial_column and schema.trial_column in header:
        trial = _condition_mask(col(schema.trial_column),
                                replace(schema, treatment_values=None, control_values=None), path)
    freq = (_parse_numeric(rows, header.index(schema.frequency_column), schema.frequency_column, path)
            if schema.frequency_column else None)
    group = np.array(col(schema.group_column), dtype=object) if schema.group_column else None
    ids = (np.array(col(schema.id_column), dtype=object) if schema.id_column
           else np.array([str(i) for i in source], dtype=object))
    return Dataset(X=X, y=y, feature_names=encoder.feature_names(), ids=ids, source_rows=source,
                   treated=treated, y_treatment=y_t, group=group, frequency=freq, trial=trial,
                   encoder=encoder)


class Standardizer(TransformerMixin, BaseEstimator):
    """Per-feature centering and scaling with train-only statistics.

    Zero-variance features keep scale 1 and the intercept column (by name,
    or ``intercept_index``) is passed through untouched.
    """

    def __init__(self, intercept_index=-1):
        self.intercept_index = intercept_index

    def fit(self, X, y=None):
        X = check_array(X)
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        if self.intercept_index is not None:
            mean[self.intercept_index] = 0.0
            scale[self.intercept_index] = 1.0
        self.mean_ = mean
        self.scale_ = scale
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return (X - self.mean_) / self.scale_

    def to_dict(self) -> dict:
        return {"mean": self.mean_.tolist(), "scale": self.scale_.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        s = cls()
        s.mean_ = np.asarray(d["mean"], dtype=float)
        s.scale_ = np.asarray(d["scale"], dtype=float)
        s.n_features_in_ = s.mean_.size
        return s


def standardize(train: Dataset, *others: Dataset):
    """Fit a :class:`Standardizer` on ``train`` and apply it to every split.

    Returns ``(scaled_datasets, scaler)`` with ``scaled_datasets[0]`` the
    scaled training set. Already-scaled inputs are rejected.
    """
    for ds in (train, *others):
        if ds.scaled:
            raise ValueError("dataset is already standardized")
    idx = train.feature_names.index(INTERCEPT) if INTERCEPT in train.feature_names else None
    scaler = Standardizer(intercept_index=idx).fit(train.X)
    scaled = [replace(ds, X=scaler.transform(ds.X), scaled=True) for ds in (train, *others)]
    return scaled, scaler
