"""Shared domain types and the prediction surface of a fitted joint model.

Sign convention used everywhere in the package: ``w_delta`` models
``y_c - y_t`` (the negative of the individual treatment effect), so the
control predictor is ``w_c = w_t + w_delta`` and the treatment effect
``y_t - y_c`` is predicted as ``-<w_delta, x>``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class Condition(enum.Enum):
    CONTROL = "control"
    TREATMENT = "treatment"


class _Caseless(enum.Enum):
    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            for member in cls:
                if member.value == value.lower():
                    return member
        return None


class Loss(_Caseless):
    SQUARED = "squared"
    LOGISTIC = "logistic"


class Penalty(_Caseless):
    SQL2 = "sql2"
    L1 = "l1"


@dataclass(frozen=True)
class Hyperparams:
    """Meta-parameters of the joint objective.

    ``gamma`` balances the trial-treatment loss against the historical
    control loss, ``lam`` regularizes ``w_t`` and ``eta`` regularizes
    ``w_delta`` (the linkage strength between the two predictors).
    """

    gamma: float = 0.5
    lam: float = 1.0
    eta: float = 1.0

    def __post_init__(self):
        for name in ("gamma", "lam", "eta"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.lam <= 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if self.eta <= 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")

    @property
    def c3(self) -> float:
        return math.sqrt(self.lam / self.eta)

    def as_dict(self) -> dict:
        return {"gamma": self.gamma, "lambda": self.lam, "eta": self.eta}

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        lam = d["lambda"] if "lambda" in d else d["lam"]
        return cls(gamma=float(d["gamma"]), lam=float(lam), eta=float(d["eta"]))


@dataclass(frozen=True)
class LossSpec:
    loss: Loss = Loss.SQUARED
    q_reg: Penalty = Penalty.SQL2
    r_reg: Penalty = Penalty.SQL2

    def __post_init__(self):
        # accept plain strings for convenience
        object.__setattr__(self, "loss", Loss(self.loss))
        object.__setattr__(self, "q_reg", Penalty(self.q_reg))
        object.__setattr__(self, "r_reg", Penalty(self.r_reg))

    @property
    def is_smooth(self) -> bool:
        return self.q_reg is Penalty.SQL2 and self.r_reg is Penalty.SQL2


def _as_matrix(X, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if X.size else X.reshape(0, 0)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or Inf")
    return X


def _as_labels(y, n: int, name: str) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != n:
        raise ValueError(f"{name} has {y.shape[0]} labels for {n} rows")
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains NaN or Inf")
    return y


@dataclass
class TrialDataset:
    """The three labeled sample sets of a trial plus the historical data.

    ``X_control``/``y_control`` hold every control-condition example (the
    large historical set, which also contains the trial's control arm);
    ``trial_control`` optionally flags which of those rows came from the
    trial. ``X_treatment``/``y_treatment`` is the small trial treatment arm.
    """

    X_control: np.ndarray
    y_control: np.ndarray
    X_treatment: np.ndarray
    y_treatment: np.ndarray
    trial_control: Optional[np.ndarray] = None

    def __post_init__(self):
        Xc = np.asarray(self.X_control, dtype=float)
        Xt = np.asarray(self.X_treatment, dtype=float)
        # allow one empty block declared as a flat list
        if Xc.size == 0 and Xt.ndim == 2:
            Xc = Xc.reshape(0, Xt.shape[1])
        if Xt.size == 0 and Xc.ndim == 2:
            Xt = Xt.reshape(0, Xc.shape[1])
        self.X_control = _as_matrix(Xc, "X_control")
        self.X_treatment = _as_matrix(Xt, "X_treatment")
        if self.X_control.shape[1] != self.X_treatment.shape[1]:
            raise ValueError(
                "control and treatment features disagree on dimension: "
                f"{self.X_control.shape[1]} vs {self.X_treatment.shape[1]}")
        self.y_control = _as_labels(self.y_control, self.X_control.shape[0], "y_control")
        self.y_treatment = _as_labels(self.y_treatment, self.X_treatment.shape[0], "y_treatment")
        if self.trial_control is not None:
            mask = np.asarray(self.trial_control, dtype=bool).ravel()
            if mask.shape[0] != self.X_control.shape[0]:
                raise ValueError("trial_control mask must have one entry per control row")
            self.trial_control = mask

    @property
    def dimension(self) -> int:
        return self.X_control.shape[1]

    @property
    def n_control(self) -> int:
        return self.X_control.shape[0]

    @property
    def n_treatment(self) -> int:
        return self.X_treatment.shape[0]


@dataclass(frozen=True)
class JointLinearModel:
    """Fitted pair ``(w_t, w_delta)``; immutable once built."""

    w_t: np.ndarray
    w_delta: np.ndarray = field(default=None)

    def __post_init__(self):
        w_t = np.array(self.w_t, dtype=float).ravel()
        w_delta = (np.zeros_like(w_t) if self.w_delta is None
                   else np.array(self.w_delta, dtype=float).ravel())
        if w_t.shape != w_delta.shape:
            raise ValueError(f"w_t and w_delta lengths differ: {w_t.size} vs {w_delta.size}")
        if not (np.all(np.isfinite(w_t)) and np.all(np.isfinite(w_delta))):
            raise ValueError("model weights must be finite")
        w_t.setflags(write=False)
        w_delta.setflags(write=False)
        object.__setattr__(self, "w_t", w_t)
        object.__setattr__(self, "w_delta", w_delta)

    @property
    def dimension(self) -> int:
        return self.w_t.shape[0]

    @property
    def w_c(self) -> np.ndarray:
        return self.w_t + self.w_delta

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimension:
            raise ValueError(
                f"expected {self.dimension} features, got {x.shape[-1]}")
        return x

    def predict_treatment(self, x):
        """``<w_t, x>`` for a single vector or each row of a matrix."""
        return self._check(x) @ self.w_t

    def predict_control(self, x):
        """``<w_t + w_delta, x>``."""
        return self._check(x) @ self.w_c

    def predict_effect(self, x):
        """Predicted individual treatment effect ``y_t - y_c``."""
        return self.predict_treatment(x) - self.predict_control(x)

    def classify(self, x, condition=Condition.TREATMENT, threshold: float = 0.0):
        """Sign of the chosen condition's score; a score exactly at the
        threshold maps to +1."""
        condition = Condition(condition)
        score = (self.predict_treatment(x) if condition is Condition.TREATMENT
                 else self.predict_control(x))
        return np.where(np.asarray(score) - threshold >= 0, 1.0, -1.0)
