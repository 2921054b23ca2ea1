"""JSON model files.

A model file carries everything ``predict`` needs: the fitted weights (or
dual coefficients and training points for kernel models), the feature
encoder with its schema, and the standardizer statistics. Floats are
written with ``repr`` precision, so a saved and reloaded model predicts
bit-identically.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .ingest import DataError, FeatureEncoder, Standardizer
from .kernel import KernelModel, KernelSpec, kernel_predict
from .model import Condition, Hyperparams, JointLinearModel

FORMAT = "cfjoint-model"
VERSION = 1


@dataclass
class SavedModel:
    """A fitted model plus its preprocessing."""

    method: str
    model: Union[JointLinearModel, KernelModel]
    encoder: FeatureEncoder
    scaler: Optional[Standardizer] = None
    hyperparams: Optional[Hyperparams] = None

    def features(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return self.scaler.transform(X) if self.scaler is not None else X

    def predict(self, X, target=Condition.TREATMENT) -> np.ndarray:
        """Outcome predictions for raw encoded features ``X``."""
        Z = self.features(X)
        if isinstance(self.model, KernelModel):
            return kernel_predict(self.model, Z, target)
        if Condition(target) is Condition.CONTROL:
            return self.model.predict_control(Z)
        return self.model.predict_treatment(Z)

    def predict_all(self, X):
        """``(treatment, control, effect)`` predictions."""
        y_t = self.predict(X, Condition.TREATMENT)
        y_c = self.predict(X, Condition.CONTROL)
        return y_t, y_c, y_t - y_c

    def to_dict(self) -> dict:
        out = {
            "format": FORMAT,
            "version": VERSION,
            "method": self.method,
            "hyperparams": self.hyperparams.as_dict() if self.hyperparams else None,
            "encoder": self.encoder.to_dict(),
            "scaler": self.scaler.to_dict() if self.scaler is not None else None,
        }
        if isinstance(self.model, KernelModel):
            km = self.model
            out["kernel"] = {
                "spec": km.spec.as_dict(),
                "ridge_alpha": km.ridge_alpha,
                "dual_coeffs": km.dual_coeffs.tolist(),
                "X_train": km.X_train.tolist(),
                "is_control": km.is_control.astype(int).tolist(),
            }
        else:
            out["linear"] = {"w_t": self.model.w_t.tolist(),
                             "w_delta": self.model.w_delta.tolist()}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SavedModel":
        if d.get("format") != FORMAT:
            raise DataError("not a model file (missing format tag)")
        if d.get("version") != VERSION:
            raise DataError(f"unsupported model file version {d.get('version')!r}")
        try:
            if "kernel" in d:
                k = d["kernel"]
                model = KernelModel(
                    dual_coeffs=np.asarray(k["dual_coeffs"], dtype=float),
                    X_train=np.asarray(k["X_train"], dtype=float).reshape(
                        len(k["dual_coeffs"]), -1),
                    is_control=np.asarray(k["is_control"], dtype=bool),
                    spec=KernelSpec(**k["spec"]),
                    ridge_alpha=float(k["ridge_alpha"]))
            else:
                lin = d["linear"]
                model = JointLinearModel(w_t=np.asarray(lin["w_t"], dtype=float),
                                         w_delta=np.asarray(lin["w_delta"], dtype=float))
            hp = Hyperparams.from_dict(d["hyperparams"]) if d.get("hyperparams") else None
            scaler = Standardizer.from_dict(d["scaler"]) if d.get("scaler") else None
            return cls(method=d["method"], model=model,
                       encoder=FeatureEncoder.from_dict(d["encoder"]),
                       scaler=scaler, hyperparams=hp)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed model file: {exc}") from None


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def save_model(saved: SavedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(saved.to_dict()))


def load_model(path) -> SavedModel:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"model file {path} is not valid JSON: {exc}") from None
    return SavedModel.from_dict(d)
