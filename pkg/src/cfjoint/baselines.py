"""Comparison fits: each one is a ridge regression on some subset of the
available data and returns a :class:`JointLinearModel` with ``w_delta = 0``.
"""
from __future__ import annotations

import numpy as np

from .closed_form import ridge
from .model import Hyperparams, JointLinearModel, TrialDataset


def fit_treatment_only(data: TrialDataset, lam: float) -> JointLinearModel:
    if data.n_treatment == 0:
        raise ValueError("treatment-only fit needs a nonempty trial treatment set")
    return JointLinearModel(w_t=ridge(data.X_treatment, data.y_treatment, lam))


def fit_control_only(data: TrialDataset, lam: float) -> JointLinearModel:
    """Ridge on the control set, used as-is to predict treatment outcomes."""
    if data.n_control == 0:
        raise ValueError("control-only fit needs a nonempty control set")
    return JointLinearModel(w_t=ridge(data.X_control, data.y_control, lam))


def fit_pooled(data: TrialDataset, hp: Hyperparams) -> JointLinearModel:
    """One predictor over both sets, each set's loss weighted by ``gamma``
    and ``1 - gamma`` respectively."""
    Xs, ys, ws = [], [], []
    if hp.gamma > 0:
        if data.n_treatment == 0:
            raise ValueError("gamma > 0 requires a nonempty trial treatment set")
        Xs.append(data.X_treatment)
        ys.append(data.y_treatment)
        ws.append(np.full(data.n_treatment, hp.gamma / data.n_treatment))
    if hp.gamma < 1:
        if data.n_control == 0:
            raise ValueError("gamma < 1 requires a nonempty control set")
        Xs.append(data.X_control)
        ys.append(data.y_control)
        ws.append(np.full(data.n_control, (1.0 - hp.gamma) / data.n_control))
    w = ridge(np.vstack(Xs), np.concatenate(ys), hp.lam, sample_weight=np.concatenate(ws))
    return JointLinearModel(w_t=w)


def fit_disjoint(data: TrialDataset, hp: Hyperparams) -> JointLinearModel:
    """Decoupled limit of the joint objective (no linkage between the two
    predictors): ``w_t`` is ridge on the trial treatment set with penalty
    ``lam / gamma`` and ``w_c`` is least squares on the control set."""
    if not 0 < hp.gamma < 1:
        raise ValueError("the disjoint fit needs 0 < gamma < 1")
    w_t = ridge(data.X_treatment, data.y_treatment, hp.lam / hp.gamma)
    w_c, *_ = np.linalg.lstsq(data.X_control, data.y_control, rcond=None)
    return JointLinearModel(w_t=w_t, w_delta=w_c - w_t)


def fit_benchmark(X_treatment, y_treatment, lam: float) -> JointLinearModel:
    """Ridge on a large treatment-labeled set; only available in simulation."""
    X_treatment = np.asarray(X_treatment, dtype=float)
    if X_treatment.shape[0] == 0:
        raise ValueError("benchmark fit needs a nonempty treatment set")
    return JointLinearModel(w_t=ridge(X_treatment, y_treatment, lam))
