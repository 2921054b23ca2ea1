"""Exact solution of the squared-loss / ridge joint objective.

The joint problem over ``(w_t, w_delta)`` is rewritten as one canonical
ridge regression over a ``2d``-dimensional weight vector by stacking
treatment rows ``c1 * (x, 0)`` and control rows ``c2 * (x, -c3 * x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .model import Hyperparams, JointLinearModel, TrialDataset


@dataclass(frozen=True)
class ExpandedDesign:
    X: np.ndarray
    Y: np.ndarray
    alpha: float
    c1: float
    c2: float
    c3: float


def build_expanded_design(data: TrialDataset, hp: Hyperparams) -> ExpandedDesign:
    """Stack the trial-treatment and control rows into one ridge design.

    A block whose weight is exactly zero (``gamma`` of 0 or 1) is dropped
    rather than kept as rows of zeros.
    """
    d = data.dimension
    use_treatment = hp.gamma > 0
    use_control = hp.gamma < 1
    if use_treatment and data.n_treatment == 0:
        raise ValueError("gamma > 0 requires a nonempty trial treatment set")
    if use_control and data.n_control == 0:
        raise ValueError("gamma < 1 requires a nonempty control set")

    c1 = math.sqrt(hp.gamma / data.n_treatment) if use_treatment else 0.0
    c2 = math.sqrt((1.0 - hp.gamma) / data.n_control) if use_control else 0.0
    c3 = hp.c3

    blocks, labels = [], []
    if use_treatment:
        Xt = data.X_treatment
        blocks.append(c1 * np.hstack([Xt, np.zeros_like(Xt)]))
        labels.append(c1 * data.y_treatment)
    if use_control:
        Xc = data.X_control
        blocks.append(c2 * np.hstack([Xc, -c3 * Xc]))
        labels.append(c2 * data.y_control)
    X = np.vstack(blocks) if blocks else np.zeros((0, 2 * d))
    Y = np.concatenate(labels) if labels else np.zeros(0)
    return ExpandedDesign(X=X, Y=Y, alpha=hp.lam, c1=c1, c2=c2, c3=c3)


def solve_ridge(X, Y, alpha: float) -> np.ndarray:
    """Minimizer of ``||X w - Y||^2 + alpha ||w||^2``.

    Solved through a Cholesky factorization of ``X^T X + alpha I``.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValueError("ridge design contains NaN or Inf")
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    A = X.T @ X
    A[np.diag_indices_from(A)] += alpha
    return linalg.cho_solve(linalg.cho_factor(A, lower=True), X.T @ Y)


def extract_models(w_hat, c3: float) -> JointLinearModel:
    """Map the stacked ridge solution back to ``(w_t, w_delta)``.

    The second half multiplies ``-c3 * x`` on control rows, so the control
    score is ``<w_t - c3 * v, x>``; with ``w_delta = -c3 * v`` that score is
    ``<w_t + w_delta, x>`` and ``lam * ||v||^2 = eta * ||w_delta||^2``.
    """
    w_hat = np.asarray(w_hat, dtype=float).ravel()
    if w_hat.size % 2:
        raise ValueError(f"stacked weight vector must have even length, got {w_hat.size}")
    if c3 <= 0:
        raise ValueError("c3 must be positive")
    d = w_hat.size // 2
    return JointLinearModel(w_t=w_hat[:d], w_delta=-c3 * w_hat[d:])


def fit_joint_ridge(data: TrialDataset, hp: Hyperparams) -> JointLinearModel:
    """Global minimizer of the joint objective with squared loss and
    squared-l2 penalties on both ``w_t`` and ``w_delta``."""
    design = build_expanded_design(data, hp)
    w_hat = solve_ridge(design.X, design.Y, design.alpha)
    model = extract_models(w_hat, design.c3)
    if hp.gamma == 1:
        # delta only meets its own penalty here, so it is exactly zero
        model = JointLinearModel(w_t=model.w_t)
    return model


def ridge(X, y, lam: float, sample_weight=None) -> np.ndarray:
    """Mean-normalized ridge: ``min_w (1/n) sum s_i (<w,x_i> - y_i)^2 + lam ||w||^2``.

    With ``sample_weight`` the weights replace ``1/n``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    if n == 0:
        raise ValueError("ridge needs at least one sample")
    s = np.full(n, 1.0 / n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    root = np.sqrt(s)
    return solve_ridge(X * root[:, None], y * root, lam)
