"""Synthetic data with both potential outcomes per row.

Stands in for A/B-test logs where every item has a control and a treatment
label and a popularity (frequency) that decides whether a short trial would
observe it.
"""
from __future__ import annotations

import numpy as np

from .ingest import INTERCEPT, Dataset


def sparse_delta(d: int, n_nonzero: int, magnitude: float, rng) -> np.ndarray:
    w = np.zeros(d)
    support = rng.choice(d, size=n_nonzero, replace=False)
    w[support] = magnitude * rng.choice([-1.0, 1.0], size=n_nonzero)
    return w


def make_dual_label(n: int = 1500, d: int = 100, *, seed: int = 0, noise: float = 0.1,
                    delta_nonzero: int = 3, delta_scale: float = 0.5,
                    mean_effect: float = -0.4, popularity_bias: float = 1.0,
                    return_truth: bool = False):
    """Rows ``x`` (plus intercept) with ``y_c = <w_c, x> + e`` and
    ``y_t = y_c - <w_delta, x> + e'``.

    ``w_delta`` is sparse with ``delta_nonzero`` feature coordinates of size
    ``delta_scale`` and an intercept entry of ``-mean_effect`` so that the
    average treatment effect is about ``mean_effect``. Frequencies are
    log-normal and depend on the features (strength ``popularity_bias``),
    so the popular items form a biased sub-population. With
    ``return_truth`` the generating ``(w_c, w_delta)`` are returned too.
    """
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((n, d))
    X = np.hstack([F, np.ones((n, 1))])
    w_c = np.append(rng.standard_normal(d) / np.sqrt(d) * 2.0, 1.0)
    w_delta = np.append(sparse_delta(d, delta_nonzero, delta_scale, rng), -mean_effect)
    y_c = X @ w_c + noise * rng.standard_normal(n)
    y_t = y_c - X @ w_delta + noise * rng.standard_normal(n)
    pop_dir = rng.standard_normal(d)
    pop_dir /= np.linalg.norm(pop_dir)
    frequency = np.exp(popularity_bias * (F @ pop_dir) + 0.5 * rng.standard_normal(n))
    names = [f"x{k}" for k in range(d)] + [INTERCEPT]
    ds = Dataset(X=X, y=y_c, feature_names=names, ids=np.array([str(i) for i in range(n)], dtype=object),
                 source_rows=np.arange(n), y_treatment=y_t, frequency=frequency)
    if return_truth:
        return ds, (w_c, w_delta)
    return ds
