"""Kernel ridge regression over the expanded joint representation.

Trial-treatment points are embedded as ``(phi(x), 0)`` and control points as
``(phi(x), -c * phi(x))`` with ``c = sqrt(lam / eta)``. The inner product of
two embedded points is the base kernel scaled by ``1 + c**2`` when both are
control points and left unscaled otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist
from sklearn.metrics.pairwise import linear_kernel, polynomial_kernel

from .model import Condition, Hyperparams, TrialDataset

MAX_TRAINING_POINTS = 20_000


@dataclass(frozen=True)
class KernelSpec:
    """Base kernel plus the control scaling constant ``c``.

    ``base`` is one of ``"linear"``, ``"rbf"`` (``exp(-|x-x'|^2 / (2 width^2))``)
    or ``"polynomial"`` (``(<x,x'> + offset) ** degree``).
    """

    base: str = "linear"
    c: float = 1.0
    width: float = 1.0
    degree: int = 2
    offset: float = 1.0

    def __post_init__(self):
        if self.base not in ("linear", "rbf", "polynomial"):
            raise ValueError(f"unknown base kernel {self.base!r}")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.base == "rbf" and self.width <= 0:
            raise ValueError("rbf width must be positive")
        if self.base == "polynomial" and self.degree < 1:
            raise ValueError("polynomial degree must be >= 1")

    @classmethod
    def for_hyperparams(cls, hp: Hyperparams, base="linear", **kw) -> "KernelSpec":
        return cls(base=base, c=math.sqrt(hp.lam / hp.eta), **kw)

    def base_gram(self, A, B) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if self.base == "linear":
            return linear_kernel(A, B)
        if self.base == "rbf":
            # direct differences keep the Gram exactly symmetric
            return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * self.width ** 2))
        return polynomial_kernel(A, B, degree=self.degree, gamma=1.0, coef0=self.offset)

    def as_dict(self) -> dict:
        return {"base": self.base, "c": self.c, "width": self.width,
                "degree": self.degree, "offset": self.offset}


def _scale(is_control_a, is_control_b, c: float) -> np.ndarray:
    a = np.asarray(is_control_a, dtype=bool)[:, None]
    b = np.asarray(is_control_b, dtype=bool)[None, :]
    return np.where(a & b, 1.0 + c * c, 1.0)


def expanded_kernel(x, cond, x2, cond2, spec: KernelSpec) -> float:
    """Kernel value between two condition-tagged points."""
    both_control = Condition(cond) is Condition.CONTROL and Condition(cond2) is Condition.CONTROL
    g = 1.0 + spec.c ** 2 if both_control else 1.0
    return float(g * spec.base_gram(x, x2)[0, 0])


def expanded_gram(XA, control_A, XB, control_B, spec: KernelSpec) -> np.ndarray:
    return _scale(control_A, control_B, spec.c) * spec.base_gram(XA, XB)


@dataclass(frozen=True)
class KernelModel:
    dual_coeffs: np.ndarray
    X_train: np.ndarray
    is_control: np.ndarray
    spec: KernelSpec
    ridge_alpha: float

    def __post_init__(self):
        if self.dual_coeffs.shape[0] != self.X_train.shape[0]:
            raise ValueError("one dual coefficient per training point is required")

    @property
    def dimension(self) -> int:
        return self.X_train.shape[1]


def fit_kernel_joint(data: TrialDataset, hp: Hyperparams, spec: KernelSpec) -> KernelModel:
    """Weighted kernel ridge in the expanded space.

    Minimizes ``sum_i s_i (f(x_i) - y_i)^2 + lam ||f||^2`` with per-sample
    weights ``s_i = gamma / M_t`` on treatment points and ``(1 - gamma) / M``
    on control points. Points with zero weight are left out. Solved in the
    symmetric form ``(S^1/2 K S^1/2 + lam I) b = S^1/2 y``, ``a = S^1/2 b``.
    """
    Xs, ys, ws, ctrl = [], [], [], []
    if hp.gamma > 0:
        if data.n_treatment == 0:
            raise ValueError("gamma > 0 requires a nonempty trial treatment set")
        Xs.append(data.X_treatment)
        ys.append(data.y_treatment)
        ws.append(np.full(data.n_treatment, hp.gamma / data.n_treatment))
        ctrl.append(np.zeros(data.n_treatment, dtype=bool))
    if hp.gamma < 1:
        if data.n_control == 0:
            raise ValueError("gamma < 1 requires a nonempty control set")
        Xs.append(data.X_control)
        ys.append(data.y_control)
        ws.append(np.full(data.n_control, (1.0 - hp.gamma) / data.n_control))
        ctrl.append(np.ones(data.n_control, dtype=bool))
    X = np.vstack(Xs)
    y = np.concatenate(ys)
    s = np.concatenate(ws)
    is_control = np.concatenate(ctrl)
    n = X.shape[0]
    if n > MAX_TRAINING_POINTS:
        raise MemoryError(
            f"{n} training points exceeds the dense Gram limit of {MAX_TRAINING_POINTS}")

    K = expanded_gram(X, is_control, X, is_control, spec)
    root = np.sqrt(s)
    A = root[:, None] * K * root[None, :]
    A[np.diag_indices_from(A)] += hp.lam
    b = linalg.cho_solve(linalg.cho_factor(A, lower=True), root * y)
    return KernelModel(dual_coeffs=root * b, X_train=X, is_control=is_control,
                       spec=spec, ridge_alpha=hp.lam)


def kernel_predict(km: KernelModel, X, target=Condition.TREATMENT):
    """Predict the treatment or control outcome for one point or a matrix."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != km.dimension:
        raise ValueError(f"expected {km.dimension} features, got {X.shape[1]}")
    as_control = Condition(target) is Condition.CONTROL
    K = expanded_gram(X, np.full(X.shape[0], as_control), km.X_train, km.is_control, km.spec)
    out = K @ km.dual_coeffs
    return float(out[0]) if single else out
