"""First-order solver for the joint objective with any supported loss and
penalty combination.

The objective is::

    gamma/M_t * sum_t L(<w_t, x>, y_t)
      + (1 - gamma)/M * sum_c L(<w_t + w_delta, x>, y_c)
      + lam * Q(w_t) + eta * R(w_delta)

Squared-l2 penalties are handled as part of the smooth term; l1 penalties
go through their proximal operator (soft thresholding).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from sklearn.exceptions import ConvergenceWarning

from .closed_form import ridge
from .model import Hyperparams, JointLinearModel, Loss, LossSpec, Penalty, TrialDataset


@dataclass(frozen=True)
class SolveConfig:
    max_iters: int = 20000
    step_size: float = 1.0
    tolerance: float = 1e-10
    seed: int = 0
    init: str = "ridge"  # or "random", or "zeros"

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tolerance <= 0 or self.step_size <= 0:
            raise ValueError("tolerance and step_size must be positive")
        if self.init not in ("ridge", "random", "zeros"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class GeneralSolution:
    model: JointLinearModel
    objective: float
    n_iter: int
    converged: bool
    residual: float
    history: list = field(default_factory=list)


def _loss(scores, y, loss: Loss) -> float:
    if loss is Loss.SQUARED:
        r = scores - y
        return float(r @ r)
    return float(np.sum(np.logaddexp(0.0, -y * scores)))


def _dloss(scores, y, loss: Loss) -> np.ndarray:
    if loss is Loss.SQUARED:
        return 2.0 * (scores - y)
    return -y * expit(-y * scores)


def _check_labels(data: TrialDataset, spec: LossSpec):
    if spec.loss is Loss.LOGISTIC:
        for y in (data.y_treatment, data.y_control):
            if y.size and not np.all(np.abs(y) == 1.0):
                raise ValueError("logistic loss requires labels in {-1, +1}")


def _weights(data: TrialDataset, hp: Hyperparams):
    wt = hp.gamma / data.n_treatment if hp.gamma > 0 and data.n_treatment else 0.0
    wc = (1.0 - hp.gamma) / data.n_control if hp.gamma < 1 and data.n_control else 0.0
    return wt, wc


def objective_value(model: JointLinearModel, data: TrialDataset, hp: Hyperparams,
                    spec: LossSpec = LossSpec()) -> float:
    """Full joint objective, smooth and nonsmooth parts included."""
    if model.dimension != data.dimension:
        raise ValueError("model and data dimensions differ")
    _check_labels(data, spec)
    return _objective(model.w_t, model.w_delta, data, hp, spec)


def _smooth(w_t, w_d, data, hp, spec) -> float:
    wt, wc = _weights(data, hp)
    val = 0.0
    if wt:
        val += wt * _loss(data.X_treatment @ w_t, data.y_treatment, spec.loss)
    if wc:
        val += wc * _loss(data.X_control @ (w_t + w_d), data.y_control, spec.loss)
    if spec.q_reg is Penalty.SQL2:
        val += hp.lam * float(w_t @ w_t)
    if spec.r_reg is Penalty.SQL2:
        val += hp.eta * float(w_d @ w_d)
    return val


def _nonsmooth(w_t, w_d, hp, spec) -> float:
    val = 0.0
    if spec.q_reg is Penalty.L1:
        val += hp.lam * float(np.abs(w_t).sum())
    if spec.r_reg is Penalty.L1:
        val += hp.eta * float(np.abs(w_d).sum())
    return val


def _objective(w_t, w_d, data, hp, spec) -> float:
    return _smooth(w_t, w_d, data, hp, spec) + _nonsmooth(w_t, w_d, hp, spec)


def _grad(w_t, w_d, data, hp, spec):
    wt, wc = _weights(data, hp)
    g_t = np.zeros_like(w_t)
    g_d = np.zeros_like(w_d)
    if wt:
        g_t += wt * (data.X_treatment.T @ _dloss(data.X_treatment @ w_t, data.y_treatment, spec.loss))
    if wc:
        gc = wc * (data.X_control.T @ _dloss(data.X_control @ (w_t + w_d), data.y_control, spec.loss))
        g_t += gc
        g_d += gc
    if spec.q_reg is Penalty.SQL2:
        g_t += 2.0 * hp.lam * w_t
    if spec.r_reg is Penalty.SQL2:
        g_d += 2.0 * hp.eta * w_d
    return g_t, g_d


def gradient(model: JointLinearModel, data: TrialDataset, hp: Hyperparams,
             spec: LossSpec = LossSpec()):
    """Analytic gradient of the smooth part w.r.t. ``(w_t, w_delta)``.

    l1 penalties are excluded; they are handled by the proximal step.
    """
    if model.dimension != data.dimension:
        raise ValueError("model and data dimensions differ")
    _check_labels(data, spec)
    return _grad(np.asarray(model.w_t), np.asarray(model.w_delta), data, hp, spec)


def _grad_floor(w_t, w_d, data, hp, spec, abs_t, abs_c) -> float:
    """Roundoff floor of the computed gradient, from the summed magnitudes."""
    wt, wc = _weights(data, hp)

    def magnitude(absX, w, y):
        if spec.loss is Loss.SQUARED:
            return absX.T @ (2.0 * (absX @ np.abs(w) + np.abs(y)))
        return absX.T @ np.ones_like(y)

    scale_t = 2.0 * hp.lam * np.abs(w_t)
    scale_d = 2.0 * hp.eta * np.abs(w_d)
    if wt:
        scale_t = scale_t + wt * magnitude(abs_t, w_t, data.y_treatment)
    if wc:
        part = wc * magnitude(abs_c, w_t + w_d, data.y_control)
        scale_t = scale_t + part
        scale_d = scale_d + part
    return 64.0 * np.finfo(float).eps * max(float(np.max(scale_t)), float(np.max(scale_d)))


def _soft_threshold(w, t):
    return np.sign(w) * np.maximum(np.abs(w) - t, 0.0)


def _prox(w_t, w_d, step, hp, spec):
    if spec.q_reg is Penalty.L1:
        w_t = _soft_threshold(w_t, step * hp.lam)
    if spec.r_reg is Penalty.L1:
        w_d = _soft_threshold(w_d, step * hp.eta)
    return w_t, w_d


def _initial_point(data, hp, spec, cfg):
    d = data.dimension
    if cfg.init == "random":
        rng = np.random.default_rng(cfg.seed)
        return rng.standard_normal(d), rng.standard_normal(d)
    if cfg.init == "ridge" and data.n_treatment:
        return ridge(data.X_treatment, data.y_treatment, hp.lam), np.zeros(d)
    return np.zeros(d), np.zeros(d)


def fit_joint_general(data: TrialDataset, hp: Hyperparams, spec: LossSpec = LossSpec(),
                      cfg: SolveConfig = SolveConfig(), return_info: bool = False):
    """Minimize the joint objective by accelerated proximal gradient.

    Uses backtracking on the step size, a monotone acceptance rule (the
    accepted iterate never increases the objective) and momentum restart.
    Stops once the sup-norm of the proximal gradient mapping at the accepted
    iterate is below ``cfg.tolerance``, or below the floating-point floor of
    the gradient computation when that floor is higher (at most by 1e3). Failing to converge within
    ``cfg.max_iters`` emits a ``ConvergenceWarning`` and the best iterate
    is returned.
    """
    _check_labels(data, spec)
    d = data.dimension
    w = np.concatenate(_initial_point(data, hp, spec, cfg))

    def F(v):
        return _objective(v[:d], v[d:], data, hp, spec)

    def f(v):
        return _smooth(v[:d], v[d:], data, hp, spec)

    def grad(v):
        return np.concatenate(_grad(v[:d], v[d:], data, hp, spec))

    def prox(v, step):
        a, b = _prox(v[:d], v[d:], step, hp, spec)
        return np.concatenate([a, b])

    abs_t, abs_c = np.abs(data.X_treatment), np.abs(data.X_control)
    l1_mask = np.concatenate([np.full(d, spec.q_reg is Penalty.L1),
                              np.full(d, spec.r_reg is Penalty.L1)])

    def residual_at(v, g, step):
        # gradient mapping; on smooth blocks it is the gradient itself, which
        # avoids the eps*|v|/step error of forming (v - (v - step*g)) / step
        r = np.abs(g)
        if l1_mask.any():
            r[l1_mask] = np.abs(v - prox(v - step * g, step))[l1_mask] / step
        return float(np.max(r))

    step = cfg.step_size
    x = w
    Fx = F(x)
    gx = grad(x)
    floor = _grad_floor(x[:d], x[d:], data, hp, spec, abs_t, abs_c)
    history = [Fx]
    y, gy, x_prev, theta = x.copy(), gx, x.copy(), 1.0
    converged = False
    residual = np.inf
    it = 0
    for it in range(1, cfg.max_iters + 1):
        while True:
            z = prox(y - step * gy, step)
            diff = z - y
            gz = grad(z)
            # for convex f this secant test implies the quadratic upper bound
            # without cancelling nearly equal objective values; the slack
            # absorbs roundoff in the gradient difference
            if (gz - gy) @ diff <= (diff @ diff) / (2.0 * step) + 2.0 * floor * np.abs(diff).sum():
                break
            step *= 0.5
            if step < 1e-300:
                raise FloatingPointError("step size underflow in backtracking")
        Fz = F(z)
        theta_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        # ties within a few ulps of F count as non-increasing: near the optimum
        # the decrease is below the objective's float resolution
        if Fz <= Fx + 8.0 * np.finfo(float).eps * max(1.0, abs(Fx)):
            x_prev, x, Fx, gx = x, z, Fz, gz
            y = x + ((theta - 1.0) / theta_next) * (x - x_prev)
            gy = grad(y) if theta > 1.0 else gx
            theta = theta_next
        else:
            # momentum overshot: restart from the accepted point
            x_prev, y, gy, theta = x, x.copy(), gx, 1.0
        history.append(Fx)

        residual = residual_at(x, gx, step)
        if residual <= cfg.tolerance:
            converged = True
            break
        if residual <= 1e3 * cfg.tolerance:
            floor = _grad_floor(x[:d], x[d:], data, hp, spec, abs_t, abs_c)
            if residual <= floor:
                converged = True
                break
        step *= 1.1

    if not converged:
        warnings.warn(
            f"joint solver stopped after {it} iterations with residual {residual:.3g}",
            ConvergenceWarning, stacklevel=2)
    model = JointLinearModel(w_t=x[:d], w_delta=x[d:])
    if not return_info:
        return model
    return model, GeneralSolution(model=model, objective=Fx, n_iter=it, converged=converged,
                                  residual=residual, history=history)
