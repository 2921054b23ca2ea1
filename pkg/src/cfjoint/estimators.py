"""Scikit-learn style wrappers around the joint fits and the baselines.

Every estimator is fitted on one stacked design ``X`` with labels ``y`` and
a boolean ``treated`` mask that says which rows come from the trial
treatment arm (the rest are control rows)::

    est = JointRidge(gamma=0.5, lam=1e-2, eta=1.0).fit(X, y, treated)
    est.predict(X_new)            # treatment outcome
    est.predict_control(X_new)    # control outcome
    est.predict_effect(X_new)     # treatment minus control

``predict`` always targets the treatment condition so that the estimators
slot into pipelines, ``cross_val_score`` and friends unchanged.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y, column_or_1d

from .baselines import fit_control_only, fit_pooled, fit_treatment_only
from .closed_form import fit_joint_ridge
from .general import SolveConfig, fit_joint_general
from .kernel import KernelSpec, fit_kernel_joint, kernel_predict
from .model import Condition, Hyperparams, JointLinearModel, Loss, LossSpec, TrialDataset

__all__ = [
    "check_trial_data",
    "JointRidge",
    "JointLinear",
    "JointLinearClassifier",
    "JointKernelRidge",
    "TreatmentOnlyRidge",
    "ControlOnlyRidge",
    "PooledRidge",
]


def check_trial_data(X, y, treated, trial=None) -> TrialDataset:
    """Validate ``(X, y, treated)`` and split the rows into the two sets.

    Parameters
    ----------
    X : array-like of shape (n_samples, n_features)
    y : array-like of shape (n_samples,)
    treated : array-like of bool, shape (n_samples,)
        True for trial treatment rows, False for control rows.
    trial : array-like of bool, optional
        Marks control rows that belong to the trial sub-population. Only
        kept for bookkeeping.

    Returns
    -------
    TrialDataset
    """
    X, y = check_X_y(X, y, dtype=float, y_numeric=True)
    treated = column_or_1d(treated)
    if treated.shape[0] != X.shape[0]:
        raise ValueError(f"treated has {treated.shape[0]} entries for {X.shape[0]} rows")
    if treated.dtype != bool:
        values = set(np.unique(treated).tolist())
        if not values <= {0, 1}:
            raise ValueError("treated must be boolean or 0/1")
        treated = treated.astype(bool)
    trial_control = None
    if trial is not None:
        trial = column_or_1d(trial).astype(bool)
        if trial.shape[0] != X.shape[0]:
            raise ValueError(f"trial has {trial.shape[0]} entries for {X.shape[0]} rows")
        trial_control = trial[~treated]
    return TrialDataset(X_control=X[~treated], y_control=y[~treated],
                        X_treatment=X[treated], y_treatment=y[treated],
                        trial_control=trial_control)


class _LinearTrialMixin:
    """Prediction methods shared by every estimator that ends in a
    :class:`JointLinearModel` stored as ``model_``."""

    def _set_fitted(self, model: JointLinearModel, n_features: int):
        self.model_ = model
        self.coef_ = model.w_t.copy()
        self.delta_coef_ = model.w_delta.copy()
        self.n_features_in_ = n_features
        return self

    def _X(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def predict(self, X):
        X = self._X(X)
        return self.model_.predict_treatment(X)

    def predict_control(self, X):
        X = self._X(X)
        return self.model_.predict_control(X)

    def predict_effect(self, X):
        X = self._X(X)
        return self.model_.predict_effect(X)


class JointRidge(_LinearTrialMixin, RegressorMixin, BaseEstimator):
    """Joint treatment/control ridge solved in closed form.

    Parameters
    ----------
    gamma : float, default=0.5
        Weight of the trial treatment loss; ``1 - gamma`` goes to the control loss.
    lam : float, default=1.0
        Ridge penalty on the treatment predictor.
    eta : float, default=1.0
        Ridge penalty on the control-minus-treatment difference ``delta``.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
        Treatment predictor ``w_t``.
    delta_coef_ : ndarray of shape (n_features,)
        ``w_delta``; the control predictor is ``coef_ + delta_coef_``.
    """

    def __init__(self, gamma=0.5, lam=1.0, eta=1.0):
        self.gamma = gamma
        self.lam = lam
        self.eta = eta

    def _hyperparams(self) -> Hyperparams:
        return Hyperparams(gamma=self.gamma, lam=self.lam, eta=self.eta)

    def fit(self, X, y, treated, trial=None):
        data = check_trial_data(X, y, treated, trial)
        return self._set_fitted(fit_joint_ridge(data, self._hyperparams()), data.dimension)


class JointLinear(JointRidge):
    """Joint linear model with a choice of loss and penalties, fitted by
    accelerated proximal gradient.

    Parameters
    ----------
    gamma, lam, eta : float
        As in :class:`JointRidge`.
    loss : {"squared", "logistic"}, default="squared"
    q_reg, r_reg : {"sqL2", "L1"}, default="sqL2"
        Penalties on the treatment predictor and on ``delta``.
    max_iter : int, default=20000
    tol : float, default=1e-10
        Stopping threshold on the proximal gradient mapping.
    init : {"ridge", "zeros", "random"}, default="ridge"
    random_state : int, default=0
        Seed for ``init="random"``.

    Attributes
    ----------
    n_iter_ : int
    converged_ : bool
    objective_ : float
    """

    def __init__(self, gamma=0.5, lam=1.0, eta=1.0, loss="squared", q_reg="sqL2", r_reg="sqL2",
                 max_iter=20000, tol=1e-10, init="ridge", random_state=0):
        super().__init__(gamma=gamma, lam=lam, eta=eta)
        self.loss = loss
        self.q_reg = q_reg
        self.r_reg = r_reg
        self.max_iter = max_iter
        self.tol = tol
        self.init = init
        self.random_state = random_state

    def _loss_spec(self) -> LossSpec:
        return LossSpec(loss=self.loss, q_reg=self.q_reg, r_reg=self.r_reg)

    def _fit_data(self, data: TrialDataset):
        cfg = SolveConfig(max_iters=self.max_iter, tolerance=self.tol, seed=self.random_state,
                          init=self.init)
        _, sol = fit_joint_general(data, self._hyperparams(), self._loss_spec(), cfg,
                                   return_info=True)
        self.n_iter_ = sol.n_iter
        self.converged_ = sol.converged
        self.objective_ = sol.objective
        return self._set_fitted(sol.model, data.dimension)

    def fit(self, X, y, treated, trial=None):
        return self._fit_data(check_trial_data(X, y, treated, trial))


class JointLinearClassifier(ClassifierMixin, JointLinear):
    """Joint linear classifier (logistic loss by default) for two classes.

    The two labels found in ``y`` are stored in ``classes_``; the larger one
    is the positive class. ``predict`` thresholds the treatment score at 0.
    """

    def __init__(self, gamma=0.5, lam=1.0, eta=1.0, loss="logistic", q_reg="sqL2", r_reg="sqL2",
                 max_iter=20000, tol=1e-10, init="zeros", random_state=0):
        super().__init__(gamma=gamma, lam=lam, eta=eta, loss=loss, q_reg=q_reg, r_reg=r_reg,
                         max_iter=max_iter, tol=tol, init=init, random_state=random_state)

    def fit(self, X, y, treated, trial=None):
        X, y = check_X_y(X, y, dtype=None)
        self.classes_ = np.unique(y)
        if self.classes_.size != 2:
            raise ValueError(f"expected two classes, got {self.classes_.size}")
        signs = np.where(y == self.classes_[1], 1.0, -1.0)
        return self._fit_data(check_trial_data(np.asarray(X, dtype=float), signs, treated, trial))

    def decision_function(self, X, condition=Condition.TREATMENT):
        X = self._X(X)
        if Condition(condition) is Condition.CONTROL:
            return self.model_.predict_control(X)
        return self.model_.predict_treatment(X)

    def predict(self, X, condition=Condition.TREATMENT):
        scores = self.decision_function(X, condition)
        return self.classes_[(scores >= 0).astype(int)]

    def predict_proba(self, X, condition=Condition.TREATMENT):
        if Loss(self.loss) is not Loss.LOGISTIC:
            raise AttributeError("predict_proba needs the logistic loss")
        from scipy.special import expit
        p = expit(self.decision_function(X, condition))
        return np.column_stack([1.0 - p, p])


class JointKernelRidge(RegressorMixin, BaseEstimator):
    """Joint kernel ridge regression in the expanded treatment/control space.

    Parameters
    ----------
    gamma, lam, eta : float
        As in :class:`JointRidge`.
    kernel : {"linear", "rbf", "polynomial"}, default="rbf"
    width : float, default=1.0
        RBF length scale.
    degree : int, default=2
    offset : float, default=1.0
        Polynomial kernel offset.
    """

    def __init__(self, gamma=0.5, lam=1.0, eta=1.0, kernel="rbf", width=1.0, degree=2,
                 offset=1.0):
        self.gamma = gamma
        self.lam = lam
        self.eta = eta
        self.kernel = kernel
        self.width = width
        self.degree = degree
        self.offset = offset

    def fit(self, X, y, treated, trial=None):
        data = check_trial_data(X, y, treated, trial)
        hp = Hyperparams(gamma=self.gamma, lam=self.lam, eta=self.eta)
        spec = KernelSpec.for_hyperparams(hp, base=self.kernel, width=self.width,
                                          degree=self.degree, offset=self.offset)
        self.model_ = fit_kernel_joint(data, hp, spec)
        self.n_features_in_ = data.dimension
        return self

    def _X(self, X):
        check_is_fitted(self, "model_")
        return check_array(X, dtype=float)

    def predict(self, X):
        X = self._X(X)
        return kernel_predict(self.model_, X, Condition.TREATMENT)

    def predict_control(self, X):
        X = self._X(X)
        return kernel_predict(self.model_, X, Condition.CONTROL)

    def predict_effect(self, X):
        X = self._X(X)
        return (kernel_predict(self.model_, X, Condition.TREATMENT)
                - kernel_predict(self.model_, X, Condition.CONTROL))


class TreatmentOnlyRidge(_LinearTrialMixin, RegressorMixin, BaseEstimator):
    """Ridge on the trial treatment rows alone."""

    def __init__(self, lam=1.0):
        self.lam = lam

    def fit(self, X, y, treated, trial=None):
        data = check_trial_data(X, y, treated, trial)
        return self._set_fitted(fit_treatment_only(data, self.lam), data.dimension)


class ControlOnlyRidge(_LinearTrialMixin, RegressorMixin, BaseEstimator):
    """Ridge on the control rows, used unchanged to predict treatment outcomes."""

    def __init__(self, lam=1.0):
        self.lam = lam

    def fit(self, X, y, treated, trial=None):
        data = check_trial_data(X, y, treated, trial)
        return self._set_fitted(fit_control_only(data, self.lam), data.dimension)


class PooledRidge(_LinearTrialMixin, RegressorMixin, BaseEstimator):
    """One ridge predictor over both sets with loss weights ``gamma`` and ``1 - gamma``."""

    def __init__(self, gamma=0.5, lam=1.0):
        self.gamma = gamma
        self.lam = lam

    def fit(self, X, y, treated, trial=None):
        data = check_trial_data(X, y, treated, trial)
        hp = Hyperparams(gamma=self.gamma, lam=self.lam, eta=1.0)
        return self._set_fitted(fit_pooled(data, hp), data.dimension)
