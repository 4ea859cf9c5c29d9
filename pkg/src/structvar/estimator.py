"""Scikit-learn style estimator for structured VAR(1) transition matrices."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .afnsl import MODELS as COMPOSITE_MODELS
from .afnsl import ols_solve
from .exceptions import ParameterError
from .fnsl import Design, SolverConfig
from .model import VarSample, numerical_rank
from .tuning import SINGLE_MODELS, TuningGrid, _axes, fit_point, tune

ESTIMATOR_MODELS = tuple(SINGLE_MODELS) + tuple(COMPOSITE_MODELS) + ("ols",)
TUNE_CRITERIA = ("aic", "bic", "forward_cv")


class StructuredVAR(BaseEstimator):
    """Penalised least-squares estimate of ``B`` in ``x_t = x_{t-1} B + e_t``.

    Parameters
    ----------
    model : str
        One of ``sparse``, ``group``, ``lowrank``, ``l+s``, ``l+g``, ``s+g``,
        ``l+s+g`` or ``ols``.
    lam, mu, nu : float
        Penalty weights.  Single-penalty models use ``lam``.  Composite
        models use ``lam`` for the nuclear norm, ``mu`` for the sparse (or, in
        ``l+g``, group) part and ``nu`` for the group part.
    alpha, beta, gamma : float, optional
        Box-constraint numerators; ``alpha_div`` sets ``alpha = p / alpha_div``
        when ``alpha`` is not given.
    partition : GroupPartition, optional
        Groups of the group-sparse part; one group per column by default.
    tune : {None, "aic", "bic", "forward_cv"}
        Select the weights on a grid instead of using ``lam``, ``mu``, ``nu``.
    n_grid : int, optional
        Points per grid axis; 100 for one axis and 15 per axis otherwise.
    grid_spacing : {"linear", "log"}
    cv_window, cv_val, cv_stride : int
        Forward cross-validation training window, validation window and stride.
    tol, max_iter, curvature, restart
        Solver settings, see :class:`structvar.fnsl.SolverConfig`.

    Attributes
    ----------
    coef_ : ndarray of shape (p, p)
        Estimated ``B``.
    L_, S_, G_ : ndarray of shape (p, p)
        Estimated components (zero when absent).
    trace_ : SolveTrace or None
    selected_ : tuple
        ``(lam, mu, nu)`` used for the final fit.
    scores_ : list of dict
        Grid score table when tuned.
    """

    def __init__(self, model="sparse", lam=0.0, mu=0.0, nu=0.0, alpha=None, alpha_div=None,
                 beta=None, gamma=None, partition=None, group_box=False, tune=None, n_grid=None,
                 grid_spacing="linear", cv_window=500, cv_val=50, cv_stride=25, tol=1e-8,
                 max_iter=2000, curvature="lifted", restart="auto"):
        self.model = model
        self.lam = lam
        self.mu = mu
        self.nu = nu
        self.alpha = alpha
        self.alpha_div = alpha_div
        self.beta = beta
        self.gamma = gamma
        self.partition = partition
        self.group_box = group_box
        self.tune = tune
        self.n_grid = n_grid
        self.grid_spacing = grid_spacing
        self.cv_window = cv_window
        self.cv_val = cv_val
        self.cv_stride = cv_stride
        self.tol = tol
        self.max_iter = max_iter
        self.curvature = curvature
        self.restart = restart

    def _composite_kwargs(self, p):
        if self.model not in COMPOSITE_MODELS:
            return {"partition": self.partition} if self.model == "group" else {}
        alpha = self.alpha
        if alpha is None and self.alpha_div is not None:
            if self.alpha_div <= 0:
                raise ParameterError("alpha_div must be positive")
            alpha = p / self.alpha_div
        kw = {"alpha": alpha, "beta": self.beta, "gamma": self.gamma,
              "partition": self.partition, "group_box": self.group_box}
        return kw

    def _validate(self):
        if self.model not in ESTIMATOR_MODELS:
            raise ParameterError(f"model must be one of {ESTIMATOR_MODELS}, got {self.model!r}")
        if self.tune is not None and self.tune not in TUNE_CRITERIA:
            raise ParameterError(f"tune must be one of {TUNE_CRITERIA} or None")
        if self.tune is not None and self.model == "ols":
            raise ParameterError("ols has no tuning parameters")
        for name in ("lam", "mu", "nu"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be nonnegative")

    def fit(self, X, y=None):
        """Fit on a series ``X`` of shape ``(T, p)``, rows in time order.

        ``y`` is ignored.
        """
        self._validate()
        X = check_array(X, dtype=float, ensure_min_samples=2)
        sample = VarSample(X)
        design = Design.from_sample(sample)
        p = design.p
        self.n_features_in_ = p
        self.scores_ = []
        self.trace_ = None
        if self.model == "ols":
            B = ols_solve(design)
            zero = np.zeros((p, p))
            self.L_, self.S_, self.G_ = zero, B, zero.copy()
            self.selected_ = (0.0, 0.0, 0.0)
            self.coef_ = B
            return self
        config = SolverConfig(tol=self.tol, max_iter=self.max_iter, curvature=self.curvature,
                              restart=self.restart)
        kw = self._composite_kwargs(p)
        if self.tune is None:
            fit = fit_point(design, self.model, self.lam, self.mu, self.nu, config, keep_trace=True,
                            **kw)
        else:
            n = self.n_grid
            if n is None:
                n = 100 if len(_axes(self.model)) == 1 else 15
            grid = TuningGrid.for_design(design, self.model, n=n, spacing=self.grid_spacing,
                                         partition=self.partition, criterion=self.tune)
            cv = {"W": self.cv_window, "W_prime": self.cv_val, "stride": self.cv_stride}
            fit, self.scores_ = tune(design, self.model, grid, config, series=X, cv_kwargs=cv, **kw)
        self.L_, self.S_, self.G_ = fit.L, fit.S, fit.G
        self.coef_ = fit.B
        self.selected_ = fit.params
        self.trace_ = fit.extras.get("trace")
        self.n_iter_ = fit.n_iter
        self.converged_ = fit.converged
        return self

    def predict(self, X):
        """One-step-ahead predictions ``X @ coef_`` for each row of ``X``."""
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ParameterError(f"expected {self.n_features_in_} series, got {X.shape[1]}")
        return X @ self.coef_

    def score(self, X, y=None):
        """``1 - PE`` on the transitions of ``X``, with PE the relative squared prediction error."""
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float, ensure_min_samples=2)
        target = X[1:]
        den = float(np.sum(target * target))
        if den == 0:
            raise ParameterError("series is identically zero after the first row")
        resid = self.predict(X[:-1]) - target
        return 1.0 - float(np.sum(resid * resid)) / den

    @property
    def rank_(self):
        check_is_fitted(self, "coef_")
        return numerical_rank(self.L_) if np.any(self.L_) else 0
