"""scikit-learn style wrappers around the classical solver and the unrolled
network.

``X`` is a sequence of reconstruction problems (``Sample`` objects or
``(y, op)`` pairs); targets are reference images.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .classical import SolverConfig, lps_solve
from .metrics import psnr
from .phantom import Sample
from .training import TrainConfig, train
from .unrolled import LsNetParams, lsnet_forward
from .validation import check_positive, check_problems, check_targets

__all__ = ["LowRankPlusSparse", "LSNet"]


def _mean_psnr(est, X, targets):
    problems = check_problems(X)
    refs = check_targets(X, targets, problems)
    return float(np.mean([psnr(x, r) for x, r in zip(est.predict(X), refs)]))


class LowRankPlusSparse(BaseEstimator):
    """Iterative L+S reconstruction. Nothing is learned; ``fit`` only checks
    the hyperparameters."""

    def __init__(self, lambda_L=0.01, lambda_S=0.01, rho=1.0, eta=1.0, max_iter=100, tol=0.0):
        self.lambda_L = lambda_L
        self.lambda_S = lambda_S
        self.rho = rho
        self.eta = eta
        self.max_iter = max_iter
        self.tol = tol

    def _config(self, log=False):
        return SolverConfig(
            check_positive(self.lambda_L, "lambda_L"),
            check_positive(self.lambda_S, "lambda_S"),
            check_positive(self.rho, "rho"),
            check_positive(self.eta, "eta", allow_zero=True),
            int(self.max_iter),
            check_positive(self.tol, "tol", allow_zero=True),
            log,
        )

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        self.config_.validate()
        return self

    def decompose(self, X) -> list:
        """``[(X, L, S), ...]`` for each problem."""
        check_is_fitted(self, "config_")
        out = []
        for y, op in check_problems(X):
            state = lps_solve(y, op, self.config_)
            out.append((state.X, state.L, state.S))
        return out

    def predict(self, X) -> list:
        return [x for x, _, _ in self.decompose(X)]

    def score(self, X, y=None) -> float:
        """Mean PSNR (dB) against the reference images."""
        return _mean_psnr(self, X, y)


class LSNet(BaseEstimator):
    """Unrolled low-rank + sparse network trained with Adam.

    ``warm_start`` continues from the fitted parameters and optimizer state
    instead of re-initializing.
    """

    def __init__(self, n_iter=10, channels=32, alpha=0.01, beta0=-2.0, gamma0=1.0,
                 zero_last_layer=False, epochs=50, lr0=1e-3, decay=0.95, shuffle=False,
                 random_state=0, warm_start=False):
        self.n_iter = n_iter
        self.channels = channels
        self.alpha = alpha
        self.beta0 = beta0
        self.gamma0 = gamma0
        self.zero_last_layer = zero_last_layer
        self.epochs = epochs
        self.lr0 = lr0
        self.decay = decay
        self.shuffle = shuffle
        self.random_state = random_state
        self.warm_start = warm_start

    def _initial(self):
        return LsNetParams.initial(int(self.n_iter), (4, int(self.channels), int(self.channels), 2),
                                   int(self.random_state), self.beta0, self.gamma0, self.alpha,
                                   self.zero_last_layer)

    def fit(self, X, y=None):
        problems = check_problems(X)
        refs = check_targets(X, y, problems)
        data = [Sample(yk, op, ref) for (yk, op), ref in zip(problems, refs)]
        cfg = TrainConfig(epochs=int(self.epochs), lr0=self.lr0, decay=self.decay,
                          seed=int(self.random_state), shuffle=self.shuffle)
        if self.warm_start and hasattr(self, "params_"):
            cfg = replace(cfg, epochs=self.record_.epoch + int(self.epochs))
            params, record = self.params_, self.record_
        else:
            params, record = self._initial(), None
        self.params_, self.record_ = train(params, data, cfg, record)
        self.loss_curve_ = list(self.record_.losses)
        return self

    def decompose(self, X) -> list:
        check_is_fitted(self, "params_")
        out = []
        for yk, op in check_problems(X):
            x, low, sparse, _ = lsnet_forward(yk, op, self.params_)
            out.append((x, low, sparse))
        return out

    def predict(self, X) -> list:
        return [x for x, _, _ in self.decompose(X)]

    def score(self, X, y=None) -> float:
        """Mean PSNR (dB) against the reference images."""
        return _mean_psnr(self, X, y)
