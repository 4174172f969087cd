"""Scikit-learn style front ends for the inference engine.

Stages play the role of samples: X is the stack of per-stage changes
for every object feature cell, y is the action emitted at each stage.
Both detectors expose ``get_params``/``set_params`` so they compose with
the usual sklearn tooling (clone, grid search over alpha, ...).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .design import ENUMERATION_CAP
from .inference import baseline_decide, decide_body, run_tests
from .model import ActionSequence


def check_deltas_actions(X, y, mask=None):
    """Validate and normalize the (deltas, actions, mask) triple.

    X may be (T, N, K) or (T, N); NaN cells are treated as absent when
    no mask is given (absence must be constant across stages).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[:, :, np.newaxis]
    if X.ndim != 3:
        raise ValueError(f"X must be (stages, objects, features), got shape {X.shape}")
    if isinstance(y, ActionSequence):
        actions = y
    else:
        y = np.asarray(y)
        if y.ndim != 1:
            raise ValueError("y must be a 1-D action vector")
        actions = ActionSequence(y, n_signals=int(y.max()))
    if actions.n_stages != X.shape[0]:
        raise ValueError(f"{X.shape[0]} delta stages vs {actions.n_stages} actions")
    nan_cells = np.isnan(X)
    if mask is None:
        mask = ~nan_cells.any(axis=0)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != X.shape[1:]:
            raise ValueError(f"mask shape {mask.shape} does not match cells {X.shape[1:]}")
    if nan_cells[:, mask].any():
        raise ValueError("NaN deltas inside present cells")
    if not mask.any():
        raise ValueError("all cells are absent")
    X = np.where(np.broadcast_to(mask, X.shape), X, 0.0)
    return X, actions, mask


class BodyDiscoverer(BaseEstimator):
    """Randomization-test detector of signal-controlled objects.

    fit(X, y) runs one two-sided randomization test per (object,
    feature, signal) triple and aggregates object verdicts under the
    chosen alpha/correction. Per-test random streams are derived by
    hashing (random_state, object, feature, signal), so results are
    independent of test execution order.
    """

    def __init__(
        self,
        alpha: float = 0.05,
        correction: str = "bonferroni",
        mc_samples: int = 1000,
        exact_cap: int = ENUMERATION_CAP,
        random_state: int = 0,
    ):
        self.alpha = alpha
        self.correction = correction
        self.mc_samples = mc_samples
        self.exact_cap = exact_cap
        self.random_state = random_state

    def fit(self, X, y, mask=None):
        X, actions, mask = check_deltas_actions(X, y, mask)
        estimates, p_values = run_tests(
            X,
            actions,
            mask,
            m_samples=self.mc_samples,
            exact_cap=self.exact_cap,
            seed=self.random_state,
        )
        self.report_ = decide_body(
            estimates,
            p_values,
            alpha=self.alpha,
            correction=self.correction,
            n_objects=X.shape[1],
            mc_samples=self.mc_samples,
        )
        self.estimates_ = estimates
        self.p_values_ = np.asarray(p_values)
        self.body_objects_ = np.array(sorted(self.report_.body_objects), dtype=int)
        return self

    def fit_predict(self, X, y, mask=None) -> np.ndarray:
        """Boolean per-object body mask."""
        self.fit(X, y, mask)
        out = np.zeros(self.report_.n_objects, dtype=bool)
        out[self.body_objects_] = True
        return out


class BaselineDetector(BaseEstimator):
    """Normal-band baseline over the pooled difference estimates."""

    def __init__(self, alpha: float = 0.05, random_state: int = 0):
        self.alpha = alpha
        self.random_state = random_state

    def fit(self, X, y, mask=None):
        X, actions, mask = check_deltas_actions(X, y, mask)
        # p-values are irrelevant here; only the estimates feed the band.
        estimates, _ = run_tests(X, actions, mask, m_samples=0, seed=self.random_state)
        self.report_ = baseline_decide(estimates, alpha=self.alpha, n_objects=X.shape[1])
        self.estimates_ = estimates
        self.body_objects_ = np.array(sorted(self.report_.body_objects), dtype=int)
        return self

    def fit_predict(self, X, y, mask=None) -> np.ndarray:
        self.fit(X, y, mask)
        out = np.zeros(self.report_.n_objects, dtype=bool)
        out[self.body_objects_] = True
        return out
