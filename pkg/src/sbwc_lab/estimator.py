"""scikit-learn estimator wrapping the GD training loop.

``TwoLayerGDClassifier`` is the composable front door: it validates
inputs with the standard sklearn helpers, trains the two-layer net by
full-batch GD under one of the certified step-size policies, and
exposes ``decision_function`` / ``predict`` so the model drops into
pipelines, grid searches and cross-validation.  The fitted attributes
keep the full training trace and the objective, so the inequality
checkers can be pointed directly at a fitted estimator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_is_fitted, validate_data

from .activations import activation
from .losses import parse_loss
from .model import NetworkShape
from .objective import Objective, forward_batch
from .trainer import GDConfig, train


class TwoLayerGDClassifier(ClassifierMixin, BaseEstimator):
    """Binary classifier: two-layer net, smooth activation, full-batch GD.

    Parameters
    ----------
    hidden_width : even number of hidden neurons (half +1 / half -1
        output signs, fixed during training).
    activation : "softplus" | "tanh" | "gelu".
    loss : "logistic" | "exp" | "poly:<beta>".
    step_policy : "smoothness" | "self_bounded" | "ntk" | "fixed".
    step_size : step for the "fixed" policy.
    n_iter : number of full-batch GD steps.
    init : "zero" | "gaussian"; gaussian entries are iid N(0, init_scale^2).
    seed : seed for the init sub-stream.
    record_every : stride at which full weight checkpoints are kept on
        the trace (0 keeps only the endpoints).
    feature_radius : known bound on ||x||; measured from the training
        set when None.

    Attributes (after fit)
    ----------------------
    classes_, n_features_in_, weights_, trace_, eta_, objective_
    """

    def __init__(self, hidden_width=64, activation="tanh", loss="logistic",
                 step_policy="smoothness", step_size=None, n_iter=256,
                 init="zero", init_scale=1.0, seed=0, record_every=0,
                 feature_radius=None):
        self.hidden_width = hidden_width
        self.activation = activation
        self.loss = loss
        self.step_policy = step_policy
        self.step_size = step_size
        self.n_iter = n_iter
        self.init = init
        self.init_scale = init_scale
        self.seed = seed
        self.record_every = record_every
        self.feature_radius = feature_radius

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.classifier_tags.multi_class = False
        return tags

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        self.classes_ = unique_labels(y)
        if len(self.classes_) != 2:
            raise ValueError(
                f"TwoLayerGDClassifier is a binary classifier; got {len(self.classes_)} classes")
        if self.hidden_width < 2 or self.hidden_width % 2 != 0:
            raise ValueError(f"hidden_width must be a positive even integer, got {self.hidden_width}")
        y_pm = np.where(y == self.classes_[1], 1.0, -1.0)
        radius = self.feature_radius
        if radius is None:
            radius = float(np.max(np.linalg.norm(X, axis=1)))
            radius = max(radius, np.finfo(float).tiny)
        from .datasets import Dataset
        ds = Dataset(X=X, y=y_pm, R=radius, provenance="estimator")
        shape = NetworkShape(m=int(self.hidden_width), d=X.shape[1])
        self.objective_ = Objective(dataset=ds, loss=parse_loss(self.loss),
                                    activation=activation(self.activation), shape=shape)
        config = GDConfig(step_policy=self.step_policy, step_size=self.step_size,
                          T=int(self.n_iter), init=self.init, init_scale=self.init_scale,
                          seed=self.seed, record_every=self.record_every)
        self.trace_ = train(self.objective_, config)
        self.weights_ = self.trace_.final_weights
        self.eta_ = self.trace_.eta
        return self

    def decision_function(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return forward_batch(self.objective_.shape, self.objective_.activation,
                             self.weights_, X)

    def predict(self, X):
        scores = self.decision_function(X)
        return np.where(scores > 0, self.classes_[1], self.classes_[0])

    def training_trace(self):
        """The per-iteration (risk, grad norm, distance) record of fit()."""
        check_is_fitted(self)
        return self.trace_
