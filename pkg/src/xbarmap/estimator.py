"""scikit-learn style front end.

``CrossbarMapper`` maps a network in ``fit`` and runs inputs through the
mapped cores in ``transform``, so a mapped network can sit inside a
``Pipeline`` like any other feature transformer.  ``DenseNetwork`` is the
unmapped twin, handy as the reference side of a comparison.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .ir import NetworkSpec, WeightStore
from .mapper import CoreSpec, map_network
from .simcore import ACTIVATIONS, dense_reference, run_mapped_inference, verify


def _check_params(est):
    if not isinstance(est.network, NetworkSpec):
        raise TypeError("network must be a NetworkSpec")
    if not isinstance(est.weights, WeightStore):
        raise TypeError("weights must be a WeightStore")
    if est.activation not in ACTIVATIONS:
        raise ValueError(f"activation must be one of {ACTIVATIONS}")


def _samples(est, X):
    """Accept ``(n, H*W*C)`` or ``(n, H, W, C)``; return the flat 2-D form."""
    shape = est.network.input_shape
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 4:
        if X.shape[1:] != shape.as_tuple():
            raise ValueError(f"X has sample shape {X.shape[1:]}, expected {shape.as_tuple()}")
        X = X.reshape(len(X), -1)
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != shape.size:
        raise ValueError(f"X has {X.shape[1]} features, expected {shape.size}")
    return X


class _NetworkTransformer(TransformerMixin, BaseEstimator):
    def __init__(self, network=None, weights=None, activation="linear"):
        self.network = network
        self.weights = weights
        self.activation = activation

    def _run(self, x):
        raise NotImplementedError

    def transform(self, X):
        check_is_fitted(self)
        X = _samples(self, X)
        return np.stack([self._run(row)[-1].ravel() for row in X]) if len(X) else np.zeros((0, self.n_features_out_))


class CrossbarMapper(_NetworkTransformer):
    """Map ``network`` onto ``core_axons x core_neurons`` crossbar cores.

    Fitted attributes: ``mapping_`` (the full mapping), ``plans_``,
    ``layer_cores_``, ``n_cores_``, ``n_features_in_`` and
    ``n_features_out_``.
    """

    def __init__(self, network=None, weights=None, core_axons=256, core_neurons=256, activation="linear"):
        super().__init__(network=network, weights=weights, activation=activation)
        self.core_axons = core_axons
        self.core_neurons = core_neurons

    def fit(self, X=None, y=None):
        _check_params(self)
        if X is not None:
            _samples(self, X)
        self.mapping_ = map_network(self.network, self.weights, CoreSpec(self.core_axons, self.core_neurons))
        self.plans_ = self.mapping_.plans
        self.layer_cores_ = self.mapping_.layer_core_counts
        self.n_cores_ = self.mapping_.total_cores
        self.n_features_in_ = self.network.input_shape.size
        self.n_features_out_ = self.network.shapes[-1].size
        return self

    def _run(self, x):
        return run_mapped_inference(self.mapping_, x, self.activation)

    def score(self, X, y=None, tolerance=1e-5):
        """Fraction of samples whose mapped outputs agree with the dense oracle."""
        check_is_fitted(self)
        X = _samples(self, X)
        ok = [
            verify(self.mapping_, self.network, self.weights, row, tolerance, self.activation).passed
            for row in X
        ]
        return float(np.mean(ok)) if ok else 1.0


class DenseNetwork(_NetworkTransformer):
    """Direct (unmapped) evaluation of the same network."""

    def fit(self, X=None, y=None):
        _check_params(self)
        if X is not None:
            _samples(self, X)
        self.n_features_in_ = self.network.input_shape.size
        self.n_features_out_ = self.network.shapes[-1].size
        return self

    def _run(self, x):
        return dense_reference(self.network, self.weights, x, self.activation)
