"""Scikit-learn style estimators wrapping the training and inference code.

X is always a batch of images shaped (n, height, width, channels) with float32
values in [0, 1].  Targets are 0/1 class labels for the classifier and
per-pixel {0, 1} masks shaped like X for the segmenters.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .errors import ShapeError
from .models import (classifier_forward, model_from_weights, unet_forward)
from .postprocess import CannyConfig, canny, longest_edge
from .training import TrainConfig, fit_classifier_arrays, fit_segmenter_arrays


def _check_images(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float32)
    if X.ndim != 4:
        raise ShapeError(f"expected (n, h, w, c) images, got shape {X.shape}")
    return X


def _train_config(estimator) -> TrainConfig:
    kwargs = {
        name: getattr(estimator, name)
        for name in ("learning_rate", "l2_coefficient", "epochs", "batch_size",
                     "seed")
    }
    for name in ("unet_depth", "unet_base_filters"):
        if hasattr(estimator, name):
            kwargs[name] = getattr(estimator, name)
    return TrainConfig(**kwargs)


class CoastlineClassifier(ClassifierMixin, BaseEstimator):
    """CNN classifier distinguishing natural (0) from built (1) coastlines."""

    def __init__(self, learning_rate=1e-5, l2_coefficient=0.001, epochs=25,
                 batch_size=12, seed=0, threshold=0.5):
        self.learning_rate = learning_rate
        self.l2_coefficient = l2_coefficient
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.threshold = threshold

    def fit(self, X, y):
        X = _check_images(X)
        y = np.asarray(y, dtype=np.float32).reshape(-1)
        self.weights_ = fit_classifier_arrays(X, y, _train_config(self))
        self.model_ = model_from_weights(self.weights_)
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        p = classifier_forward(self.model_, _check_images(X)).reshape(-1)
        return np.stack([1.0 - p, p], axis=1)

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= self.threshold).astype(int)


class UNetSegmenter(BaseEstimator):
    """U-Net land/water segmenter; predicts per-pixel {0, 1} masks."""

    def __init__(self, learning_rate=1e-5, l2_coefficient=0.001, epochs=25,
                 batch_size=12, seed=0, unet_depth=4, unet_base_filters=32,
                 class_tag="mixed", threshold=0.5):
        self.learning_rate = learning_rate
        self.l2_coefficient = l2_coefficient
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.unet_depth = unet_depth
        self.unet_base_filters = unet_base_filters
        self.class_tag = class_tag
        self.threshold = threshold

    def fit(self, X, Y):
        X = _check_images(X)
        Y = _check_images(Y)
        if Y.shape[:3] != X.shape[:3]:
            raise ShapeError("mask batch does not match image batch")
        self.weights_ = fit_segmenter_arrays(X, Y, _train_config(self),
                                             self.class_tag)
        self.model_ = model_from_weights(self.weights_)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        return unet_forward(self.model_, _check_images(X))

    def predict(self, X):
        return (self.predict_proba(X) >= self.threshold).astype(np.uint8)


class TwoStageExtractor(BaseEstimator):
    """Classify each image, segment it with the matching specialist model,
    and trace the longest detected edge as the coastline."""

    def __init__(self, learning_rate=1e-5, l2_coefficient=0.001, epochs=25,
                 batch_size=12, seed=0, unet_depth=4, unet_base_filters=32,
                 threshold=0.5):
        self.learning_rate = learning_rate
        self.l2_coefficient = l2_coefficient
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.unet_depth = unet_depth
        self.unet_base_filters = unet_base_filters
        self.threshold = threshold

    def _shared_params(self):
        return dict(learning_rate=self.learning_rate,
                    l2_coefficient=self.l2_coefficient, epochs=self.epochs,
                    batch_size=self.batch_size, seed=self.seed,
                    threshold=self.threshold)

    def fit(self, X, y, masks=None):
        if masks is None:
            raise ValueError("masks are required to train the segmenters")
        X = _check_images(X)
        y = np.asarray(y).reshape(-1).astype(int)
        masks = _check_images(masks)
        seg_params = dict(self._shared_params(), unet_depth=self.unet_depth,
                          unet_base_filters=self.unet_base_filters)
        self.classifier_ = CoastlineClassifier(**self._shared_params()).fit(X, y)
        self.segmenter_natural_ = UNetSegmenter(
            class_tag="natural", **seg_params).fit(X[y == 0], masks[y == 0])
        self.segmenter_built_ = UNetSegmenter(
            class_tag="built", **seg_params).fit(X[y == 1], masks[y == 1])
        return self

    def predict(self, X):
        """Routed binary masks, shaped like the input batch."""
        check_is_fitted(self, "classifier_")
        X = _check_images(X)
        routed = self.classifier_.predict(X)
        masks = np.zeros(X.shape[:3] + (1,), dtype=np.uint8)
        for label, seg in ((0, self.segmenter_natural_),
                           (1, self.segmenter_built_)):
            keep = routed == label
            if keep.any():
                masks[keep] = seg.predict(X[keep])
        return masks

    def extract_coastlines(self, X, canny_config: CannyConfig = None):
        """Longest-edge coastline paths for each routed predicted mask."""
        from .raster import BinaryMask

        canny_config = canny_config or CannyConfig()
        paths = []
        for mask in self.predict(X):
            binary = BinaryMask(values=mask[:, :, 0] * 255)
            paths.append(longest_edge(canny(binary, canny_config)))
        return paths
