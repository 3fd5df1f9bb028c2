"""Scikit-learn style estimator wrappers."""

import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from ccesar.errors import ShapeError
from ccesar.estimators import (CoastlineClassifier, TwoStageExtractor,
                               UNetSegmenter)


def tiny_problem(rng, n=8, size=16):
    """Separable toy data: class 1 images are brighter overall."""
    labels = np.arange(n) % 2
    images = rng.random((n, size, size, 1)).astype(np.float32) * 0.2
    images[labels == 1] += 0.6
    masks = np.zeros((n, size, size, 1), np.float32)
    masks[:, : size // 2] = 1.0
    return images, labels, masks


FAST = dict(epochs=2, batch_size=4, seed=0)


class TestCoastlineClassifier:
    def test_get_params_round_trip(self):
        clf = CoastlineClassifier(epochs=3, seed=7)
        params = clf.get_params()
        assert params["epochs"] == 3 and params["seed"] == 7
        clone = CoastlineClassifier(**params)
        assert clone.get_params() == params

    def test_fit_predict_shapes(self, rng):
        X, y, _ = tiny_problem(rng)
        clf = CoastlineClassifier(**FAST).fit(X, y)
        preds = clf.predict(X)
        assert preds.shape == (8,)
        assert set(preds) <= {0, 1}
        proba = clf.predict_proba(X)
        assert proba.shape == (8, 2)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-6)

    def test_unfitted_raises(self, rng):
        X, _, _ = tiny_problem(rng)
        with pytest.raises(NotFittedError):
            CoastlineClassifier().predict(X)

    def test_bad_input_shape(self, rng):
        with pytest.raises(ShapeError):
            CoastlineClassifier(**FAST).fit(np.zeros((4, 16, 16)), [0, 1, 0, 1])


class TestUNetSegmenter:
    def params(self):
        return dict(FAST, unet_depth=2, unet_base_filters=2)

    def test_fit_predict_mask_shape(self, rng):
        X, _, M = tiny_problem(rng)
        seg = UNetSegmenter(**self.params()).fit(X, M)
        out = seg.predict(X)
        assert out.shape == X.shape
        assert out.dtype == np.uint8
        assert set(np.unique(out)) <= {0, 1}

    def test_mismatched_masks(self, rng):
        X, _, M = tiny_problem(rng)
        with pytest.raises(ShapeError):
            UNetSegmenter(**self.params()).fit(X, M[:, :8])

    def test_class_tag_recorded(self, rng):
        X, _, M = tiny_problem(rng)
        seg = UNetSegmenter(class_tag="built", **self.params()).fit(X, M)
        assert seg.weights_.class_tag == "built"

    def test_deterministic_given_seed(self, rng):
        X, _, M = tiny_problem(rng)
        a = UNetSegmenter(**self.params()).fit(X, M).predict_proba(X)
        b = UNetSegmenter(**self.params()).fit(X, M).predict_proba(X)
        np.testing.assert_array_equal(a, b)


class TestTwoStageExtractor:
    def test_fit_requires_masks(self, rng):
        X, y, _ = tiny_problem(rng)
        with pytest.raises(ValueError):
            TwoStageExtractor(**FAST).fit(X, y)

    def test_fit_predict_and_extract(self, rng):
        X, y, M = tiny_problem(rng)
        extractor = TwoStageExtractor(unet_depth=2, unet_base_filters=2,
                                      **FAST).fit(X, y, masks=M)
        assert extractor.segmenter_natural_.weights_.class_tag == "natural"
        assert extractor.segmenter_built_.weights_.class_tag == "built"
        out = extractor.predict(X)
        assert out.shape == X.shape
        paths = extractor.extract_coastlines(X)
        assert len(paths) == len(X)

    def test_get_params_flat(self):
        params = TwoStageExtractor().get_params()
        assert "unet_base_filters" in params and "learning_rate" in params
