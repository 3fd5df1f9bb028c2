"""Training recipe: BCE loss, Adam with coupled L2 decay, the 25-epoch loop.

The optimizer is implemented here (not torch.optim) so the update rule under
test is exactly the documented one; torch only supplies forward/backward.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import torch

from .errors import DataError, ShapeError
from .manifest import DatasetManifest, load_manifest, resolve_entry_paths
from .models import (ClassifierNet, ModelWeights, UNet, _model_predict,
                     _to_torch, weights_from_model)
from .preprocess import PreprocessConfig, preprocess_pipeline, resize_bilinear
from .raster import Depth
from .tiff import read_tiff

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-5
    l2_coefficient: float = 0.001
    epochs: int = 25
    batch_size: int = 12
    loss: str = "bce"
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    train_size: int = 64          # harness resizes all inputs to this square
    unet_depth: int = 4
    unet_base_filters: int = 32

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        for name in ("learning_rate", "l2_coefficient", "batch_size",
                     "adam_beta1", "adam_beta2", "adam_epsilon", "train_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def bce_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean binary cross-entropy with predictions clamped to [1e-7, 1-1e-7]."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"pred shape {pred.shape} != target shape {target.shape}")
    p = np.clip(pred, 1e-7, 1.0 - 1e-7)
    return float(-(target * np.log(p) + (1.0 - target) * np.log(1.0 - p)).mean())


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter."""

    m: Dict[str, object] = field(default_factory=dict)
    v: Dict[str, object] = field(default_factory=dict)
    step: int = 0


def adam_step(params: Dict[str, object], grads: Dict[str, object],
              state: AdamState, config: TrainConfig) -> Tuple[Dict[str, object], AdamState]:
    """One Adam update with bias correction, mutating ``params`` in place.

    L2 regularization is coupled: the decay term is added to the gradient
    before the moment updates.  Works on numpy arrays and torch tensors alike.
    """
    state.step += 1
    t = state.step
    b1, b2 = config.adam_beta1, config.adam_beta2
    for name, param in params.items():
        g = grads[name] + config.l2_coefficient * param
        m = state.m.get(name)
        v = state.v.get(name)
        m = (1 - b1) * g if m is None else b1 * m + (1 - b1) * g
        v = (1 - b2) * g * g if v is None else b2 * v + (1 - b2) * g * g
        state.m[name] = m
        state.v[name] = v
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        param -= config.learning_rate * m_hat / (v_hat ** 0.5 + config.adam_epsilon)
    return params, state


# ---------------------------------------------------------------------------
# Dataset loading for the training harness

@dataclass
class ArrayDataset:
    """Manifest contents materialized as model-ready arrays."""

    images: np.ndarray       # (n, s, s, 1) float32 in [0, 1]
    masks: np.ndarray        # (n, s, s, 1) float32 in {0, 1}
    labels: np.ndarray       # (n,) float32, natural=0 built=1
    class_names: List[str]
    splits: List[str]

    def subset(self, class_label: str = None, split: str = None) -> "ArrayDataset":
        keep = np.array([
            (class_label is None or c == class_label)
            and (split is None or s == split)
            for c, s in zip(self.class_names, self.splits)
        ])
        return ArrayDataset(
            images=self.images[keep],
            masks=self.masks[keep],
            labels=self.labels[keep],
            class_names=[c for c, k in zip(self.class_names, keep) if k],
            splits=[s for s, k in zip(self.splits, keep) if k],
        )

    def __len__(self) -> int:
        return len(self.class_names)


LABEL_OF_CLASS = {"natural": 0.0, "built": 1.0}


def load_dataset(manifest: Union[str, DatasetManifest], *,
                 preprocess: Optional[PreprocessConfig] = None,
                 train_size: int = 64) -> ArrayDataset:
    """Read, preprocess, and resize every manifest entry into arrays."""
    preprocess = preprocess or PreprocessConfig()
    manifest_path = None
    if not isinstance(manifest, DatasetManifest):
        manifest_path = str(manifest)
        manifest = load_manifest(manifest_path)
    images, masks, labels, classes, splits = [], [], [], [], []
    for entry in manifest.entries:
        if manifest_path is not None:
            image_path, mask_path = resolve_entry_paths(manifest_path, entry)
        else:
            image_path, mask_path = entry.image_path, entry.mask_path
        raster = preprocess_pipeline(read_tiff(image_path), preprocess)
        img = raster.channel(0).astype(np.float32)
        if img.shape != (train_size, train_size):
            img = resize_bilinear(img, train_size, train_size)
        mask_raster = read_tiff(mask_path)
        mask = mask_raster.channel(0).astype(np.float32)
        if mask_raster.depth is Depth.U8:
            mask = mask / 255.0
        if mask.shape != (train_size, train_size):
            mask = resize_bilinear(mask, train_size, train_size)
        mask = (mask >= 0.5).astype(np.float32)
        images.append(img[:, :, None])
        masks.append(mask[:, :, None])
        labels.append(LABEL_OF_CLASS[entry.class_label])
        classes.append(entry.class_label)
        splits.append(entry.split)
    return ArrayDataset(
        images=np.stack(images) if images else np.zeros((0, train_size, train_size, 1), np.float32),
        masks=np.stack(masks) if masks else np.zeros((0, train_size, train_size, 1), np.float32),
        labels=np.asarray(labels, dtype=np.float32),
        class_names=classes,
        splits=splits,
    )


# ---------------------------------------------------------------------------
# Training loops

def _epoch_batches(rng: np.random.Generator, n: int, batch_size: int):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]  # last incomplete batch kept


def _run_training(model, X: np.ndarray, T: np.ndarray, config: TrainConfig,
                  log_path=None) -> List[str]:
    rng = np.random.default_rng(config.seed)
    x_all = _to_torch(X, model)
    t_all = torch.from_numpy(np.ascontiguousarray(T)).to(x_all.dtype)
    params = {name: p for name, p in model.named_parameters()}
    state = AdamState()
    lines = []
    clamp_lo, clamp_hi = 1e-7, 1.0 - 1e-7
    for epoch in range(1, config.epochs + 1):
        model.train(True)
        losses = []
        correct = 0
        total = 0
        for idx in _epoch_batches(rng, len(X), config.batch_size):
            batch_idx = torch.from_numpy(np.ascontiguousarray(idx))
            xb = x_all[batch_idx]
            tb = t_all[batch_idx]
            model.zero_grad(set_to_none=True)
            pred = _model_predict(model, xb).clamp(clamp_lo, clamp_hi)
            target = tb.reshape(pred.shape)
            loss = -(target * pred.log() + (1 - target) * (1 - pred).log()).mean()
            loss.backward()
            with torch.no_grad():
                grads = {name: p.grad for name, p in params.items()}
                adam_step({name: p.data for name, p in params.items()},
                          grads, state, config)
                correct += int(((pred >= 0.5) == (target >= 0.5)).sum())
                total += target.numel()
            losses.append(float(loss.detach()))
        # training accuracy accumulated over the epoch's own batches
        metric = correct / total
        mean_loss = float(np.mean(losses))
        lines.append(f"{epoch},{mean_loss:.6f},{metric:.6f}")
        log.info("epoch %d/%d loss=%.6f metric=%.4f",
                 epoch, config.epochs, mean_loss, metric)
    model.eval()
    if log_path:
        os.makedirs(os.path.dirname(os.path.abspath(log_path)), exist_ok=True)
        with open(log_path, "w", encoding="utf-8") as fh:
            fh.write("epoch,loss,metric\n")
            fh.write("\n".join(lines) + "\n")
    return lines


def fit_classifier_arrays(X: np.ndarray, y: np.ndarray, config: TrainConfig,
                          log_path=None) -> ModelWeights:
    """Train the coastline-type classifier on (n, s, s, c) images, labels {0, 1}."""
    if len(np.unique(np.asarray(y))) < 2:
        raise DataError("classifier training needs both classes present")
    torch.manual_seed(config.seed)
    model = ClassifierNet(in_channels=X.shape[3])
    lines = _run_training(model, X, np.asarray(y, np.float32).reshape(-1, 1),
                          config, log_path)
    weights = weights_from_model(model, class_tag="mixed",
                                 epochs=config.epochs, seed=config.seed)
    weights.extra["train_log"] = lines
    return weights


def fit_segmenter_arrays(X: np.ndarray, Y: np.ndarray, config: TrainConfig,
                         class_tag: str = "mixed", log_path=None) -> ModelWeights:
    """Train a U-Net segmenter on (n, s, s, c) images and {0, 1} masks."""
    if len(X) == 0:
        raise DataError("segmenter training set is empty")
    torch.manual_seed(config.seed)
    model = UNet(in_channels=X.shape[3], depth=config.unet_depth,
                 base_filters=config.unet_base_filters)
    lines = _run_training(model, X, np.asarray(Y, np.float32), config, log_path)
    weights = weights_from_model(model, class_tag=class_tag,
                                 epochs=config.epochs, seed=config.seed)
    weights.extra["train_log"] = lines
    return weights


def train_classifier(manifest: Union[str, DatasetManifest], config: TrainConfig,
                     *, preprocess: Optional[PreprocessConfig] = None,
                     dataset: Optional[ArrayDataset] = None,
                     log_path=None) -> ModelWeights:
    """Train the classifier on a manifest's train split (both classes)."""
    data = dataset or load_dataset(manifest, preprocess=preprocess,
                                   train_size=config.train_size)
    train = data.subset(split="train")
    if len(set(train.class_names)) < 2:
        raise DataError("manifest train split must contain both classes")
    return fit_classifier_arrays(train.images, train.labels, config, log_path)


def train_segmenter(manifest: Union[str, DatasetManifest], class_filter: str,
                    config: TrainConfig, *,
                    preprocess: Optional[PreprocessConfig] = None,
                    dataset: Optional[ArrayDataset] = None,
                    log_path=None) -> ModelWeights:
    """Train a segmenter on the train split, optionally restricted to one class.

    ``class_filter`` is natural, built, or both; "both" yields the mixed model.
    """
    if class_filter not in ("natural", "built", "both"):
        raise DataError(f"unknown class filter {class_filter!r}")
    data = dataset or load_dataset(manifest, preprocess=preprocess,
                                   train_size=config.train_size)
    selector = None if class_filter == "both" else class_filter
    train = data.subset(class_label=selector, split="train")
    if len(train) == 0:
        raise DataError(f"no training entries for class filter {class_filter!r}")
    tag = "mixed" if class_filter == "both" else class_filter
    return fit_segmenter_arrays(train.images, train.masks, config, tag, log_path)
