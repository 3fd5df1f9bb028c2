"""Metrics, two-stage inference, and the five-experiment evaluation protocol."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import MetricUndefinedError, ModelError, ShapeError
from .models import (ClassifierNet, ModelWeights, UNet, classifier_forward,
                     model_from_weights, unet_forward)
from .postprocess import CannyConfig, CoastlinePath, avg_min_distance, canny, \
    longest_edge, symmetric_min_distance
from .preprocess import PreprocessConfig, preprocess_pipeline, resize_bilinear
from .raster import BinaryMask, Raster
from .training import ArrayDataset

EXPERIMENT_IDS = ("E1", "E2", "E3", "E4", "E5")

EXPERIMENT_TITLES = {
    "E1": "A Single Model on Both Classes",
    "E2": "Class-Matched Segmenters on Unseen Data",
    "E3": "Cross-Class Segmenters on Unseen Data",
    "E4": "Each Segmenter on Both Classes",
    "E5": "Two-Stage Workflow (Classifier Routing)",
}


def iou(pred: BinaryMask, truth: BinaryMask) -> float:
    """Land-class intersection over union; defined as 1.0 when both are empty."""
    if pred.values.shape != truth.values.shape:
        raise ShapeError(
            f"mask shapes differ: {pred.values.shape} vs {truth.values.shape}"
        )
    p = pred.land()
    t = truth.land()
    union = int(np.count_nonzero(p | t))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(p & t)) / union


@dataclass
class AccuracyReport:
    overall_pct: float
    per_class_pct: Dict[str, float]
    counts: Dict[str, Tuple[int, int]]  # class -> (correct, total)


def classification_accuracy(predictions: Sequence, labels: Sequence) -> AccuracyReport:
    """Percentage of correct predictions, overall and per true class."""
    if len(predictions) != len(labels):
        raise ShapeError("predictions and labels differ in length")
    if len(labels) == 0:
        raise MetricUndefinedError("accuracy undefined on empty input")
    counts: Dict[str, List[int]] = {}
    correct_total = 0
    for pred, label in zip(predictions, labels):
        cell = counts.setdefault(str(label), [0, 0])
        cell[1] += 1
        if pred == label:
            cell[0] += 1
            correct_total += 1
    return AccuracyReport(
        overall_pct=100.0 * correct_total / len(labels),
        per_class_pct={k: 100.0 * c / n for k, (c, n) in counts.items()},
        counts={k: (c, n) for k, (c, n) in counts.items()},
    )


# ---------------------------------------------------------------------------
# Two-stage inference

@dataclass
class InferenceConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    canny: CannyConfig = field(default_factory=CannyConfig)
    input_size: int = 64
    resolution_m: float = 10.0


ClassifierLike = Union[ModelWeights, ClassifierNet, Callable[[np.ndarray], np.ndarray]]
SegmenterLike = Union[ModelWeights, UNet, Callable[[np.ndarray], np.ndarray]]


def _classifier_fn(c: ClassifierLike) -> Callable[[np.ndarray], np.ndarray]:
    """(b, h, w, c) images -> (b,) probabilities of the built class."""
    if isinstance(c, ModelWeights):
        c = model_from_weights(c)
    if isinstance(c, ClassifierNet):
        model = c
        return lambda batch: classifier_forward(model, batch).reshape(-1)
    if callable(c):
        return lambda batch: np.asarray(c(batch), dtype=np.float64).reshape(-1)
    raise ModelError(f"not a classifier: {type(c).__name__}")


def _segmenter_fn(s: SegmenterLike) -> Callable[[np.ndarray], np.ndarray]:
    """(b, h, w, c) images -> (b, h, w, 1) probability maps."""
    if isinstance(s, ModelWeights):
        s = model_from_weights(s)
    if isinstance(s, UNet):
        model = s
        return lambda batch: unet_forward(model, batch)
    if callable(s):
        return lambda batch: np.asarray(s(batch), dtype=np.float32)
    raise ModelError(f"not a segmenter: {type(s).__name__}")


def binarize_probabilities(prob_map: np.ndarray) -> BinaryMask:
    """Per-pixel threshold at 0.5 into a land(255)/water(0) mask."""
    grid = np.asarray(prob_map)
    if grid.ndim == 3 and grid.shape[2] == 1:
        grid = grid[:, :, 0]
    return BinaryMask(values=(grid >= 0.5).astype(np.uint8) * 255)


def ccesar_infer(image: Raster, classifier: ClassifierLike,
                 seg_natural: SegmenterLike, seg_built: SegmenterLike,
                 config: InferenceConfig = None,
                 ) -> Tuple[str, BinaryMask, CoastlinePath]:
    """Classify, route to the class-specific segmenter, extract the coastline."""
    config = config or InferenceConfig()
    prepared = preprocess_pipeline(image, config.preprocess)
    img = prepared.channel(0).astype(np.float32)
    if img.shape != (config.input_size, config.input_size):
        img = resize_bilinear(img, config.input_size, config.input_size)
    batch = img[None, :, :, None]
    prob_built = float(_classifier_fn(classifier)(batch)[0])
    predicted = "built" if prob_built >= 0.5 else "natural"
    segmenter = seg_built if predicted == "built" else seg_natural
    mask = binarize_probabilities(_segmenter_fn(segmenter)(batch)[0])
    coastline = longest_edge(canny(mask, config.canny))
    return predicted, mask, coastline


# ---------------------------------------------------------------------------
# Experiment protocol

@dataclass
class ImageResult:
    index: int
    true_class: str
    model_used: str                      # natural | built | mixed
    predicted_class: Optional[str]       # set only when the classifier ran
    iou: float
    discrepancy_px: Optional[float]
    discrepancy_km: Optional[float]
    symmetric_px: Optional[float]
    symmetric_km: Optional[float]


@dataclass
class MetricsReport:
    rows: List[ImageResult]

    def subset(self, true_class: str = None, model_used: str = None) -> "MetricsReport":
        return MetricsReport(rows=[
            r for r in self.rows
            if (true_class is None or r.true_class == true_class)
            and (model_used is None or r.model_used == model_used)
        ])

    def mean_iou_pct(self) -> float:
        if not self.rows:
            raise MetricUndefinedError("no rows")
        return 100.0 * float(np.mean([r.iou for r in self.rows]))

    def accuracy(self) -> Optional[AccuracyReport]:
        judged = [r for r in self.rows if r.predicted_class is not None]
        if not judged:
            return None
        return classification_accuracy(
            [r.predicted_class for r in judged], [r.true_class for r in judged]
        )

    def mean_discrepancy(self) -> Tuple[Optional[float], Optional[float], int]:
        """(mean px, mean km, undefined count); skips undefined entries."""
        defined = [r for r in self.rows if r.discrepancy_px is not None]
        undefined = len(self.rows) - len(defined)
        if not defined:
            return None, None, undefined
        return (
            float(np.mean([r.discrepancy_px for r in defined])),
            float(np.mean([r.discrepancy_km for r in defined])),
            undefined,
        )


@dataclass
class ExperimentResult:
    experiment_id: str
    precision_tag: str                   # "8-bit" | "32-bit"
    report: MetricsReport
    group_rows: List[Tuple[str, float]]  # table rows: (description, mean IoU %)
    seed: int
    config: dict = field(default_factory=dict)


def _evaluate_images(indices, images, truths, classes, segment, model_tag,
                     canny_config, resolution_m, predicted=None) -> List[ImageResult]:
    rows = []
    if len(indices) == 0:
        return rows
    prob_maps = segment(images)
    for pos, idx in enumerate(indices):
        pred_mask = binarize_probabilities(prob_maps[pos])
        truth_mask = BinaryMask(values=(truths[pos, :, :, 0] >= 0.5).astype(np.uint8) * 255)
        value = iou(pred_mask, truth_mask)
        pred_path = longest_edge(canny(pred_mask, canny_config))
        truth_path = longest_edge(canny(truth_mask, canny_config))
        try:
            dpx, dkm = avg_min_distance(pred_path, truth_path, resolution_m)
            spx, skm = symmetric_min_distance(pred_path, truth_path, resolution_m)
        except MetricUndefinedError:
            dpx = dkm = spx = skm = None
        rows.append(ImageResult(
            index=int(idx),
            true_class=classes[pos],
            model_used=model_tag,
            predicted_class=None if predicted is None else predicted[pos],
            iou=value,
            discrepancy_px=dpx, discrepancy_km=dkm,
            symmetric_px=spx, symmetric_km=skm,
        ))
    return rows


def run_experiment(experiment_id: str, dataset: ArrayDataset,
                   weights: Dict[str, object], *,
                   canny_config: CannyConfig = None,
                   resolution_m: float = 10.0,
                   precision_tag: str = "32-bit",
                   seed: int = 0) -> ExperimentResult:
    """Run one of E1..E5 on the dataset's test split.

    ``weights`` maps roles (classifier, natural, built, mixed) to ModelWeights
    or to callables with the corresponding batch signature; only the roles the
    experiment requires must be present.
    """
    if experiment_id not in EXPERIMENT_IDS:
        raise ValueError(f"unknown experiment id {experiment_id!r}")
    canny_config = canny_config or CannyConfig()
    test = dataset.subset(split="test")
    images, truths = test.images, test.masks
    classes = test.class_names
    indices = np.arange(len(test))

    def require(role):
        if role not in weights or weights[role] is None:
            raise ModelError(f"experiment {experiment_id} needs {role!r} weights")
        return weights[role]

    rows: List[ImageResult] = []
    group_rows: List[Tuple[str, float]] = []

    def by_class(label):
        keep = np.array([c == label for c in classes])
        return indices[keep], images[keep], truths[keep], [label] * int(keep.sum())

    if experiment_id == "E1":
        segment = _segmenter_fn(require("mixed"))
        rows = _evaluate_images(indices, images, truths, classes, segment,
                                "mixed", canny_config, resolution_m)
        report = MetricsReport(rows=rows)
        group_rows = [("Single model on both classes", report.mean_iou_pct())]
    elif experiment_id in ("E2", "E3", "E4"):
        seg_n = _segmenter_fn(require("natural"))
        seg_b = _segmenter_fn(require("built"))
        targets = {
            "E2": (("natural", seg_n, "natural"), ("built", seg_b, "built")),
            "E3": (("built", seg_n, "natural"), ("natural", seg_b, "built")),
        }
        if experiment_id == "E4":
            plan = [(None, seg_n, "natural"), (None, seg_b, "built")]
        else:
            plan = list(targets[experiment_id])
        for eval_class, segment, model_tag in plan:
            if eval_class is None:
                idx, imgs, msk, cls = indices, images, truths, list(classes)
            else:
                idx, imgs, msk, cls = by_class(eval_class)
            sub = _evaluate_images(idx, imgs, msk, cls, segment, model_tag,
                                   canny_config, resolution_m)
            rows.extend(sub)
            target = "both classes" if eval_class is None else f"{eval_class} coastlines"
            label = f"S_{model_tag[0].upper()} on {target}"
            group_rows.append((label, MetricsReport(rows=sub).mean_iou_pct()))
        report = MetricsReport(rows=rows)
    else:  # E5
        classify = _classifier_fn(require("classifier"))
        seg_n = _segmenter_fn(require("natural"))
        seg_b = _segmenter_fn(require("built"))
        prob_built = classify(images)
        predicted = ["built" if p >= 0.5 else "natural" for p in prob_built]
        for route, segment in (("natural", seg_n), ("built", seg_b)):
            keep = np.array([p == route for p in predicted])
            if not keep.any():
                continue
            rows.extend(_evaluate_images(
                indices[keep], images[keep], truths[keep],
                [c for c, k in zip(classes, keep) if k], segment, route,
                canny_config, resolution_m,
                predicted=[route] * int(keep.sum()),
            ))
        rows.sort(key=lambda r: r.index)
        report = MetricsReport(rows=rows)
        group_rows = [("Two-stage workflow (routed)", report.mean_iou_pct())]

    return ExperimentResult(
        experiment_id=experiment_id,
        precision_tag=precision_tag,
        report=report,
        group_rows=group_rows,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Report emission

def _fmt(value, digits=2) -> str:
    return "—" if value is None else f"{value:.{digits}f}"


def write_report_csv(result: ExperimentResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["experiment", "precision", "seed"])
        writer.writerow([result.experiment_id, result.precision_tag, result.seed])
        writer.writerow([])
        writer.writerow(["group", "mean_iou_pct"])
        for label, value in result.group_rows:
            writer.writerow([label, f"{value:.4f}"])
        writer.writerow([])
        writer.writerow(["index", "true_class", "model_used", "predicted_class",
                         "iou", "discrepancy_px", "discrepancy_km",
                         "symmetric_px", "symmetric_km"])
        for r in result.report.rows:
            writer.writerow([
                r.index, r.true_class, r.model_used, r.predicted_class or "",
                f"{r.iou:.6f}",
                "" if r.discrepancy_px is None else f"{r.discrepancy_px:.6f}",
                "" if r.discrepancy_km is None else f"{r.discrepancy_km:.6f}",
                "" if r.symmetric_px is None else f"{r.symmetric_px:.6f}",
                "" if r.symmetric_km is None else f"{r.symmetric_km:.6f}",
            ])


def write_report_text(result: ExperimentResult, path) -> None:
    report = result.report
    lines = [
        f"Experiment {result.experiment_id}: {EXPERIMENT_TITLES[result.experiment_id]}",
        f"Precision: {result.precision_tag}   Seed: {result.seed}   "
        f"Images: {len(report.rows)}",
        "",
        f"{'Group':<42} {'Mean IoU (%)':>12}",
    ]
    for label, value in result.group_rows:
        lines.append(f"{label:<42} {value:>12.2f}")
    acc = report.accuracy()
    if acc is not None:
        lines.append("")
        lines.append(f"Classification accuracy: {acc.overall_pct:.1f}%")
        for label in sorted(acc.per_class_pct):
            correct, total = acc.counts[label]
            lines.append(
                f"  {label:<10} {acc.per_class_pct[label]:.1f}% ({correct}/{total})"
            )
    dpx, dkm, undefined = report.mean_discrepancy()
    lines.append("")
    lines.append(
        f"Mean spatial discrepancy: {_fmt(dpx)} px / {_fmt(dkm, 4)} km"
        f"   (undefined: {undefined})"
    )
    lines.append("")
    header = (f"{'idx':>4} {'class':<8} {'model':<8} {'routed':<8} "
              f"{'IoU':>8} {'disc px':>9} {'disc km':>9}")
    lines.append(header)
    for r in report.rows:
        lines.append(
            f"{r.index:>4} {r.true_class:<8} {r.model_used:<8} "
            f"{(r.predicted_class or '-'):<8} {r.iou:>8.4f} "
            f"{_fmt(r.discrepancy_px):>9} {_fmt(r.discrepancy_km, 4):>9}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
