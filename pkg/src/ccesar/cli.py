"""Command-line entry point orchestrating the workflow stages.

Commands: synth, genmasks, preprocess, train, experiment, extract.  A single
run seed fans out deterministically to every stage; per-image stages accept a
worker-pool size and default to 1 worker for reproducible runs.
"""

from __future__ import annotations

import argparse
import dataclasses
import glob
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .errors import CCESARError, ConfigError, ManifestError
from .evaluation import (EXPERIMENT_IDS, binarize_probabilities, ccesar_infer,
                         InferenceConfig, run_experiment, write_report_csv,
                         write_report_text)
from .maskgen import generate_mask_for_raster, load_polygons
from .models import load_weights, save_weights
from .overlay import write_overlay_png
from .postprocess import CannyConfig, canny, longest_edge, save_coastline
from .preprocess import PreprocessConfig, preprocess_pipeline
from .raster import BinaryMask, Depth, Raster
from .synthgen import SynthConfig, generate_dataset
from .tiff import read_tiff, write_tiff
from .training import (TrainConfig, load_dataset, train_classifier,
                       train_segmenter)

log = logging.getLogger(__name__)

PRECISION_FLAGS = {"8bit": "u8", "32bit": "f32"}
PRECISION_TAGS = {"u8": "8-bit", "f32": "32-bit"}

WEIGHT_FILES = {
    "classifier": "classifier.ccw",
    "seg-natural": "seg_natural.ccw",
    "seg-built": "seg_built.ccw",
    "seg-mixed": "seg_mixed.ccw",
}

EXPERIMENT_ROLES = {
    "E1": ("mixed",),
    "E2": ("natural", "built"),
    "E3": ("natural", "built"),
    "E4": ("natural", "built"),
    "E5": ("classifier", "natural", "built"),
}


@dataclass
class RunConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    canny: CannyConfig = field(default_factory=CannyConfig)
    data_dir: str = "data"
    weights_dir: str = "weights"
    report_dir: str = "reports"
    precision: str = "f32"      # u8 | f32
    seed: int = 0
    workers: int = 1

    @property
    def precision_tag(self) -> str:
        return PRECISION_TAGS[self.precision]


_CONFIG_SECTIONS = {
    "synth": SynthConfig,
    "preprocess": PreprocessConfig,
    "train": TrainConfig,
    "canny": CannyConfig,
}

_RUN_KEYS = {
    "data_dir": str, "weights_dir": str, "report_dir": str,
    "precision": str, "seed": int, "workers": int,
}


def _coerce(raw: str, kind):
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind is tuple or kind == "tuple":
        return tuple(float(tok) for tok in raw.replace(",", " ").split())
    if kind is Optional[float] or kind == Optional[float]:
        return None if raw.lower() == "none" else float(raw)
    return kind(raw)


def _field_types(cls) -> Dict[str, type]:
    out = {}
    for f in dataclasses.fields(cls):
        t = f.type
        if isinstance(t, str):
            t = {"int": int, "float": float, "str": str, "bool": bool,
                 "Tuple[float, float]": tuple,
                 "Optional[float]": Optional[float]}.get(t, str)
        out[f.name] = t
    return out


def parse_config_file(path) -> Dict[str, Dict[str, str]]:
    """Line-oriented ``section.key = value`` text; ``#`` starts a comment."""
    sections: Dict[str, Dict[str, str]] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw_lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(raw_lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected 'section.key = value'")
        lhs, value = text.split("=", 1)
        lhs = lhs.strip()
        if "." not in lhs:
            raise ConfigError(f"{path}:{lineno}: key must be 'section.key'")
        section, key = lhs.split(".", 1)
        sections.setdefault(section.strip(), {})[key.strip()] = value.strip()
    return sections


def build_run_config(config_path=None, overrides: dict = None) -> RunConfig:
    run = RunConfig()
    sections = parse_config_file(config_path) if config_path else {}
    for section, pairs in sections.items():
        if section == "run":
            for key, raw in pairs.items():
                if key not in _RUN_KEYS:
                    raise ConfigError(f"unknown config key run.{key}")
                try:
                    setattr(run, key, _coerce(raw, _RUN_KEYS[key]))
                except ValueError as exc:
                    raise ConfigError(f"bad value for run.{key}: {exc}") from exc
            continue
        if section not in _CONFIG_SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        sub = getattr(run, section)
        types = _field_types(type(sub))
        for key, raw in pairs.items():
            if key not in types:
                raise ConfigError(f"unknown config key {section}.{key}")
            try:
                setattr(sub, key, _coerce(raw, types[key]))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {section}.{key}: {exc}") from exc
        try:
            type(sub).__post_init__(sub)
        except ValueError as exc:
            raise ConfigError(f"invalid [{section}] configuration: {exc}") from exc
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(run, key, value)
    if run.precision not in ("u8", "f32"):
        raise ConfigError(f"unknown precision {run.precision!r}")
    if run.workers < 1:
        raise ConfigError("workers must be >= 1")
    # the run seed fans out to every stage
    run.synth.seed = run.seed
    run.train.seed = run.seed
    run.synth.precision = run.precision
    return run


def _derived_seed(base: int, role: str) -> int:
    ss = np.random.SeedSequence(entropy=base, spawn_key=(hash_role(role),))
    return int(ss.generate_state(1)[0])


def hash_role(role: str) -> int:
    order = ("classifier", "seg-natural", "seg-built", "seg-mixed")
    return order.index(role)


def _require_file(path, what: str):
    if not os.path.isfile(path):
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _dataset_dir(run: RunConfig) -> str:
    return os.path.join(run.data_dir, run.precision)


def _load_run_dataset(run: RunConfig):
    manifest = _require_file(os.path.join(_dataset_dir(run), "manifest.txt"),
                             "dataset manifest")
    return load_dataset(manifest, preprocess=run.preprocess,
                        train_size=run.train.train_size)


# ---------------------------------------------------------------------------
# Commands

def cmd_synth(run: RunConfig, args) -> int:
    out_dir = _dataset_dir(run)
    manifest = generate_dataset(run.synth, out_dir)
    counts = manifest.counts()
    log.info("wrote %d entries to %s", len(manifest.entries), out_dir)
    print(f"synth: {len(manifest.entries)} scenes ({counts}) -> {out_dir}")
    return 0


def cmd_genmasks(run: RunConfig, args) -> int:
    polygons = load_polygons(_require_file(args.polygons, "polygon file"))
    if not os.path.isdir(args.rasters):
        raise FileNotFoundError(f"raster directory not found: {args.rasters}")
    paths = sorted(glob.glob(os.path.join(args.rasters, "*.tif")))
    paths = [p for p in paths if not p.endswith("_mask.tif")]
    if not paths:
        raise FileNotFoundError(f"no .tif rasters in {args.rasters}")
    for path in paths:
        raster = read_tiff(path)
        mask = generate_mask_for_raster(raster, polygons)
        mask_raster = Raster(pixels=mask.values[:, :, None], depth=Depth.U8,
                             ground_resolution_m=raster.ground_resolution_m,
                             geo_bbox=raster.geo_bbox)
        out = path[: -len(".tif")] + "_mask.tif"
        write_tiff(mask_raster, out)
        log.info("mask %s land fraction %.3f", out, mask.land_fraction)
    print(f"genmasks: wrote {len(paths)} masks")
    return 0


def _preprocess_one(task):
    src, dst, config = task
    derived = preprocess_pipeline(read_tiff(src), config)
    write_tiff(derived, dst)
    return dst


def cmd_preprocess(run: RunConfig, args) -> int:
    from .manifest import load_manifest, resolve_entry_paths, save_manifest

    manifest_path = _require_file(args.manifest, "manifest")
    manifest = load_manifest(manifest_path)
    out_dir = args.out or os.path.join(run.data_dir, "preprocessed")
    os.makedirs(out_dir, exist_ok=True)
    tasks = []
    for entry in manifest.entries:
        image_path, _ = resolve_entry_paths(manifest_path, entry)
        tasks.append((image_path,
                      os.path.join(out_dir, os.path.basename(entry.image_path)),
                      run.preprocess))
    if run.workers > 1:
        import multiprocessing

        with multiprocessing.Pool(run.workers) as pool:
            pool.map(_preprocess_one, tasks)
    else:
        for task in tasks:
            _preprocess_one(task)
    # masks are copied untouched so the output directory is self-contained
    import shutil

    for entry in manifest.entries:
        _, mask_path = resolve_entry_paths(manifest_path, entry)
        shutil.copyfile(mask_path,
                        os.path.join(out_dir, os.path.basename(entry.mask_path)))
    save_manifest(manifest, os.path.join(out_dir, "manifest.txt"))
    print(f"preprocess: {len(tasks)} rasters -> {out_dir}")
    return 0


def cmd_train(run: RunConfig, args) -> int:
    manifest = args.manifest or os.path.join(_dataset_dir(run), "manifest.txt")
    _require_file(manifest, "manifest")
    os.makedirs(run.weights_dir, exist_ok=True)
    role = args.role
    config = dataclasses.replace(run.train, seed=_derived_seed(run.seed, role))
    log_path = os.path.join(run.weights_dir, role.replace("-", "_") + "_log.csv")
    if role == "classifier":
        weights = train_classifier(manifest, config, preprocess=run.preprocess,
                                   log_path=log_path)
    else:
        class_filter = {"seg-natural": "natural", "seg-built": "built",
                        "seg-mixed": "both"}[role]
        weights = train_segmenter(manifest, class_filter, config,
                                  preprocess=run.preprocess, log_path=log_path)
    out = os.path.join(run.weights_dir, WEIGHT_FILES[role])
    save_weights(weights, out)
    print(f"train {role}: weights -> {out}")
    return 0


def _load_role_weights(run: RunConfig, roles) -> dict:
    loaded = {}
    for role in roles:
        file_role = {"classifier": "classifier", "natural": "seg-natural",
                     "built": "seg-built", "mixed": "seg-mixed"}[role]
        path = _require_file(os.path.join(run.weights_dir, WEIGHT_FILES[file_role]),
                             f"{file_role} weights")
        loaded[role] = load_weights(path)
    return loaded


def _write_experiment_overlays(run: RunConfig, experiment_id, dataset, result):
    overlay_dir = os.path.join(run.report_dir, f"{experiment_id}_overlays")
    os.makedirs(overlay_dir, exist_ok=True)
    test = dataset.subset(split="test")
    for row in result.report.rows:
        image = test.images[row.index]
        truth = BinaryMask(
            values=(test.masks[row.index, :, :, 0] >= 0.5).astype(np.uint8) * 255)
        raster = Raster(pixels=image.astype(np.float32), depth=Depth.F32)
        path = longest_edge(canny(truth, run.canny))
        write_overlay_png(raster, truth, path,
                          os.path.join(overlay_dir, f"{row.index:04d}.png"))


def cmd_experiment(run: RunConfig, args) -> int:
    ids = list(EXPERIMENT_IDS) if args.id == "all" else [args.id]
    dataset = _load_run_dataset(run)
    os.makedirs(run.report_dir, exist_ok=True)
    for experiment_id in ids:
        weights = _load_role_weights(run, EXPERIMENT_ROLES[experiment_id])
        result = run_experiment(
            experiment_id, dataset, weights, canny_config=run.canny,
            precision_tag=run.precision_tag, seed=run.seed)
        base = os.path.join(run.report_dir, experiment_id)
        write_report_text(result, base + "_report.txt")
        write_report_csv(result, base + "_report.csv")
        if args.overlays:
            _write_experiment_overlays(run, experiment_id, dataset, result)
        summary = "; ".join(f"{label}: {value:.2f}%"
                            for label, value in result.group_rows)
        print(f"{experiment_id}: {summary}")
    return 0


def cmd_extract(run: RunConfig, args) -> int:
    image_path = _require_file(args.image, "input image")
    weights = _load_role_weights(run, ("classifier", "natural", "built"))
    raster = read_tiff(image_path)
    infer_config = InferenceConfig(preprocess=run.preprocess, canny=run.canny,
                                   input_size=run.train.train_size)
    predicted, mask, coastline = ccesar_infer(
        raster, weights["classifier"], weights["natural"], weights["built"],
        infer_config)
    log.info("routing: %s", predicted)
    out_dir = args.out or run.report_dir
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(image_path))[0]
    coastline_path = os.path.join(out_dir, stem + "_coastline.txt")
    overlay_path = os.path.join(out_dir, stem + "_overlay.png")
    save_coastline(coastline, coastline_path)
    # render the overlay on the preprocessed image at inference resolution
    from .preprocess import resize_bilinear

    prepared = preprocess_pipeline(raster, run.preprocess)
    img = prepared.channel(0).astype(np.float32)
    if img.shape != mask.values.shape:
        img = resize_bilinear(img, *mask.values.shape)
    write_overlay_png(Raster(pixels=img[:, :, None], depth=Depth.F32), mask,
                      coastline, overlay_path)
    print(f"extract: class={predicted} coastline={coastline_path} "
          f"overlay={overlay_path}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccesar",
        description="Two-stage SAR coastline extraction workflow.")
    parser.add_argument("--config", help="path to a section.key = value file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--precision", choices=sorted(PRECISION_FLAGS))
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", default=None,
                        help="output directory override for the command")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", help="generate the synthetic corpus")

    p = sub.add_parser("genmasks", help="rasterize land polygons into masks")
    p.add_argument("rasters", help="directory of GeoTIFF rasters")
    p.add_argument("polygons", help="polygon file (text or GeoJSON)")

    p = sub.add_parser("preprocess", help="write preprocessed rasters")
    p.add_argument("manifest")

    p = sub.add_parser("train", help="train one model role")
    p.add_argument("role", choices=sorted(WEIGHT_FILES))
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("experiment", help="run an evaluation experiment")
    p.add_argument("id", choices=list(EXPERIMENT_IDS) + ["all"])
    p.add_argument("--overlays", action="store_true",
                   help="also write per-image overlay PNGs")

    p = sub.add_parser("extract", help="extract a coastline from one image")
    p.add_argument("image")
    p.add_argument("--weights-dir", default=None)
    return parser


_COMMANDS = {
    "synth": cmd_synth,
    "genmasks": cmd_genmasks,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "experiment": cmd_experiment,
    "extract": cmd_extract,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        overrides = {"seed": args.seed, "workers": args.workers}
        if args.precision:
            overrides["precision"] = PRECISION_FLAGS[args.precision]
        if args.out and args.command == "synth":
            overrides["data_dir"] = args.out
        if args.out and args.command == "experiment":
            overrides["report_dir"] = args.out
        if getattr(args, "weights_dir", None):
            overrides["weights_dir"] = args.weights_dir
        run = build_run_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](run, args)
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return 3
    except ManifestError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return 3
    except CCESARError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
