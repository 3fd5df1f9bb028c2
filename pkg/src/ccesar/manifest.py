"""Dataset manifests: image/mask paths with class labels and train/test splits."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from .errors import ManifestError

CLASSES = ("natural", "built")
SPLITS = ("train", "test")


@dataclass(frozen=True)
class ManifestEntry:
    image_path: str
    mask_path: str
    class_label: str  # natural | built
    split: str        # train | test

    def __post_init__(self):
        if self.class_label not in CLASSES:
            raise ManifestError(f"unknown class label {self.class_label!r}")
        if self.split not in SPLITS:
            raise ManifestError(f"unknown split {self.split!r}")


@dataclass
class DatasetManifest:
    entries: List[ManifestEntry] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.image_path in seen:
                raise ManifestError(f"duplicate image path {e.image_path!r}")
            seen.add(e.image_path)

    def counts(self) -> Dict[Tuple[str, str], int]:
        """(class, split) -> entry count, all four cells always present."""
        table = {(c, s): 0 for c in CLASSES for s in SPLITS}
        for e in self.entries:
            table[(e.class_label, e.split)] += 1
        return table

    def subset(self, class_label: str = None, split: str = None) -> "DatasetManifest":
        kept = [
            e
            for e in self.entries
            if (class_label is None or e.class_label == class_label)
            and (split is None or e.split == split)
        ]
        return DatasetManifest(entries=kept)

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DatasetManifest):
            return NotImplemented
        return self.entries == other.entries


def load_manifest(path, check_paths: bool = True) -> DatasetManifest:
    """Load a comma-separated manifest; '#' starts a comment line.

    Each entry line is ``image_path,mask_path,class,split``.
    """
    if not os.path.isfile(path):
        raise ManifestError(f"manifest file not found: {path}")
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 4:
                raise ManifestError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            image_path, mask_path, class_label, split = parts
            try:
                entry = ManifestEntry(image_path, mask_path, class_label, split)
            except ManifestError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
            if check_paths:
                for p in (entry.image_path, entry.mask_path):
                    resolved = p if os.path.isabs(p) else os.path.join(base, p)
                    if not os.path.isfile(resolved):
                        raise ManifestError(f"{path}:{lineno}: missing file {p}")
            entries.append(entry)
    try:
        return DatasetManifest(entries=entries)
    except ManifestError as exc:
        raise ManifestError(f"{path}: {exc}") from exc


def save_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# image_path,mask_path,class,split\n")
        for e in manifest.entries:
            fh.write(f"{e.image_path},{e.mask_path},{e.class_label},{e.split}\n")


def resolve_entry_paths(manifest_path, entry: ManifestEntry) -> Tuple[str, str]:
    """Absolute (image, mask) paths for an entry, relative to the manifest file."""
    base = os.path.dirname(os.path.abspath(manifest_path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    return resolve(entry.image_path), resolve(entry.mask_path)
