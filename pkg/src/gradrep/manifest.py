"""Dataset manifests: sample records, eager validation, mask loading.

The manifest is a JSON document::

    {
      "category": "bottle",
      "image_size": [h, w],
      "levels": ["1", "2", "3"],
      "samples": [
        {"id": "...", "split": "train"|"test", "label": "normal"|"anomalous",
         "tensors": {"1": "path.npy", ...}, "mask": "optional.png"}
      ]
    }

Paths are resolved relative to the manifest file. Validation happens
at load time so a broken dataset fails before any long-running work:
every tensor file must exist for every declared level, train records
must be labeled normal, and masks (test records only) must exist and
match the declared image resolution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ManifestError

SPLITS = ("train", "test")
LABELS = ("normal", "anomalous")


@dataclass(frozen=True)
class SampleRecord:
    id: str
    split: str
    label: str
    tensor_paths: dict[str, Path]
    mask_path: Path | None = None


@dataclass
class DatasetManifest:
    category: str
    image_height: int
    image_width: int
    levels: list[str]
    samples: list[SampleRecord]
    metadata: dict = field(default_factory=dict)

    @property
    def train_records(self) -> list[SampleRecord]:
        return [s for s in self.samples if s.split == "train"]

    @property
    def test_records(self) -> list[SampleRecord]:
        return [s for s in self.samples if s.split == "test"]


def _mask_size(path: Path) -> tuple[int, int]:
    # PIL reads only the header here, so eager validation stays cheap.
    with Image.open(path) as img:
        width, height = img.size
    return height, width


def load_mask(record: SampleRecord, manifest: DatasetManifest) -> np.ndarray:
    """Load a ground-truth mask as a (h, w) boolean array; nonzero = anomalous."""
    if record.mask_path is None:
        raise ManifestError(f"record {record.id!r} has no mask")
    with Image.open(record.mask_path) as img:
        mask = np.asarray(img.convert("L")) > 0
    return mask


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    root = path.parent

    for key in ("category", "image_size", "levels", "samples"):
        if key not in doc:
            raise ManifestError(f"manifest missing field {key!r}")
    image_size = doc["image_size"]
    if (
        not isinstance(image_size, (list, tuple))
        or len(image_size) != 2
        or not all(isinstance(n, int) and n > 0 for n in image_size)
    ):
        raise ManifestError(f"image_size must be [h, w] with positive ints, got {image_size!r}")
    levels = [str(l) for l in doc["levels"]]
    if not levels:
        raise ManifestError("manifest declares no levels")

    samples: list[SampleRecord] = []
    seen_ids: set[str] = set()
    for raw in doc["samples"]:
        rid = str(raw.get("id", ""))
        if not rid:
            raise ManifestError("sample record without id")
        if rid in seen_ids:
            raise ManifestError(f"duplicate sample id {rid!r}")
        seen_ids.add(rid)
        split = raw.get("split")
        if split not in SPLITS:
            raise ManifestError(f"record {rid!r}: split must be train or test, got {split!r}")
        label = raw.get("label")
        if label not in LABELS:
            raise ManifestError(f"record {rid!r}: label must be normal or anomalous, got {label!r}")
        if split == "train" and label != "normal":
            raise ManifestError(f"record {rid!r}: train records must be labeled normal")

        tensors = raw.get("tensors", {})
        tensor_paths: dict[str, Path] = {}
        for level in levels:
            if level not in tensors:
                raise ManifestError(f"record {rid!r}: missing tensor for level {level!r}")
            tpath = root / tensors[level]
            if not tpath.is_file():
                raise ManifestError(f"record {rid!r}: tensor file not found: {tpath}")
            tensor_paths[level] = tpath

        mask_path: Path | None = None
        if raw.get("mask") is not None:
            if split != "test":
                raise ManifestError(f"record {rid!r}: mask allowed on test records only")
            mask_path = root / raw["mask"]
            if not mask_path.is_file():
                raise ManifestError(f"record {rid!r}: mask file not found: {mask_path}")
            if _mask_size(mask_path) != tuple(image_size):
                raise ManifestError(
                    f"record {rid!r}: mask size {_mask_size(mask_path)} "
                    f"does not match image_size {tuple(image_size)}"
                )

        samples.append(SampleRecord(rid, split, label, tensor_paths, mask_path))

    known = {"category", "image_size", "levels", "samples"}
    metadata = {k: v for k, v in doc.items() if k not in known}
    return DatasetManifest(
        category=str(doc["category"]),
        image_height=image_size[0],
        image_width=image_size[1],
        levels=levels,
        samples=samples,
        metadata=metadata,
    )
