"""Walk an image dataset, capture intermediate feature maps, write tensors + manifest.

Expected dataset layout (one category per directory)::

    <data>/train/good/*.png
    <data>/test/<defect>/*.png          # defect "good" means normal
    <data>/ground_truth/<defect>/<stem>_mask.png

Output: one NPY v1.0 tensor file (float32, C order, shape (C, H, W))
per (image, level), resized ground-truth masks, and a ``manifest.json``
in the format the scoring pipeline ingests. The tensor format is shared
with the consumer, not converted, so files round-trip bit-exactly.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torchvision import transforms

from .backbones import get_backbone

log = logging.getLogger("gradrep_extractor")

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}

# ImageNet statistics published with the torchvision model zoo.
NORMALIZE_MEAN = (0.485, 0.456, 0.406)
NORMALIZE_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class ExtractConfig:
    backbone: str = "resnext101"
    levels: tuple[int, ...] = (1, 2, 3)
    resize: int = 224
    batch_size: int = 8
    random_weights: bool = False  # untrained backbone (pretrained-features ablation)
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.levels or not set(self.levels) <= {1, 2, 3, 4}:
            raise ValueError(f"levels must be a non-empty subset of 1-4, got {self.levels}")
        if self.resize < 1:
            raise ValueError("resize must be positive")


@dataclass
class _Sample:
    id: str
    split: str
    label: str
    path: Path
    mask: Path | None = None


def _list_images(directory: Path) -> list[Path]:
    return sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )


def discover_samples(data_dir: Path) -> list[_Sample]:
    samples: list[_Sample] = []
    train_dir = data_dir / "train" / "good"
    if train_dir.is_dir():
        for path in _list_images(train_dir):
            samples.append(_Sample(f"train_good_{path.stem}", "train", "normal", path))
    test_root = data_dir / "test"
    if test_root.is_dir():
        for defect_dir in sorted(p for p in test_root.iterdir() if p.is_dir()):
            defect = defect_dir.name
            label = "normal" if defect == "good" else "anomalous"
            for path in _list_images(defect_dir):
                mask = data_dir / "ground_truth" / defect / f"{path.stem}_mask.png"
                samples.append(
                    _Sample(
                        f"test_{defect}_{path.stem}", "test", label, path,
                        mask=mask if label == "anomalous" and mask.is_file() else None,
                    )
                )
    if not samples:
        raise FileNotFoundError(f"no images found under {data_dir} (expected train/ and test/)")
    return samples


class FeatureExtractor:
    """Frozen backbone with forward hooks on the requested stages."""

    def __init__(self, config: ExtractConfig):
        spec = get_backbone(config.backbone)
        if config.random_weights:
            torch.manual_seed(config.seed)
        try:
            model = spec.build(not config.random_weights)
        except Exception as exc:  # missing/undownloadable weights is fatal
            raise RuntimeError(
                f"could not build backbone {config.backbone!r} "
                f"(pretrained={not config.random_weights}): {exc}"
            ) from exc
        model.eval()
        for p in model.parameters():
            p.requires_grad_(False)
        self.model = model
        self.config = config
        self.spec = spec
        self._captured: dict[int, torch.Tensor] = {}
        modules = dict(model.named_modules())
        for level in config.levels:
            name = spec.level_modules[level]
            modules[name].register_forward_hook(self._hook(level))
        self.preprocess = transforms.Compose([
            transforms.Resize((config.resize, config.resize)),
            transforms.ToTensor(),
            transforms.Normalize(NORMALIZE_MEAN, NORMALIZE_STD),
        ])

    def _hook(self, level: int):
        def capture(_module, _inputs, output):
            self._captured[level] = output.detach()

        return capture

    def __call__(self, batch: torch.Tensor) -> dict[int, torch.Tensor]:
        self._captured.clear()
        with torch.no_grad():
            self.model(batch)
        missing = [lv for lv in self.config.levels if lv not in self._captured]
        if missing:
            raise RuntimeError(f"hooks captured no output for levels {missing}")
        return {lv: self._captured[lv] for lv in self.config.levels}

    def load_image(self, path: Path) -> torch.Tensor:
        with Image.open(path) as img:
            return self.preprocess(img.convert("RGB"))


def _write_npy(path: Path, array: np.ndarray) -> None:
    with open(path, "wb") as fp:
        np.lib.format.write_array(
            fp, np.ascontiguousarray(array, dtype="<f4"), version=(1, 0)
        )


def _write_mask(src: Path, dst: Path, size: int) -> None:
    with Image.open(src) as img:
        mask = img.convert("L").resize((size, size), Image.NEAREST)
        mask.point(lambda v: 255 if v > 0 else 0).save(dst)


def extract(data_dir: str | Path, out_dir: str | Path, config: ExtractConfig) -> Path:
    """Extract every sample; returns the path of the written manifest."""
    data_dir = Path(data_dir)
    out_dir = Path(out_dir)
    (out_dir / "tensors").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)

    extractor = FeatureExtractor(config)
    samples = discover_samples(data_dir)

    records: list[dict] = []
    batch: list[tuple[_Sample, torch.Tensor]] = []

    def flush() -> None:
        if not batch:
            return
        stacked = torch.stack([tensor for _, tensor in batch])
        features = extractor(stacked)
        for i, (sample, _) in enumerate(batch):
            tensors = {}
            for level in config.levels:
                rel = f"tensors/{sample.id}_l{level}.npy"
                _write_npy(out_dir / rel, features[level][i].numpy())
                tensors[str(level)] = rel
            record = {
                "id": sample.id, "split": sample.split, "label": sample.label,
                "tensors": tensors,
            }
            if sample.mask is not None:
                rel = f"masks/{sample.id}.png"
                _write_mask(sample.mask, out_dir / rel, config.resize)
                record["mask"] = rel
            records.append(record)
        batch.clear()

    for sample in samples:
        try:
            tensor = extractor.load_image(sample.path)
        except (OSError, SyntaxError) as exc:
            warnings.warn(f"skipping unreadable image {sample.path}: {exc}", stacklevel=2)
            continue
        batch.append((sample, tensor))
        if len(batch) >= config.batch_size:
            flush()
    flush()

    manifest = {
        "category": data_dir.name,
        "image_size": [config.resize, config.resize],
        "levels": [str(lv) for lv in config.levels],
        "samples": records,
        "extraction": {
            "backbone": config.backbone,
            "pretrained": not config.random_weights,
            "levels": list(config.levels),
            "resize": config.resize,
            "preprocessing": {
                "resize": [config.resize, config.resize],
                "interpolation": "bilinear",
                "normalize_mean": list(NORMALIZE_MEAN),
                "normalize_std": list(NORMALIZE_STD),
            },
        },
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    log.info("extracted %d samples to %s", len(records), out_dir)
    return manifest_path
