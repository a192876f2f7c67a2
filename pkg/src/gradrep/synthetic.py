"""Synthetic feature-map datasets for benchmarks and tests.

Each dataset seed fixes a family: a prototype field (per-channel
Gaussian-blurred white noise) and a small subset of "varying" channels.
Normal samples are the prototype plus independent blurred-noise
perturbations on the varying channels only, so normal variation lives
in a low-dimensional subspace the way real normal data does. Anomalous
samples additionally offset a small square patch by a multiple of the
field's standard deviation in a random channel subset; since most
channels never vary normally, the offset points off the normal
manifold. The patch footprint, block-upscaled to image resolution, is
the ground-truth mask.

The generator writes datasets in the standard on-disk layout (tensor
files + masks + manifest), so the whole pipeline including the CLI can
run end to end without any real data or pretrained backbone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .seeding import stream_rng
from .tensor_io import write_tensor_file


@dataclass(frozen=True)
class SyntheticSpec:
    channels: int = 32
    height: int = 28
    width: int = 28
    n_train: int = 40
    n_test_normal: int = 20
    n_test_anomalous: int = 20
    patch: int = 4
    offset_sigma: float = 3.0  # patch offset in units of the field's global std
    blur_sigma: float = 2.0
    channel_prob: float = 0.5  # probability a channel receives the patch offset
    vary_channels: int = 8  # size of the normally-varying channel subspace
    perturb_scale: float = 1.5
    image_scale: int = 4  # image resolution = feature resolution * scale

    @property
    def image_size(self) -> tuple[int, int]:
        return self.height * self.image_scale, self.width * self.image_scale


@dataclass
class FieldFamily:
    """Per-dataset structure shared by every normal sample."""

    prototype: np.ndarray  # (C, H, W) float64
    varying: np.ndarray  # indices of the channels that vary across samples


def _smooth_noise(rng: np.random.Generator, c: int, h: int, w: int, sigma: float) -> np.ndarray:
    noise = rng.standard_normal((c, h, w))
    return np.stack([gaussian_filter(ch, sigma, mode="nearest") for ch in noise])


def field_family(spec: SyntheticSpec, seed: int) -> FieldFamily:
    prototype = _smooth_noise(
        stream_rng(seed, "synthetic-prototype"), spec.channels, spec.height, spec.width,
        spec.blur_sigma,
    )
    varying = stream_rng(seed, "synthetic-family").choice(
        spec.channels, size=min(spec.vary_channels, spec.channels), replace=False
    )
    return FieldFamily(prototype=prototype, varying=np.sort(varying))


def normal_field(
    family: FieldFamily, spec: SyntheticSpec, rng: np.random.Generator
) -> np.ndarray:
    pert = _smooth_noise(rng, len(family.varying), spec.height, spec.width, spec.blur_sigma)
    out = family.prototype.copy()
    out[family.varying] += spec.perturb_scale * pert
    return out.astype(np.float32)


def plant_patch(
    field: np.ndarray, spec: SyntheticSpec, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Offset a patch in a random channel subset; returns (field, feature-res mask)."""
    c, h, w = field.shape
    r0 = int(rng.integers(0, h - spec.patch + 1))
    c0 = int(rng.integers(0, w - spec.patch + 1))
    chosen = rng.random(c) < spec.channel_prob
    if not chosen.any():
        chosen[int(rng.integers(0, c))] = True
    out = field.copy()
    offset = spec.offset_sigma * float(out.std())
    for ch in np.nonzero(chosen)[0]:
        out[ch, r0 : r0 + spec.patch, c0 : c0 + spec.patch] += offset
    mask = np.zeros((h, w), dtype=bool)
    mask[r0 : r0 + spec.patch, c0 : c0 + spec.patch] = True
    return out, mask


def generate_samples(
    spec: SyntheticSpec, seed: int
) -> tuple[list[tuple[str, np.ndarray]], list[tuple[str, str, np.ndarray, np.ndarray]]]:
    """In-memory dataset: train (id, field) and test (id, label, field, image mask)."""
    family = field_family(spec, seed)
    train = [
        (f"train_{i:03d}", normal_field(family, spec, stream_rng(seed, "synthetic-train", i)))
        for i in range(spec.n_train)
    ]
    img_h, img_w = spec.image_size
    test: list[tuple[str, str, np.ndarray, np.ndarray]] = []
    for i in range(spec.n_test_normal):
        field = normal_field(family, spec, stream_rng(seed, "synthetic-test-normal", i))
        test.append((f"test_normal_{i:03d}", "normal", field, np.zeros((img_h, img_w), bool)))
    for i in range(spec.n_test_anomalous):
        rng = stream_rng(seed, "synthetic-test-anomalous", i)
        field, feat_mask = plant_patch(normal_field(family, spec, rng), spec, rng)
        mask = np.kron(feat_mask, np.ones((spec.image_scale, spec.image_scale), dtype=bool))
        test.append((f"test_anomalous_{i:03d}", "anomalous", field, mask))
    return train, test


def write_dataset(out_dir: str | Path, spec: SyntheticSpec, seed: int, category: str = "synthetic") -> Path:
    """Write tensors, masks, and manifest under ``out_dir``; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "tensors").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    train, test = generate_samples(spec, seed)

    samples = []
    for sample_id, field in train:
        write_tensor_file(out_dir / "tensors" / f"{sample_id}.npy", field)
        samples.append(
            {"id": sample_id, "split": "train", "label": "normal",
             "tensors": {"0": f"tensors/{sample_id}.npy"}}
        )
    for sample_id, label, field, mask in test:
        write_tensor_file(out_dir / "tensors" / f"{sample_id}.npy", field)
        mask_name = f"masks/{sample_id}.png"
        Image.fromarray(mask.astype(np.uint8) * 255, mode="L").save(out_dir / mask_name)
        samples.append(
            {"id": sample_id, "split": "test", "label": label,
             "tensors": {"0": f"tensors/{sample_id}.npy"}, "mask": mask_name}
        )

    manifest = {
        "category": category,
        "image_size": list(spec.image_size),
        "levels": ["0"],
        "samples": samples,
        "generator": {"seed": seed, "offset_sigma": spec.offset_sigma,
                      "blur_sigma": spec.blur_sigma, "patch": spec.patch,
                      "vary_channels": spec.vary_channels,
                      "perturb_scale": spec.perturb_scale},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
