"""On-disk artifacts: model and repository snapshots, score CSVs, attention maps.

Snapshots are plain zip containers with one NPY entry per tensor and a
JSON metadata entry. Zip entries carry a fixed timestamp and no
compression, so a snapshot's bytes are a pure function of its contents
and runs are reproducible file-for-file.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import asdict
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError
from .evaluation import EvalReport
from .learner import AdamState, MlpParams, TrainConfig
from .scorer import AnomalyResult
from .selector import Repository
from .tensor_io import write_tensor_file

_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)

MODEL_FORMAT = "gradrep-model/1"
REPOSITORY_FORMAT = "gradrep-repository/1"


def _npy_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(array), version=(1, 0))
    return buf.getvalue()


def _read_npy(data: bytes) -> np.ndarray:
    return np.lib.format.read_array(io.BytesIO(data), allow_pickle=False)


def _write_container(path: str | Path, entries: dict[str, bytes]) -> None:
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name in sorted(entries):
            info = zipfile.ZipInfo(name, date_time=_ZIP_EPOCH)
            zf.writestr(info, entries[name])


def save_model_snapshot(path: str | Path, params: MlpParams, config: TrainConfig) -> None:
    meta = {
        "format": MODEL_FORMAT,
        "dims": {"c_in": params.c_in, "hidden": params.hidden, "c_out": params.c_out},
        "config": asdict(config),
        "adam_steps": {name: state.step for name, state in params.adam.items()},
    }
    entries = {"meta.json": json.dumps(meta, indent=2, sort_keys=True).encode()}
    for name, tensor in params.tensors().items():
        entries[f"{name}.npy"] = _npy_bytes(tensor)
        entries[f"adam_m_{name}.npy"] = _npy_bytes(params.adam[name].m)
        entries[f"adam_v_{name}.npy"] = _npy_bytes(params.adam[name].v)
    _write_container(path, entries)


def load_model_snapshot(path: str | Path) -> tuple[MlpParams, TrainConfig]:
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("format") != MODEL_FORMAT:
            raise FormatError(f"{path}: not a model snapshot")
        arrays = {
            name.removesuffix(".npy"): _read_npy(zf.read(name))
            for name in zf.namelist()
            if name.endswith(".npy")
        }
    params = MlpParams(w1=arrays["w1"], b1=arrays["b1"], w2=arrays["w2"], b2=arrays["b2"])
    params.adam = {
        name: AdamState(
            m=arrays[f"adam_m_{name}"],
            v=arrays[f"adam_v_{name}"],
            step=meta["adam_steps"][name],
        )
        for name in params.tensors()
    }
    return params, TrainConfig(**meta["config"])


def save_repository_snapshot(path: str | Path, repo: Repository) -> None:
    meta = {
        "format": REPOSITORY_FORMAT,
        "rows": int(repo.rows.shape[0]),
        "channels": int(repo.rows.shape[1]),
    }
    entries = {
        "meta.json": json.dumps(meta, indent=2, sort_keys=True).encode(),
        "rows.npy": _npy_bytes(repo.rows),
        "provenance.json": json.dumps(
            [[sid, r, c] for sid, r, c in repo.provenance], separators=(",", ":")
        ).encode(),
    }
    _write_container(path, entries)


def load_repository_snapshot(path: str | Path) -> Repository:
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("format") != REPOSITORY_FORMAT:
            raise FormatError(f"{path}: not a repository snapshot")
        rows = _read_npy(zf.read("rows.npy"))
        provenance = [
            (sid, int(r), int(c)) for sid, r, c in json.loads(zf.read("provenance.json"))
        ]
    return Repository(rows=rows, provenance=provenance)


def write_scores_csv(path: str | Path, report: EvalReport) -> None:
    lines = ["id,label,image_score"]
    lines += [
        f"{s['id']},{s['label']},{s['image_score']!r}" for s in report.sample_scores
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def write_report_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_attention_outputs(out_dir: str | Path, results: list[AnomalyResult]) -> None:
    """One tensor file (1, h, w) plus an 8-bit PNG rendering per test sample.

    PNGs share a single linear min-max scale across the whole test set so
    their gray levels are comparable between images.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not results:
        return
    lo = min(float(res.attention_map.min()) for res in results)
    hi = max(float(res.attention_map.max()) for res in results)
    span = hi - lo if hi > lo else 1.0
    for res in results:
        att32 = res.attention_map.astype(np.float32)[None, :, :]
        write_tensor_file(out_dir / f"{res.sample_id}.npy", att32)
        gray = np.clip((res.attention_map - lo) / span * 255.0, 0.0, 255.0)
        Image.fromarray(np.round(gray).astype(np.uint8), mode="L").save(
            out_dir / f"{res.sample_id}.png"
        )
