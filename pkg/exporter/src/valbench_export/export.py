"""Write feature/logit/label arrays as checkpoint directories.

Inputs are `.npy` files or `.npz` members (addressed as `archive.npz#member`).
Output is the benchmark tree layout consumed by the scoring tool:

    <root>/<task_id>/run_<run_id>/ckpt_<index>/
        manifest.json
        <split>.features.f32  <split>.logits.f32  [<split>.labels.u32]

Array files are headerless, row-major and little-endian regardless of host
byte order; floats are cast to 32-bit with round-to-nearest. Source splits
must carry labels; target labels are optional. Exports are idempotent: a
re-export overwrites to identical bytes.

No model loading or feature extraction happens here: arrays in, format out.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SPLIT_NAMES = ("source_train", "source_val", "target")


class ExportError(ValueError):
    """Raised for inconsistent shapes, labels or spec entries."""


@dataclass(frozen=True)
class CheckpointSpec:
    """One checkpoint's metadata plus array-file locations per split."""

    task_id: str
    algorithm: str
    run_id: int
    checkpoint_index: int
    num_classes: int
    splits: dict = field(default_factory=dict)  # split -> {"features": path, ...}


def _load_array(path_spec: str, base_dir: Path) -> np.ndarray:
    name, _, member = str(path_spec).partition("#")
    path = base_dir / name
    if not path.is_file():
        raise ExportError(f"missing array file {path}")
    if path.suffix == ".npz":
        with np.load(path) as archive:
            if not member:
                raise ExportError(f"{path}: .npz inputs need a '#member' suffix")
            if member not in archive:
                raise ExportError(f"{path}: no member named {member!r}")
            return archive[member]
    if member:
        raise ExportError(f"{path}: '#member' only applies to .npz archives")
    return np.load(path)


def _as_f32(name: str, arr: np.ndarray) -> np.ndarray:
    if arr.ndim != 2:
        raise ExportError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.floating):
        raise ExportError(f"{name} must be floating point, got dtype {arr.dtype}")
    out = np.ascontiguousarray(arr, dtype="<f4")  # round-to-nearest cast
    if not np.isfinite(out).all():
        raise ExportError(f"{name} contains non-finite values after float32 cast")
    return out


def _as_u32(name: str, arr: np.ndarray, num_classes: int) -> np.ndarray:
    if arr.ndim != 1:
        raise ExportError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ExportError(f"{name} must be integer, got dtype {arr.dtype}")
    values = arr.astype(np.int64)
    if (values < 0).any() or (values >= num_classes).any():
        bad = values[(values < 0) | (values >= num_classes)][0]
        raise ExportError(f"{name} has label {bad} outside [0, {num_classes})")
    return np.ascontiguousarray(values, dtype="<u4")


def export_checkpoint(spec: CheckpointSpec, out_dir: str | Path, base_dir: str | Path = ".") -> Path:
    """Export one checkpoint directory; returns the directory path."""
    base_dir = Path(base_dir)
    out_dir = Path(out_dir)
    manifest: dict = {
        "task_id": spec.task_id,
        "algorithm": spec.algorithm,
        "run_id": int(spec.run_id),
        "checkpoint_index": int(spec.checkpoint_index),
        "num_classes": int(spec.num_classes),
    }
    arrays: dict[str, np.ndarray] = {}
    for split in SPLIT_NAMES:
        entry = spec.splits.get(split)
        if not isinstance(entry, dict) or "features" not in entry or "logits" not in entry:
            raise ExportError(f"split {split!r} needs 'features' and 'logits' array paths")
        features = _as_f32(f"{split}.features", _load_array(entry["features"], base_dir))
        logits = _as_f32(f"{split}.logits", _load_array(entry["logits"], base_dir))
        if logits.shape[0] != features.shape[0]:
            raise ExportError(
                f"{split}: features have {features.shape[0]} rows, logits {logits.shape[0]}"
            )
        if logits.shape[1] != spec.num_classes:
            raise ExportError(
                f"{split}.logits has {logits.shape[1]} columns, expected {spec.num_classes}"
            )
        labels_path = entry.get("labels")
        if labels_path is None:
            if split != "target":
                raise ExportError(f"{split} requires labels")
            labels = None
        else:
            labels = _as_u32(
                f"{split}.labels", _load_array(labels_path, base_dir), spec.num_classes
            )
            if labels.shape[0] != features.shape[0]:
                raise ExportError(
                    f"{split}: {labels.shape[0]} labels for {features.shape[0]} rows"
                )
        manifest[split] = {"n": int(features.shape[0]), "feature_dim": int(features.shape[1])}
        arrays[f"{split}.features.f32"] = features
        arrays[f"{split}.logits.f32"] = logits
        if labels is not None:
            arrays[f"{split}.labels.u32"] = labels

    out_dir.mkdir(parents=True, exist_ok=True)
    for filename, arr in arrays.items():
        (out_dir / filename).write_bytes(arr.tobytes())
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return out_dir


def export_tree(specs: list[CheckpointSpec], out_root: str | Path, base_dir: str | Path = ".") -> list[Path]:
    """Export a full benchmark tree; rejects duplicate (task, run, index) triples."""
    seen: set[tuple[str, int, int]] = set()
    for spec in specs:
        triple = (spec.task_id, int(spec.run_id), int(spec.checkpoint_index))
        if triple in seen:
            raise ExportError(f"duplicate checkpoint {triple}")
        seen.add(triple)
    out_root = Path(out_root)
    written = []
    for spec in specs:
        ckpt_dir = out_root / spec.task_id / f"run_{spec.run_id}" / f"ckpt_{spec.checkpoint_index}"
        written.append(export_checkpoint(spec, ckpt_dir, base_dir))
    return written


def load_export_spec(path: str | Path) -> tuple[list[CheckpointSpec], Path]:
    """Parse a spec file; array paths resolve relative to the file's directory."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    entries = doc.get("checkpoints")
    if not isinstance(entries, list) or not entries:
        raise ExportError(f"{path}: expected a non-empty 'checkpoints' list")
    specs = []
    for i, entry in enumerate(entries):
        try:
            specs.append(
                CheckpointSpec(
                    task_id=str(entry["task_id"]),
                    algorithm=str(entry.get("algorithm", "unknown")),
                    run_id=int(entry["run_id"]),
                    checkpoint_index=int(entry["checkpoint_index"]),
                    num_classes=int(entry["num_classes"]),
                    splits=entry["splits"],
                )
            )
        except KeyError as exc:
            raise ExportError(f"{path}: checkpoint entry {i} is missing key {exc}") from exc
    return specs, path.parent
