"""On-disk and in-memory model of checkpoints, tasks and runs.

Directory layout::

    <root>/<task_id>/run_<run_id>/ckpt_<index>/
        manifest.json
        source_train.features.f32   source_train.logits.f32   source_train.labels.u32
        source_val.features.f32     source_val.logits.f32     source_val.labels.u32
        target.features.f32         target.logits.f32         [target.labels.u32]

Array files are headerless, row-major and little-endian: `.f32` holds 32-bit
floats, `.u32` unsigned 32-bit labels. The manifest is UTF-8 JSON with keys
`task_id`, `algorithm`, `run_id`, `checkpoint_index`, `num_classes`, and one
`{"n": rows, "feature_dim": cols}` object per split. Source splits must carry
labels; target labels are optional and only enable oracle metrics.

Records are immutable after load and safe to share across parallel workers.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "SPLIT_NAMES",
    "CheckpointFormatError",
    "SplitData",
    "CheckpointRecord",
    "CheckpointRef",
    "BenchmarkIndex",
    "load_checkpoint",
    "save_checkpoint",
    "scan_benchmark",
    "validate_record",
]

SPLIT_NAMES = ("source_train", "source_val", "target")

_RUN_DIR = re.compile(r"^run_(\d+)$")
_CKPT_DIR = re.compile(r"^ckpt_(\d+)$")


class CheckpointFormatError(ValueError):
    """Raised when a checkpoint directory or record violates the format."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SplitData:
    """Feature/logit arrays for one data split, plus labels where available."""

    features: np.ndarray  # (n, d) float32
    logits: np.ndarray  # (n, c) float32
    labels: np.ndarray | None = None  # (n,) uint32 class indices

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class CheckpointRecord:
    """One saved model snapshot reduced to per-split arrays."""

    task_id: str
    algorithm: str
    run_id: int
    checkpoint_index: int
    num_classes: int
    source_train: SplitData
    source_val: SplitData
    target: SplitData

    def split(self, name: str) -> SplitData:
        if name not in SPLIT_NAMES:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)


@dataclass(frozen=True)
class CheckpointRef:
    """Location of one checkpoint inside a benchmark tree."""

    task_id: str
    run_id: int
    checkpoint_index: int
    path: Path


@dataclass(frozen=True)
class BenchmarkIndex:
    """All checkpoints of a benchmark tree in deterministic order."""

    root: Path
    refs: tuple[CheckpointRef, ...]

    @property
    def tasks(self) -> list[str]:
        seen: dict[str, None] = {}
        for ref in self.refs:
            seen.setdefault(ref.task_id, None)
        return list(seen)

    def runs(self, task_id: str) -> list[int]:
        seen: dict[int, None] = {}
        for ref in self.refs:
            if ref.task_id == task_id:
                seen.setdefault(ref.run_id, None)
        return list(seen)

    def __len__(self) -> int:
        return len(self.refs)


def _read_array(path: Path, dtype: str, rows: int, cols: int | None) -> np.ndarray:
    if not path.is_file():
        raise CheckpointFormatError(f"missing array file {path}")
    data = np.fromfile(path, dtype=np.dtype(dtype))
    expected = rows * cols if cols is not None else rows
    if data.size != expected:
        raise CheckpointFormatError(
            f"{path}: expected {expected} entries, file holds {data.size}"
        )
    if cols is not None:
        data = data.reshape(rows, cols)
    return _frozen(data)


def load_checkpoint(path: str | Path) -> CheckpointRecord:
    """Load and validate one checkpoint directory."""
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.is_file():
        raise CheckpointFormatError(f"missing manifest {manifest_path}")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)

    for key in ("task_id", "algorithm", "run_id", "checkpoint_index", "num_classes"):
        if key not in manifest:
            raise CheckpointFormatError(f"{manifest_path}: missing key {key!r}")
    num_classes = int(manifest["num_classes"])

    splits = {}
    for split in SPLIT_NAMES:
        meta = manifest.get(split)
        if not isinstance(meta, dict) or "n" not in meta or "feature_dim" not in meta:
            raise CheckpointFormatError(
                f"{manifest_path}: split {split!r} needs an object with 'n' and 'feature_dim'"
            )
        n, dim = int(meta["n"]), int(meta["feature_dim"])
        features = _read_array(path / f"{split}.features.f32", "<f4", n, dim)
        logits = _read_array(path / f"{split}.logits.f32", "<f4", n, num_classes)
        labels_path = path / f"{split}.labels.u32"
        labels = None
        if labels_path.is_file():
            labels = _read_array(labels_path, "<u4", n, None)
        elif split != "target":
            raise CheckpointFormatError(f"missing required labels file {labels_path}")
        splits[split] = SplitData(features=features, logits=logits, labels=labels)

    record = CheckpointRecord(
        task_id=str(manifest["task_id"]),
        algorithm=str(manifest["algorithm"]),
        run_id=int(manifest["run_id"]),
        checkpoint_index=int(manifest["checkpoint_index"]),
        num_classes=num_classes,
        **splits,
    )
    problems = validate_record(record)
    if problems:
        raise CheckpointFormatError(f"{path}: " + "; ".join(problems))
    return record


def save_checkpoint(record: CheckpointRecord, path: str | Path) -> Path:
    """Write a record to one checkpoint directory (bit-exact round trip)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "task_id": record.task_id,
        "algorithm": record.algorithm,
        "run_id": record.run_id,
        "checkpoint_index": record.checkpoint_index,
        "num_classes": record.num_classes,
    }
    for split in SPLIT_NAMES:
        data = record.split(split)
        manifest[split] = {"n": int(data.n), "feature_dim": int(data.feature_dim)}
        (path / f"{split}.features.f32").write_bytes(
            np.ascontiguousarray(data.features, dtype="<f4").tobytes()
        )
        (path / f"{split}.logits.f32").write_bytes(
            np.ascontiguousarray(data.logits, dtype="<f4").tobytes()
        )
        if data.labels is not None:
            (path / f"{split}.labels.u32").write_bytes(
                np.ascontiguousarray(data.labels, dtype="<u4").tobytes()
            )
    with open(path / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def validate_record(record: CheckpointRecord) -> list[str]:
    """Check every invariant; returns one diagnostic per violation (empty if valid)."""
    problems: list[str] = []
    if record.num_classes < 1:
        problems.append(f"num_classes must be >= 1, got {record.num_classes}")
    for split in SPLIT_NAMES:
        data = record.split(split)
        f, z, y = data.features, data.logits, data.labels
        if f.ndim != 2:
            problems.append(f"{split}.features must be 2-D, got shape {f.shape}")
            continue
        if z.ndim != 2:
            problems.append(f"{split}.logits must be 2-D, got shape {z.shape}")
            continue
        if z.shape[0] != f.shape[0]:
            problems.append(
                f"{split}: features have {f.shape[0]} rows but logits have {z.shape[0]}"
            )
        if z.shape[1] != record.num_classes:
            problems.append(
                f"{split}.logits has {z.shape[1]} columns, expected num_classes={record.num_classes}"
            )
        for name, arr in (("features", f), ("logits", z)):
            bad = ~np.isfinite(arr)
            if bad.any():
                i, j = np.argwhere(bad)[0]
                problems.append(f"{split}.{name}[{i},{j}] is not finite")
        if y is None:
            if split != "target":
                problems.append(f"{split} is missing required labels")
        else:
            if y.ndim != 1 or y.shape[0] != f.shape[0]:
                problems.append(
                    f"{split}.labels has shape {y.shape}, expected ({f.shape[0]},)"
                )
            else:
                out = np.asarray(y, dtype=np.int64) >= record.num_classes
                if out.any():
                    i = int(np.argmax(out))
                    problems.append(
                        f"{split}.labels[{i}] = {int(y[i])} is out of range for "
                        f"{record.num_classes} classes"
                    )
    return problems


def scan_benchmark(root: str | Path) -> BenchmarkIndex:
    """Enumerate all checkpoints under a benchmark tree.

    Order is deterministic across platforms: lexicographic by task_id, then
    numeric by run_id and checkpoint_index.
    """
    root = Path(root)
    if not root.is_dir():
        raise CheckpointFormatError(f"benchmark root {root} is not a directory")
    refs: list[CheckpointRef] = []
    for task_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        task_id = task_dir.name
        for run_dir in sorted(p for p in task_dir.iterdir() if p.is_dir()):
            m = _RUN_DIR.match(run_dir.name)
            if m is None:
                continue
            run_id = int(m.group(1))
            run_refs: list[CheckpointRef] = []
            for ckpt_dir in sorted(p for p in run_dir.iterdir() if p.is_dir()):
                cm = _CKPT_DIR.match(ckpt_dir.name)
                if cm is None:
                    continue
                index = int(cm.group(1))
                manifest_path = ckpt_dir / "manifest.json"
                if not manifest_path.is_file():
                    raise CheckpointFormatError(f"missing manifest {manifest_path}")
                with open(manifest_path, encoding="utf-8") as fh:
                    manifest = json.load(fh)
                declared = (
                    str(manifest.get("task_id")),
                    int(manifest.get("run_id", -1)),
                    int(manifest.get("checkpoint_index", -1)),
                )
                if declared != (task_id, run_id, index):
                    raise CheckpointFormatError(
                        f"{manifest_path}: manifest declares {declared}, "
                        f"path implies {(task_id, run_id, index)}"
                    )
                run_refs.append(CheckpointRef(task_id, run_id, index, ckpt_dir))
            if not run_refs:
                raise CheckpointFormatError(f"run directory {run_dir} has no checkpoints")
            indices = [r.checkpoint_index for r in run_refs]
            if len(set(indices)) != len(indices):
                raise CheckpointFormatError(
                    f"duplicate checkpoint index in {run_dir} (indices {sorted(indices)})"
                )
            refs.extend(run_refs)
    if not refs:
        raise CheckpointFormatError(f"no checkpoints found under {root}")
    refs.sort(key=lambda r: (r.task_id, r.run_id, r.checkpoint_index))
    return BenchmarkIndex(root=root, refs=tuple(refs))
