"""Synthetic checkpoint benchmarks with known target accuracy.

Each checkpoint draws class-conditional Gaussian features whose inter-class
separation scales with an instantaneous quality q in [0, 1]; logits are
projections of the features onto the class directions plus noise that shrinks
as q grows. Source and target splits come from the same family (with an
optional domain-shift offset), so source accuracy tracks target accuracy, and
target labels are written so the oracle accuracy is known.

Per-run quality follows a rise-then-overfit curve, mimicking checkpoints saved
along a training run. Generation is deterministic: every sampled array uses a
generator keyed by (master seed, task, run, checkpoint, purpose), so trees are
bitwise identical across reruns and worker counts.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .store import CheckpointRecord, SplitData, save_checkpoint
from .validators import accuracy_score

__all__ = [
    "PATHOLOGIES",
    "SynthConfig",
    "GenerationSummary",
    "generate_benchmark",
    "make_checkpoint_record",
    "quality_curve",
    "analytic_accuracy",
    "oracle_accuracy",
    "inject_pathology",
]

PATHOLOGIES = ("collapse_clusters", "confident_wrong")

_SALT_TASK_DIRECTIONS = 101
_SALT_TASK_SHIFT = 102
_SALT_RUN_QUALITY = 103
_SALT_LABELS = 0
_SALT_FEATURE_NOISE = 1
_SALT_LOGIT_NOISE = 2


@dataclass(frozen=True)
class SynthConfig:
    num_tasks: int = 3
    runs_per_task: int = 10
    checkpoints_per_run: int = 20
    num_classes: int = 5
    feature_dim: int = 16
    samples_per_split: int = 500
    domain_shift: float = 0.0
    class_separation: float = 6.0
    logit_gain: float = 2.0
    logit_noise: float = 2.0
    quality_floor: float = 0.0
    peak_quality_range: tuple[float, float] = (0.3, 1.0)
    rise_fraction: float = 0.6
    overfit_drop_range: tuple[float, float] = (0.0, 0.5)
    algorithms: tuple[str, ...] = ("synth",)
    collapse_clusters: bool = False
    confident_wrong: bool = False
    pathology_runs: int = 1
    master_seed: int = 0

    def __post_init__(self) -> None:
        for field in ("num_tasks", "runs_per_task", "checkpoints_per_run",
                      "num_classes", "feature_dim", "samples_per_split"):
            if getattr(self, field) < 1:
                raise ValueError(f"{field} must be >= 1, got {getattr(self, field)}")
        if self.feature_dim < self.num_classes:
            raise ValueError("feature_dim must be >= num_classes for orthogonal class directions")
        lo, hi = self.peak_quality_range
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError(f"peak_quality_range must satisfy 0 <= lo <= hi <= 1, got {lo, hi}")
        if not (0.0 <= self.quality_floor <= lo):
            raise ValueError("quality_floor must lie in [0, peak_quality_range lo]")
        if not (0.0 < self.rise_fraction <= 1.0):
            raise ValueError("rise_fraction must lie in (0, 1]")
        if not self.algorithms:
            raise ValueError("need at least one algorithm name")


@dataclass(frozen=True)
class GenerationSummary:
    root: Path
    num_tasks: int
    num_runs: int
    num_checkpoints: int
    quality: dict  # task -> run -> list of q per checkpoint


def quality_curve(config: SynthConfig, peak: float, drop: float) -> np.ndarray:
    """Quality per checkpoint: linear rise to the peak, then a linear overfit fall."""
    k = config.checkpoints_per_run
    if k == 1:
        return np.array([peak])
    p = np.linspace(0.0, 1.0, k)
    floor = config.quality_floor
    rise = config.rise_fraction
    q = np.empty(k)
    up = p <= rise
    q[up] = floor + (peak - floor) * (p[up] / rise)
    if rise < 1.0:
        frac = (p[~up] - rise) / (1.0 - rise)
        q[~up] = peak - (peak - floor) * drop * frac
    return np.clip(q, 0.0, 1.0)


def _task_directions(config: SynthConfig, task_index: int) -> np.ndarray:
    """Orthonormal class directions (feature_dim x num_classes), sign-fixed."""
    rng = np.random.default_rng((config.master_seed, _SALT_TASK_DIRECTIONS, task_index))
    raw = rng.standard_normal((config.feature_dim, config.num_classes))
    q, r = np.linalg.qr(raw)
    return q * np.sign(np.diag(r))[None, :]


def _task_shift(config: SynthConfig, task_index: int) -> np.ndarray:
    if config.domain_shift == 0.0:
        return np.zeros(config.feature_dim)
    rng = np.random.default_rng((config.master_seed, _SALT_TASK_SHIFT, task_index))
    direction = rng.standard_normal(config.feature_dim)
    return config.domain_shift * direction / np.linalg.norm(direction)


def _sample_split(
    config: SynthConfig,
    directions: np.ndarray,
    shift: np.ndarray,
    q: float,
    key: tuple[int, ...],
) -> SplitData:
    n, c = config.samples_per_split, config.num_classes
    labels = np.random.default_rng(key + (_SALT_LABELS,)).integers(0, c, n)
    noise = np.random.default_rng(key + (_SALT_FEATURE_NOISE,)).standard_normal(
        (n, config.feature_dim)
    )
    features = config.class_separation * q * directions[:, labels].T + noise + shift[None, :]
    logit_noise = np.random.default_rng(key + (_SALT_LOGIT_NOISE,)).standard_normal((n, c))
    logits = config.logit_gain * (features @ directions) + (1.0 - q) * config.logit_noise * logit_noise
    return SplitData(
        features=features.astype("<f4"),
        logits=logits.astype("<f4"),
        labels=labels.astype("<u4"),
    )


def make_checkpoint_record(
    config: SynthConfig, task_index: int, run_id: int, checkpoint_index: int, q: float
) -> CheckpointRecord:
    """Build one in-memory checkpoint at quality q (pure and deterministic)."""
    directions = _task_directions(config, task_index)
    shift = _task_shift(config, task_index)
    base_key = (config.master_seed, task_index, run_id, checkpoint_index)
    splits = {}
    for split_index, name in enumerate(("source_train", "source_val", "target")):
        split_shift = shift if name == "target" else np.zeros_like(shift)
        splits[name] = _sample_split(config, directions, split_shift, q, base_key + (split_index,))
    record = CheckpointRecord(
        task_id=f"task{task_index:02d}",
        algorithm=config.algorithms[run_id % len(config.algorithms)],
        run_id=run_id,
        checkpoint_index=checkpoint_index,
        num_classes=config.num_classes,
        **splits,
    )
    if config.collapse_clusters and run_id < config.pathology_runs:
        record = inject_pathology(record, "collapse_clusters")
    if config.confident_wrong and run_id < config.pathology_runs:
        record = inject_pathology(record, "confident_wrong")
    return record


def run_qualities(config: SynthConfig, task_index: int, run_id: int) -> np.ndarray:
    """The quality curve of one run (peak and overfit drop drawn per run)."""
    rng = np.random.default_rng((config.master_seed, _SALT_RUN_QUALITY, task_index, run_id))
    lo, hi = config.peak_quality_range
    peak = float(rng.uniform(lo, hi))
    dlo, dhi = config.overfit_drop_range
    drop = float(rng.uniform(dlo, dhi))
    return quality_curve(config, peak, drop)


def generate_benchmark(config: SynthConfig, root: str | Path) -> GenerationSummary:
    """Write a full benchmark tree in the checkpoint-store format."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    quality: dict[str, dict[str, list[float]]] = {}
    count = 0
    for task_index in range(config.num_tasks):
        task_id = f"task{task_index:02d}"
        quality[task_id] = {}
        for run_id in range(config.runs_per_task):
            qs = run_qualities(config, task_index, run_id)
            quality[task_id][str(run_id)] = [float(q) for q in qs]
            for ckpt_index, q in enumerate(qs):
                record = make_checkpoint_record(config, task_index, run_id, ckpt_index, float(q))
                save_checkpoint(record, root / task_id / f"run_{run_id}" / f"ckpt_{ckpt_index}")
                count += 1
    meta = {"config": dataclasses.asdict(config), "quality": quality}
    with open(root / "synth_config.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return GenerationSummary(
        root=root,
        num_tasks=config.num_tasks,
        num_runs=config.num_tasks * config.runs_per_task,
        num_checkpoints=count,
        quality=quality,
    )


def analytic_accuracy(config: SynthConfig, q: float) -> float:
    """Expected accuracy at quality q from the Gaussian overlap integral.

    The true-class logit leads the others by margin m = gain * separation * q
    while every logit carries iid noise of scale s; the correct class wins
    with probability integral phi(t) * Phi(t + m/s)^(C-1) dt.
    """
    margin = config.logit_gain * config.class_separation * q
    scale = np.hypot(config.logit_gain, (1.0 - q) * config.logit_noise)
    t = np.linspace(-10.0, 10.0, 20001)
    integrand = norm.pdf(t) * norm.cdf(t + margin / scale) ** (config.num_classes - 1)
    return float(np.trapezoid(integrand, t))


def oracle_accuracy(record: CheckpointRecord) -> float:
    """Target-domain accuracy; requires target labels."""
    if record.target.labels is None:
        raise ValueError("record has no target labels; oracle accuracy unavailable")
    return accuracy_score(record.target)


def inject_pathology(record: CheckpointRecord, flag: str | None) -> CheckpointRecord:
    """Return a copy exhibiting a known validator failure mode.

    collapse_clusters moves every target feature onto the feature centroid, so
    neighborhood-density scores saturate while logits (and accuracy) are
    untouched. confident_wrong replaces target logits with one-hot predictions
    of a wrong class per sample, so entropy collapses to zero while accuracy
    drops to zero.
    """
    if flag is None:
        return record
    if flag not in PATHOLOGIES:
        raise ValueError(f"unknown pathology {flag!r}")
    target = record.target
    if flag == "collapse_clusters":
        centroid = target.features.mean(axis=0, dtype=np.float32)
        features = np.tile(centroid, (target.n, 1)).astype("<f4")
        new_target = SplitData(features=features, logits=target.logits, labels=target.labels)
    else:
        logits = np.zeros((target.n, record.num_classes), dtype="<f4")
        if target.labels is not None:
            wrong = (np.asarray(target.labels, dtype=np.int64) + 1) % record.num_classes
        else:
            wrong = np.zeros(target.n, dtype=np.int64)
        logits[np.arange(target.n), wrong] = 1000.0
        new_target = SplitData(features=target.features, logits=logits, labels=target.labels)
    return dataclasses.replace(record, target=new_target)
