"""Shared builders for in-memory checkpoint records."""

from __future__ import annotations

import numpy as np

from valbench import CheckpointRecord, SplitData


def split_from(features, logits, labels=None) -> SplitData:
    return SplitData(
        features=np.asarray(features, dtype=np.float32),
        logits=np.asarray(logits, dtype=np.float32),
        labels=None if labels is None else np.asarray(labels, dtype=np.uint32),
    )


def random_record(
    rng: np.random.Generator,
    n: int = 20,
    d: int = 4,
    c: int = 3,
    task: str = "taskA",
    algorithm: str = "algo",
    run_id: int = 0,
    ckpt: int = 0,
    target_labels: bool = True,
    target_n: int | None = None,
) -> CheckpointRecord:
    def make(n_rows: int, with_labels: bool) -> SplitData:
        return split_from(
            rng.normal(size=(n_rows, d)),
            rng.normal(size=(n_rows, c)),
            rng.integers(0, c, n_rows) if with_labels else None,
        )

    return CheckpointRecord(
        task_id=task,
        algorithm=algorithm,
        run_id=run_id,
        checkpoint_index=ckpt,
        num_classes=c,
        source_train=make(n, True),
        source_val=make(n, True),
        target=make(target_n if target_n is not None else n, target_labels),
    )


def blob_record(
    rng: np.random.Generator,
    n_per_class: int = 40,
    c: int = 3,
    d: int = 6,
    separation: float = 20.0,
    noise: float = 0.3,
    aligned_logits: bool = True,
) -> CheckpointRecord:
    """Record whose target features are tight, well-separated per-class blobs.

    With aligned_logits the predictions match the generating labels one-hot,
    so prediction structure and cluster structure agree perfectly.
    """

    def make() -> SplitData:
        labels = np.repeat(np.arange(c), n_per_class)
        centers = np.zeros((c, d))
        centers[:, :c] = separation * np.eye(c)
        features = centers[labels] + noise * rng.normal(size=(labels.size, d))
        logits = np.zeros((labels.size, c))
        if aligned_logits:
            logits[np.arange(labels.size), labels] = 1000.0
        else:
            logits = rng.normal(size=(labels.size, c))
        return split_from(features, logits, labels)

    return CheckpointRecord(
        task_id="blobs",
        algorithm="algo",
        run_id=0,
        checkpoint_index=0,
        num_classes=c,
        source_train=make(),
        source_val=make(),
        target=make(),
    )
