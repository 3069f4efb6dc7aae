"""The eight validator families and the 35-variant registry.

Every validator maps a CheckpointRecord to one raw score. The oriented score
flips the sign for loss-like families (Entropy, DEV, DEVN) so that for every
variant a higher oriented score predicts higher target accuracy.

Canonical variant names are stable strings such as ``Accuracy|SourceVal``,
``SND|preds|tau=0.05`` and ``ClassAMI|Source+Target|features``; they appear
verbatim in all output files.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .clustering import adjusted_mutual_information, kmeans, silhouette_score
from .discriminator import TrainConfig, density_ratio_weights, predict_target_prob, train_discriminator
from .kernels import l2_normalize_rows, nuclear_norm, pairwise_similarity, row_entropies, softmax
from .store import CheckpointRecord, SplitData, load_checkpoint

__all__ = [
    "FAMILIES",
    "ASCENDING_FAMILIES",
    "SND_TEMPERATURES",
    "ValidatorVariant",
    "Score",
    "DevScore",
    "all_variants",
    "variants_by_name",
    "accuracy_score",
    "entropy_score",
    "bnm_score",
    "snd_score",
    "class_ami_score",
    "class_ss_score",
    "dev_score",
    "devn_score",
    "dev_formula",
    "max_normalize_weights",
    "score_all",
    "score_benchmark",
    "CheckpointScores",
]

FAMILIES = ("Accuracy", "BNM", "ClassAMI", "ClassSS", "DEV", "DEVN", "Entropy", "SND")
ASCENDING_FAMILIES = frozenset({"Accuracy", "BNM", "SND", "ClassAMI", "ClassSS"})
SND_TEMPERATURES = (0.05, 0.1, 0.5)

_SPLIT_SELECTORS = {
    "SourceTrain": ("source_train",),
    "SourceTrain+Target": ("source_train", "target"),
    "SourceVal": ("source_val",),
    "SourceVal+Target": ("source_val", "target"),
    "Target": ("target",),
    "Source+Target": ("source_train", "target"),
}
REPRESENTATIONS = ("features", "logits", "preds")


@dataclass(frozen=True)
class ValidatorVariant:
    family: str
    split: str | None = None
    representation: str | None = None
    temperature: float | None = None

    @property
    def name(self) -> str:
        parts = [self.family]
        if self.split is not None:
            parts.append(self.split)
        if self.representation is not None:
            parts.append(self.representation)
        if self.temperature is not None:
            parts.append(f"tau={self.temperature:g}")
        return "|".join(parts)

    @property
    def ascending(self) -> bool:
        return self.family in ASCENDING_FAMILIES


@dataclass(frozen=True)
class Score:
    variant: str
    raw: float | None
    oriented: float | None
    error: str | None = None
    note: str | None = None


class DevScore(NamedTuple):
    value: float
    degenerate_weights: bool


def all_variants() -> tuple[ValidatorVariant, ...]:
    """The full registry: exactly 35 uniquely named variants in stable order."""
    out: list[ValidatorVariant] = []
    for split in ("SourceTrain", "SourceVal"):
        out.append(ValidatorVariant("Accuracy", split=split))
    mean_splits = ("SourceTrain", "SourceTrain+Target", "SourceVal", "SourceVal+Target", "Target")
    for split in mean_splits:
        out.append(ValidatorVariant("BNM", split=split))
    for family in ("ClassAMI", "ClassSS"):
        for split in ("Source+Target", "Target"):
            for rep in ("features", "logits"):
                out.append(ValidatorVariant(family, split=split, representation=rep))
    for family in ("DEV", "DEVN"):
        for rep in REPRESENTATIONS:
            out.append(ValidatorVariant(family, representation=rep))
    for split in mean_splits:
        out.append(ValidatorVariant("Entropy", split=split))
    for rep in REPRESENTATIONS:
        for tau in SND_TEMPERATURES:
            out.append(ValidatorVariant("SND", representation=rep, temperature=tau))
    return tuple(out)


def variants_by_name(names: Sequence[str]) -> list[ValidatorVariant]:
    """Resolve canonical names (or family names, meaning all their variants)."""
    registry = all_variants()
    by_name = {v.name: v for v in registry}
    out: list[ValidatorVariant] = []
    for name in names:
        if name in by_name:
            out.append(by_name[name])
        elif name in FAMILIES:
            out.extend(v for v in registry if v.family == name)
        else:
            raise ValueError(f"unknown validator variant {name!r}")
    return out


def _representation(split: SplitData, kind: str) -> np.ndarray:
    if kind == "features":
        return np.asarray(split.features, dtype=np.float64)
    if kind == "logits":
        return np.asarray(split.logits, dtype=np.float64)
    if kind == "preds":
        return softmax(split.logits, 1.0)
    raise ValueError(f"unknown representation {kind!r}")


def _selector_splits(selector: str, allowed: tuple[str, ...]) -> tuple[str, ...]:
    if selector not in allowed:
        raise ValueError(f"selector {selector!r} not in {allowed}")
    return _SPLIT_SELECTORS[selector]


def accuracy_score(split: SplitData) -> float:
    """Fraction of samples whose top logit matches the label (ties -> lowest class)."""
    if split.labels is None:
        raise ValueError("accuracy requires labels")
    pred = np.argmax(split.logits, axis=1)
    return float((pred == np.asarray(split.labels, dtype=np.int64)).mean())


def entropy_score(record: CheckpointRecord, selector: str) -> float:
    """Mean prediction entropy in nats; combined selectors sum per-split means."""
    names = _selector_splits(
        selector,
        ("SourceTrain", "SourceTrain+Target", "SourceVal", "SourceVal+Target", "Target"),
    )
    total = 0.0
    for name in names:
        probs = softmax(record.split(name).logits, 1.0)
        total += float(row_entropies(probs).mean())
    return total


def bnm_score(record: CheckpointRecord, selector: str) -> float:
    """Nuclear norm of the prediction matrix, normalized by sqrt(N * min(N, C)).

    The normalization is a monotone per-split rescaling (N is constant within
    a split), so rank-based metrics are unchanged, and it puts the two halves
    of a combined selector on the same scale before summing.
    """
    names = _selector_splits(
        selector,
        ("SourceTrain", "SourceTrain+Target", "SourceVal", "SourceVal+Target", "Target"),
    )
    total = 0.0
    for name in names:
        split = record.split(name)
        probs = softmax(split.logits, 1.0)
        n, c = probs.shape
        total += nuclear_norm(probs) / np.sqrt(n * min(n, c))
    return total


def snd_score(record: CheckpointRecord, representation: str, temperature: float) -> float:
    """Soft neighborhood density of the target split.

    Rows of the chosen representation are L2-normalized, the self-similarity
    diagonal is removed, each row is softmaxed at the given temperature, and
    the score is the mean row entropy.
    """
    rep = _representation(record.target, representation)
    n = rep.shape[0]
    if n < 2:
        raise ValueError(f"SND requires at least 2 target samples, got {n}")
    normed, _ = l2_normalize_rows(rep)
    sim = pairwise_similarity(normed)
    off_diag = sim[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    probs = softmax(off_diag, temperature)
    return float(row_entropies(probs).mean())


def _cluster_points(record: CheckpointRecord, selector: str, representation: str) -> np.ndarray:
    names = _selector_splits(selector, ("Source+Target", "Target"))
    if representation not in ("features", "logits"):
        raise ValueError(f"representation must be features or logits, got {representation!r}")
    parts = [_representation(record.split(name), representation) for name in names]
    return parts[0] if len(parts) == 1 else np.vstack(parts)


def _predicted_labels(record: CheckpointRecord, selector: str) -> np.ndarray:
    names = _selector_splits(selector, ("Source+Target", "Target"))
    parts = [np.argmax(record.split(name).logits, axis=1) for name in names]
    return parts[0] if len(parts) == 1 else np.concatenate(parts)


def class_ami_score(
    record: CheckpointRecord, selector: str, representation: str, seed: int = 0
) -> float:
    """AMI between k-means cluster labels (k = number of classes) and predicted labels."""
    points = _cluster_points(record, selector, representation)
    k = record.num_classes
    if k > points.shape[0]:
        raise ValueError(f"k={k} exceeds number of points {points.shape[0]}")
    assignment = kmeans(points, k, seed)
    return adjusted_mutual_information(_predicted_labels(record, selector), assignment.labels)


def class_ss_score(
    record: CheckpointRecord, selector: str, representation: str, seed: int = 0
) -> float:
    """Silhouette of k-means clusters on the L2-normalized representation."""
    points, _ = l2_normalize_rows(_cluster_points(record, selector, representation))
    k = record.num_classes
    if k > points.shape[0]:
        raise ValueError(f"k={k} exceeds number of points {points.shape[0]}")
    assignment = kmeans(points, k, seed)
    return silhouette_score(points, assignment.labels)


def dev_formula(weighted_losses: np.ndarray, weights: np.ndarray) -> DevScore:
    """Control-variate risk estimate: mean(L) + eta * mean(W) - eta.

    eta = Cov(L, W) / Var(W) with population covariance and variance. When
    Var(W) < 1e-12 the estimate degenerates to mean(L) and the flag is set.
    """
    big_l = np.asarray(weighted_losses, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if big_l.shape != w.shape:
        raise ValueError("weighted losses and weights differ in length")
    var_w = float(w.var())
    if var_w < 1e-12:
        return DevScore(float(big_l.mean()), True)
    cov = float(((big_l - big_l.mean()) * (w - w.mean())).mean())
    eta = cov / var_w
    return DevScore(float(big_l.mean() + eta * w.mean() - eta), False)


def max_normalize_weights(weights: np.ndarray) -> np.ndarray:
    """Rescale weights so the largest is 1, then shift to mean exactly 1."""
    w = np.asarray(weights, dtype=np.float64)
    v = w / w.max()
    return v - v.mean() + 1.0


def _dev_raw_weights(
    record: CheckpointRecord, representation: str, seed: int
) -> np.ndarray:
    if representation not in REPRESENTATIONS:
        raise ValueError(f"unknown representation {representation!r}")
    src = _representation(record.source_train, representation)
    tgt = _representation(record.target, representation)
    model = train_discriminator(src, tgt, TrainConfig(seed=seed))
    probs = predict_target_prob(model, _representation(record.source_val, representation))
    return density_ratio_weights(probs, model.n_source, model.n_target)


def _source_val_losses(record: CheckpointRecord) -> np.ndarray:
    split = record.source_val
    if split.labels is None:
        raise ValueError("DEV requires source validation labels")
    probs = softmax(split.logits, 1.0)
    picked = probs[np.arange(split.n), np.asarray(split.labels, dtype=np.int64)]
    return -np.log(np.clip(picked, 1e-12, None))


def dev_score(record: CheckpointRecord, representation: str, seed: int = 0) -> DevScore:
    """Importance-weighted source-validation risk with a control variate.

    The discriminator trains on (source-train, target) and the weights are
    evaluated on held-out source-validation samples.
    """
    w = _dev_raw_weights(record, representation, seed)
    losses = _source_val_losses(record)
    return dev_formula(w * losses, w)


def devn_score(record: CheckpointRecord, representation: str, seed: int = 0) -> DevScore:
    """DEV with max-normalized weights (mean weight is exactly 1)."""
    w = max_normalize_weights(_dev_raw_weights(record, representation, seed))
    losses = _source_val_losses(record)
    return dev_formula(w * losses, w)


class _ScoringContext:
    """Per-checkpoint caches shared across variants of one scoring pass."""

    def __init__(self, record: CheckpointRecord, seed: int):
        self.record = record
        self.seed = seed
        self._dev_weights: dict[str, np.ndarray] = {}
        self._snd_offdiag: dict[str, np.ndarray] = {}
        self._val_losses: np.ndarray | None = None

    def dev_weights(self, representation: str) -> np.ndarray:
        if representation not in self._dev_weights:
            self._dev_weights[representation] = _dev_raw_weights(
                self.record, representation, self.seed
            )
        return self._dev_weights[representation]

    def val_losses(self) -> np.ndarray:
        if self._val_losses is None:
            self._val_losses = _source_val_losses(self.record)
        return self._val_losses

    def snd_offdiag(self, representation: str) -> np.ndarray:
        if representation not in self._snd_offdiag:
            rep = _representation(self.record.target, representation)
            n = rep.shape[0]
            if n < 2:
                raise ValueError(f"SND requires at least 2 target samples, got {n}")
            normed, _ = l2_normalize_rows(rep)
            sim = pairwise_similarity(normed)
            self._snd_offdiag[representation] = sim[~np.eye(n, dtype=bool)].reshape(n, n - 1)
        return self._snd_offdiag[representation]

    def score(self, variant: ValidatorVariant) -> tuple[float, str | None]:
        rec = self.record
        fam = variant.family
        if fam == "Accuracy":
            names = _selector_splits(variant.split, ("SourceTrain", "SourceVal"))
            return accuracy_score(rec.split(names[0])), None
        if fam == "Entropy":
            return entropy_score(rec, variant.split), None
        if fam == "BNM":
            return bnm_score(rec, variant.split), None
        if fam == "SND":
            off_diag = self.snd_offdiag(variant.representation)
            probs = softmax(off_diag, variant.temperature)
            return float(row_entropies(probs).mean()), None
        if fam == "ClassAMI":
            return class_ami_score(rec, variant.split, variant.representation, self.seed), None
        if fam == "ClassSS":
            return class_ss_score(rec, variant.split, variant.representation, self.seed), None
        if fam in ("DEV", "DEVN"):
            w = self.dev_weights(variant.representation)
            if fam == "DEVN":
                w = max_normalize_weights(w)
            value, degenerate = dev_formula(w * self.val_losses(), w)
            return value, "degenerate weights (Var(W) = 0)" if degenerate else None
        raise ValueError(f"unknown family {fam!r}")


def score_all(
    record: CheckpointRecord,
    variants: Sequence[ValidatorVariant] | None = None,
    seed: int = 0,
) -> list[Score]:
    """Score one record against every variant.

    A failure in one variant yields an error entry, never a batch failure.
    Output order matches the input variant order and is deterministic.
    """
    if variants is None:
        variants = all_variants()
    ctx = _ScoringContext(record, seed)
    out: list[Score] = []
    for variant in variants:
        try:
            raw, note = ctx.score(variant)
        except Exception as exc:  # per-variant isolation
            out.append(Score(variant.name, None, None, error=str(exc)))
            continue
        oriented = raw if variant.ascending else -raw
        out.append(Score(variant.name, float(raw), float(oriented), note=note))
    return out


@dataclass(frozen=True)
class CheckpointScores:
    task_id: str
    algorithm: str
    run_id: int
    checkpoint_index: int
    scores: tuple[Score, ...]
    accuracy: float | None  # oracle target accuracy, when target labels exist


def _score_one(path, variants, seed) -> CheckpointScores:
    record = load_checkpoint(path)
    scores = tuple(score_all(record, variants, seed))
    accuracy = None
    if record.target.labels is not None:
        accuracy = accuracy_score(record.target)
    return CheckpointScores(
        task_id=record.task_id,
        algorithm=record.algorithm,
        run_id=record.run_id,
        checkpoint_index=record.checkpoint_index,
        scores=scores,
        accuracy=accuracy,
    )


def score_benchmark(
    refs,
    variants: Sequence[ValidatorVariant] | None = None,
    seed: int = 0,
    jobs: int = 1,
) -> list[CheckpointScores]:
    """Score every referenced checkpoint; results are merged deterministically.

    Scoring is pure per (record, variant), so checkpoints may fan out across a
    bounded worker pool; output order follows the input reference order no
    matter how many workers run.
    """
    if variants is None:
        variants = all_variants()
    if jobs <= 1:
        return [_score_one(ref.path, variants, seed) for ref in refs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda ref: _score_one(ref.path, variants, seed), refs))
