import dataclasses
import hashlib
from pathlib import Path

import numpy as np
import pytest

from valbench import (
    SynthConfig,
    analytic_accuracy,
    entropy_score,
    generate_benchmark,
    inject_pathology,
    load_checkpoint,
    make_checkpoint_record,
    oracle_accuracy,
    scan_benchmark,
    snd_score,
    spearman,
    weighted_spearman,
)
from valbench.synth import run_qualities
from valbench.validators import accuracy_score, bnm_score, class_ami_score

from helpers import split_from


def _small_config(**overrides):
    base = dict(
        num_tasks=1,
        runs_per_task=2,
        checkpoints_per_run=3,
        num_classes=3,
        feature_dim=8,
        samples_per_split=50,
        master_seed=7,
    )
    base.update(overrides)
    return SynthConfig(**base)


def _tree_digest(root: Path) -> str:
    digest = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            digest.update(str(path.relative_to(root)).encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


def test_generate_counts_and_scan(tmp_path):
    config = _small_config()
    summary = generate_benchmark(config, tmp_path / "bench")
    assert summary.num_checkpoints == 6
    index = scan_benchmark(tmp_path / "bench")
    assert len(index) == 6
    assert index.tasks == ["task00"]
    assert index.runs("task00") == [0, 1]


def test_generate_deterministic_bitwise(tmp_path):
    config = _small_config()
    generate_benchmark(config, tmp_path / "a")
    generate_benchmark(config, tmp_path / "b")
    assert _tree_digest(tmp_path / "a") == _tree_digest(tmp_path / "b")


def test_high_quality_checkpoint_is_accurate():
    config = _small_config(samples_per_split=2000)
    record = make_checkpoint_record(config, 0, 0, 0, q=1.0)
    assert oracle_accuracy(record) > 0.99


def test_zero_quality_checkpoint_is_chance():
    config = _small_config(samples_per_split=2000, num_classes=5, feature_dim=16)
    record = make_checkpoint_record(config, 0, 0, 0, q=0.0)
    assert oracle_accuracy(record) == pytest.approx(1.0 / 5.0, abs=0.05)


def test_oracle_accuracy_matches_analytic_overlap():
    config = _small_config(samples_per_split=2000, num_classes=5, feature_dim=16)
    for q in (0.0, 0.3, 0.6, 1.0):
        record = make_checkpoint_record(config, 0, 0, 0, q=q)
        assert oracle_accuracy(record) == pytest.approx(analytic_accuracy(config, q), abs=0.03)


def test_near_perfect_checkpoint_scores():
    config = _small_config(samples_per_split=500, num_classes=5, feature_dim=16)
    record = make_checkpoint_record(config, 0, 0, 0, q=1.0)
    assert accuracy_score(record.source_val) > 0.95
    assert entropy_score(record, "Target") < 0.1


def test_quality_curve_rises_then_falls():
    config = _small_config(
        checkpoints_per_run=20,
        peak_quality_range=(0.9, 0.9),
        overfit_drop_range=(0.4, 0.4),
        samples_per_split=400,
        num_classes=5,
        feature_dim=16,
    )
    qs = run_qualities(config, 0, 0)
    peak = int(np.argmax(qs))
    assert (np.diff(qs[: peak + 1]) >= -1e-12).all()
    assert (np.diff(qs[peak:]) <= 1e-12).all()
    accs = [
        oracle_accuracy(make_checkpoint_record(config, 0, 0, k, float(q)))
        for k, q in enumerate(qs)
    ]
    assert spearman(qs, np.array(accs)) > 90.0


def test_source_val_accuracy_tracks_target():
    config = _small_config(
        runs_per_task=6, checkpoints_per_run=10, samples_per_split=200,
        num_classes=5, feature_dim=16,
    )
    scores, accs = [], []
    for run in range(config.runs_per_task):
        for k, q in enumerate(run_qualities(config, 0, run)):
            record = make_checkpoint_record(config, 0, run, k, float(q))
            scores.append(accuracy_score(record.source_val))
            accs.append(oracle_accuracy(record))
    assert weighted_spearman(np.array(scores), np.array(accs)) > 80.0


def test_monotone_quality_run_orients_validators():
    config = _small_config(
        checkpoints_per_run=12,
        rise_fraction=1.0,
        peak_quality_range=(1.0, 1.0),
        samples_per_split=300,
        num_classes=3,
        feature_dim=8,
    )
    qs = run_qualities(config, 0, 0)
    assert (np.diff(qs) > 0).all()
    oriented = {"Accuracy": [], "BNM": [], "ClassAMI": []}
    for k, q in enumerate(qs):
        record = make_checkpoint_record(config, 0, 0, k, float(q))
        oriented["Accuracy"].append(accuracy_score(record.source_val))
        oriented["BNM"].append(bnm_score(record, "Target"))
        oriented["ClassAMI"].append(class_ami_score(record, "Target", "features", seed=7))
    for family, values in oriented.items():
        assert spearman(qs, np.array(values)) > 90.0, family


def test_inject_no_flag_is_identity():
    config = _small_config()
    record = make_checkpoint_record(config, 0, 0, 0, q=0.5)
    assert inject_pathology(record, None) is record


def test_inject_unknown_flag_rejected():
    config = _small_config()
    record = make_checkpoint_record(config, 0, 0, 0, q=0.5)
    with pytest.raises(ValueError):
        inject_pathology(record, "nonsense")


def test_confident_wrong_pathology():
    config = _small_config(samples_per_split=200, num_classes=5, feature_dim=16)
    record = make_checkpoint_record(config, 0, 0, 0, q=0.9)
    bad = inject_pathology(record, "confident_wrong")
    assert entropy_score(bad, "Target") == 0.0
    assert oracle_accuracy(bad) == 0.0
    # source splits untouched
    assert bad.source_val.logits.tobytes() == record.source_val.logits.tobytes()


def test_collapse_clusters_pathology():
    config = _small_config(samples_per_split=100, num_classes=3, feature_dim=8)
    record = make_checkpoint_record(config, 0, 0, 0, q=0.9)
    bad = inject_pathology(record, "collapse_clusters")
    n = bad.target.n
    for tau in (0.05, 0.1, 0.5):
        assert snd_score(bad, "features", tau) == pytest.approx(np.log(n - 1), abs=1e-3)
    # logits untouched, so accuracy is unchanged by construction
    assert bad.target.logits.tobytes() == record.target.logits.tobytes()
    assert oracle_accuracy(bad) == oracle_accuracy(record)


def test_generated_tree_round_trips(tmp_path):
    config = _small_config()
    generate_benchmark(config, tmp_path / "bench")
    index = scan_benchmark(tmp_path / "bench")
    record = load_checkpoint(index.refs[0].path)
    rebuilt = make_checkpoint_record(
        config, 0, 0, 0, float(run_qualities(config, 0, 0)[0])
    )
    assert record.target.features.tobytes() == rebuilt.target.features.tobytes()
    assert record.source_train.labels.tobytes() == rebuilt.source_train.labels.tobytes()


def test_oracle_accuracy_trivial_fixtures():
    logits = np.zeros((4, 3))
    logits[np.arange(4), [0, 1, 2, 0]] = 5.0
    config = _small_config()
    record = make_checkpoint_record(config, 0, 0, 0, q=0.5)
    perfect = dataclasses.replace(
        record, target=split_from(np.zeros((4, 2)), logits, [0, 1, 2, 0])
    )
    assert oracle_accuracy(perfect) == 1.0
    shifted = dataclasses.replace(
        record, target=split_from(np.zeros((4, 2)), logits, [1, 2, 0, 1])
    )
    assert oracle_accuracy(shifted) == 0.0


def test_oracle_accuracy_requires_labels():
    config = _small_config()
    record = make_checkpoint_record(config, 0, 0, 0, q=0.5)
    unlabeled = dataclasses.replace(
        record,
        target=split_from(record.target.features, record.target.logits, None),
    )
    with pytest.raises(ValueError):
        oracle_accuracy(unlabeled)


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(num_tasks=0)
    with pytest.raises(ValueError):
        SynthConfig(feature_dim=3, num_classes=5)
    with pytest.raises(ValueError):
        SynthConfig(peak_quality_range=(0.9, 0.3))
