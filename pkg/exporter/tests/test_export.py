import json

import numpy as np
import pytest

from valbench_export import CheckpointSpec, ExportError, export_checkpoint, export_tree
from valbench_export.cli import main

# round-trip checks load exported trees through the primary package
from valbench import load_checkpoint, scan_benchmark


def _write_arrays(tmp_path, n=3, d=2, c=2, seed=0, target_labels=True):
    rng = np.random.default_rng(seed)
    splits = {}
    raw = {}
    for split in ("source_train", "source_val", "target"):
        features = rng.normal(size=(n, d))  # float64 on purpose
        logits = rng.normal(size=(n, c)).astype(np.float32)
        labels = rng.integers(0, c, n)
        np.save(tmp_path / f"{split}_f.npy", features)
        np.save(tmp_path / f"{split}_z.npy", logits)
        entry = {"features": f"{split}_f.npy", "logits": f"{split}_z.npy"}
        if split != "target" or target_labels:
            np.save(tmp_path / f"{split}_y.npy", labels)
            entry["labels"] = f"{split}_y.npy"
        splits[split] = entry
        raw[split] = (features, logits, labels)
    return splits, raw


def _spec(splits, task="taskA", run=0, ckpt=0, c=2):
    return CheckpointSpec(
        task_id=task, algorithm="algo", run_id=run, checkpoint_index=ckpt,
        num_classes=c, splits=splits,
    )


def test_byte_counts_and_manifest(tmp_path):
    splits, _ = _write_arrays(tmp_path, n=3, d=2)
    out = export_checkpoint(_spec(splits), tmp_path / "out", tmp_path)
    assert (out / "source_train.features.f32").stat().st_size == 3 * 2 * 4  # 24 bytes
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["source_train"] == {"n": 3, "feature_dim": 2}
    assert manifest["num_classes"] == 2


def test_round_trip_through_primary_loader(tmp_path):
    splits, raw = _write_arrays(tmp_path, n=5, d=3, c=2, seed=1)
    out = export_checkpoint(_spec(splits), tmp_path / "out", tmp_path)
    record = load_checkpoint(out)
    for split in ("source_train", "source_val", "target"):
        features, logits, labels = raw[split]
        data = record.split(split)
        # bit-exact at 32-bit precision: the loader must see exactly the
        # round-to-nearest float32 cast of the input
        assert data.features.tobytes() == features.astype("<f4").tobytes()
        assert data.logits.tobytes() == logits.astype("<f4").tobytes()
        assert data.labels.tobytes() == labels.astype("<u4").tobytes()


def test_little_endian_output(tmp_path):
    splits, _ = _write_arrays(tmp_path, n=1, d=1, c=2, seed=2)
    np.save(tmp_path / "one.npy", np.array([[1.0]]))
    splits["source_train"]["features"] = "one.npy"
    out = export_checkpoint(_spec(splits), tmp_path / "out", tmp_path)
    payload = (out / "source_train.features.f32").read_bytes()
    assert payload == b"\x00\x00\x80\x3f"  # 1.0f little-endian


def test_export_idempotent(tmp_path):
    splits, _ = _write_arrays(tmp_path, seed=3)
    out1 = export_checkpoint(_spec(splits), tmp_path / "out", tmp_path)
    before = {p.name: p.read_bytes() for p in out1.iterdir()}
    export_checkpoint(_spec(splits), tmp_path / "out", tmp_path)
    after = {p.name: p.read_bytes() for p in out1.iterdir()}
    assert before == after


def test_label_out_of_range_rejected(tmp_path):
    splits, _ = _write_arrays(tmp_path, c=2, seed=4)
    np.save(tmp_path / "bad_y.npy", np.array([0, 1, 2]))  # 2 == num_classes
    splits["target"]["labels"] = "bad_y.npy"
    with pytest.raises(ExportError, match="outside"):
        export_checkpoint(_spec(splits), tmp_path / "out", tmp_path)


def test_missing_source_labels_rejected(tmp_path):
    splits, _ = _write_arrays(tmp_path, seed=5)
    del splits["source_val"]["labels"]
    with pytest.raises(ExportError, match="requires labels"):
        export_checkpoint(_spec(splits), tmp_path / "out", tmp_path)


def test_shape_inconsistency_rejected(tmp_path):
    splits, _ = _write_arrays(tmp_path, n=3, c=2, seed=6)
    np.save(tmp_path / "short_z.npy", np.zeros((2, 2), dtype=np.float32))
    splits["target"]["logits"] = "short_z.npy"
    with pytest.raises(ExportError, match="rows"):
        export_checkpoint(_spec(splits), tmp_path / "out", tmp_path)
    np.save(tmp_path / "wide_z.npy", np.zeros((3, 4), dtype=np.float32))
    splits["target"]["logits"] = "wide_z.npy"
    with pytest.raises(ExportError, match="columns"):
        export_checkpoint(_spec(splits), tmp_path / "out", tmp_path)


def test_target_labels_optional(tmp_path):
    splits, _ = _write_arrays(tmp_path, seed=7, target_labels=False)
    out = export_checkpoint(_spec(splits), tmp_path / "out", tmp_path)
    record = load_checkpoint(out)
    assert record.target.labels is None


def test_npz_member_inputs(tmp_path):
    splits, raw = _write_arrays(tmp_path, seed=8)
    features, _, _ = raw["target"]
    np.savez(tmp_path / "bundle.npz", feats=features)
    splits["target"]["features"] = "bundle.npz#feats"
    out = export_checkpoint(_spec(splits), tmp_path / "out", tmp_path)
    record = load_checkpoint(out)
    assert record.target.features.tobytes() == features.astype("<f4").tobytes()


def test_tree_layout_and_scan(tmp_path):
    specs = []
    for run in range(2):
        for ckpt in range(2):
            splits, _ = _write_arrays(tmp_path, seed=10 + run * 2 + ckpt)
            specs.append(_spec(splits, run=run, ckpt=ckpt))
    written = export_tree(specs, tmp_path / "tree", tmp_path)
    assert len(written) == 4
    index = scan_benchmark(tmp_path / "tree")
    assert [(r.task_id, r.run_id, r.checkpoint_index) for r in index.refs] == [
        ("taskA", 0, 0), ("taskA", 0, 1), ("taskA", 1, 0), ("taskA", 1, 1),
    ]


def test_tree_rejects_duplicates(tmp_path):
    splits, _ = _write_arrays(tmp_path, seed=20)
    specs = [_spec(splits), _spec(splits)]
    with pytest.raises(ExportError, match="duplicate"):
        export_tree(specs, tmp_path / "tree", tmp_path)


def test_cli_end_to_end(tmp_path, capsys):
    splits, _ = _write_arrays(tmp_path, seed=30)
    spec_doc = {
        "checkpoints": [
            {
                "task_id": "cliTask",
                "algorithm": "algo",
                "run_id": 0,
                "checkpoint_index": 0,
                "num_classes": 2,
                "splits": splits,
            }
        ]
    }
    spec_path = tmp_path / "export_spec.json"
    spec_path.write_text(json.dumps(spec_doc))
    assert main(["--spec", str(spec_path), "--out", str(tmp_path / "tree")]) == 0
    assert "exported 1 checkpoints" in capsys.readouterr().out
    index = scan_benchmark(tmp_path / "tree")
    assert len(index) == 1
    record = load_checkpoint(index.refs[0].path)
    assert record.task_id == "cliTask"


def test_cli_reports_errors(tmp_path, capsys):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({"checkpoints": []}))
    assert main(["--spec", str(spec_path), "--out", str(tmp_path / "tree")]) == 1
    assert "error" in capsys.readouterr().err
