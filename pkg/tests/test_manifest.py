"""Manifest I/O and leave-one-patient-out split generation."""

import json
import math

import numpy as np
import pytest

from framesift import (
    DatasetManifest,
    ManifestIntegrityError,
    ManifestParseError,
    SequenceRecord,
    SplitInfeasibleError,
    load_manifest,
    make_lopo_splits,
    write_manifest,
    write_split_plans,
)


def rec(seq_id, patient="p0", label=None, n_frames=3):
    return SequenceRecord(
        patient_id=patient,
        sequence_id=seq_id,
        class_label=label,
        frame_refs=tuple(f"{seq_id}/{i}.pgm" for i in range(n_frames)),
    )


def manifest_of(*records, metadata=None):
    return DatasetManifest(sequences=tuple(records), metadata=metadata or {})


# --- records and manifests ----------------------------------------------

def test_sequence_record_validation():
    with pytest.raises(ManifestIntegrityError):
        rec("s0", n_frames=0)
    with pytest.raises(ManifestIntegrityError):
        rec("s0", label="benign")
    assert rec("s0", label="tumor").class_label == "tumor"
    assert rec("s0", label=None).class_label is None


def test_duplicate_sequence_ids_rejected():
    with pytest.raises(ManifestIntegrityError):
        manifest_of(rec("s0"), rec("s0", patient="p1"))


def test_manifest_accessors():
    m = manifest_of(rec("s0", "pb"), rec("s1", "pa"), rec("s2", "pa", n_frames=5))
    assert m.patients() == ["pa", "pb"]
    assert m.total_frames() == 11
    assert m.sequence("s1").patient_id == "pa"
    with pytest.raises(KeyError):
        m.sequence("nope")


# --- file round trips ----------------------------------------------------

def test_round_trip_preserves_everything(tmp_path):
    m = manifest_of(
        rec("s0", "pa", "tumor", 4),
        rec("s1", "pb", None, 2),
        metadata={"dataset": "demo", "note": "x"},
    )
    path = tmp_path / "m.jsonl"
    write_manifest(m, path)
    loaded = load_manifest(path)
    assert loaded.sequences == m.sequences
    assert loaded.metadata == m.metadata


def test_round_trip_is_byte_stable(tmp_path):
    m = manifest_of(rec("s0", "pa", "healthy"), rec("s1", "pb"), metadata={"k": 1})
    p1 = tmp_path / "a.jsonl"
    p2 = tmp_path / "b.jsonl"
    write_manifest(m, p1)
    write_manifest(load_manifest(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_empty_file_loads_as_empty_manifest(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    m = load_manifest(path)
    assert m.sequences == ()
    assert m.total_frames() == 0


def test_loading_does_not_open_frame_files(tmp_path):
    # refs point nowhere; loading must still succeed (frames are lazy)
    m = manifest_of(rec("s0", n_frames=2))
    path = tmp_path / "m.jsonl"
    write_manifest(m, path)
    assert load_manifest(path).sequences[0].frame_refs == m.sequences[0].frame_refs


def test_parse_error_names_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = json.dumps(
        {"patient_id": "p", "sequence_id": "s", "class_label": None, "frames": ["f"]}
    )
    path.write_text(good + "\n{not json\n", encoding="utf-8")
    with pytest.raises(ManifestParseError) as exc:
        load_manifest(path)
    assert exc.value.line_number == 2


def test_parse_error_on_missing_field(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"patient_id": "p"}\n', encoding="utf-8")
    with pytest.raises(ManifestParseError) as exc:
        load_manifest(path)
    assert exc.value.line_number == 1


def test_duplicate_id_in_file_is_integrity_error(tmp_path):
    line = json.dumps(
        {"patient_id": "p", "sequence_id": "s", "class_label": None, "frames": ["f"]}
    )
    path = tmp_path / "dup.jsonl"
    path.write_text(line + "\n" + line + "\n", encoding="utf-8")
    with pytest.raises(ManifestIntegrityError):
        load_manifest(path)


def test_unknown_label_in_file(tmp_path):
    path = tmp_path / "lab.jsonl"
    path.write_text(
        json.dumps(
            {
                "patient_id": "p",
                "sequence_id": "s",
                "class_label": "weird",
                "frames": ["f"],
            }
        )
        + "\n",
        encoding="utf-8",
    )
    with pytest.raises(ManifestIntegrityError):
        load_manifest(path)


# --- split plans ---------------------------------------------------------

def six_patient_manifest():
    records = []
    for p in range(6):
        for s in range(4):
            label = "tumor" if s % 2 == 0 else "healthy"
            records.append(rec(f"p{p}s{s}", f"pat{p}", label))
    return manifest_of(*records)


def test_six_patients_give_six_folds():
    m = six_patient_manifest()
    plans = make_lopo_splits(m, seed=0, val_fraction=0.2)
    assert len(plans) == 6
    assert [p.test_patient for p in plans] == m.patients()
    for plan in plans:
        held_out = {r.sequence_id for r in m.sequences if r.patient_id == plan.test_patient}
        used = set(plan.train_sequences) | set(plan.val_sequences)
        assert not (used & held_out)
        assert used | held_out == {r.sequence_id for r in m.sequences}
        assert not (set(plan.train_sequences) & set(plan.val_sequences))


def test_unlabeled_two_patients_sizing():
    records = [rec(f"a{i}", "pa") for i in range(10)]
    records += [rec(f"b{i}", "pb") for i in range(10)]
    plans = make_lopo_splits(manifest_of(*records), seed=7, val_fraction=0.2)
    for plan in plans:
        assert len(plan.val_sequences) == 2
        assert len(plan.train_sequences) == 8


def test_val_sizing_rounds_half_up():
    # pool of 7 at 0.5: floor(3.5 + 0.5) = 4
    records = [rec(f"a{i}", "pa") for i in range(7)] + [rec("b0", "pb")]
    plans = make_lopo_splits(manifest_of(*records), seed=0, val_fraction=0.5)
    by_test = {p.test_patient: p for p in plans}
    assert len(by_test["pb"].val_sequences) == 4
    assert len(by_test["pb"].train_sequences) == 3


def test_split_determinism_and_seed_sensitivity():
    m = six_patient_manifest()
    a = make_lopo_splits(m, seed=5, val_fraction=0.2)
    b = make_lopo_splits(m, seed=5, val_fraction=0.2)
    assert a == b
    c = make_lopo_splits(m, seed=6, val_fraction=0.2)
    # test-patient membership never depends on the seed
    assert [p.test_patient for p in c] == [p.test_patient for p in a]
    assert any(x.val_sequences != y.val_sequences for x, y in zip(a, c))


def test_class_presence_in_train_and_val():
    m = six_patient_manifest()
    for seed in range(10):
        for plan in make_lopo_splits(m, seed=seed, val_fraction=0.2):
            for side in (plan.train_sequences, plan.val_sequences):
                labels = {m.sequence(s).class_label for s in side}
                assert labels >= {"tumor", "healthy"}


def test_single_class_sequence_infeasible():
    # one tumor sequence total outside the test patient
    records = [
        rec("a0", "pa", "tumor"),
        rec("a1", "pa", "healthy"),
        rec("a2", "pa", "healthy"),
        rec("a3", "pa", "healthy"),
        rec("b0", "pb", "healthy"),
    ]
    with pytest.raises(SplitInfeasibleError) as exc:
        make_lopo_splits(manifest_of(*records), seed=0, val_fraction=0.2)
    assert exc.value.test_patient == "pb"


def test_tiny_mixed_pool_infeasible():
    # 2 tumor + 1 healthy in the pool: healthy cannot be on both sides
    records = [
        rec("a0", "pa", "tumor"),
        rec("a1", "pa", "tumor"),
        rec("a2", "pa", "healthy"),
        rec("b0", "pb", "healthy"),
    ]
    with pytest.raises(SplitInfeasibleError):
        make_lopo_splits(manifest_of(*records), seed=0, val_fraction=0.2)


def test_minimal_feasible_pool():
    # exactly 2 of each class: val and train get one of each
    records = [
        rec("a0", "pa", "tumor"),
        rec("a1", "pa", "tumor"),
        rec("a2", "pa", "healthy"),
        rec("a3", "pa", "healthy"),
        rec("b0", "pb"),
    ]
    plans = make_lopo_splits(manifest_of(*records), seed=0, val_fraction=0.2)
    plan = next(p for p in plans if p.test_patient == "pb")
    assert len(plan.val_sequences) == 2
    assert len(plan.train_sequences) == 2
    for side in (plan.train_sequences, plan.val_sequences):
        labels = {r.class_label for r in manifest_of(*records).sequences if r.sequence_id in side}
        assert labels == {"tumor", "healthy"}


def test_one_patient_rejected():
    with pytest.raises(ManifestIntegrityError):
        make_lopo_splits(manifest_of(rec("s0")), seed=0, val_fraction=0.2)


def test_val_fraction_bounds():
    m = manifest_of(rec("s0", "pa"), rec("s1", "pb"))
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            make_lopo_splits(m, seed=0, val_fraction=bad)


def test_random_manifests_satisfy_invariants():
    gen = np.random.default_rng(99)
    for trial in range(10):
        records = []
        n_pat = int(gen.integers(2, 5))
        for p in range(n_pat):
            for s in range(int(gen.integers(1, 6))):
                label = [None, "tumor", "healthy"][int(gen.integers(0, 3))]
                records.append(rec(f"p{p}s{s}", f"pat{p}", label))
        m = manifest_of(*records)
        try:
            plans = make_lopo_splits(m, seed=trial, val_fraction=0.2)
        except SplitInfeasibleError:
            continue
        all_ids = {r.sequence_id for r in m.sequences}
        for plan in plans:
            held = {r.sequence_id for r in m.sequences if r.patient_id == plan.test_patient}
            train, val = set(plan.train_sequences), set(plan.val_sequences)
            assert not train & val
            assert not (train | val) & held
            assert train | val | held == all_ids
            pool = [r for r in m.sequences if r.patient_id != plan.test_patient]
            n = len(pool)
            n_val = int(math.floor(0.2 * n + 0.5))
            pool_labels = {r.class_label for r in pool if r.class_label}
            if pool_labels >= {"tumor", "healthy"}:
                n_val = min(max(n_val, 2), n - 2)
            assert len(val) == n_val


def test_write_split_plans(tmp_path):
    m = six_patient_manifest()
    plans = make_lopo_splits(m, seed=3, val_fraction=0.2)
    paths = write_split_plans(plans, tmp_path / "folds")
    assert len(paths) == 6
    payload = json.loads(paths[0].read_text(encoding="utf-8"))
    assert payload["fold_id"] == 0
    assert payload["seed"] == 3
    assert set(payload) == {"fold_id", "test_patient", "train_sequences", "val_sequences", "seed"}
