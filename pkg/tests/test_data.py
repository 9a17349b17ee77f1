"""Sequence file formats, preprocessing, synthetic data, configuration."""

import json
import struct

import numpy as np
import pytest

from trg.config import RunConfig, load_config, save_config
from trg.data import (
    SkeletonSequence,
    load_dataset,
    preprocess,
    read_labels_csv,
    read_skeleton_file,
    save_dataset,
    synth_generate,
    write_labels_csv,
    write_skeleton_file,
)


class TestSkeletonFiles:
    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(3, 17, 5)).astype(np.float32)
        path = tmp_path / "a.skel"
        write_skeleton_file(path, x)
        back = read_skeleton_file(path)
        np.testing.assert_array_equal(back.astype(np.float32), x)

    def test_header_layout(self, tmp_path):
        path = tmp_path / "a.skel"
        write_skeleton_file(path, np.zeros((6, 10, 4)))
        blob = path.read_bytes()
        assert blob[:4] == b"TRGS"
        assert struct.unpack_from("<HIII", blob, 4) == (1, 6, 10, 4)
        assert len(blob) == 18 + 6 * 10 * 4 * 4

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "a.skel"
        path.write_bytes(b"JUNK" + b"\x00" * 20)
        with pytest.raises(ValueError, match="magic"):
            read_skeleton_file(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "a.skel"
        path.write_bytes(b"TRGS" + struct.pack("<HIII", 9, 1, 1, 1) + b"\x00" * 4)
        with pytest.raises(ValueError, match="version"):
            read_skeleton_file(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "a.skel"
        write_skeleton_file(path, np.zeros((2, 3, 2)))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(ValueError, match="payload"):
            read_skeleton_file(path)


class TestLabelFiles:
    def test_round_trip(self, tmp_path):
        labels = np.array([0, 0, 2, 1, 1, 1])
        path = tmp_path / "a.csv"
        write_labels_csv(path, labels)
        np.testing.assert_array_equal(read_labels_csv(path), labels)
        first = path.read_text().splitlines()[0]
        assert first == "frame_index,label"

    def test_header_required(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("0,1\n1,2\n")
        with pytest.raises(ValueError, match="header"):
            read_labels_csv(path)

    def test_gap_rejected(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("frame_index,label\n0,1\n2,1\n")
        with pytest.raises(ValueError, match="frame_index"):
            read_labels_csv(path)


class TestDatasets:
    def _tiny(self):
        rng = np.random.default_rng(1)
        seqs = [SkeletonSequence(id=f"s{i}", x=rng.normal(size=(3, 12, 4)),
                                 labels=rng.integers(0, 2, 12))
                for i in range(3)]
        return seqs, ["sit", "stand"]

    def test_round_trip(self, tmp_path):
        seqs, names = self._tiny()
        save_dataset(tmp_path, seqs, names)
        back, back_names = load_dataset(tmp_path)
        assert back_names == names
        assert [s.id for s in back] == [s.id for s in seqs]
        for a, b in zip(seqs, back):
            np.testing.assert_array_equal(b.x, a.x.astype(np.float32))
            np.testing.assert_array_equal(b.labels, a.labels)

    def test_missing_label_file(self, tmp_path):
        seqs, names = self._tiny()
        save_dataset(tmp_path, seqs, names)
        (tmp_path / "s1.csv").unlink()
        with pytest.raises(FileNotFoundError, match="s1"):
            load_dataset(tmp_path)

    def test_label_outside_classes(self, tmp_path):
        seqs, _ = self._tiny()
        save_dataset(tmp_path, seqs, ["only-one"])
        with pytest.raises(ValueError, match="classes"):
            load_dataset(tmp_path)

    def test_noncontiguous_class_ids(self, tmp_path):
        seqs, names = self._tiny()
        save_dataset(tmp_path, seqs, names)
        (tmp_path / "actions.json").write_text(json.dumps({"0": "a", "2": "b"}))
        with pytest.raises(ValueError, match="contiguous"):
            load_dataset(tmp_path)

    def test_sequence_invariants(self):
        with pytest.raises(ValueError, match="labels"):
            SkeletonSequence(id="bad", x=np.zeros((3, 5, 4)),
                             labels=np.zeros(4, dtype=int))
        with pytest.raises(ValueError, match="nonnegative"):
            SkeletonSequence(id="bad", x=np.zeros((3, 5, 4)),
                             labels=np.array([0, 1, -1, 0, 0]))


class TestPreprocess:
    def test_hand_built_case(self):
        # two frames, two joints, two axes; root joint 0
        raw = np.array([
            [[1.0, 3.0], [2.0, 5.0]],    # axis 0: frames x joints
            [[0.0, 4.0], [1.0, 1.0]],    # axis 1
        ])
        x = preprocess(raw, root=0)
        assert x.shape == (4, 2, 2)
        # relative: joint minus root within each frame
        np.testing.assert_allclose(x[0], [[0.0, 2.0], [0.0, 3.0]])
        np.testing.assert_allclose(x[1], [[0.0, 4.0], [0.0, 0.0]])
        # displacement: raw frame minus previous raw frame, first frame zero
        np.testing.assert_allclose(x[2], [[0.0, 0.0], [1.0, 2.0]])
        np.testing.assert_allclose(x[3], [[0.0, 0.0], [1.0, -3.0]])

    def test_static_sequence_zero_displacement(self):
        rng = np.random.default_rng(2)
        frame = rng.normal(size=(3, 1, 6))
        raw = np.repeat(frame, 10, axis=1)
        x = preprocess(raw)
        assert np.all(x[3:] == 0.0)

    def test_root_channels_zero(self):
        rng = np.random.default_rng(3)
        raw = rng.normal(size=(3, 8, 5))
        x = preprocess(raw, root=2)
        assert np.all(x[:3, :, 2] == 0.0)

    def test_channel_count_doubles(self):
        assert preprocess(np.zeros((2, 4, 3))).shape == (4, 4, 3)
        assert preprocess(np.zeros((3, 4, 3))).shape == (6, 4, 3)

    def test_nan_rejected(self):
        raw = np.zeros((3, 4, 4))
        raw[1, 2, 3] = np.nan
        with pytest.raises(ValueError, match="finite"):
            preprocess(raw)

    def test_bad_root(self):
        with pytest.raises(ValueError, match="root"):
            preprocess(np.zeros((3, 4, 4)), root=4)


class TestSynthGenerate:
    def test_deterministic(self):
        a, names_a = synth_generate(5, 3, 8, seed=7)
        b, names_b = synth_generate(5, 3, 8, seed=7)
        assert names_a == names_b
        for s, t in zip(a, b):
            assert s.id == t.id
            np.testing.assert_array_equal(s.x, t.x)
            np.testing.assert_array_equal(s.labels, t.labels)

    def test_different_seeds_differ(self):
        a, _ = synth_generate(2, 3, 8, seed=0)
        b, _ = synth_generate(2, 3, 8, seed=1)
        assert not np.array_equal(a[0].x, b[0].x)

    def test_labels_tile_frames(self):
        seqs, _ = synth_generate(10, 3, 8, seed=3)
        for s in seqs:
            assert s.labels.shape == (s.n_frames,)
            segments = 1 + int(np.sum(s.labels[1:] != s.labels[:-1]))
            assert 3 <= segments <= 8
            # adjacent segments never share a class by construction
            changes = np.flatnonzero(s.labels[1:] != s.labels[:-1])
            for c in changes:
                assert s.labels[c] != s.labels[c + 1]

    def test_parameter_validation(self):
        with pytest.raises(ValueError, match="classes"):
            synth_generate(2, 1, 8, seed=0)
        with pytest.raises(ValueError, match="joints"):
            synth_generate(2, 3, 3, seed=0)

    def test_classes_separable_by_linear_probe(self):
        # motion energy grows with the class id, so a least-squares probe on
        # two per-frame energy features should far exceed chance (1/3)
        seqs, _ = synth_generate(12, 3, 8, seed=11)
        feats, labels = [], []
        for s in seqs:
            x = preprocess(s.x)
            disp = x[3:]
            rel = x[:3]
            energy = np.linalg.norm(disp, axis=0).mean(axis=1)
            spread = np.linalg.norm(rel, axis=0).std(axis=1)
            feats.append(np.stack([energy, spread, np.ones_like(energy)], axis=1))
            labels.append(s.labels)
        feats = np.concatenate(feats)
        labels = np.concatenate(labels)
        half = len(feats) // 2
        onehot = np.eye(3)[labels[:half]]
        w, *_ = np.linalg.lstsq(feats[:half], onehot, rcond=None)
        pred = np.argmax(feats[half:] @ w, axis=1)
        acc = (pred == labels[half:]).mean()
        assert acc > 0.55, f"probe accuracy {acc:.2f} barely beats chance"


class TestRunConfig:
    def test_defaults_match_published_setup(self):
        cfg = RunConfig()
        assert (cfg.c, cfg.c1, cfg.c2, cfg.c3, cfg.c_t) == (64, 16, 8, 16, 768)
        assert cfg.temporal_layers == 10
        assert (cfg.class_stages, cfg.boundary_stages) == (1, 2)
        assert cfg.tau == 4.0 and cfg.sigma == 1.0
        assert cfg.lambda_abs == 1.0 and cfg.lambda_rel == 1.0
        assert cfg.alpha == pytest.approx(1 / 3) and cfg.beta == pytest.approx(1 / 3)
        assert cfg.learning_rate == 0.001 and cfg.batch_size == 8
        assert cfg.dropout == 0.5
        assert cfg.boundary_threshold == 0.5 and cfg.boundary_radius == 2

    def test_json_round_trip(self, tmp_path):
        cfg = RunConfig(c=16, epochs=3, seed=42)
        path = tmp_path / "run.json"
        save_config(path, cfg)
        assert load_config(path) == cfg

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"c": 16, "momentum": 0.9}))
        with pytest.raises(ValueError, match="momentum"):
            load_config(path)

    def test_validation(self):
        with pytest.raises(ValueError, match="boundary_threshold"):
            RunConfig(boundary_threshold=1.5)
        with pytest.raises(ValueError, match="divide"):
            RunConfig(c=30, c1=16)
