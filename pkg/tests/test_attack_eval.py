import itertools
import json

import numpy as np
import pytest

from wearid import attack_eval
from wearid.attack_eval import (CellResult, CurvePoint, ExperimentConfig,
                                ExperimentReport, SamplePair, WindowSample,
                                accuracy, build_pairs, build_window_samples,
                                count_pair_pool, learning_curve, render_report,
                                report_from_json, report_to_json, run_experiment,
                                verify_split_hygiene)
from wearid.errors import ExperimentError, PairSamplingError
from wearid.gesture import GestureClass
from wearid.mmsnn import ModalInput
from wearid.physio import SignalKind


def make_sample(window_id, subject, gesture, seed=0, kind=SignalKind.EDA, level=None):
    rng = np.random.default_rng(abs(hash((window_id, seed))) % 2 ** 32)
    if level is None:
        level = float(rng.normal())
    return WindowSample(
        window_id=window_id, subject_id=subject, session_id="s0", gesture=gesture,
        image=rng.random((8, 8, 3)),
        segments={kind: level + 0.05 * rng.standard_normal(16)},
    )


def toy_samples():
    samples = []
    k = 0
    for subject, level in (("u1", 0.0), ("u2", 2.0)):
        for gesture in (GestureClass.UP, GestureClass.UP, GestureClass.PUSH):
            samples.append(make_sample(f"w{k}", subject, gesture, level=level))
            k += 1
    return samples


class TestBuildPairs:
    def test_counts_match_combinatorial_oracle(self):
        samples = toy_samples()
        n_sim, n_dis = count_pair_pool(samples, SignalKind.EDA)
        # oracle: brute-force enumeration over index pairs
        sim = dis = 0
        for a, b in itertools.combinations(samples, 2):
            if a.subject_id != b.subject_id:
                dis += 1
            elif a.gesture == b.gesture:
                sim += 1
        assert (n_sim, n_dis) == (sim, dis) == (2, 9)

    def test_two_subjects_two_up_windows_each(self):
        samples = [
            make_sample("a0", "u1", GestureClass.UP),
            make_sample("a1", "u1", GestureClass.UP),
            make_sample("b0", "u2", GestureClass.UP),
            make_sample("b1", "u2", GestureClass.UP),
        ]
        n_sim, n_dis = count_pair_pool(samples, SignalKind.EDA)
        assert n_sim == 2   # one same-gesture pair per subject
        assert n_dis == 4   # all cross-subject combinations

    def test_single_subject_negatives_impossible(self):
        samples = [make_sample(f"w{k}", "solo", GestureClass.UP) for k in range(3)]
        with pytest.raises(PairSamplingError):
            build_pairs(samples, SignalKind.EDA, n_similar=1, n_dissimilar=1, seed=0)

    def test_label_invariant_exhaustive(self):
        samples = toy_samples()
        pairs = build_pairs(samples, SignalKind.EDA, n_similar=2, n_dissimilar=9, seed=1)
        assert len(pairs) == 11
        for p in pairs:
            assert p.y == int(p.id_a == p.id_b and p.gesture_a == p.gesture_b)

    def test_deterministic_given_seed(self):
        samples = toy_samples()
        p1 = build_pairs(samples, SignalKind.EDA, 2, 5, seed=42)
        p2 = build_pairs(samples, SignalKind.EDA, 2, 5, seed=42)
        assert [(a.window_id_a, a.window_id_b, a.y) for a in p1] == \
               [(a.window_id_a, a.window_id_b, a.y) for a in p2]

    def test_oversampling_reports_maxima(self):
        samples = toy_samples()
        with pytest.raises(PairSamplingError, match="2 / 9"):
            build_pairs(samples, SignalKind.EDA, n_similar=50, n_dissimilar=1, seed=0)

    def test_invalid_label_construction_rejected(self):
        s1 = make_sample("x", "u1", GestureClass.UP)
        s2 = make_sample("y", "u2", GestureClass.UP)
        inp = ModalInput(image=s1.image, physio=s1.segments[SignalKind.EDA])
        inp2 = ModalInput(image=s2.image, physio=s2.segments[SignalKind.EDA])
        with pytest.raises(ValueError):
            SamplePair(a=inp, b=inp2, y=1, id_a="u1", id_b="u2",
                       gesture_a=GestureClass.UP, gesture_b=GestureClass.UP)


def confusion_oracle(predictions, truths):
    tp = sum(1 for p, t in zip(predictions, truths) if p == 1 and t == 1)
    tn = sum(1 for p, t in zip(predictions, truths) if p == 0 and t == 0)
    fp = sum(1 for p, t in zip(predictions, truths) if p == 1 and t == 0)
    fn = sum(1 for p, t in zip(predictions, truths) if p == 0 and t == 1)
    return (tp + tn) / (tp + tn + fp + fn)


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy([1, 0, 1], [1, 0, 1]) == 1.0

    def test_hand_confusion_counts(self):
        # TP=3 TN=2 FP=1 FN=0 -> 5/6
        preds = [1, 1, 1, 0, 0, 1]
        truth = [1, 1, 1, 0, 0, 0]
        assert accuracy(preds, truth) == pytest.approx(5 / 6)
        assert confusion_oracle(preds, truth) == pytest.approx(5 / 6)

    def test_all_wrong(self):
        assert accuracy([1, 1], [0, 0]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            accuracy([], [])

    def test_matches_confusion_oracle_exhaustive(self):
        for n in range(1, 9):
            for bits in itertools.product([0, 1], repeat=2 * n):
                preds, truth = list(bits[:n]), list(bits[n:])
                assert accuracy(preds, truth) == pytest.approx(
                    confusion_oracle(preds, truth))
                if n > 4:
                    break  # full product only for short vectors
            if n > 4:
                break

    def test_matches_confusion_oracle_random(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(1, 21))
            preds = rng.integers(0, 2, n).tolist()
            truth = rng.integers(0, 2, n).tolist()
            assert accuracy(preds, truth) == pytest.approx(confusion_oracle(preds, truth))


def fast_experiment_config(**overrides):
    base = dict(signal_kinds=("EDA",), n_train_episodes=12, n_repetitions=2,
                seed=7, max_pairs=30, physio_len=16, image_side=8, d_img=8,
                d_phys=8, conv_channels=(2, 4), lstm_hidden=8, lstm_layers=1,
                epochs=6, lr=0.02, batch_size=8, momentum=0.9)
    base.update(overrides)
    return ExperimentConfig(**base)


def cluster_dataset(n_subjects=3, per_subject=12, separation=2.0, seed=0,
                    kind=SignalKind.EDA):
    """Synthetic WindowSamples with per-(subject, gesture) physio levels."""
    rng = np.random.default_rng(seed)
    gestures = [GestureClass.UP, GestureClass.PUSH, GestureClass.CW]
    samples = []
    for si in range(n_subjects):
        for k in range(per_subject):
            gesture = gestures[k % len(gestures)]
            level = separation * si + 0.3 * gestures.index(gesture)
            samples.append(WindowSample(
                window_id=f"s{si}w{k}", subject_id=f"subj{si}", session_id="s0",
                gesture=gesture, image=rng.random((8, 8, 3)),
                segments={kind: level + 0.05 * rng.standard_normal(16)}))
    return samples


class TestRunExperiment:
    def test_report_shape_and_hygiene(self):
        samples = cluster_dataset()
        config = fast_experiment_config()
        report = run_experiment({"setA": samples}, config)
        assert report.datasets == ["setA"]
        assert report.signal_kinds == ["EDA"]
        cell = report.cells["setA"]["EDA"]
        assert len(cell.raw) == 2
        assert all(0.0 <= a <= 1.0 for a in cell.raw)
        assert verify_split_hygiene(report)
        assert report.metadata["config_sha256"]

    def test_absent_kind_marked_none(self):
        samples = cluster_dataset()
        config = fast_experiment_config(signal_kinds=("EDA", "TEMP"))
        report = run_experiment({"setA": samples}, config)
        assert report.cells["setA"]["TEMP"] is None
        assert report.cells["setA"]["EDA"] is not None

    def test_single_repetition_zero_sd(self):
        samples = cluster_dataset()
        config = fast_experiment_config(n_repetitions=1)
        report = run_experiment({"setA": samples}, config)
        _, sd = report.cells["setA"]["EDA"].mean_sd()
        assert sd == 0.0

    def test_deterministic(self):
        samples = cluster_dataset()
        config = fast_experiment_config()
        r1 = run_experiment({"setA": samples}, config)
        r2 = run_experiment({"setA": samples}, config)
        assert report_to_json(r1) == report_to_json(r2)

    def test_learned_separable_clusters(self):
        samples = cluster_dataset(separation=3.0)
        config = fast_experiment_config(epochs=15)
        report = run_experiment({"setA": samples}, config)
        mean, _ = report.cells["setA"]["EDA"].mean_sd()
        assert mean >= 0.5  # chance is 1/3

    def test_episode_budget_enforced(self):
        samples = cluster_dataset(per_subject=4)
        config = fast_experiment_config(n_train_episodes=100)
        with pytest.raises(ExperimentError, match="n_train_episodes"):
            run_experiment({"setA": samples}, config)


class TestLearningCurve:
    def test_grid_shape_and_determinism(self):
        samples = cluster_dataset(per_subject=14)
        config = fast_experiment_config()
        grid = [4, 8, 12]
        points = learning_curve("setA", samples, config, grid)
        assert [p.n_episodes for p in points] == grid
        assert all(len(p.raw) == config.n_repetitions for p in points)
        again = learning_curve("setA", samples, config, grid)
        assert [(p.n_episodes, p.raw) for p in points] == \
               [(p.n_episodes, p.raw) for p in again]

    def test_grid_exceeding_pool_rejected(self):
        samples = cluster_dataset(per_subject=4)
        with pytest.raises(ExperimentError):
            learning_curve("setA", samples, fast_experiment_config(), [500])


class TestReportArtifacts:
    def make_report(self):
        samples = cluster_dataset()
        config = fast_experiment_config(signal_kinds=("EDA", "TEMP"))
        report = run_experiment({"setA": samples}, config)
        report.curves["setA"] = {"EDA": [CurvePoint(4, [0.4, 0.5]),
                                         CurvePoint(12, [0.6, 0.7])]}
        return report

    def test_json_roundtrip_equality(self):
        report = self.make_report()
        back = report_from_json(json.loads(json.dumps(report_to_json(report))))
        assert back == report

    def test_rendered_files(self, tmp_path):
        report = self.make_report()
        written = render_report(report, tmp_path)
        names = {p.name for p in written}
        assert {"report.json", "table.csv", "learning_curve_setA.png"} <= names

    def test_csv_layout(self, tmp_path):
        report = self.make_report()
        render_report(report, tmp_path)
        lines = (tmp_path / "table.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "dataset,PPG,HR,BR,BVP,IBI,EDA,TC,PC,Temp"
        row = lines[1].split(",")
        assert row[0] == "setA"
        # EDA ran, TEMP was absent: its cell is empty, not zero
        assert row[6] != "" and "±" in row[6]
        assert row[9] == ""
        # kinds that were not part of the experiment stay empty
        assert row[1] == ""

    def test_mean_sd_recompute_from_raw(self):
        cell = CellResult(raw=[0.5, 0.7, 0.6], verification_raw=[None] * 3,
                          train_pair_window_ids=[[]] * 3, test_window_ids=[[]] * 3)
        mean, sd = cell.mean_sd()
        assert mean == pytest.approx(0.6)
        assert sd == pytest.approx(np.std([0.5, 0.7, 0.6]))

    def test_byte_identical_rendering(self, tmp_path):
        report = self.make_report()
        render_report(report, tmp_path / "a")
        render_report(report, tmp_path / "b")
        assert (tmp_path / "a/report.json").read_bytes() == \
               (tmp_path / "b/report.json").read_bytes()
        assert (tmp_path / "a/table.csv").read_bytes() == \
               (tmp_path / "b/table.csv").read_bytes()


class TestBuildWindowSamples:
    def test_suite_recording(self, suite5):
        _, recordings, truths = suite5
        samples = build_window_samples(recordings[0], truths[0].windows,
                                       [SignalKind.EDA, SignalKind.HR,
                                        SignalKind.TEMP],
                                       image_side=16, physio_len=32)
        assert len(samples) == len(truths[0].windows)
        for s in samples:
            assert s.image.shape == (16, 16, 3)
            assert SignalKind.EDA in s.segments
            assert s.segments[SignalKind.EDA].shape == (32,)
            assert np.isfinite(s.segments[SignalKind.EDA]).all()

    def test_missing_channel_omits_kind(self, suite5):
        _, recordings, truths = suite5
        rec = recordings[0]
        from wearid.ingest import ChannelKind, Provenance, SensorRecording
        stripped = SensorRecording(
            rec.subject_id, rec.session_id,
            {k: v for k, v in rec.channels.items() if k != ChannelKind.EDA},
            Provenance.SYNTHETIC)
        samples = build_window_samples(stripped, truths[0].windows,
                                       [SignalKind.EDA, SignalKind.TEMP],
                                       image_side=8, physio_len=16)
        assert all(SignalKind.EDA not in s.segments for s in samples)
        assert all(SignalKind.TEMP in s.segments for s in samples)
