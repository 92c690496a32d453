"""Shared fixtures: the synthetic evaluation suite is generated once per
session and reused by the unit and acceptance tests."""

import numpy as np
import pytest

from wearid import attack_eval, ingest
from wearid.gesture import (GestureSvmConfig, RqaParams, localize_gestures,
                            train_gesture_svm, training_windows)
from wearid.physio import SignalKind

SUITE_SEED = 20240811
SUITE_KIND = SignalKind.EDA  # strongest, most robust identity carrier in the suite


def suite_synth_config(identity_separation, n_subjects=5, n_sessions=2,
                       gestures_per_session=20):
    return ingest.SynthConfig(
        n_subjects=n_subjects,
        n_sessions=n_sessions,
        gestures_per_session=gestures_per_session,
        identity_separation=identity_separation,
        noise_sd=0.002,
        seed=SUITE_SEED,
    )


def suite_experiment_config(**overrides):
    base = dict(
        signal_kinds=(SUITE_KIND.value,),
        n_train_episodes=100,
        n_repetitions=5,
        train_fraction=0.7,
        seed=11,
        max_pairs=150,
        physio_len=64,
        image_side=32,
        d_img=32,
        d_phys=32,
        conv_channels=(8, 16, 32),
        lstm_hidden=32,
        lstm_layers=2,
        epochs=40,
        lr=0.01,
        batch_size=32,
        momentum=0.9,
    )
    base.update(overrides)
    return attack_eval.ExperimentConfig(**base)


def build_suite_samples(recordings, window_lists, kinds=(SUITE_KIND,),
                        image_side=32, physio_len=64):
    samples = []
    for rec, windows in zip(recordings, window_lists):
        samples += attack_eval.build_window_samples(
            rec, windows, list(kinds), image_side=image_side, physio_len=physio_len)
    return samples


@pytest.fixture(scope="session")
def suite5():
    """5 subjects x 2 sessions x 20 gestures at separation 0.8."""
    config = suite_synth_config(identity_separation=0.8)
    recordings, truths = ingest.synth_generate(config)
    return config, recordings, truths


@pytest.fixture(scope="session")
def suite5_sep0():
    config = suite_synth_config(identity_separation=0.0)
    recordings, truths = ingest.synth_generate(config)
    return config, recordings, truths


@pytest.fixture(scope="session")
def suite5_gesture_model(suite5):
    """SVM trained on the suite's ground-truth windows (first sessions only,
    so second-session windows stay honestly held out for accuracy checks)."""
    _, recordings, truths = suite5
    labeled = []
    for rec, truth in zip(recordings, truths):
        if rec.session_id != "sess00":
            continue
        labeled += training_windows(rec.acc(), truth.windows)
    return train_gesture_svm(labeled, GestureSvmConfig())


def detect_all(recordings, model, params=RqaParams()):
    return [localize_gestures(rec.acc(), model, params) for rec in recordings]


@pytest.fixture(scope="session")
def suite5_samples_detected(suite5, suite5_gesture_model):
    """WindowSamples via the full detection path (the end-to-end attack input)."""
    _, recordings, _ = suite5
    window_lists = detect_all(recordings, suite5_gesture_model)
    return build_suite_samples(recordings, window_lists)


@pytest.fixture(scope="session")
def suite5_sep0_samples_detected(suite5_sep0, suite5_gesture_model):
    _, recordings, _ = suite5_sep0
    window_lists = detect_all(recordings, suite5_gesture_model)
    return build_suite_samples(recordings, window_lists)


@pytest.fixture(scope="session")
def suite5_samples_truth(suite5):
    _, recordings, truths = suite5
    return build_suite_samples(recordings, [t.windows for t in truths])
