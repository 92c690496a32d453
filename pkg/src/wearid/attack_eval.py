"""Pair construction, re-identification experiments, and report rendering.

The protocol: sample a fixed number of gesture-window episodes as training
candidates, build similar/dissimilar input pairs from them (similar means
same individual performing the same gesture), train the Siamese model, and
score closed-set identification over all held-out gesture windows. Results
aggregate to mean and SD over seeded repetitions, per dataset and per
physiological signal kind, with missing channels reported as absent rather
than zero.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .errors import ConfigError, ExperimentError, InsufficientDataError, \
    MissingChannelError, PairSamplingError
from .gesture import GestureClass
from .ingest import SensorRecording, resample
from .mmsnn import (LossWeights, ModalInput, ModelConfig, TrainConfig,
                    encode, init_model, predict_identity, train)
from .physio import SignalKind, fill_gaps, select_signal, slice_series
from .rpencode import encode_acc_image

# Table layout: one column per signal kind, in the conventional order.
REPORT_KINDS = [SignalKind.PPG, SignalKind.HR, SignalKind.BR, SignalKind.BVP,
                SignalKind.IBI, SignalKind.EDA, SignalKind.TC, SignalKind.PC,
                SignalKind.TEMP]
REPORT_HEADERS = {SignalKind.TEMP: "Temp"}


@dataclass
class WindowSample:
    """One gesture window prepared for the attack: the encoded ACC image
    plus fixed-length raw (un-normalized) segments per available kind."""

    window_id: str
    subject_id: str
    session_id: str
    gesture: GestureClass
    image: np.ndarray
    segments: dict


@dataclass
class SamplePair:
    """The unit of Siamese training; y == 1 iff same subject and same gesture."""

    a: ModalInput
    b: ModalInput
    y: int
    id_a: str
    id_b: str
    gesture_a: GestureClass
    gesture_b: GestureClass
    window_id_a: str = ""
    window_id_b: str = ""

    def __post_init__(self):
        expected = int(self.id_a == self.id_b and self.gesture_a == self.gesture_b)
        if self.y != expected:
            raise ValueError("pair label violates the similarity rule "
                             "(similar iff same identity and same gesture)")


def build_window_samples(recording: SensorRecording, windows, kinds,
                         image_side: int = 64, physio_len: int = 128,
                         max_gap_s: float = 5.0) -> list[WindowSample]:
    """Assemble WindowSamples for one recording.

    Derived series are computed once per recording and sliced per window.
    A kind is omitted from a sample when the channel is absent, the
    window holds fewer than two samples of it, or a NaN gap exceeds the
    interpolation budget.
    """
    acc = recording.acc()
    series = {}
    for kind in kinds:
        try:
            series[kind] = select_signal(recording, kind)
        except (MissingChannelError, InsufficientDataError):
            series[kind] = None

    samples = []
    for w in windows:
        if w.end > acc.shape[0]:
            continue
        image = encode_acc_image(acc[w.start:w.end, 0], acc[w.start:w.end, 1],
                                 acc[w.start:w.end, 2], side=image_side).pixels
        t0 = recording.acc_start_time + w.start / recording.acc_rate
        t1 = recording.acc_start_time + w.end / recording.acc_rate
        segments = {}
        for kind, ser in series.items():
            if ser is None:
                continue
            vals = slice_series(ser, t0, t1)
            if vals.size < 2:
                continue
            if ser.times is None:
                vals = fill_gaps(vals, ser.rate, max_gap_s)
                if vals is None:
                    continue
            elif np.isnan(vals).any():
                continue
            segments[kind] = resample(vals, ser.rate, physio_len)
        samples.append(WindowSample(
            window_id=f"{recording.subject_id}:{recording.session_id}:{w.start}",
            subject_id=recording.subject_id,
            session_id=recording.session_id,
            gesture=w.label,
            image=image,
            segments=segments,
        ))
    return samples


# ---------------------------------------------------------------------------
# Pair sampling
# ---------------------------------------------------------------------------

def _eligible(samples, kind: SignalKind):
    return [s for s in samples if kind in s.segments]


def count_pair_pool(samples, kind: SignalKind) -> tuple[int, int]:
    """(max similar, max dissimilar) pairs constructible for one kind."""
    elig = _eligible(samples, kind)
    n_sim = n_dis = 0
    for i in range(len(elig)):
        for j in range(i + 1, len(elig)):
            if elig[i].subject_id != elig[j].subject_id:
                n_dis += 1
            elif elig[i].gesture == elig[j].gesture:
                n_sim += 1
    return n_sim, n_dis


def _normalize(segment: np.ndarray, norm: tuple[float, float] | None) -> np.ndarray:
    if norm is None:
        return np.asarray(segment, dtype=float)
    mean, sd = norm
    return (np.asarray(segment, dtype=float) - mean) / (sd if sd > 0 else 1.0)


def _modal_input(sample: WindowSample, kind: SignalKind,
                 norm: tuple[float, float] | None) -> ModalInput:
    return ModalInput(image=sample.image, physio=_normalize(sample.segments[kind], norm))


def build_pairs(samples, kind: SignalKind, n_similar: int, n_dissimilar: int,
                seed, norm: tuple[float, float] | None = None) -> list[SamplePair]:
    """Sample labeled pairs uniformly without replacement.

    Similar pairs join two windows of one subject performing one gesture;
    dissimilar pairs join windows of two different subjects. Requests
    beyond the candidate pools raise PairSamplingError naming the
    achievable maxima.
    """
    elig = _eligible(samples, kind)
    sim_pool, dis_pool = [], []
    for i in range(len(elig)):
        for j in range(i + 1, len(elig)):
            if elig[i].subject_id != elig[j].subject_id:
                dis_pool.append((i, j))
            elif elig[i].gesture == elig[j].gesture:
                sim_pool.append((i, j))
    if n_similar > len(sim_pool) or n_dissimilar > len(dis_pool):
        raise PairSamplingError(
            f"requested {n_similar} similar / {n_dissimilar} dissimilar pairs for "
            f"{kind.value}, but only {len(sim_pool)} / {len(dis_pool)} are achievable")

    rng = np.random.default_rng(seed)
    chosen = []
    if n_similar:
        chosen += [(sim_pool[k], 1) for k in
                   rng.choice(len(sim_pool), size=n_similar, replace=False)]
    if n_dissimilar:
        chosen += [(dis_pool[k], 0) for k in
                   rng.choice(len(dis_pool), size=n_dissimilar, replace=False)]

    pairs = []
    for (i, j), y in chosen:
        a, b = elig[i], elig[j]
        pairs.append(SamplePair(
            a=_modal_input(a, kind, norm), b=_modal_input(b, kind, norm),
            y=y, id_a=a.subject_id, id_b=b.subject_id,
            gesture_a=a.gesture, gesture_b=b.gesture,
            window_id_a=a.window_id, window_id_b=b.window_id,
        ))
    return pairs


def accuracy(predictions, truths) -> float:
    """Fraction of agreeing entries: (TP + TN) / all for binary labels,
    micro accuracy for identity labels."""
    predictions = list(predictions)
    truths = list(truths)
    if not predictions or len(predictions) != len(truths):
        raise ValueError("predictions and truths must be equal-length and non-empty")
    return sum(p == t for p, t in zip(predictions, truths)) / len(truths)


# ---------------------------------------------------------------------------
# Experiment protocol
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    signal_kinds: tuple
    n_train_episodes: int = 100
    n_repetitions: int = 5
    train_fraction: float = 0.7
    seed: int = 0
    max_pairs: int = 200
    physio_len: int = 128
    image_side: int = 64
    d_img: int = 64
    d_phys: int = 64
    conv_channels: tuple = (16, 32, 64)
    lstm_hidden: int = 64
    lstm_layers: int = 2
    lambda_ver: float = 1.0
    lambda_id: float = 1.0
    margin: float = 1.0
    epochs: int = 30
    lr: float = 0.01
    batch_size: int = 32
    momentum: float = 0.9

    def __post_init__(self):
        if not self.signal_kinds:
            raise ConfigError("signal_kinds must be non-empty")
        object.__setattr__(self, "signal_kinds",
                           tuple(SignalKind(k) for k in self.signal_kinds))
        object.__setattr__(self, "conv_channels", tuple(self.conv_channels))
        if self.n_train_episodes < 1 or self.n_repetitions < 1:
            raise ConfigError("n_train_episodes and n_repetitions must be positive")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie strictly between 0 and 1")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")

    def model_config(self, num_identities: int) -> ModelConfig:
        return ModelConfig(num_identities=num_identities, physio_len=self.physio_len,
                           image_side=self.image_side, d_img=self.d_img,
                           d_phys=self.d_phys, conv_channels=self.conv_channels,
                           lstm_hidden=self.lstm_hidden, lstm_layers=self.lstm_layers)

    def loss_weights(self) -> LossWeights:
        return LossWeights(lambda_ver=self.lambda_ver, lambda_id=self.lambda_id,
                           margin=self.margin)

    def train_config(self, rep_seed: int) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, lr=self.lr, batch_size=self.batch_size,
                           momentum=self.momentum, seed=rep_seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["signal_kinds"] = [k.value for k in self.signal_kinds]
        d["conv_channels"] = list(self.conv_channels)
        return d


@dataclass
class CellResult:
    """Raw per-repetition outcomes for one (dataset, kind) cell.

    Accuracies are fractions in [0, 1]; mean/SD are derived, not stored,
    so reports round-trip exactly.
    """

    raw: list
    verification_raw: list
    train_pair_window_ids: list
    test_window_ids: list

    def mean_sd(self) -> tuple[float, float]:
        arr = np.asarray(self.raw, dtype=float)
        return float(arr.mean()), float(arr.std())


@dataclass
class CurvePoint:
    n_episodes: int
    raw: list

    def mean_sd(self) -> tuple[float, float]:
        arr = np.asarray(self.raw, dtype=float)
        return float(arr.mean()), float(arr.std())


@dataclass
class ExperimentReport:
    datasets: list
    signal_kinds: list
    cells: dict        # dataset -> kind value -> CellResult | None
    curves: dict       # dataset -> kind value -> [CurvePoint]
    metadata: dict


def _split_train_test(samples, train_fraction: float, rng) -> tuple[list, list]:
    """Window-level split stratified by subject."""
    by_subject = {}
    for s in samples:
        by_subject.setdefault(s.subject_id, []).append(s)
    train, test = [], []
    for subject in sorted(by_subject):
        group = by_subject[subject]
        order = rng.permutation(len(group))
        n_train = int(round(train_fraction * len(group)))
        n_train = min(max(n_train, 1), len(group) - 1) if len(group) > 1 else n_train
        for pos, k in enumerate(order):
            (train if pos < n_train else test).append(group[k])
    return train, test


def _ensure_pairable(episodes, pool):
    """Guarantee the episode set admits at least one similar and one
    dissimilar pair by swapping in one matching pool window when needed
    (deterministic: first match in pool order replaces the last episode)."""
    if _count_pairs_fast(episodes)[0] == 0:
        for cand in pool:
            if any(cand.subject_id == e.subject_id and cand.gesture == e.gesture
                   and cand.window_id != e.window_id for e in episodes[:-1]):
                if cand.window_id not in {e.window_id for e in episodes}:
                    episodes[-1] = cand
                    break
    if _count_pairs_fast(episodes)[1] == 0:
        for cand in pool:
            if any(cand.subject_id != e.subject_id for e in episodes[:-1]):
                if cand.window_id not in {e.window_id for e in episodes}:
                    episodes[-1] = cand
                    break
    return episodes


def _count_pairs_fast(samples) -> tuple[int, int]:
    n_sim = n_dis = 0
    for i in range(len(samples)):
        for j in range(i + 1, len(samples)):
            if samples[i].subject_id != samples[j].subject_id:
                n_dis += 1
            elif samples[i].gesture == samples[j].gesture:
                n_sim += 1
    return n_sim, n_dis


def _norm_stats(episodes, kind: SignalKind) -> tuple[float, float]:
    values = np.concatenate([s.segments[kind] for s in episodes])
    return float(values.mean()), float(values.std())


def _eer_threshold(distances, labels) -> float:
    """Threshold where false accepts balance false rejects on given pairs."""
    distances = np.asarray(distances, dtype=float)
    labels = np.asarray(labels, dtype=int)
    order = np.sort(np.unique(distances))
    mids = np.concatenate([[order[0] / 2.0], (order[1:] + order[:-1]) / 2.0,
                           [order[-1] + 1.0]])
    best_thr, best_gap = mids[0], np.inf
    n_sim = max(int((labels == 1).sum()), 1)
    n_dis = max(int((labels == 0).sum()), 1)
    for thr in mids:
        predicted_sim = distances <= thr
        fnr = float((~predicted_sim & (labels == 1)).sum()) / n_sim
        fpr = float((predicted_sim & (labels == 0)).sum()) / n_dis
        gap = abs(fpr - fnr)
        if gap < best_gap:
            best_gap, best_thr = gap, float(thr)
    return best_thr


def _run_single(samples, kind: SignalKind, subjects, config: ExperimentConfig,
                rng_seed, train_pool=None, test_pool=None):
    """One repetition: split, sample episodes, pair, train, evaluate.

    Returns (identification acc, verification acc | None,
    train-pair window ids, test window ids).
    """
    rng = np.random.default_rng(rng_seed)
    eligible = _eligible(samples, kind)
    if train_pool is None or test_pool is None:
        train_pool, test_pool = _split_train_test(eligible, config.train_fraction, rng)
    if not test_pool:
        raise ExperimentError(f"no test windows available for {kind.value}")
    if config.n_train_episodes > len(train_pool):
        raise ExperimentError(
            f"n_train_episodes={config.n_train_episodes} exceeds the "
            f"{len(train_pool)} available training windows for {kind.value}")

    idx = rng.choice(len(train_pool), size=config.n_train_episodes, replace=False)
    episodes = [train_pool[k] for k in idx]
    episodes = _ensure_pairable(episodes, train_pool)

    norm = _norm_stats(episodes, kind)
    n_sim_max, n_dis_max = _count_pairs_fast(episodes)
    n_pairs = min(config.max_pairs, n_sim_max, n_dis_max)
    if n_pairs < 1:
        raise ExperimentError(f"episode sample admits no usable pairs for {kind.value}")
    pairs = build_pairs(episodes, kind, n_pairs, n_pairs,
                        seed=[int(rng_seed[0]), *map(int, rng_seed[1:]), 1], norm=norm)

    test_ids = {s.window_id for s in test_pool}
    train_pair_ids = sorted({p.window_id_a for p in pairs} | {p.window_id_b for p in pairs})
    leaked = set(train_pair_ids) & test_ids
    assert not leaked, f"split hygiene violated: {sorted(leaked)[:5]}"

    model = init_model(config.model_config(len(subjects)),
                       seed=int(np.random.default_rng(rng_seed).integers(2 ** 31)),
                       identities=list(subjects))
    model.metadata = {"signal_kind": kind.value, "norm": list(norm)}
    model, _ = train(model, pairs, config.train_config(rep_seed=int(rng_seed[-1])),
                     config.loss_weights())

    predictions = [predict_identity(model, _modal_input(s, kind, norm))[0]
                   for s in test_pool]
    ident_acc = accuracy(predictions, [s.subject_id for s in test_pool])

    verification = None
    t_sim, t_dis = _count_pairs_fast(test_pool)
    n_test_pairs = min(config.max_pairs, t_sim, t_dis)
    if n_test_pairs >= 1:
        train_dists = [float(np.linalg.norm(encode(model, p.a) - encode(model, p.b)))
                       for p in pairs]
        thr = _eer_threshold(train_dists, [p.y for p in pairs])
        test_pairs = build_pairs(test_pool, kind, n_test_pairs, n_test_pairs,
                                 seed=[int(rng_seed[0]), *map(int, rng_seed[1:]), 2],
                                 norm=norm)
        test_dists = [float(np.linalg.norm(encode(model, p.a) - encode(model, p.b)))
                      for p in test_pairs]
        verification = accuracy([int(d <= thr) for d in test_dists],
                                [p.y for p in test_pairs])

    return ident_acc, verification, train_pair_ids, sorted(test_ids)


def run_experiment(datasets: dict, config: ExperimentConfig) -> ExperimentReport:
    """Per-signal re-identification accuracy over seeded repetitions.

    ``datasets`` maps name -> list[WindowSample]. Signal kinds with no
    usable windows in a dataset are reported as absent (None cells).
    """
    if not datasets:
        raise ExperimentError("no datasets supplied")
    cells = {}
    for di, (name, samples) in enumerate(datasets.items()):
        subjects = sorted({s.subject_id for s in samples})
        if len(subjects) < 2:
            raise ExperimentError(f"dataset {name!r} has fewer than 2 subjects")
        cells[name] = {}
        for ki, kind in enumerate(config.signal_kinds):
            eligible = _eligible(samples, kind)
            if len(eligible) < 4:
                cells[name][kind.value] = None
                continue
            raw, ver_raw, train_ids, test_ids = [], [], [], []
            for rep in range(config.n_repetitions):
                acc_val, ver, tr_ids, te_ids = _run_single(
                    samples, kind, subjects, config,
                    rng_seed=[config.seed, 0, di, ki, rep])
                raw.append(acc_val)
                ver_raw.append(ver)
                train_ids.append(tr_ids)
                test_ids.append(te_ids)
            cells[name][kind.value] = CellResult(
                raw=raw, verification_raw=ver_raw,
                train_pair_window_ids=train_ids, test_window_ids=test_ids)
    return ExperimentReport(
        datasets=list(datasets.keys()),
        signal_kinds=[k.value for k in config.signal_kinds],
        cells=cells,
        curves={},
        metadata=build_metadata(config, datasets),
    )


def learning_curve(dataset_name: str, samples, config: ExperimentConfig,
                   episode_grid) -> list[CurvePoint]:
    """Accuracy versus number of training episodes, one shared test split
    per repetition across all grid points."""
    episode_grid = [int(n) for n in episode_grid]
    if not episode_grid:
        raise ExperimentError("episode_grid must be non-empty")
    kind = config.signal_kinds[0]
    eligible = _eligible(samples, kind)
    subjects = sorted({s.subject_id for s in samples})
    points = {n: [] for n in episode_grid}
    for rep in range(config.n_repetitions):
        split_rng = np.random.default_rng([config.seed, 1, 0, rep])
        train_pool, test_pool = _split_train_test(eligible, config.train_fraction,
                                                  split_rng)
        if max(episode_grid) > len(train_pool):
            raise ExperimentError(
                f"episode_grid maximum {max(episode_grid)} exceeds the "
                f"{len(train_pool)} available training windows")
        for gi, n_episodes in enumerate(episode_grid):
            sub_config = ExperimentConfig(**{**config.to_dict(),
                                             "n_train_episodes": n_episodes})
            acc_val, _, _, _ = _run_single(
                samples, kind, subjects, sub_config,
                rng_seed=[config.seed, 1, 1 + gi, rep],
                train_pool=train_pool, test_pool=test_pool)
            points[n_episodes].append(acc_val)
    return [CurvePoint(n_episodes=n, raw=points[n]) for n in episode_grid]


def build_metadata(config: ExperimentConfig, datasets: dict) -> dict:
    import torch
    config_dict = config.to_dict()
    canonical = json.dumps(config_dict, sort_keys=True)
    return {
        "config": config_dict,
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "seed": config.seed,
        "dataset_subjects": {name: sorted({s.subject_id for s in samples})
                             for name, samples in datasets.items()},
        "versions": {
            "wearid": __version__,
            "numpy": np.__version__,
            "torch": torch.__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
        },
    }


def verify_split_hygiene(report: ExperimentReport) -> bool:
    """True iff no test window id appears among any repetition's training
    pair ids, across every cell of the report."""
    for kinds in report.cells.values():
        for cell in kinds.values():
            if cell is None:
                continue
            for tr, te in zip(cell.train_pair_window_ids, cell.test_window_ids):
                if set(tr) & set(te):
                    return False
    return True


# ---------------------------------------------------------------------------
# Report persistence and rendering
# ---------------------------------------------------------------------------

def report_to_json(report: ExperimentReport) -> dict:
    def cell_dict(cell):
        if cell is None:
            return None
        return {
            "raw": cell.raw,
            "verification_raw": cell.verification_raw,
            "train_pair_window_ids": cell.train_pair_window_ids,
            "test_window_ids": cell.test_window_ids,
        }

    return {
        "datasets": report.datasets,
        "signal_kinds": report.signal_kinds,
        "cells": {name: {kind: cell_dict(cell) for kind, cell in kinds.items()}
                  for name, kinds in report.cells.items()},
        "curves": {name: {kind: [{"n_episodes": p.n_episodes, "raw": p.raw}
                                 for p in points]
                          for kind, points in kinds.items()}
                   for name, kinds in report.curves.items()},
        "metadata": report.metadata,
    }


def report_from_json(data: dict) -> ExperimentReport:
    def cell_from(d):
        if d is None:
            return None
        return CellResult(raw=d["raw"], verification_raw=d["verification_raw"],
                          train_pair_window_ids=d["train_pair_window_ids"],
                          test_window_ids=d["test_window_ids"])

    return ExperimentReport(
        datasets=list(data["datasets"]),
        signal_kinds=list(data["signal_kinds"]),
        cells={name: {kind: cell_from(cell) for kind, cell in kinds.items()}
               for name, kinds in data["cells"].items()},
        curves={name: {kind: [CurvePoint(n_episodes=p["n_episodes"], raw=p["raw"])
                              for p in points]
                       for kind, points in kinds.items()}
                for name, kinds in data["curves"].items()},
        metadata=data["metadata"],
    )


def _format_cell(cell) -> str:
    if cell is None:
        return ""
    mean, sd = cell.mean_sd()
    return f"{100 * mean:.2f}±{100 * sd:.2f}"


def render_report(report: ExperimentReport, out_dir) -> list:
    """Write report.json, the per-signal accuracy table as CSV, and a
    learning-curve figure per dataset holding curve data. Returns the
    written paths. JSON and CSV are byte-deterministic for a given report."""
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out_dir / "report.json"
    with open(json_path, "w") as fh:
        json.dump(report_to_json(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(json_path)

    csv_path = out_dir / "table.csv"
    headers = ["dataset"] + [REPORT_HEADERS.get(k, k.value) for k in REPORT_KINDS]
    lines = [",".join(headers)]
    for name in report.datasets:
        row = [name]
        for kind in REPORT_KINDS:
            cell = report.cells.get(name, {}).get(kind.value)
            row.append(_format_cell(cell) if kind.value in report.signal_kinds else "")
        lines.append(",".join(row))
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(csv_path)

    for name, kinds in report.curves.items():
        if not kinds:
            continue
        fig_path = out_dir / f"learning_curve_{name}.png"
        _plot_curves(name, kinds, fig_path)
        written.append(fig_path)
    return written


def _plot_curves(dataset_name: str, kinds: dict, path) -> None:
    from matplotlib.figure import Figure

    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot(111)
    for kind, points in sorted(kinds.items()):
        xs = [p.n_episodes for p in points]
        means = [100 * p.mean_sd()[0] for p in points]
        sds = [100 * p.mean_sd()[1] for p in points]
        ax.errorbar(xs, means, yerr=sds, marker="o", capsize=3, label=kind)
    ax.set_xlabel("gesture windows in training sample")
    ax.set_ylabel("re-identification accuracy (%)")
    ax.set_title(f"{dataset_name}: accuracy vs training sample size")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
