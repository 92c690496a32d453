"""Loading, writing, and synthesis of multi-rate wearable recordings.

Recordings follow the Empatica-style export convention: a 3-axis
accelerometer at 32 Hz plus optional physiological channels (PPG 64 Hz,
EDA 4 Hz, TEMP 4 Hz). The accelerometer is the master clock; gesture
windows are expressed in ACC sample indices and mapped to other channels
through absolute start times and rates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, FormatError, MissingChannelError


class ChannelKind(str, Enum):
    ACC_X = "ACC_X"
    ACC_Y = "ACC_Y"
    ACC_Z = "ACC_Z"
    PPG = "PPG"
    EDA = "EDA"
    TEMP = "TEMP"


class Provenance(str, Enum):
    E4_EXPORT = "E4_EXPORT"
    SYNTHETIC = "SYNTHETIC"
    GENERIC_CSV = "GENERIC_CSV"


ACC_KINDS = (ChannelKind.ACC_X, ChannelKind.ACC_Y, ChannelKind.ACC_Z)

# E4 exports ACC as signed integers in 1/64 g steps.
E4_ACC_SCALE = 1.0 / 64.0

ACC_RATE = 32.0
PPG_RATE = 64.0
EDA_RATE = 4.0
TEMP_RATE = 4.0


@dataclass
class Channel:
    """One uniformly sampled sensor stream."""

    kind: ChannelKind
    rate: float
    start_time: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.rate <= 0:
            raise FormatError(f"channel {self.kind.value}: rate must be positive, got {self.rate}")
        if self.values.ndim != 1 or self.values.size == 0:
            raise FormatError(f"channel {self.kind.value}: values must be a non-empty 1-d sequence")

    def sample_times(self) -> np.ndarray:
        return self.start_time + np.arange(self.values.size) / self.rate

    @property
    def duration(self) -> float:
        return self.values.size / self.rate


@dataclass
class SensorRecording:
    """All channels of one subject session, keyed by kind.

    The ACC triple is mandatory and must share rate, start time, and
    length; physiological channels are optional (some sources carry no
    EDA, for instance).
    """

    subject_id: str
    session_id: str
    channels: dict[ChannelKind, Channel]
    provenance: Provenance

    def __post_init__(self):
        if not self.subject_id:
            raise FormatError("subject_id must be non-empty")
        for kind in ACC_KINDS:
            if kind not in self.channels:
                raise FormatError(f"recording {self.subject_id}/{self.session_id}: missing {kind.value}")
        ax, ay, az = (self.channels[k] for k in ACC_KINDS)
        if not (ax.rate == ay.rate == az.rate
                and ax.start_time == ay.start_time == az.start_time
                and ax.values.size == ay.values.size == az.values.size):
            raise FormatError("ACC channels must share rate, start_time, and length")

    @property
    def acc_rate(self) -> float:
        return self.channels[ChannelKind.ACC_X].rate

    @property
    def acc_start_time(self) -> float:
        return self.channels[ChannelKind.ACC_X].start_time

    @property
    def n_acc_samples(self) -> int:
        return self.channels[ChannelKind.ACC_X].values.size

    def acc(self) -> np.ndarray:
        """3-axis acceleration as an (n, 3) array in g."""
        return np.column_stack([self.channels[k].values for k in ACC_KINDS])


# ---------------------------------------------------------------------------
# Empatica-style CSV export layout
# ---------------------------------------------------------------------------

_E4_SINGLE = {
    "BVP.csv": ChannelKind.PPG,  # device-processed PPG
    "EDA.csv": ChannelKind.EDA,
    "TEMP.csv": ChannelKind.TEMP,
}


def _read_e4_csv(path: Path, n_cols: int) -> tuple[float, float, np.ndarray]:
    """Parse one export file: row 1 start time, row 2 rate, rows 3+ data."""
    try:
        raw = np.loadtxt(path, delimiter=",", ndmin=2)
    except (ValueError, OSError) as exc:
        raise FormatError(f"{path.name}: cannot parse as numeric CSV ({exc})") from exc
    if raw.shape[0] < 3:
        raise FormatError(f"{path.name}: expected 2 header rows plus data rows")
    if raw.shape[1] != n_cols:
        raise FormatError(f"{path.name}: expected {n_cols} column(s), found {raw.shape[1]}")
    start_time = float(raw[0, 0])
    rate = float(raw[1, 0])
    if rate <= 0:
        raise FormatError(f"{path.name}: sample rate must be positive, got {rate}")
    return start_time, rate, raw[2:]


def load_e4_recording(directory: str | Path, subject_id: str,
                      session_id: str | None = None) -> SensorRecording:
    """Load an E4-style export directory.

    ACC.csv is required (raw integer 1/64 g units, scaled to g here);
    BVP.csv, EDA.csv, and TEMP.csv are picked up when present.
    """
    directory = Path(directory)
    acc_path = directory / "ACC.csv"
    if not acc_path.exists():
        raise FormatError(f"{directory}: no ACC.csv (required channel)")

    channels: dict[ChannelKind, Channel] = {}
    start, rate, data = _read_e4_csv(acc_path, n_cols=3)
    for i, kind in enumerate(ACC_KINDS):
        channels[kind] = Channel(kind, rate, start, data[:, i] * E4_ACC_SCALE)

    for name, kind in _E4_SINGLE.items():
        path = directory / name
        if not path.exists():
            continue
        start, rate, data = _read_e4_csv(path, n_cols=1)
        channels[kind] = Channel(kind, rate, start, data[:, 0])

    return SensorRecording(
        subject_id=subject_id,
        session_id=session_id if session_id is not None else directory.name,
        channels=channels,
        provenance=Provenance.E4_EXPORT,
    )


def write_e4_recording(recording: SensorRecording, directory: str | Path) -> None:
    """Write a recording in the E4 export layout (ACC quantized to 1/64 g)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    ax = recording.channels[ChannelKind.ACC_X]
    raw = np.column_stack([
        np.round(recording.channels[k].values / E4_ACC_SCALE).astype(int) for k in ACC_KINDS
    ])
    with open(directory / "ACC.csv", "w") as fh:
        fh.write(",".join([repr(ax.start_time)] * 3) + "\n")
        fh.write(",".join([repr(ax.rate)] * 3) + "\n")
        for row in raw:
            fh.write(f"{row[0]},{row[1]},{row[2]}\n")

    for name, kind in _E4_SINGLE.items():
        ch = recording.channels.get(kind)
        if ch is None:
            continue
        with open(directory / name, "w") as fh:
            fh.write(repr(ch.start_time) + "\n")
            fh.write(repr(ch.rate) + "\n")
            for v in ch.values:
                fh.write(repr(float(v)) + "\n")


# ---------------------------------------------------------------------------
# Generic single-column CSV adapter (for non-E4 devices)
# ---------------------------------------------------------------------------

def write_generic_csv(path: str | Path, start_time: float, rate: float,
                      values: Sequence[float]) -> None:
    """One channel per file: two header lines (start_time, rate), one value per row."""
    with open(path, "w") as fh:
        fh.write(repr(float(start_time)) + "\n")
        fh.write(repr(float(rate)) + "\n")
        for v in np.asarray(values, dtype=float):
            fh.write(repr(float(v)) + "\n")


def load_generic_csv(path: str | Path) -> tuple[float, float, np.ndarray]:
    path = Path(path)
    start, rate, data = _read_e4_csv(path, n_cols=1)
    return start, rate, data[:, 0]


def load_generic_recording(directory: str | Path, subject_id: str,
                           session_id: str | None = None) -> SensorRecording:
    """Load a directory of generic per-channel CSVs named ``<KIND>.csv``.

    ACC is stored already in g (no E4 integer quantization).
    """
    directory = Path(directory)
    channels: dict[ChannelKind, Channel] = {}
    for kind in ChannelKind:
        path = directory / f"{kind.value}.csv"
        if not path.exists():
            continue
        start, rate, values = load_generic_csv(path)
        channels[kind] = Channel(kind, rate, start, values)
    if not any(k in channels for k in ACC_KINDS):
        raise FormatError(f"{directory}: no ACC_X/Y/Z.csv channels found")
    return SensorRecording(
        subject_id=subject_id,
        session_id=session_id if session_id is not None else directory.name,
        channels=channels,
        provenance=Provenance.GENERIC_CSV,
    )


def write_generic_recording(recording: SensorRecording, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for kind, ch in recording.channels.items():
        write_generic_csv(directory / f"{kind.value}.csv", ch.start_time, ch.rate, ch.values)


# ---------------------------------------------------------------------------
# Resampling and windowing primitives
# ---------------------------------------------------------------------------

def resample(values: Sequence[float], src_rate: float, dst_len: int) -> np.ndarray:
    """Linearly interpolate ``values`` onto ``dst_len`` points spanning the
    same duration. Endpoints are preserved exactly; the result does not
    depend on ``src_rate`` (kept for call-site clarity).
    """
    values = np.asarray(values, dtype=float)
    if dst_len < 2:
        raise ValueError(f"dst_len must be >= 2, got {dst_len}")
    if values.size < 2:
        raise ValueError(f"need at least 2 samples to resample, got {values.size}")
    dst_pos = np.linspace(0.0, values.size - 1, dst_len)
    return np.interp(dst_pos, np.arange(values.size), values)


def slice_values(values: np.ndarray, start_time: float, rate: float,
                 t0: float, t1: float) -> np.ndarray:
    """Samples of a uniform stream whose timestamps fall in [t0, t1)."""
    # ceil with a small nudge so exact bin edges land deterministically
    i0 = int(np.ceil((t0 - start_time) * rate - 1e-9))
    i1 = int(np.ceil((t1 - start_time) * rate - 1e-9))
    i0 = max(i0, 0)
    i1 = min(i1, len(values))
    if i1 <= i0:
        return np.empty(0, dtype=float)
    return np.array(values[i0:i1], dtype=float)


def slice_window(recording: SensorRecording, kind: ChannelKind,
                 start_acc_index: int, end_acc_index: int) -> np.ndarray:
    """Samples of ``kind`` within an ACC-clock window [start, end)."""
    if end_acc_index <= start_acc_index:
        raise ValueError(f"inverted window [{start_acc_index}, {end_acc_index})")
    if start_acc_index < 0:
        raise ValueError(f"negative window start {start_acc_index}")
    ch = recording.channels.get(kind)
    if ch is None:
        raise MissingChannelError(f"recording {recording.subject_id}/{recording.session_id} "
                                  f"has no {kind.value} channel")
    t0 = recording.acc_start_time + start_acc_index / recording.acc_rate
    t1 = recording.acc_start_time + end_acc_index / recording.acc_rate
    return slice_values(ch.values, ch.start_time, ch.rate, t0, t1)


# ---------------------------------------------------------------------------
# Synthetic recordings with scripted gestures and identity-bearing physiology
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    """Controls the synthetic multi-subject dataset.

    ``identity_separation`` in [0, 1] scales every subject-specific
    physiological trait; at 0 all subjects share one generator, so any
    downstream re-identification above chance indicates leakage.
    ``seed`` fully determines the output.
    """

    n_subjects: int
    n_sessions: int = 1
    gestures_per_session: int = 20
    gesture_classes: tuple = ()
    identity_separation: float = 0.8
    noise_sd: float = 0.002
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects < 2:
            raise ConfigError("n_subjects must be >= 2 (pairing needs at least two identities)")
        if self.n_sessions < 1 or self.gestures_per_session < 1:
            raise ConfigError("n_sessions and gestures_per_session must be positive")
        if not 0.0 <= self.identity_separation <= 1.0:
            raise ConfigError("identity_separation must lie in [0, 1]")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be nonnegative")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")


GESTURE_SAMPLES = 80            # 2.5 s at 32 Hz, covers the longest gesture
LEAD_REST_S = 6.0
TRAIL_REST_S = 6.0
GAP_RANGE_S = (4.0, 6.0)

REST_SWAY_AMP = 0.08            # g, slow arm sway at rest
REST_SWAY_FREQ = (0.3, 0.5)     # Hz
MOTIF_AMP = 0.6                 # g
MOTIF_TREMOR_SD = 0.12          # g, in-stroke tremor that breaks RP determinism

HR_BASE_RANGE = (55.0, 90.0)    # BPM
HR_OFFSET_SPAN = 8.0            # BPM, gesture-locked, +/-
BR_BASE_RANGE = (10.0, 22.0)    # breaths/min
BR_OFFSET_SPAN = 3.0
EDA_BASE_RANGE = (1.0, 8.0)     # microsiemens
EDA_BUMP_RANGE = (0.3, 1.3)     # microsiemens at separation 1
TEMP_BASE_RANGE = (31.0, 35.0)  # deg C
TEMP_OFFSET_SPAN = 0.4

RESPONSE_S = 6.0                # physiological response window from gesture onset
BR_MOD_DEPTH = 0.35             # respiratory amplitude modulation of PPG
PPG_NOISE_SCALE = 10.0          # channel noise as multiples of config.noise_sd
EDA_NOISE_SCALE = 10.0
TEMP_NOISE_SCALE = 5.0
SYNTH_EPOCH = 1.6e9             # UTC start stamp for all synthetic sessions


@dataclass
class SubjectProfile:
    """Per-subject physiological generator parameters (inspect for tests)."""

    subject_id: str
    hr_base: float
    br_base: float
    eda_base: float
    temp_base: float
    hr_offset: dict = field(default_factory=dict)    # class -> BPM
    br_offset: dict = field(default_factory=dict)    # class -> breaths/min
    eda_bump: dict = field(default_factory=dict)     # class -> microsiemens
    temp_offset: dict = field(default_factory=dict)  # class -> deg C


@dataclass
class RecordingTruth:
    """Ground-truth gesture windows for one synthetic recording."""

    subject_id: str
    session_id: str
    windows: list


def _resolved_classes(config: SynthConfig):
    from .gesture import GestureClass  # deferred: gesture imports ingest.resample
    if config.gesture_classes:
        classes = tuple(GestureClass(c) for c in config.gesture_classes)
    else:
        classes = tuple(GestureClass)
    return classes


def _shrink(draw: np.ndarray, lo: float, hi: float, sep: float) -> np.ndarray:
    """Pull per-subject draws toward the range midpoint as sep -> 0."""
    mid = 0.5 * (lo + hi)
    return mid + (draw - mid) * sep


def synth_profiles(config: SynthConfig) -> list[SubjectProfile]:
    """Deterministic per-subject generator parameters.

    Baselines are uniform draws shrunk toward the population midpoint by
    ``identity_separation``; gesture-locked offsets are evenly spaced
    lattices permuted per class, so at full separation every pair of
    subjects differs by at least one lattice step in every class.
    """
    classes = _resolved_classes(config)
    rng = np.random.default_rng([config.seed, 0])
    n = config.n_subjects
    sep = config.identity_separation

    hr_base = _shrink(rng.uniform(*HR_BASE_RANGE, size=n), *HR_BASE_RANGE, sep=sep)
    br_base = _shrink(rng.uniform(*BR_BASE_RANGE, size=n), *BR_BASE_RANGE, sep=sep)
    eda_base = _shrink(rng.uniform(*EDA_BASE_RANGE, size=n), *EDA_BASE_RANGE, sep=sep)
    temp_base = _shrink(rng.uniform(*TEMP_BASE_RANGE, size=n), *TEMP_BASE_RANGE, sep=sep)

    profiles = [
        SubjectProfile(
            subject_id=f"S{i:02d}",
            hr_base=float(hr_base[i]),
            br_base=float(br_base[i]),
            eda_base=float(eda_base[i]),
            temp_base=float(temp_base[i]),
        )
        for i in range(n)
    ]

    hr_lattice = np.linspace(-HR_OFFSET_SPAN, HR_OFFSET_SPAN, n)
    br_lattice = np.linspace(-BR_OFFSET_SPAN, BR_OFFSET_SPAN, n)
    eda_lattice = np.linspace(*EDA_BUMP_RANGE, n)
    temp_lattice = np.linspace(-TEMP_OFFSET_SPAN, TEMP_OFFSET_SPAN, n)
    for cls in classes:
        perm = rng.permutation(n)
        for i, prof in enumerate(profiles):
            j = perm[i]
            prof.hr_offset[cls] = float(hr_lattice[j] * sep)
            prof.br_offset[cls] = float(br_lattice[j] * sep)
            prof.eda_bump[cls] = float(eda_lattice[j] * sep)
            prof.temp_offset[cls] = float(temp_lattice[j] * sep)
    return profiles


def _response(t: np.ndarray, t0: float, dur: float = RESPONSE_S, ramp: float = 0.5) -> np.ndarray:
    """Trapezoidal 0..1 response starting at t0, lasting dur seconds."""
    up = np.clip((t - t0) / ramp, 0.0, 1.0)
    down = np.clip((t0 + dur - t) / ramp, 0.0, 1.0)
    return np.minimum(up, down)


def _scr_kernel(t: np.ndarray, t0: float) -> np.ndarray:
    """Skin-conductance response shape: fast rise, slow decay, unit peak."""
    u = np.clip(t - t0, 0.0, None)
    k = (1.0 - np.exp(-u / 0.7)) * np.exp(-u / 2.5)
    active = (t >= t0).astype(float)
    peak = k.max()
    return active * (k / peak if peak > 0 else k)


def _synth_recording(profile: SubjectProfile, session_idx: int, config: SynthConfig,
                     classes, rng: np.random.Generator):
    from .gesture import GestureWindow, motif_waveform

    # gesture schedule on the ACC clock
    onsets, labels = [], []
    pos = int(LEAD_REST_S * ACC_RATE)
    for _ in range(config.gestures_per_session):
        onsets.append(pos)
        labels.append(classes[rng.integers(len(classes))])
        gap = rng.uniform(*GAP_RANGE_S)
        pos += GESTURE_SAMPLES + int(round(gap * ACC_RATE))
    n_acc = pos + int(TRAIL_REST_S * ACC_RATE)
    duration = n_acc / ACC_RATE

    # --- accelerometer: gravity + slow sway + scripted motifs + noise
    t_acc = np.arange(n_acc) / ACC_RATE
    sway_f = rng.uniform(*REST_SWAY_FREQ)
    phases = rng.uniform(0.0, 2 * np.pi, size=3)
    acc = np.column_stack([
        REST_SWAY_AMP * np.sin(2 * np.pi * sway_f * t_acc + phases[0]),
        REST_SWAY_AMP * np.sin(2 * np.pi * sway_f * t_acc + phases[1]),
        1.0 + REST_SWAY_AMP * np.sin(2 * np.pi * sway_f * t_acc + phases[2]),
    ])
    t_win = np.linspace(0.0, 1.0, GESTURE_SAMPLES, endpoint=False)
    tremor_env = np.sin(np.pi * t_win)[:, None]
    for onset, label in zip(onsets, labels):
        amp = MOTIF_AMP * (1.0 + rng.uniform(-0.1, 0.1))
        stroke = motif_waveform(label, GESTURE_SAMPLES, amplitude=amp)
        stroke += MOTIF_TREMOR_SD * tremor_env * rng.normal(0.0, 1.0, size=stroke.shape)
        acc[onset:onset + GESTURE_SAMPLES] += stroke
    acc += rng.normal(0.0, config.noise_sd, size=acc.shape)

    onset_times = [o / ACC_RATE for o in onsets]

    # --- PPG: pulse train at instantaneous HR, amplitude-modulated by breathing
    n_ppg = int(round(duration * PPG_RATE))
    t_ppg = np.arange(n_ppg) / PPG_RATE
    hr = np.full(n_ppg, profile.hr_base)
    br = np.full(n_ppg, profile.br_base)
    for t0, label in zip(onset_times, labels):
        hr += profile.hr_offset[label] * _response(t_ppg, t0)
        br += profile.br_offset[label] * _response(t_ppg, t0)
    cardiac_phase = np.cumsum(hr / 60.0) / PPG_RATE
    resp_phase = np.cumsum(br / 60.0) / PPG_RATE
    pulse = np.exp(-0.5 * (((cardiac_phase % 1.0) - 0.3) / 0.07) ** 2)
    ppg = pulse * (1.0 + BR_MOD_DEPTH * np.sin(2 * np.pi * resp_phase))
    ppg += rng.normal(0.0, config.noise_sd * PPG_NOISE_SCALE, size=n_ppg)

    # --- EDA: per-subject tonic level, slow drift, gesture-locked SCR bumps
    n_eda = int(round(duration * EDA_RATE))
    t_eda = np.arange(n_eda) / EDA_RATE
    eda = profile.eda_base + 0.05 * np.sin(2 * np.pi * 0.01 * t_eda + phases[0])
    for t0, label in zip(onset_times, labels):
        eda = eda + profile.eda_bump[label] * _scr_kernel(t_eda, t0)
    eda = eda + rng.normal(0.0, config.noise_sd * EDA_NOISE_SCALE, size=n_eda)

    # --- skin temperature: near-constant with tiny gesture-locked shifts
    n_temp = int(round(duration * TEMP_RATE))
    t_temp = np.arange(n_temp) / TEMP_RATE
    temp = profile.temp_base + 0.05 * np.sin(2 * np.pi * 0.005 * t_temp + phases[1])
    for t0, label in zip(onset_times, labels):
        temp = temp + profile.temp_offset[label] * _response(t_temp, t0)
    temp = temp + rng.normal(0.0, config.noise_sd * TEMP_NOISE_SCALE, size=n_temp)

    session_id = f"sess{session_idx:02d}"
    channels = {
        ChannelKind.ACC_X: Channel(ChannelKind.ACC_X, ACC_RATE, SYNTH_EPOCH, acc[:, 0]),
        ChannelKind.ACC_Y: Channel(ChannelKind.ACC_Y, ACC_RATE, SYNTH_EPOCH, acc[:, 1]),
        ChannelKind.ACC_Z: Channel(ChannelKind.ACC_Z, ACC_RATE, SYNTH_EPOCH, acc[:, 2]),
        ChannelKind.PPG: Channel(ChannelKind.PPG, PPG_RATE, SYNTH_EPOCH, ppg),
        ChannelKind.EDA: Channel(ChannelKind.EDA, EDA_RATE, SYNTH_EPOCH, eda),
        ChannelKind.TEMP: Channel(ChannelKind.TEMP, TEMP_RATE, SYNTH_EPOCH, temp),
    }
    recording = SensorRecording(profile.subject_id, session_id, channels, Provenance.SYNTHETIC)
    windows = [GestureWindow(start=o, end=o + GESTURE_SAMPLES, label=l, confidence=1.0)
               for o, l in zip(onsets, labels)]
    truth = RecordingTruth(profile.subject_id, session_id, windows)
    return recording, truth


def synth_generate(config: SynthConfig) -> tuple[list[SensorRecording], list[RecordingTruth]]:
    """Generate labeled synthetic recordings, bit-reproducible from seed."""
    classes = _resolved_classes(config)
    profiles = synth_profiles(config)
    recordings, truths = [], []
    for si, profile in enumerate(profiles):
        for sj in range(config.n_sessions):
            rng = np.random.default_rng([config.seed, 1, si, sj])
            rec, truth = _synth_recording(profile, sj, config, classes, rng)
            recordings.append(rec)
            truths.append(truth)
    return recordings, truths


# ---------------------------------------------------------------------------
# Ground-truth persistence
# ---------------------------------------------------------------------------

def ground_truth_to_json(truths: Sequence[RecordingTruth]) -> list[dict]:
    return [
        {
            "subject_id": t.subject_id,
            "session_id": t.session_id,
            "windows": [
                {"start": int(w.start), "end": int(w.end), "class": w.label.value}
                for w in t.windows
            ],
        }
        for t in truths
    ]


def ground_truth_from_json(data: list[dict]) -> list[RecordingTruth]:
    from .gesture import GestureClass, GestureWindow
    truths = []
    for entry in data:
        windows = [
            GestureWindow(start=w["start"], end=w["end"],
                          label=GestureClass(w["class"]), confidence=1.0)
            for w in entry["windows"]
        ]
        truths.append(RecordingTruth(entry["subject_id"], entry["session_id"], windows))
    return truths


def save_ground_truth(truths: Sequence[RecordingTruth], path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(ground_truth_to_json(truths), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_ground_truth(path: str | Path) -> list[RecordingTruth]:
    with open(path) as fh:
        return ground_truth_from_json(json.load(fh))
