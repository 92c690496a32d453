"""Derivation of the nine physiological signal kinds from raw channels.

PPG, EDA, and TEMP pass through unchanged; BVP is the cardiac band of
the PPG, IBI and HR come from systolic peak intervals, BR from the
respiratory modulation of the PPG envelope, and TC/PC from a median
split of EDA into tonic and phasic parts. Every derivation is a pure
deterministic function of its inputs; values that cannot be estimated
are represented as NaN rather than invented.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.ndimage import median_filter
from scipy.signal import butter, filtfilt, find_peaks, hilbert

from .errors import InsufficientDataError, MissingChannelError
from .ingest import Channel, ChannelKind, SensorRecording


class SignalKind(str, Enum):
    PPG = "PPG"
    HR = "HR"
    BR = "BR"
    BVP = "BVP"
    IBI = "IBI"
    EDA = "EDA"
    TC = "TC"
    PC = "PC"
    TEMP = "TEMP"


# raw channel each kind is derived from
KIND_SOURCE = {
    SignalKind.PPG: ChannelKind.PPG,
    SignalKind.HR: ChannelKind.PPG,
    SignalKind.BR: ChannelKind.PPG,
    SignalKind.BVP: ChannelKind.PPG,
    SignalKind.IBI: ChannelKind.PPG,
    SignalKind.EDA: ChannelKind.EDA,
    SignalKind.TC: ChannelKind.EDA,
    SignalKind.PC: ChannelKind.EDA,
    SignalKind.TEMP: ChannelKind.TEMP,
}

CARDIAC_BAND = (0.5, 8.0)   # Hz
RESP_BAND = (0.1, 0.5)      # Hz
IBI_VALID = (0.25, 2.4)     # s, physiologically plausible interval
PEAK_MIN_DISTANCE_S = 0.25
PEAK_PROMINENCE_SD = 0.3
TONIC_WINDOW_S = 4.0
HR_WINDOW_S = 10.0
BR_WINDOW_S = 30.0
BR_EDGE_GUARD_S = 5.0
DERIVE_HOP_S = 1.0


@dataclass
class DerivedSeries:
    """A derived signal. Regular series carry start_time and rate;
    irregular ones (IBI) carry explicit per-sample times instead."""

    kind: SignalKind
    rate: float
    start_time: float
    values: np.ndarray
    times: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.times is not None:
            self.times = np.asarray(self.times, dtype=float)

    def sample_times(self) -> np.ndarray:
        if self.times is not None:
            return self.times
        return self.start_time + np.arange(self.values.size) / self.rate


def series_from_channel(ch: Channel, kind: SignalKind) -> DerivedSeries:
    return DerivedSeries(kind=kind, rate=ch.rate, start_time=ch.start_time,
                         values=np.array(ch.values))


def _bandpass(values: np.ndarray, rate: float, band: tuple[float, float],
              order: int = 3) -> np.ndarray:
    nyq = rate / 2.0
    high = min(band[1], 0.9 * nyq)  # keep the filter valid at low sample rates
    b, a = butter(order, [band[0] / nyq, high / nyq], btype="band")
    # default padding is far too short for low cutoffs; pad ~3 periods
    padlen = min(values.size - 2, int(3.0 * rate / band[0]))
    return filtfilt(b, a, values, padlen=max(padlen, 3 * (2 * order + 1)))


def derive_bvp(ppg: DerivedSeries) -> DerivedSeries:
    """Cardiac-band (0.5-8 Hz) component of the PPG at the same rate."""
    if ppg.values.size / ppg.rate < 4.0:
        raise InsufficientDataError("BVP derivation needs at least 4 s of PPG")
    filtered = _bandpass(ppg.values, ppg.rate, CARDIAC_BAND)
    return DerivedSeries(SignalKind.BVP, ppg.rate, ppg.start_time, filtered)


def _systolic_peaks(bvp: DerivedSeries) -> np.ndarray:
    sd = float(np.std(bvp.values))
    if sd == 0.0:
        return np.empty(0, dtype=int)
    peaks, _ = find_peaks(
        bvp.values,
        distance=max(1, int(round(PEAK_MIN_DISTANCE_S * bvp.rate))),
        prominence=PEAK_PROMINENCE_SD * sd,
    )
    return peaks


def derive_ibi(bvp: DerivedSeries) -> DerivedSeries:
    """Successive peak-time differences, implausible intervals dropped.

    Each interval is stamped at its closing peak's time.
    """
    peaks = _systolic_peaks(bvp)
    if peaks.size < 2:
        raise InsufficientDataError("IBI derivation needs at least 2 detectable peaks")
    peak_times = bvp.start_time + peaks / bvp.rate
    intervals = np.diff(peak_times)
    keep = (intervals >= IBI_VALID[0]) & (intervals <= IBI_VALID[1])
    return DerivedSeries(SignalKind.IBI, rate=0.0, start_time=bvp.start_time,
                         values=intervals[keep], times=peak_times[1:][keep])


def derive_hr(bvp: DerivedSeries, window_s: float = HR_WINDOW_S,
              hop_s: float = DERIVE_HOP_S) -> DerivedSeries:
    """Windowed heart rate: 60 / mean(IBI) per hop, NaN where no valid IBI.

    Samples are stamped at window centers. A signal with no detectable
    beats at all yields an all-missing series rather than an error.
    """
    duration = bvp.values.size / bvp.rate
    n_out = max(1, int(np.floor((duration - window_s) / hop_s)) + 1)
    values = np.full(n_out, np.nan)
    try:
        ibi = derive_ibi(bvp)
    except InsufficientDataError:
        ibi = None
    if ibi is not None:
        for k in range(n_out):
            t0 = bvp.start_time + k * hop_s
            in_win = (ibi.times >= t0) & (ibi.times < t0 + window_s)
            if np.any(in_win):
                values[k] = 60.0 / float(np.mean(ibi.values[in_win]))
    return DerivedSeries(SignalKind.HR, rate=1.0 / hop_s,
                         start_time=bvp.start_time + window_s / 2.0, values=values)


def derive_br(ppg: DerivedSeries, window_s: float = BR_WINDOW_S,
              hop_s: float = DERIVE_HOP_S) -> DerivedSeries:
    """Breathing rate from the respiratory band of the PPG envelope.

    Per hop, the dominant spectral peak in 0.1-0.5 Hz is reported in
    breaths/min; a window is NaN when no peak stands above the noise
    floor (below 2x the median band power, or modulation depth under 2%
    of the envelope level) or when it touches the edge-transient guard
    region of the record.
    """
    duration = ppg.values.size / ppg.rate
    if duration < window_s:
        raise InsufficientDataError(f"BR derivation needs at least {window_s:.0f} s of PPG")
    bvp = derive_bvp(ppg)
    envelope = np.abs(hilbert(bvp.values))
    env_level = float(np.mean(envelope))
    resp = _bandpass(envelope, ppg.rate, RESP_BAND, order=2)
    # demodulation and filtering ring near the record edges
    guard_s = min(BR_EDGE_GUARD_S, max(0.0, (duration - window_s) / 2.0))

    win_n = int(round(window_s * ppg.rate))
    hop_n = int(round(hop_s * ppg.rate))
    n_out = max(1, (ppg.values.size - win_n) // hop_n + 1)
    nfft = 1 << int(np.ceil(np.log2(win_n * 8)))  # zero-pad for fine peak location
    freqs = np.fft.rfftfreq(nfft, d=1.0 / ppg.rate)
    band = (freqs >= RESP_BAND[0]) & (freqs <= RESP_BAND[1])

    values = np.full(n_out, np.nan)
    for k in range(n_out):
        t_lo = k * hop_s
        if t_lo < guard_s or t_lo + window_s > duration - guard_s:
            continue
        seg = resp[k * hop_n: k * hop_n + win_n]
        spec = np.abs(np.fft.rfft(seg, n=nfft)) ** 2
        band_spec = spec[band]
        peak_idx = int(np.argmax(band_spec))
        peak_power = float(band_spec[peak_idx])
        amplitude = 2.0 * np.sqrt(peak_power) / win_n
        if peak_power < 2.0 * float(np.median(band_spec)):
            continue
        if env_level > 0 and amplitude < 2e-2 * env_level:
            continue
        values[k] = float(freqs[band][peak_idx]) * 60.0
    return DerivedSeries(SignalKind.BR, rate=1.0 / hop_s,
                         start_time=ppg.start_time + window_s / 2.0, values=values)


def _sliding_median(values: np.ndarray, size: int) -> np.ndarray:
    """Odd-sized sliding median with edge padding."""
    return median_filter(values, size=size, mode="nearest")


def decompose_eda(eda: DerivedSeries) -> tuple[DerivedSeries, DerivedSeries]:
    """Split EDA into tonic (4 s sliding median) and phasic (residual) parts.

    TC + PC reconstructs the input bit-exactly whenever samples stay
    within a factor of two of the local median (the subtraction is then
    exact per Sterbenz), which any physiological skin-conductance signal
    satisfies; arbitrary inputs may be off by one ulp.
    """
    if eda.values.size / eda.rate < 8.0:
        raise InsufficientDataError("EDA decomposition needs at least 8 s of data")
    size = int(round(TONIC_WINDOW_S * eda.rate))
    if size % 2 == 0:
        size += 1
    tonic = _sliding_median(eda.values, size)
    phasic = eda.values - tonic
    tc = DerivedSeries(SignalKind.TC, eda.rate, eda.start_time, tonic)
    pc = DerivedSeries(SignalKind.PC, eda.rate, eda.start_time, phasic)
    return tc, pc


def select_signal(recording: SensorRecording, kind: SignalKind) -> DerivedSeries:
    """Dispatch to the raw channel or derivation for ``kind``.

    Raises MissingChannelError when the source channel is absent (for
    example TC on a device without EDA).
    """
    source = KIND_SOURCE[kind]
    ch = recording.channels.get(source)
    if ch is None:
        raise MissingChannelError(
            f"{kind.value} requires the {source.value} channel, absent from "
            f"recording {recording.subject_id}/{recording.session_id}")

    if kind in (SignalKind.PPG, SignalKind.EDA, SignalKind.TEMP):
        return series_from_channel(ch, kind)
    if kind == SignalKind.BVP:
        return derive_bvp(series_from_channel(ch, SignalKind.PPG))
    if kind == SignalKind.IBI:
        return derive_ibi(derive_bvp(series_from_channel(ch, SignalKind.PPG)))
    if kind == SignalKind.HR:
        return derive_hr(derive_bvp(series_from_channel(ch, SignalKind.PPG)))
    if kind == SignalKind.BR:
        return derive_br(series_from_channel(ch, SignalKind.PPG))
    if kind == SignalKind.TC:
        return decompose_eda(series_from_channel(ch, SignalKind.EDA))[0]
    if kind == SignalKind.PC:
        return decompose_eda(series_from_channel(ch, SignalKind.EDA))[1]
    raise ValueError(f"unknown signal kind {kind!r}")


def slice_series(series: DerivedSeries, t0: float, t1: float) -> np.ndarray:
    """Values of the series whose sample times fall in [t0, t1)."""
    times = series.sample_times()
    mask = (times >= t0 - 1e-9) & (times < t1 - 1e-9)
    return np.array(series.values[mask])


def fill_gaps(values: np.ndarray, rate: float, max_gap_s: float = 5.0) -> np.ndarray | None:
    """Interpolate NaN runs no longer than ``max_gap_s``; None if unfillable.

    Edge gaps cannot be interpolated, so any NaN touching either end
    invalidates the segment, as does a gap longer than the budget.
    """
    values = np.asarray(values, dtype=float)
    nan = np.isnan(values)
    if not nan.any():
        return values
    if nan.all() or nan[0] or nan[-1]:
        return None
    max_gap = int(np.floor(max_gap_s * rate))
    run = 0
    for flag in nan:
        run = run + 1 if flag else 0
        if run > max_gap:
            return None
    idx = np.arange(values.size)
    out = values.copy()
    out[nan] = np.interp(idx[nan], idx[~nan], values[~nan])
    return out
