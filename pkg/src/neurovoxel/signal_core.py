"""Multichannel EEG containers and cleaning: bandpass filtering, bad-channel
detection, and a simplified artifact subspace reconstruction (ASR).

All operations are pure: they return new recordings and never mutate inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .errors import InvalidArgument, InvalidData

DEFAULT_FS = 256.0
DEFAULT_N_CHANNELS = 128

CLASS_NAMES = ("cube", "pyramid", "torus", "union")
N_CLASSES = 4


@dataclass
class EegRecording:
    """channels x samples voltage matrix in microvolts."""

    data: np.ndarray
    fs: float = DEFAULT_FS
    channel_labels: list[str] = field(default_factory=list)
    channel_positions: np.ndarray | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise InvalidArgument("data must be a 2-D channels x samples matrix")
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise InvalidArgument("recording must have at least one channel and one sample")
        if self.fs <= 0:
            raise InvalidArgument(f"sampling rate must be positive, got {self.fs}")
        if not np.all(np.isfinite(self.data)):
            raise InvalidData("recording contains non-finite samples")
        if not self.channel_labels:
            self.channel_labels = [f"CH{i:03d}" for i in range(self.data.shape[0])]
        if len(self.channel_labels) != self.data.shape[0]:
            raise InvalidArgument(
                f"{len(self.channel_labels)} labels for {self.data.shape[0]} channels"
            )
        if self.channel_positions is not None:
            self.channel_positions = np.asarray(self.channel_positions, dtype=np.float64)
            if self.channel_positions.shape != (self.data.shape[0], 3):
                raise InvalidArgument("channel_positions must be n_channels x 3")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.fs

    def with_data(self, data: np.ndarray) -> "EegRecording":
        """New recording sharing this one's metadata."""
        return EegRecording(
            data=data,
            fs=self.fs,
            channel_labels=list(self.channel_labels),
            channel_positions=None if self.channel_positions is None else self.channel_positions.copy(),
        )

    def slice_samples(self, start: int, stop: int) -> "EegRecording":
        return self.with_data(self.data[:, start:stop].copy())


@dataclass(frozen=True)
class TrialMarker:
    """One labeled trial: class 0=cube, 1=pyramid, 2=square torus, 3=union cubes."""

    class_id: int
    onset_sample: int
    duration_samples: int

    def __post_init__(self):
        if not 0 <= self.class_id < N_CLASSES:
            raise InvalidArgument(f"class_id must be 0..3, got {self.class_id}")
        if self.onset_sample < 0 or self.duration_samples <= 0:
            raise InvalidArgument("marker onset/duration out of range")


@dataclass(frozen=True)
class BandDefinition:
    name: str
    low_hz: float
    high_hz: float

    def validate(self, fs: float):
        if not 0 < self.low_hz < self.high_hz < fs / 2:
            raise InvalidArgument(
                f"band {self.name} [{self.low_hz}, {self.high_hz}] Hz invalid for fs={fs}"
            )


THETA = BandDefinition("theta", 4.0, 7.0)
ALPHA = BandDefinition("alpha", 7.0, 15.0)
BETA = BandDefinition("beta", 15.0, 30.0)
DEFAULT_BANDS = (THETA, ALPHA, BETA)


def _design_bandpass(low_hz: float, high_hz: float, fs: float) -> np.ndarray:
    BandDefinition("bandpass", low_hz, high_hz).validate(fs)
    return signal.butter(4, [low_hz, high_hz], btype="bandpass", fs=fs, output="sos")


def bandpass_filter(rec: EegRecording, low_hz: float, high_hz: float) -> EegRecording:
    """Zero-phase 4th-order Butterworth bandpass (forward-backward), offline."""
    sos = _design_bandpass(low_hz, high_hz, rec.fs)
    if not np.all(np.isfinite(rec.data)):
        raise InvalidData("non-finite input")
    out = signal.sosfiltfilt(sos, rec.data, axis=1)
    return rec.with_data(np.ascontiguousarray(out))


class StreamingBandpass:
    """Causal form of the same Butterworth bandpass, with persisted state.

    Owned by a single pipeline thread; process() consumes sample blocks in
    order and returns filtered blocks of the same shape.
    """

    def __init__(self, n_channels: int, fs: float, low_hz: float = 1.0, high_hz: float = 40.0):
        self.sos = _design_bandpass(low_hz, high_hz, fs)
        zi = signal.sosfilt_zi(self.sos)  # (n_sections, 2)
        self.zi = np.repeat(zi[:, np.newaxis, :], n_channels, axis=1) * 0.0

    def process(self, block: np.ndarray) -> np.ndarray:
        out, self.zi = signal.sosfilt(self.sos, block, axis=1, zi=self.zi)
        return out


def detect_bad_channels(rec: EegRecording) -> np.ndarray:
    """Flag flat channels and variance outliers.

    A channel is bad iff its variance is < 1e-10 uV^2 (flat) or the robust
    z-score of its log variance exceeds 5 in magnitude (median/MAD across
    channels). With fewer than 8 channels only the flat rule applies.
    """
    if rec.n_samples < rec.fs:
        raise InvalidArgument("need at least 1 s of data for bad-channel statistics")
    var = rec.data.var(axis=1)
    bad = var < 1e-10
    if rec.n_channels >= 8:
        logv = np.log(np.maximum(var, 1e-300))
        med = np.median(logv)
        mad = np.median(np.abs(logv - med))
        if mad > 0:
            z = 0.6744897501960817 * (logv - med) / mad  # MAD -> sigma-equivalent
            bad |= np.abs(z) > 5
    return bad


@dataclass
class AsrCalibration:
    """Principal axes of calibration data plus per-component burst thresholds."""

    mixing: np.ndarray  # n_channels x n_channels, columns = principal axes
    component_thresholds: np.ndarray
    window_samples: int

    def __post_init__(self):
        ident = self.mixing.T @ self.mixing
        if not np.allclose(ident, np.eye(self.mixing.shape[1]), atol=1e-6):
            raise InvalidArgument("mixing matrix is not orthonormal")
        if np.any(self.component_thresholds <= 0):
            raise InvalidArgument("component thresholds must be strictly positive")


def _windowed_component_rms(components: np.ndarray, window_samples: int) -> np.ndarray:
    """RMS per component per half-overlapping window; (n_comp, n_windows)."""
    n = components.shape[1]
    hop = max(1, window_samples // 2)
    starts = range(0, n - window_samples + 1, hop)
    return np.stack(
        [np.sqrt(np.mean(components[:, s : s + window_samples] ** 2, axis=1)) for s in starts],
        axis=1,
    )


def asr_calibrate(rec: EegRecording, sd_threshold: float = 15.0, window_s: float = 0.5) -> AsrCalibration:
    """Fit the simplified-ASR model on (assumed clean) calibration data.

    Axes are the eigenvectors of the calibration covariance; each component's
    threshold is mean + sd_threshold * std of its windowed RMS.
    """
    if rec.duration_s < 10:
        raise InvalidArgument("ASR calibration needs at least 10 s of data")
    x = rec.data - rec.data.mean(axis=1, keepdims=True)
    cov = (x @ x.T) / x.shape[1]
    rank = np.linalg.matrix_rank(cov)
    if rank < rec.n_channels:
        warnings.warn("rank-deficient calibration covariance; regularizing diagonal")
        cov = cov + np.eye(rec.n_channels) * (1e-9 * np.trace(cov))
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    mixing = eigvecs[:, order]
    window_samples = max(2, int(round(window_s * rec.fs)))
    comp = mixing.T @ x
    rms = _windowed_component_rms(comp, window_samples)
    thresholds = rms.mean(axis=1) + sd_threshold * rms.std(axis=1)
    thresholds = np.maximum(thresholds, 1e-12)
    return AsrCalibration(mixing=mixing, component_thresholds=thresholds, window_samples=window_samples)


def asr_clean(rec: EegRecording, cal: AsrCalibration) -> EegRecording:
    """Zero burst components per window and reconstruct by overlap-add.

    Windows of cal.window_samples with 50% overlap are projected onto the
    calibration axes; components whose windowed RMS exceeds their threshold
    are zeroed before reconstruction with triangular cross-fade weights.
    """
    if rec.n_channels != cal.mixing.shape[0]:
        raise InvalidArgument(
            f"recording has {rec.n_channels} channels, calibration expects {cal.mixing.shape[0]}"
        )
    w = cal.window_samples
    hop = max(1, w // 2)
    n = rec.n_samples
    if n < w:
        return rec.with_data(rec.data.copy())
    tri = signal.windows.triang(w)
    out = np.zeros_like(rec.data)
    weight = np.zeros(n)
    starts = list(range(0, n - w + 1, hop))
    if starts[-1] + w < n:  # cover the tail
        starts.append(n - w)
    for s in starts:
        seg = rec.data[:, s : s + w]
        comp = cal.mixing.T @ seg
        rms = np.sqrt(np.mean(comp**2, axis=1))
        comp = np.where((rms > cal.component_thresholds)[:, None], 0.0, comp)
        out[:, s : s + w] += (cal.mixing @ comp) * tri
        weight[s : s + w] += tri
    weight = np.maximum(weight, 1e-12)
    return rec.with_data(out / weight)


def extract_epochs(rec: EegRecording, markers: list[TrialMarker]) -> list[tuple[int, EegRecording]]:
    """Slice one labeled epoch per marker, sample-exact."""
    epochs = []
    for i, m in enumerate(markers):
        if m.onset_sample + m.duration_samples > rec.n_samples:
            raise InvalidArgument(
                f"marker {i} (onset {m.onset_sample}, duration {m.duration_samples}) "
                f"overruns recording of {rec.n_samples} samples"
            )
        epochs.append((m.class_id, rec.slice_samples(m.onset_sample, m.onset_sample + m.duration_samples)))
    return epochs
