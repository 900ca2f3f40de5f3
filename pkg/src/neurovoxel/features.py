"""Sliding-window log band-power features.

Each 2 s window yields one feature per (channel, band): a Hann-windowed
periodogram is summed over the band's bins and log10-transformed. With the
default 128 channels x 3 bands this is the 384-dimensional feature space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .signal_core import DEFAULT_BANDS, BandDefinition, EegRecording

AMPLITUDE_GUARD_UV = 500.0
LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class WindowSpec:
    window_s: float = 2.0
    step_s: float = 0.5

    def __post_init__(self):
        if not 0 < self.step_s <= self.window_s:
            raise InvalidArgument("need 0 < step_s <= window_s")

    def window_samples(self, fs: float) -> int:
        return int(round(self.window_s * fs))

    def step_samples(self, fs: float) -> int:
        return max(1, int(round(self.step_s * fs)))


@dataclass
class FeatureMatrix:
    """windows x features log band powers with per-window labels and trial ids.

    Column layout: channel-major, bands ordered theta/alpha/beta within each
    channel, i.e. column = channel_index * n_bands + band_index.
    """

    values: np.ndarray
    labels: np.ndarray
    columns: list[tuple[int, int]]
    trial_ids: np.ndarray
    band_names: list[str] = field(default_factory=lambda: [b.name for b in DEFAULT_BANDS])

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.trial_ids = np.asarray(self.trial_ids, dtype=np.int64)
        n_windows, n_features = self.values.shape
        if len(self.columns) != n_features:
            raise InvalidArgument("column provenance length must match feature count")
        if self.labels.shape != (n_windows,) or self.trial_ids.shape != (n_windows,):
            raise InvalidArgument("labels/trial_ids must have one entry per window")
        if n_windows and not np.all(np.isfinite(self.values)):
            raise InvalidArgument("feature matrix contains non-finite values")

    @property
    def n_windows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def subset_classes(self, classes: list[int]) -> "FeatureMatrix":
        mask = np.isin(self.labels, classes)
        return FeatureMatrix(
            values=self.values[mask].copy(),
            labels=self.labels[mask].copy(),
            columns=list(self.columns),
            trial_ids=self.trial_ids[mask].copy(),
            band_names=list(self.band_names),
        )


def sliding_windows(epoch: EegRecording, spec: WindowSpec) -> list[tuple[int, int]]:
    """[k*step, k*step + window) sample ranges fully inside the epoch."""
    w = spec.window_samples(epoch.fs)
    step = spec.step_samples(epoch.fs)
    return [(s, s + w) for s in range(0, epoch.n_samples - w + 1, step)]


def band_power(window: EegRecording, band: BandDefinition, log: bool = True) -> np.ndarray:
    """Per-channel band power of one window, in uV^2 (log10 by default).

    Hann-windowed rfft periodogram normalized by the window's power gain so
    that a unit-amplitude in-band sinusoid integrates to A^2/2; bins counted
    by center frequency in [low_hz, high_hz).
    """
    band.validate(window.fs)
    n = window.n_samples
    hann = np.hanning(n)
    spec = np.fft.rfft(window.data * hann, axis=1)
    freqs = np.fft.rfftfreq(n, d=1.0 / window.fs)
    in_band = (freqs >= band.low_hz) & (freqs < band.high_hz)
    # Parseval-consistent one-sided power sum, corrected for Hann window power
    scale = 2.0 / (n * np.sum(hann**2))
    power = scale * np.sum(np.abs(spec[:, in_band]) ** 2, axis=1)
    if log:
        return np.log10(power + LOG_FLOOR)
    return power


def build_feature_matrix(
    epochs: list[tuple[int, EegRecording]],
    spec: WindowSpec = WindowSpec(),
    bands: tuple[BandDefinition, ...] = DEFAULT_BANDS,
    amplitude_guard_uv: float | None = AMPLITUDE_GUARD_UV,
) -> FeatureMatrix:
    """Windowed band-power features over labeled epochs.

    Windows never cross trial boundaries. Windows containing any sample above
    amplitude_guard_uv (residual motion artifacts) are dropped; pass None to
    keep everything.
    """
    n_bands = len(bands)
    if not epochs:
        return FeatureMatrix(
            values=np.zeros((0, 0)), labels=np.zeros(0, int), columns=[], trial_ids=np.zeros(0, int),
            band_names=[b.name for b in bands],
        )
    n_channels = epochs[0][1].n_channels
    columns = [(ch, b) for ch in range(n_channels) for b in range(n_bands)]
    rows, labels, trial_ids = [], [], []
    for trial_id, (class_id, epoch) in enumerate(epochs):
        if epoch.n_channels != n_channels:
            raise InvalidArgument(
                f"epoch {trial_id} has {epoch.n_channels} channels, expected {n_channels}"
            )
        for start, stop in sliding_windows(epoch, spec):
            seg = epoch.slice_samples(start, stop)
            if amplitude_guard_uv is not None and np.max(np.abs(seg.data)) > amplitude_guard_uv:
                continue
            rows.append(feature_row(seg, bands))
            labels.append(class_id)
            trial_ids.append(trial_id)
    values = np.stack(rows) if rows else np.zeros((0, n_channels * n_bands))
    return FeatureMatrix(
        values=values,
        labels=np.asarray(labels, int),
        columns=columns,
        trial_ids=np.asarray(trial_ids, int),
        band_names=[b.name for b in bands],
    )


def feature_row(window: EegRecording, bands: tuple[BandDefinition, ...] = DEFAULT_BANDS) -> np.ndarray:
    """One flat feature vector for a single window, in FeatureMatrix column order."""
    per_band = np.stack([band_power(window, b) for b in bands], axis=1)  # ch x band
    return per_band.reshape(-1)
