"""Offline workflow glue: session preprocessing, training and validation
reports, and the accuracy-vs-feature-count sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classifier import CvReport, TrainedModel, cross_validate, predict_classes, train_model
from .errors import InvalidData
from .features import FeatureMatrix, WindowSpec, build_feature_matrix
from .formats import Config
from .selection import mrmr_select
from .signal_core import (
    BandDefinition,
    EegRecording,
    TrialMarker,
    asr_calibrate,
    asr_clean,
    bandpass_filter,
    detect_bad_channels,
    extract_epochs,
)

# the 2-class pairs exercised in validation: cube/pyramid, union/torus, pyramid/union
VALIDATION_PAIRS = ((0, 1), (2, 3), (1, 3))


def config_bands(config: Config) -> tuple[BandDefinition, ...]:
    names = ("theta", "alpha", "beta")
    return tuple(BandDefinition(n, lo, hi) for n, (lo, hi) in zip(names, config.band_edges))


def preprocess_session(
    rec: EegRecording, markers: list[TrialMarker], config: Config | None = None
) -> FeatureMatrix:
    """Bandpass, zero bad channels, ASR-clean, epoch, and extract features.

    Bad channels are zeroed rather than dropped so the feature space keeps
    its fixed channel-major layout; their constant features carry no mutual
    information and are never selected.
    """
    config = config or Config()
    cleaned = bandpass_filter(rec, config.bandpass_low_hz, config.bandpass_high_hz)
    bad = detect_bad_channels(cleaned)
    if bad.any():
        data = cleaned.data.copy()
        data[bad] = 0.0
        cleaned = cleaned.with_data(data)
    cal_samples = min(cleaned.n_samples, int(round(config.asr_calibration_s * cleaned.fs)))
    calibration = asr_calibrate(
        cleaned.slice_samples(0, cal_samples),
        sd_threshold=config.asr_sd_threshold,
        window_s=config.asr_window_s,
    )
    cleaned = asr_clean(cleaned, calibration)
    epochs = extract_epochs(cleaned, markers)
    spec = WindowSpec(window_s=config.window_s, step_s=config.step_s)
    return build_feature_matrix(epochs, spec, config_bands(config))


@dataclass
class TrainingReport:
    classes: list[int]
    resubstitution_accuracy: float
    selected: list[int]
    feature_table: list[dict]

    def to_dict(self) -> dict:
        return {
            "classes": self.classes,
            # resubstitution = accuracy on the very data the model was fit on
            "resubstitution_accuracy": self.resubstitution_accuracy,
            "selected": self.selected,
            "feature_table": self.feature_table,
        }


def train_with_report(
    fm: FeatureMatrix, classes: list[int] | None = None, config: Config | None = None, seed: int = 0
) -> tuple[TrainedModel, TrainingReport]:
    config = config or Config()
    model = train_model(fm, classes=classes, k=config.mrmr_k, c=config.svm_c, seed=seed)
    sub = fm.subset_classes(model.classes)
    pred = predict_classes(model, sub.values)
    acc = float(np.mean(pred == sub.labels))
    band_names = fm.band_names
    table = []
    std_fm = FeatureMatrix(
        values=model.standardizer.transform(sub.values),
        labels=sub.labels,
        columns=sub.columns,
        trial_ids=sub.trial_ids,
        band_names=band_names,
    )
    relevance = mrmr_select(std_fm, k=1).relevance
    for rank, col in enumerate(model.selected):
        ch, band = fm.columns[col]
        table.append(
            {
                "rank": rank,
                "column": int(col),
                "channel": int(ch),
                "band": band_names[band],
                "relevance_nats": float(relevance[col]),
            }
        )
    return model, TrainingReport(
        classes=list(model.classes),
        resubstitution_accuracy=acc,
        selected=list(model.selected),
        feature_table=table,
    )


@dataclass
class SweepResult:
    ks: list[int]
    accuracy: list[float]  # mean LOTO accuracy at each k


def sweep_feature_count(
    fm: FeatureMatrix,
    classes: list[int],
    ks: list[int],
    c: float = 1.0,
    seed: int = 0,
) -> SweepResult:
    """LOTO accuracy as a function of selected-feature count.

    The mRMR prefix property lets each fold rank once at max(ks) and reuse
    prefixes, so the sweep trains one SVM set per (fold, k).
    """
    sub = fm.subset_classes(classes)
    trials_by_class = {
        cl: sorted(np.unique(sub.trial_ids[sub.labels == cl]).tolist()) for cl in classes
    }
    n_folds = min(len(t) for t in trials_by_class.values())
    if n_folds < 2:
        raise InvalidData("need at least 2 trials per class for the sweep")
    k_max = max(ks)
    correct = np.zeros(len(ks))
    total = np.zeros(len(ks))
    for f in range(n_folds):
        held = [trials_by_class[cl][f] for cl in classes]
        val_mask = np.isin(sub.trial_ids, held)
        train_fm = FeatureMatrix(
            values=sub.values[~val_mask],
            labels=sub.labels[~val_mask],
            columns=sub.columns,
            trial_ids=sub.trial_ids[~val_mask],
            band_names=sub.band_names,
        )
        standardizer_fm = FeatureMatrix(
            values=(train_fm.values - train_fm.values.mean(0)) / np.maximum(train_fm.values.std(0), 1e-9),
            labels=train_fm.labels,
            columns=train_fm.columns,
            trial_ids=train_fm.trial_ids,
            band_names=train_fm.band_names,
        )
        ranking = mrmr_select(standardizer_fm, k=min(k_max, train_fm.n_features)).ranked_indices
        for ki, k in enumerate(ks):
            model = train_model(train_fm, classes=classes, c=c, seed=seed, selected=ranking[:k])
            pred = predict_classes(model, sub.values[val_mask])
            correct[ki] += np.sum(pred == sub.labels[val_mask])
            total[ki] += val_mask.sum()
    return SweepResult(ks=list(ks), accuracy=(correct / total).tolist())


@dataclass
class ValidationReport:
    pair_reports: dict[tuple[int, int], CvReport] = field(default_factory=dict)
    four_class: CvReport | None = None
    sweep: dict[tuple[int, int], SweepResult] = field(default_factory=dict)

    @property
    def mean_pair_accuracy(self) -> float:
        return float(np.mean([r.mean_accuracy for r in self.pair_reports.values()]))

    def to_dict(self) -> dict:
        return {
            "pairs": {
                f"{a}v{b}": {
                    "mean_accuracy": r.mean_accuracy,
                    "fold_accuracies": [f.accuracy for f in r.folds],
                    "confusion": r.confusion.tolist(),
                    "feature_overlap": r.feature_overlap,
                }
                for (a, b), r in self.pair_reports.items()
            },
            "mean_pair_accuracy": self.mean_pair_accuracy,
            "four_class": None
            if self.four_class is None
            else {
                "mean_accuracy": self.four_class.mean_accuracy,
                "confusion": self.four_class.confusion.tolist(),
            },
            "sweep": {
                f"{a}v{b}": {"k": s.ks, "accuracy": s.accuracy} for (a, b), s in self.sweep.items()
            },
        }


def validate_session(
    fm: FeatureMatrix,
    config: Config | None = None,
    seed: int = 0,
    sweep_ks: list[int] | None = None,
    include_four_class: bool = True,
) -> ValidationReport:
    """LOTO reports for the three tested 2-class pairs plus the 4-class model."""
    config = config or Config()
    report = ValidationReport()
    for pair in VALIDATION_PAIRS:
        report.pair_reports[pair] = cross_validate(
            fm, classes=list(pair), k=config.mrmr_k, c=config.svm_c, seed=seed
        )
        if sweep_ks:
            report.sweep[pair] = sweep_feature_count(
                fm, classes=list(pair), ks=sweep_ks, c=config.svm_c, seed=seed
            )
    if include_four_class:
        report.four_class = cross_validate(
            fm, classes=[0, 1, 2, 3], k=config.mrmr_k, c=config.svm_c, seed=seed
        )
    return report
