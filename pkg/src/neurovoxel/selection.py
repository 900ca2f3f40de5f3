"""Greedy mRMR feature ranking with discretized mutual information.

Relevance and redundancy are plug-in MI estimates over 5 equal-frequency
bins; selection uses the MID (difference) criterion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .features import FeatureMatrix

N_BINS = 5
DEFAULT_K = 23
MIN_K = 16


@dataclass
class MrmrResult:
    ranked_indices: list[int]
    relevance: np.ndarray  # I(f; y) per feature, full width
    score_trace: np.ndarray  # greedy objective at each selection step


def discretize(column: np.ndarray, n_bins: int = N_BINS) -> np.ndarray:
    """Equal-frequency bins from the column's own quantiles; ties go low."""
    column = np.asarray(column, dtype=np.float64)
    if not np.all(np.isfinite(column)):
        raise InvalidArgument("cannot discretize non-finite values")
    edges = np.quantile(column, np.arange(1, n_bins) / n_bins)
    return np.searchsorted(edges, column, side="left").astype(np.int64)


def mutual_information(a: np.ndarray, b: np.ndarray) -> float:
    """Plug-in MI of two integer-coded vectors, in nats, clamped at 0."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape or a.size < 1:
        raise InvalidArgument("vectors must be equal-length and non-empty")
    na, nb = int(a.max()) + 1, int(b.max()) + 1
    joint = np.bincount(a * nb + b, minlength=na * nb).reshape(na, nb) / a.size
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)
    nz = joint > 0
    mi = np.sum(joint[nz] * np.log(joint[nz] / np.outer(pa, pb)[nz]))
    return max(0.0, float(mi))


def _mi_against(binned: np.ndarray, target: np.ndarray, n_target: int) -> np.ndarray:
    """MI of every column of `binned` (n x F, values in [0, N_BINS)) vs `target`."""
    n, f = binned.shape
    flat = (np.arange(f) * (N_BINS * n_target))[None, :] + binned * n_target + target[:, None]
    counts = np.bincount(flat.ravel(), minlength=f * N_BINS * n_target)
    joint = counts.reshape(f, N_BINS, n_target) / n
    pa = joint.sum(axis=2)  # f x N_BINS
    pb = joint.sum(axis=1)  # f x n_target
    indep = pa[:, :, None] * pb[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = joint * np.log(joint / indep)
    mi = np.nansum(terms, axis=(1, 2))
    return np.maximum(mi, 0.0)


def mrmr_select(fm: FeatureMatrix, k: int = DEFAULT_K) -> MrmrResult:
    """Greedy MID ranking: argmax [ I(f;y) - mean_{s in S} I(f;s) ].

    First pick maximizes relevance alone; ties always break toward the lower
    column index, making the ranking deterministic.
    """
    if fm.n_windows < 1 or np.any(fm.labels < 0):
        raise InvalidArgument("mRMR needs a fully labeled feature matrix")
    if not 1 <= k <= fm.n_features:
        raise InvalidArgument(f"k={k} out of range for {fm.n_features} features")
    binned = np.column_stack([discretize(fm.values[:, j]) for j in range(fm.n_features)])
    classes, y = np.unique(fm.labels, return_inverse=True)
    relevance = _mi_against(binned, y, len(classes))

    selected: list[int] = []
    trace: list[float] = []
    red_sum = np.zeros(fm.n_features)
    available = np.ones(fm.n_features, dtype=bool)
    for step in range(k):
        if step == 0:
            score = relevance.copy()
        else:
            score = relevance - red_sum / len(selected)
        score[~available] = -np.inf
        # lowest index within fp noise of the max, so ties always go low
        pick = int(np.flatnonzero(score >= score.max() - 1e-12)[0])
        selected.append(pick)
        trace.append(float(score[pick]))
        available[pick] = False
        if step + 1 < k:
            red_sum += _mi_against(binned, binned[:, pick], N_BINS)
    return MrmrResult(ranked_indices=selected, relevance=relevance, score_trace=np.asarray(trace))
