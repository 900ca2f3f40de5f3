"""Linear SVM with calibrated posteriors.

Binary models are trained by dual coordinate descent on the L2-regularized
hinge loss; decision values are mapped to probabilities by Platt scaling,
and one-vs-one pairs are combined into a multiclass posterior by iterative
pairwise coupling. Cross-validation is leave-one-trial-out with all fitting
(standardization, mRMR, SVM) redone inside each fold.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from numba import njit
from scipy.special import expit

from .errors import InvalidArgument, InvalidData
from .features import FeatureMatrix
from .selection import DEFAULT_K, mrmr_select

STD_FLOOR = 1e-9
DEFAULT_C = 1.0
SVM_TOL = 1e-4
SVM_MAX_EPOCHS = 1000
COUPLING_TOL = 1e-8
COUPLING_MAX_ITERS = 100


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        return cls(mean=x.mean(axis=0), std=np.maximum(x.std(axis=0), STD_FLOOR))

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


@dataclass
class BinarySvm:
    weights: np.ndarray
    bias: float
    c_param: float
    class_pair: tuple[int, int]
    alpha: np.ndarray | None = None  # dual variables from training, kept for diagnostics

    def decision(self, x: np.ndarray) -> np.ndarray:
        """Signed distance-like score; positive favors the higher class id."""
        return x @ self.weights + self.bias


@dataclass
class PlattCalibration:
    a: float
    b: float

    def probability(self, score) -> np.ndarray:
        """p(higher class id | score) = 1 / (1 + exp(a*score + b))."""
        z = self.a * np.asarray(score, dtype=np.float64) + self.b
        return expit(-z)


@njit(cache=True)
def _dual_cd(xb, y, c, order, max_epochs, tol):
    """Dual coordinate descent for min 0.5||w||^2 + c*sum(hinge).

    xb carries an appended all-ones column so the (regularized) bias rides
    along in w. Returns (w, epochs_run, final_max_violation).
    """
    n, d = xb.shape
    alpha = np.zeros(n)
    w = np.zeros(d)
    qii = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += xb[i, j] * xb[i, j]
        qii[i] = s
    max_viol = np.inf
    for _ in range(max_epochs):
        max_viol = 0.0
        for k in range(n):
            i = order[k]
            g = y[i] * np.dot(w, xb[i]) - 1.0
            if alpha[i] <= 0.0:
                pg = min(g, 0.0)
            elif alpha[i] >= c:
                pg = max(g, 0.0)
            else:
                pg = g
            if abs(pg) > max_viol:
                max_viol = abs(pg)
            if pg != 0.0:
                old = alpha[i]
                new = min(max(old - g / qii[i], 0.0), c)
                if new != old:
                    alpha[i] = new
                    delta = (new - old) * y[i]
                    for j in range(d):
                        w[j] += delta * xb[i, j]
        if max_viol < tol:
            break
    return w, alpha, max_viol


def train_binary_svm(
    x: np.ndarray,
    y: np.ndarray,
    c: float = DEFAULT_C,
    class_pair: tuple[int, int] = (0, 1),
    seed: int = 0,
) -> BinarySvm:
    """Train a linear SVM on standardized features with +/-1 labels."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if set(np.unique(y)) != {-1.0, 1.0}:
        raise InvalidData("both classes must be present with labels in {-1, +1}")
    xb = np.hstack([x, np.ones((x.shape[0], 1))])
    order = np.random.default_rng(seed).permutation(x.shape[0])
    w, alpha, _ = _dual_cd(xb, y, float(c), order, SVM_MAX_EPOCHS, SVM_TOL)
    pair = tuple(sorted(class_pair))
    return BinarySvm(
        weights=w[:-1].copy(), bias=float(w[-1]), c_param=float(c), class_pair=pair, alpha=alpha
    )


def dual_objective(svm: BinarySvm) -> float:
    """Dual value sum(alpha) - 0.5*||w||^2 at the trained point (bias included in w)."""
    if svm.alpha is None:
        raise InvalidArgument("model was deserialized without dual variables")
    return float(np.sum(svm.alpha) - 0.5 * (np.dot(svm.weights, svm.weights) + svm.bias**2))


def fit_platt(scores: np.ndarray, y: np.ndarray, max_iters: int = 100, tol: float = 1e-8) -> PlattCalibration:
    """Platt sigmoid fit by Newton's method with target smoothing."""
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    pos = y > 0
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise InvalidData("Platt fit needs both classes present")
    if np.ptp(scores) < 1e-12:
        warnings.warn("degenerate scores in Platt fit; falling back to prior calibration")
        prior = n_pos / (n_pos + n_neg)
        b = np.log((1.0 - prior) / prior) + scores[0]
        return PlattCalibration(a=-1.0, b=float(b))
    t = np.where(pos, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    a, b = 0.0, np.log((n_neg + 1.0) / (n_pos + 1.0))
    sigma = 1e-12
    for _ in range(max_iters):
        z = a * scores + b
        p = expit(-z)
        d1 = t - p
        g_a = np.dot(d1, scores)
        g_b = np.sum(d1)
        if max(abs(g_a), abs(g_b)) < tol:
            break
        d2 = p * (1.0 - p)
        h11 = np.dot(d2, scores**2) + sigma
        h22 = np.sum(d2) + sigma
        h12 = np.dot(d2, scores)
        det = h11 * h22 - h12 * h12
        a -= (h22 * g_a - h12 * g_b) / det
        b -= (h11 * g_b - h12 * g_a) / det
    if a >= 0:
        warnings.warn("Platt slope came out non-negative; clamping orientation")
        a = -1e-12
    return PlattCalibration(a=float(a), b=float(b))


def couple_pairwise(pairwise: dict[tuple[int, int], float], classes: list[int]) -> np.ndarray:
    """Combine one-vs-one probabilities into one posterior vector.

    pairwise[(i, j)] with i < j holds p(class j | i or j). Iterates the
    Hastie-Tibshirani fixed point minimizing the KL mismatch between the
    implied and observed pairwise probabilities.
    """
    k = len(classes)
    if k == 2:
        p_hi = pairwise[(classes[0], classes[1])]
        return np.array([1.0 - p_hi, p_hi])
    idx = {c: i for i, c in enumerate(classes)}
    r = np.full((k, k), 0.5)
    for (ci, cj), p_j in pairwise.items():
        i, j = idx[ci], idx[cj]
        r[j, i] = p_j  # row wins against column
        r[i, j] = 1.0 - p_j
    p = np.full(k, 1.0 / k)
    for _ in range(COUPLING_MAX_ITERS):
        mu = p[:, None] / (p[:, None] + p[None, :] + 1e-300)
        num = np.sum(r, axis=1) - np.diag(r)
        den = np.sum(mu, axis=1) - np.diag(mu)
        p_new = p * num / np.maximum(den, 1e-300)
        p_new /= p_new.sum()
        delta = np.max(np.abs(p_new - p))
        p = p_new
        if delta < COUPLING_TOL:
            break
    return p


@dataclass
class TrainedModel:
    standardizer: Standardizer
    selected: list[int]
    pairs: list[tuple[BinarySvm, PlattCalibration]]
    classes: list[int]
    n_features: int

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def to_dict(self) -> dict:
        return {
            "format": "neurovoxel-model",
            "version": 1,
            "n_features": self.n_features,
            "classes": list(self.classes),
            "selected": list(self.selected),
            "standardizer": {"mean": self.standardizer.mean.tolist(), "std": self.standardizer.std.tolist()},
            "pairs": [
                {
                    "class_pair": list(svm.class_pair),
                    "weights": svm.weights.tolist(),
                    "bias": svm.bias,
                    "c_param": svm.c_param,
                    "platt_a": cal.a,
                    "platt_b": cal.b,
                }
                for svm, cal in self.pairs
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("format") != "neurovoxel-model" or d.get("version") != 1:
            raise InvalidData("not a version-1 model document")
        std = Standardizer(mean=np.asarray(d["standardizer"]["mean"]), std=np.asarray(d["standardizer"]["std"]))
        pairs = [
            (
                BinarySvm(
                    weights=np.asarray(p["weights"]),
                    bias=p["bias"],
                    c_param=p["c_param"],
                    class_pair=tuple(p["class_pair"]),
                ),
                PlattCalibration(a=p["platt_a"], b=p["platt_b"]),
            )
            for p in d["pairs"]
        ]
        return cls(
            standardizer=std,
            selected=list(d["selected"]),
            pairs=pairs,
            classes=list(d["classes"]),
            n_features=d["n_features"],
        )


def train_model(
    fm: FeatureMatrix,
    classes: list[int] | None = None,
    k: int = DEFAULT_K,
    c: float = DEFAULT_C,
    seed: int = 0,
    selected: list[int] | None = None,
) -> TrainedModel:
    """Full fit on a labeled feature matrix: standardize, select, train pairs.

    Pass `selected` to reuse a precomputed feature ranking (the accuracy-vs-k
    sweep trains many models over prefixes of one ranking).
    """
    if classes is None:
        classes = sorted(int(c_) for c_ in np.unique(fm.labels))
    if len(classes) < 2:
        raise InvalidData("need at least two classes to train")
    sub = fm.subset_classes(classes)
    if sub.n_windows == 0:
        raise InvalidData("no windows for the requested classes")
    standardizer = Standardizer.fit(sub.values)
    xs = standardizer.transform(sub.values)
    if selected is None:
        std_fm = FeatureMatrix(
            values=xs, labels=sub.labels, columns=sub.columns, trial_ids=sub.trial_ids,
            band_names=sub.band_names,
        )
        selected = mrmr_select(std_fm, k=k).ranked_indices
    xsel = xs[:, selected]
    pairs = []
    for lo, hi in combinations(classes, 2):
        mask = (sub.labels == lo) | (sub.labels == hi)
        y = np.where(sub.labels[mask] == hi, 1.0, -1.0)
        svm = train_binary_svm(xsel[mask], y, c=c, class_pair=(lo, hi), seed=seed)
        cal = fit_platt(svm.decision(xsel[mask]), y)
        pairs.append((svm, cal))
    return TrainedModel(
        standardizer=standardizer,
        selected=list(selected),
        pairs=pairs,
        classes=list(classes),
        n_features=fm.n_features,
    )


def predict_posterior(model: TrainedModel, feature_row: np.ndarray) -> np.ndarray:
    """Posterior over model.classes for one full-width feature row."""
    feature_row = np.asarray(feature_row, dtype=np.float64)
    if feature_row.shape != (model.n_features,):
        raise InvalidArgument(
            f"feature row has shape {feature_row.shape}, model expects ({model.n_features},)"
        )
    xs = model.standardizer.transform(feature_row[None, :])[0][model.selected]
    pairwise = {}
    for svm, cal in model.pairs:
        pairwise[svm.class_pair] = float(cal.probability(float(xs @ svm.weights + svm.bias)))
    return couple_pairwise(pairwise, model.classes)


def predict_classes(model: TrainedModel, rows: np.ndarray) -> np.ndarray:
    """Argmax class id per row (in original class-id space)."""
    out = np.empty(rows.shape[0], dtype=np.int64)
    cls = np.asarray(model.classes)
    for i in range(rows.shape[0]):
        out[i] = cls[int(np.argmax(predict_posterior(model, rows[i])))]
    return out


@dataclass
class FoldReport:
    held_out_trials: dict[int, int]
    accuracy: float
    confusion: np.ndarray
    selected: list[int]


@dataclass
class CvReport:
    classes: list[int]
    folds: list[FoldReport]
    mean_accuracy: float
    confusion: np.ndarray
    feature_overlap: float  # mean Jaccard similarity of selected sets across folds


def cross_validate(
    fm: FeatureMatrix,
    classes: list[int] | None = None,
    k: int = DEFAULT_K,
    c: float = DEFAULT_C,
    seed: int = 0,
) -> CvReport:
    """Leave-one-trial-out CV with per-fold refitting (no leakage)."""
    if classes is None:
        classes = sorted(int(c_) for c_ in np.unique(fm.labels))
    sub = fm.subset_classes(classes)
    trials_by_class = {
        cl: sorted(np.unique(sub.trial_ids[sub.labels == cl]).tolist()) for cl in classes
    }
    n_folds = min(len(t) for t in trials_by_class.values())
    if n_folds < 2:
        raise InvalidArgument("every class needs at least 2 trials for LOTO")
    n_cls = len(classes)
    cls_index = {cl: i for i, cl in enumerate(classes)}
    folds = []
    total_conf = np.zeros((n_cls, n_cls), dtype=np.int64)
    for f in range(n_folds):
        held = {cl: trials_by_class[cl][f] for cl in classes}
        val_mask = np.isin(sub.trial_ids, list(held.values()))
        train_fm = FeatureMatrix(
            values=sub.values[~val_mask],
            labels=sub.labels[~val_mask],
            columns=sub.columns,
            trial_ids=sub.trial_ids[~val_mask],
            band_names=sub.band_names,
        )
        model = train_model(train_fm, classes=classes, k=k, c=c, seed=seed)
        pred = predict_classes(model, sub.values[val_mask])
        truth = sub.labels[val_mask]
        conf = np.zeros((n_cls, n_cls), dtype=np.int64)
        for t, p in zip(truth, pred):
            conf[cls_index[int(t)], cls_index[int(p)]] += 1
        total_conf += conf
        folds.append(
            FoldReport(
                held_out_trials=held,
                accuracy=float(np.mean(pred == truth)),
                confusion=conf,
                selected=list(model.selected),
            )
        )
    sets = [set(f.selected) for f in folds]
    jac = [
        len(a & b) / len(a | b)
        for i, a in enumerate(sets)
        for b in sets[i + 1 :]
    ]
    return CvReport(
        classes=list(classes),
        folds=folds,
        mean_accuracy=float(np.mean([f.accuracy for f in folds])),
        confusion=total_conf,
        feature_overlap=float(np.mean(jac)) if jac else 1.0,
    )
