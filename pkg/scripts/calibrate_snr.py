"""Bring-up calibration for the synthetic subjects' signature strength.

Scans a multiplier over the default gain scales and reports mean 2-class
LOTO accuracy (3 seeds x 3 pairs) plus the accuracy-vs-k curve at the
chosen point. The shipped ALPHA_GAIN_*/THETA_GAIN_* constants in synth.py
were picked from this scan so that snr=1.0 lands near 0.78.

Usage: python scripts/calibrate_snr.py [multiplier ...]
"""

import sys
import time

import numpy as np

from neurovoxel import synth
from neurovoxel.synth import SessionProtocol, SubjectProfile, generate_session
from neurovoxel.workflow import preprocess_session, sweep_feature_count, validate_session

SEEDS = (1, 2, 3)
BASE = {
    "ALPHA_GAIN_STRONG": synth.ALPHA_GAIN_STRONG,
    "ALPHA_GAIN_WEAK": synth.ALPHA_GAIN_WEAK,
    "THETA_GAIN_STRONG": synth.THETA_GAIN_STRONG,
    "THETA_GAIN_WEAK": synth.THETA_GAIN_WEAK,
}


def evaluate(multiplier: float, with_sweep: bool = False):
    for name, base in BASE.items():
        setattr(synth, name, base * multiplier)
    pair_accs = []
    sweeps = []
    for seed in SEEDS:
        profile = SubjectProfile(seed=seed, snr=1.0)
        rec, markers = generate_session(SessionProtocol(), profile)
        fm = preprocess_session(rec, markers)
        report = validate_session(fm, include_four_class=False)
        pair_accs.extend(r.mean_accuracy for r in report.pair_reports.values())
        if with_sweep:
            for pair in report.pair_reports:
                sweeps.append(sweep_feature_count(fm, list(pair), list(range(4, 61))).accuracy)
    mean_acc = float(np.mean(pair_accs))
    print(f"multiplier {multiplier:5.2f}: mean 2-class LOTO accuracy {mean_acc:.3f} "
          f"(per pair/seed: {' '.join(f'{a:.2f}' for a in pair_accs)})")
    if with_sweep:
        curve = np.mean(sweeps, axis=0)
        ks = np.arange(4, 61)
        best = curve.max()
        print(f"  sweep: best {best:.3f} at k={ks[curve.argmax()]}, "
              f"k=16 {curve[16 - 4]:.3f}, k=23 {curve[23 - 4]:.3f}")
        print("  curve:", " ".join(f"{k}:{a:.2f}" for k, a in zip(ks, curve) if k % 4 == 0))
    return mean_acc


def main():
    multipliers = [float(m) for m in sys.argv[1:]] or [0.5, 0.75, 1.0, 1.5, 2.0]
    for m in multipliers:
        t0 = time.time()
        evaluate(m, with_sweep=len(multipliers) == 1)
        print(f"  ({time.time() - t0:.0f} s)")


if __name__ == "__main__":
    main()
