"""Regenerate the fixed synthetic 128-channel layout data file.

Electrodes are placed on the upper unit hemisphere along a golden-angle
spiral and bucketed into scalp regions by position (nose along +y). The
output is committed at src/neurovoxel/data/layout128.json.
"""

import json
import math
from pathlib import Path

N = 128
OUT = Path(__file__).resolve().parent.parent / "src" / "neurovoxel" / "data" / "layout128.json"


def main():
    golden = math.pi * (3.0 - math.sqrt(5.0))
    positions = []
    for i in range(N):
        z = (i + 0.5) / N  # upper hemisphere only
        r = math.sqrt(1.0 - z * z)
        theta = golden * i
        positions.append([r * math.cos(theta), r * math.sin(theta), z])

    regions = {"frontal": [], "posterior": [], "central": [], "parietal": []}
    for i, (x, y, z) in enumerate(positions):
        if y > 0.35:
            regions["frontal"].append(i)
        elif y < -0.55:
            regions["posterior"].append(i)
        elif z > 0.75:
            regions["central"].append(i)
        elif y < -0.1:
            regions["parietal"].append(i)

    doc = {
        "n_channels": N,
        "labels": [f"E{i + 1:03d}" for i in range(N)],
        "positions": [[round(c, 6) for c in p] for p in positions],
        "regions": regions,
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {OUT}: " + ", ".join(f"{k}={len(v)}" for k, v in regions.items()))


if __name__ == "__main__":
    main()
