"""Print the calibrated message attitudes next to the shipped ones.

    python3 scripts/calibration_table.py [--agents path/to/agents.csv]

The archetype shares come from the agents file (the Castlemaine fixture by
default); thresholds are the ThresholdInitial means of the shipped attitudes.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from evacsim.archetype.attitudes import MESSAGES, read_attitudes_csv, read_message_rows_csv
from evacsim.archetype.calibration import archetype_distribution, calibrate, read_targets_json
from evacsim.archetype.matrix import BEHAVIOUR_ARCHETYPES
from evacsim.engine.scenario import read_agents_csv
from evacsim.fixtures import DATA_DIR


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--agents", type=Path, default=DATA_DIR / "castlemaine" / "agents.csv")
    ap.add_argument("--tolerance", type=float, default=0.05)
    args = ap.parse_args(argv)

    b = read_attitudes_csv(DATA_DIR / "attitudes.csv")
    v = read_message_rows_csv(DATA_DIR / "uncalibrated.csv")
    targets = read_targets_json(DATA_DIR / "calibration-targets.json")
    d = archetype_distribution(a.archetype for a in read_agents_csv(args.agents))
    u = calibrate(v, d, np.array([targets[m] for m in MESSAGES]), b.threshold_means("ThresholdInitial"))
    published = b.message_rows()

    print("shares  " + " ".join(f"{a:>6}" for a in BEHAVIOUR_ARCHETYPES))
    print("        " + " ".join(f"{x:6.3f}" for x in d))
    print()
    print(f"{'message':<17}{'arch':>5}{'calibrated':>12}{'shipped':>9}{'diff':>8}")
    misses = 0
    for i, m in enumerate(MESSAGES):
        for j, a in enumerate(BEHAVIOUR_ARCHETYPES):
            if u[i, j] == 0 and published[i, j] == 0:
                continue
            diff = u[i, j] - published[i, j]
            flag = "" if abs(diff) <= args.tolerance else "  *"
            misses += bool(flag)
            print(f"{m:<17}{a:>5}{u[i, j]:12.3f}{published[i, j]:9.3f}{diff:+8.3f}{flag}")
    zeros = bool(((u == 0) == (published == 0)).all())
    print(f"\nzero pattern identical: {zeros}; cells outside +-{args.tolerance}: {misses}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
