"""Run the two-town fixture scenario and print a per-archetype outcome table.

    python3 scripts/run_castlemaine_analogue.py [--seed N] [--out DIR]

With --out the usual simulate outputs are written there as well.
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from evacsim.engine.run import Simulation
from evacsim.engine.scenario import load_scenario
from evacsim.engine.summary import OUTCOMES, summarize_result, write_summary
from evacsim.fixtures import DATA_DIR


def fmt_clock(seconds, start_clock: str | None) -> str:
    if seconds is None:
        return "-"
    if start_clock is None:
        return f"{seconds:.0f} s"
    hh, mm = (int(x) for x in start_clock.split(":")[:2])
    total = int(round(hh * 60 + mm + seconds / 60))
    return f"{total // 60 % 24:02d}:{total % 60:02d}"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    scen = load_scenario(DATA_DIR / "castlemaine" / "scenario.json", args.seed)
    res = Simulation(scen).run()
    s = summarize_result(res)
    elapsed = time.perf_counter() - t0

    cols = OUTCOMES
    print(f"{'arch':<5}{'n':>6}" + "".join(f"{c:>19}" for c in cols) + f"{'median leave':>14}")
    for arch, row in s["by_archetype"].items():
        n = sum(row["terminal"].values())
        med = s["median_departure_s"].get(arch)
        print(f"{arch:<5}{n:>6}" + "".join(f"{row[c]:>19}" for c in cols) + f"{fmt_clock(med, scen.start_clock):>14}")
    print()
    print("terminal:", ", ".join(f"{k} {v}" for k, v in s["totals"]["terminal"].items()))
    print("message response:", ", ".join(f"{m} {r['rate']:.1%} of {r['received']}"
                                         for m, r in s["message_response"].items()))
    print(f"{s['population']} agents, simulated to {s['end_time_s']:.0f} s in {elapsed:.1f} s wall clock")

    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        res.log.write_csv(args.out / "events.csv")
        write_summary(args.out / "summary.json", s)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
