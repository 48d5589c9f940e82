"""Command-line pipeline: synthpop -> assign -> calibrate / verify-rates -> simulate.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .archetype.attitudes import (
    ATTITUDES, MESSAGES, read_attitudes_csv, read_message_rows_csv, write_attitudes_csv,
)
from .archetype.calibration import (
    CalibrationError, CalibrationTargets, archetype_distribution, calibrate, read_targets_json,
    verify_response_rates,
)
from .archetype.matrix import BEHAVIOUR_ARCHETYPES, load_probability_matrix
from .engine.run import Simulation
from .engine.scenario import ConfigError, load_scenario, profile_for, read_agents_csv
from .engine.summary import summarize_result, write_summary
from .popsynth.categories import read_age_distribution_csv, read_households_csv, read_persons_csv
from .popsynth.cleaning import InconsistentMarginalsError
from .popsynth.locations import read_dwellings_csv
from .popsynth.synthesis import SynthesisError
from . import pipeline

log = logging.getLogger("evacsim")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
DEFAULT_ATTITUDES = Path(__file__).parent / "data" / "attitudes.csv"


class UsageError(Exception):
    pass


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, seed, inputs: dict[str, str], config: dict, started: float) -> None:
    """Record what produced the outputs in ``out``; the config hash covers every input that shapes them."""
    digests = {k: file_digest(v) for k, v in sorted(inputs.items()) if v and Path(v).is_file()}
    cfg = {"command": command, "seed": seed, "config": config, "inputs": digests}
    manifest = {
        "command": command,
        "seed": seed,
        "tool_version": __version__,
        "config_hash": hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest(),
        "input_digests": digests,
        "wall_clock_s": round(time.perf_counter() - started, 3),
    }
    (out / "run-manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _existing(path: str | None, flag: str) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{flag}: file not found: {p}")
    return p


def _outdir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# -- synthpop ----------------------------------------------------------------
def cmd_synthpop(args) -> int:
    started = time.perf_counter()
    persons_p = _existing(args.persons, "--persons")
    households_p = _existing(args.households, "--households")
    dwellings_p = _existing(args.dwellings, "--dwellings")
    ages_p = _existing(args.ages, "--ages")
    try:
        persons = read_persons_csv(persons_p)
        households = read_households_csv(households_p)
        ages = read_age_distribution_csv(ages_p) if ages_p else None
        dwellings = read_dwellings_csv(dwellings_p) if dwellings_p else None
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    out = _outdir(args.out)
    regions = pipeline.synthesize_regions(persons, households, ages, args.seed, args.creation_budget)
    if dwellings is not None:
        pipeline.assign_dwelling_coordinates(regions, dwellings, args.seed)
    pipeline.write_population_csv(out / "population.csv", regions)
    report = {"regions": {}, "max_sae": args.max_sae}
    worst = 0.0
    for reg in regions:
        d = reg.fit.to_dict()
        d.update(persons=len(reg.population.persons), households=len(reg.population.households),
                 created=reg.population.created, dropped=dict(reg.population.dropped),
                 cleaning_adjustments=len(reg.adjustments))
        report["regions"][reg.name] = d
        worst = max(worst, reg.fit.sae)
        log.info("region %s: %d persons, SAE %.4f, FT p %.3f", reg.name, d["persons"], reg.fit.sae, reg.fit.p_value)
    (out / "fit-report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "synthpop", args.seed,
                   {"persons": persons_p, "households": households_p, "dwellings": dwellings_p, "ages": ages_p},
                   {"creation_budget": args.creation_budget, "max_sae": args.max_sae}, started)
    if worst >= args.max_sae:
        print(f"fit check failed: SAE {worst:.4f} >= {args.max_sae}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


# -- assign ------------------------------------------------------------------
def cmd_assign(args) -> int:
    started = time.perf_counter()
    pop_p = _existing(args.population, "--population")
    m_p = _existing(args.matrix, "--matrix")
    b_p = _existing(args.attitudes, "--attitudes")
    evac_p = _existing(args.evac_points, "--evac-points")
    invac_p = _existing(args.invac_points, "--invac-points")
    try:
        pop = pipeline.read_population_csv(pop_p)
        m = load_probability_matrix(m_p)
        b = read_attitudes_csv(b_p)
        evac = pipeline.read_points_csv(evac_p)
        invac = pipeline.read_points_csv(invac_p)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    missing = sorted({h.id for h in pop.households.values() if h.coordinate is None})
    if missing:
        raise UsageError(f"--population: {len(missing)} households have no coordinates (run synthpop with --dwellings)")
    out = _outdir(args.out)
    agents, dependants, rep = pipeline.assign_population(pop, m, b, args.seed, evac, invac)
    pipeline.write_agents_csv(out / "agents.csv", agents, pop)
    with open(out / "dependants.csv", "w") as fh:
        fh.write("person_id,household_id,x,y\n")
        for p in dependants:
            x, y = pop.households[p.household_id].coordinate
            fh.write(f"{p.id},{p.household_id},{x:.1f},{y:.1f}\n")
    report = dict(vars(rep))
    (out / "assignment-report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if rep.drivers == 0:
        print("warning: no drivers assigned", file=sys.stderr)
    print(f"persons {rep.persons}  under-18 {rep.under_18}  drivers {rep.drivers}  "
          f"dependants {rep.dependants_pool}  by archetype {rep.by_archetype}")
    for key, n in sorted(rep.zero_mass_signatures.items()):
        print(f"signature without probability mass: {key} ({n} persons)", file=sys.stderr)
    write_manifest(out, "assign", args.seed,
                   {"population": pop_p, "matrix": m_p, "attitudes": b_p, "evac_points": evac_p,
                    "invac_points": invac_p}, {}, started)
    return EXIT_OK


# -- calibrate ---------------------------------------------------------------
def read_distribution(path: Path) -> np.ndarray:
    """Archetype shares from a JSON mapping or from the archetype column of an agents CSV."""
    if path.suffix.lower() == ".json":
        raw = json.loads(path.read_text())
        d = np.array([float(raw.get(a, 0.0)) for a in BEHAVIOUR_ARCHETYPES])
        if d.sum() <= 0:
            raise CalibrationError(f"{path}: distribution has no mass")
        return d / d.sum()
    return archetype_distribution(a.archetype for a in read_agents_csv(path))


def cmd_calibrate(args) -> int:
    v_p = _existing(args.uncalibrated, "--uncalibrated")
    d_p = _existing(args.distribution, "--distribution")
    t_p = _existing(args.targets, "--targets")
    base_p = _existing(args.base_attitudes, "--base-attitudes")
    try:
        v = read_message_rows_csv(v_p)
        d = read_distribution(d_p)
        rates = read_targets_json(t_p) if t_p else {}
        targets = CalibrationTargets(rates=rates or CalibrationTargets().rates, distribution=d)
        base = read_attitudes_csv(base_p)
    except (ValueError, KeyError, CalibrationError) as exc:
        raise UsageError(str(exc)) from None
    missing = [msg for msg in MESSAGES if msg not in targets.rates]
    if missing:
        raise UsageError(f"--targets: missing rates for {missing}")
    r = np.array([targets.rates[msg] for msg in MESSAGES])
    rows = calibrate(v, d, r, base.threshold_means("ThresholdInitial"), args.sd)
    out_b = base.with_message_rows(rows)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_attitudes_csv(out, {name: out_b.values[i] for i, name in enumerate(ATTITUDES)})
    for msg, row in zip(MESSAGES, rows):
        print(f"{msg:17s} " + " ".join(f"{a}={x:.3f}" for a, x in zip(BEHAVIOUR_ARCHETYPES, row)))
    return EXIT_OK


def cmd_verify_rates(args) -> int:
    if args.scenario:
        try:
            sc = load_scenario(_existing(args.scenario, "--scenario"))
        except ConfigError as exc:
            raise UsageError("\n".join(exc.problems)) from None
        agents, b = sc.agents, sc.attitudes
    else:
        if not (args.population and args.attitudes):
            raise UsageError("give --scenario, or both --population and --attitudes")
        try:
            agents = read_agents_csv(_existing(args.population, "--population"))
            b = read_attitudes_csv(_existing(args.attitudes, "--attitudes"))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    messages = MESSAGES if args.message == "all" else [args.message]
    profiles = [profile_for(a, b) for a in agents]
    if not profiles:
        raise UsageError("population is empty")
    for msg in messages:
        rate = verify_response_rates(profiles, msg)
        print(f"{msg} {100 * rate:.1f}%")
    return EXIT_OK


# -- simulate ----------------------------------------------------------------
def cmd_simulate(args) -> int:
    started = time.perf_counter()
    scen_p = _existing(args.scenario, "--scenario")
    try:
        sc = load_scenario(scen_p, seed=args.seed)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_USAGE
    if args.horizon is not None:
        sc.horizon_s = float(args.horizon)
    if args.no_trajectories:
        sc.record_trajectories = False
    out = _outdir(args.out)
    result = Simulation(sc, args.seed).run()
    result.log.write_csv(out / "events.csv")
    result.write_trajectories(out / "trajectories.csv")
    write_summary(out / "summary.json", summarize_result(result))
    inputs = {"scenario": scen_p, **sc.source_files}
    write_manifest(out, "simulate", sc.seed, inputs,
                   {"horizon_s": sc.horizon_s, "record_trajectories": sc.record_trajectories}, started)
    log.info("simulated %d agents to t=%.0f s, %d events", len(sc.agents), result.end_time, len(result.log))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evacsim", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthpop", help="synthesise households and persons from marginal tables")
    p.add_argument("--persons", required=True, help="persons marginal CSV (age_category,gender,relationship,count[,region])")
    p.add_argument("--households", required=True, help="households marginal CSV (size,composition,count[,region])")
    p.add_argument("--dwellings", help="dwelling coordinates CSV (id,x,y,zone); zone matches region")
    p.add_argument("--ages", help="per-year age counts CSV (age,count[,region])")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--creation-budget", type=float, default=0.05,
                   help="largest share of persons that may be created to complete families")
    p.add_argument("--max-sae", type=float, default=0.1, help="exit 1 if any region's SAE reaches this")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synthpop)

    for name in ("assign", "assign-archetypes"):
        p = sub.add_parser(name, help="assign archetypes, attitudes, and evacuation coordinates")
        p.add_argument("--population", required=True, help="population.csv from synthpop")
        p.add_argument("--matrix", required=True, help="archetype probability matrix CSV")
        p.add_argument("--attitudes", required=True, help="attitudes CSV (9 rows)")
        p.add_argument("--evac-points", required=True, help="evacuation destinations CSV (x,y)")
        p.add_argument("--invac-points", required=True, help="in-vac locations CSV (x,y)")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--out", required=True, help="output directory")
        p.set_defaults(func=cmd_assign)

    p = sub.add_parser("calibrate", help="calibrate message rows to target response rates")
    p.add_argument("--uncalibrated", required=True, help="CSV with the four message rows")
    p.add_argument("--distribution", required=True,
                   help="archetype shares: JSON {CE: ..} or an agents CSV with an archetype column")
    p.add_argument("--targets", help="JSON target rates per message (default 1/5/30/40 percent)")
    p.add_argument("--base-attitudes", default=str(DEFAULT_ATTITUDES),
                   help="attitudes CSV supplying cue rows and threshold means")
    p.add_argument("--sd", type=float, default=0.1, help="threshold standard deviation")
    p.add_argument("--out", required=True, help="output attitudes CSV")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("verify-rates", help="print the share of agents a single message triggers")
    p.add_argument("--scenario", help="scenario.json (population and attitudes are taken from it)")
    p.add_argument("--population", help="agents CSV, instead of --scenario")
    p.add_argument("--attitudes", help="attitudes CSV, instead of --scenario")
    p.add_argument("--message", default="all", choices=[*MESSAGES, "all"], help="message type")
    p.set_defaults(func=cmd_verify_rates)

    p = sub.add_parser("simulate", help="run a scenario")
    p.add_argument("--scenario", required=True, help="scenario.json")
    p.add_argument("--seed", type=int, default=None, help="master seed (default: the scenario's)")
    p.add_argument("--horizon", type=float, default=None, help="override the horizon in seconds")
    p.add_argument("--no-trajectories", action="store_true", help="skip per-link trajectory records")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InconsistentMarginalsError, SynthesisError, CalibrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
