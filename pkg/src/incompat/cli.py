"""Command-line front end.

Reports go to stdout as JSON (CSV for ``surface``); logs go to stderr.
Exit codes: 0 success, 1 configuration error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .qsd import optimal_ensembles, witness_w2
from .quantum import Assembly, set_weights
from .scenario import SCENARIO_SCHEMA, ConfigError, Scenario, bundled_scenarios, load_scenario
from .simulation import NoiseModel, calibrate, estimate_hyperplane, fidelity_report, simulate_counts
from .structures import StructureError, full_pattern, pairwise_patterns, parse_structure, pin
from .witness import SolverFailure, VERDICT_TOL, genuine_robustness, mub_bound, structure_robustness

log = logging.getLogger("incompat")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


def _emit(doc) -> None:
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def _indices(values: Sequence[int], m: int, what: str) -> tuple[int, ...]:
    out = []
    for v in values:
        if not 1 <= v <= m:
            raise ConfigError(f"{what}: index {v} out of range 1..{m}")
        out.append(v - 1)
    if len(set(out)) != len(out):
        raise ConfigError(f"{what}: repeated index")
    return tuple(out)


def cmd_witness(args) -> int:
    sc = load_scenario(args.scenario)
    m = len(sc.assembly)
    if args.pair:
        spec = full_pattern(_indices(args.pair, m, "--pair"))
        if len(spec.group) != 2:
            raise ConfigError("--pair needs two distinct indices")
        mode = "pair"
    elif args.genuine is not None:
        group = _indices(args.genuine, m, "--genuine") if args.genuine else tuple(range(m))
        spec = pairwise_patterns(group)
        if sc.structure is not None and sc.structure.pins and set(sc.structure.group) == set(group):
            for p, v in sc.structure.pins:
                spec = pin(spec, p.compatible[0], v)
        mode = "genuine"
    elif args.structure is not None or sc.structure is not None:
        if isinstance(args.structure, str):
            spec = parse_structure(args.structure, m)
        elif sc.structure is not None:
            spec = sc.structure
        else:
            raise ConfigError("--structure given without a value and the scenario has no structure")
        mode = "structure"
    else:
        raise ConfigError("choose one of --pair, --genuine or --structure")
    report = structure_robustness(sc.assembly, spec, sc.solver)
    doc = {"scenario": sc.name, "mode": mode}
    doc.update(report.to_dict(certificate=args.certificate))
    _emit(doc)
    return EXIT_OK


def cmd_bound(args) -> int:
    if args.d < 2 or args.n < 2:
        raise ConfigError("--d and --n must be at least 2")
    _emit({"d": args.d, "n": args.n, "bound": mub_bound(args.d, args.n)})
    return EXIT_OK


def cmd_qsd(args) -> int:
    sc = load_scenario(args.scenario)
    s, t = _indices(args.pair, len(sc.assembly), "--pair")
    report = witness_w2(sc.assembly, s, t, sc.solver)
    doc = {"scenario": sc.name}
    doc.update(report.to_dict())
    _emit(doc)
    return EXIT_OK


def _hyperplane_assembly(sc: Scenario, plane) -> tuple[Assembly, dict]:
    """Sub-assembly for one hyperplane, plus pins re-indexed into it."""
    sub = sc.assembly.restrict(plane.group)
    if plane.weights is not None:
        w = np.asarray(plane.weights, dtype=float)
        sub = set_weights(sub, w / w.sum())
    local = {x: i for i, x in enumerate(plane.group)}
    pins = {}
    for pair, value in plane.pins.items():
        if any(x not in local for x in pair):
            raise ConfigError(f"hyperplane {plane.name}: pinned pair outside its group")
        pins[tuple(local[x] for x in pair)] = value
    return sub, pins


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    if sc.simulation is None or not sc.simulation.hyperplanes:
        raise ConfigError("scenario has no simulation.hyperplanes section")
    cfg = sc.simulation
    shots = args.shots if args.shots is not None else cfg.shots
    seed = args.seed if args.seed is not None else cfg.seed
    if shots < 1:
        raise ConfigError("--shots must be positive")
    csv_dir = Path(args.csv) if args.csv else None
    if csv_dir is not None:
        csv_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for k, plane in enumerate(cfg.hyperplanes):
        sub, pins = _hyperplane_assembly(sc, plane)
        report = genuine_robustness(sub, pins=pins, opts=sc.solver)
        etas = np.clip(report.eta_star, 0.0, 1.0)
        noise = NoiseModel.from_sharpness(etas, prep_fidelity=cfg.prep_fidelity, shots=shots, rng_seed=(seed, k))
        ensembles = optimal_ensembles(sub)
        counts = simulate_counts(sub, ensembles, noise)
        est = estimate_hyperplane(counts, sub.weights, calibrate(sub, ensembles, cfg.prep_fidelity))
        z = (est.value - report.R) / est.stderr if est.stderr > 0 else 0.0
        row = {
            "name": plane.name,
            "group": [x + 1 for x in plane.group],
            "weights": list(sub.weights),
            "pins": {json.dumps([x + 1 for x in p]): v for p, v in plane.pins.items()},
            "prediction": report.R,
            "eta_set": etas.tolist(),
            "estimate": est.value,
            "stderr": est.stderr,
            "z": z,
            "within_3_sigma": bool(abs(z) <= 3.0),
        }
        if plane.lab_value is not None:
            row["lab_value"] = plane.lab_value
            row["lab_stderr"] = plane.lab_stderr
        rows.append(row)
        if csv_dir is not None:
            (csv_dir / f"{plane.name}.csv").write_text(counts.to_csv())
        log.info("%s: prediction %.4f estimate %.4f +- %.4f", plane.name, report.R, est.value, est.stderr)
    fid = fidelity_report(
        sc.assembly, NoiseModel((0.0,) * len(sc.assembly), cfg.prep_fidelity, shots, (seed, 999))
    )
    _emit({
        "scenario": sc.name,
        "shots": shots,
        "seed": seed,
        "prep_fidelity": {"configured": cfg.prep_fidelity, "estimate": fid.value, "stderr": fid.stderr},
        "hyperplanes": rows,
    })
    return EXIT_OK


def cmd_surface(args) -> int:
    """Grid of sharpness values with the structure robustness at each point."""
    sc = load_scenario(args.scenario)
    m = len(sc.assembly)
    if isinstance(args.structure, str):
        spec = parse_structure(args.structure, m)
    elif sc.structure is not None:
        spec = sc.structure
    else:
        raise ConfigError("need --structure or a scenario structure")
    i, j = _indices(args.axes, m, "--axes")
    if args.points < 2:
        raise ConfigError("--points must be at least 2")
    grid = np.linspace(args.lo, args.hi, args.points)
    lines = [",".join([f"eta_{x + 1}" for x in range(m)] + ["R", "member"])]
    for a in grid:
        for b in grid:
            etas = np.full(m, args.fix)
            etas[i], etas[j] = a, b
            report = structure_robustness(sc.assembly.with_sharpness(etas), spec, sc.solver)
            member = int(report.R >= 1 - VERDICT_TOL)
            lines.append(",".join(f"{v:.6f}" for v in etas) + f",{report.R:.8f},{member}")
    # written only once every grid point has solved
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_schema(args) -> int:
    _emit(SCENARIO_SCHEMA)
    return EXIT_OK


def cmd_scenarios(args) -> int:
    _emit(bundled_scenarios())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="incompat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    w = sub.add_parser("witness", help="robustness of a compatibility structure")
    w.add_argument("scenario")
    mode = w.add_mutually_exclusive_group()
    mode.add_argument("--pair", nargs=2, type=int, metavar=("S", "T"))
    mode.add_argument("--genuine", nargs="*", type=int, metavar="X", help="group (default: all measurements)")
    mode.add_argument("--structure", nargs="?", const=True, metavar="SPEC", help='e.g. "pairs(1,2,3)"')
    w.add_argument("--certificate", action="store_true", help="include parent operators in the report")
    w.set_defaults(func=cmd_witness)

    b = sub.add_parser("bound", help="closed-form MUB hyperplane")
    b.add_argument("--d", type=int, required=True)
    b.add_argument("--n", type=int, required=True)
    b.set_defaults(func=cmd_bound)

    q = sub.add_parser("qsd", help="state-discrimination witness W2 for a pair")
    q.add_argument("scenario")
    q.add_argument("--pair", nargs=2, type=int, required=True, metavar=("S", "T"))
    q.set_defaults(func=cmd_qsd)

    s = sub.add_parser("simulate", help="finite-statistics hyperplane estimates")
    s.add_argument("scenario")
    s.add_argument("--shots", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--csv", metavar="DIR", help="write per-hyperplane count CSVs into DIR")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("surface", help="CSV of robustness on a sharpness grid")
    g.add_argument("scenario")
    g.add_argument("--structure", nargs="?", const=True, metavar="SPEC")
    g.add_argument("--axes", nargs=2, type=int, default=[1, 2], metavar=("I", "J"))
    g.add_argument("--fix", type=float, default=1.0, help="sharpness of the other measurements")
    g.add_argument("--points", type=int, default=11)
    g.add_argument("--lo", type=float, default=0.0)
    g.add_argument("--hi", type=float, default=1.0)
    g.set_defaults(func=cmd_surface)

    sub.add_parser("schema", help="print the scenario JSON schema").set_defaults(func=cmd_schema)
    sub.add_parser("scenarios", help="list bundled scenarios").set_defaults(func=cmd_scenarios)
    return parser


def _configure_logging() -> None:
    level = os.environ.get("INCOMPAT_LOG", "WARNING").upper()
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, StructureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        print(json.dumps(exc.solution.summary()), file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
