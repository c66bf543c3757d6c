"""Scenario-driven command line: run controllers, certify inequalities, sweep grids.

Exit codes: 0 success, 1 runtime failure (divergence, rank deficiency,
certification violations), 2 invalid scenario or arguments.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import analysis, runner, scenario
from .controllers import DivergenceError
from .estimation import RankDeficiencyError
from .model import ConfigurationError


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_trajectory_csv(path: Path, traj) -> None:
    n = traj.states.shape[1]
    m = traj.controls.shape[1]
    header = (["t"] + [f"x{i}" for i in range(n)] + [f"u{i}" for i in range(m)]
              + [f"w{i}" for i in range(n)]
              + ["stage_cost", "value", "cumulative_cost", "cumulative_energy"])
    cum_c = traj.cumulative_costs
    cum_e = traj.cumulative_energies
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(traj.T):
            row = ([str(int(traj.times[i]))]
                   + [_fmt(v) for v in traj.states[i]]
                   + [_fmt(v) for v in traj.controls[i]]
                   + [_fmt(v) for v in traj.disturbances[i]]
                   + [_fmt(traj.stage_costs[i]), _fmt(traj.values[i]),
                      _fmt(cum_c[i]), _fmt(cum_e[i])])
            writer.writerow(row)


def _parse_gammas(text: str | None):
    if text is None:
        return None
    return [float(tok) for tok in text.replace(",", " ").split()]


def _emit_error(out: Path | None, exc: Exception, steps: int | None = None) -> None:
    print(f"error: {exc}", file=sys.stderr)
    if out is not None:
        record = {"error": type(exc).__name__, "message": str(exc)}
        if steps is not None:
            record["steps_completed"] = steps
        _write_json(out / "error.json", record)


def cmd_run(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        scn = scenario.load_and_build(args.scenario, seed_override=args.seed,
                                      gamma_override=_parse_gammas(args.gamma))
        constants = runner.resolve_constants(scn)
    except (ConfigurationError, analysis.CertificationError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        _emit_error(out, exc)
        return 2
    try:
        result = runner.run_scenario(scn, constants)
    except (DivergenceError, RankDeficiencyError) as exc:
        partial = getattr(exc, "trajectory", None)
        if partial is not None:
            write_trajectory_csv(out / "trajectory.csv", partial)
        _emit_error(out, exc, steps=partial.T if partial is not None else 0)
        _write_json(out / "constants.json", constants.as_dict())
        return 1
    write_trajectory_csv(out / "trajectory.csv", result.trajectory)
    _write_json(out / "metrics.json", result.metrics)
    _write_json(out / "constants.json", constants.as_dict())
    if not args.no_plot:
        from . import plots
        plots.save_trajectory_figure(result.trajectory, out / "trajectory.png")
        plots.save_regret_figure(result.trajectory, scn.config.gamma_grid,
                                 constants.attenuation_threshold, out / "regret.png")
    print(f"run complete: total_cost={result.trajectory.total_cost:.6g} "
          f"energy={result.trajectory.energy:.6g} -> {out}")
    return 0


def cmd_certify(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        scn = scenario.load_and_build(args.scenario, seed_override=args.seed,
                                      gamma_override=_parse_gammas(args.gamma))
        result, reports = runner.certify_scenario(scn)
    except (ConfigurationError, analysis.CertificationError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        _emit_error(out, exc)
        return 2
    except (DivergenceError, RankDeficiencyError) as exc:
        _emit_error(out, exc)
        return 1
    payload = {
        "scenario": scn.name,
        "seed": scn.config.seed,
        "checks": [{
            "check": rep.check,
            "max_residual": rep.max_residual,
            "tolerance": rep.tolerance,
            "violations": [int(s) for s in rep.violations],
            "passed": rep.passed,
        } for rep in reports],
        "passed": all(rep.passed for rep in reports),
    }
    _write_json(out / "certification.json", payload)
    for rep in reports:
        print(f"{rep.check}: max residual {rep.max_residual:.3e} "
              f"(tolerance {rep.tolerance:.1e}) -> {'pass' if rep.passed else 'FAIL'}")
    return 0 if payload["passed"] else 1


def _sweep_cell(payload) -> dict:
    raw, assignments, seed, gammas = payload
    row = {k: v for k, v in assignments.items()}
    try:
        doc = scenario.apply_overrides(raw, assignments)
        scn = scenario.build(doc, seed_override=seed, gamma_override=gammas)
        res = runner.run_scenario(scn)
        row["status"] = "ok"
        row["error"] = ""
        row["total_cost"] = res.trajectory.total_cost
        row["energy"] = res.trajectory.energy
        row["regret_at_threshold"] = res.metrics["regret_at_threshold"]
        for item in res.metrics["regret"]:
            row[f"regret_gamma_{item['gamma']:g}"] = item["regret"]
        phase = res.metrics.get("control_phase")
        if phase is not None:
            row["control_phase_cost"] = phase["cost"]
            row["control_phase_regret_at_threshold"] = phase["regret_at_threshold"]
            for item in phase["regret"]:
                row[f"control_phase_regret_gamma_{item['gamma']:g}"] = item["regret"]
    except Exception as exc:  # per-cell failures are recorded, the sweep continues
        row["status"] = "error"
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_sweep(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        raw = scenario.load(args.scenario)
        grid_text = args.grid
        if grid_text is None:
            raise ConfigurationError("sweep needs --grid (a JSON file or inline JSON object)")
        grid_path = Path(grid_text)
        grid = json.loads(grid_path.read_text(encoding="utf-8")) if grid_path.exists() \
            else json.loads(grid_text)
        if not isinstance(grid, dict):
            raise ConfigurationError("the sweep grid must be a JSON object of parameter lists")
    except (ConfigurationError, FileNotFoundError, json.JSONDecodeError) as exc:
        _emit_error(out, exc)
        return 2

    gammas = _parse_gammas(args.gamma)
    base_gammas = gammas if gammas is not None else raw.get("run", {}).get("gamma_grid", [])
    params = list(grid.keys())
    values = [grid[p] for p in params]
    cells = [] if (not params or any(len(v) == 0 for v in values)) else [
        dict(zip(params, combo)) for combo in itertools.product(*values)]

    header = (params + ["status", "error", "total_cost", "energy", "regret_at_threshold"]
              + [f"regret_gamma_{float(g):g}" for g in base_gammas])
    if raw.get("run", {}).get("N") is not None:
        header += (["control_phase_cost", "control_phase_regret_at_threshold"]
                   + [f"control_phase_regret_gamma_{float(g):g}" for g in base_gammas])

    payloads = [(raw, cell, args.seed, gammas) for cell in cells]
    if args.jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_cell, payloads))
    else:
        rows = [_sweep_cell(p) for p in payloads]

    with (out / "sweep.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row[c]) if isinstance(row.get(c), float)
                             else row.get(c, "") for c in header])
    failures = sum(1 for r in rows if r.get("status") != "ok")
    print(f"sweep complete: {len(rows)} cells, {failures} failed -> {out / 'sweep.csv'}")
    if not args.no_plot and rows and params:
        from . import plots
        plots.save_sweep_figure(rows, params[0], "regret_at_threshold", out / "sweep.png")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rhclab",
                                     description="receding-horizon control runs, certificates, sweeps")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("certify", cmd_certify), ("sweep", cmd_sweep)):
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--gamma", default=None,
                       help="override the attenuation grid (comma-separated)")
        p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
        if name == "sweep":
            p.add_argument("--grid", default=None,
                           help="JSON file or inline JSON: {\"run.T\": [100, 400]}")
            p.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
