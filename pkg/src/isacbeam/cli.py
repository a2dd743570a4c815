"""Command line entry point: ``isacbeam run|sweep|verify|feasibility``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import designs, oracle
from .config import ScenarioConfig, channel_hash, load_config
from .designs import DesignReport
from .errors import ConfigError, DomainError, InfeasibleError, NumericalError

log = logging.getLogger("isacbeam")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 1, 2, 3
DB_FLOOR = 1e-12
DEFAULT_SWEEP = tuple(0.5 * k for k in range(1, 9))


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


def to_db(x):
    return 10.0 * np.log10(np.maximum(np.asarray(x, dtype=float), DB_FLOOR))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("ISACBEAM_THREADS", "1")))
    except ValueError:
        return 1


def solve_design(cfg: ScenarioConfig, name: str, r0: float, capacity=None) -> DesignReport:
    scene, grid = cfg.scene, cfg.grid()
    if name == "sensing_only":
        return designs.solve_sensing_only(scene, grid, cfg.solver)
    if name == "optimal":
        return designs.solve_optimal(scene, grid, r0, cfg.search, cfg.solver, capacity)
    return designs.SOLVERS[name](scene, grid, r0, cfg.solver)


def beampattern_rows(report: DesignReport, desired, normalize=False):
    curves = [report.total_gain, report.info_gain, report.sensing_gain]
    cols = [to_db(c) for c in curves]
    if normalize:
        for c in curves:
            peak = c.max()
            cols.append(to_db(c / peak) if peak > DB_FLOOR else np.full(c.shape, to_db(0.0)))
    for i, ang in enumerate(np.rad2deg(report.angles)):
        yield [ang, int(desired[i])] + [c[i] for c in cols]


BEAM_HEADER = ["angle_deg", "desired", "total_gain_db", "info_gain_db", "sensing_gain_db"]
NORM_HEADER = ["total_gain_norm_db", "info_gain_norm_db", "sensing_gain_norm_db"]
SUMMARY_HEADER = ["design", "matching_error", "secrecy_rate_bpshz", "cu_sinr_db", "max_eve_sinr_db",
                  "gamma_e_star", "eta_star", "power_info_w", "power_sense_w", "solver_status",
                  "wall_time_s", "channel_hash"]
SWEEP_HEADER = ["r0_bpshz", "error_optimal", "error_zf", "error_separate", "error_sensing_only",
                "feasible_optimal", "feasible_zf", "feasible_separate"]


def summary_row(report: DesignReport, chash: str):
    d = report.design
    return [report.name, report.matching_error, report.secrecy_rate, to_db(report.cu_sinr),
            to_db(report.max_eve_sinr), report.diagnostics.get("gamma_e_star"), d.scale,
            d.info_power, d.sensing_power, report.diagnostics.get("solver_status", ""),
            report.diagnostics.get("wall_time_s"), chash]


def run_design(cfg: ScenarioConfig, out: Path, normalize=False) -> DesignReport:
    out.mkdir(parents=True, exist_ok=True)
    chash = channel_hash(cfg.scene)
    log.info("channel hash %s", chash)
    r0 = 0.0 if cfg.design == "sensing_only" else cfg.secrecy_rate_bpshz
    report = solve_design(cfg, cfg.design, r0)
    grid = cfg.grid()
    header = BEAM_HEADER + (NORM_HEADER if normalize else [])
    _write_csv(out / "beampattern.csv", header, beampattern_rows(report, grid.desired, normalize))
    _write_csv(out / "summary.csv", SUMMARY_HEADER, [summary_row(report, chash)])
    return report


def sweep_rows(cfg: ScenarioConfig):
    """One row per sweep value; infeasible cells are left empty."""
    values = cfg.sweep or list(DEFAULT_SWEEP)
    scene = cfg.scene
    capacity = designs.secrecy_capacity(scene, cfg.search, cfg.solver)
    log.info("channel hash %s, max secrecy rate %.9g", channel_hash(scene), capacity.r_star)
    base = solve_design(cfg, "sensing_only", 0.0).matching_error

    def one(r0):
        if r0 > capacity.r_star + designs.FEASIBILITY_SLACK:
            return [r0, None, None, None, base, False, False, False]
        errs, feas = [], []
        for name in ("optimal", "zf", "separate"):
            try:
                rep = solve_design(cfg, name, r0, capacity)
            except InfeasibleError:
                errs.append(None)
                feas.append(False)
            else:
                errs.append(rep.matching_error)
                feas.append(True)
        log.info("r0 = %g done", r0)
        return [r0, *errs, base, *feas]

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        return list(pool.map(one, values))


def run_sweep(cfg: ScenarioConfig, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    rows = sweep_rows(cfg)
    _write_csv(out / "sweep.csv", SWEEP_HEADER, rows)
    return rows


def run_verify(level: str = "fast", stream=None) -> int:
    stream = stream or sys.stdout
    failures = 0
    t0 = time.perf_counter()
    for n in (2, 4, 6, 8):
        rep = oracle.fuzz_proposition1(n, 1000, 42)
        print(f"fuzz {rep.summary()}", file=stream)
        if not rep.ok:
            failures += len(rep.counterexamples)
            clauses = sorted({c["clause"] for c in rep.counterexamples})
            print(f"VIOLATION extraction clauses: {', '.join(clauses)}", file=stream)
    for case_id in oracle.ANALYTIC_CASE_IDS:
        case = oracle.analytic_cases(case_id)
        got = oracle.run_analytic(case)
        for key, want in case.expected.items():
            err = abs(got[key] - want)
            ok = err <= 1e-6 * max(abs(want), 1.0)
            print(f"analytic {case_id}.{key}: expected {want:.9g} got {got[key]:.9g} "
                  f"{'ok' if ok else 'VIOLATION'}", file=stream)
            failures += not ok
    if level == "full":
        for name, scene, grid in oracle.n2_fixtures():
            cap = designs.secrecy_capacity(scene)
            r0 = 0.5 * cap.r_star
            sdr = designs.solve_optimal(scene, grid, r0, capacity=cap).matching_error
            bf = oracle.brute_force_p1(scene, grid, r0)
            ok = bf.feasible and sdr <= bf.matching_error * (1 + 1e-6) and bf.matching_error <= 1.02 * sdr
            print(f"sandwich {name}: sdr {sdr:.9g} brute force {bf.matching_error:.9g} "
                  f"{'ok' if ok else 'VIOLATION'}", file=stream)
            failures += not ok
    print(f"verify {level}: {failures} violation(s) in {time.perf_counter() - t0:.1f} s", file=stream)
    return EXIT_OK if failures == 0 else EXIT_CONFIG


def _fail(code: int, kind: str, message: str, **extra) -> int:
    payload = {"error": kind, "message": message, **extra}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isacbeam", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="solve one design and write beampattern.csv and summary.csv")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--normalize", action="store_true", help="also emit peak-normalised gains")
    s = sub.add_parser("sweep", help="compare all designs over the secrecy-rate sweep")
    s.add_argument("config")
    s.add_argument("--out", help="output directory (overrides the config)")
    v = sub.add_parser("verify", help="run the built-in verifiers")
    v.add_argument("--level", choices=("fast", "full"), default="fast")
    f = sub.add_parser("feasibility", help="print the maximum secrecy rate")
    f.add_argument("config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "verify":
        return run_verify(args.level)
    try:
        cfg = load_config(args.config)
        out = Path(args.out if getattr(args, "out", None) else cfg.output_dir)
        if args.command == "run":
            run_design(cfg, out, args.normalize)
        elif args.command == "sweep":
            run_sweep(cfg, out)
        else:
            r = designs.max_secrecy_rate(cfg.scene, cfg.search, cfg.solver)
            print(fmt(r))
    except (ConfigError, DomainError) as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except InfeasibleError as exc:
        r_star = getattr(exc, "r_star", None)
        if r_star is None:
            r_star = designs.max_secrecy_rate(cfg.scene, cfg.search, cfg.solver)
        return _fail(EXIT_INFEASIBLE, "infeasible", str(exc), r_star=float(r_star))
    except NumericalError as exc:
        return _fail(EXIT_NUMERICAL, "numerical", str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
