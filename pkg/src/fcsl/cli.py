"""Command-line runner: ``fcsl {simulate,check,ergodic,report} --config run.toml``.

Every run writes ``resolved_config.toml`` next to its outputs; feeding that
file back reproduces the run exactly.  Thread count changes speed only.
"""

from __future__ import annotations

import argparse
import copy
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import checks, ergodic
from .config import RunConfig, load_config
from .errors import FcslError, InsufficientDataError
from .io import read_csv, write_csv, write_snapshot
from .solver import evolve_ensemble

log = logging.getLogger("fcsl")

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
           "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = _LEVELS.get(os.environ.get("FCSL_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _with_seed(cfg: RunConfig, seed: Optional[int]) -> RunConfig:
    if seed is None:
        return cfg
    resolved = copy.deepcopy(cfg.resolved)
    resolved["solver"]["seed"] = int(seed)
    return RunConfig(resolved)


def _outdir(cfg: RunConfig, out) -> Path:
    d = Path(out) if out is not None else Path(cfg.output["directory"])
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise FcslError(f"cannot create output directory {d}: {e}") from None
    return d


def _detail_rows(details: dict):
    """Long-format rows ``(key, index, value)`` for any mix of scalars and arrays."""
    for key, val in details.items():
        arr = np.atleast_1d(np.asarray(val, dtype=np.float64))
        for i, v in enumerate(arr):
            yield key, i, float(v)


# --- subcommands ----------------------------------------------------------------------


def _simulate(cfg: RunConfig, out: Path, threads: int) -> int:
    model = cfg.build_model()
    sc = cfg.solver_config()
    grid = sc.grid
    u0 = cfg.initial(grid)
    n_paths = int(cfg.experiment["n_paths"])
    ens = evolve_ensemble(u0, model, sc, n_paths, threads)
    formats = cfg.output["formats"]
    x = grid.x
    if "csv" in formats:
        rows = ((p, int(round(t / ens.dt)) if ens.dt > 0 else 0, t, i, x[i], ens.values[p, s, i])
                for p in range(n_paths) for s, t in enumerate(ens.times) for i in range(grid.n))
        write_csv(out / "trajectory.csv", ["path", "step", "time", "cell", "x", "u"], rows)
        stats = ((p, t, float(np.mean(ens.values[p, s])), float(np.mean(np.abs(ens.values[p, s]))),
                  float(np.max(np.abs(ens.values[p, s]))))
                 for p in range(n_paths) for s, t in enumerate(ens.times))
        write_csv(out / "trajectory_summary.csv", ["path", "time", "mean", "L1_norm", "Linf_norm"], stats)
    if "snapshot" in formats:
        every = int(cfg.experiment["snapshot_every"])
        n_samp = len(ens.times)
        picks = sorted({n_samp - 1} | (set(range(0, n_samp, every)) if every > 0 else set()))
        for p in range(n_paths):
            for s in picks:
                step = int(round(ens.times[s] / ens.dt)) if ens.dt > 0 else 0
                write_snapshot(ens.values[p, s], out / f"snapshot_p{p:04d}_s{step:08d}.fcsl",
                               time=ens.times[s], seed=sc.seed, step=step)
    log.info("simulate: %d paths, %d samples, dt=%.6g", n_paths, len(ens.times), ens.dt)
    return 0


def _run_check(name: str, cfg: RunConfig, threads: int) -> checks.CheckReport:
    model = cfg.build_model()
    sc = cfg.solver_config()
    e = cfg.experiment
    u0 = cfg.initial(sc.grid)
    n_paths = int(e["n_paths"])
    if name == "contraction":
        return checks.contraction_check(u0, cfg.initial(sc.grid, "u0_b"), model, sc, n_paths, threads)
    if name == "lp_bound":
        if sc.tau <= 0:
            sc = replace(sc, tau=float(e["tau_ladder"][0]))
        return checks.lp_bound_check(u0, model, sc, e["p"], n_paths, threads)
    if name == "mean":
        return checks.mean_martingale_check(u0, model, sc)
    if name == "viscosity":
        return checks.viscosity_cauchy(u0, model, sc, e["tau_ladder"], n_paths, threads)
    if name == "nld":
        return checks.nld_exponent_fit(model, e["gamma_ladder"], tuple(e["zeta_range"])).to_report()
    raise FcslError(f"unknown check {name!r}")


SUMMARY_HEADER = ["name", "passed", "statistic", "threshold", "n_paths", "notes"]


def _check(cfg: RunConfig, out: Path, threads: int) -> int:
    names = cfg.experiment["check"]
    if not names:
        raise FcslError("experiment.check is empty; nothing to run")
    rows = []
    for name in names:
        rep = _run_check(name, cfg, threads)
        row = rep.summary_row()
        rows.append([row[k] for k in SUMMARY_HEADER])
        write_csv(out / f"check_{name}.csv", SUMMARY_HEADER, [rows[-1]])
        write_csv(out / f"check_{name}_detail.csv", ["key", "index", "value"], _detail_rows(rep.details))
        print(f"{name}: {'PASS' if rep.passed else 'FAIL'} statistic={rep.statistic:.6g} "
              f"threshold={rep.threshold:.6g} {rep.notes}")
    write_csv(out / "summary.csv", SUMMARY_HEADER, rows)
    return 0 if all(r[1] for r in rows) else 1


SCOPE_NOTE = ("finite shadow: two initial data and one functional on one grid; "
              "convergence in law for every initial datum is not tested")


def _ergodic(cfg: RunConfig, out: Path, threads: int) -> int:
    model = cfg.build_model()
    sc = cfg.solver_config()
    e = cfg.experiment
    u0 = cfg.initial(sc.grid)
    T, stride = e["T"], e["stride"]
    run = ergodic.simulate_long(u0, model, sc, T, e["burn_in"], stride, path_id=0)
    if not run.complete:
        raise FcslError(run.message)
    track = ergodic.sobolev_norm_track(run, e["sobolev_r"], e["sobolev_q"])
    names = list(ergodic.FUNCTIONALS)
    write_csv(out / "samples.csv", ["time"] + names + ["sobolev_norm"],
              ([t] + [run.functionals[k][i] for k in names] + [track.values[i]]
               for i, t in enumerate(run.times)))
    coupling_cfg = replace(sc, dt=run.dt, sample_stride=max(1, int(round(stride / run.dt))))
    cs = ergodic.two_start_coupling(u0, cfg.initial(sc.grid, "u0_b"), model, coupling_cfg, T)
    write_csv(out / "distance.csv", ["time", "L1_distance"], zip(cs.times, cs.distance))

    f = e["functional"]
    a = run.measure(f, T / 2, 3 * T / 4)
    b = run.measure(f, 3 * T / 4, T)
    try:
        cmp_ = ergodic.compare_measures(a, b)
    except InsufficientDataError as err:
        log.warning("window comparison skipped: %s", err)
        cmp_ = ergodic.WindowComparison(math.nan, math.nan, math.nan)
    half = track.values[track.times <= T / 2 + 1e-12]
    quarter = track.values[track.times >= 3 * T / 4 - 1e-12]
    drift = (abs(quarter.mean() / half.mean() - 1.0)
             if half.size and quarter.size and half.mean() > 0 else math.nan)
    write_csv(out / "ergodic_summary.csv", ["quantity", "value"], [
        ["functional", f],
        ["n_samples", len(run)],
        ["dt", run.dt],
        ["window_w1", cmp_.w1],
        ["window_stderr", cmp_.stderr],
        ["window_tolerance", cmp_.tolerance],
        ["window_agree", "" if math.isnan(cmp_.w1) else int(cmp_.passed)],
        ["coupling_initial", cs.initial],
        ["coupling_terminal", cs.terminal],
        ["sobolev_mean_first_half", float(half.mean()) if half.size else math.nan],
        ["sobolev_mean_last_quarter", float(quarter.mean()) if quarter.size else math.nan],
        ["sobolev_relative_drift", drift],
        ["scope", SCOPE_NOTE],
    ])
    if "snapshot" in cfg.output["formats"] and run.states.size:
        steps = int(round(run.state_times[-1] / run.dt))
        write_snapshot(run.states[-1], out / "ergodic_final.fcsl", time=run.state_times[-1],
                       seed=sc.seed, step=steps)
    print(f"ergodic: {len(run)} samples, window W1={cmp_.w1:.4g} (tolerance {cmp_.tolerance:.4g}), "
          f"coupling {cs.initial:.4g} -> {cs.terminal:.4g}")
    return 0


def _report(cfg: RunConfig, out: Path, threads: int) -> int:
    rows = []
    summary = out / "summary.csv"
    if summary.exists():
        header, body = read_csv(summary)
        for r in body:
            d = dict(zip(header, r))
            rows.append(["check", d["name"], d["passed"], d["statistic"], d["threshold"], d["notes"]])
    erg = out / "ergodic_summary.csv"
    if erg.exists():
        _, body = read_csv(erg)
        d = dict(body)
        rows.append(["ergodic", "window_w1", d["window_agree"], d["window_w1"], d["window_tolerance"],
                     f"functional={d['functional']}; {d.get('scope', SCOPE_NOTE)}"])
        rows.append(["ergodic", "coupling", "", d["coupling_terminal"], d["coupling_initial"], ""])
        rows.append(["ergodic", "sobolev_drift", "", d["sobolev_relative_drift"], "", ""])
    if not rows:
        raise FcslError(f"no summary.csv or ergodic_summary.csv found in {out}")
    write_csv(out / "report.csv", ["source", "name", "passed", "statistic", "threshold", "notes"], rows)
    for r in rows:
        print(",".join(str(c) for c in r))
    return 0 if all(r[2] != "0" for r in rows) else 1


_COMMANDS = {"simulate": _simulate, "check": _check, "ergodic": _ergodic, "report": _report}


def run(subcommand: str, config: RunConfig, out=None, threads: int = 1,
        seed_override: Optional[int] = None) -> int:
    """Execute one subcommand; returns the process exit status."""
    if subcommand not in _COMMANDS:
        raise FcslError(f"unknown subcommand {subcommand!r}")
    if threads < 1:
        raise FcslError("--threads must be at least 1")
    cfg = _with_seed(config, seed_override)
    d = _outdir(cfg, out)
    (d / "resolved_config.toml").write_text(cfg.to_toml(), encoding="utf-8")
    return _COMMANDS[subcommand](cfg, d, threads)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fcsl", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=sorted(_COMMANDS))
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--out", default=None, help="output directory (overrides output.directory)")
    p.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    p.add_argument("--seed-override", type=int, default=None, help="replace solver.seed")
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return run(args.subcommand, cfg, args.out, args.threads, args.seed_override)
    except FcslError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e.filename or ''}: {e.strerror}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
