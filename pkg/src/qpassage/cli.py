"""Command-line front end: run protocols, sweep parameters, verify the stack.

    qpassage run bell.cfg [--out DIR] [--grid N] [--workers K]
    qpassage sweep bell.cfg --param kappa_T --values 0.0145,0.0725,0.145
    qpassage verify --seed 1 --max-m 3 --max-n 4

`run` writes one trajectory CSV per kappa_T value plus a manifest.json and
exits 0 only when every run's integration diagnostics stay inside their
bounds (1 on a diagnostic failure, 2 on configuration problems).  `sweep`
repeats a run over one parameter and emits a summary table; fidelity must be
non-increasing in kappa_T.  `verify` runs the randomized oracle suites.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .config import SWEEPABLE, ConfigError, RunConfig, load_config
from .io import write_manifest, write_trajectory_csv
from .protocols import (ProtocolError, QubitModel, diagnostics_ok, plan_bell,
                        plan_bell_reverse, plan_ghz, run_protocol)
from .schedules import ScheduleError
from .synthesis import SynthesisError
from .verify import run_verification

__all__ = ["main", "cmd_run", "cmd_sweep", "cmd_verify"]


def _build_plan(config: RunConfig):
    model = QubitModel(qubits=config.qubits, omega=config.omega_T,
                       j_over_omega=config.j_over_omega)
    overrides = config.schedule_overrides or None
    if config.protocol == "bell":
        return plan_bell(model, 1.0, config.boundary, overrides)
    if config.protocol == "bell-reverse":
        return plan_bell_reverse(model, 1.0, overrides)
    return plan_ghz(model, config.qubits, 1.0, config.boundary, overrides)


def _execute(config: RunConfig, plan, kappa: float):
    model = QubitModel(qubits=config.qubits, omega=config.omega_T,
                       j_over_omega=config.j_over_omega, kappa=kappa)
    result = run_protocol(plan, model, mode=config.mode, noise=kappa > 0,
                          grid_steps=config.grid)
    return result


def _run_record(config: RunConfig, index: int, kappa: float, result, csv_name: str) -> dict:
    ok = diagnostics_ok(result, config.mode)
    return {
        "index": index,
        "protocol": config.protocol,
        "mode": config.mode,
        "kappa_T": kappa,
        "final_fidelity": float(result.auxiliary["fidelity_final"][-1]),
        "step_fidelities": {s["name"]: s["target_fidelity"] for s in result.steps},
        "diagnostics": {k: v for k, v in result.diagnostics.items()
                        if isinstance(v, (int, float, str))},
        "csv": csv_name,
        "ok": ok,
    }


def cmd_run(config_path, out: str | None = None, grid: int | None = None,
            workers: int | None = None) -> int:
    started = time.time()
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if out is not None:
        config.out = out
    if grid is not None:
        config.grid = grid
    if workers is not None:
        config.workers = workers
    try:
        plan = _build_plan(config)
    except (ProtocolError, SynthesisError, ScheduleError, ValueError) as exc:
        print(f"error: {config_path}: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(config.out)
    jobs = list(enumerate(config.kappa_T))
    pool_size = config.workers if config.workers > 0 else 1
    try:
        if pool_size > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=pool_size) as pool:
                results = list(pool.map(lambda j: _execute(config, plan, j[1]), jobs))
        else:
            results = [_execute(config, plan, kappa) for _, kappa in jobs]
    except Exception as exc:
        print(f"error: run failed: {exc}", file=sys.stderr)
        return 1

    records = []
    for (index, kappa), result in zip(jobs, results):
        csv_name = f"{config.protocol}-{index:02d}.csv"
        write_trajectory_csv(result, out_dir / csv_name, time_scale=config.duration)
        records.append(_run_record(config, index, kappa, result, csv_name))
    write_manifest(out_dir / "manifest.json", config.echo(), records,
                   __version__, time.time() - started)

    for rec in records:
        status = "ok " if rec["ok"] else "BAD"
        print(f"[{status}] kappa_T={rec['kappa_T']:g} final_fidelity={rec['final_fidelity']:.6f} "
              f"-> {rec['csv']}")
    print(f"manifest: {out_dir / 'manifest.json'}")
    return 0 if all(rec["ok"] for rec in records) else 1


def cmd_sweep(config_path, param: str, values_text: str, out: str | None = None,
              grid: int | None = None, workers: int | None = None) -> int:
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if param not in SWEEPABLE:
        print(f"error: unknown sweep parameter {param!r}; expected one of {SWEEPABLE}",
              file=sys.stderr)
        return 2
    try:
        values = [float(v) for v in values_text.split(",") if v.strip()]
    except ValueError:
        print(f"error: bad --values list {values_text!r}", file=sys.stderr)
        return 2
    if not values:
        print("error: empty --values list", file=sys.stderr)
        return 2
    if out is not None:
        config.out = out
    if grid is not None:
        config.grid = grid
    if workers is not None:
        config.workers = workers

    rows = []
    for value in values:
        variant = RunConfig(**{**config.__dict__})
        if param == "kappa_T":
            variant.kappa_T = (value,)
        elif param == "omega_T":
            variant.omega_T = value
        else:
            variant.grid = int(value)
        try:
            plan = _build_plan(variant)
            result = _execute(variant, plan, variant.kappa_T[0])
        except (ProtocolError, SynthesisError, ScheduleError, ConfigError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        rows.append((value, float(result.auxiliary["fidelity_final"][-1]),
                     float(result.diagnostics.get("max_residual", 0.0))))

    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    table_path = out_dir / f"sweep-{param}.csv"
    with open(table_path, "w", newline="\n") as fh:
        fh.write(f"{param},final_fidelity,max_residual\n")
        for value, fidelity, residual in rows:
            fh.write(f"{value:.17e},{fidelity:.17e},{residual:.17e}\n")
    for value, fidelity, residual in rows:
        print(f"{param}={value:g} final_fidelity={fidelity:.6f} max_residual={residual:.3e}")
    print(f"table: {table_path}")

    if param == "kappa_T" and len(rows) > 1:
        ordered = sorted(rows, key=lambda r: r[0])
        for (va, fa, _), (vb, fb, _) in zip(ordered, ordered[1:]):
            if fb > fa + 1e-9:
                print(f"error: fidelity is not monotone in kappa_T "
                      f"({fa:.6f} at {va:g} -> {fb:.6f} at {vb:g})", file=sys.stderr)
                return 1
    return 0


def cmd_verify(seed: int, max_m: int, max_n: int, instances: int = 3,
               inject_detuning: float = 0.0) -> int:
    sizes = [(m, n) for m in range(1, max_m + 1) for n in range(2, max_n + 1)]
    report = run_verification(seed, sizes, instances=instances,
                              inject_detuning=inject_detuning)
    print(report.format())
    if report.passed:
        print("verification passed")
        return 0
    failed = ", ".join(s.name for s in report.suites if not s.passed)
    print(f"verification FAILED: {failed}", file=sys.stderr)
    return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qpassage",
        description="nonadiabatic-passage protocols: run, sweep, verify")
    parser.add_argument("--version", action="version", version=f"qpassage {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a protocol config, write CSVs and a manifest")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (overrides the config)")
    p_run.add_argument("--grid", type=int, help="integration steps per protocol step")
    p_run.add_argument("--workers", type=int, help="worker pool size for multi-run configs")

    p_sweep = sub.add_parser("sweep", help="repeat a run over one parameter")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--param", required=True, help=f"one of {', '.join(SWEEPABLE)}")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out")
    p_sweep.add_argument("--grid", type=int)
    p_sweep.add_argument("--workers", type=int)

    p_verify = sub.add_parser("verify", help="run the randomized oracle suites")
    p_verify.add_argument("--seed", type=int, default=1)
    p_verify.add_argument("--max-m", type=int, default=3,
                          help="largest assistant level count")
    p_verify.add_argument("--max-n", type=int, default=4,
                          help="largest working level count")
    p_verify.add_argument("--instances", type=int, default=3,
                          help="random instances per size")
    p_verify.add_argument("--inject-detuning", type=float, default=0.0,
                          help="offset the synthesized detuning to demonstrate "
                               "that the residual suite catches it")

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out, args.grid, args.workers)
    if args.command == "sweep":
        return cmd_sweep(args.config, args.param, args.values, args.out,
                         args.grid, args.workers)
    return cmd_verify(args.seed, args.max_m, args.max_n, args.instances,
                      args.inject_detuning)


if __name__ == "__main__":
    sys.exit(main())
