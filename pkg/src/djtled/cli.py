"""Command-line front end: ``djtled run|compare|bench|demo-brain``.

Exit codes: 0 success, 2 configuration or mesh error, 3 time step above the
stability limit (with ``--on-unstable error``), 4 element inversion,
5 non-finite displacement.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .assembly import ENGINES, available_threads
from .bench import linear_fit_r2, rows_to_csv, run_bench
from .config import BenchConfig, RunConfig, load_bench_config, load_config, parse_threads
from .demo import DemoSpec, run_demo
from .errors import ConfigError, DJTLEDError
from .mesh import export_field
from .metrics import nre_histogram, rmse
from .solver import RunResult, Simulation, StabilityWarning, steps_for

log = logging.getLogger("djtled")


def _sibling(path: Path, tag: str) -> Path:
    return path.with_name(f"{path.stem}.{tag}{path.suffix}")


def simulate(cfg: RunConfig, engine: str, field_path: Optional[Path] = None) -> RunResult:
    """One engine over the configured problem; writes frames every ``stride`` steps."""
    mesh = cfg.mesh
    dt = cfg.time_step()
    sim = Simulation(mesh, cfg.material, cfg.boundary_conditions(), dt, cfg.damping(), engine=engine,
                     c_hg=cfg.c_hg, threads=cfg.threads, precision=cfg.precision,
                     on_inversion=cfg.on_inversion, on_unstable=cfg.on_unstable)
    n = steps_for(cfg.t_end, dt)
    hook = lambda step, t, umax, wall: log.info("%s step %d t=%.6g max|u|=%.6g", engine, step, t, umax)  # noqa: E731
    if not cfg.stride or field_path is None:
        return sim.run(n_steps=n, hook=hook if cfg.stride else None, stride=max(cfg.stride, 1))
    parts = []
    done = 0
    while done < n:
        k = min(cfg.stride, n - done)
        part = sim.run(n_steps=k, hook=hook, stride=k)
        parts.append(part.step_seconds)
        done += k
        _write(_sibling(field_path, f"{done:08d}"), export_field(mesh, part.U))
    return RunResult(sim.state.U_curr.copy(), n, dt, sim.state.t, np.concatenate(parts) if parts else np.empty(0),
                     sim.assembler.precompute_seconds, dict(sim.inversions))


def _write(path: Optional[Path], text: str) -> None:
    if path is None:
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def run_report(cfg: RunConfig, results: dict[str, RunResult]) -> list[str]:
    lines = [f"dofs {cfg.mesh.n_dofs}", f"elements {cfg.mesh.n_elements} {cfg.mesh.kind.value}",
             f"precision {cfg.precision}", f"threads {cfg.threads}"]
    for engine, r in results.items():
        p = f"{engine}." if len(results) > 1 else ""
        lines += [
            f"{p}engine {engine}",
            f"{p}steps {r.steps}",
            f"{p}dt {r.dt!r}",
            f"{p}t_end {r.t!r}",
            f"{p}precompute_s {r.precompute_seconds:.6f}",
            f"{p}total_s {r.total_seconds:.6f}",
            f"{p}mean_step_s {r.mean_step_seconds:.9f}",
            f"{p}max_abs_u {float(np.abs(r.U).max())!r}",
            f"{p}inverted_elements {len(r.inversions)}",
        ]
    return lines


def cmd_run(cfg: RunConfig) -> int:
    engines = cfg.engines()
    results = {}
    for engine in engines:
        path = cfg.field_path if len(engines) == 1 or cfg.field_path is None else _sibling(cfg.field_path, engine)
        results[engine] = simulate(cfg, engine, path)
        if path is not None:
            _write(path, export_field(cfg.mesh, results[engine].U))
    lines = ["djtled run report"] + run_report(cfg, results)
    if len(results) == 2:
        lines += comparison_lines(results)
    _emit(cfg.report_path, lines)
    return 0


def comparison_lines(results: dict[str, RunResult]) -> list[str]:
    a, b = (results[e] for e in ENGINES)
    ua, ub = a.U.astype(np.float64), b.U.astype(np.float64)
    lines = [f"rmse {rmse(ua, ub)!r}"]
    if b.mean_step_seconds > 0:
        lines.append(f"ratio {a.mean_step_seconds / b.mean_step_seconds:.4f}")
    if np.ptp(ub) > 0:
        lines.append("nre_histogram")
        lines += ["  " + ln for ln in nre_histogram(ua, ub).lines()]
    else:
        lines.append("nre_histogram n/a (uniform reference field)")
    return lines


def cmd_compare(cfg: RunConfig) -> int:
    return cmd_run(replace(cfg, engine="both"))


def _emit(path: Optional[Path], lines: list[str]) -> None:
    text = "\n".join(lines) + "\n"
    _write(path, text)
    sys.stdout.write(text)


def cmd_bench(args) -> int:
    bench = load_bench_config(args.config) if args.config else BenchConfig()
    sizes = tuple(args.sizes) if args.sizes else bench.sizes
    threads = bench.threads
    if args.threads is not None:
        threads = (1, args.threads) if args.threads > 1 else (1,)
    if threads is None:
        threads = tuple(sorted({1, available_threads()}))
    steps = args.steps or bench.steps
    warmup = bench.warmup if args.warmup is None else args.warmup
    kinds = tuple(args.kinds) if args.kinds else bench.kinds
    materials = tuple(args.materials) if args.materials else bench.materials

    progress = lambda row: log.info("%s %s dofs=%d %s threads=%d %.1f us", row.kind, row.material, row.dofs,  # noqa: E731
                                    row.engine, row.threads, row.mean_step_us)
    rows = run_bench(sizes, kinds, materials, steps, warmup, threads, progress)
    text = rows_to_csv(rows)
    csv_path = Path(args.csv) if args.csv else bench.csv
    _write(csv_path, text)
    sys.stdout.write(text)
    for kind in kinds:
        for mat in materials:
            for nt in threads:
                for engine in ENGINES:
                    sel = [r for r in rows if (r.kind, r.material, r.threads, r.engine) == (kind, mat, nt, engine)]
                    if len(sel) >= 3:
                        r2 = linear_fit_r2([r.dofs for r in sel], [r.mean_step_us for r in sel])
                        log.info("%s %s threads=%d %s linear fit R^2 = %.4f", kind, mat, nt, engine, r2)
    return 0


def cmd_demo(args) -> int:
    spec = DemoSpec()
    overrides = {
        "spacing": args.spacing,
        "t_end": args.t_end,
        "mu": args.mu,
        "kappa": args.kappa,
        "patch_radius": args.patch_radius,
        "patch_displacement": tuple(args.patch_displacement) if args.patch_displacement else None,
        "threads": args.threads,
    }
    spec = replace(spec, **{k: v for k, v in overrides.items() if v is not None})
    engines = ENGINES if args.engine == "both" else (args.engine,)
    result = run_demo(spec, engines, args.field, args.report)
    sys.stdout.write(result.report())
    return 0


def build_parser() -> argparse.ArgumentParser:
    threads = dict(type=parse_threads, default=None, metavar="N|auto", help="assembly threads")
    p = argparse.ArgumentParser(prog="djtled", description="Explicit hyperelastic finite element runs with the "
                                "direct-Jacobian (djtled) or conventional (tled) force engine.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    for name, help_ in (("run", "integrate the configured problem"), ("compare", "run both engines and compare")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("config")
        s.add_argument("--threads", **threads)
        s.add_argument("--precision", choices=("double", "single"))
        s.add_argument("--on-inversion", choices=("abort", "report"))
        s.add_argument("--on-unstable", choices=("warn", "error", "ignore"))
        s.add_argument("--report", help="plain-text report path (overrides [output] report)")
        s.add_argument("--field", help="VTK field path (overrides [output] field)")
        if name == "run":
            s.add_argument("--engine", choices=ENGINES + ("both",))

    b = sub.add_parser("bench", help="per-step timing ladder, CSV output")
    b.add_argument("config", nargs="?")
    b.add_argument("--sizes", type=int, nargs="+", help="box divisions per edge")
    b.add_argument("--kinds", nargs="+", choices=("T4", "H8"))
    b.add_argument("--materials", nargs="+", choices=("NH", "TI", "OT", "MR"))
    b.add_argument("--steps", type=int)
    b.add_argument("--warmup", type=int)
    b.add_argument("--threads", **threads)
    b.add_argument("--csv")

    d = sub.add_parser("demo-brain", help="synthetic brain-shift example")
    d.add_argument("--spacing", type=float)
    d.add_argument("--t-end", type=float)
    d.add_argument("--mu", type=float)
    d.add_argument("--kappa", type=float)
    d.add_argument("--patch-radius", type=float)
    d.add_argument("--patch-displacement", type=float, nargs=3, metavar=("UX", "UY", "UZ"))
    d.add_argument("--engine", choices=ENGINES + ("both",), default="both")
    d.add_argument("--threads", **threads)
    d.add_argument("--field")
    d.add_argument("--report")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return ConfigError.exit_code if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", StabilityWarning)
            if args.command in ("run", "compare"):
                cfg = load_config(args.config).with_overrides(
                    threads=args.threads, precision=args.precision, on_inversion=args.on_inversion,
                    on_unstable=args.on_unstable, engine=getattr(args, "engine", None),
                    report_path=Path(args.report) if args.report else None,
                    field_path=Path(args.field) if args.field else None)
                return cmd_run(cfg) if args.command == "run" else cmd_compare(cfg)
            if args.command == "bench":
                return cmd_bench(args)
            return cmd_demo(args)
    except DJTLEDError as exc:
        print(f"djtled: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"djtled: error: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
