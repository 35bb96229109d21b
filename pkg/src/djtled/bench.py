"""Per-step timing of both engines over a ladder of generated box meshes."""

from __future__ import annotations

import csv
import io
import time
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .assembly import ENGINES
from .materials import Material, benchmark_material
from .mesh import BoundaryConditions, Mesh, PrescribedDisplacement, fix_nodes, generate_box, nodes_on_plane
from .precompute import critical_dt
from .solver import Simulation, relaxation_damping

CSV_HEADER = ("dofs", "kind", "material", "engine", "threads", "mean_step_us", "ratio")
BLOCK = 20  # steps per interleaved timing block


@dataclass(frozen=True)
class BenchRow:
    dofs: int
    kind: str
    material: str
    engine: str
    threads: int
    mean_step_us: float
    ratio: float


def bench_problem(divisions: int, kind: str, extent: float = 0.1) -> tuple[Mesh, BoundaryConditions]:
    """Cube with a clamped base and its top face pulled 1% along z."""
    mesh = generate_box((extent,) * 3, (divisions,) * 3, kind)
    base = nodes_on_plane(mesh, "z", "min")
    top = nodes_on_plane(mesh, "z", "max")
    bc = BoundaryConditions(fix_nodes(base), (PrescribedDisplacement(tuple(int(n) for n in top), 2, 0.01 * extent, 0.05),))
    return mesh, bc


def time_interleaved(sims: dict[str, Simulation], steps: int = 1000, warmup: int = 100,
                     stat: str = "mean") -> dict[str, float]:
    """Seconds per solver step for each simulation.

    The simulations advance in alternating blocks of ``BLOCK`` steps so slow
    drifts in machine load hit all of them alike. ``stat="mean"`` is total time
    over steps; ``stat="median"`` is the median block, which shrugs off blocks
    hit by unrelated machine load.
    """
    if stat not in ("mean", "median"):
        raise ValueError("stat must be 'mean' or 'median'")
    if steps < 1:
        raise ValueError(f"need at least one timed step, got {steps}")
    for sim in sims.values():
        for _ in range(warmup):
            sim.step()
    blocks: dict[str, list[float]] = {k: [] for k in sims}
    done = 0
    clock = time.perf_counter
    while done < steps:
        n = min(BLOCK, steps - done)
        for k, sim in sims.items():
            start = clock()
            for _ in range(n):
                sim.step()
            blocks[k].append((clock() - start) / n)
        done += n
    if stat == "median":
        return {k: float(np.median(v)) for k, v in blocks.items()}
    sizes = [min(BLOCK, steps - i) for i in range(0, steps, BLOCK)]
    return {k: float(np.dot(v, sizes)) / steps for k, v in blocks.items()}


def time_engines(mesh: Mesh, material: Material, bc: BoundaryConditions, steps: int = 1000, warmup: int = 100,
                 threads: int = 1, engines: Iterable[str] = ENGINES, c_hg: float = 0.1) -> dict[str, float]:
    """Mean seconds per solver step for each engine; precompute is excluded."""
    dt = 0.8 * critical_dt(mesh, material, c_hg)
    alpha = relaxation_damping(mesh, material)
    sims = {e: Simulation(mesh, material, bc, dt, alpha, engine=e, c_hg=c_hg, threads=threads,
                          on_unstable="ignore") for e in engines}
    return time_interleaved(sims, steps, warmup)


def time_materials(mesh: Mesh, bc: BoundaryConditions, materials: Iterable[str] = ("NH", "TI", "OT", "MR"),
                   engine: str = "djtled", steps: int = 1000, warmup: int = 100, threads: int = 1,
                   stat: str = "median") -> dict[str, float]:
    """Seconds per solver step for each material model on one engine."""
    sims = {}
    for name in materials:
        material = benchmark_material(name)
        dt = 0.8 * critical_dt(mesh, material)
        sims[name] = Simulation(mesh, material, bc, dt, relaxation_damping(mesh, material), engine=engine,
                                threads=threads, on_unstable="ignore")
    return time_interleaved(sims, steps, warmup, stat)


def run_bench(sizes: Iterable[int], kinds: Iterable[str] = ("T4", "H8"),
              materials: Iterable[str] = ("NH", "TI", "OT", "MR"), steps: int = 1000, warmup: int = 100,
              threads: Iterable[int] = (1,), progress: Optional[Callable[[BenchRow], None]] = None) -> list[BenchRow]:
    """Rows ordered by kind, material, size, thread count, then engine."""
    rows = []
    for kind in kinds:
        for name in materials:
            material = benchmark_material(name)
            for size in sizes:
                mesh, bc = bench_problem(size, kind)
                for nt in threads:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", RuntimeWarning)
                        means = time_engines(mesh, material, bc, steps, warmup, nt)
                    ratio = means["djtled"] / means["tled"]
                    for engine in ENGINES:
                        row = BenchRow(mesh.n_dofs, kind, name, engine, nt, means[engine] * 1e6, ratio)
                        rows.append(row)
                        if progress is not None:
                            progress(row)
    return rows


def rows_to_csv(rows: Iterable[BenchRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        d = asdict(row)
        d["mean_step_us"] = f"{row.mean_step_us:.3f}"
        d["ratio"] = f"{row.ratio:.4f}"
        writer.writerow(d)
    return buf.getvalue()


def linear_fit_r2(x, y) -> float:
    """Coefficient of determination of the least-squares line through (x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
