"""Brain-shift style demonstration on a synthetic ellipsoidal tetrahedral mesh.

The base of the body is clamped, a spherical patch of nodes near the top is
driven to a fixed displacement vector, and both engines run to rest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .assembly import ENGINES
from .materials import NeoHookean
from .mesh import BoundaryConditions, Mesh, PrescribedDisplacement, export_field, fix_nodes, generate_box
from .metrics import Histogram, nre_histogram, rmse
from .precompute import critical_dt
from .solver import RunResult, Simulation, relaxation_damping, steps_for


@dataclass(frozen=True)
class DemoSpec:
    semi_axes: tuple[float, float, float] = (0.085, 0.07, 0.06)
    spacing: float = 0.01
    base_fraction: float = 0.1
    patch_centre: Optional[tuple[float, float, float]] = None  # default: top of the ellipsoid
    patch_radius: float = 0.025
    patch_displacement: tuple[float, float, float] = (-0.009, 0.009, -0.007)
    mu: float = 1006.712
    kappa: float = 50000.0
    rho: float = 1060.0
    ramp: float = 1.0
    t_end: float = 3.0
    safety: float = 0.8
    alpha: Optional[float] = None
    threads: int = 1

    def material(self) -> NeoHookean:
        return NeoHookean(self.mu, self.kappa, self.rho)

    def centre(self) -> np.ndarray:
        if self.patch_centre is not None:
            return np.asarray(self.patch_centre, dtype=float)
        return np.array([0.0, 0.0, self.semi_axes[2]])


@dataclass
class DemoResult:
    mesh: Mesh
    bc: BoundaryConditions
    fields: dict[str, np.ndarray]
    runs: dict[str, RunResult]
    patch: np.ndarray
    base: np.ndarray
    rmse: Optional[float]
    histogram: Optional[Histogram]
    dt: float
    alpha: float

    def report(self) -> str:
        lines = [
            "demo-brain report",
            f"nodes {self.mesh.n_nodes}",
            f"elements {self.mesh.n_elements} {self.mesh.kind.value}",
            f"dofs {self.mesh.n_dofs}",
            f"patch_nodes {len(self.patch)}",
            f"base_nodes {len(self.base)}",
            f"dt {self.dt!r}",
            f"alpha {self.alpha!r}",
        ]
        for e, r in self.runs.items():
            lines.append(f"{e}.steps {r.steps}")
            lines.append(f"{e}.total_s {r.total_seconds:.6f}")
            lines.append(f"{e}.mean_step_s {r.mean_step_seconds:.9f}")
            lines.append(f"{e}.max_abs_u {float(np.abs(r.U).max())!r}")
        if len(self.runs) == 2:
            a, b = (self.runs[e] for e in ENGINES)
            lines.append(f"ratio {a.mean_step_seconds / b.mean_step_seconds:.4f}")
        if self.rmse is not None:
            lines.append(f"rmse {self.rmse!r}")
        if self.histogram is not None:
            lines.append("nre_histogram")
            lines.extend("  " + ln for ln in self.histogram.lines())
        return "\n".join(lines) + "\n"


def ellipsoid_mesh(semi_axes, spacing: float) -> Mesh:
    """T4 mesh of the grid cells whose centroids fall inside the ellipsoid.

    The surface is stair-stepped; every tetrahedron comes from the regular
    six-way cell split so none is degenerate.
    """
    semi = np.asarray(semi_axes, dtype=float)
    div = np.maximum(np.ceil(2.0 * semi / spacing).astype(int), 1)
    box = generate_box(2.0 * semi, tuple(int(d) for d in div), "T4", origin=tuple(-semi))
    cells = box.elements.reshape(-1, 6, 4)
    # the six tets of a cell reference its corners symmetrically, so this is the cell centre
    centroid = box.nodes[cells.reshape(len(cells), -1)].mean(axis=1)
    inside = np.sum((centroid / semi) ** 2, axis=1) <= 1.0
    elements = cells[inside].reshape(-1, 4)
    used = np.unique(elements)
    remap = np.full(box.n_nodes, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return Mesh(box.nodes[used], remap[elements], "T4")


def demo_problem(spec: DemoSpec, mesh: Optional[Mesh] = None):
    """Mesh, boundary conditions and the (patch, base) node sets."""
    mesh = ellipsoid_mesh(spec.semi_axes, spec.spacing) if mesh is None else mesh
    z = mesh.nodes[:, 2]
    base = np.flatnonzero(z <= z.min() + spec.base_fraction * (z.max() - z.min()) + 1e-12)
    dist = np.linalg.norm(mesh.nodes - spec.centre(), axis=1)
    patch = np.flatnonzero(dist <= spec.patch_radius)
    if patch.size == 0:
        raise ValueError("displacement patch selects no nodes")
    if np.intersect1d(patch, base).size:
        raise ValueError("displacement patch overlaps the fixed base")
    nodes = tuple(int(n) for n in patch)
    presc = tuple(PrescribedDisplacement(nodes, axis, float(spec.patch_displacement[axis]), spec.ramp) for axis in range(3))
    return mesh, BoundaryConditions(fix_nodes(base), presc), patch, base


def run_demo(spec: DemoSpec = DemoSpec(), engines=ENGINES, field_path=None, report_path=None,
             mesh: Optional[Mesh] = None) -> DemoResult:
    mesh, bc, patch, base = demo_problem(spec, mesh)
    material = spec.material()
    dt = spec.safety * critical_dt(mesh, material)
    alpha = relaxation_damping(mesh, material) if spec.alpha is None else spec.alpha
    n = steps_for(spec.t_end, dt)
    runs = {}
    for engine in engines:
        sim = Simulation(mesh, material, bc, dt, alpha, engine=engine, threads=spec.threads)
        runs[engine] = sim.run(n_steps=n)
    fields = {e: r.U for e, r in runs.items()}
    err, hist = None, None
    if len(runs) == 2:
        a, b = (fields[e] for e in ENGINES)
        err = rmse(a, b)
        if np.ptp(b) > 0:
            hist = nre_histogram(a, b)
    result = DemoResult(mesh, bc, fields, runs, patch, base, err, hist, dt, alpha)
    if field_path is not None:
        with open(field_path, "w", encoding="utf-8") as fh:
            fh.write(export_field(mesh, fields[engines[0]]))
    if report_path is not None:
        with open(report_path, "w", encoding="utf-8") as fh:
            fh.write(result.report())
    return result
