"""Mesh data model, the plain-text mesh format, box generation and VTK export.

Mesh file layout (UTF-8)::

    djtled-mesh 1
    nodes N
    x y z            (N lines)
    elements T4|H8 M
    i0 i1 ...        (M lines, zero-based node indices)

Lines starting with ``#`` and blank lines are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .element import ElementKind, batch_jacobians, volume_factor
from .errors import MeshError

MAGIC = "djtled-mesh 1"

# Six tetrahedra around the 0-6 main diagonal of an H8-ordered cell.
_SIX_TETS = np.array(
    [
        [0, 1, 2, 6],
        [0, 2, 3, 6],
        [0, 3, 7, 6],
        [0, 7, 4, 6],
        [0, 4, 5, 6],
        [0, 5, 1, 6],
    ]
)


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    elements: np.ndarray
    kind: ElementKind

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        kind = ElementKind.parse(self.kind)
        if nodes.ndim != 2 or nodes.shape[1] != 3:
            raise MeshError(f"nodes must have shape (N, 3), got {nodes.shape}")
        if elements.ndim != 2 or elements.shape[1] != kind.nodes:
            raise MeshError(f"{kind.value} elements need {kind.nodes} indices, got shape {elements.shape}")
        n = len(nodes)
        bad = np.flatnonzero(((elements < 0) | (elements >= n)).any(axis=1))
        if bad.size:
            raise MeshError(f"node index out of range (mesh has {n} nodes)", element=int(bad[0]))
        if elements.size:
            _, det = batch_jacobians(nodes, elements, kind)
            bad = np.flatnonzero(~(det > 0.0))
            if bad.size:
                raise MeshError(
                    f"non-positive volume (det J0 = {det[bad[0]]:.6g}); check node ordering",
                    element=int(bad[0]),
                )
        nodes.setflags(write=False)
        elements.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "kind", kind)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_dofs(self) -> int:
        return 3 * len(self.nodes)

    def volumes(self) -> np.ndarray:
        _, det = batch_jacobians(self.nodes, self.elements, self.kind)
        return det * volume_factor(self.kind)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.nodes.min(axis=0), self.nodes.max(axis=0)

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (
            self.kind is other.kind
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.elements, other.elements)
        )

    __hash__ = None


def _content_lines(text: str):
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield number, line


def load_mesh(text: str) -> Mesh:
    """Parse mesh-file content. Raises MeshError naming the offending line or element."""
    lines = _content_lines(text)

    def take(what: str):
        try:
            return next(lines)
        except StopIteration:
            raise MeshError(f"unexpected end of file, expected {what}") from None

    number, line = take("header")
    if line != MAGIC:
        raise MeshError(f"expected header {MAGIC!r}, got {line!r}", line=number)

    number, line = take("'nodes N'")
    parts = line.split()
    if len(parts) != 2 or parts[0] != "nodes":
        raise MeshError(f"expected 'nodes N', got {line!r}", line=number)
    try:
        n_nodes = int(parts[1])
    except ValueError:
        raise MeshError(f"bad node count {parts[1]!r}", line=number) from None
    if n_nodes < 0:
        raise MeshError("negative node count", line=number)

    nodes = np.empty((n_nodes, 3))
    for i in range(n_nodes):
        number, line = take(f"node {i}")
        parts = line.split()
        if len(parts) != 3:
            raise MeshError(f"node {i}: expected 3 coordinates, got {len(parts)}", line=number)
        try:
            nodes[i] = [float(p) for p in parts]
        except ValueError:
            raise MeshError(f"node {i}: non-numeric coordinate in {line!r}", line=number) from None
        if not np.all(np.isfinite(nodes[i])):
            raise MeshError(f"node {i}: non-finite coordinate", line=number)

    number, line = take("'elements T4|H8 M'")
    parts = line.split()
    if len(parts) != 3 or parts[0] != "elements":
        raise MeshError(f"expected 'elements T4|H8 M', got {line!r}", line=number)
    try:
        kind = ElementKind.parse(parts[1])
        n_elem = int(parts[2])
    except ValueError as exc:
        raise MeshError(str(exc), line=number) from None

    elements = np.empty((n_elem, kind.nodes), dtype=np.int64)
    for e in range(n_elem):
        number, line = take(f"element {e}")
        parts = line.split()
        if len(parts) != kind.nodes:
            raise MeshError(f"expected {kind.nodes} node indices, got {len(parts)}", line=number, element=e)
        try:
            elements[e] = [int(p) for p in parts]
        except ValueError:
            raise MeshError(f"non-integer node index in {line!r}", line=number, element=e) from None

    extra = next(lines, None)
    if extra is not None:
        raise MeshError(f"trailing content {extra[1]!r}", line=extra[0])
    return Mesh(nodes, elements, kind)


def read_mesh(path: str | Path) -> Mesh:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MeshError(f"cannot read mesh file {path}: {exc.strerror or exc}") from None
    return load_mesh(text)


def render_mesh(mesh: Mesh) -> str:
    """Mesh-file text; ``repr`` floats make ``load_mesh`` round-trip bit-exactly."""
    out = [MAGIC, f"nodes {mesh.n_nodes}"]
    out.extend(" ".join(repr(float(c)) for c in node) for node in mesh.nodes)
    out.append(f"elements {mesh.kind.value} {mesh.n_elements}")
    out.extend(" ".join(str(int(i)) for i in elem) for elem in mesh.elements)
    return "\n".join(out) + "\n"


def generate_box(
    extent: Sequence[float],
    divisions: Sequence[int],
    kind: ElementKind | str,
    origin: Sequence[float] = (0.0, 0.0, 0.0),
) -> Mesh:
    """Structured box mesh on [origin, origin + extent].

    Nodes are numbered x-fastest. H8 gives one hexahedron per grid cell, T4
    splits every cell into six tetrahedra sharing the cell's main diagonal.
    """
    kind = ElementKind.parse(kind)
    extent = np.asarray(extent, dtype=float)
    if extent.shape != (3,) or not np.all(extent > 0):
        raise ValueError(f"extent must be three positive lengths, got {extent}")
    if len(divisions) != 3 or any(int(d) != d or d < 1 for d in divisions):
        raise ValueError(f"divisions must be three integers >= 1, got {divisions}")
    nx, ny, nz = (int(d) for d in divisions)

    axes = [origin[k] + np.linspace(0.0, extent[k], n + 1) for k, n in enumerate((nx, ny, nz))]
    zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    nodes = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])

    def nid(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    k, j, i = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    cells = np.column_stack(
        [
            nid(i, j, k),
            nid(i + 1, j, k),
            nid(i + 1, j + 1, k),
            nid(i, j + 1, k),
            nid(i, j, k + 1),
            nid(i + 1, j, k + 1),
            nid(i + 1, j + 1, k + 1),
            nid(i, j + 1, k + 1),
        ]
    )
    if kind is ElementKind.H8:
        elements = cells
    else:
        elements = cells[:, _SIX_TETS].reshape(-1, 4)
    return Mesh(nodes, elements, kind)


def export_field(mesh: Mesh, displacements: np.ndarray, name: str = "displacement") -> str:
    """Legacy ASCII VTK unstructured grid with a point vector field."""
    u = np.asarray(displacements, dtype=float)
    if u.ndim == 1:
        if u.size != mesh.n_dofs:
            raise ValueError(f"field has {u.size} values, mesh has {mesh.n_dofs} DOFs")
        u = u.reshape(-1, 3)
    if u.shape != (mesh.n_nodes, 3):
        raise ValueError(f"field shape {u.shape} does not match {mesh.n_nodes} nodes")

    n = mesh.kind.nodes
    out = [
        "# vtk DataFile Version 3.0",
        "djtled displacement field",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_nodes} double",
    ]
    out.extend(" ".join(repr(float(c)) for c in p) for p in mesh.nodes)
    out.append(f"CELLS {mesh.n_elements} {mesh.n_elements * (n + 1)}")
    out.extend(f"{n} " + " ".join(str(int(i)) for i in elem) for elem in mesh.elements)
    out.append(f"CELL_TYPES {mesh.n_elements}")
    out.extend([str(mesh.kind.vtk_cell_type)] * mesh.n_elements)
    out.append(f"POINT_DATA {mesh.n_nodes}")
    out.append(f"VECTORS {name} double")
    out.extend(" ".join(repr(float(c)) for c in row) for row in u)
    return "\n".join(out) + "\n"


def read_field(text: str) -> np.ndarray:
    """Point vectors back out of ``export_field`` output, shape (N, 3)."""
    lines = text.splitlines()
    for idx, line in enumerate(lines):
        if line.startswith("POINT_DATA"):
            count = int(line.split()[1])
            start = idx + 2
            return np.array([[float(v) for v in ln.split()] for ln in lines[start : start + count]])
    raise ValueError("no POINT_DATA section")


# --- boundary conditions -------------------------------------------------

AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class PrescribedDisplacement:
    nodes: tuple[int, ...]
    axis: int
    target: float
    ramp_time: float

    def value(self, t: float) -> float:
        return min(t / self.ramp_time, 1.0) * self.target


@dataclass(frozen=True)
class BoundaryConditions:
    fixed: frozenset[tuple[int, int]] = field(default_factory=frozenset)
    prescribed: tuple[PrescribedDisplacement, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "fixed", frozenset((int(n), int(a)) for n, a in self.fixed))
        object.__setattr__(self, "prescribed", tuple(self.prescribed))
        seen: set[tuple[int, int]] = set()
        for rec in self.prescribed:
            if not rec.ramp_time > 0:
                raise ValueError(f"ramp duration must be positive, got {rec.ramp_time}")
            if rec.axis not in (0, 1, 2):
                raise ValueError(f"bad axis {rec.axis}")
            for n in rec.nodes:
                key = (int(n), rec.axis)
                if key in self.fixed:
                    raise ValueError(f"DOF (node {n}, axis {rec.axis}) is both fixed and prescribed")
                if key in seen:
                    raise ValueError(f"DOF (node {n}, axis {rec.axis}) prescribed twice")
                seen.add(key)
        for n, a in self.fixed:
            if a not in (0, 1, 2):
                raise ValueError(f"bad axis {a}")

    def check(self, mesh: Mesh) -> None:
        dofs = [n for n, _ in self.fixed] + [n for rec in self.prescribed for n in rec.nodes]
        if dofs and (min(dofs) < 0 or max(dofs) >= mesh.n_nodes):
            raise ValueError("boundary condition references a node outside the mesh")


def fix_nodes(nodes: Iterable[int], axes: Iterable[int] = (0, 1, 2)) -> frozenset[tuple[int, int]]:
    axes = tuple(axes)
    return frozenset((int(n), a) for n in nodes for a in axes)


def nodes_on_plane(mesh: Mesh, axis: int | str, where: str | float = "min", tol: float | None = None) -> np.ndarray:
    """Indices of nodes whose ``axis`` coordinate lies on a plane.

    ``where`` is ``"min"``, ``"max"`` or a coordinate value; the default
    tolerance is 1e-9 of the mesh extent along that axis.
    """
    axis = AXES[axis] if isinstance(axis, str) else int(axis)
    coord = mesh.nodes[:, axis]
    lo, hi = coord.min(), coord.max()
    if where == "min":
        value = lo
    elif where == "max":
        value = hi
    else:
        value = float(where)
    if tol is None:
        tol = 1e-9 * max(hi - lo, np.finfo(float).tiny)
    return np.flatnonzero(np.abs(coord - value) <= tol)
