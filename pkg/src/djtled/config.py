"""Run configuration: ``[section]`` / ``key = value`` files parsed with configparser.

Example::

    [mesh]
    generate = box            # or: file = brain.mesh
    extent = 0.1 0.1 0.1
    divisions = 4 4 4
    kind = T4

    [material]
    model = NH
    mu = 6567
    kappa = 326210
    rho = 1060

    [bc]
    fixed = z min             # one record per line: plane-axis where [dof axes]
    prescribed = z max z 0.001 0.05   # plane-axis where dof-axis target ramp

    [time]
    dt = auto                 # or seconds
    safety = 0.8
    t_end = 0.6
    alpha = relax             # or 1/s

    [engine]
    name = both               # djtled | tled | both
    threads = 1               # or auto

    [output]
    field = out.vtk
    report = out.txt

Relative paths are resolved against the directory of the configuration file.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .assembly import ENGINES, available_threads
from .errors import ConfigError, MeshError
from .materials import Material, MooneyRivlin, NeoHookean, Orthotropic, TransverselyIsotropic
from .mesh import AXES, BoundaryConditions, Mesh, PrescribedDisplacement, fix_nodes, generate_box, nodes_on_plane, read_mesh
from .precompute import critical_dt
from .solver import PRECISIONS, relaxation_damping

SECTIONS = {
    "mesh": {"file", "generate", "extent", "divisions", "kind", "origin"},
    "material": {"model", "mu", "kappa", "rho", "eta_a", "eta_b", "a", "b", "c10", "c01"},
    "bc": {"fixed", "prescribed"},
    "time": {"dt", "safety", "t_end", "alpha"},
    "engine": {"name", "threads", "precision", "c_hg", "on_inversion", "on_unstable"},
    "output": {"field", "report", "stride"},
    "bench": {"sizes", "kinds", "materials", "steps", "warmup", "threads", "csv"},
}
REQUIRED = ("mesh", "material", "time")

_MATERIAL_KEYS = {
    "NH": {"mu", "kappa"},
    "TI": {"mu", "kappa", "eta_a", "a"},
    "OT": {"mu", "kappa", "eta_a", "eta_b", "a", "b"},
    "MR": {"c10", "c01", "kappa"},
}


@dataclass(frozen=True)
class FixedRecord:
    plane_axis: int
    where: str | float
    dofs: tuple[int, ...]


@dataclass(frozen=True)
class PrescribedRecord:
    plane_axis: int
    where: str | float
    dof: int
    target: float
    ramp: float


@dataclass(frozen=True)
class BenchConfig:
    sizes: tuple[int, ...] = (4, 8, 12, 16)
    kinds: tuple[str, ...] = ("T4", "H8")
    materials: tuple[str, ...] = ("NH", "TI", "OT", "MR")
    steps: int = 1000
    warmup: int = 100
    threads: Optional[tuple[int, ...]] = None  # default: 1 and every available thread
    csv: Optional[Path] = None


@dataclass(frozen=True)
class RunConfig:
    mesh: Mesh
    material: Material
    fixed: tuple[FixedRecord, ...]
    prescribed: tuple[PrescribedRecord, ...]
    dt: Optional[float]
    safety: float
    t_end: float
    alpha: Optional[float]
    engine: str = "djtled"
    threads: int = 1
    precision: str = "double"
    c_hg: float = 0.1
    on_inversion: str = "abort"
    on_unstable: str = "warn"
    field_path: Optional[Path] = None
    report_path: Optional[Path] = None
    stride: int = 0
    bench: BenchConfig = field(default_factory=BenchConfig)
    mesh_spec: dict = field(default_factory=dict)

    def boundary_conditions(self, mesh: Optional[Mesh] = None) -> BoundaryConditions:
        mesh = self.mesh if mesh is None else mesh
        fixed: set = set()
        for rec in self.fixed:
            nodes = _select(mesh, rec.plane_axis, rec.where)
            fixed |= fix_nodes(nodes, rec.dofs)
        presc = []
        for rec in self.prescribed:
            nodes = _select(mesh, rec.plane_axis, rec.where)
            presc.append(PrescribedDisplacement(tuple(int(n) for n in nodes), rec.dof, rec.target, rec.ramp))
        # a prescribed DOF wins over a fixed one on shared edges
        taken = {(n, r.axis) for r in presc for n in r.nodes}
        return BoundaryConditions(frozenset(fixed - taken), tuple(presc))

    def time_step(self, mesh: Optional[Mesh] = None) -> float:
        if self.dt is not None:
            return self.dt
        return self.safety * critical_dt(self.mesh if mesh is None else mesh, self.material, self.c_hg)

    def damping(self, mesh: Optional[Mesh] = None) -> float:
        if self.alpha is not None:
            return self.alpha
        return relaxation_damping(self.mesh if mesh is None else mesh, self.material)

    def engines(self) -> tuple[str, ...]:
        return ENGINES if self.engine == "both" else (self.engine,)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _select(mesh: Mesh, axis: int, where) -> np.ndarray:
    nodes = nodes_on_plane(mesh, axis, where)
    if nodes.size == 0:
        raise ConfigError(f"no nodes on plane {'xyz'[axis]} = {where}")
    return nodes


def _floats(text: str, n: Optional[int], key: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{key}: expected numbers, got {text!r}") from None
    if n is not None and len(values) != n:
        raise ConfigError(f"{key}: expected {n} values, got {len(values)}")
    return values


def _float(text: str, key: str, positive: bool = False) -> float:
    (value,) = _floats(text, 1, key)
    if positive and not value > 0:
        raise ConfigError(f"{key} must be positive, got {value}")
    return value


def _int(text: str, key: str, minimum: int = 0) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if value < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {value}")
    return value


def _axis(token: str, key: str) -> int:
    if token not in AXES:
        raise ConfigError(f"{key}: axis must be x, y or z, got {token!r}")
    return AXES[token]


def _where(token: str, key: str):
    if token in ("min", "max"):
        return token
    return _float(token, key)


def _choice(text: str, options, key: str) -> str:
    if text not in options:
        raise ConfigError(f"{key} must be one of {', '.join(options)}, got {text!r}")
    return text


def parse_threads(text: str) -> int:
    if text == "auto":
        return available_threads()
    return _int(text, "threads", 1)


def _records(text: str) -> list[list[str]]:
    return [line.split() for line in text.splitlines() if line.strip()]


def _fixed(text: str) -> tuple[FixedRecord, ...]:
    out = []
    for tok in _records(text):
        if len(tok) not in (2, 3):
            raise ConfigError(f"bc.fixed: expected 'axis where [dofs]', got {' '.join(tok)!r}")
        dofs = tuple(_axis(c, "bc.fixed") for c in (tok[2] if len(tok) == 3 else "xyz"))
        out.append(FixedRecord(_axis(tok[0], "bc.fixed"), _where(tok[1], "bc.fixed"), dofs))
    return tuple(out)


def _prescribed(text: str) -> tuple[PrescribedRecord, ...]:
    out = []
    for tok in _records(text):
        if len(tok) != 5:
            raise ConfigError(f"bc.prescribed: expected 'axis where dof target ramp', got {' '.join(tok)!r}")
        out.append(PrescribedRecord(_axis(tok[0], "bc.prescribed"), _where(tok[1], "bc.prescribed"),
                                    _axis(tok[2], "bc.prescribed"), _float(tok[3], "bc.prescribed"),
                                    _float(tok[4], "bc.prescribed ramp", positive=True)))
    return tuple(out)


def _mesh(sec, base: Path) -> tuple[Mesh, dict]:
    if ("file" in sec) == ("generate" in sec):
        raise ConfigError("[mesh] needs exactly one of 'file' or 'generate'")
    if "file" in sec:
        extra = set(sec) - {"file"}
        if extra:
            raise ConfigError(f"[mesh] keys {sorted(extra)} do not apply to a mesh file")
        return read_mesh(base / sec["file"]), {"file": str(base / sec["file"])}
    if sec["generate"] != "box":
        raise ConfigError(f"mesh.generate: only 'box' is supported, got {sec['generate']!r}")
    for key in ("extent", "divisions", "kind"):
        if key not in sec:
            raise ConfigError(f"[mesh] generate = box needs '{key}'")
    extent = _floats(sec["extent"], 3, "mesh.extent")
    divisions = tuple(_int(v, "mesh.divisions", 1) for v in sec["divisions"].split())
    if len(divisions) != 3:
        raise ConfigError("mesh.divisions: expected 3 integers")
    kind = _choice(sec["kind"], ("T4", "H8"), "mesh.kind")
    origin = _floats(sec.get("origin", "0 0 0"), 3, "mesh.origin")
    spec = {"extent": extent, "divisions": divisions, "kind": kind, "origin": origin}
    try:
        return generate_box(extent, divisions, kind, origin), spec
    except ValueError as exc:
        raise ConfigError(f"[mesh] {exc}") from None


def _material(sec) -> Material:
    model = _choice(sec.get("model", "NH").upper(), tuple(_MATERIAL_KEYS), "material.model")
    required = _MATERIAL_KEYS[model]
    allowed = required | {"model", "rho"}
    missing = required - set(sec)
    if missing:
        raise ConfigError(f"[material] model {model} needs {sorted(missing)}")
    extra = set(sec) - allowed
    if extra:
        raise ConfigError(f"[material] keys {sorted(extra)} do not apply to model {model}")
    num = lambda k: _float(sec[k], f"material.{k}")  # noqa: E731
    vec = lambda k: _floats(sec[k], 3, f"material.{k}")  # noqa: E731
    rho = num("rho") if "rho" in sec else 1060.0
    try:
        if model == "NH":
            return NeoHookean(num("mu"), num("kappa"), rho)
        if model == "TI":
            return TransverselyIsotropic(num("mu"), num("eta_a"), num("kappa"), vec("a"), rho)
        if model == "OT":
            return Orthotropic(num("mu"), num("eta_a"), num("eta_b"), num("kappa"), vec("a"), vec("b"), rho)
        return MooneyRivlin(num("c10"), num("c01"), num("kappa"), rho)
    except ValueError as exc:
        raise ConfigError(f"[material] {exc}") from None


def _bench(sec, base: Path) -> BenchConfig:
    out = BenchConfig()
    if "sizes" in sec:
        out = replace(out, sizes=tuple(_int(v, "bench.sizes", 1) for v in sec["sizes"].split()))
    if "kinds" in sec:
        out = replace(out, kinds=tuple(_choice(k, ("T4", "H8"), "bench.kinds") for k in sec["kinds"].split()))
    if "materials" in sec:
        out = replace(out, materials=tuple(_choice(m.upper(), tuple(_MATERIAL_KEYS), "bench.materials")
                                           for m in sec["materials"].split()))
    if "steps" in sec:
        out = replace(out, steps=_int(sec["steps"], "bench.steps", 1))
    if "warmup" in sec:
        out = replace(out, warmup=_int(sec["warmup"], "bench.warmup"))
    if "threads" in sec:
        out = replace(out, threads=tuple(parse_threads(t) for t in sec["threads"].split()))
    if "csv" in sec:
        out = replace(out, csv=base / sec["csv"])
    return out


def _parser(text: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                       empty_lines_in_values=False)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from None
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        unknown = set(parser[name]) - SECTIONS[name]
        if unknown:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
    return parser


def parse_config(text: str, base: Path | str = ".") -> RunConfig:
    """Validate ``text`` completely and build a ``RunConfig``; raises ``ConfigError``."""
    base = Path(base)
    parser = _parser(text)
    for name in REQUIRED:
        if not parser.has_section(name):
            raise ConfigError(f"missing section [{name}]")
    get = lambda s: parser[s] if parser.has_section(s) else {}  # noqa: E731

    try:
        mesh, spec = _mesh(parser["mesh"], base)
    except MeshError as exc:
        raise ConfigError(f"[mesh] {exc}") from None
    material = _material(parser["material"])

    bc = get("bc")
    fixed = _fixed(bc.get("fixed", ""))
    prescribed = _prescribed(bc.get("prescribed", ""))

    tsec = parser["time"]
    if "t_end" not in tsec:
        raise ConfigError("[time] needs t_end")
    t_end = _float(tsec["t_end"], "time.t_end")
    if t_end < 0:
        raise ConfigError("time.t_end must be >= 0")
    dt_text = tsec.get("dt", "auto")
    dt = None if dt_text == "auto" else _float(dt_text, "time.dt", positive=True)
    safety = _float(tsec.get("safety", "0.8"), "time.safety")
    if not 0.0 < safety <= 1.0:
        raise ConfigError(f"time.safety must lie in (0, 1], got {safety}")
    alpha_text = tsec.get("alpha", "relax")
    alpha = None if alpha_text == "relax" else _float(alpha_text, "time.alpha")
    if alpha is not None and alpha < 0:
        raise ConfigError("time.alpha must be >= 0")

    esec = get("engine")
    engine = _choice(esec.get("name", "djtled"), ENGINES + ("both",), "engine.name")
    threads = parse_threads(esec.get("threads", "1"))
    precision = _choice(esec.get("precision", "double"), tuple(PRECISIONS), "engine.precision")
    c_hg = _float(esec.get("c_hg", "0.1"), "engine.c_hg")
    if c_hg < 0:
        raise ConfigError("engine.c_hg must be >= 0")
    on_inversion = _choice(esec.get("on_inversion", "abort"), ("abort", "report"), "engine.on_inversion")
    on_unstable = _choice(esec.get("on_unstable", "warn"), ("warn", "error", "ignore"), "engine.on_unstable")

    osec = get("output")
    field_path = base / osec["field"] if "field" in osec else None
    report_path = base / osec["report"] if "report" in osec else None
    stride = _int(osec.get("stride", "0"), "output.stride")

    cfg = RunConfig(mesh, material, fixed, prescribed, dt, safety, t_end, alpha, engine, threads, precision,
                    c_hg, on_inversion, on_unstable, field_path, report_path, stride,
                    _bench(get("bench"), base), spec)
    try:
        cfg.boundary_conditions()
    except ValueError as exc:
        raise ConfigError(f"[bc] {exc}") from None
    return cfg


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror or exc}") from None


def load_config(path: str | os.PathLike) -> RunConfig:
    path = Path(path)
    return parse_config(_read(path), path.parent)


def load_bench_config(path: str | os.PathLike) -> BenchConfig:
    """Only the ``[bench]`` section matters; other sections are checked for unknown keys."""
    path = Path(path)
    parser = _parser(_read(path))
    return _bench(parser["bench"] if parser.has_section("bench") else {}, path.parent)
