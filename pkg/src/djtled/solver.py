"""Explicit central-difference time stepping with lumped mass and mass-proportional damping."""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .assembly import ForceAssembler, update_parallel, update_serial
from .errors import DivergenceError, InversionError, StabilityError
from .materials import Material, youngs_modulus
from .mesh import BoundaryConditions, Mesh
from .precompute import critical_dt, lump_mass

log = logging.getLogger(__name__)

FREE, FIXED, PRESCRIBED = 0, 1, 2
PRECISIONS = {"double": np.float64, "single": np.float32}

# (step, t, max |u|, wall-clock seconds of that step)
ProgressHook = Callable[[int, float, float, float], None]


class StabilityWarning(RuntimeWarning):
    pass


@dataclass
class SimState:
    """Two-level displacement history plus the force accumulators, all shaped (N, 3)."""

    U_curr: np.ndarray
    U_prev: np.ndarray
    R_ext: np.ndarray
    F_int: np.ndarray
    masses: np.ndarray
    alpha: float
    t: float = 0.0
    step: int = 0

    @classmethod
    def at_rest(cls, masses: np.ndarray, alpha: float, R_ext: Optional[np.ndarray] = None,
                dtype=np.float64) -> "SimState":
        n = len(masses)
        zeros = lambda: np.zeros((n, 3), dtype=dtype)  # noqa: E731
        R = zeros() if R_ext is None else np.asarray(R_ext, dtype=dtype).reshape(n, 3).copy()
        return cls(zeros(), zeros(), R, zeros(), np.asarray(masses, dtype=np.float64), float(alpha))

    def kinetic_proxy(self, dt: float) -> float:
        """sum m |u_curr - u_prev|^2 / dt^2 (twice the kinetic energy of the backward velocity)."""
        v = (self.U_curr.astype(np.float64) - self.U_prev) / dt
        return float(np.sum(self.masses[:, None] * v * v))


@dataclass(frozen=True)
class ConstraintArrays:
    code: np.ndarray
    target: np.ndarray
    ramp: np.ndarray

    @classmethod
    def build(cls, bc: BoundaryConditions, n_nodes: int) -> "ConstraintArrays":
        code = np.zeros((n_nodes, 3), dtype=np.int8)
        target = np.zeros((n_nodes, 3))
        ramp = np.ones((n_nodes, 3))
        for node, axis in bc.fixed:
            code[node, axis] = FIXED
        for rec in bc.prescribed:
            nodes = np.asarray(rec.nodes, dtype=np.int64)
            code[nodes, rec.axis] = PRESCRIBED
            target[nodes, rec.axis] = rec.target
            ramp[nodes, rec.axis] = rec.ramp_time
        return cls(code, target, ramp)


@dataclass
class RunResult:
    U: np.ndarray
    steps: int
    dt: float
    t: float
    step_seconds: np.ndarray
    precompute_seconds: float
    inversions: dict = field(default_factory=dict)

    @property
    def total_seconds(self) -> float:
        return float(self.step_seconds.sum())

    @property
    def mean_step_seconds(self) -> float:
        return float(self.step_seconds.mean()) if len(self.step_seconds) else 0.0


def steps_for(t_end: float, dt: float) -> int:
    """Number of steps to reach ``t_end``; tolerant of t_end being a rounded multiple of dt."""
    if t_end < 0 or not dt > 0:
        raise ValueError(f"need t_end >= 0 and dt > 0, got {t_end}, {dt}")
    return int(math.ceil(t_end / dt - 1e-9))


def relaxation_damping(mesh: Mesh, material: Material) -> float:
    """Mass-proportional coefficient near critical for the slowest bar mode of the body.

    The slowest mode is estimated as a fixed-free bar over the longest extent,
    omega = (pi / 2) sqrt(E / rho) / L; alpha = 2 omega damps it critically.
    """
    lo, hi = mesh.bounds()
    L = float(np.max(hi - lo))
    omega = 0.5 * math.pi * math.sqrt(youngs_modulus(material) / material.rho) / L
    return 2.0 * omega


class Simulation:
    """One configured problem: mesh, material, constraints, engine and integrator state."""

    def __init__(self, mesh: Mesh, material: Material, bc: BoundaryConditions, dt: float, alpha: float,
                 engine: str = "djtled", c_hg: float = 0.1, threads: int = 1, precision: str = "double",
                 on_inversion: str = "abort", on_unstable: str = "warn", R_ext: Optional[np.ndarray] = None,
                 parallel: Optional[bool] = None):
        if precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {sorted(PRECISIONS)}")
        if on_inversion not in ("abort", "report"):
            raise ValueError("on_inversion must be 'abort' or 'report'")
        if on_unstable not in ("warn", "error", "ignore"):
            raise ValueError("on_unstable must be 'warn', 'error' or 'ignore'")
        if not dt > 0:
            raise ValueError(f"time step must be positive, got {dt}")
        if not alpha >= 0:
            raise ValueError(f"damping coefficient must be non-negative, got {alpha}")
        bc.check(mesh)
        self.mesh = mesh
        self.material = material
        self.bc = bc
        self.dt = float(dt)
        self.on_inversion = on_inversion
        self.dtype = PRECISIONS[precision]

        self.assembler = ForceAssembler(mesh, material, engine, c_hg, self.dtype, threads, parallel)
        self.critical_dt = critical_dt(mesh, material, c_hg)
        if self.dt > self.critical_dt:
            msg = f"time step {self.dt:.4g} s exceeds the critical step {self.critical_dt:.4g} s"
            if on_unstable == "error":
                raise StabilityError(msg)
            if on_unstable == "warn":
                warnings.warn(msg, StabilityWarning, stacklevel=2)
        masses = lump_mass(mesh, material.rho, self.assembler.V0)
        self.state = SimState.at_rest(masses, alpha, R_ext, self.dtype)
        self.constraints = ConstraintArrays.build(bc, mesh.n_nodes)
        self._next = np.zeros_like(self.state.U_curr)
        self._update = update_parallel if self.assembler.parallel else update_serial
        self.inversions: dict[int, int] = {}

    @property
    def engine(self) -> str:
        return self.assembler.engine

    def internal_forces(self, U: Optional[np.ndarray] = None) -> np.ndarray:
        U = self.state.U_curr if U is None else np.ascontiguousarray(np.asarray(U, dtype=self.dtype).reshape(-1, 3))
        F = np.empty_like(U)
        self.assembler(U, F)
        return F

    def step(self) -> None:
        s = self.state
        bad = self.assembler(s.U_curr, s.F_int)
        if bad >= 0:
            if self.on_inversion == "abort":
                raise InversionError(bad, s.step)
            for e in self.assembler.inverted_elements(s.U_curr):
                self.inversions.setdefault(int(e), s.step)
        t_next = (s.step + 1) * self.dt
        c = self.constraints
        nonfinite = self._update(self._next, s.U_curr, s.U_prev, s.F_int, s.R_ext, s.masses,
                                 c.code, c.target, c.ramp, t_next, self.dt, s.alpha)
        # rotate history: prev <- curr <- next, recycling the old prev buffer
        s.U_prev, s.U_curr, self._next = s.U_curr, self._next, s.U_prev
        s.step += 1
        s.t = t_next
        if nonfinite:
            raise DivergenceError(s.step)

    def run(self, t_end: Optional[float] = None, n_steps: Optional[int] = None,
            hook: Optional[ProgressHook] = None, stride: int = 1) -> RunResult:
        if (t_end is None) == (n_steps is None):
            raise ValueError("give exactly one of t_end or n_steps")
        n = steps_for(t_end, self.dt) if n_steps is None else int(n_steps)
        timings = np.empty(n)
        clock = time.perf_counter
        for k in range(n):
            start = clock()
            self.step()
            timings[k] = clock() - start
            if hook is not None and (self.state.step % stride == 0 or k == n - 1):
                hook(self.state.step, self.state.t, float(np.abs(self.state.U_curr).max()), timings[k])
        if self.inversions:
            log.warning("%d element(s) inverted during the run", len(self.inversions))
        return RunResult(self.state.U_curr.copy(), n, self.dt, self.state.t, timings,
                         self.assembler.precompute_seconds, dict(self.inversions))


def step(state: SimState, assembler: ForceAssembler, bc: BoundaryConditions, dt: float) -> SimState:
    """Advance ``state`` by one step (in place) and return it; aborts on inversion."""
    bad = assembler(state.U_curr, state.F_int)
    if bad >= 0:
        raise InversionError(bad, state.step)
    c = ConstraintArrays.build(bc, len(state.masses))
    U_next = np.empty_like(state.U_curr)
    t_next = (state.step + 1) * dt
    nonfinite = update_serial(U_next, state.U_curr, state.U_prev, state.F_int, state.R_ext, state.masses,
                              c.code, c.target, c.ramp, t_next, dt, state.alpha)
    state.U_prev, state.U_curr = state.U_curr, U_next
    state.step += 1
    state.t = t_next
    if nonfinite:
        raise DivergenceError(state.step)
    return state


def run(mesh: Mesh, material: Material, bc: BoundaryConditions, dt: float, t_end: float, alpha: float,
        hook: Optional[ProgressHook] = None, **options) -> RunResult:
    """Build a ``Simulation`` and integrate to ``t_end``; ``options`` go to the constructor."""
    return Simulation(mesh, material, bc, dt, alpha, **options).run(t_end=t_end, hook=hook)
