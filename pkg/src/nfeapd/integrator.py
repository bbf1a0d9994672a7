"""Explicit central-difference time stepping with per-dof boundary
conditions."""

from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .force import compute_force, damage_fields
from .material import RnpModel, wave_speeds

log = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e6


class DivergenceError(RuntimeError):
    def __init__(self, msg, step=None, node=None, result=None):
        super().__init__(msg)
        self.step = step
        self.node = node
        self.result = result


class BoundaryConditionError(ValueError):
    pass


# --------------------------------------------------------------------------
# time functions


@dataclass(frozen=True)
class TimeFunction:
    """Scalar function of time with a closed-form running integral.

    ``constant``: ``a``; ``linear``: ``a*t``; ``sin``: ``a*sin(2 pi f t + p)``.
    """

    kind: str = "constant"
    a: float = 0.0
    f: float = 1.0
    p: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "linear", "sin"):
            raise ValueError(f"unknown time function {self.kind!r}")

    def value(self, t):
        if self.kind == "constant":
            return self.a
        if self.kind == "linear":
            return self.a * t
        return self.a * math.sin(2 * math.pi * self.f * t + self.p)

    def integral(self, t):
        """``int_0^t value(s) ds``."""
        if self.kind == "constant":
            return self.a * t
        if self.kind == "linear":
            return 0.5 * self.a * t * t
        w = 2 * math.pi * self.f
        return self.a * (math.cos(self.p) - math.cos(w * t + self.p)) / w

    def to_dict(self):
        d = {"type": self.kind, "a": self.a}
        if self.kind == "sin":
            d.update(f=self.f, p=self.p)
        return d

    @classmethod
    def from_spec(cls, spec):
        if isinstance(spec, TimeFunction):
            return spec
        if isinstance(spec, (int, float)):
            return cls("constant", float(spec))
        spec = dict(spec)
        kind = spec.pop("type", "constant")
        return cls(kind, **{k: float(v) for k, v in spec.items()})


# --------------------------------------------------------------------------
# boundary conditions and loads


@dataclass(frozen=True)
class Box:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, pts, tol=0.0):
        pts = np.asarray(pts)
        return ((pts[:, 0] >= self.xmin - tol) & (pts[:, 0] <= self.xmax + tol)
                & (pts[:, 1] >= self.ymin - tol) & (pts[:, 1] <= self.ymax + tol))

    def to_list(self):
        return [self.xmin, self.ymin, self.xmax, self.ymax]


_DOFS = {"x": (0,), "y": (1,), "both": (0, 1)}
_BC_KINDS = ("fixed", "displacement", "velocity")


@dataclass(frozen=True)
class BoundaryCondition:
    """Prescribed motion of the selected dofs of all nodes in ``region``.

    ``fixed`` holds the dofs at zero, ``displacement`` sets them to
    ``value(t)``, and ``velocity`` moves them by ``int_0^t value``
    from their initial position.
    """

    region: Box
    dofs: str = "both"
    kind: str = "fixed"
    value: TimeFunction = TimeFunction()
    name: str = ""

    def __post_init__(self):
        if self.dofs not in _DOFS:
            raise BoundaryConditionError(f"dofs must be one of {sorted(_DOFS)}")
        if self.kind not in _BC_KINDS:
            raise BoundaryConditionError(f"kind must be one of {_BC_KINDS}")
        object.__setattr__(self, "value", TimeFunction.from_spec(self.value))

    def select(self, nodes, tol):
        return np.flatnonzero(self.region.contains(nodes, tol))

    def displacement(self, t, base):
        if self.kind == "fixed":
            return np.zeros_like(base)
        if self.kind == "displacement":
            return np.full_like(base, self.value.value(t))
        return base + self.value.integral(t)


class Constraints:
    """Boundary conditions resolved to node ids on a particular mesh."""

    def __init__(self, bcs: Sequence[BoundaryCondition], nodes, u0=None, tol=None):
        nodes = np.asarray(nodes)
        if tol is None:
            span = np.ptp(nodes, axis=0).max() if len(nodes) else 1.0
            tol = 1e-9 * span
        u0 = np.zeros_like(nodes) if u0 is None else np.asarray(u0, dtype=float)
        self.entries = []
        self.mask = np.zeros(nodes.shape, dtype=bool)
        for k, bc in enumerate(bcs):
            ids = bc.select(nodes, tol)
            if ids.size == 0:
                label = bc.name or f"#{k}"
                raise BoundaryConditionError(
                    f"boundary condition {label} selects no nodes (region {bc.region.to_list()})")
            for d in _DOFS[bc.dofs]:
                self.entries.append((bc, ids, d, u0[ids, d].copy()))
                self.mask[ids, d] = True

    def apply(self, U, t):
        for bc, ids, d, base in self.entries:
            U[ids, d] = bc.displacement(t, base)
        return U

    def counts(self):
        return [(bc.name, len(ids), d) for bc, ids, d, _ in self.entries]


@dataclass(frozen=True)
class BodyForce:
    """Body force per unit volume ``direction * magnitude(t) * profile(x)``
    on nodes inside ``region`` (everywhere when ``region`` is None).

    ``profile`` is ``uniform`` or a ``tent`` in x peaked at ``center``.
    """

    direction: tuple = (0.0, 0.0)
    magnitude: TimeFunction = TimeFunction()
    region: Optional[Box] = None
    profile: str = "uniform"
    center: float = 0.0
    half_width: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "magnitude", TimeFunction.from_spec(self.magnitude))
        if self.profile not in ("uniform", "tent"):
            raise ValueError(f"unknown load profile {self.profile!r}")

    @property
    def is_zero(self):
        return (self.direction[0] == 0 and self.direction[1] == 0) or (
            self.magnitude.kind != "sin" and self.magnitude.a == 0)

    def evaluate(self, nodes, t):
        out = np.zeros_like(nodes)
        if self.is_zero:
            return out
        mask = np.ones(len(nodes), bool) if self.region is None else self.region.contains(nodes, 1e-12)
        w = np.ones(len(nodes))
        if self.profile == "tent":
            w = np.clip(1.0 - np.abs(nodes[:, 0] - self.center) / self.half_width, 0.0, None)
        s = self.magnitude.value(t) * w * mask
        out[:, 0] = self.direction[0] * s
        out[:, 1] = self.direction[1] * s
        return out


NO_BODY_FORCE = BodyForce()


# --------------------------------------------------------------------------
# state and stepping


@dataclass
class SimState:
    U: np.ndarray
    U_prev: np.ndarray
    V: np.ndarray
    F: np.ndarray
    k: int
    dt: float

    @property
    def t(self):
        return self.k * self.dt

    @classmethod
    def initial(cls, u0, v0, dt):
        u0 = np.array(u0, dtype=float)
        return cls(u0, u0.copy(), np.array(v0, dtype=float), np.zeros_like(u0), 0, float(dt))

    def time_reversed(self):
        """State that retraces the trajectory backwards.

        Swapping current and previous displacement is exact for the
        central-difference recurrence.
        """
        return replace(self, U=self.U_prev.copy(), U_prev=self.U.copy(),
                       V=(self.U_prev - self.U) / self.dt)


def _body(b, nodes, t, shape):
    if b is None:
        return np.zeros(shape)
    if callable(b) and not isinstance(b, BodyForce):
        return np.broadcast_to(np.asarray(b(nodes, t), dtype=float), shape)
    return b.evaluate(nodes, t)


def step_first(state, force_fn, b, u0, v0, rho, constraints=None, nodes=None):
    """First step from the initial data (half force, initial velocity)."""
    if not rho > 0:
        raise ValueError("density must be positive")
    if state.k != 0:
        raise ValueError("step_first needs a state at k = 0")
    dt = state.dt
    U0 = np.asarray(u0, dtype=float)
    F = force_fn(U0)
    a = (F + _body(b, nodes, 0.0, U0.shape)) / rho
    U1 = 0.5 * dt * dt * a + dt * np.asarray(v0, dtype=float) + U0
    if constraints is not None:
        constraints.apply(U1, dt)
    new = SimState(U1, U0.copy(), (U1 - U0) / dt, F, 1, dt)
    _check_finite(new, None)
    return new


def step(state, force_fn, b, rho, constraints=None, nodes=None, limit=None):
    """One step ``k -> k+1``:
    ``U += dt V + dt^2 (F + b)/rho`` on free dofs, prescribed values on the
    rest, then ``V = (U_new - U)/dt``."""
    if state.k < 1:
        raise ValueError("use step_first for the first step")
    dt = state.dt
    U = state.U
    F = force_fn(U)
    U1 = U + dt * state.V + dt * dt * (F + _body(b, nodes, state.t, U.shape)) / rho
    if constraints is not None:
        constraints.apply(U1, (state.k + 1) * dt)
    new = SimState(U1, U, (U1 - U) / dt, F, state.k + 1, dt)
    _check_finite(new, limit)
    return new


def _check_finite(state, limit):
    U = state.U
    bad = ~np.isfinite(U)
    if limit is not None:
        bad |= np.abs(U) > limit
    if bad.any():
        node = int(np.flatnonzero(bad.any(axis=1))[0])
        raise DivergenceError(f"solution diverged at step {state.k} (t={state.t:g}), node {node}",
                              step=state.k, node=node)


def stability_hint(model, h, safety=0.2):
    """Advisory time step ``safety * h / c_L``."""
    if isinstance(model, RnpModel):
        c_l = wave_speeds(model.E, model.nu, model.rho)[0]
    else:
        c_l = _pmb_wave_speed(model)
    return safety * h / c_l


def _pmb_wave_speed(model):
    # longitudinal speed of the linearized PMB material with J(r) = 1 - r:
    # lambda + 2 mu = (3 pi / 8) * c * eps^3 * M_J
    from .material import moment_MJ
    modulus = 3 * math.pi / 8 * model.c_pmb * model.horizon ** 3 * moment_MJ(model.influence)
    return math.sqrt(modulus / model.rho)


# --------------------------------------------------------------------------
# whole runs


@dataclass
class Snapshot:
    time: float
    step: int
    U: np.ndarray
    V: np.ndarray
    Z: np.ndarray
    phi: np.ndarray


@dataclass
class RunResult:
    snapshots: list = field(default_factory=list)
    series: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


@dataclass
class Simulation:
    """An assembled problem ready to integrate."""

    mesh: object
    table: object
    model: object
    bcs: Sequence[BoundaryCondition]
    dt: float
    t_final: float
    dt_out: float
    body_force: BodyForce = NO_BODY_FORCE
    u0: Optional[np.ndarray] = None
    v0: Optional[np.ndarray] = None
    name: str = "sim"

    def force_fn(self):
        buf = np.empty((self.mesh.n_nodes, 2))

        def f(U):
            return compute_force(self.mesh, self.table, self.model, U, out=buf).copy()
        return f


def output_steps(dt, t_final, dt_out):
    n_steps = int(round(t_final / dt))
    if abs(n_steps * dt - t_final) > 1e-9 * t_final:
        n_steps = int(math.ceil(t_final / dt - 1e-9))
    every = max(int(round(dt_out / dt)), 1)
    return n_steps, every


def run(sim, on_snapshot: Optional[Callable] = None, keep_snapshots=True, progress_every=0):
    """Integrate ``sim`` (a :class:`Simulation` or a scenario) to its final
    time, taking snapshots every ``dt_out``."""
    if not isinstance(sim, Simulation):
        from .scenarios import assemble
        sim = assemble(sim)
    mesh, table, model = sim.mesh, sim.table, sim.model
    nodes = mesh.nodes
    N = mesh.n_nodes
    u0 = np.zeros((N, 2)) if sim.u0 is None else np.asarray(sim.u0, dtype=float)
    v0 = np.zeros((N, 2)) if sim.v0 is None else np.asarray(sim.v0, dtype=float)
    constraints = Constraints(sim.bcs, nodes, u0)
    n_steps, every = output_steps(sim.dt, sim.t_final, sim.dt_out)
    limit = DIVERGENCE_FACTOR * mesh.diameter
    force_fn = sim.force_fn()
    b = None if sim.body_force.is_zero else sim.body_force
    area = mesh.nodal_areas()

    result = RunResult(series={"t": [], "max_speed": [], "kinetic": [], "max_Z": []})
    wall0 = _time.perf_counter()

    def snap(state):
        Z, phi = damage_fields(table, model, state.U)
        s = Snapshot(state.t, state.k, state.U.copy(), state.V.copy(), Z, phi)
        speed = np.hypot(state.V[:, 0], state.V[:, 1])
        result.series["t"].append(state.t)
        result.series["max_speed"].append(float(speed.max()))
        result.series["kinetic"].append(float(0.5 * _rho(model) * np.sum(area * speed ** 2)))
        result.series["max_Z"].append(float(Z.max()) if len(Z) else 0.0)
        if keep_snapshots:
            result.snapshots.append(s)
        if on_snapshot is not None:
            on_snapshot(s)
        if progress_every:
            log.info("step %d t=%.6g max|V|=%.4g max Z=%.4g", state.k, state.t,
                     result.series["max_speed"][-1], result.series["max_Z"][-1])

    state = SimState.initial(u0, v0, sim.dt)
    constraints.apply(state.U, 0.0)
    state.U_prev = state.U.copy()
    snap(state)
    try:
        for k in range(n_steps):
            if k == 0:
                state = step_first(state, force_fn, b, state.U, v0, _rho(model), constraints, nodes)
            else:
                state = step(state, force_fn, b, _rho(model), constraints, nodes, limit)
            if state.k % every == 0 or state.k == n_steps:
                snap(state)
            elif progress_every and state.k % progress_every == 0:
                log.info("step %d t=%.6g max|V|=%.4g", state.k, state.t,
                         float(np.abs(state.V).max()))
    except DivergenceError as exc:
        result.summary = _summary(result, wall0, state, diverged=True)
        exc.result = result
        raise
    result.summary = _summary(result, wall0, state)
    result.final_state = state
    return result


def _rho(model):
    return model.rho


def _summary(result, wall0, state, diverged=False):
    s = result.series
    return {
        "wall_time": _time.perf_counter() - wall0,
        "steps": state.k,
        "t_final": state.t,
        "max_Z": max(s["max_Z"]) if s["max_Z"] else 0.0,
        "kinetic_final": s["kinetic"][-1] if s["kinetic"] else 0.0,
        "max_abs_U": float(np.abs(state.U).max()),
        "diverged": diverged,
    }
