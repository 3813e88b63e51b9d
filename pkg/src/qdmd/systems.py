"""Reference dynamical systems and a fixed-step RK4 integrator.

Two nonlinear 2-state benchmarks are built in: a pendulum with a small
negative damping term (slowly growing oscillation, so snapshots are not
trapped on one invariant circle) and the Van der Pol oscillator (limit
cycle). Arbitrary linear systems xdot = A x are supported for oracle
tests. Integration is classical Runge-Kutta 4 with a fixed number of
substeps per recorded sample; no adaptive stepping, so trajectories are
bit-reproducible across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError, ShapeError

__all__ = [
    "SystemSpec",
    "TrajectoryConfig",
    "pendulum",
    "van_der_pol",
    "linear_system",
    "vector_field",
    "simulate",
]

_KINDS = ("pendulum", "van_der_pol", "linear")


@dataclass(frozen=True)
class SystemSpec:
    """One of the supported right-hand sides.

    ``matrix`` is only used by the linear kind. Use the factory
    functions below instead of constructing this directly.
    """

    kind: str
    matrix: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown system kind {self.kind!r}")
        if self.kind == "linear":
            a = np.asarray(self.matrix, dtype=float)
            if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
                raise ConfigError("linear system needs a square matrix")
            if not np.all(np.isfinite(a)):
                raise ConfigError("linear system matrix must be finite")

    @property
    def dim(self) -> int:
        if self.kind == "linear":
            return len(self.matrix)
        return 2

    @property
    def default_state(self) -> tuple:
        if self.kind == "pendulum":
            return (1.0, 0.0)
        if self.kind == "van_der_pol":
            return (0.1, 0.0)
        return tuple(0.0 for _ in range(self.dim))


def pendulum() -> SystemSpec:
    """Pendulum with slight negative damping: x1' = x2, x2' = 0.01 x2 - sin x1."""
    return SystemSpec(kind="pendulum")


def van_der_pol() -> SystemSpec:
    """Van der Pol oscillator: x1' = x2, x2' = (1 - x1**2) x2 - x1."""
    return SystemSpec(kind="van_der_pol")


def linear_system(a) -> SystemSpec:
    """Linear system x' = A x for a square matrix A."""
    a = np.asarray(a, dtype=float)
    return SystemSpec(kind="linear", matrix=tuple(map(tuple, a)))


@dataclass(frozen=True)
class TrajectoryConfig:
    """Sampling plan for one simulated trajectory.

    ``duration`` is in the same time unit as ``dt``; the trajectory has
    floor(duration / dt) + 1 samples including the initial state. Each
    recorded step is integrated with ``substeps`` internal RK4 steps.
    ``x0`` of None means the system default initial state.
    """

    x0: tuple | None = None
    dt: float = 0.1
    duration: float = 10.0
    substeps: int = 10

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0.0):
            raise ConfigError(f"dt must be positive and finite, got {self.dt}")
        if not (np.isfinite(self.duration) and self.duration >= 0.0):
            raise ConfigError(f"duration must be non-negative, got {self.duration}")
        if not isinstance(self.substeps, (int, np.integer)) or self.substeps < 1:
            raise ConfigError(f"substeps must be a positive integer, got {self.substeps!r}")
        if self.x0 is not None:
            x0 = tuple(float(v) for v in self.x0)
            if not all(math.isfinite(v) for v in x0):
                raise ConfigError("initial state must be finite")
            object.__setattr__(self, "x0", x0)

    @property
    def samples(self) -> int:
        # small slack so durations that are exact multiples of dt in
        # decimal do not lose the last sample to binary rounding
        return int(math.floor(self.duration / self.dt + 1e-9)) + 1


def vector_field(spec: SystemSpec, x) -> np.ndarray:
    """Right-hand side of the ODE at state x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dim,):
        raise ShapeError(f"state must have shape ({spec.dim},), got {x.shape}")
    if spec.kind == "pendulum":
        return np.array([x[1], 0.01 * x[1] - math.sin(x[0])])
    if spec.kind == "van_der_pol":
        return np.array([x[1], (1.0 - x[0] ** 2) * x[1] - x[0]])
    return np.asarray(spec.matrix, dtype=float) @ x


def _simulate_2d(f, x0, dt, steps, substeps):
    # scalar arithmetic beats numpy by ~10x for 2-state systems, and the
    # long benchmark runs live here
    h = dt / substeps
    x1, x2 = float(x0[0]), float(x0[1])
    out = np.empty((2, steps + 1))
    out[0, 0] = x1
    out[1, 0] = x2
    for k in range(1, steps + 1):
        for _ in range(substeps):
            a1, a2 = f(x1, x2)
            b1, b2 = f(x1 + 0.5 * h * a1, x2 + 0.5 * h * a2)
            c1, c2 = f(x1 + 0.5 * h * b1, x2 + 0.5 * h * b2)
            d1, d2 = f(x1 + h * c1, x2 + h * c2)
            x1 += h * (a1 + 2.0 * b1 + 2.0 * c1 + d1) / 6.0
            x2 += h * (a2 + 2.0 * b2 + 2.0 * c2 + d2) / 6.0
        if not (math.isfinite(x1) and math.isfinite(x2)):
            raise DivergenceError(
                f"state became non-finite at t={k * dt:.6g}", time=k * dt)
        out[0, k] = x1
        out[1, k] = x2
    return out


def _simulate_linear(a, x0, dt, steps, substeps):
    h = dt / substeps
    x = np.asarray(x0, dtype=float).copy()
    out = np.empty((x.size, steps + 1))
    out[:, 0] = x
    # overflow is handled by the divergence check below, not by numpy
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, steps + 1):
            for _ in range(substeps):
                k1 = a @ x
                k2 = a @ (x + 0.5 * h * k1)
                k3 = a @ (x + 0.5 * h * k2)
                k4 = a @ (x + h * k3)
                x = x + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            if not np.all(np.isfinite(x)):
                raise DivergenceError(
                    f"state became non-finite at t={k * dt:.6g}", time=k * dt)
            out[:, k] = x
    return out


def simulate(spec: SystemSpec, cfg: TrajectoryConfig) -> np.ndarray:
    """Integrate the system and return dim x (floor(duration/dt)+1) samples.

    Column k holds the state at time k*dt; column 0 is the initial
    state. Raises DivergenceError (carrying the offending time) if the
    state stops being finite.
    """
    x0 = cfg.x0 if cfg.x0 is not None else spec.default_state
    if len(x0) != spec.dim:
        raise ShapeError(
            f"initial state has {len(x0)} entries, system has dimension {spec.dim}")
    steps = cfg.samples - 1
    if spec.kind == "pendulum":
        def f(x1, x2):
            return x2, 0.01 * x2 - math.sin(x1)
        return _simulate_2d(f, x0, cfg.dt, steps, cfg.substeps)
    if spec.kind == "van_der_pol":
        def f(x1, x2):
            return x2, (1.0 - x1 * x1) * x2 - x1
        return _simulate_2d(f, x0, cfg.dt, steps, cfg.substeps)
    a = np.asarray(spec.matrix, dtype=float)
    return _simulate_linear(a, x0, cfg.dt, steps, cfg.substeps)
