"""Explicit finite-volume integration of the truncated viscous system.

Continuity and the convective part of the momentum equation are in flux
form on exact shell volumes, upwinded on the sign of the face velocity.
Pressure and viscous terms use second-order central differences; the
walls at delta and b carry u = 0. Time stepping is SSP-RK2 with the field
recomputed at every stage.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .field import FieldSnapshot, compute_field, field_from_charge
from .model import DopingProfile, Params, RadialGrid, State
from .thermo import pressure, sound_speed, viscosities

logger = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "RunRecord",
    "SolverError",
    "rhs",
    "rhs_parts",
    "stable_dt",
    "step",
    "run",
    "total_mass",
    "radial_gradient",
    "lagrangian_consistency",
    "LagrangianResult",
]


class SolverError(RuntimeError):
    """State blow-up or step-size underflow; ``cell`` is the offending index if known."""

    def __init__(self, msg: str, cell: int | None = None, t: float | None = None):
        super().__init__(msg)
        self.cell = cell
        self.t = t


@dataclass
class SolverConfig:
    cfl: float = 0.5
    visc_safety: float = 0.5
    rho_floor: float | None = None
    t_end: float = 1.0
    output_every: int = 10
    # when set, snapshots are taken exactly at multiples of output_dt
    output_dt: float | None = None
    max_steps: int = 10_000_000

    def floor(self, params: Params) -> float:
        band = (params.beta * params.eps) ** 0.25
        f = band / 10.0 if self.rho_floor is None else self.rho_floor
        if not 0 < f < band:
            raise ValueError(f"rho_floor must lie in (0, {band}), got {f}")
        return f

    def validate(self) -> None:
        if not 0 < self.cfl <= 1 or not 0 < self.visc_safety <= 1:
            raise ValueError("cfl and visc_safety must lie in (0, 1]")
        if not self.t_end > 0 or self.output_every < 1:
            raise ValueError("t_end must be positive and output_every >= 1")


def total_mass(rho: np.ndarray, grid: RadialGrid) -> float:
    return float(np.dot(rho, grid.vol))


def radial_gradient(f: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Central differences inside, second-order one-sided at the ends."""
    return np.gradient(f, grid.h, edge_order=2)


def _wall_value(c0, c1):
    # linear extrapolation from the two nearest centres, kept positive
    return np.maximum(1.5 * c0 - 0.5 * c1, 0.5 * c0)


def rhs_parts(state: State, phir: np.ndarray, params: Params, grid: RadialGrid) -> dict:
    """Individual terms of the semi-discrete right-hand side.

    Keys: ``mass`` (continuity), ``convection``, ``pressure``, ``field`` and
    ``viscous`` (already multiplied by eps). Their momentum sum is the
    momentum right-hand side.
    """
    rho, m = state.rho, state.mom
    N, h, r = grid.N, grid.h, grid.r
    rf = grid.edges[1:-1]
    area = rf ** (N - 1)
    u = m / rho

    uf = 0.5 * (u[:-1] + u[1:])
    up = uf >= 0
    rho_up = np.where(up, rho[:-1], rho[1:])
    m_up = np.where(up, m[:-1], m[1:])
    F = np.zeros(grid.n_cells + 1)
    G = np.zeros(grid.n_cells + 1)
    F[1:-1] = area * rho_up * uf
    G[1:-1] = area * m_up * uf
    mass = -(F[1:] - F[:-1]) / grid.vol
    conv = -(G[1:] - G[:-1]) / grid.vol

    p = pressure(rho, params)
    pf = np.empty(grid.n_cells + 1)
    pf[1:-1] = 0.5 * (p[:-1] + p[1:])
    pf[0] = _wall_value(p[0], p[1])
    pf[-1] = _wall_value(p[-1], p[-2])
    pres = -(pf[1:] - pf[:-1]) / h

    mu, lam = viscosities(rho, params)
    ml = mu + lam
    rho_w0, rho_w1 = _wall_value(rho[0], rho[1]), _wall_value(rho[-1], rho[-2])
    mu_w0, lam_w0 = viscosities(rho_w0, params)
    mu_w1, lam_w1 = viscosities(rho_w1, params)
    mlf = np.empty(grid.n_cells + 1)
    mlf[1:-1] = 0.5 * (ml[:-1] + ml[1:])
    mlf[0], mlf[-1] = mu_w0 + lam_w0, mu_w1 + lam_w1
    urf = np.empty(grid.n_cells + 1)
    urf[1:-1] = (u[1:] - u[:-1]) / h
    # one-sided second-order derivative with u = 0 on the wall
    urf[0] = (9.0 * u[0] - u[1]) / (3.0 * h)
    urf[-1] = -(9.0 * u[-1] - u[-2]) / (3.0 * h)
    ufull = np.zeros(grid.n_cells + 1)
    ufull[1:-1] = uf
    S = mlf * (urf + (N - 1) * ufull / grid.edges)
    muf = np.empty(grid.n_cells + 1)
    muf[1:-1] = 0.5 * (mu[:-1] + mu[1:])
    muf[0], muf[-1] = mu_w0, mu_w1
    mu_r = (muf[1:] - muf[:-1]) / h
    visc = params.eps * ((S[1:] - S[:-1]) / h - (N - 1) / r * mu_r * u)

    return {"mass": mass, "convection": conv, "pressure": pres,
            "field": -rho * phir, "viscous": visc}


def rhs(state: State, field: FieldSnapshot | np.ndarray, params: Params, grid: RadialGrid):
    """Time derivatives ``(drho_dt, dmom_dt)`` of the semi-discrete system."""
    phir = field.phir if isinstance(field, FieldSnapshot) else field
    parts = rhs_parts(state, phir, params, grid)
    drho = parts["mass"]
    dmom = parts["convection"] + parts["pressure"] + parts["field"] + parts["viscous"]
    bad = ~(np.isfinite(drho) & np.isfinite(dmom))
    if bad.any():
        i = int(np.argmax(bad))
        raise SolverError(f"state blow-up at cell {i} (r={grid.r[i]:.6g})", cell=i, t=state.t)
    return drho, dmom


def stable_dt(state: State, params: Params, grid: RadialGrid, config: SolverConfig) -> float:
    rho = state.rho
    u = state.mom / rho
    speed = float(np.max(np.abs(u) + sound_speed(rho, params)))
    dt_adv = config.cfl * grid.h / speed if speed > 0 else math.inf
    mu, lam = viscosities(rho, params)
    geom = 1.0 + (grid.N - 1) * grid.h ** 2 / (4.0 * grid.r[0] ** 2)
    dt_visc = (config.visc_safety * grid.h ** 2 * float(rho.min())
               / (2.0 * params.eps * float(np.max(mu + lam)) * geom))
    return min(dt_adv, dt_visc)


def _charge(rho, d):
    return rho - d


def step(state: State, config: SolverConfig, params: Params, grid: RadialGrid,
         doping: DopingProfile | np.ndarray, dt: float | None = None):
    """Advance one SSP-RK2 step.

    Returns ``(new_state, dt, floor_activations)``.
    """
    d = doping(grid.r) if isinstance(doping, DopingProfile) else np.asarray(doping)
    if dt is None:
        dt = stable_dt(state, params, grid, config)
    if not dt >= 1e-12:
        raise SolverError(f"dt underflow (dt={dt:.3e})", t=state.t)

    f0 = field_from_charge(_charge(state.rho, d), grid, params)
    k_rho, k_m = rhs(state, f0, params, grid)
    s1 = State(state.rho + dt * k_rho, state.mom + dt * k_m, state.t + dt)
    if np.any(s1.rho <= 0):
        i = int(np.argmax(s1.rho <= 0))
        raise SolverError(f"nonpositive density at cell {i} in stage 1", cell=i, t=state.t)
    f1 = field_from_charge(_charge(s1.rho, d), grid, params)
    k_rho, k_m = rhs(s1, f1, params, grid)
    rho = 0.5 * state.rho + 0.5 * (s1.rho + dt * k_rho)
    mom = 0.5 * state.mom + 0.5 * (s1.mom + dt * k_m)
    floor = config.floor(params)
    low = rho < floor
    n_low = int(low.sum())
    if n_low:
        rho = np.where(low, floor, rho)
    return State(rho, mom, state.t + dt), dt, n_low


@dataclass
class RunRecord:
    """Snapshots and bookkeeping of one run."""

    params: Params
    grid: RadialGrid
    doping_values: np.ndarray
    config: SolverConfig
    times: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    mom: list = field(default_factory=list)
    fields: list = field(default_factory=list)
    dt_history: list = field(default_factory=list)
    floor_activations: int = 0
    failure: dict | None = None

    @property
    def clean(self) -> bool:
        return self.failure is None and self.floor_activations == 0

    @property
    def n_snapshots(self) -> int:
        return len(self.times)

    def state(self, k: int) -> State:
        return State(self.rho[k], self.mom[k], self.times[k])

    def arrays(self):
        """``(t, rho, mom)`` stacked; rho and mom have shape (n_snapshots, n_cells)."""
        return np.asarray(self.times), np.asarray(self.rho), np.asarray(self.mom)

    def summary(self) -> dict:
        dts = np.asarray(self.dt_history) if self.dt_history else np.zeros(1)
        return {
            "final_time": float(self.times[-1]) if self.times else 0.0,
            "n_steps": len(self.dt_history),
            "n_snapshots": self.n_snapshots,
            "dt_min": float(dts.min()),
            "dt_max": float(dts.max()),
            "dt_mean": float(dts.mean()),
            "floor_activations": self.floor_activations,
            "clean": self.clean,
            "failure": self.failure,
        }

    def _push(self, state: State, snap: FieldSnapshot) -> None:
        self.times.append(state.t)
        self.rho.append(state.rho.copy())
        self.mom.append(state.mom.copy())
        self.fields.append(snap)


def run(init, doping: DopingProfile | np.ndarray, config: SolverConfig, params: Params,
        grid: RadialGrid, hooks: Sequence[Callable] = ()) -> RunRecord:
    """Integrate from ``init`` (State or InitialData) to ``config.t_end``.

    Blow-up does not raise: the record keeps every snapshot up to the failure
    and ``failure`` holds the time and message.
    """
    config.validate()
    d = doping(grid.r) if isinstance(doping, DopingProfile) else np.asarray(doping, dtype=float)
    if isinstance(init, State):
        state = init.copy()
    else:
        state = State(np.asarray(init.rho0, dtype=float).copy(),
                      np.asarray(init.rho0 * init.u0, dtype=float).copy(), 0.0)
    rec = RunRecord(params=params, grid=grid, doping_values=d, config=config)

    def snapshot(s: State):
        snap = field_from_charge(s.rho - d, grid, params, t=s.t)
        rec._push(s, snap)
        for hook in hooks:
            hook(s, snap)

    snapshot(state)
    t_end = config.t_end
    next_out = config.output_dt if config.output_dt else None
    n = 0
    while state.t < t_end * (1 - 1e-14):
        try:
            dt = stable_dt(state, params, grid, config)
            target = min(t_end, next_out) if next_out is not None else t_end
            hit = state.t + dt >= target * (1 - 1e-14)
            if hit:
                dt = target - state.t
            state, dt, n_low = step(state, config, params, grid, d, dt=dt)
            if hit:
                state.t = target
        except SolverError as exc:
            rec.failure = {"time": state.t, "message": str(exc), "cell": exc.cell}
            logger.warning("run aborted at t=%.6g: %s", state.t, exc)
            break
        rec.dt_history.append(dt)
        rec.floor_activations += n_low
        n += 1
        if next_out is not None:
            if hit and state.t >= next_out * (1 - 1e-14):
                snapshot(state)
                next_out += config.output_dt
        elif n % config.output_every == 0 or state.t >= t_end * (1 - 1e-14):
            snapshot(state)
        if n >= config.max_steps:
            rec.failure = {"time": state.t, "message": "max_steps exceeded", "cell": None}
            break
    if rec.times[-1] < state.t:
        snapshot(state)
    return rec


# --------------------------------------------------------------------------
# Lagrangian mass coordinate

@dataclass(frozen=True)
class LagrangianResult:
    defect: float
    Lb_drift: float
    Lb: float


def _mass_coordinate(rho: np.ndarray, grid: RadialGrid, r: np.ndarray) -> np.ndarray:
    """``x(r) = int_delta^r rho y^(N-1) dy`` for piecewise-constant rho."""
    N = grid.N
    cum = np.concatenate(([0.0], np.cumsum(rho * grid.vol)))
    j = np.clip(np.searchsorted(grid.edges, r, side="right") - 1, 0, grid.n_cells - 1)
    return cum[j] + rho[j] * (r ** N - grid.edges[j] ** N) / N


def _velocity_at(u: np.ndarray, grid: RadialGrid, r: np.ndarray) -> np.ndarray:
    xs = np.concatenate(([grid.delta], grid.r, [grid.b]))
    us = np.concatenate(([0.0], u, [0.0]))
    return np.interp(r, xs, us)


def lagrangian_consistency(record: RunRecord, params: Params | None = None,
                           grid: RadialGrid | None = None, n_tracers: int = 64) -> LagrangianResult:
    """Transport check of the mass coordinate along reconstructed particle paths.

    Tracers start at interior radii, are advected with the snapshot velocity
    (Heun in time, linear interpolation in space and time), and their mass
    coordinate at the final snapshot is compared with the initial one. The
    defect is relative to the total mass coordinate ``L_b``.
    """
    grid = grid or record.grid
    t, rho, mom = record.arrays()
    Lb = np.array([total_mass(r_, grid) for r_ in rho])
    Lb_drift = float(np.max(np.abs(Lb - Lb[0])) / Lb[0])
    u = np.divide(mom, rho)
    span = grid.b - grid.delta
    pos = grid.delta + span * (np.arange(1, n_tracers + 1) / (n_tracers + 1))
    x0 = _mass_coordinate(rho[0], grid, pos)
    for k in range(len(t) - 1):
        dt = t[k + 1] - t[k]
        v0 = _velocity_at(u[k], grid, pos)
        pred = pos + dt * v0
        v1 = _velocity_at(u[k + 1], grid, pred)
        pos = np.clip(pos + 0.5 * dt * (v0 + v1), grid.delta, grid.b)
    x1 = _mass_coordinate(rho[-1], grid, pos)
    return LagrangianResult(defect=float(np.max(np.abs(x1 - x0)) / Lb[0]),
                            Lb_drift=Lb_drift, Lb=float(Lb[0]))
