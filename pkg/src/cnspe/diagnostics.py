"""Functionals and inequality checks evaluated over a finished run.

Every function takes a :class:`~cnspe.solver.RunRecord`; time integrals use
the trapezoid rule over the snapshot times, so their accuracy is set by
``output_every``. Spatial derivatives are central in the interior and
second-order one-sided at the ends; the velocity derivative uses the wall
values u = 0.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate

from .model import Params, RadialGrid
from .solver import RunRecord, radial_gradient
from .thermo import entropy_pair, relative_energy, relative_mechanical_pair, viscosities

__all__ = [
    "dissipation_constant",
    "velocity_gradient",
    "EnergyBalance",
    "energy_balance",
    "BDSeries",
    "bd_entropy_series",
    "HigherIntegrability",
    "higher_integrability",
    "BoundsAndSets",
    "bounds_and_sets",
    "WeightedEnergy",
    "weighted_energy",
    "DecayResult",
    "decay_and_concentration",
    "origin_mass",
    "EntropyResidual",
    "entropy_dissipation_field",
    "DiagnosticsRecord",
    "collect",
]

ROUNDOFF_TAIL = 1e-14


def dissipation_constant(N: int, alpha: float) -> float:
    """Smallest eigenvalue of the viscous quadratic form in (u_r, u/r)."""
    off = (alpha - 1.0) * (N - 1)
    Q = np.array([[alpha, off], [off, (N - 1) + (alpha - 1.0) * (N - 1) ** 2]])
    return float(np.linalg.eigvalsh(Q)[0])


def velocity_gradient(u: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """u_r at cell centres with the wall values u(delta) = u(b) = 0 included."""
    x = np.concatenate(([grid.delta], grid.r, [grid.b]))
    v = np.concatenate(([0.0], u, [0.0]))
    return np.gradient(v, x, edge_order=2)[1:-1]


def _cumulative(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    if len(t) < 2:
        return np.zeros_like(f)
    return integrate.cumulative_trapezoid(f, t, initial=0.0)


def _unpack(run: RunRecord, params: Params | None):
    params = params or run.params
    t, rho, mom = run.arrays()
    u = mom / rho
    phir = np.array([f.phir for f in run.fields])
    return params, run.grid, t, rho, u, phir


# --------------------------------------------------------------------------

@dataclass
class EnergyBalance:
    t: np.ndarray
    E: np.ndarray
    D: np.ndarray
    c_N: float
    verdict: bool
    max_excess: float
    max_increase: float
    tol: float


def energy_balance(run: RunRecord, params: Params | None = None, tol: float = 1e-2,
                   step_tol: float = 1e-3) -> EnergyBalance:
    """Relative energy E(t) inside [delta, b] and the cumulative dissipation D(t).

    The verdict requires E + D <= E(0)(1 + tol) at every output time and
    E(t_{k+1}) <= E(t_k) + step_tol E(0). The exterior field energy is
    constant in time and left out.
    """
    params, grid, t, rho, u, phir = _unpack(run, params)
    N, eps, dl, a = params.N, params.eps, params.delta, params.alpha
    c_N = dissipation_constant(N, a)
    E = np.array([grid.integrate(0.5 * rho[k] * u[k] ** 2 + relative_energy(rho[k], params)
                                 + 0.5 * phir[k] ** 2) for k in range(len(t))])
    r2 = grid.r ** 2
    dens = np.empty(len(t))
    for k in range(len(t)):
        ur = velocity_gradient(u[k], grid)
        main = rho[k] * (ur ** 2 + (N - 1) * u[k] ** 2 / r2)
        extra = rho[k] ** a * (ur ** 2 + u[k] ** 2 / r2)
        dens[k] = eps * grid.integrate(main) + c_N * eps * dl * grid.integrate(extra)
    D = _cumulative(t, dens)
    E0 = E[0]
    scale = max(E0, np.finfo(float).tiny)
    excess = float(np.max(E + D - E0)) / scale if E0 > 0 else float(np.max(np.abs(E + D)))
    inc = float(np.max(np.diff(E), initial=0.0)) / scale if E0 > 0 else float(np.max(E))
    if E0 > 0:
        ok = bool(np.all(E + D <= E0 * (1 + tol)) and np.all(np.diff(E) <= step_tol * E0))
    else:
        ok = bool(np.all(np.abs(E) <= 1e-12) and np.all(np.abs(D) <= 1e-12))
    return EnergyBalance(t=t, E=E, D=D, c_N=c_N, verdict=ok, max_excess=excess,
                         max_increase=inc, tol=tol)


@dataclass
class BDSeries:
    t: np.ndarray
    B: np.ndarray
    cumulative: np.ndarray
    sup_B: float
    sup_cumulative: float
    budget: float
    verdict: bool


def bd_entropy_series(run: RunRecord, params: Params | None = None,
                      budget: float | None = None) -> BDSeries:
    """The two density-gradient functionals controlled by the BD entropy.

    ``budget`` stands in for the non-constructive C(E0 + 1); by default it
    is 10 (E(0) + B(0) + 1).
    """
    params, grid, t, rho, u, phir = _unpack(run, params)
    eps, dl, a, g = params.eps, params.delta, params.alpha, params.gamma
    B = np.empty(len(t))
    dens = np.empty(len(t))
    for k in range(len(t)):
        rk = rho[k]
        rr = radial_gradient(rk, grid)
        w = 1.0 + a * dl * rk ** (a - 1.0) + (a * dl) ** 2 * rk ** (2.0 * (a - 1.0))
        B[k] = eps ** 2 * grid.integrate(w * rr ** 2 / rk)
        dens[k] = eps * grid.integrate((1.0 + a * dl * rk ** (a - 1.0)) * rk ** (g - 2.0) * rr ** 2)
    cum = _cumulative(t, dens)
    if budget is None:
        E0 = grid.integrate(0.5 * rho[0] * u[0] ** 2 + relative_energy(rho[0], params)
                            + 0.5 * phir[0] ** 2)
        budget = 10.0 * (E0 + B[0] + 1.0)
    sB, sC = float(B.max()), float(cum.max())
    return BDSeries(t=t, B=B, cumulative=cum, sup_B=sB, sup_cumulative=sC, budget=budget,
                    verdict=bool(sB <= budget and sC <= budget))


@dataclass
class HigherIntegrability:
    hi_rho: float
    hi_vel: float
    t: np.ndarray
    hi_rho_series: np.ndarray
    hi_vel_series: np.ndarray
    K: tuple


def higher_integrability(run: RunRecord, K: Sequence[float] = (1.0, 2.0),
                         params: Params | None = None) -> HigherIntegrability:
    """Space-time integrals of rho^(gamma+1) (flat measure) and of
    rho|u|^3 + rho^(gamma+theta) (r^(N-1) measure) over [0, T] x K."""
    params, grid, t, rho, u, _ = _unpack(run, params)
    r1, r2 = float(K[0]), float(K[1])
    if not grid.delta < r1 < r2 < grid.b:
        raise ValueError(f"K = [{r1}, {r2}] must lie strictly inside ({grid.delta}, {grid.b})")
    flat = grid.partial_length(r1, r2)
    vol = grid.partial_volume(r1, r2)
    g, th = params.gamma, params.theta
    f_rho = np.array([np.dot(rho[k] ** (g + 1.0), flat) for k in range(len(t))])
    f_vel = np.array([np.dot(rho[k] * np.abs(u[k]) ** 3 + rho[k] ** (g + th), vol)
                      for k in range(len(t))])
    s_rho, s_vel = _cumulative(t, f_rho), _cumulative(t, f_vel)
    return HigherIntegrability(hi_rho=float(s_rho[-1]), hi_vel=float(s_vel[-1]), t=t,
                               hi_rho_series=s_rho, hi_vel_series=s_vel, K=(r1, r2))


@dataclass
class BoundsAndSets:
    rho_max: float
    rho_min: float
    t: np.ndarray
    setA_measure: np.ndarray
    setB_measure: np.ndarray
    weighted_sets: np.ndarray
    set_bound: float
    verdict: bool


def band_energy_constant(params: Params) -> float:
    """``min(e(2 rho*), e(rho*/2))``, the least relative energy outside the middle band."""
    rs = params.rho_star
    return float(min(relative_energy(2.0 * rs, params), relative_energy(0.5 * rs, params)))


def bounds_and_sets(run: RunRecord, params: Params | None = None) -> BoundsAndSets:
    """Extreme densities and the sets A(t) = {rho >= 2 rho*}, B(t) = {rho <= rho*/2}.

    The measures are Lebesgue (cell count times h). The verdict checks the
    r^(N-1)-weighted measure of A(t) u B(t) against E(0)/c(rho*), which
    follows from convexity of e and the energy inequality.
    """
    params, grid, t, rho, u, phir = _unpack(run, params)
    rs = params.rho_star
    inA = rho >= 2.0 * rs
    inB = rho <= 0.5 * rs
    A = inA.sum(axis=1) * grid.h
    Bm = inB.sum(axis=1) * grid.h
    weighted = ((inA | inB) * grid.vol).sum(axis=1)
    E0 = grid.integrate(0.5 * rho[0] * u[0] ** 2 + relative_energy(rho[0], params)
                        + 0.5 * phir[0] ** 2)
    bound = E0 / band_energy_constant(params)
    ok = bool(np.all(weighted <= bound * (1 + 1e-12) + 1e-300))
    return BoundsAndSets(rho_max=float(rho.max()), rho_min=float(rho.min()), t=t,
                         setA_measure=A, setB_measure=Bm, weighted_sets=weighted,
                         set_bound=float(bound), verdict=ok)


@dataclass
class WeightedEnergy:
    t: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray


def weighted_energy(run: RunRecord, params: Params | None = None) -> WeightedEnergy:
    """Energy and dissipation with the weight r^(2(N-1)+vartheta) dr."""
    params, grid, t, rho, u, phir = _unpack(run, params)
    N, a, dl, eps = params.N, params.alpha, params.delta, params.eps
    w = grid.power_volume(2 * (N - 1) + params.vartheta)
    E = np.array([np.dot(0.5 * rho[k] * u[k] ** 2 + relative_energy(rho[k], params)
                         + 0.5 * phir[k] ** 2, w) for k in range(len(t))])
    dens = np.array([eps * np.dot((rho[k] + a * dl * rho[k] ** a)
                                  * velocity_gradient(u[k], grid) ** 2, w)
                     for k in range(len(t))])
    return WeightedEnergy(t=t, energy=E, dissipation=_cumulative(t, dens))


# --------------------------------------------------------------------------

def origin_mass(rho: np.ndarray, grid: RadialGrid, r0) -> np.ndarray:
    """``int_0^r0 rho r^(N-1) dr`` with rho extended by its first cell value on [0, delta)."""
    N = grid.N
    r0 = np.atleast_1d(np.asarray(r0, dtype=float))
    inner = rho[0] * grid.delta ** N / N
    return np.array([inner + np.dot(rho, grid.partial_volume(grid.delta, x)) for x in r0])


@dataclass
class DecayResult:
    tail_exponent: float | None
    tail_status: str
    tail_radii: np.ndarray
    tail_integral_u: np.ndarray
    tail_u_decreasing: bool
    origin_mass_exponent: float
    no_concentration: bool
    predicted_exponent: float


def decay_and_concentration(run: RunRecord, params: Params | None = None,
                            sample_radii: Sequence[float] | None = None) -> DecayResult:
    """Far-field decay of rho(T) - rho*, time-integrated velocity at sample radii,
    and the scaling exponent of the mass in small balls about the origin."""
    params, grid, t, rho, u, _ = _unpack(run, params)
    N, b = params.N, grid.b
    last = rho[-1]
    sel = (grid.r >= b / 4) & (grid.r <= 3 * b / 4)
    dev = np.abs(last[sel] - params.rho_star)
    ok = dev > ROUNDOFF_TAIL
    if ok.sum() >= 3:
        slope = float(np.polyfit(np.log(grid.r[sel][ok]), np.log(dev[ok]), 1)[0])
        status = "fitted"
    else:
        slope, status = None, "tail at round-off"

    if sample_radii is None:
        sample_radii = np.linspace(b / 4, 3 * b / 4, 6)
    radii = np.asarray(sample_radii, dtype=float)
    xs = np.concatenate(([grid.delta], grid.r, [grid.b]))
    prof = np.array([np.interp(radii, xs, np.concatenate(([0.0], np.abs(uk), [0.0])))
                     for uk in u])
    dens = (prof + prof ** 3) * radii ** (N - 1)
    tail_u = integrate.trapezoid(dens, t, axis=0) if len(t) > 1 else np.zeros_like(radii)
    scale = max(float(np.max(tail_u)), 1e-300)
    decreasing = bool(np.all(np.diff(tail_u) <= 1e-9 * scale + 1e-14))

    r0 = np.linspace(2 * grid.delta, 10 * grid.delta, 9)
    if r0[-1] > b:
        raise ValueError("domain too short for the origin-mass fit")
    exps = []
    for rk in rho:
        M = origin_mass(rk, grid, r0)
        exps.append(float(np.polyfit(np.log(r0), np.log(M), 1)[0]))
    om = float(min(exps))
    return DecayResult(tail_exponent=slope, tail_status=status, tail_radii=radii,
                       tail_integral_u=tail_u, tail_u_decreasing=decreasing,
                       origin_mass_exponent=om, no_concentration=bool(om >= N - 0.5),
                       predicted_exponent=-3 * N / 4 + 0.75 - params.vartheta / 4)


@dataclass
class EntropyResidual:
    l1_residual: float
    K: tuple
    pair: str
    integrated_balance: float
    balance_ok: bool
    E0: float


def entropy_dissipation_field(run: RunRecord, params: Params | None = None,
                              K: Sequence[float] = (1.0, 2.0), pair: str = "mechanical",
                              balance_tol: float = 1e-2) -> EntropyResidual:
    """L1([0,T] x K) norm of the discrete entropy production eta_t + q_r.

    The balance check integrates the relative mechanical energy production
    with its r^(N-1) weight and the field work over the whole domain and
    time; it must be nonpositive up to ``balance_tol`` E(0).
    """
    params, grid, t, rho, u, phir = _unpack(run, params)
    r1, r2 = float(K[0]), float(K[1])
    if not grid.delta < r1 < r2 < grid.b:
        raise ValueError(f"K = [{r1}, {r2}] must lie strictly inside ({grid.delta}, {grid.b})")
    ep = entropy_pair(pair, params)
    m = rho * u
    if pair in ("sharp", "relative-sharp"):
        eta = np.array([ep.eta(rho[k], m[k]) for k in range(len(t))])
        q = np.array([ep.q(rho[k], m[k]) for k in range(len(t))])
    else:
        eta, q = ep.eta(rho, m), ep.q(rho, m)
    flat = grid.partial_length(r1, r2)
    l1 = 0.0
    for k in range(len(t) - 1):
        dt = t[k + 1] - t[k]
        qr = 0.5 * (radial_gradient(q[k], grid) + radial_gradient(q[k + 1], grid))
        res = (eta[k + 1] - eta[k]) / dt + qr
        l1 += dt * float(np.dot(np.abs(res), flat))

    eta_rel, _ = relative_mechanical_pair(rho, m, params)
    total = np.array([grid.integrate(eta_rel[k]) for k in range(len(t))])
    work = np.array([grid.integrate(rho[k] * u[k] * phir[k]) for k in range(len(t))])
    balance = float(total[-1] - total[0] + integrate.trapezoid(work, t)) if len(t) > 1 else 0.0
    E0 = float(total[0] + 0.5 * grid.integrate(phir[0] ** 2))
    return EntropyResidual(l1_residual=l1, K=(r1, r2), pair=pair, integrated_balance=balance,
                           balance_ok=bool(balance <= balance_tol * max(E0, 0.0) + 1e-12),
                           E0=E0)


# --------------------------------------------------------------------------

@dataclass
class DiagnosticsRecord:
    """One row per snapshot time; scalar fits and verdicts alongside."""

    columns: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)

    @property
    def t(self) -> np.ndarray:
        return self.columns["t"]

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        names = list(self.columns)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for row in zip(*(self.columns[n] for n in names)):
                w.writerow([repr(float(x)) for x in row])
        return path

    def verdicts_json(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"verdicts": self.verdicts, "scalars": self.scalars},
                                   indent=2, sort_keys=True, default=_jsonable))
        return path

    @property
    def all_pass(self) -> bool:
        return all(bool(v) for v in self.verdicts.values())


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"not serialisable: {type(x)}")


def collect(run: RunRecord, params: Params | None = None, K: Sequence[float] = (1.0, 2.0),
            energy_tol: float = 1e-2) -> DiagnosticsRecord:
    """Every time-series functional of a run in one record."""
    params, grid, t, rho, u, phir = _unpack(run, params)
    N, g = params.N, params.gamma
    eb = energy_balance(run, params, tol=energy_tol)
    bd = bd_entropy_series(run, params)
    K = (max(K[0], grid.delta + grid.h), min(K[1], grid.b - grid.h))
    hi = higher_integrability(run, K, params)
    bs = bounds_and_sets(run, params)
    we = weighted_energy(run, params)
    dc = decay_and_concentration(run, params)
    mass = np.array([grid.integrate(rk) for rk in rho])
    Mb = np.array([f.Mb for f in run.fields])
    d8, u2k, ur2 = [], [], []
    for k in range(len(t)):
        rr = radial_gradient(rho[k], grid)
        d8.append(grid.integrate(rho[k] * np.abs(rho[k] ** (-1.0 - 1.0 / (2 * N)) * rr) ** 8))
        u2k.append(grid.integrate(rho[k] * u[k] ** 8))
        ur2.append(float(np.sum(velocity_gradient(u[k], grid) ** 2) * grid.h))
    rec = DiagnosticsRecord()
    rec.columns = {
        "t": t, "energy": eb.E, "dissipation": eb.D, "bd_entropy": bd.B,
        "bd_dissipation": bd.cumulative, "mass": mass, "Mb": Mb,
        "hi_rho": hi.hi_rho_series, "hi_vel": hi.hi_vel_series,
        "weighted_energy": we.energy, "weighted_dissipation": we.dissipation,
        "d8": np.array(d8), "u2k": np.array(u2k), "ur_l2": np.array(ur2),
        "setA_measure": bs.setA_measure, "setB_measure": bs.setB_measure,
        "rho_max": rho.max(axis=1), "rho_min": rho.min(axis=1),
    }
    mass_drift = float(np.max(np.abs(mass - mass[0])) / mass[0])
    Mb_drift = float(np.max(np.abs(Mb - Mb[0])) / (1.0 + abs(Mb[0])))
    rec.scalars = {
        "c_N": eb.c_N, "energy_max_excess": eb.max_excess,
        "energy_max_increase": eb.max_increase, "bd_sup": bd.sup_B,
        "bd_cumulative_sup": bd.sup_cumulative, "bd_budget": bd.budget,
        "hi_rho": hi.hi_rho, "hi_vel": hi.hi_vel, "K": list(K),
        "tail_exponent": dc.tail_exponent, "tail_status": dc.tail_status,
        "predicted_tail_exponent": dc.predicted_exponent,
        "origin_mass_exponent": dc.origin_mass_exponent,
        "tail_radii": dc.tail_radii, "tail_integral_u": dc.tail_integral_u,
        "mass_drift": mass_drift, "Mb_drift": Mb_drift,
        "rho_max": bs.rho_max, "rho_min": bs.rho_min, "set_bound": bs.set_bound,
        "floor_activations": run.floor_activations, "clean": run.clean,
    }
    rec.verdicts = {
        "energy": eb.verdict,
        "bd": bd.verdict,
        "sets": bs.verdict,
        "no_concentration": dc.no_concentration,
        "tail_decay": dc.tail_exponent is None or dc.tail_exponent <= -1.0,
        "mass_conserved": mass_drift <= 1e-10 if run.floor_activations == 0 else True,
        "Mb_conserved": Mb_drift <= 1e-10 if run.floor_activations == 0 else True,
        "clean": run.clean,
    }
    return rec
