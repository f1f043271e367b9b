"""Scenario registry, parameter ladders, convergence reports and check suites."""

from __future__ import annotations

import configparser
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import diagnostics as diag
from .initdata import InitialData, assemble
from .model import DopingProfile, Params, RadialGrid, doping_from_spec, make_grid, make_params
from .solver import RunRecord, SolverConfig, run

logger = logging.getLogger(__name__)

__all__ = [
    "SCENARIOS",
    "scenario_data",
    "run_scenario",
    "SweepPlan",
    "ConvergenceReport",
    "restrict",
    "sweep",
    "velocity_column_convergence",
    "load_config",
    "params_from_config",
    "solver_config_from",
    "plan_from_config",
]

AXES = ("b", "delta", "eps")


# --------------------------------------------------------------------------
# scenarios: (raw density, raw momentum, doping) on [0, inf)

def _equilibrium(params: Params):
    rs = params.rho_star
    return (lambda r: np.full_like(r, rs), lambda r: np.zeros_like(r),
            doping_from_spec("constant", params=params))


def _gaussian_bump(params: Params):
    rs = params.rho_star
    return (lambda r: rs * (1.0 + 2.0 * np.exp(-((r - 1.5) / 0.4) ** 2)),
            lambda r: np.zeros_like(r),
            doping_from_spec("constant", params=params))


def _non_neutral_bump(params: Params):
    rs = params.rho_star
    dop = doping_from_spec("bump", {"amplitude": 0.5 * rs, "center": 1.5, "width": 0.4},
                           params=params)
    return (lambda r: np.full_like(r, rs),
            lambda r: 0.2 * rs * np.exp(-((r - 1.5) / 0.5) ** 2),
            dop)


def _doping_step(params: Params):
    rs = params.rho_star
    dop = doping_from_spec("step-smoothed", {"amplitude": 1.0 * rs, "radius": 2.0, "width": 0.25},
                           params=params)
    return (lambda r: np.full_like(r, rs), lambda r: np.zeros_like(r), dop)


SCENARIOS: dict[str, Callable] = {
    "equilibrium": _equilibrium,
    "gaussian-bump": _gaussian_bump,
    "non-neutral-bump": _non_neutral_bump,
    "doping-step": _doping_step,
}


def scenario_data(name: str, params: Params, grid: RadialGrid) -> tuple[InitialData, DopingProfile]:
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    rho_raw, m_raw, dop = SCENARIOS[name](params)
    with warnings.catch_warnings():
        # an inactive far-field cut is expected on short domains
        warnings.simplefilter("ignore", RuntimeWarning)
        init = assemble(rho_raw, m_raw, dop, params, grid)
    return init, dop


def run_scenario(name: str, params: Params, n_cells: int, config: SolverConfig):
    grid = make_grid(params, n_cells)
    init, dop = scenario_data(name, params, grid)
    return run(init, dop, config, params, grid), init


# --------------------------------------------------------------------------
# sweeps

@dataclass
class SweepPlan:
    """A ladder along one axis; everything else fixed by ``base``.

    ``norms`` lists ``(p, (r1, r2))`` pairs for density distances; momentum
    uses ``q`` on the first K. On the b axis the cell width is held fixed,
    so ``n_cells`` refers to the base domain.
    """

    axis: str
    ladder: Sequence[float]
    base: Params
    scenario: str = "gaussian-bump"
    norms: Sequence = ((1.0, (1.0, 2.0)),)
    q: float = 1.0
    n_cells: int = 512
    t_end: float = 0.5
    output_dt: float = 0.05
    n_bins: int = 32
    cfl: float = 0.5
    visc_safety: float = 0.5
    max_workers: int = 1

    def validate(self) -> None:
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        lad = np.asarray(self.ladder, dtype=float)
        if not 3 <= lad.size <= 6:
            raise ValueError("ladder must have 3 to 6 rungs")
        steps = np.diff(lad)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise ValueError("ladder must be strictly monotone")
        g = self.base.gamma
        if not 0 < self.q < 3 * (g + 1) / (g + 3):
            raise ValueError("momentum exponent q must lie in (0, 3(gamma+1)/(gamma+3))")
        for p, _ in self.norms:
            if not 1 <= p < g + 1:
                raise ValueError("density exponent p must lie in [1, gamma+1)")
        for prm in self.rung_params():
            if prm.b < 1 + 1 / prm.delta - 1e-9:
                raise ValueError("every rung needs b >= 1 + 1/delta")

    def rung_params(self) -> list[Params]:
        out = []
        for v in self.ladder:
            if self.axis == "delta":
                out.append(self.base.replace(delta=v, b=max(self.base.b, 1 + 1 / v)))
            else:
                out.append(self.base.replace(**{self.axis: v}))
        return out

    def rung_cells(self) -> list[int]:
        if self.axis != "b":
            return [self.n_cells] * len(self.ladder)
        h = (self.base.b - self.base.delta) / self.n_cells
        cells = []
        for v in self.ladder:
            n = (v - self.base.delta) / h
            if abs(n - round(n)) > 1e-6:
                logger.warning("b=%g is not a whole number of base cells; cell width drifts", v)
            cells.append(int(round(n)))
        return cells


@dataclass
class ConvergenceReport:
    axis: str
    ladder: list
    times: list
    distances: dict
    momentum_distances: list
    velocity_l2: list
    rates: dict
    verdicts: dict
    rung_verdicts: list
    failures: list
    rung_summaries: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=diag._jsonable)

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())
        return path


def restrict(values: np.ndarray, grid: RadialGrid, bins: np.ndarray) -> np.ndarray:
    """Conservative restriction of cell values onto bins: r^(N-1)-weighted averages."""
    out = np.empty(len(bins) - 1)
    N = grid.N
    for i in range(len(bins) - 1):
        w = grid.partial_volume(bins[i], bins[i + 1])
        out[i] = np.dot(values, w) / ((bins[i + 1] ** N - bins[i] ** N) / N)
    return out


def _rung_job(args):
    scenario, params, n_cells, cfg = args
    record, init = run_scenario(scenario, params, n_cells, cfg)
    d = diag.collect(record, params)
    return record, d


def _rates(ladder, dist):
    """Observed orders ``log(d_k / d_(k+1)) / |log(v_k / v_(k+1))|``."""
    lad = np.asarray(ladder, dtype=float)
    out = []
    for k in range(len(dist) - 1):
        a, b = dist[k], dist[k + 1]
        step = abs(math.log(lad[k] / lad[k + 1]))
        out.append(math.log(a / b) / step if a > 0 and b > 0 else float("nan"))
    return out


def _monotone(dist: Sequence[float], scale: float) -> bool:
    """Strictly decreasing, or every entry at round-off relative to ``scale``."""
    d = np.asarray(dist, dtype=float)
    if np.all(d <= 1e-12 * max(scale, 1e-300)):
        return True
    return bool(np.all(np.diff(d) < 0))


def sweep(plan: SweepPlan) -> ConvergenceReport:
    """One run per rung, then distances between consecutive rungs on common bins."""
    plan.validate()
    prms = plan.rung_params()
    cells = plan.rung_cells()
    cfg = SolverConfig(cfl=plan.cfl, visc_safety=plan.visc_safety, t_end=plan.t_end,
                       output_dt=plan.output_dt)
    jobs = [(plan.scenario, p, n, cfg) for p, n in zip(prms, cells)]
    results: list = [None] * len(jobs)
    failures = []
    if plan.max_workers > 1:
        with ProcessPoolExecutor(max_workers=plan.max_workers) as pool:
            futs = [pool.submit(_rung_job, j) for j in jobs]
            for i, f in enumerate(futs):
                try:
                    results[i] = f.result()
                except Exception as exc:  # a rung failure must not abort the sweep
                    failures.append({"rung": i, "value": plan.ladder[i], "error": repr(exc)})
    else:
        for i, j in enumerate(jobs):
            try:
                results[i] = _rung_job(j)
            except Exception as exc:
                failures.append({"rung": i, "value": plan.ladder[i], "error": repr(exc)})
    for i, res in enumerate(results):
        if res is not None and res[0].failure is not None:
            failures.append({"rung": i, "value": plan.ladder[i], "error": res[0].failure["message"]})

    rung_verdicts, summaries = [], []
    for res in results:
        if res is None:
            rung_verdicts.append(None)
            summaries.append(None)
            continue
        rec, d = res
        rung_verdicts.append({k: bool(d.verdicts[k]) for k in ("energy", "bd", "no_concentration", "clean")})
        summaries.append(rec.summary())

    ok_runs = all(r is not None and r[0].failure is None for r in results)
    times = None
    if ok_runs:
        tsets = [np.round(r[0].arrays()[0], 12) for r in results]
        common = sorted(set(tsets[0].tolist()).intersection(*[set(t.tolist()) for t in tsets[1:]]))
        times = common

    distances, mom_d, vel_d, rates, verdicts = {}, [], [], {}, {}
    if ok_runs and times and len(times) >= 2:
        K0 = plan.norms[0][1]
        delta_c = max(p.delta for p in prms)
        b_c = min(p.b for p in prms)

        def restricted(idx, lo, hi):
            rec = results[idx][0]
            t_all = np.round(rec.arrays()[0], 12)
            keep = [int(np.nonzero(t_all == t)[0][0]) for t in times]
            bins = np.linspace(lo, hi, plan.n_bins + 1)
            rho = np.array([restrict(rec.rho[k], rec.grid, bins) for k in keep])
            mom = np.array([restrict(rec.mom[k], rec.grid, bins) for k in keep])
            vol = (bins[1:] ** rec.grid.N - bins[:-1] ** rec.grid.N) / rec.grid.N
            return rho, mom, vol

        tw = np.asarray(times)
        # trapezoid weights in time
        dt_w = np.zeros_like(tw)
        dt_w[1:] += 0.5 * np.diff(tw)
        dt_w[:-1] += 0.5 * np.diff(tw)

        def st_norm(f, vol, p):
            return float((np.sum(dt_w[:, None] * vol[None, :] * np.abs(f) ** p)) ** (1.0 / p))

        for p, K in plan.norms:
            lo, hi = max(K[0], delta_c), min(K[1], b_c)
            key = f"L{p:g}[{lo:g},{hi:g}]"
            rr = [restricted(i, lo, hi) for i in range(len(results))]
            dist = [st_norm(rr[k][0] - rr[k + 1][0], rr[k][2], p) for k in range(len(rr) - 1)]
            scale = st_norm(rr[-1][0], rr[-1][2], p)
            distances[key] = dist
            rates[key] = _rates(plan.ladder, dist)
            verdicts[f"monotone {key}"] = _monotone(dist, scale)
            if plan.axis == "b":
                verdicts[f"final gap {key}"] = bool(dist[-1] <= 1e-3 * scale)
        lo, hi = max(K0[0], delta_c), min(K0[1], b_c)
        rr = [restricted(i, lo, hi) for i in range(len(results))]
        mom_d = [st_norm(rr[k][1] - rr[k + 1][1], rr[k][2], plan.q) for k in range(len(rr) - 1)]
        mscale = st_norm(rr[-1][1], rr[-1][2], plan.q)
        verdicts[f"monotone momentum L{plan.q:g}"] = _monotone(mom_d, mscale + 1e-300)
        # m / sqrt(rho) over [delta, r2]
        lo_v, hi_v = delta_c, min(K0[1], b_c)
        rv = [restricted(i, lo_v, hi_v) for i in range(len(results))]
        col = [r[1] / np.sqrt(r[0]) for r in rv]
        vel_d = [st_norm(col[k] - col[k + 1], rv[k][2], 2.0) for k in range(len(col) - 1)]
        vscale = st_norm(col[-1], rv[-1][2], 2.0)
        verdicts["monotone velocity_l2"] = _monotone(vel_d, vscale + 1e-300)
    rungs_ok = all(v is not None and all(v.values()) for v in rung_verdicts)
    verdicts["rungs pass"] = bool(rungs_ok)
    if not rungs_ok or failures:
        # a failed rung invalidates the convergence verdicts that depend on it
        verdicts = {k: (False if k != "rungs pass" else v) for k, v in verdicts.items()}
    return ConvergenceReport(axis=plan.axis, ladder=[float(v) for v in plan.ladder],
                             times=[float(t) for t in (times or [])], distances=distances,
                             momentum_distances=mom_d, velocity_l2=vel_d, rates=rates,
                             verdicts=verdicts, rung_verdicts=rung_verdicts, failures=failures,
                             rung_summaries=summaries)


def velocity_column_convergence(report: ConvergenceReport) -> bool:
    if report.axis != "eps" or len(report.ladder) < 3:
        raise ValueError("needs an eps-axis report with at least 3 rungs")
    return bool(report.verdicts.get("monotone velocity_l2", False))


# --------------------------------------------------------------------------
# configuration files: flat ``key = value``

_PARAM_KEYS = ("N", "gamma", "eps", "delta", "b", "rho_star", "beta", "vartheta")


def load_config(path) -> dict:
    """Read a flat ``key = value`` file (``#`` comments allowed) into a dict of strings."""
    text = Path(path).read_text()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    cp.read_string("[root]\n" + text)
    return dict(cp["root"])


def _num(s: str):
    try:
        return int(s)
    except ValueError:
        return float(s)


def params_from_config(cfg: dict, **overrides) -> Params:
    kw = {k: _num(cfg[k]) for k in _PARAM_KEYS if k in cfg}
    kw.update(overrides)
    return make_params(**kw)


def doping_from_config(cfg: dict, params: Params) -> DopingProfile | None:
    kind = cfg.get("doping.kind")
    if kind is None:
        return None
    spec = {k.split(".", 1)[1]: _num(v) for k, v in cfg.items()
            if k.startswith("doping.") and k != "doping.kind"}
    return doping_from_spec(kind, spec, params=params)


def solver_config_from(cfg: dict) -> SolverConfig:
    kw = {}
    for k in ("cfl", "visc_safety", "rho_floor", "t_end", "output_dt"):
        if k in cfg:
            kw[k] = float(cfg[k])
    if "output_every" in cfg:
        kw["output_every"] = int(cfg["output_every"])
    return SolverConfig(**kw)


def plan_from_config(cfg: dict, axis: str) -> SweepPlan:
    base = params_from_config(cfg)
    defaults = {"b": "11, 21, 41", "delta": "0.1, 0.03, 0.01", "eps": "0.1, 0.05, 0.025"}
    ladder = [float(x) for x in cfg.get("ladder", defaults[axis]).split(",")]
    K = tuple(float(x) for x in cfg.get("K", "1, 2").split(","))
    p = float(cfg.get("p", 1.0))
    return SweepPlan(axis=axis, ladder=ladder, base=base,
                     scenario=cfg.get("scenario", "gaussian-bump"), norms=((p, K),),
                     q=float(cfg.get("q", 1.0)), n_cells=int(cfg.get("n_cells", 512)),
                     t_end=float(cfg.get("t_end", 0.5)), output_dt=float(cfg.get("output_dt", 0.05)),
                     max_workers=int(cfg.get("workers", 1)))
