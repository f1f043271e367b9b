"""Named verification suites; each returns ``{check name: (passed, detail)}``."""

from __future__ import annotations

import numpy as np

from . import diagnostics as diag
from .harness import SweepPlan, run_scenario, sweep
from .model import make_params
from .solver import SolverConfig
from .thermo import (c_lambda, kernel_moment, relative_entropy_flux_ratio, relative_energy,
                     weak_entropy_pair)

__all__ = ["SUITES", "run_suite", "energy_suite", "bd_suite", "entropy_suite", "limits_suite"]


def energy_suite(quick: bool = False) -> dict:
    p = make_params(N=3, gamma=2.0, eps=0.1, delta=0.1, b=11.0)
    n = 128 if quick else 512
    rec, _ = run_scenario("gaussian-bump", p, n, SolverConfig(t_end=1.0, output_every=10))
    eb = diag.energy_balance(rec)
    dc = diag.decay_and_concentration(rec)
    mass = np.array([rec.grid.integrate(r) for r in rec.rho])
    drift = float(np.ptp(mass) / mass[0])
    return {
        "energy inequality": (eb.verdict, f"max (E+D-E0)/E0 = {eb.max_excess:.3e}, "
                                          f"max step increase/E0 = {eb.max_increase:.3e}"),
        "mass conservation": (drift <= 1e-13, f"relative drift {drift:.3e}"),
        "no concentration": (dc.no_concentration, f"origin-mass exponent {dc.origin_mass_exponent:.4f}"),
        "clean run": (rec.clean, f"floor activations {rec.floor_activations}"),
    }


def bd_sweep_values(quick: bool = False, deltas=(0.1, 0.03, 0.01)):
    """sup_t of both BD functionals on a delta ladder with a common outer radius."""
    b = 1.0 + 1.0 / min(deltas)
    n = 256 if quick else 1024
    out = []
    for dl in deltas:
        p = make_params(eps=0.1, delta=dl, b=b)
        rec, _ = run_scenario("gaussian-bump", p, n, SolverConfig(t_end=1.0, output_every=5))
        bd = diag.bd_entropy_series(rec)
        out.append((dl, bd.sup_B, bd.sup_cumulative, rec.clean))
    return out


def bd_suite(quick: bool = False) -> dict:
    vals = bd_sweep_values(quick)
    B = np.array([v[1] for v in vals])
    C = np.array([v[2] for v in vals])
    fB = float(B.max() / B.min())
    fC = float(C.max() / C.min())
    return {
        "BD functional uniform in delta": (fB <= 10.0, f"sup B = {B.tolist()}, spread x{fB:.3f}"),
        "BD dissipation uniform in delta": (fC <= 10.0, f"sup cumulative = {C.tolist()}, spread x{fC:.3f}"),
        "delta ladder clean": (all(v[3] for v in vals), ""),
    }


def entropy_quadratic_error(gamma: float = 2.0, n: int = 20) -> float:
    """Largest relative error of the psi = s^2/2 entropy against its Beta-moment closed form."""
    p = make_params(gamma=gamma)
    lam = p.lam_kernel
    a1 = c_lambda(p)
    a2 = kernel_moment(2, lam)
    rho = np.linspace(0.1, 3.0, n)
    u = np.linspace(-2.0, 2.0, n)
    R, U = np.meshgrid(rho, u, indexing="ij")
    M = R * U
    eta, _ = weak_entropy_pair(lambda s: 0.5 * s * s, R, M, p)
    closed = a1 * M * M / (2 * R) + 0.5 * a2 * R ** p.gamma
    return float(np.max(np.abs(eta - closed) / np.abs(closed)))


def flux_ratio_sup(seed: int, n: int = 10_000, gamma: float = 2.0) -> float:
    p = make_params(gamma=gamma)
    rng = np.random.default_rng(seed)
    rho = rng.uniform(0.05, 5.0, n)
    u = rng.uniform(-3.0, 3.0, n)
    return float(np.max(np.abs(relative_entropy_flux_ratio(rho, rho * u, p))))


def entropy_suite(quick: bool = False) -> dict:
    err = entropy_quadratic_error()
    n = 2000 if quick else 10_000
    s1, s2 = flux_ratio_sup(1, n), flux_ratio_sup(2, n)
    stable = bool(np.isfinite(s1) and abs(s1 - s2) <= 0.1 * s1)
    return {
        "quadratic entropy closed form": (err <= 1e-6, f"max relative error {err:.3e}"),
        "relative entropy flux ratio": (stable, f"sup = {s1:.6g} / {s2:.6g} under resampling"),
    }


def limits_suite(quick: bool = False) -> dict:
    base = make_params(eps=0.1, delta=0.1, b=11.0)
    n = 256 if quick else 512
    rep = sweep(SweepPlan("eps", [0.1, 0.05, 0.025], base, n_cells=n, t_end=0.5))
    key = next(iter(rep.distances))
    h = 0.1 if quick else 0.05
    nb = int(round((11.0 - 0.1) / h))
    brep = sweep(SweepPlan("b", [11.0, 21.0, 41.0], base, n_cells=nb, t_end=0.5,
                           norms=((1.0, (1.0, 5.0)),)))
    hv = []
    for b in (11.0, 21.0, 41.0):
        p = base.replace(b=b)
        rec, _ = run_scenario("gaussian-bump", p, int(round((b - 0.1) / h)),
                              SolverConfig(t_end=1.0, output_every=10))
        hv.append(diag.higher_integrability(rec, (1.0, 2.0)).hi_vel)
    hv = np.array(hv)
    spread = float((hv.max() - hv.min()) / hv.min())
    return {
        "eps ladder density distances decrease": (rep.verdicts[f"monotone {key}"], f"{rep.distances[key]}"),
        "eps ladder velocity column decreases": (rep.verdicts["monotone velocity_l2"], f"{rep.velocity_l2}"),
        "b ladder distances decrease": (all(v for k, v in brep.verdicts.items()), f"{brep.distances}"),
        "hi_vel uniform in b": (spread <= 0.05, f"hi_vel = {hv.tolist()}, spread {spread:.3e}"),
    }


SUITES = {"energy": energy_suite, "bd": bd_suite, "entropy": entropy_suite, "limits": limits_suite}


def run_suite(name: str, quick: bool = False) -> dict:
    if name == "all":
        out = {}
        for k, fn in SUITES.items():
            out.update({f"{k}: {c}": v for c, v in fn(quick).items()})
        return out
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}")
    return SUITES[name](quick)
