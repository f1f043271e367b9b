"""Approximate initial data: density cut-offs, far-field cut, mollification, velocity.

Raw profiles may be callables of r on [0, inf) or per-cell arrays. Callables
are evaluated exactly wherever the mollifier needs them; arrays are linearly
interpolated and extended by their end values outside [delta, b].
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Union

import numpy as np
from scipy import integrate

from .field import field_from_charge
from .model import DopingProfile, Params, RadialGrid, State, _smooth_unit_step, make_grid
from .thermo import relative_energy, viscosities

__all__ = [
    "InitialData",
    "density_band",
    "cutoff_density",
    "farfield_radius",
    "farfield_cut",
    "mollify",
    "mollify_sqrt",
    "build_velocity",
    "assemble",
    "raw_relative_energy",
    "data_functionals",
    "save_initial_data",
    "load_initial_data",
]

Profile = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


def density_band(params: Params) -> tuple[float, float]:
    """``((beta eps)^(1/4), (beta eps)^(-1/2))``."""
    be = params.beta * params.eps
    return be ** 0.25, be ** -0.5


def cutoff_density(rho_raw, params: Params) -> np.ndarray:
    """Clamp a density into the admissible band; in-band values are untouched."""
    rho_raw = np.asarray(rho_raw, dtype=float)
    if np.any(rho_raw < 0):
        raise ValueError("raw density must be nonnegative")
    lo, hi = density_band(params)
    return np.clip(rho_raw, lo, hi)


def farfield_radius(params: Params) -> float:
    return (params.beta * params.eps) ** (-1.0 / (2 * params.N))


def farfield_cut(rho_cut, params: Params, r, warn: bool = True) -> np.ndarray:
    """Replace the density by rho_star beyond the far-field radius."""
    rho_cut = np.asarray(rho_cut, dtype=float)
    R = farfield_radius(params)
    if warn and R >= params.b:
        warnings.warn(f"far-field cut radius {R:.4g} lies outside the domain (b={params.b:.4g}); "
                      "cut inactive", RuntimeWarning, stacklevel=2)
    return np.where(np.asarray(r) > R, params.rho_star, rho_cut)


@lru_cache(maxsize=32)
def _mollifier_nodes(N: int, n_s: int, n_phi: int):
    """Quadrature for the unit mollifier in R^N, in polar coordinates about x.

    Returns ``(s, cos_phi, w)`` on the unit ball with weights summing to 1;
    the angular factor sin^(N-2) is the marginal of the surface measure.
    """
    xs, ws = np.polynomial.legendre.leggauss(n_s)
    s = 0.5 * (xs + 1.0)
    ws = 0.5 * ws
    with np.errstate(divide="ignore"):
        J = np.where(s < 1.0, np.exp(1.0 / (s * s - 1.0)), 0.0)
    wr = ws * J * s ** (N - 1)
    xp, wp = np.polynomial.legendre.leggauss(n_phi)
    phi = 0.5 * math.pi * (xp + 1.0)
    wphi = 0.5 * math.pi * wp * np.sin(phi) ** (N - 2)
    w = np.outer(wr, wphi)
    w /= w.sum()
    return s, np.cos(phi), w


def _as_function(f: Profile, grid: RadialGrid | None):
    if callable(f):
        return lambda r: np.asarray(f(np.asarray(r, dtype=float)), dtype=float)
    if grid is None:
        raise ValueError("array profiles need the grid they live on")
    vals = np.asarray(f, dtype=float)
    if vals.shape != grid.r.shape:
        raise ValueError(f"profile has shape {vals.shape}, grid has {grid.r.shape}")
    return lambda r: np.interp(r, grid.r, vals)


def mollify(f: Profile, params: Params, grid: RadialGrid | None = None, r=None,
            sigma: float | None = None, n_s: int = 48, n_phi: int = 32) -> np.ndarray:
    """N-dimensional convolution of a radial function with ``J_sigma``.

    The convolution at |x| = r is evaluated directly as an integral over the
    ball of radius sigma in polar coordinates about x, so the r^(N-1)
    measure is respected and the origin needs no special treatment.
    """
    fn = _as_function(f, grid)
    r = grid.r if r is None else np.asarray(r, dtype=float)
    sigma = params.eps ** 0.25 if sigma is None else sigma
    s, cphi, w = _mollifier_nodes(params.N, n_s, n_phi)
    z = sigma * s[:, None]
    out = np.empty_like(r)
    for i, ri in enumerate(r):
        dist = np.sqrt(np.maximum(ri * ri + z * z - 2.0 * ri * z * cphi[None, :], 0.0))
        out[i] = np.sum(w * fn(dist))
    return out


def mollify_sqrt(rho_in: Profile, params: Params, grid: RadialGrid | None = None, r=None,
                 sigma: float | None = None, **kw) -> np.ndarray:
    """``(J_sigma * sqrt(rho))^2`` with sigma = eps^(1/4) by default."""
    fn = _as_function(rho_in, grid)

    def root(x):
        v = fn(x)
        if np.any(v <= 0):
            raise ValueError("mollify_sqrt needs a positive density")
        return np.sqrt(v)

    return mollify(root, params, grid=grid, r=r, sigma=sigma, **kw) ** 2


def _boundary_cutoff(grid: RadialGrid, width: float) -> np.ndarray:
    """Smooth factor, identically 0 on the first and last cells, 1 inside."""
    lo = grid.edges[1]
    hi = grid.edges[-2]
    return (_smooth_unit_step((grid.r - lo) / width)
            * _smooth_unit_step((hi - grid.r) / width))


def build_velocity(m_raw: Profile, rho_raw: Profile, params: Params, grid: RadialGrid,
                   ramp_width: float | None = None, u_max: float | None = None) -> np.ndarray:
    """Mollified raw velocity with a smooth cut-off at both walls.

    The raw velocity is ``m_raw / rho_raw`` where rho_raw > 0 and 0 elsewhere.
    The cut-off ramps over ``ramp_width`` (at least 4h) and the result is
    clamped to |u| <= ``u_max`` (default (beta eps)^(-1/2)).
    """
    if grid.n_cells < 32:
        raise ValueError(f"grid too coarse for the boundary cut-off: n_cells={grid.n_cells} < 32")
    mf = _as_function(m_raw, grid)
    rf = _as_function(rho_raw, grid)

    def u_raw(x):
        m, rho = mf(x), rf(x)
        return np.divide(m, rho, out=np.zeros_like(m), where=rho > 0)

    width = max(4.0 * grid.h, ramp_width or 0.0)
    u = mollify(u_raw, params, grid=grid) * _boundary_cutoff(grid, width)
    u_max = density_band(params)[1] if u_max is None else u_max
    return np.clip(u, -u_max, u_max)


@dataclass
class InitialData:
    """Assembled initial datum on a grid together with its functionals."""

    r: np.ndarray
    rho0: np.ndarray
    u0: np.ndarray
    E0: float
    E1: float
    E2: float
    E3: float
    params: Params

    def state(self) -> State:
        return State(self.rho0.copy(), self.rho0 * self.u0, 0.0)


def data_functionals(rho0: np.ndarray, u0: np.ndarray, d: np.ndarray, params: Params,
                     grid: RadialGrid) -> dict:
    """E0, E1, E2 and E3 of a per-cell datum.

    E0 carries the sphere-area factor and the exterior field energy; E1 is the
    density-gradient functional with the delta-dependent viscosity weights;
    E3 uses the weight r^(2(N-1)+vartheta).
    """
    N, a, dl = params.N, params.alpha, params.delta
    e = relative_energy(rho0, params)
    snap = field_from_charge(rho0 - d, grid, params)
    kin = 0.5 * rho0 * u0 * u0
    E0 = params.omega * (grid.integrate(kin + e) + 0.5 * snap.field_energy)
    sq_r = np.gradient(np.sqrt(rho0), grid.h, edge_order=2)
    wgt = 1.0 + 2.0 * a * dl * rho0 ** (a - 1.0) + (a * dl) ** 2 * rho0 ** (2.0 * a - 2.0)
    E1 = params.eps ** 2 * grid.integrate(wgt * sq_r ** 2)
    mu, _ = viscosities(rho0, params)
    mu_r = np.gradient(mu, grid.h, edge_order=2)
    E2 = grid.integrate(rho0 * (u0 ** 8 + (mu_r / rho0) ** 8))
    E3 = float(np.dot(kin + e + 0.5 * snap.phir ** 2, grid.power_volume(2 * (N - 1) + params.vartheta)))
    return {"E0": float(E0), "E1": float(E1), "E2": float(E2), "E3": float(E3)}


def assemble(rho_raw: Profile, m_raw: Profile, doping: DopingProfile | np.ndarray,
             params: Params, grid: RadialGrid, ramp_width: float | None = None) -> InitialData:
    """Cut-off, far-field cut, mollification and velocity construction.

    Raises ``ValueError`` if the assembled density leaves the admissible band
    (a pipeline fault, not a data fault).
    """
    lo, hi = density_band(params)
    if callable(rho_raw):
        raw_fn = lambda r: np.asarray(rho_raw(np.asarray(r, dtype=float)), dtype=float)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            hat = lambda r: farfield_cut(cutoff_density(raw_fn(r), params), params, r, warn=False)
        if farfield_radius(params) >= params.b:
            warnings.warn("far-field cut radius lies outside the domain; cut inactive",
                          RuntimeWarning, stacklevel=2)
        rho0 = mollify_sqrt(hat, params, r=grid.r)
    else:
        raw_vals = np.asarray(rho_raw, dtype=float)
        hat = farfield_cut(cutoff_density(raw_vals, params), params, grid.r)
        rho0 = mollify_sqrt(hat, params, grid=grid)

    # round-off from squaring the mean may overshoot the band by an ulp
    if np.any(rho0 < lo * (1 - 1e-12)) or np.any(rho0 > hi * (1 + 1e-12)):
        raise ValueError("assembled density violates the admissible band")
    rho0 = np.clip(rho0, lo, hi)
    u0 = build_velocity(m_raw, rho_raw, params, grid, ramp_width=ramp_width)
    if u0[0] != 0.0 or u0[-1] != 0.0:
        raise ValueError("assembled velocity does not vanish at the walls")
    d = doping(grid.r) if isinstance(doping, DopingProfile) else np.asarray(doping, dtype=float)
    fn = data_functionals(rho0, u0, d, params, grid)
    return InitialData(r=np.asarray(grid.r).copy(), rho0=rho0, u0=u0, params=params, **fn)


def raw_relative_energy(rho_raw: Callable, m_raw: Callable, doping: DopingProfile | Callable,
                        params: Params, r_max: float = 60.0, n: int = 60001) -> float:
    """Relative energy of raw data on the whole space, by quadrature on [0, r_max].

    The field is generated from the origin and the exterior field energy
    beyond r_max is added in closed form; raw data must equal the doping
    limit rho_star well before r_max.
    """
    N = params.N
    r = np.linspace(0.0, r_max, n)
    rho = np.asarray(rho_raw(r), dtype=float)
    m = np.asarray(m_raw(r), dtype=float)
    d = np.asarray(doping(r), dtype=float)
    kin = np.divide(0.5 * m * m, rho, out=np.zeros_like(m), where=rho > 0)
    w = r ** (N - 1)
    Q = integrate.cumulative_trapezoid((rho - d) * w, r, initial=0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        phir = np.where(r > 0, -Q / np.where(r > 0, r, 1.0) ** (N - 1), 0.0)
    body = integrate.trapezoid((kin + relative_energy(rho, params) + 0.5 * phir ** 2) * w, r)
    tail = 0.5 * Q[-1] ** 2 * r_max ** (2 - N) / (N - 2)
    return float(params.omega * (body + tail))


def save_initial_data(data: InitialData, path) -> tuple[Path, Path]:
    """CSV with columns r, rho0, u0 plus a JSON sidecar with the functionals."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "rho0", "u0"])
        for row in zip(data.r, data.rho0, data.u0):
            w.writerow([repr(float(x)) for x in row])
    p = data.params
    side = path.with_suffix(".json")
    side.write_text(json.dumps({
        "E0": data.E0, "E1": data.E1, "E2": data.E2, "E3": data.E3,
        "eps": p.eps, "delta": p.delta, "b": p.b, "beta": p.beta,
        "params": asdict(p),
    }, indent=2, sort_keys=True))
    return path, side


def load_initial_data(path) -> InitialData:
    from .model import make_params

    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    pp = meta["params"]
    params = make_params(N=pp["N"], gamma=pp["gamma"], eps=pp["eps"], delta=pp["delta"],
                         b=pp["b"], rho_star=pp["rho_star"], beta=pp["beta"],
                         vartheta=pp["vartheta"])
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return InitialData(r=arr[:, 0], rho0=arr[:, 1], u0=arr[:, 2], E0=meta["E0"],
                       E1=meta["E1"], E2=meta["E2"], E3=meta["E3"], params=params)
