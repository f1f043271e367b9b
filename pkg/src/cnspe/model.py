"""Parameters, radial grid, state and doping profiles.

Everything else in the package is written against these types. All
quantities are nondimensional.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import integrate

__all__ = [
    "Params",
    "RadialGrid",
    "State",
    "DopingProfile",
    "DopingError",
    "make_params",
    "make_grid",
    "doping_from_spec",
    "surface_area",
]


def surface_area(N: int) -> float:
    """Area of the unit sphere in R^N, 2 pi^(N/2) / Gamma(N/2)."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


@dataclass(frozen=True)
class Params:
    """Model and approximation parameters.

    The derived fields ``kappa``, ``alpha``, ``theta`` and ``lam_kernel`` are
    filled by :func:`make_params`; construct through it.
    """

    N: int
    gamma: float
    kappa: float
    eps: float
    delta: float
    b: float
    rho_star: float
    alpha: float
    beta: float
    vartheta: float
    theta: float
    lam_kernel: float

    @property
    def omega(self) -> float:
        return surface_area(self.N)

    def replace(self, **changes) -> "Params":
        """Rebuild with some base parameters changed (derived fields recomputed)."""
        base = dict(N=self.N, gamma=self.gamma, eps=self.eps, delta=self.delta,
                    b=self.b, rho_star=self.rho_star, beta=self.beta,
                    vartheta=self.vartheta)
        base.update(changes)
        return make_params(**base)


def make_params(N: int = 3, gamma: float = 2.0, eps: float = 0.1, delta: float = 0.1,
                b: float | None = None, rho_star: float = 1.0, beta: float = 1e-2,
                vartheta: float = 0.5) -> Params:
    """Validate base parameters and derive kappa, alpha, theta and the kernel exponent.

    ``b`` defaults to the smallest admissible outer radius ``1 + 1/delta``.
    """
    if int(N) != N or N < 3:
        raise ValueError(f"dimension N must be an integer >= 3, got {N}")
    N = int(N)
    gamma = float(gamma)
    if not gamma > 1.0:
        raise ValueError(f"adiabatic exponent must satisfy gamma > 1, got {gamma}")
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    if b is None:
        b = 1.0 + 1.0 / delta
    # tiny slack so that b = 1 + 1/delta typed by hand is accepted
    if b < (1.0 + 1.0 / delta) * (1.0 - 1e-12):
        raise ValueError(f"domain too small: b = {b} < 1 + 1/delta = {1.0 + 1.0 / delta}")
    if not rho_star > 0.0:
        raise ValueError(f"far-field density must be positive, got {rho_star}")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if not 0.0 < vartheta < 1.0:
        raise ValueError(f"vartheta must lie in (0, 1), got {vartheta}")

    kappa = (gamma - 1.0) ** 2 / (4.0 * gamma)
    alpha = (2.0 * N - 1.0) / (2.0 * N)
    theta = (gamma - 1.0) / 2.0
    lam_kernel = (3.0 - gamma) / (2.0 * (gamma - 1.0))
    return Params(N=N, gamma=gamma, kappa=kappa, eps=float(eps), delta=float(delta),
                  b=float(b), rho_star=float(rho_star), alpha=alpha, beta=float(beta),
                  vartheta=float(vartheta), theta=theta, lam_kernel=lam_kernel)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform cell-centred grid on [delta, b].

    ``vol[i]`` is the exact shell volume of cell i divided by the sphere area,
    ``(edge[i+1]**N - edge[i]**N) / N``; it agrees with ``r[i]**(N-1) * h`` to
    O(h^2) and makes the discrete measure exact for constants.
    """

    r: np.ndarray
    h: float
    n_cells: int
    N: int
    edges: np.ndarray
    vol: np.ndarray

    @property
    def delta(self) -> float:
        return float(self.edges[0])

    @property
    def b(self) -> float:
        return float(self.edges[-1])

    def integrate(self, f) -> float:
        """Integral of cell values ``f`` against r^(N-1) dr."""
        return float(np.dot(f, self.vol))

    def partial_volume(self, lo: float, hi: float) -> np.ndarray:
        """Per-cell r^(N-1)dr measure of the overlap of each cell with [lo, hi]."""
        a = np.clip(self.edges[:-1], lo, hi)
        c = np.clip(self.edges[1:], lo, hi)
        return (c ** self.N - a ** self.N) / self.N

    def power_volume(self, k: float) -> np.ndarray:
        """Per-cell ``int r^k dr``, exact."""
        e = self.edges
        if k == -1:
            return np.log(e[1:] / e[:-1])
        return (e[1:] ** (k + 1) - e[:-1] ** (k + 1)) / (k + 1)

    def partial_length(self, lo: float, hi: float) -> np.ndarray:
        """Per-cell Lebesgue length of the overlap of each cell with [lo, hi]."""
        a = np.clip(self.edges[:-1], lo, hi)
        c = np.clip(self.edges[1:], lo, hi)
        return c - a


def make_grid(params: Params, n_cells: int) -> RadialGrid:
    if n_cells < 16:
        raise ValueError(f"n_cells must be >= 16, got {n_cells}")
    n = int(n_cells)
    delta, b, N = params.delta, params.b, params.N
    h = (b - delta) / n
    edges = delta + h * np.arange(n + 1)
    edges[-1] = b
    r = delta + h * (np.arange(n) + 0.5)
    vol = (edges[1:] ** N - edges[:-1] ** N) / N
    for arr in (r, edges, vol):
        arr.setflags(write=False)
    return RadialGrid(r=r, h=h, n_cells=n, N=N, edges=edges, vol=vol)


@dataclass
class State:
    """Density and momentum per cell at time ``t``."""

    rho: np.ndarray
    mom: np.ndarray
    t: float = 0.0

    @property
    def u(self) -> np.ndarray:
        return np.divide(self.mom, self.rho, out=np.zeros_like(self.mom), where=self.rho > 0)

    def copy(self) -> "State":
        return State(self.rho.copy(), self.mom.copy(), self.t)


class DopingError(ValueError):
    """Raised when a doping profile fails the decay/integrability assumptions."""


@dataclass(frozen=True)
class DopingProfile:
    """Background doping d(r) with far-field value ``rho_star``.

    ``moments`` maps the exponent j to the integral of |d - rho_star|^j r^(N-1)
    over (0, inf), for j in (1, 2, gamma/(gamma-1)).
    """

    eval: Callable[[np.ndarray], np.ndarray]
    rho_star: float
    moments: Mapping[float, float]
    support_radius: float
    kind: str = "custom"
    spec: Mapping[str, float] = field(default_factory=dict)

    def __call__(self, r):
        return self.eval(np.asarray(r, dtype=float))


def _smooth_unit_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)

    def bump(y):
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = np.exp(-1.0 / y[pos])
        return out

    a = bump(x)
    c = bump(1.0 - x)
    return a / (a + c)


def _moment(fn, rho_star, j, N, support):
    def integrand(r):
        return abs(float(fn(np.array([r]))[0]) - rho_star) ** j * r ** (N - 1)

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if math.isfinite(support):
                val, err = integrate.quad(integrand, 0.0, support, epsrel=1e-8,
                                          epsabs=1e-14, limit=400)
                tail, terr = integrate.quad(integrand, support, np.inf, epsrel=1e-8,
                                            epsabs=1e-14, limit=400)
                val, err = val + tail, err + terr
            else:
                val, err = integrate.quad(integrand, 0.0, np.inf, epsrel=1e-8,
                                          epsabs=1e-14, limit=400)
        except integrate.IntegrationWarning as exc:
            raise DopingError(f"doping not integrable (moment j={j}): {exc}") from None
    if not (math.isfinite(val) and err <= 1e-6 * max(abs(val), 1.0)):
        raise DopingError(f"doping not integrable (moment j={j}): value {val}, error {err}")
    return val


def doping_from_spec(kind: str, spec: Mapping | None = None,
                     params: Params | None = None) -> DopingProfile:
    """Build a doping profile from a small declared family.

    Parameters
    ----------
    kind : {"constant", "bump", "step-smoothed", "custom"}
        ``bump`` is ``rho_star + amplitude * exp(-((r - center)/width)**2)``;
        ``step-smoothed`` is ``rho_star + amplitude`` for r <= radius, blending
        to ``rho_star`` over [radius, radius + 4*width] with a C-infinity step;
        ``custom`` takes a callable under ``spec["eval"]``.
    spec : mapping
        Shape parameters. ``N`` and ``gamma`` are read from ``params`` when
        given, otherwise from ``spec``.
    """
    spec = dict(spec or {})
    N = params.N if params is not None else int(spec.get("N", 3))
    gamma = params.gamma if params is not None else float(spec.get("gamma", 2.0))
    rho_star = float(spec.get("rho_star", params.rho_star if params is not None else 1.0))

    if kind == "constant":
        def fn(r):
            return np.full_like(np.asarray(r, dtype=float), rho_star)
        support = 0.0
    elif kind == "bump":
        A = float(spec.get("amplitude", 1.0))
        w = float(spec.get("width", 1.0))
        c = float(spec.get("center", 0.0))
        if A < -rho_star:
            raise DopingError("bump amplitude would make the doping negative")

        def fn(r):
            return rho_star + A * np.exp(-(((np.asarray(r, dtype=float) - c) / w) ** 2))
        # exp(-x^2) < 1e-16 for x > 6.1
        support = c + 6.1 * w
    elif kind == "step-smoothed":
        A = float(spec.get("amplitude", 1.0))
        w = float(spec.get("width", 0.5))
        R = float(spec.get("radius", 2.0))
        if A < -rho_star:
            raise DopingError("step amplitude would make the doping negative")

        def fn(r):
            return rho_star + A * (1.0 - _smooth_unit_step((np.asarray(r, dtype=float) - R) / (4.0 * w)))
        support = R + 4.0 * w
    elif kind == "custom":
        user = spec["eval"]

        def fn(r):
            return np.asarray(user(np.asarray(r, dtype=float)), dtype=float)
        support = float(spec.get("support_radius", math.inf))
    else:
        raise ValueError(f"unknown doping kind {kind!r}")

    probe_end = max(support, 1.0) + 10.0 if math.isfinite(support) else 100.0
    probe = fn(np.linspace(0.0, probe_end, 257))
    if np.any(probe < 0) or not np.all(np.isfinite(probe)):
        raise DopingError("doping must be finite and nonnegative")
    if math.isfinite(support):
        far = fn(np.linspace(support, support + 50.0, 64) + 1e-9)
        if np.max(np.abs(far - rho_star)) > 1e-10:
            raise DopingError("doping does not approach rho_star beyond its support radius")

    moments = {}
    for j in (1.0, 2.0, gamma / (gamma - 1.0)):
        if kind == "constant":
            moments[j] = 0.0
        else:
            moments[j] = _moment(fn, rho_star, j, N, support)
    shape = {k: v for k, v in spec.items() if k != "eval"}
    return DopingProfile(eval=fn, rho_star=rho_star, moments=moments,
                         support_radius=support, kind=kind, spec=shape)
