"""Gamma-law thermodynamics, BD viscosities and weak entropy pairs.

Weak entropies are generated by the kernel ``[rho^(2 theta) - v^2]_+^lam``.
With ``s = u + rho^theta * t`` the prefactor collapses to ``rho`` and

    eta^psi = rho * int_{-1}^{1} (1 - t^2)^lam psi(u + rho^theta t) dt,
    q^psi   = rho * int_{-1}^{1} (1 - t^2)^lam (u + theta rho^theta t) psi(u + rho^theta t) dt.

We integrate in ``t = sin(phi)``, which turns the weight into the bounded
``cos(phi)^(2 lam + 1)``, using Gauss-Legendre in phi. Kinks of psi are
passed as break points so that each panel sees a smooth integrand.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .model import Params

__all__ = [
    "pressure",
    "internal_energy",
    "relative_energy",
    "sound_speed",
    "viscosities",
    "mu_prime",
    "relative_energy_equivalence_check",
    "EquivalenceResult",
    "kernel_chi",
    "kernel_moment",
    "c_lambda",
    "weak_entropy_pair",
    "mechanical_pair",
    "relative_mechanical_pair",
    "eta_sharp",
    "sharp_derivatives",
    "relative_sharp",
    "relative_sharp_derivatives",
    "relative_entropy_flux_ratio",
    "fit_sharp_bounds",
    "SharpBounds",
    "EntropyPair",
    "entropy_pair",
]


def pressure(rho, params: Params):
    return params.kappa * np.power(rho, params.gamma)


def internal_energy(rho, params: Params):
    return params.kappa / (params.gamma - 1.0) * np.power(rho, params.gamma)


def relative_energy(rho, params: Params):
    """Internal energy minus its tangent at rho_star; >= 0, zero only at rho_star."""
    g, rs = params.gamma, params.rho_star
    rho = np.asarray(rho, dtype=float)
    val = params.kappa / (g - 1.0) * (rho ** g - rs ** g - g * rs ** (g - 1.0) * (rho - rs))
    # round-off can leave tiny negatives near rho_star
    return np.maximum(val, 0.0)


def sound_speed(rho, params: Params):
    return np.sqrt(params.gamma * params.kappa * np.power(rho, params.gamma - 1.0))


def viscosities(rho, params: Params):
    """Shear and bulk coefficients ``mu = rho + delta rho^alpha``, ``lam = delta (alpha-1) rho^alpha``."""
    ra = params.delta * np.power(rho, params.alpha)
    return rho + ra, (params.alpha - 1.0) * ra


def mu_prime(rho, params: Params):
    return 1.0 + params.delta * params.alpha * np.power(rho, params.alpha - 1.0)


@dataclass(frozen=True)
class EquivalenceResult:
    ok: bool
    c1: float
    c2: float
    c_gamma: float
    violating: float | None = None

    def __bool__(self) -> bool:
        return self.ok


def relative_energy_equivalence_check(rho, params: Params) -> EquivalenceResult:
    """Fit and check the two-sided comparison of e(rho, rho_star) with |rho - rho_star|^{2 or gamma}.

    On the band [rho_star/2, 2 rho_star] the comparison function is the
    square, outside it the gamma power. Also fits the lower bound
    ``e >= C_gamma rho (rho^theta - rho_star^theta)^2``. Constants are the
    extreme ratios over the sample; the check fails if any is not positive
    and finite.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    rs, g, th = params.rho_star, params.gamma, params.theta
    e = relative_energy(rho, params)
    diff = np.abs(rho - rs)
    band = (rho >= 0.5 * rs) & (rho <= 2.0 * rs)
    comp = np.where(band, diff ** 2, diff ** g)
    lower = rho * (rho ** th - rs ** th) ** 2

    mask = comp > 0
    if not mask.any():
        return EquivalenceResult(True, 0.0, 0.0, 0.0)
    ratio = e[mask] / comp[mask]
    c1, c2 = float(ratio.min()), float(ratio.max())
    lmask = lower > 0
    c_gamma = float((e[lmask] / lower[lmask]).min()) if lmask.any() else np.inf

    # zero comparison function must come with zero energy
    bad_zero = (~mask) & (e > 0)
    if bad_zero.any():
        return EquivalenceResult(False, c1, c2, c_gamma, float(rho[bad_zero][0]))
    if not (c1 > 0 and np.isfinite(c2)):
        idx = np.argmin(ratio) if not c1 > 0 else np.argmax(ratio)
        return EquivalenceResult(False, c1, c2, c_gamma, float(rho[mask][idx]))
    if not (c_gamma > 0 and np.isfinite(c_gamma)):
        idx = np.argmin(e[lmask] / lower[lmask])
        return EquivalenceResult(False, c1, c2, c_gamma, float(rho[lmask][idx]))
    return EquivalenceResult(True, c1, c2, c_gamma)


# --------------------------------------------------------------------------
# entropy kernel

def kernel_chi(rho, v, params: Params):
    """``max(rho^(2 theta) - v^2, 0)^lam``; zero outside |v| < rho^theta.

    For lam < 0 the value blows up at the edge of the support and is +inf
    exactly there.
    """
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    base = np.power(rho, 2.0 * params.theta) - v * v
    lam = params.lam_kernel
    inside = base > 0
    with np.errstate(divide="ignore"):
        out = np.where(inside, np.power(np.where(inside, base, 1.0), lam), 0.0)
        if lam < 0:
            out = np.where(base == 0, np.inf, out)
    return out[()] if out.ndim == 0 else out


def kernel_moment(k: int, lam: float) -> float:
    """``int_{-1}^{1} t^k (1 - t^2)^lam dt`` in closed form (Beta function)."""
    if k % 2:
        return 0.0
    return float(special.beta((k + 1) / 2.0, lam + 1.0))


def c_lambda(params: Params) -> float:
    return kernel_moment(0, params.lam_kernel)


@lru_cache(maxsize=32)
def _gauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _panels(breaks: np.ndarray, n_quad: int):
    """Map Gauss-Legendre nodes onto consecutive panels in phi.

    ``breaks`` has shape (P, k+1), ascending along the last axis, spanning
    [-pi/2, pi/2]. Returns phi and weights of shape (P, k * n_quad).
    """
    x, w = _gauss(n_quad)
    a = breaks[:, :-1, None]
    b = breaks[:, 1:, None]
    half = 0.5 * (b - a)
    phi = (0.5 * (a + b) + half * x).reshape(breaks.shape[0], -1)
    wt = (half * w).reshape(breaks.shape[0], -1)
    return phi, wt


def _kink_breaks(rho_t, u, kinks: Sequence[float]):
    """Panel break points in phi for kinks of psi located at s in ``kinks``."""
    P = u.shape[0]
    cols = [np.full(P, -np.pi / 2)]
    for s0 in kinks:
        t0 = np.clip((s0 - u) / rho_t, -1.0, 1.0)
        cols.append(np.arcsin(t0))
    cols.append(np.full(P, np.pi / 2))
    br = np.stack(cols, axis=1)
    br[:, 1:-1] = np.sort(br[:, 1:-1], axis=1)
    return br


def weak_entropy_pair(psi: Callable, rho, m, params: Params, n_quad: int = 128,
                      kinks: Sequence[float] = ()):
    """Entropy pair generated by ``psi`` through the kernel representation.

    Parameters
    ----------
    psi : callable
        Vectorised generating function of s.
    rho, m : float or array
        Density (> 0) and momentum.
    n_quad : int
        Gauss-Legendre nodes per panel.
    kinks : sequence of float
        Points in s where psi is not smooth.

    Returns
    -------
    eta, q : float or ndarray
    """
    if n_quad < 32:
        raise ValueError("n_quad must be >= 32")
    rho_a = np.atleast_1d(np.asarray(rho, dtype=float))
    m_a = np.atleast_1d(np.asarray(m, dtype=float))
    rho_a, m_a = np.broadcast_arrays(rho_a, m_a)
    if np.any(rho_a <= 0):
        raise ValueError("kernel support empty: rho must be > 0")
    shape = rho_a.shape
    rho_a, m_a = rho_a.ravel(), m_a.ravel()
    u = m_a / rho_a
    rt = rho_a ** params.theta
    phi, wt = _panels(_kink_breaks(rt, u, kinks), n_quad)
    sphi = np.sin(phi)
    weight = wt * np.cos(phi) ** (2.0 * params.lam_kernel + 1.0)
    s = u[:, None] + rt[:, None] * sphi
    ps = psi(s)
    eta = rho_a * np.sum(weight * ps, axis=1)
    q = rho_a * np.sum(weight * (u[:, None] + params.theta * rt[:, None] * sphi) * ps, axis=1)
    if np.ndim(rho) == 0 and np.ndim(m) == 0:
        return float(eta[0]), float(q[0])
    return eta.reshape(shape), q.reshape(shape)


def mechanical_pair(rho, m, params: Params):
    """Mechanical energy and its flux, ``m^2/(2 rho) + e(rho)`` and ``m^3/(2 rho^2) + m e'(rho)``."""
    rho = np.asarray(rho, dtype=float)
    u = np.divide(m, rho, out=np.zeros_like(rho * 1.0 * np.asarray(m)), where=rho > 0)
    e = internal_energy(rho, params)
    de = params.gamma * params.kappa / (params.gamma - 1.0) * np.power(rho, params.gamma - 1.0)
    return 0.5 * m * u + e, 0.5 * m * u * u + m * de


def relative_mechanical_pair(rho, m, params: Params):
    """Relative mechanical energy ``m^2/(2 rho) + e(rho, rho_star)`` and its flux.

    The flux subtracts the linear part consistently:
    ``q* - e'(rho_star) m``.
    """
    rho = np.asarray(rho, dtype=float)
    u = np.divide(m, rho, out=np.zeros_like(rho * 1.0 * np.asarray(m)), where=rho > 0)
    g, k, rs = params.gamma, params.kappa, params.rho_star
    de = g * k / (g - 1.0) * np.power(rho, g - 1.0)
    de_star = g * k / (g - 1.0) * rs ** (g - 1.0)
    return 0.5 * m * u + relative_energy(rho, params), 0.5 * m * u * u + m * (de - de_star)


# --------------------------------------------------------------------------
# the pair generated by psi(s) = s|s|/2

def _sharp_integrals(rho, m, params: Params, n_quad: int, which: str):
    rho_a = np.atleast_1d(np.asarray(rho, dtype=float))
    m_a = np.atleast_1d(np.asarray(m, dtype=float))
    rho_a, m_a = np.broadcast_arrays(rho_a, m_a)
    shape = rho_a.shape
    rho_a, m_a = rho_a.ravel().copy(), m_a.ravel()
    vac = rho_a <= 0
    rho_a[vac] = 1.0
    u = np.where(vac, 0.0, m_a / rho_a)
    rt = rho_a ** params.theta
    phi, wt = _panels(_kink_breaks(rt, u, (0.0,)), n_quad)
    sphi = np.sin(phi)
    weight = wt * np.cos(phi) ** (2.0 * params.lam_kernel + 1.0)
    w = u[:, None] + rt[:, None] * sphi
    aw = np.abs(w)
    th = params.theta
    if which == "pair":
        eta = 0.5 * rho_a * np.sum(weight * w * aw, axis=1)
        q = 0.5 * rho_a * np.sum(weight * (u[:, None] + th * rt[:, None] * sphi) * w * aw, axis=1)
        out = (eta, q)
    else:
        d_rho = np.sum(weight * (-0.5 * u[:, None] + (th + 0.5) * rt[:, None] * sphi) * aw, axis=1)
        d_m = np.sum(weight * aw, axis=1)
        out = (d_rho, d_m)
    res = []
    for arr in out:
        arr = np.where(vac, 0.0, arr)
        res.append(float(arr[0]) if np.ndim(rho) == 0 and np.ndim(m) == 0 else arr.reshape(shape))
    return tuple(res)


def eta_sharp(rho, m, params: Params, n_quad: int = 128):
    """Entropy pair of ``psi(s) = s|s|/2``; vanishes at vacuum.

    ``eta`` is odd and ``q`` even in ``m``.
    """
    return _sharp_integrals(rho, m, params, n_quad, "pair")


def sharp_derivatives(rho, m, params: Params, n_quad: int = 128):
    """``(d eta/d rho at fixed m, d eta/d m at fixed rho)`` by differentiating under the integral."""
    return _sharp_integrals(rho, m, params, n_quad, "deriv")


def _sharp_reference(params: Params, n_quad: int):
    rs = params.rho_star
    _, q0 = eta_sharp(rs, 0.0, params, n_quad)
    _, dm0 = sharp_derivatives(rs, 0.0, params, n_quad)
    return q0, dm0


def relative_sharp(rho, m, params: Params, n_quad: int = 128):
    """Sharp pair relative to the far-field state (rho_star, 0)."""
    eta, q = eta_sharp(rho, m, params, n_quad)
    eta0, _ = eta_sharp(params.rho_star, 0.0, params, n_quad)
    q0, dm0 = _sharp_reference(params, n_quad)
    rho = np.asarray(rho, dtype=float)
    m = np.asarray(m, dtype=float)
    mu2 = np.divide(m * m, rho, out=np.zeros(np.broadcast(rho, m).shape), where=rho > 0)
    flux = mu2 + pressure(rho, params) - pressure(params.rho_star, params)
    return eta - eta0 - dm0 * m, q - q0 - dm0 * flux


def relative_sharp_derivatives(rho, m, params: Params, n_quad: int = 128):
    d_rho, d_m = sharp_derivatives(rho, m, params, n_quad)
    _, dm0 = _sharp_reference(params, n_quad)
    return d_rho, d_m - dm0


def relative_entropy_flux_ratio(rho, m, params: Params, n_quad: int = 128):
    """Ratio ``(-q~ + m d_rho eta~ + m u d_m eta~) / (rho u^2 + e(rho, rho_star))``.

    The numerator is the geometric source of the relative sharp pair in the
    radial system; it is bounded by a multiple of the relative energy. The
    0/0 point (rho_star, 0) returns 0.
    """
    rho = np.asarray(rho, dtype=float)
    m = np.asarray(m, dtype=float)
    _, qt = relative_sharp(rho, m, params, n_quad)
    d_rho, d_m = relative_sharp_derivatives(rho, m, params, n_quad)
    u = m / rho
    num = -qt + m * d_rho + m * u * d_m
    den = m * u + relative_energy(rho, params)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return ratio[()] if np.ndim(ratio) == 0 else ratio


@dataclass(frozen=True)
class SharpBounds:
    """Fitted constants in ``|eta#| <= C (rho u^2 + rho^gamma)`` and ``q# >= c (rho|u|^3 + rho^(gamma+theta))``."""

    C_upper: float
    c_lower: float

    @property
    def ok(self) -> bool:
        return np.isfinite(self.C_upper) and self.c_lower > 0


def fit_sharp_bounds(params: Params, rho_range=(0.1, 2.0), u_range=(-2.0, 2.0),
                     n: int = 81, n_quad: int = 128) -> SharpBounds:
    rho, u = np.meshgrid(np.linspace(*rho_range, n), np.linspace(*u_range, n), indexing="ij")
    rho, u = rho.ravel(), u.ravel()
    eta, q = eta_sharp(rho, rho * u, params, n_quad)
    g, th = params.gamma, params.theta
    upper = np.abs(eta) / (rho * u * u + rho ** g)
    lower = q / (rho * np.abs(u) ** 3 + rho ** (g + th))
    return SharpBounds(float(upper.max()), float(lower.min()))


@dataclass(frozen=True)
class EntropyPair:
    """A closed-form or quadrature entropy pair, tagged by kind."""

    eta: Callable
    q: Callable
    kind: str


def entropy_pair(kind: str, params: Params, n_quad: int = 128) -> EntropyPair:
    """Entropy pair by name: ``mechanical``, ``relative-mechanical``, ``sharp``, ``relative-sharp``."""
    if kind == "mechanical":
        return EntropyPair(lambda r, m: mechanical_pair(r, m, params)[0],
                           lambda r, m: mechanical_pair(r, m, params)[1], kind)
    if kind == "relative-mechanical":
        return EntropyPair(lambda r, m: relative_mechanical_pair(r, m, params)[0],
                           lambda r, m: relative_mechanical_pair(r, m, params)[1], kind)
    if kind == "sharp":
        return EntropyPair(lambda r, m: eta_sharp(r, m, params, n_quad)[0],
                           lambda r, m: eta_sharp(r, m, params, n_quad)[1], kind)
    if kind == "relative-sharp":
        return EntropyPair(lambda r, m: relative_sharp(r, m, params, n_quad)[0],
                           lambda r, m: relative_sharp(r, m, params, n_quad)[1], kind)
    raise ValueError(f"unknown entropy pair {kind!r}")
