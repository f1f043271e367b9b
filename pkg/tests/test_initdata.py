import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from cnspe.initdata import (assemble, build_velocity, cutoff_density, density_band, farfield_cut,
                            farfield_radius, load_initial_data, mollify, mollify_sqrt,
                            raw_relative_energy, save_initial_data)
from cnspe.model import doping_from_spec, make_grid, make_params

P = make_params(eps=0.1, delta=0.1, b=11.0)


def test_band_values():
    lo, hi = density_band(P)
    assert lo == pytest.approx(1e-3 ** 0.25, rel=1e-14)
    assert hi == pytest.approx(1e-3 ** -0.5, rel=1e-14)


def test_cutoff_density():
    lo, hi = density_band(P)
    out = cutoff_density([0.0, 1.0, 1e6], P)
    assert list(out) == [lo, 1.0, hi]
    with pytest.raises(ValueError):
        cutoff_density([-1.0], P)


@settings(max_examples=40, deadline=None)
@given(vals=st.lists(st.floats(0.0, 1e8), min_size=1, max_size=50))
def test_cutoff_idempotent_and_in_band(vals):
    lo, hi = density_band(P)
    once = cutoff_density(vals, P)
    assert np.all((once >= lo) & (once <= hi))
    assert np.array_equal(cutoff_density(once, P), once)


def test_farfield_cut_and_warning():
    R = farfield_radius(P)
    assert R == pytest.approx(1e-3 ** (-1 / 6), rel=1e-14)
    r = np.array([1.0, R + 0.1])
    out = farfield_cut(np.array([5.0, 5.0]), P, r)
    assert list(out) == [5.0, 1.0]
    short = make_params(eps=0.1, delta=1.0, b=2.0)
    with pytest.warns(RuntimeWarning, match="outside the domain"):
        farfield_cut(np.array([2.0]), short, np.array([1.5]))


@pytest.mark.parametrize("N", [3, 5])
def test_mollify_constant(N):
    p = make_params(N=N)
    g = make_grid(p, 64)
    out = mollify(lambda r: np.full_like(r, 2.5), p, grid=g)
    assert np.max(np.abs(out - 2.5)) <= 1e-10


def test_mollify_quadratic_exact_mean():
    # |x|^2 averaged over a radial kernel: r^2 + sigma^2 <s^2>, with <s^2> from
    # an independent one-dimensional quadrature of the kernel
    p = make_params(N=3, eps=0.0625)
    sigma = 0.5
    J = lambda s: np.exp(1 / (s * s - 1)) if s < 1 else 0.0
    num = integrate.quad(lambda s: J(s) * s ** 4, 0, 1)[0]
    den = integrate.quad(lambda s: J(s) * s ** 2, 0, 1)[0]
    r = np.array([0.0, 0.3, 2.0])
    out = mollify(lambda x: x * x, p, r=r, sigma=sigma)
    assert np.allclose(out, r * r + sigma ** 2 * num / den, rtol=1e-8)


def test_mollify_sqrt_preserves_band():
    g = make_grid(P, 256)
    lo, hi = density_band(P)
    raw = lambda r: np.clip(3.0 * np.exp(-r * r), lo, hi)
    out = mollify_sqrt(raw, P, r=g.r)
    assert np.all(out >= lo * (1 - 1e-12)) and np.all(out <= hi * (1 + 1e-12))
    with pytest.raises(ValueError):
        mollify_sqrt(lambda r: r - 5.0, P, r=g.r)


def test_array_profile_requires_grid():
    with pytest.raises(ValueError):
        mollify(np.ones(10), P)


def test_build_velocity_plateau_and_walls():
    g = make_grid(P, 256)
    u = build_velocity(lambda r: 0.1 * (1 + r), lambda r: 1 + r, P, g)
    assert u[0] == 0.0 and u[-1] == 0.0
    assert np.allclose(u[40:-40], 0.1, rtol=1e-12)
    with pytest.raises(ValueError, match="too coarse"):
        build_velocity(lambda r: r, lambda r: 1 + r, P, make_grid(P, 16))


def test_build_velocity_clamped():
    g = make_grid(P, 64)
    u = build_velocity(lambda r: np.full_like(r, 1e6), lambda r: np.ones_like(r), P, g)
    assert np.max(np.abs(u)) <= density_band(P)[1]


def _bump(r):
    return 1.0 + 2.0 * np.exp(-((r - 1.5) / 0.4) ** 2)


def _assemble(eps, rho_raw=_bump, n=512):
    p = make_params(eps=eps, delta=0.1, b=11.0)
    g = make_grid(p, n)
    d = doping_from_spec("constant", params=p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return assemble(rho_raw, lambda r: np.zeros_like(r), d, p, g), p, d


def test_assembled_band_cellwise():
    init, p, _ = _assemble(0.1)
    lo, hi = density_band(p)
    assert np.all((init.rho0 >= lo) & (init.rho0 <= hi))
    assert init.E0 > 0 and init.E1 > 0 and init.E3 > 0


@pytest.mark.parametrize("rho_raw", [_bump, lambda r: 1.0 + np.exp(-(r - 2.0) ** 2)])
def test_gradient_functional_scales_like_eps_squared(rho_raw):
    e1 = _assemble(0.01, rho_raw)[0].E1
    e2 = _assemble(0.001, rho_raw)[0].E1
    assert e2 / e1 <= 0.02


def test_data_energy_approaches_raw_energy():
    init, p, d = _assemble(0.001)
    raw = raw_relative_energy(_bump, lambda r: np.zeros_like(r), d, p)
    assert abs(init.E0 - raw) / raw < 0.05


def test_raw_energy_of_equilibrium_is_zero():
    d = doping_from_spec("constant", params=P)
    assert raw_relative_energy(lambda r: np.ones_like(r), lambda r: np.zeros_like(r), d, P) == 0.0


def test_raw_energy_kinetic_closed_form():
    # kinetic energy of m = exp(-r^2) at rho = 1: 4 pi int exp(-2 r^2)/2 r^2 dr
    d = doping_from_spec("constant", params=P)
    val = raw_relative_energy(lambda r: np.ones_like(r), lambda r: np.exp(-r * r), d, P)
    assert val == pytest.approx(4 * np.pi * 0.5 * np.sqrt(2 * np.pi) / 16, rel=1e-6)


def test_save_load_roundtrip(tmp_path):
    init, p, _ = _assemble(0.1, n=64)
    csv_path, side = save_initial_data(init, tmp_path / "init.csv")
    assert side.exists()
    back = load_initial_data(csv_path)
    assert back.params == p
    assert np.array_equal(back.rho0, init.rho0) and np.array_equal(back.u0, init.u0)
    assert back.E1 == init.E1
