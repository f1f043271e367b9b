import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cnspe.model import (DopingError, doping_from_spec, make_grid, make_params, surface_area)
from oracles import gaussian_moment_oracle


def test_params_n3_gamma2():
    p = make_params(N=3, gamma=2.0)
    assert p.kappa == pytest.approx(1 / 8, rel=1e-15)
    assert p.alpha == pytest.approx(5 / 6, rel=1e-15)
    assert p.theta == 0.5
    assert p.lam_kernel == pytest.approx(0.5, rel=1e-15)


def test_params_gamma3_kernel_exponent_zero():
    assert make_params(N=3, gamma=3.0).lam_kernel == 0.0


def test_params_n4_gamma_five_thirds():
    p = make_params(N=4, gamma=5 / 3, delta=0.5)
    assert p.alpha == pytest.approx(7 / 8, rel=1e-15)
    assert p.kappa == pytest.approx(1 / 15, rel=1e-15)


def test_default_outer_radius():
    assert make_params(delta=0.25).b == pytest.approx(5.0)


@pytest.mark.parametrize("kw, msg", [
    (dict(delta=0.1, b=5.0), "domain too small"),
    (dict(gamma=1.0), "gamma"),
    (dict(gamma=0.5), "gamma"),
    (dict(N=2), "N"),
    (dict(eps=0.0), "eps"),
    (dict(beta=1.0), "beta"),
    (dict(vartheta=1.0), "vartheta"),
    (dict(rho_star=0.0), "far-field"),
])
def test_params_rejects(kw, msg):
    with pytest.raises(ValueError, match=msg):
        make_params(**kw)


@settings(max_examples=60, deadline=None)
@given(N=st.integers(3, 8), gamma=st.floats(1.01, 6.0), delta=st.floats(0.05, 1.0))
def test_params_invariants(N, gamma, delta):
    p = make_params(N=N, gamma=gamma, delta=delta)
    assert abs(p.kappa - (gamma - 1) ** 2 / (4 * gamma)) <= 1e-15 * p.kappa
    assert (N - 1) / N < p.alpha < 1
    assert p.lam_kernel > -0.5
    assert p.theta == (gamma - 1) / 2
    assert p.b >= 1 + 1 / delta - 1e-12
    # rebuilding from the base fields reproduces every derived field
    assert p.replace() == p


def test_surface_area():
    assert surface_area(3) == pytest.approx(4 * math.pi, rel=1e-15)
    assert surface_area(4) == pytest.approx(2 * math.pi ** 2, rel=1e-15)


def test_grid_example_b11():
    g = make_grid(make_params(delta=0.1, b=11.0), 110)
    assert g.h == pytest.approx(10.9 / 110, rel=1e-14)
    assert g.r[0] == pytest.approx(0.1 + g.h / 2, rel=1e-14)
    assert np.allclose(np.diff(g.r), g.h, rtol=0, atol=1e-13)


def test_grid_example_unit():
    g = make_grid(make_params(delta=1.0, b=2.0), 16)
    assert g.h == 1 / 16
    assert g.r[15] == pytest.approx(2 - 1 / 32, rel=1e-15)
    assert g.delta == 1.0 and g.b == 2.0


def test_grid_rejects_coarse():
    with pytest.raises(ValueError):
        make_grid(make_params(), 15)


def test_grid_arrays_read_only():
    g = make_grid(make_params(), 32)
    with pytest.raises(ValueError):
        g.r[0] = 0.0


@pytest.mark.parametrize("N", [3, 4, 5])
def test_volume_of_constant_exact(N):
    p = make_params(N=N, delta=0.5)
    g = make_grid(p, 16)
    exact = (p.b ** N - p.delta ** N) / N
    assert g.integrate(np.ones(16)) == pytest.approx(exact, rel=1e-14)
    # the centre-point weight r^(N-1) h is second-order accurate
    approx = float(np.sum(g.r ** (N - 1) * g.h))
    assert abs(approx - exact) / exact < 0.1 * g.h ** 2 * N ** 2


@pytest.mark.parametrize("k", [0, 1, 2])
def test_quadrature_second_order(k):
    p = make_params(N=3, delta=0.5)
    errs = []
    for n in (32, 64, 128):
        g = make_grid(p, n)
        exact = (p.b ** (k + 3) - p.delta ** (k + 3)) / (k + 3)
        errs.append(abs(g.integrate(g.r ** k) - exact) / exact)
    if k == 0:
        assert max(errs) < 1e-14
    else:
        assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_power_volume_exact():
    g = make_grid(make_params(delta=0.5), 40)
    k = 4.5
    assert np.sum(g.power_volume(k)) == pytest.approx((g.b ** 5.5 - g.delta ** 5.5) / 5.5, rel=1e-13)


def test_doping_constant():
    d = doping_from_spec("constant", {"rho_star": 1.0})
    assert np.all(d(np.linspace(0, 10, 5)) == 1.0)
    assert all(v == 0.0 for v in d.moments.values())


def test_doping_bump_moment_matches_gaussian_oracle():
    d = doping_from_spec("bump", {"amplitude": 1.0, "width": 1.0, "center": 0.0, "rho_star": 1.0},
                         params=make_params(N=3, gamma=2.0))
    assert d.moments[2.0] == pytest.approx(gaussian_moment_oracle(), rel=1e-8)
    # gamma/(gamma-1) = 2 for gamma = 2
    assert set(d.moments) == {1.0, 2.0}


def test_doping_step_support():
    R, w = 2.0, 0.3
    d = doping_from_spec("step-smoothed", {"amplitude": 0.7, "radius": R, "width": w})
    r = np.linspace(R + 5 * w, R + 100, 500)
    assert np.max(np.abs(d(r) - 1.0)) < 1e-12
    assert d(np.array([0.0]))[0] == pytest.approx(1.7)
    # C-infinity blend stays within the two plateau values
    mid = d(np.linspace(R, R + 4 * w, 200))
    assert np.all((mid >= 1.0) & (mid <= 1.7))


def test_doping_not_integrable():
    with pytest.raises(DopingError, match="not integrable"):
        doping_from_spec("custom", {"eval": lambda r: 1.0 + 1.0 / (1.0 + r)})


def test_doping_negative_rejected():
    with pytest.raises(DopingError):
        doping_from_spec("bump", {"amplitude": -2.0})


def test_doping_unknown_kind():
    with pytest.raises(ValueError):
        doping_from_spec("sawtooth")
