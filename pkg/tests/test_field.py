import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cnspe.field import (compute_field, field_from_charge, mass_invariant_check, tail_potential,
                         write_snapshot_csv)
from cnspe.model import State, doping_from_spec, make_grid, make_params
from oracles import constant_charge_field


@pytest.mark.parametrize("N", [3, 4])
def test_constant_charge_closed_form(N):
    p = make_params(N=N, delta=0.5, b=4.0)
    g = make_grid(p, 64)
    c = 0.37
    snap = field_from_charge(np.full(64, c), g, p)
    ref = constant_charge_field(c, g.r, p.delta, N)
    assert np.max(np.abs(snap.phir - ref)) <= 1e-10
    assert snap.Mb == pytest.approx(-p.omega * c * (p.b ** N - p.delta ** N) / N, rel=1e-13)


def test_piecewise_constant_charge_closed_form():
    p = make_params(N=3, delta=0.5, b=4.0)
    g = make_grid(p, 70)
    rng = np.random.default_rng(5)
    q = rng.normal(size=70)
    snap = field_from_charge(q, g, p)
    # exact Q at the centre of cell i: full shells below plus the partial shell
    e = g.edges
    for i in (0, 13, 69):
        Q = sum(q[j] * (e[j + 1] ** 3 - e[j] ** 3) / 3 for j in range(i))
        Q += q[i] * (g.r[i] ** 3 - e[i] ** 3) / 3
        assert snap.phir[i] == pytest.approx(-Q / g.r[i] ** 2, abs=1e-10)


def test_neutral_configuration_has_no_field():
    p = make_params()
    g = make_grid(p, 128)
    d = doping_from_spec("bump", {"amplitude": 0.5, "width": 0.4, "center": 1.5}, params=p)
    s = State(d(g.r), np.zeros(128))
    snap = compute_field(s, d, g, p)
    assert np.all(snap.phir == 0) and np.all(snap.phi == 0)
    assert snap.Mb == 0 and snap.field_energy == 0


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2 ** 16))
def test_field_linear_in_charge(a, b, seed):
    p = make_params()
    g = make_grid(p, 32)
    rng = np.random.default_rng(seed)
    q1, q2 = rng.normal(size=32), rng.normal(size=32)
    f1, f2 = field_from_charge(q1, g, p), field_from_charge(q2, g, p)
    f = field_from_charge(a * q1 + b * q2, g, p)
    scale = 1 + np.abs(a * f1.phir) + np.abs(b * f2.phir)
    assert np.all(np.abs(f.phir - a * f1.phir - b * f2.phir) <= 1e-12 * scale)
    assert abs(f.Mb - a * f1.Mb - b * f2.Mb) <= 1e-12 * (1 + abs(a * f1.Mb) + abs(b * f2.Mb))


def test_tail_potential_values():
    r = np.array([11.0, 20.0])
    # Mb/omega = -1 in three dimensions gives Phi = 1/r, Phi_r = -1/r^2
    assert np.allclose(tail_potential(r, -1.0, 3), 1 / r, rtol=1e-15)
    phir_tail = -1.0 * r ** (1 - 3)
    assert np.allclose(np.gradient(tail_potential(np.linspace(11, 12, 1001), -1.0, 3),
                                   0.001, edge_order=2),
                       -1 / np.linspace(11, 12, 1001) ** 2, rtol=1e-6)
    assert np.allclose(phir_tail, -1 / r ** 2)


def test_potential_continuous_at_outer_wall():
    p = make_params()
    g = make_grid(p, 256)
    q = np.exp(-(g.r - 2) ** 2)
    snap = field_from_charge(q, g, p)
    phi_b = tail_potential(g.b, snap.tail_coeff, 3)
    # linear extrapolation of the interior potential reaches the tail value
    slope = (snap.phi[-1] - snap.phi[-2]) / g.h
    assert snap.phi[-1] + 0.5 * g.h * slope == pytest.approx(phi_b, abs=1e-5)
    # interior r^(N-1) Phi_r approaches the tail constant as r -> b
    assert snap.phir[-1] * g.r[-1] ** 2 == pytest.approx(snap.tail_coeff, rel=1e-3)


def test_potential_derivative_matches_field():
    p = make_params()
    g = make_grid(p, 512)
    snap = field_from_charge(np.sin(g.r), g, p)
    dphi = np.gradient(snap.phi, g.h, edge_order=2)
    assert np.max(np.abs(dphi - snap.phir)) < 1e-3


def test_mass_invariant_check():
    assert mass_invariant_check([1.0, 1.0, 1.0 + 1e-14]) < 1e-10
    drift = mass_invariant_check([2.0, 2.0 + 3e-5])
    assert drift == pytest.approx(1e-5) and drift > 1e-6
    assert mass_invariant_check([]) == 0.0


def test_snapshot_csv(tmp_path):
    p = make_params()
    g = make_grid(p, 32)
    s = State(np.full(32, 1.2), np.full(32, 0.3))
    snap = compute_field(s, np.ones(32), g, p)
    path = write_snapshot_csv(tmp_path / "a" / "snap.csv", g, s, snap)
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "rho", "u", "phir", "phi"]
    assert len(rows) == 33
    assert float(rows[1][2]) == pytest.approx(0.25)
    assert float(rows[5][3]) == snap.phir[4]
