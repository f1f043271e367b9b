"""Self-consistent electric field of the truncated problem.

The enclosed charge ``Q(r) = int_delta^r (rho - d) y^(N-1) dy`` is summed
with the same exact shell volumes the continuity update uses, so discrete
mass conservation carries over to the relative mass ``Mb = -omega_N Q(b)``.
Inside [delta, b] we have ``r^(N-1) Phi_r = -Q(r)``; outside,
``r^(N-1) Phi_r = Mb / omega_N`` and ``Phi -> 0`` at infinity.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import DopingProfile, Params, RadialGrid, State

__all__ = [
    "FieldSnapshot",
    "compute_field",
    "field_from_charge",
    "enclosed_charge",
    "tail_potential",
    "mass_invariant_check",
    "write_snapshot_csv",
]


@dataclass(frozen=True)
class FieldSnapshot:
    phir: np.ndarray
    phi: np.ndarray
    Mb: float
    tail_coeff: float
    field_energy: float
    t: float = 0.0


def enclosed_charge(charge: np.ndarray, grid: RadialGrid):
    """Charge enclosed up to each cell centre and up to r = b.

    ``charge`` is taken piecewise constant per cell, so the partial shell
    from the left edge to the centre is integrated exactly.
    """
    N = grid.N
    inner = np.concatenate(([0.0], np.cumsum(charge * grid.vol)[:-1]))
    half = (grid.r ** N - grid.edges[:-1] ** N) / N
    return inner + charge * half, float(np.sum(charge * grid.vol))


def tail_potential(r, Mb_over_omega: float, N: int):
    """Potential outside the domain, ``-(Mb/omega_N) r^(2-N) / (N-2)``."""
    return -Mb_over_omega * np.power(r, 2.0 - N) / (N - 2.0)


def field_from_charge(charge: np.ndarray, grid: RadialGrid, params: Params, t: float = 0.0) -> FieldSnapshot:
    """Field of a per-cell charge density ``rho - d``."""
    N, h, r = grid.N, grid.h, grid.r
    Q, Q_total = enclosed_charge(charge, grid)
    phir = -Q / r ** (N - 1)
    Mb_over_omega = -Q_total
    Mb = params.omega * Mb_over_omega
    b = grid.b
    phi_b = float(tail_potential(b, Mb_over_omega, N))
    phir_b = Mb_over_omega / b ** (N - 1)
    # integrate Phi_r inward from r = b with the trapezoid rule on centres
    steps = 0.5 * h * (phir[1:] + phir[:-1])
    last = 0.5 * (0.5 * h) * (phir[-1] + phir_b)
    phi = np.empty_like(phir)
    phi[-1] = phi_b - last
    phi[:-1] = phi[-1] - np.cumsum(steps[::-1])[::-1]
    tail = Mb_over_omega ** 2 / ((N - 2.0) * b ** (N - 2))
    energy = float(np.dot(phir * phir, grid.vol)) + tail
    return FieldSnapshot(phir=phir, phi=phi, Mb=Mb, tail_coeff=Mb_over_omega,
                         field_energy=energy, t=t)


def compute_field(state: State, doping: DopingProfile | np.ndarray, grid: RadialGrid,
                  params: Params) -> FieldSnapshot:
    """Field generated by ``rho - d`` on the grid.

    ``doping`` may be a profile or its per-cell values.
    """
    d = doping(grid.r) if isinstance(doping, DopingProfile) else np.asarray(doping)
    return field_from_charge(state.rho - d, grid, params, t=state.t)


def mass_invariant_check(history: Iterable[FieldSnapshot] | Sequence[float]) -> float:
    """Largest relative drift of Mb over a run, ``max |Mb(t) - Mb(0)| / (1 + |Mb(0)|)``."""
    vals = np.array([h.Mb if isinstance(h, FieldSnapshot) else float(h) for h in history])
    if vals.size == 0:
        return 0.0
    return float(np.max(np.abs(vals - vals[0])) / (1.0 + abs(vals[0])))


def write_snapshot_csv(path, grid: RadialGrid, state: State, snap: FieldSnapshot) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "rho", "u", "phir", "phi"])
        for row in zip(grid.r, state.rho, state.u, snap.phir, snap.phi):
            w.writerow([repr(float(x)) for x in row])
    return path
