"""Energy functionals: H, E, relative energies and incremental deltas.

``+inf`` is a legal value (hard core) and is absorbing under addition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .configuration import MarkedConfiguration
from .lattice import Window, neighborhood_offsets
from .model import ModelSpec

__all__ = [
    "MarkedConfiguration", "EnergyBreakdown", "hamiltonian_H", "spin_energy_E", "relative_energy",
    "prune_boundary", "Birth", "Death", "Move", "Respin", "delta_energy", "PairCounter",
    "total_energy", "apply_event",
]


def _checked_sum(values: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    if np.any(np.isposinf(values)):
        return math.inf
    total = float(np.sum(values))
    assert not math.isnan(total), "NaN in energy"
    return total


def _pair_terms(model: ModelSpec, xa, sa, xb, sb, same: bool):
    """Phi and J*W for all pairs between two point sets (i < j if ``same``)."""
    if same:
        n = len(xa)
        if n < 2:
            return np.zeros(0), np.zeros(0)
        i, j = np.triu_indices(n, 1)
        xi, xj, si, sj = xa[i], xa[j], sa[i], sa[j]
    else:
        if len(xa) == 0 or len(xb) == 0:
            return np.zeros(0), np.zeros(0)
        i, j = np.meshgrid(np.arange(len(xa)), np.arange(len(xb)), indexing="ij")
        i, j = i.ravel(), j.ravel()
        xi, xj, si, sj = xa[i], xb[j], sa[i], sb[j]
    r = np.linalg.norm(xi - xj, axis=1)
    phi = model.phi.radial_array(r)
    jv = model.coupling.radial_array(r)
    live = jv != 0
    spin = np.zeros_like(r)
    if np.any(live):
        spin[live] = jv[live] * model.w.array(si[live], sj[live])
    return phi, spin


def hamiltonian_H(config: MarkedConfiguration, model: ModelSpec) -> float:
    phi, _ = _pair_terms(model, config.positions, config.spins, None, None, True)
    return _checked_sum(phi)


def spin_energy_E(config: MarkedConfiguration, model: ModelSpec) -> float:
    _, spin = _pair_terms(model, config.positions, config.spins, None, None, True)
    return _checked_sum(spin)


def total_energy(config: MarkedConfiguration, model: ModelSpec) -> float:
    return relative_energy(config, MarkedConfiguration.empty(config.d, config.m), None, model).total


@dataclass(frozen=True)
class EnergyBreakdown:
    positional: float           # H of the interior
    spin: float                 # E of the interior
    boundary_positional: float  # interior-boundary Phi sum
    boundary_spin: float        # interior-boundary J W sum

    @property
    def relative_positional(self) -> float:
        return self.positional + self.boundary_positional

    @property
    def relative_spin(self) -> float:
        return self.spin + self.boundary_spin

    @property
    def total(self) -> float:
        parts = (self.positional, self.spin, self.boundary_positional, self.boundary_spin)
        if any(v == math.inf for v in parts):
            return math.inf
        return math.fsum(parts)

    def as_dict(self) -> dict:
        return {"positional": self.positional, "spin": self.spin,
                "boundary_positional": self.boundary_positional,
                "boundary_spin": self.boundary_spin, "total": self.total}


def _point_region_distance(positions: np.ndarray, region: Window) -> np.ndarray:
    cells = np.array(region.sorted_cells(), dtype=float)
    gap = np.maximum(0.0, np.abs(positions[:, None, :] - cells[None, :, :]) - 0.5)
    return np.sqrt(np.sum(gap ** 2, axis=2)).min(axis=1)


def prune_boundary(boundary: MarkedConfiguration, region: Window, R: float) -> MarkedConfiguration:
    """Drop boundary particles inside the region or farther than R from it."""
    if boundary.n == 0:
        return boundary
    inside = region.contains_array(boundary.positions)
    near = _point_region_distance(boundary.positions, region) <= R
    return boundary.subset(np.nonzero(near & ~inside)[0])


def relative_energy(interior: MarkedConfiguration, boundary: MarkedConfiguration,
                    region: Window | None, model: ModelSpec) -> EnergyBreakdown:
    if region is not None:
        boundary = prune_boundary(boundary, region, model.range_R)
    phi, spin = _pair_terms(model, interior.positions, interior.spins, None, None, True)
    bphi, bspin = _pair_terms(model, interior.positions, interior.spins,
                              boundary.positions, boundary.spins, False)
    return EnergyBreakdown(_checked_sum(phi), _checked_sum(spin), _checked_sum(bphi), _checked_sum(bspin))


# --------------------------------------------------------------------------
# incremental updates


@dataclass(frozen=True)
class Birth:
    x: tuple
    s: tuple


@dataclass(frozen=True)
class Death:
    index: int


@dataclass(frozen=True)
class Move:
    index: int
    x: tuple


@dataclass(frozen=True)
class Respin:
    index: int
    s: tuple


class PairCounter:
    """Counts pair evaluations and the population of the scanned cells."""

    def __init__(self):
        self.pairs = 0
        self.scanned_population = 0


def _local_energy(x, s, skip, config, boundary, model, offsets, counter):
    """Interaction of (x, s) with config (minus index ``skip``) and boundary, via neighbour cells."""
    k = tuple(int(v) for v in np.floor(np.asarray(x, float) + 0.5))
    xs, ss = [], []
    for src, is_interior in ((config, True), (boundary, False)):
        cmap = src.cell_map
        for off in offsets:
            idx = cmap.get(tuple(a + b for a, b in zip(k, off)))
            if not idx:
                continue
            for i in idx:
                if is_interior and i == skip:
                    continue
                xs.append(src.positions[i])
                ss.append(src.spins[i])
    if counter is not None:
        counter.scanned_population += len(xs)
        counter.pairs += len(xs)
    if not xs:
        return 0.0
    x0 = np.asarray(x, float)[None, :]
    s0 = np.asarray(s, float)[None, :]
    phi, spin = _pair_terms(model, x0, s0, np.array(xs), np.array(ss), False)
    if np.any(np.isposinf(phi)):
        return math.inf
    return float(np.sum(phi) + np.sum(spin))


def delta_energy(config: MarkedConfiguration, boundary: MarkedConfiguration, event, model: ModelSpec,
                 counter: PairCounter | None = None) -> float:
    """Change of the relative energy caused by ``event``, using only nearby cells.

    Moves must stay inside the region; the boundary is assumed already pruned to its R-shell.
    """
    offsets = neighborhood_offsets(model.d, model.range_R)
    args = (config, boundary, model, offsets, counter)
    if isinstance(event, Birth):
        return _local_energy(event.x, event.s, -1, *args)
    i = event.index
    xi, si = config.positions[i], config.spins[i]
    old = _local_energy(xi, si, i, *args)
    if isinstance(event, Death):
        return -old
    if isinstance(event, Move):
        new = _local_energy(event.x, si, i, *args)
    elif isinstance(event, Respin):
        new = _local_energy(xi, event.s, i, *args)
    else:
        raise TypeError(f"unknown event {event!r}")
    if new == math.inf:
        return math.inf
    return new - old


def apply_event(config: MarkedConfiguration, event) -> MarkedConfiguration:
    pos, sp = config.positions, config.spins
    if isinstance(event, Birth):
        return MarkedConfiguration(np.vstack([pos, [event.x]]), np.vstack([sp, [event.s]]), config.d, config.m)
    keep = np.arange(config.n) != event.index
    if isinstance(event, Death):
        return config.subset(np.nonzero(keep)[0])
    pos, sp = pos.copy(), sp.copy()
    if isinstance(event, Move):
        pos[event.index] = event.x
    else:
        sp[event.index] = event.s
    return MarkedConfiguration(pos, sp, config.d, config.m)
