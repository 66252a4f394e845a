"""Unit-cube lattice: cell indexing, neighbourhoods, tempering functionals and the map T."""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .configuration import MarkedConfiguration, cell_indices

CellIndex = tuple


class BoundaryParticle(UserWarning):
    """A particle sits exactly on a face shared by two cubes."""


def cell_of(x) -> CellIndex:
    return tuple(int(v) for v in np.floor(np.atleast_1d(np.asarray(x, dtype=float)) + 0.5))


def cube_gap(j, k) -> float:
    """Euclidean distance between the closed cubes around integer points j and k."""
    gap = np.maximum(0, np.abs(np.asarray(j) - np.asarray(k)) - 1)
    return float(np.sqrt(np.sum(gap.astype(float) ** 2)))


@lru_cache(maxsize=None)
def neighborhood_offsets(d: int, R: float) -> tuple[CellIndex, ...]:
    """Offsets j - k with dist(Q_k, Q_j) <= R; contains the zero offset."""
    reach = int(math.floor(R)) + 1
    r2 = R * R
    out = []
    for off in itertools.product(range(-reach, reach + 1), repeat=d):
        gap2 = sum(max(0, abs(o) - 1) ** 2 for o in off)
        if gap2 <= r2:
            out.append(off)
    return tuple(out)


def neighborhood(k, R: float) -> frozenset:
    k = tuple(k)
    return frozenset(tuple(a + b for a, b in zip(k, off)) for off in neighborhood_offsets(len(k), R))


def n0(d: int, R: float) -> int:
    return len(neighborhood_offsets(d, R))


def theta(d: int, R: float) -> float:
    """Largest Euclidean index distance from k to a member of its neighbourhood."""
    return max(math.sqrt(sum(o * o for o in off)) for off in neighborhood_offsets(d, R))


@dataclass(frozen=True)
class Window:
    """A finite set of unit cubes; the region is their union."""

    cells: frozenset

    def __post_init__(self):
        cells = frozenset(tuple(int(v) for v in c) for c in self.cells)
        if not cells:
            raise ValueError("window needs at least one cell")
        if len({len(c) for c in cells}) != 1:
            raise ValueError("mixed cell dimensions")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def interval(cls, lo: int, hi: int) -> "Window":
        """Cells lo..hi inclusive in d = 1."""
        return cls(frozenset((k,) for k in range(lo, hi + 1)))

    @classmethod
    def centered(cls, size: int, d: int = 1) -> "Window":
        """Odd ``size`` cells per axis, centred on the origin cell."""
        h = size // 2
        return cls(frozenset(itertools.product(range(-h, size - h), repeat=d)))

    @property
    def d(self) -> int:
        return len(next(iter(self.cells)))

    @property
    def volume(self) -> float:
        return float(len(self.cells))

    def sorted_cells(self) -> list[CellIndex]:
        return sorted(self.cells)

    def contains(self, x) -> bool:
        return cell_of(x) in self.cells

    def contains_array(self, positions: np.ndarray) -> np.ndarray:
        ks = cell_indices(positions)
        return np.array([tuple(k) in self.cells for k in ks.tolist()], dtype=bool)

    def shell(self, R: float) -> frozenset:
        """Cells outside the window within distance R of some window cell."""
        offs = neighborhood_offsets(self.d, R)
        out = set()
        for k in self.cells:
            for off in offs:
                j = tuple(a + b for a, b in zip(k, off))
                if j not in self.cells:
                    out.add(j)
        return frozenset(out)

    def uniform_points(self, n: int, rng) -> np.ndarray:
        cells = np.array(self.sorted_cells(), dtype=float)
        pick = rng.integers(0, len(cells), size=n)
        return cells[pick] + rng.random((n, self.d)) - 0.5


def tempering_F(gamma_k: MarkedConfiguration, p: int, q: int) -> float:
    if gamma_k.n == 0:
        return 0.0
    mags = np.linalg.norm(gamma_k.spins, axis=1)
    return float(gamma_k.n ** p + np.sum(mags ** q))


def per_cell_F(config: MarkedConfiguration, p: int, q: int) -> dict[CellIndex, float]:
    return {k: tempering_F(config.subset(idx), p, q) for k, idx in config.cell_map.items()}


def tempering_F_alpha(config: MarkedConfiguration, window: Window, alpha: float, p: int, q: int) -> float:
    best = 0.0
    for k, f in per_cell_F(config, p, q).items():
        if k in window.cells:
            best = max(best, math.exp(-alpha * math.sqrt(sum(c * c for c in k))) * f)
    return best


@dataclass(frozen=True)
class LatticeImage:
    """Per-cell contents translated to the cube around the origin."""

    entries: dict
    d: int
    m: int


def to_lattice(config: MarkedConfiguration, window: Window | None = None) -> LatticeImage:
    ks = config.cells
    # a coordinate at k - 1/2 lies on the face shared with cell k - 1
    on_face = np.any(config.positions - ks == -0.5, axis=1) if config.n else []
    if np.any(on_face):
        warnings.warn(f"{int(np.sum(on_face))} particle(s) on a cube face; half-open rule applied",
                      BoundaryParticle, stacklevel=2)
    entries = {}
    for k, idx in config.cell_map.items():
        if window is not None and k not in window.cells:
            continue
        entries[k] = config.subset(idx).translated(-np.asarray(k, float))
    return LatticeImage(entries, config.d, config.m)


def from_lattice(img: LatticeImage) -> MarkedConfiguration:
    out = MarkedConfiguration.empty(img.d, img.m)
    for k in sorted(img.entries):
        out = out.union(img.entries[k].translated(np.asarray(k, float)))
    return out
