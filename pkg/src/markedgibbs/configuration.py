"""Finite marked configurations: positions in R^d with spins in R^m."""
from __future__ import annotations

from functools import cached_property

import numpy as np


def cell_indices(positions: np.ndarray) -> np.ndarray:
    """Integer cube index of each row; half-open cubes ``[k - 1/2, k + 1/2)``."""
    return np.floor(np.asarray(positions, dtype=float) + 0.5).astype(np.int64)


class MarkedConfiguration:
    """A finite set of (position, spin) pairs.

    Arrays are copied on construction and marked read-only, so instances are
    safe to share; mutation happens only inside the sampler on its own lists.
    """

    def __init__(self, positions, spins, d: int | None = None, m: int | None = None):
        pos = np.array(positions, dtype=float)
        sp = np.array(spins, dtype=float)
        if pos.size == 0:
            pos = pos.reshape(0, d if d is not None else (pos.shape[1] if pos.ndim == 2 else 1))
        if sp.size == 0:
            sp = sp.reshape(0, m if m is not None else (sp.shape[1] if sp.ndim == 2 else 1))
        if pos.ndim == 1:
            pos = pos.reshape(-1, 1) if d in (None, 1) else pos.reshape(-1, d)
        if sp.ndim == 1:
            sp = sp.reshape(-1, 1) if m in (None, 1) else sp.reshape(-1, m)
        if len(pos) != len(sp):
            raise ValueError(f"{len(pos)} positions but {len(sp)} spins")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(sp))):
            raise ValueError("non-finite coordinates")
        pos.setflags(write=False)
        sp.setflags(write=False)
        self.positions = pos
        self.spins = sp

    @classmethod
    def empty(cls, d: int, m: int) -> "MarkedConfiguration":
        return cls(np.zeros((0, d)), np.zeros((0, m)))

    @property
    def n(self) -> int:
        return len(self.positions)

    def __len__(self):
        return self.n

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    @property
    def m(self) -> int:
        return self.spins.shape[1]

    @cached_property
    def cells(self) -> np.ndarray:
        return cell_indices(self.positions)

    @cached_property
    def cell_map(self) -> dict[tuple, list[int]]:
        out: dict[tuple, list[int]] = {}
        for i, k in enumerate(map(tuple, self.cells.tolist())):
            out.setdefault(k, []).append(i)
        return out

    def subset(self, idx) -> "MarkedConfiguration":
        idx = np.asarray(idx, dtype=int)
        return MarkedConfiguration(self.positions[idx], self.spins[idx], self.d, self.m)

    def in_cell(self, k) -> "MarkedConfiguration":
        return self.subset(self.cell_map.get(tuple(k), []))

    def in_cells(self, cells) -> "MarkedConfiguration":
        idx = [i for k in cells for i in self.cell_map.get(tuple(k), [])]
        return self.subset(sorted(idx))

    def count_in(self, k) -> int:
        return len(self.cell_map.get(tuple(k), ()))

    def translated(self, shift) -> "MarkedConfiguration":
        return MarkedConfiguration(self.positions + np.asarray(shift, float), self.spins, self.d, self.m)

    def union(self, other: "MarkedConfiguration") -> "MarkedConfiguration":
        return MarkedConfiguration(np.vstack([self.positions, other.positions]),
                                   np.vstack([self.spins, other.spins]), self.d, self.m)

    def _sorted_rows(self) -> np.ndarray:
        rows = np.hstack([self.positions, self.spins])
        return rows[np.lexsort(rows.T[::-1])] if len(rows) else rows

    def same_as(self, other: "MarkedConfiguration", atol: float = 0.0) -> bool:
        """Equality as sets of marked points (order-independent)."""
        if self.n != other.n or self.d != other.d or self.m != other.m:
            return False
        a, b = self._sorted_rows(), other._sorted_rows()
        return bool(np.all(np.abs(a - b) <= atol))

    def copy(self) -> "MarkedConfiguration":
        return MarkedConfiguration(self.positions.copy(), self.spins.copy(), self.d, self.m)

    def to_dict(self) -> dict:
        return {"positions": self.positions.tolist(), "spins": self.spins.tolist()}

    @classmethod
    def from_dict(cls, data: dict, d: int, m: int) -> "MarkedConfiguration":
        return cls(data["positions"], data["spins"], d, m)

    def __repr__(self):
        return f"MarkedConfiguration(n={self.n}, d={self.d}, m={self.m})"
