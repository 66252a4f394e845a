"""Birth/death/move/respin Metropolis-Hastings for the finite-volume Gibbs state."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, asdict

import numpy as np

from .configuration import MarkedConfiguration
from .energy import prune_boundary, relative_energy
from .lattice import Window, neighborhood_offsets, per_cell_F
from .model import BilinearSpin, ModelSpec, QuadraticDifferenceSpin
from .refmeasure import SpinSampler, sample_poisson_config

__all__ = ["KernelConfig", "Chain", "run_kernel", "make_boundary", "NonErgodicWarning", "EnergyDrift",
           "write_snapshots"]

MOVES = ("birth", "death", "move", "respin")


class NonErgodicWarning(UserWarning):
    pass


class EnergyDrift(AssertionError):
    pass


@dataclass(frozen=True)
class KernelConfig:
    p_birth: float = 0.35
    p_death: float = 0.35
    p_move: float = 0.2
    p_respin: float = 0.1
    move_scale: float = 0.25
    burn_in: int = 100_000
    thin: int = 100
    drift_check: int = 100_000

    def __post_init__(self):
        probs = (self.p_birth, self.p_death, self.p_move, self.p_respin)
        if min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError("move mix must be nonnegative and sum to 1")
        if self.p_birth != self.p_death:
            raise ValueError("birth and death probabilities must be equal")
        if self.p_birth == 0:
            raise ValueError("birth/death moves are required")
        if self.move_scale <= 0 or self.thin < 1 or self.burn_in < 0 or self.drift_check < 1:
            raise ValueError("bad kernel sizes")


class _Draws:
    """Pre-drawn blocks of uniforms, normals and spins served one at a time."""

    def __init__(self, rng, spins: SpinSampler, d: int, block: int = 8192):
        self.rng, self.spins, self.d, self.block = rng, spins, d, block
        self._u = []
        self._z = []
        self._s = []

    def u(self) -> float:
        if not self._u:
            self._u = self.rng.random(self.block).tolist()
        return self._u.pop()

    def normal(self) -> float:
        if not self._z:
            self._z = self.rng.standard_normal(self.block).tolist()
        return self._z.pop()

    def spin(self) -> tuple:
        if not self._s:
            self._s = [tuple(r) for r in self.spins.sample(self.rng, self.block).tolist()]
        return self._s.pop()


def _scalar_w(w):
    if isinstance(w, BilinearSpin):
        return lambda a, b: -math.fsum(x * y for x, y in zip(a, b)) if len(a) > 1 else -a[0] * b[0]
    if isinstance(w, QuadraticDifferenceSpin):
        return lambda a, b: math.fsum((x - y) ** 2 for x, y in zip(a, b))
    return lambda a, b: w(np.asarray(a), np.asarray(b))


class Chain:
    """Single-writer MCMC state: interior particles, frozen boundary, cached energy."""

    def __init__(self, model: ModelSpec, region: Window, boundary: MarkedConfiguration | None = None,
                 kcfg: KernelConfig | None = None, rng=None, spins: SpinSampler | None = None,
                 initial: MarkedConfiguration | None = None):
        self.model = model
        self.region = region
        self.kcfg = kcfg or KernelConfig()
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.spins = spins or SpinSampler(model.v, model.m)
        d, m = model.d, model.m
        boundary = boundary if boundary is not None else MarkedConfiguration.empty(d, m)
        self.boundary = prune_boundary(boundary, region, model.range_R)
        self.draws = _Draws(self.rng, self.spins, d)
        self.cell_list = region.sorted_cells()
        self.region_keys = {self._key(c) for c in self.cell_list}
        self.volume = region.volume
        self._offsets = neighborhood_offsets(d, model.range_R)
        self._nbr_cache: dict = {}
        self._phi = model.phi.radial
        self._J = model.coupling.radial
        self._W = _scalar_w(model.w)
        self._bcells: dict = {}
        for x, s in zip(self.boundary.positions.tolist(), self.boundary.spins.tolist()):
            self._bcells.setdefault(self._key_of(x), []).append((tuple(x), tuple(s)))
        self.pos: list[tuple] = []
        self.spin: list[tuple] = []
        self.key: list = []
        self._cells: dict = {}
        if initial is not None:
            for x, s in zip(initial.positions.tolist(), initial.spins.tolist()):
                self._add(tuple(x), tuple(s))
        self.energy = self.full_energy()
        if self.energy == math.inf:
            raise ValueError("initial configuration has infinite energy")
        self.steps = 0
        self.attempts = dict.fromkeys(MOVES, 0)
        self.accepts = dict.fromkeys(MOVES, 0)

    # bookkeeping ------------------------------------------------------------

    def _key(self, cell):
        return cell[0] if len(cell) == 1 else tuple(cell)

    def _key_of(self, x):
        if len(x) == 1:
            return math.floor(x[0] + 0.5)
        return tuple(math.floor(v + 0.5) for v in x)

    def _neighbors(self, key):
        nb = self._nbr_cache.get(key)
        if nb is None:
            if isinstance(key, tuple):
                nb = [tuple(a + b for a, b in zip(key, off)) for off in self._offsets]
            else:
                nb = [key + off[0] for off in self._offsets]
            self._nbr_cache[key] = nb
        return nb

    def _add(self, x, s):
        k = self._key_of(x)
        self._cells.setdefault(k, []).append(len(self.pos))
        self.pos.append(x)
        self.spin.append(s)
        self.key.append(k)

    def _remove(self, i):
        last = len(self.pos) - 1
        self._cells[self.key[i]].remove(i)
        if i != last:
            lst = self._cells[self.key[last]]
            lst[lst.index(last)] = i
            self.pos[i], self.spin[i], self.key[i] = self.pos[last], self.spin[last], self.key[last]
        self.pos.pop()
        self.spin.pop()
        self.key.pop()

    def _local(self, x, s, skip):
        """Interaction of (x, s) with everything else; +inf on hard-core overlap."""
        R = self.model.range_R
        phi, J, W = self._phi, self._J, self._W
        e = 0.0
        dist = math.dist
        pos, spin = self.pos, self.spin
        for nk in self._neighbors(self._key_of(x)):
            idx = self._cells.get(nk)
            if idx:
                for j in idx:
                    if j == skip:
                        continue
                    r = dist(x, pos[j])
                    if r > R:
                        continue
                    v = phi(r)
                    if v == math.inf:
                        return math.inf
                    e += v
                    c = J(r)
                    if c:
                        e += c * W(s, spin[j])
            bl = self._bcells.get(nk)
            if bl:
                for y, t in bl:
                    r = dist(x, y)
                    if r > R:
                        continue
                    v = phi(r)
                    if v == math.inf:
                        return math.inf
                    e += v
                    c = J(r)
                    if c:
                        e += c * W(s, t)
        return e

    # public state ---------------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.pos)

    def snapshot(self) -> MarkedConfiguration:
        d, m = self.model.d, self.model.m
        if not self.pos:
            return MarkedConfiguration.empty(d, m)
        return MarkedConfiguration(np.array(self.pos), np.array(self.spin), d, m)

    def full_energy(self) -> float:
        return relative_energy(self.snapshot(), self.boundary, None, self.model).total

    def check_drift(self):
        full = self.full_energy()
        if not abs(self.energy - full) <= 1e-7 * (1.0 + abs(full)):
            raise EnergyDrift(f"cached energy {self.energy!r} vs recomputed {full!r}")
        self.energy = full

    def acceptance_rates(self) -> dict:
        return {k: (self.accepts[k] / self.attempts[k] if self.attempts[k] else float("nan")) for k in MOVES}

    # dynamics -------------------------------------------------------------------

    def advance(self, n_steps: int, trace: list | None = None):
        """Run ``n_steps`` MH updates; if ``trace`` is given, append N after each step."""
        k = self.kcfg
        c_birth = k.p_birth
        c_death = c_birth + k.p_death
        c_move = c_death + k.p_move
        beta, log_zv = self.model.beta, math.log(self.model.z * self.volume)
        draws = self.draws
        u, normal = draws.u, draws.normal
        cells, region_keys = self.cell_list, self.region_keys
        n_cells, d = len(cells), self.model.d
        scale = k.move_scale
        att, acc = self.attempts, self.accepts
        local = self._local
        log = math.log
        inf = math.inf
        for _ in range(n_steps):
            self.steps += 1
            r = u()
            n = len(self.pos)
            if r < c_birth:
                att["birth"] += 1
                c = cells[int(u() * n_cells)]
                x = tuple(c[i] + u() - 0.5 for i in range(d))
                s = draws.spin()
                de = local(x, s, -1)
                if de != inf and log(u()) < log_zv - log(n + 1) - beta * de:
                    self._add(x, s)
                    self.energy += de
                    acc["birth"] += 1
            elif r < c_death:
                att["death"] += 1
                if n:
                    i = int(u() * n)
                    de = -local(self.pos[i], self.spin[i], i)
                    if log(u()) < log(n) - log_zv - beta * de:
                        self._remove(i)
                        self.energy += de
                        acc["death"] += 1
            elif r < c_move:
                if n:
                    att["move"] += 1
                    i = int(u() * n)
                    x_old, s = self.pos[i], self.spin[i]
                    x = tuple(v + scale * normal() for v in x_old)
                    if self._key_of(x) in region_keys:
                        de = local(x, s, i)
                        if de != inf:
                            de -= local(x_old, s, i)
                            if de <= 0 or u() < math.exp(-beta * de):
                                self._cells[self.key[i]].remove(i)
                                kx = self._key_of(x)
                                self._cells.setdefault(kx, []).append(i)
                                self.pos[i], self.key[i] = x, kx
                                self.energy += de
                                acc["move"] += 1
            else:
                if n:
                    att["respin"] += 1
                    i = int(u() * n)
                    x, s_new = self.pos[i], draws.spin()
                    de = local(x, s_new, i) - local(x, self.spin[i], i)
                    if de <= 0 or u() < math.exp(-beta * de):
                        self.spin[i] = s_new
                        self.energy += de
                        acc["respin"] += 1
            if self.steps % k.drift_check == 0:
                self.check_drift()
            if trace is not None:
                trace.append(len(self.pos))

    def cell_values(self, keys, name: str) -> list[float]:
        """Per-cell bounded observable read straight from the cell lists."""
        out = []
        for key in keys:
            idx = self._cells.get(key, ())
            n = len(idx)
            if name == "occupancy":
                out.append(1.0 if n else 0.0)
            elif name == "count":
                out.append(float(min(n, 10)))
            elif name == "mean_spin":
                out.append(min(sum(math.hypot(*self.spin[i]) for i in idx) / n, 10.0) if n else 0.0)
            else:
                raise KeyError(name)
        return out

    def burn_in(self, n_steps: int | None = None, warn: bool = True):
        n_steps = self.kcfg.burn_in if n_steps is None else n_steps
        before_a, before_t = dict(self.accepts), dict(self.attempts)
        self.advance(n_steps)
        if warn and n_steps:
            for mv in MOVES:
                tries = self.attempts[mv] - before_t[mv]
                if tries and (self.accepts[mv] - before_a[mv]) / tries < 1e-4:
                    warnings.warn(f"{mv} acceptance below 1e-4 during burn-in", NonErgodicWarning,
                                  stacklevel=2)

    def count_trace(self, n_steps: int) -> np.ndarray:
        trace: list[int] = []
        self.advance(n_steps, trace)
        return np.asarray(trace, dtype=np.int64)

    def samples(self, n_samples: int, thin: int | None = None):
        thin = self.kcfg.thin if thin is None else thin
        for _ in range(n_samples):
            self.advance(thin)
            yield self.snapshot()


def run_kernel(region: Window, boundary: MarkedConfiguration, model: ModelSpec, kcfg: KernelConfig,
               n_samples: int, rng, spins: SpinSampler | None = None, initial=None):
    """Thinned post-burn-in interior snapshots of the kernel with frozen ``boundary``."""
    chain = Chain(model, region, boundary, kcfg, rng, spins, initial)
    chain.burn_in()
    yield from chain.samples(n_samples)


def write_snapshots(path, stream, region_id: str, seed: int, thin: int, start: int = 0):
    with open(path, "a") as fh:
        for i, cfg in enumerate(stream):
            rec = {"region": region_id, "step": start + (i + 1) * thin, "seed": seed, **cfg.to_dict()}
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def make_boundary(kind, shell, model: ModelSpec, rng=None, p: int = 3, q: int = 4,
                  spins: SpinSampler | None = None):
    """Tempered boundary on ``shell`` cells; returns (configuration, per-cell F).

    ``kind`` is ``"empty"``, ``("poisson", z)`` or ``("deterministic_grid", spacing, magnitude)``.
    """
    name, *args = (kind,) if isinstance(kind, str) else kind
    d, m = model.d, model.m
    cells = frozenset(shell)
    if name == "empty" or not cells:
        cfg = MarkedConfiguration.empty(d, m)
    elif name == "poisson":
        (zb,) = args
        spins = spins or SpinSampler(model.v, m)
        cfg = sample_poisson_config(Window(cells), zb, rng, spins)
    elif name == "deterministic_grid":
        spacing, mag = args
        pts = []
        for c in sorted(cells):
            lo = [math.ceil((ci - 0.5) / spacing) for ci in c]
            hi = [math.ceil((ci + 0.5) / spacing) for ci in c]
            for idx in np.ndindex(*[h - l for l, h in zip(lo, hi)]):
                pts.append([(l + i) * spacing for l, i in zip(lo, idx)])
        spin = np.zeros(m)
        spin[0] = mag
        cfg = MarkedConfiguration(np.array(pts).reshape(-1, d), np.tile(spin, (len(pts), 1)), d, m)
    else:
        raise ValueError(f"unknown boundary kind {name!r}")
    fvals = {k: 0.0 for k in sorted(cells)}
    fvals.update(per_cell_F(cfg, p, q))
    return cfg, fvals


def kernel_config_dict(k: KernelConfig) -> dict:
    return asdict(k)
