"""Brute-force partition function on tiny regions by tensor quadrature over the particle-number series."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from .configuration import MarkedConfiguration
from .energy import prune_boundary
from .lattice import Window
from .model import ModelSpec
from .refmeasure import Divergent, SpinSampler

__all__ = ["QuadratureUnconverged", "OracleResult", "brute_partition", "oracle_marginals", "LEVELS",
           "term_upper_bound"]


class QuadratureUnconverged(ArithmeticError):
    pass


# (position nodes per cube side, spin nodes)
LEVELS = {"coarse": (8, 5), "fine": (16, 8)}
REFINE_TOL = 1e-4    # |fine - coarse| relative to Z
SKIP_TOL = 1e-8      # terms whose bound is below this fraction of Z go to the tail
COARSE_OK = 1e-5     # terms below this fraction of Z are not refined
TAIL_TOL = 1e-6
MAX_COMBOS = 4e7


@dataclass
class OracleResult:
    n_max: int
    weights: list            # w_n, None where only bounded
    Z: float
    tail_bound: float
    spin_moments: list       # E[sum |s|^q | N = n]; None for n = 0 or skipped n
    q: int
    levels: list = field(default_factory=list)
    refinement_gaps: list = field(default_factory=list)

    @property
    def Z_partial(self) -> float:
        return math.fsum(w for w in self.weights if w is not None)

    @property
    def certified(self) -> bool:
        return self.tail_bound < TAIL_TOL * self.Z

    def as_dict(self) -> dict:
        return {"n_max": self.n_max, "weights": self.weights, "Z": self.Z, "Z_partial": self.Z_partial,
                "tail_bound": self.tail_bound,
                "spin_moments": self.spin_moments, "q": self.q, "levels": self.levels,
                "refinement_gaps": self.refinement_gaps, "certified": self.certified}


# ---------------------------------------------------------------------------
# nodes


def _position_nodes(region: Window, boundary: MarkedConfiguration, R: float, npos: int):
    """Gauss-Legendre nodes over the region; in d = 1 intervals are split where a
    boundary particle's range ends, so each piece sees a smooth integrand."""
    g, gw = roots_legendre(npos)
    xs, ws = [], []
    d = region.d
    for c in region.sorted_cells():
        if d == 1:
            lo, hi = c[0] - 0.5, c[0] + 0.5
            cuts = {lo, hi}
            for y in boundary.positions[:, 0] if boundary.n else []:
                for b in (y - R, y + R):
                    if lo < b < hi:
                        cuts.add(b)
            cuts = sorted(cuts)
            for a, b in zip(cuts[:-1], cuts[1:]):
                xs.append(0.5 * (b - a) * g + 0.5 * (a + b))
                ws.append(0.5 * (b - a) * gw)
        else:
            grids = np.meshgrid(*[0.5 * g + ci for ci in c], indexing="ij")
            wgrid = np.ones_like(grids[0])
            for ax in range(d):
                shape = [1] * d
                shape[ax] = npos
                wgrid = wgrid * (0.5 * gw).reshape(shape)
            xs.append(np.stack([gr.ravel() for gr in grids], axis=1))
            ws.append(wgrid.ravel())
    if d == 1:
        return np.concatenate(xs).reshape(-1, 1), np.concatenate(ws)
    return np.vstack(xs), np.concatenate(ws)


def _pair_energy(model: ModelSpec, x1, s1, x2, s2) -> np.ndarray:
    """Phi + J W between broadcast node sets (positions (...,d), spins (...,m))."""
    r = np.linalg.norm(x1 - x2, axis=-1)
    e = model.phi.radial_array(r)
    jv = model.coupling.radial_array(r)
    live = jv != 0
    if np.any(live):
        wv = model.w.array(*np.broadcast_arrays(s1, s2))
        e = e + np.where(live, jv * wv, 0.0)
    return e


def _node_tables(region, boundary, model, spins, npos, nspin):
    xp, wp = _position_nodes(region, boundary, model.range_R, npos)
    sp, ws = spins.gauss_rule(nspin)
    P, S = len(xp), len(sp)
    X = np.repeat(xp, S, axis=0)
    Sig = np.tile(sp, (P, 1))
    W = np.repeat(wp, S) * np.tile(ws, P)
    beta = model.beta
    # boundary Boltzmann factor per node
    if boundary.n:
        eb = _pair_energy(model, X[:, None, :], Sig[:, None, :], boundary.positions[None], boundary.spins[None])
        with np.errstate(over="ignore"):
            ub = np.exp(-beta * eb.sum(axis=1))
    else:
        ub = np.ones(len(X))
    u = W * ub
    with np.errstate(over="ignore", invalid="ignore"):
        psi = np.exp(-beta * _pair_energy(model, X[:, None, :], Sig[:, None, :], X[None], Sig[None]))
    psi = np.nan_to_num(psi, nan=0.0, posinf=np.inf)
    return u, psi, np.linalg.norm(Sig, axis=1)


# ---------------------------------------------------------------------------
# multiset enumeration


@lru_cache(maxsize=64)
def _nondecreasing(L: int, M: int) -> np.ndarray:
    """All nondecreasing length-M sequences over range(L), lexicographic."""
    if M == 0:
        return np.zeros((1, 0), dtype=np.int32)
    if M == 1:
        return np.arange(L, dtype=np.int32)[:, None]
    blocks = []
    for f in range(L):
        rest = _nondecreasing(L - f, M - 1) + f
        blocks.append(np.hstack([np.full((len(rest), 1), f, dtype=np.int32), rest]))
    return np.vstack(blocks)


def _n_multisets(K: int, n: int) -> int:
    return math.comb(K + n - 1, n)


def _multiset_sum(u, psi, mags, n: int, q: int):
    """Sum over ordered n-tuples of node products, via multisets; returns (total, total * sum|s|^q)."""
    K = len(u)
    if n == 0:
        return 1.0, 0.0
    fact = math.factorial(n)
    total = 0.0
    mom = 0.0
    magq = mags ** q
    for first in range(K):
        if u[first] == 0:
            continue
        rest = _nondecreasing(K - first, n - 1) + first
        C = np.hstack([np.full((len(rest), 1), first, dtype=np.int32), rest])
        val = np.prod(u[C], axis=1)
        for i in range(n):
            for j in range(i + 1, n):
                val = val * psi[C[:, i], C[:, j]]
        run = np.ones(len(C))
        denom = np.ones(len(C))
        for j in range(1, n):
            run = np.where(C[:, j] == C[:, j - 1], run + 1, 1.0)
            denom *= run
        val = val * (fact / denom)
        total += float(np.sum(val))
        mom += float(np.sum(val * magq[C].sum(axis=1)))
    return total, mom


# ---------------------------------------------------------------------------


def _superstable_lower(model: ModelSpec, region: Window, n: int) -> float:
    """Lower bound for H over n particles in the region."""
    phi = model.phi
    K = len(region.cells)
    if phi.P <= 2 or phi.A_phi <= 0:
        return -phi.M * n * (n - 1) / 2
    # per-cube superstability plus a -M floor for every cross-cube pair
    return phi.A_phi * K ** (1 - phi.P) * n ** phi.P - phi.B_phi * n - phi.M * n * (n - 1) / 2


def term_upper_bound(model: ModelSpec, region: Window, boundary: MarkedConfiguration, n: int,
                     spins: SpinSampler) -> float:
    """Analytic bound on w_n from superstability and the polynomial bound on W."""
    if n == 0:
        return 1.0
    vol, beta, J, r, C_W = region.volume, model.beta, model.J_inf, model.w.r, model.w.C_W
    nb = boundary.n
    xi_r = float(np.sum(np.linalg.norm(boundary.spins, axis=1) ** r)) if nb else 0.0
    log_b = (n * math.log(model.z * vol) - math.lgamma(n + 1) - beta * _superstable_lower(model, region, n)
             + beta * model.phi.M * n * nb
             + beta * J * (C_W * (n * (n - 1) / 2 + n * nb) + n * xi_r))
    try:
        log_b += n * spins.spin_exp_moment(beta * J * (n - 1 + nb), r)
    except Divergent:
        return math.inf
    return math.exp(log_b) if log_b < 700 else math.inf


def brute_partition(region: Window, boundary: MarkedConfiguration | None, model: ModelSpec, n_max: int = 5,
                    q: int = 4, levels=("coarse", "fine"), spins: SpinSampler | None = None) -> OracleResult:
    if n_max > 5 or region.volume > 2 or model.m > 2:
        raise ValueError("oracle supports n_max <= 5, at most two cubes and m <= 2")
    d, m = model.d, model.m
    boundary = MarkedConfiguration.empty(d, m) if boundary is None else boundary
    boundary = prune_boundary(boundary, region, model.range_R)
    spins = spins or SpinSampler(model.v, m)

    weights: list = [1.0]
    moments: list = [None]
    used, gaps = ["exact"], [0.0]
    Z = 1.0
    tail = 0.0
    if model.is_ideal:
        # factorized closed form: w_n = (z vol)^n / n!
        zv = model.z * region.volume
        mq = spins.moment(q)
        for n in range(1, n_max + 1):
            weights.append(zv ** n / math.factorial(n))
            moments.append(n * mq)
            used.append("exact")
            gaps.append(0.0)
        # the remainder beyond n_max is known exactly here, so Z carries it
        Z = math.exp(zv)
        assert Z >= 1.0
        return OracleResult(n_max, weights, Z, 0.0, moments, q, used, gaps)

    tables = {}

    def table(level):
        if level not in tables:
            npos, nspin = LEVELS[level]
            tables[level] = _node_tables(region, boundary, model, spins, npos, nspin)
        return tables[level]

    for n in range(1, n_max + 1):
        ub = term_upper_bound(model, region, boundary, n, spins)
        if ub <= SKIP_TOL * Z:
            weights.append(None)
            moments.append(None)
            used.append("bounded")
            gaps.append(ub)
            tail += ub
            continue
        pref = model.z ** n / math.factorial(n)
        results = {}
        for level in levels:
            u, psi, mags = table(level)
            if _n_multisets(len(u), n) > MAX_COMBOS:
                if results:
                    break
                raise QuadratureUnconverged(f"n={n}: {_n_multisets(len(u), n):.3g} node multisets exceed the cap")
            tot, mom = _multiset_sum(u, psi, mags, n, q)
            results[level] = (pref * tot, mom / tot if tot > 0 else None)
            if ub <= COARSE_OK * Z:
                break
        names = list(results)
        w_n, mom_n = results[names[-1]]
        gap = abs(results[names[-1]][0] - results[names[0]][0]) if len(names) > 1 else 0.0
        if len(names) == 1 and ub > COARSE_OK * Z and len(levels) > 1:
            raise QuadratureUnconverged(f"n={n}: fine level unavailable for a non-negligible term")
        Z_now = Z + w_n
        if gap > REFINE_TOL * Z_now:
            raise QuadratureUnconverged(f"n={n}: levels differ by {gap:.3g} (Z={Z_now:.6g})")
        weights.append(w_n)
        moments.append(mom_n)
        used.append(names[-1])
        gaps.append(gap)
        Z = Z_now
    # series tail beyond n_max, summed until the bounds are negligible
    n = n_max + 1
    while True:
        b = term_upper_bound(model, region, boundary, n, spins)
        tail += b
        if b < 1e-3 * TAIL_TOL * Z and n > n_max + 2 or not math.isfinite(tail) or n > 200:
            break
        n += 1
    assert Z >= 1.0, "partition function below 1"
    return OracleResult(n_max, weights, Z, tail, moments, q, used, gaps)


def oracle_marginals(result: OracleResult):
    """P(N = n) = w_n / Z and E[sum |s|^q | N = n] (None where absent)."""
    probs = [None if w is None else w / result.Z for w in result.weights]
    return probs, list(result.spin_moments)
