"""Estimators for exponential moments, the one-point uniqueness conditions and covariance decay."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import stats

from .bounds import BoundChain
from .configuration import MarkedConfiguration
from .lattice import Window, neighborhood, tempering_F
from .model import ModelSpec
from .refmeasure import SpinSampler
from .sampler import Chain, KernelConfig

__all__ = [
    "HeavyTailWarning", "DegenerateWeights", "InsufficientSignal", "batch_means", "MomentEstimate",
    "estimate_exp_moment", "OnePointReference", "estimate_tv_onepoint", "TVEstimate", "DPEstimate",
    "estimate_IC", "estimate_CC", "ideal_gas_F_quantile", "sample_cell_contents", "OBSERVABLES",
    "DecayFit", "estimate_covariance_decay", "RunRecord", "MomentTrace",
]

N_BATCHES = 30


class HeavyTailWarning(UserWarning):
    pass


class DegenerateWeights(RuntimeError):
    pass


class InsufficientSignal(UserWarning):
    pass


def batch_means(x, n_batches: int = N_BATCHES) -> tuple[float, float]:
    """Mean and batch-means standard error of a (correlated) series."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < n_batches:
        return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    b = n // n_batches
    means = x[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    return float(np.mean(x)), float(np.std(means, ddof=1) / math.sqrt(n_batches))


@dataclass
class RunRecord:
    kind: str
    estimate: float
    stderr: float
    seed: int
    volume: float
    boundary: str
    params: dict = field(default_factory=dict)
    acceptance: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# exponential moments


@dataclass
class MomentEstimate:
    estimate: float
    stderr: float
    n_samples: int
    max_F: float
    top_decile_mass: float
    heavy_tail: bool
    acceptance: dict = field(default_factory=dict)


@dataclass
class MomentTrace:
    cell: tuple
    windows: list
    boundary: str
    estimates: list
    stderrs: list
    ceiling_log: float

    def __post_init__(self):
        sizes = [len(w.cells) if isinstance(w, Window) else w for w in self.windows]
        assert all(b > a for a, b in zip(sizes, sizes[1:])), "window sequence must increase"


def moment_from_values(F: np.ndarray, a: float) -> MomentEstimate:
    vals = np.exp(a * np.asarray(F, dtype=float))
    est, se = batch_means(vals)
    top = np.sort(vals)[::-1][: max(1, len(vals) // 10)]
    frac = float(top.sum() / vals.sum()) if vals.sum() > 0 else 0.0
    heavy = frac > 0.5
    if heavy:
        warnings.warn(f"top decile carries {frac:.0%} of the exp-moment mass", HeavyTailWarning, stacklevel=3)
    return MomentEstimate(est, se, len(vals), float(np.max(F)) if len(F) else 0.0, frac, heavy)


def estimate_exp_moment(a: float, k, window: Window, boundary: MarkedConfiguration, model: ModelSpec,
                        n_samples: int, rng, p: int, q: int, kcfg: KernelConfig | None = None,
                        spins: SpinSampler | None = None) -> MomentEstimate:
    """Time average of exp(a F(gamma_k)) over thinned snapshots of the kernel on ``window``."""
    chain = Chain(model, window, boundary, kcfg or KernelConfig(), rng, spins)
    chain.burn_in()
    k = tuple(k)
    F = np.array([tempering_F(s.in_cell(k), p, q) for s in chain.samples(n_samples)])
    res = moment_from_values(F, a)
    res.acceptance = chain.acceptance_rates()
    return res


# ---------------------------------------------------------------------------
# one-point kernels under a shared marked-Poisson reference


class OnePointReference:
    """Marked Poisson samples on the cube Q_k stored as padded arrays.

    Counts come from inverting shared uniforms, so references built with the
    same ``rng`` state at different activities are coupled (common random numbers).
    """

    def __init__(self, model: ModelSpec, k, n_samples: int, rng, spins: SpinSampler | None = None,
                 max_count: int | None = None):
        self.model = model
        self.k = tuple(k)
        d, m = model.d, model.m
        spins = spins or SpinSampler(model.v, m)
        U = rng.random(n_samples)
        cap = max_count if max_count is not None else int(stats.poisson.ppf(1 - 1e-12, model.z)) + 2
        counts = np.minimum(stats.poisson.ppf(U, model.z).astype(int), cap)
        self.counts = counts
        self.cap = cap
        self.pos = np.asarray(self.k, float) + rng.random((n_samples, cap, d)) - 0.5
        self.spins = spins.sample(rng, n_samples * cap).reshape(n_samples, cap, m)
        self.mask = np.arange(cap)[None, :] < counts[:, None]
        self.F_cache: dict = {}
        self.interior_energy = self._interior_energy()

    def _pairs(self, xa, sa, xb, sb):
        model = self.model
        r = np.linalg.norm(xa - xb, axis=-1)
        phi = model.phi.radial_array(r)
        jv = model.coupling.radial_array(r)
        spin = np.where(jv != 0, jv * model.w.array(*np.broadcast_arrays(sa, sb)), 0.0)
        return phi, spin

    def _interior_energy(self) -> np.ndarray:
        e = np.zeros(len(self.counts))
        for i in range(self.cap):
            for j in range(i + 1, self.cap):
                live = self.mask[:, i] & self.mask[:, j]
                if not np.any(live):
                    continue
                phi, spin = self._pairs(self.pos[:, i], self.spins[:, i], self.pos[:, j], self.spins[:, j])
                e = e + np.where(live, phi + spin, 0.0)
        return e

    def cross_energy(self, boundary: MarkedConfiguration) -> np.ndarray:
        if boundary.n == 0:
            return np.zeros(len(self.counts))
        phi, spin = self._pairs(self.pos[:, :, None, :], self.spins[:, :, None, :],
                                boundary.positions[None, None], boundary.spins[None, None])
        tot = np.where(self.mask[:, :, None], phi + spin, 0.0)
        return tot.sum(axis=(1, 2))

    def log_weights(self, boundary: MarkedConfiguration) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            lw = -self.model.beta * (self.interior_energy + self.cross_energy(boundary))
        return np.where(np.isnan(lw), -np.inf, lw)

    def F(self, p: int, q: int) -> np.ndarray:
        key = (p, q)
        if key not in self.F_cache:
            mags = np.linalg.norm(self.spins, axis=2) ** q
            self.F_cache[key] = self.counts.astype(float) ** p + np.where(self.mask, mags, 0.0).sum(axis=1)
        return self.F_cache[key]


def _normalized(lw: np.ndarray) -> np.ndarray:
    top = np.max(lw)
    if not np.isfinite(top):
        raise DegenerateWeights("all reference weights vanish")
    w = np.exp(lw - top)
    return w


def _ess_check(w: np.ndarray):
    ess = w.sum() ** 2 / np.sum(w * w)
    if ess < 0.01 * len(w):
        raise DegenerateWeights(f"effective sample size {ess:.1f} below 1% of {len(w)}")


@dataclass
class TVEstimate:
    estimate: float
    stderr: float
    ess1: float
    ess2: float


def _tv_from_weights(w1, w2) -> float:
    return 0.5 * float(np.mean(np.abs(w1 / w1.mean() - w2 / w2.mean())))


def estimate_tv_onepoint(ref: OnePointReference, boundary1: MarkedConfiguration,
                         boundary2: MarkedConfiguration, n_blocks: int = N_BATCHES) -> TVEstimate:
    """Half the mean absolute difference of the two normalized one-point densities."""
    w1 = _normalized(ref.log_weights(boundary1))
    w2 = _normalized(ref.log_weights(boundary2))
    _ess_check(w1)
    _ess_check(w2)
    est = _tv_from_weights(w1, w2)
    # block jackknife
    blocks = np.array_split(np.arange(len(w1)), n_blocks)
    loo = []
    for b in blocks:
        keep = np.ones(len(w1), bool)
        keep[b] = False
        loo.append(_tv_from_weights(w1[keep], w2[keep]))
    loo = np.array(loo)
    se = float(math.sqrt((n_blocks - 1) / n_blocks * np.sum((loo - loo.mean()) ** 2)))
    ess = lambda w: float(w.sum() ** 2 / np.sum(w * w))
    return TVEstimate(est, se, ess(w1), ess(w2))


def sample_cell_contents(model: ModelSpec, cell, n: int, rng, z: float | None = None,
                         spins: SpinSampler | None = None, uniforms=None) -> list[MarkedConfiguration]:
    """Ideal-gas contents of one cube (counts by inversion of ``uniforms`` when given)."""
    z = model.z if z is None else z
    spins = spins or SpinSampler(model.v, model.m)
    U = rng.random(n) if uniforms is None else uniforms
    counts = stats.poisson.ppf(U, z).astype(int)
    out = []
    for c in counts:
        pos = np.asarray(cell, float) + rng.random((c, model.d)) - 0.5
        out.append(MarkedConfiguration(pos, spins.sample(rng, c), model.d, model.m))
    return out


def ideal_gas_F_quantile(model: ModelSpec, p: int, q: int, level: float = 0.99, n: int = 200_000,
                         rng=None, spins: SpinSampler | None = None) -> float:
    """Quantile of F on one cube under the marked Poisson law."""
    rng = rng if rng is not None else np.random.default_rng(0)
    spins = spins or SpinSampler(model.v, model.m)
    counts = rng.poisson(model.z, size=n)
    total = int(counts.sum())
    mags = np.linalg.norm(spins.sample(rng, total), axis=1) ** q
    owner = np.repeat(np.arange(n), counts)
    F = counts.astype(float) ** p + np.bincount(owner, weights=mags, minlength=n)
    return float(np.quantile(F, level))


@dataclass
class DPEstimate:
    c_hat: float            # clipped at 0
    c_raw: float
    c_stderr: float
    c_slope: float          # OLS slope of int h dmu - 1 on sum h(eta_j)
    c_analytic: float
    l_hat: float
    l_stderr: float
    h_scale: float
    n_boundaries: int
    F_cap: float
    c_interval: tuple = (math.nan, math.nan)
    l_interval: tuple = (math.nan, math.nan)


def estimate_IC(ref: OnePointReference, chain: BoundChain, boundaries: list[MarkedConfiguration],
                p: int, q: int) -> dict:
    """Witness for ``int h dmu_k <= 1 + c sum_{j in dk} h(eta_j)`` with h = C F, C = a / C0."""
    C = chain.h_scale
    F = ref.F(p, q)
    model = ref.model
    nb = neighborhood(ref.k, model.range_R)
    xs, ys, ratios, ses = [], [], [], []
    for b in boundaries:
        w = _normalized(ref.log_weights(b))
        _ess_check(w)
        mean_h = C * float(np.sum(w * F) / np.sum(w))
        # delta-method stderr of the self-normalized mean
        wn = w / w.sum()
        se_h = C * float(math.sqrt(np.sum(wn * wn * (F - np.sum(wn * F)) ** 2)))
        hb = C * sum(tempering_F(b.in_cell(j), p, q) for j in b.cell_map if j in nb)
        xs.append(hb)
        ys.append(mean_h - 1.0)
        if hb > 0:
            ratios.append((mean_h - 1.0) / hb)
            ses.append(se_h / hb)
        elif mean_h > 1.0 + 3 * se_h:
            ratios.append(math.inf)
            ses.append(0.0)
    if ratios:
        i = int(np.argmax(ratios))
        c_raw, c_se = float(ratios[i]), float(ses[i])
    else:
        c_raw, c_se = 0.0, 0.0
    xs, ys = np.array(xs), np.array(ys)
    slope = float(np.polyfit(xs, ys, 1)[0]) if len(xs) > 2 and np.ptp(xs) > 0 else math.nan
    return {"c_hat": max(c_raw, 0.0), "c_raw": c_raw, "c_stderr": c_se, "c_slope": slope,
            "c_analytic": chain.c_analytic, "h_scale": C, "n": len(boundaries)}


def estimate_CC(ref: OnePointReference, perturbed: list[MarkedConfiguration]) -> dict:
    """l: the largest TV distance between the kernel with one neighbour-cell content and with none."""
    empty = MarkedConfiguration.empty(ref.model.d, ref.model.m)
    best, best_se = 0.0, 0.0
    for b in perturbed:
        if b.n == 0:
            continue
        tv = estimate_tv_onepoint(ref, b, empty)
        if tv.estimate > best:
            best, best_se = tv.estimate, tv.stderr
    return {"l_hat": best, "l_stderr": best_se, "n": len(perturbed)}


# ---------------------------------------------------------------------------
# covariance decay


def _occupancy(cfg_cell: MarkedConfiguration) -> float:
    return 1.0 if cfg_cell.n else 0.0


def _count(cfg_cell: MarkedConfiguration) -> float:
    return float(min(cfg_cell.n, 10))


def _mean_spin(cfg_cell: MarkedConfiguration) -> float:
    if cfg_cell.n == 0:
        return 0.0
    return float(min(np.mean(np.linalg.norm(cfg_cell.spins, axis=1)), 10.0))


OBSERVABLES = {"occupancy": _occupancy, "count": _count, "mean_spin": _mean_spin}


@dataclass
class DecayFit:
    separations: list
    distances: list          # ceil(|k1 - k2| / R)
    cov: list
    stderr: list
    used: list
    a_hat: float
    a_ci: tuple
    c_hat: float
    residuals: list
    insufficient: bool
    n_snapshots: int

    def as_dict(self) -> dict:
        return asdict(self)


def cell_series(snapshots, cells, g) -> np.ndarray:
    """T x K matrix of g evaluated on each cell's content."""
    out = np.empty((len(snapshots), len(cells)))
    for t, s in enumerate(snapshots):
        for i, c in enumerate(cells):
            out[t, i] = g(s.in_cell(c))
    return out


def covariance_by_separation(G1: np.ndarray, G2: np.ndarray, cells: list, separations):
    """Translation-averaged covariance at each axis-0 separation, with batch-means errors."""
    index = {c: i for i, c in enumerate(cells)}
    c1 = G1 - G1.mean(axis=0)
    c2 = G2 - G2.mean(axis=0)
    covs, ses = [], []
    for s in separations:
        pairs = [(index[c], index[(c[0] + s,) + tuple(c[1:])]) for c in cells
                 if (c[0] + s,) + tuple(c[1:]) in index]
        if not pairs:
            covs.append(math.nan)
            ses.append(math.nan)
            continue
        i, j = np.array(pairs).T
        series = np.mean(c1[:, i] * c2[:, j], axis=1)
        m, se = batch_means(series)
        covs.append(m)
        ses.append(se)
    return np.array(covs), np.array(ses)


def fit_decay(separations, covs, ses, R: float, n_snapshots: int = 0) -> DecayFit:
    dist = [math.ceil(s / R) for s in separations]
    used = [bool(np.isfinite(c) and se > 0 and abs(c) > 3 * se) for c, se in zip(covs, ses)]
    x = np.array([d for d, u in zip(dist, used) if u], float)
    y = np.array([math.log(abs(c)) for c, u in zip(covs, used) if u])
    if len(x) < 3:
        warnings.warn(f"only {len(x)} covariance(s) above the noise floor", InsufficientSignal, stacklevel=2)
        return DecayFit(list(separations), dist, list(map(float, covs)), list(map(float, ses)), used,
                        math.nan, (math.nan, math.nan), math.nan, [], True, n_snapshots)
    res = stats.linregress(x, y)
    tq = stats.t.ppf(0.975, len(x) - 2)
    a_hat = -res.slope
    resid = y - (res.intercept + res.slope * x)
    return DecayFit(list(separations), dist, list(map(float, covs)), list(map(float, ses)), used,
                    float(a_hat), (float(a_hat - tq * res.stderr), float(a_hat + tq * res.stderr)),
                    float(math.exp(res.intercept)), resid.tolist(), False, n_snapshots)


def estimate_covariance_decay(g1: str, g2: str, separations, window: Window, model: ModelSpec,
                              n_samples: int, rng, kcfg: KernelConfig | None = None,
                              boundary: MarkedConfiguration | None = None,
                              spins: SpinSampler | None = None) -> DecayFit:
    kcfg = kcfg or KernelConfig()
    chain = Chain(model, window, boundary, kcfg, rng, spins)
    chain.burn_in()
    cells = window.sorted_cells()
    keys = [chain._key(c) for c in cells]
    G1 = np.empty((n_samples, len(cells)))
    G2 = G1 if g2 == g1 else np.empty((n_samples, len(cells)))
    for t in range(n_samples):
        chain.advance(kcfg.thin)
        G1[t] = chain.cell_values(keys, g1)
        if g2 != g1:
            G2[t] = chain.cell_values(keys, g2)
    covs, ses = covariance_by_separation(G1, G2, cells, separations)
    return fit_decay(list(separations), covs, ses, model.range_R, n_samples)
