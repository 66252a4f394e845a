"""Reference measures: Lebesgue-Poisson with activity z and the spin law g(ds) = e^{-V(s)} ds / g(S)."""
from __future__ import annotations

import math
from functools import cached_property

import numpy as np
from scipy import integrate, optimize, special

from .configuration import MarkedConfiguration
from .lattice import Window
from .model import SinglePspinEnergy

__all__ = [
    "make_rng", "sample_poisson_config", "lp_unnormalized_count_integral", "SpinSampler",
    "EnvelopeFailure", "Divergent", "sphere_area",
]


class EnvelopeFailure(RuntimeError):
    pass


class Divergent(ValueError):
    pass


def make_rng(seed: int, chain: int = 0, stream: int = 0) -> np.random.Generator:
    """Independent counter-based stream for (seed, chain, stream)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(chain), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


def sphere_area(m: int) -> float:
    """Surface measure of the unit sphere in R^m (2 points for m = 1)."""
    return 2.0 * math.pi ** (m / 2) / math.gamma(m / 2)


def lp_unnormalized_count_integral(region, z: float) -> float:
    """``int N d lambda`` over one region: ``z vol e^{z vol}``."""
    vol = region.volume if isinstance(region, Window) else float(region)
    return z * vol * math.exp(z * vol)


def sample_poisson_config(region: Window, z: float, rng, spins=None, m: int = 1) -> MarkedConfiguration:
    """Marked Poisson sample; ``spins`` is a SpinSampler (zeros if omitted)."""
    n = int(rng.poisson(z * region.volume)) if z > 0 else 0
    pos = region.uniform_points(n, rng)
    if spins is not None:
        sp = spins.sample(rng, n)
        m = spins.m
    else:
        sp = np.zeros((n, m))
    return MarkedConfiguration(pos, sp, region.d, m)


class SpinSampler:
    """Sampling and integration against the normalized spin law of a radial V."""

    def __init__(self, v: SinglePspinEnergy, m: int = 1, batch: int = 4096):
        self.v = v
        self.m = m
        self.batch = batch
        self.tau, self.L = self._fit_envelope()
        self.acceptance = self._acceptance_rate(self.tau, self.L)
        self.mode = "rejection"
        if not self.acceptance >= 1e-4:
            if m == 1:
                self.mode = "inversion"
            else:
                raise EnvelopeFailure(f"envelope acceptance {self.acceptance:.3g} < 1e-4")

    # radial integrals ---------------------------------------------------

    @cached_property
    def t_max(self) -> float:
        """Radius beyond which t^{m-1} e^{-V(t)} is below e^{-60} of its peak and falling."""
        h = lambda t: (self.m - 1) * math.log(t) - self.v.radial(t) if t > 0 else (0.0 if self.m == 1 else -math.inf)
        ts = np.linspace(1e-6, 1.0, 200)
        peak = max(h(t) for t in ts)
        t = 1.0
        while h(t) > peak - 60 or h(2 * t) > h(t):
            peak = max(peak, h(t))
            t *= 1.25
            if t > 1e6:
                raise EnvelopeFailure("V does not confine the spins")
        return t

    def _radial_log_integral(self, log_f) -> float:
        """``ln int_0^inf exp(log_f(t)) dt`` with the peak factored out."""
        T = self.t_max
        while True:
            grid = np.linspace(0, T, 2001)[1:]
            vals = np.array([log_f(t) for t in grid])
            top = float(np.max(vals))
            if vals[-1] < top - 60 and vals[-1] < vals[-2]:
                break
            T *= 2
            if T > 1e8:
                raise Divergent("integrand does not decay")
        t_star = float(grid[np.argmax(vals)])
        f = lambda t: math.exp(log_f(t) - top) if t > 0 else (math.exp(log_f(0.0) - top) if self.m == 1 else 0.0)
        pieces = [(0.0, t_star), (t_star, T), (T, math.inf)]
        total = 0.0
        for lo, hi in pieces:
            if hi > lo:
                val, _ = integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-11, limit=400)
                total += val
        return top + math.log(total)

    def _log_radial(self, t: float, extra: float = 0.0) -> float:
        if t == 0.0:
            return -self.v.radial(0.0) + extra if self.m == 1 else -math.inf
        return (self.m - 1) * math.log(t) - self.v.radial(t) + extra

    @cached_property
    def log_normalizer(self) -> float:
        """``ln g(S)`` for the unnormalized e^{-V}."""
        return math.log(sphere_area(self.m)) + self._radial_log_integral(self._log_radial)

    @property
    def normalizer(self) -> float:
        return math.exp(self.log_normalizer)

    def moment(self, b: float) -> float:
        """``E |s|^b``."""
        if b == 0:
            return 1.0
        lf = lambda t: self._log_radial(t) + (b * math.log(t) if t > 0 else -math.inf)
        return math.exp(math.log(sphere_area(self.m)) + self._radial_log_integral(lf) - self.log_normalizer)

    def spin_exp_moment(self, b1: float, b2: float) -> float:
        """``C_{b1,b2} = ln int exp(b1 |s|^b2) g(ds)``."""
        return self.log_exp_poly([(b1, b2)])

    def log_exp_poly(self, terms) -> float:
        """``ln int exp(sum_i c_i |s|^e_i) g(ds)`` for (c_i, e_i) pairs."""
        terms = [(c, e) for c, e in terms if c != 0]
        if not terms:
            return 0.0
        for c, e in terms:
            # V >= a_V t^q_V - b_V: equal orders still converge while c < a_V
            if c > 0 and (e > self.v.q_V or (e == self.v.q_V and c >= self.v.a_V)):
                raise Divergent(f"exp({c} |s|^{e}) is not g-integrable (q_V={self.v.q_V}, a_V={self.v.a_V})")
        lf = lambda t: self._log_radial(t, sum(c * t ** e for c, e in terms))
        return math.log(sphere_area(self.m)) + self._radial_log_integral(lf) - self.log_normalizer

    def mass_within(self, radius: float) -> float:
        """Probability that |s| <= radius."""
        f = lambda t: math.exp(self._log_radial(t) + math.log(sphere_area(self.m)) - self.log_normalizer)
        val, _ = integrate.quad(f, 0.0, radius, epsabs=0, epsrel=1e-12, limit=400)
        return val

    def truncation_radius(self, tail: float = 1e-12) -> float:
        lf_tail = lambda r: integrate.quad(
            lambda t: math.exp(self._log_radial(t) + math.log(sphere_area(self.m)) - self.log_normalizer),
            r, math.inf, epsabs=0, epsrel=1e-10, limit=400)[0]
        return optimize.brentq(lambda r: lf_tail(r) - tail, 1e-6, self.t_max)

    # sampling -------------------------------------------------------------

    def _envelope_log_sup(self, tau: float) -> float:
        """``sup_t [-V(t) + t^2 / (2 tau^2)]``; inf if the envelope cannot dominate."""
        g = lambda t: -self.v.radial(t) + t * t / (2 * tau * tau)
        T = max(self.t_max, 10 * tau)
        ts = np.linspace(0, T, 4001)
        vals = np.array([g(t) for t in ts])
        if vals[-1] >= vals[-2]:
            return math.inf
        i = int(np.argmax(vals))
        lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]
        res = optimize.minimize_scalar(lambda t: -g(t), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12})
        return max(float(vals[i]), -float(res.fun)) + 1e-9

    def _acceptance_rate(self, tau, L) -> float:
        if not math.isfinite(L):
            return 0.0
        log_rate = self.log_normalizer - L - 0.5 * self.m * math.log(2 * math.pi * tau * tau)
        return math.exp(min(log_rate, 0.0))

    def _fit_envelope(self):
        def neg_rate(log_tau):
            tau = math.exp(log_tau)
            L = self._envelope_log_sup(tau)
            if not math.isfinite(L):
                return 1e6
            return -(self.log_normalizer - L - 0.5 * self.m * math.log(2 * math.pi * tau * tau))
        res = optimize.minimize_scalar(neg_rate, bounds=(math.log(1e-3), math.log(10 * self.t_max)),
                                       method="bounded")
        tau = math.exp(float(res.x))
        return tau, self._envelope_log_sup(tau)

    @cached_property
    def _inverse_cdf(self):
        T = self.t_max
        grid = np.linspace(-T, T, 40001)
        dens = np.exp(-self.v.radial_array(np.abs(grid)))
        cdf = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
        return grid, cdf / cdf[-1]

    def sample(self, rng, size: int) -> np.ndarray:
        if size == 0:
            return np.zeros((0, self.m))
        if self.mode == "inversion":
            grid, cdf = self._inverse_cdf
            return np.interp(rng.random(size), cdf, grid).reshape(size, 1)
        out, have = [], 0
        while have < size:
            k = max(self.batch, int(1.2 * (size - have) / self.acceptance))
            prop = rng.normal(scale=self.tau, size=(k, self.m))
            t = np.linalg.norm(prop, axis=1)
            log_acc = -self.v.radial_array(t) + t * t / (2 * self.tau ** 2) - self.L
            keep = prop[np.log(rng.random(k)) < log_acc]
            out.append(keep)
            have += len(keep)
        return np.vstack(out)[:size]

    def sample_one(self, rng) -> np.ndarray:
        return self.sample(rng, 1)[0]

    # Gauss rules ------------------------------------------------------------

    def gauss_rule(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Nodes (k, m) and probability weights for the spin law.

        m = 1: n-point Gauss rule for the weight e^{-V}.  m = 2: n radial Gauss
        nodes for t e^{-V(t)} times 2n equispaced angles.
        """
        T = self.t_max
        if self.m == 1:
            x, w = _legendre_on(-T, T, 3000)
            w = w * np.exp(-self.v.radial_array(np.abs(x)))
            nodes, weights = _gauss_from_discrete(x, w, n)
            return nodes.reshape(-1, 1), weights / weights.sum()
        if self.m == 2:
            x, w = _legendre_on(0.0, T, 3000)
            w = w * x * np.exp(-self.v.radial_array(x))
            rad, rw = _gauss_from_discrete(x, w, n)
            k = 2 * n
            ang = 2 * math.pi * (np.arange(k) + 0.5) / k
            nodes = np.stack([np.outer(rad, np.cos(ang)).ravel(), np.outer(rad, np.sin(ang)).ravel()], axis=1)
            weights = np.repeat(rw, k) / k
            return nodes, weights / weights.sum()
        raise NotImplementedError("spin quadrature supports m <= 2")


def _legendre_on(a, b, n):
    x, w = special.roots_legendre(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def _gauss_from_discrete(x: np.ndarray, w: np.ndarray, n: int):
    """Gauss nodes and weights for a discrete measure via the Stieltjes recursion."""
    w = w / w.sum()
    alpha, beta = np.zeros(n), np.zeros(n)
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    norm_prev = 1.0
    for k in range(n):
        norm = np.sum(w * p * p)
        alpha[k] = np.sum(w * x * p * p) / norm
        beta[k] = norm / norm_prev if k > 0 else 1.0
        p_next = (x - alpha[k]) * p - (beta[k] * p_prev if k > 0 else 0.0)
        p_prev, p, norm_prev = p, p_next, norm
        # keep magnitudes moderate
        scale = math.sqrt(np.sum(w * p * p)) or 1.0
        p, p_prev, norm_prev = p / scale, p_prev / scale, norm_prev / scale ** 2
    J = np.diag(alpha) + np.diag(np.sqrt(beta[1:]), 1) + np.diag(np.sqrt(beta[1:]), -1)
    vals, vecs = np.linalg.eigh(J)
    return vals, vecs[0] ** 2
