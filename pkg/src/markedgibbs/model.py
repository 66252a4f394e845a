"""Model specification: dimensions, thermodynamic parameters and the four potentials.

Every built-in potential family is radial (a function of |x - y| or |s|) and
carries the assumption constants it satisfies *by construction*.  The
constants are declared, never fitted; :func:`validate_assumptions` only
spot-checks them by random sampling.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, ClassVar

import numpy as np

__all__ = [
    "PositionalPotential", "PowerLawPotential", "PowerLawWellPotential", "ZeroPotential",
    "CustomPositionalPotential",
    "CouplingField", "ConstantCoupling", "ZeroCoupling", "CustomCoupling",
    "SpinPotential", "BilinearSpin", "QuadraticDifferenceSpin", "CustomSpin",
    "SinglePspinEnergy", "PolynomialSpinEnergy", "CustomSpinEnergy",
    "ModelSpec", "AssumptionCheck", "AssumptionReport", "NoFeasiblePQ",
    "validate_assumptions", "select_pq", "a5_margin",
]

INF = math.inf


def _dist(x, y) -> float:
    return math.dist(np.atleast_1d(x).tolist(), np.atleast_1d(y).tolist())


# --------------------------------------------------------------------------
# positional potentials Phi


@dataclass(frozen=True)
class PositionalPotential:
    """Radial pair potential ``Phi(x, y) = f(|x - y|)`` with superstability data.

    ``A_phi``, ``B_phi`` and ``P`` are the constants of the local superstability
    bound ``H(gamma_k) >= A_phi N^P - B_phi N``; ``M`` bounds ``Phi`` from below.
    """

    tag: ClassVar[str] = "abstract"

    def radial(self, r: float) -> float:
        raise NotImplementedError

    def radial_array(self, r: np.ndarray) -> np.ndarray:
        return np.vectorize(self.radial, otypes=[float])(r)

    def __call__(self, x, y) -> float:
        return self.radial(_dist(x, y))

    # declared constants; overridden by families
    @property
    def A_phi(self) -> float:
        raise NotImplementedError

    @property
    def B_phi(self) -> float:
        raise NotImplementedError

    @property
    def P(self) -> float:
        raise NotImplementedError

    @property
    def M(self) -> float:
        raise NotImplementedError

    @property
    def hard_core_radius(self) -> float:
        return 0.0

    @property
    def is_zero(self) -> bool:
        return False

    def params(self) -> dict:
        raise NotImplementedError


def _power_law_superstability(A: float, delta: float, d: int, range_R: float) -> tuple[float, float]:
    """Constants (A_phi, B_phi) for ``A r^{-d(1+delta)}`` truncated at ``range_R``."""
    P = 2.0 + delta
    s = d * (1.0 + delta)
    if d == 1 and range_R >= 1.0:
        # N-1 nearest-neighbour gaps summing to < 1, all in range:
        # H >= A (N-1)^(1+s) = A (N-1)^P >= A 2^-P N^P for N >= 2.
        a_phi = A * 2.0 ** (-P)
        return a_phi, a_phi
    # pigeonhole over subcubes of side <= range_R / sqrt(d)
    L0 = math.ceil(math.sqrt(d) / range_R)
    a_phi = A * 2.0 ** (-delta * (1 + d)) / (4.0 * d ** (s / 2.0))
    b_phi = a_phi * (2.0 * L0 ** d) ** (P - 1.0)
    return a_phi, b_phi


@dataclass(frozen=True)
class PowerLawPotential(PositionalPotential):
    """``Phi = A |x-y|^{-d(1+delta)}`` for ``|x-y| <= range_R``, optional hard core.

    Nonnegative, so ``M = 0``; superstable with ``P = 2 + delta``.
    """

    A: float = 1.0
    delta: float = 0.5
    d: int = 1
    range_R: float = 1.0
    core: float = 0.0

    tag: ClassVar[str] = "power_law"

    def __post_init__(self):
        if self.A <= 0 or self.delta <= 0 or self.range_R <= 0 or self.core < 0:
            raise ValueError("power_law needs A > 0, delta > 0, range_R > 0, core >= 0")

    @property
    def exponent(self) -> float:
        return self.d * (1.0 + self.delta)

    def radial(self, r: float) -> float:
        if r < self.core:
            return INF
        if r > self.range_R:
            return 0.0
        if r == 0.0:
            return INF
        try:
            return self.A * r ** (-self.exponent)
        except OverflowError:
            return INF

    def radial_array(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            out = np.where(r > 0, self.A * np.where(r > 0, r, 1.0) ** (-self.exponent), INF)
        out = np.where(r > self.range_R, 0.0, out)
        return np.where(r < self.core, INF, out)

    @property
    def A_phi(self):
        return _power_law_superstability(self.A, self.delta, self.d, self.range_R)[0]

    @property
    def B_phi(self):
        return _power_law_superstability(self.A, self.delta, self.d, self.range_R)[1]

    @property
    def P(self):
        return 2.0 + self.delta

    @property
    def M(self):
        return 0.0

    @property
    def hard_core_radius(self):
        return self.core

    def params(self):
        return {"A": self.A, "delta": self.delta, "d": self.d, "range_R": self.range_R, "core": self.core}


@dataclass(frozen=True)
class PowerLawWellPotential(PowerLawPotential):
    """Power law plus a flat attractive well ``-depth`` on ``|x-y| <= range_R``.

    ``M = depth``.  Half of the power-law coefficient absorbs the well:
    ``A_pl N^P - depth N(N-1)/2 >= (A_pl/2) N^P - B' N``.
    """

    depth: float = 0.1

    tag: ClassVar[str] = "power_law_well"

    def radial(self, r):
        v = super().radial(r)
        if v == INF or r > self.range_R:
            return v
        return v - self.depth

    def radial_array(self, r):
        r = np.asarray(r, dtype=float)
        v = super().radial_array(r)
        return np.where(r > self.range_R, v, v - self.depth)

    @property
    def A_phi(self):
        return 0.5 * super().A_phi

    @property
    def B_phi(self):
        a_half = 0.5 * super().A_phi
        extra = 0.0
        n = 1
        while True:
            gap = 0.5 * self.depth * (n * n - n) - a_half * n ** self.P
            if gap > 0:
                extra = max(extra, gap / n)
            elif n > 2 and a_half * n ** (self.P - 2) > self.depth:
                break
            n += 1
        return super().B_phi + extra

    @property
    def M(self):
        return self.depth

    def params(self):
        return {**super().params(), "depth": self.depth}


@dataclass(frozen=True)
class ZeroPotential(PositionalPotential):
    """``Phi = 0`` (ideal gas).  Not superstable: (A2) fails on purpose."""

    tag: ClassVar[str] = "zero"

    def radial(self, r):
        return 0.0

    def radial_array(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    A_phi = property(lambda self: 0.0)
    B_phi = property(lambda self: 0.0)
    P = property(lambda self: 2.0)
    M = property(lambda self: 0.0)
    is_zero = property(lambda self: True)

    def params(self):
        return {}


@dataclass(frozen=True)
class CustomPositionalPotential(PositionalPotential):
    """User-supplied radial ``Phi`` with user-declared constants (not in config files)."""

    func: Callable[[float], float] = field(default=lambda r: 0.0)
    declared: dict = field(default_factory=lambda: {"A_phi": 1.0, "B_phi": 0.0, "P": 3.0, "M": 0.0})
    core: float = 0.0

    tag: ClassVar[str] = "custom"

    def radial(self, r):
        return float(self.func(r))

    A_phi = property(lambda self: self.declared["A_phi"])
    B_phi = property(lambda self: self.declared["B_phi"])
    P = property(lambda self: self.declared["P"])
    M = property(lambda self: self.declared["M"])
    hard_core_radius = property(lambda self: self.core)

    def params(self):
        return {"func": repr(self.func), **self.declared}


# --------------------------------------------------------------------------
# couplings J


@dataclass(frozen=True)
class CouplingField:
    tag: ClassVar[str] = "abstract"

    def radial(self, r: float) -> float:
        raise NotImplementedError

    def radial_array(self, r):
        return np.vectorize(self.radial, otypes=[float])(r)

    def __call__(self, x, y) -> float:
        return self.radial(_dist(x, y))

    @property
    def J_inf(self) -> float:
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        return self.J_inf == 0.0

    def params(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantCoupling(CouplingField):
    """``J_xy = J0 * 1{|x-y| <= range_R}``."""

    J0: float = 0.1
    range_R: float = 1.0

    tag: ClassVar[str] = "constant"

    def radial(self, r):
        return self.J0 if r <= self.range_R else 0.0

    def radial_array(self, r):
        return np.where(np.asarray(r) <= self.range_R, self.J0, 0.0)

    @property
    def J_inf(self):
        return abs(self.J0)

    def params(self):
        return {"J0": self.J0, "range_R": self.range_R}


@dataclass(frozen=True)
class ZeroCoupling(CouplingField):
    tag: ClassVar[str] = "zero"

    def radial(self, r):
        return 0.0

    def radial_array(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    J_inf = property(lambda self: 0.0)

    def params(self):
        return {}


@dataclass(frozen=True)
class CustomCoupling(CouplingField):
    func: Callable[[float], float] = field(default=lambda r: 0.0)
    sup_norm: float = 0.0

    tag: ClassVar[str] = "custom"

    def radial(self, r):
        return float(self.func(r))

    J_inf = property(lambda self: self.sup_norm)

    def params(self):
        return {"func": repr(self.func), "J_inf": self.sup_norm}


# --------------------------------------------------------------------------
# spin-spin potentials W


@dataclass(frozen=True)
class SpinPotential:
    """``W(u, v)`` with the polynomial bound ``|W| <= |u|^r + |v|^r + C_W``."""

    tag: ClassVar[str] = "abstract"

    def __call__(self, u, v) -> float:
        raise NotImplementedError

    def array(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Broadcast over leading axes; the last axis is the spin component."""
        raise NotImplementedError

    r: float = 2.0
    C_W: float = 0.0

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class BilinearSpin(SpinPotential):
    """``W(u, v) = -u.v``; ``|u.v| <= (|u|^2 + |v|^2)/2`` so r = 2, C_W = 0."""

    tag: ClassVar[str] = "bilinear"

    def __call__(self, u, v):
        return -math.fsum(a * b for a, b in zip(np.atleast_1d(u).tolist(), np.atleast_1d(v).tolist()))

    def array(self, u, v):
        return -np.sum(np.asarray(u) * np.asarray(v), axis=-1)


def _quadratic_difference_cw(r: float) -> float:
    # |u-v|^2 <= 2|u|^2 + 2|v|^2 and 2t^2 <= t^r + c with c = max_t (2t^2 - t^r)
    t = (4.0 / r) ** (1.0 / (r - 2.0))
    return 2.0 * t * t * (2.0 - 4.0 / r)


@dataclass(frozen=True)
class QuadraticDifferenceSpin(SpinPotential):
    """``W(u, v) = |u - v|^2`` declared with exponent ``r > 2``.

    With r = 2 no additive constant works (u = -v gives 4|u|^2), so the order
    is a parameter and ``C_W`` follows from it.
    """

    r: float = 3.0
    C_W: float = field(init=False, default=0.0)

    tag: ClassVar[str] = "quadratic_difference"

    def __post_init__(self):
        if self.r <= 2:
            raise ValueError("quadratic_difference needs r > 2")
        object.__setattr__(self, "C_W", _quadratic_difference_cw(self.r))

    def __call__(self, u, v):
        return math.fsum((a - b) ** 2 for a, b in zip(np.atleast_1d(u).tolist(), np.atleast_1d(v).tolist()))

    def array(self, u, v):
        return np.sum((np.asarray(u) - np.asarray(v)) ** 2, axis=-1)

    def params(self):
        return {"r": self.r}


@dataclass(frozen=True)
class CustomSpin(SpinPotential):
    func: Callable = field(default=lambda u, v: 0.0)

    tag: ClassVar[str] = "custom"

    def __call__(self, u, v):
        return float(self.func(np.atleast_1d(u), np.atleast_1d(v)))

    def array(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        flat_u = u.reshape(-1, u.shape[-1])
        flat_v = v.reshape(-1, v.shape[-1])
        out = np.array([self(a, b) for a, b in zip(flat_u, flat_v)])
        return out.reshape(u.shape[:-1])

    def params(self):
        return {"func": repr(self.func), "r": self.r, "C_W": self.C_W}


# --------------------------------------------------------------------------
# single-spin energy V


@dataclass(frozen=True)
class SinglePspinEnergy:
    """Radial ``V(s) = f(|s|)`` with ``V(s) >= a_V |s|^q_V - b_V``."""

    tag: ClassVar[str] = "abstract"

    def radial(self, t: float) -> float:
        raise NotImplementedError

    def radial_array(self, t):
        return np.vectorize(self.radial, otypes=[float])(t)

    def __call__(self, s) -> float:
        return self.radial(float(np.linalg.norm(np.atleast_1d(s))))

    q_V: int = 4
    a_V: float = 1.0
    b_V: float = 0.0

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class PolynomialSpinEnergy(SinglePspinEnergy):
    """``V(s) = coef |s|^q_V``; ``a_V = coef``, ``b_V = 0``."""

    q_V: int = 4
    coef: float = 1.0
    a_V: float = field(init=False, default=1.0)
    b_V: float = field(init=False, default=0.0)

    tag: ClassVar[str] = "polynomial"

    def __post_init__(self):
        if int(self.q_V) != self.q_V or self.q_V < 1 or self.coef <= 0:
            raise ValueError("polynomial V needs integer q_V >= 1 and coef > 0")
        object.__setattr__(self, "a_V", self.coef)

    def radial(self, t):
        return self.coef * abs(t) ** self.q_V

    def radial_array(self, t):
        return self.coef * np.abs(np.asarray(t, dtype=float)) ** self.q_V

    def params(self):
        return {"q_V": self.q_V, "coef": self.coef}


@dataclass(frozen=True)
class CustomSpinEnergy(SinglePspinEnergy):
    func: Callable[[float], float] = field(default=lambda t: t ** 4)

    tag: ClassVar[str] = "custom"

    def radial(self, t):
        return float(self.func(t))

    def params(self):
        return {"func": repr(self.func), "q_V": self.q_V, "a_V": self.a_V, "b_V": self.b_V}


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    d: int
    m: int
    beta: float
    z: float
    range_R: float
    phi: PositionalPotential
    coupling: CouplingField
    w: SpinPotential
    v: SinglePspinEnergy

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ValueError("d and m must be positive")
        if not (self.beta > 0 and self.z > 0 and self.range_R > 0):
            raise ValueError("beta, z and range_R must be positive")

    @property
    def J_inf(self) -> float:
        return self.coupling.J_inf

    @property
    def is_ideal(self) -> bool:
        return self.phi.is_zero and self.coupling.is_zero

    def replace(self, **changes) -> "ModelSpec":
        from dataclasses import replace
        return replace(self, **changes)

    def canonical(self) -> dict:
        return {
            "d": self.d, "m": self.m, "beta": self.beta, "z": self.z, "range_R": self.range_R,
            "phi": {"family": self.phi.tag, **self.phi.params()},
            "coupling": {"family": self.coupling.tag, **self.coupling.params()},
            "w": {"family": self.w.tag, **self.w.params()},
            "v": {"family": self.v.tag, **self.v.params()},
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# --------------------------------------------------------------------------
# assumption checks


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    detail: str = ""
    witness: object = None


@dataclass
class AssumptionReport:
    checks: list[AssumptionCheck]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]

    def get(self, name: str) -> AssumptionCheck:
        return next(c for c in self.checks if c.name == name)

    def as_dict(self) -> dict:
        return {c.name: {"passed": c.passed, "detail": c.detail,
                         "witness": None if c.witness is None else repr(c.witness)} for c in self.checks}


def a5_margin(P: float, q_V: float, r: float) -> float:
    """Left side of ``(P - 2)(q_V / r - 1) > 1``."""
    return (P - 2.0) * (q_V / r - 1.0)


def _random_directions(rng, n, dim):
    v = rng.normal(size=(n, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def validate_assumptions(spec: ModelSpec, n_samples: int = 1000, rng=None) -> AssumptionReport:
    rng = np.random.default_rng(0) if rng is None else rng
    d, m, R = spec.d, spec.m, spec.range_R
    phi, J, W, V = spec.phi, spec.coupling, spec.w, spec.v
    checks = []

    # (A1): probes beyond the range, a deterministic ladder plus random radii
    radii = np.concatenate([R + 0.05 * np.arange(1, 41), R * (1 + 2 * rng.random(n_samples)) + 1e-12])
    dirs = _random_directions(rng, len(radii), d)
    base = rng.uniform(-5, 5, size=(len(radii), d))
    witness = None
    for x, u, rad in zip(base, dirs, radii):
        y = x + rad * u
        if phi(x, y) != 0.0 or J(x, y) != 0.0:
            witness = (x.tolist(), y.tolist(), float(rad))
            break
    checks.append(AssumptionCheck("A1", witness is None,
                                  "Phi and J vanish beyond range_R" if witness is None
                                  else "Phi(x,y) or J_xy nonzero at |x-y| > range_R", witness))

    # symmetry, same code path with commuted arguments
    xs = rng.uniform(-2, 2, size=(n_samples, d))
    ys = xs + rng.uniform(-1.5 * R, 1.5 * R, size=(n_samples, d))
    us = rng.normal(size=(n_samples, m)) * 2
    vs = rng.normal(size=(n_samples, m)) * 2
    witness = None
    for x, y, u, v in zip(xs, ys, us, vs):
        if phi(x, y) != phi(y, x) or J(x, y) != J(y, x) or W(u, v) != W(v, u):
            witness = (x.tolist(), y.tolist(), u.tolist(), v.tolist())
            break
    checks.append(AssumptionCheck("symmetry", witness is None, "Phi, J, W symmetric", witness))

    # (A2) declared constants, plus a superstability spot check on one cube
    ok = spec.phi.P > 2 and spec.phi.A_phi > 0 and spec.phi.B_phi >= 0
    detail = f"P={phi.P}, A_phi={phi.A_phi:.6g}, B_phi={phi.B_phi:.6g}"
    witness = None
    if not ok:
        detail += " (need P > 2, A_phi > 0, B_phi >= 0)"
    else:
        for _ in range(max(50, n_samples // 10)):
            n = int(rng.integers(0, 13))
            pts = rng.uniform(-0.5, 0.5, size=(n, d))
            h = _pair_sum(phi, pts)
            if h < phi.A_phi * n ** phi.P - phi.B_phi * n - 1e-9 * (1 + abs(h)):
                witness = (pts.tolist(), h)
                ok = False
                detail += "; H(gamma_k) < A_phi N^P - B_phi N"
                break
    checks.append(AssumptionCheck("A2", ok, detail, witness))

    # lower bound constant M on sampled pairs
    rr = rng.uniform(0, 1.2 * R, size=n_samples)
    vals = phi.radial_array(rr)
    ok = bool(np.all(vals >= -phi.M - 1e-12))
    checks.append(AssumptionCheck("LB", ok, f"inf sampled Phi >= -M with M={phi.M}",
                                  None if ok else float(rr[np.argmin(vals)])))

    # |J| <= J_inf
    vals = J.radial_array(rr)
    ok = bool(np.all(np.abs(vals) <= J.J_inf + 1e-12))
    checks.append(AssumptionCheck("J_bound", ok, f"|J| <= J_inf={J.J_inf}",
                                  None if ok else float(rr[np.argmax(np.abs(vals))])))

    # (A3)
    mags = 10 ** rng.uniform(-3, 2, size=(n_samples, 2))
    u = _random_directions(rng, n_samples, m) * mags[:, :1]
    v = _random_directions(rng, n_samples, m) * mags[:, 1:]
    lhs = np.abs(W.array(u, v))
    rhs = np.linalg.norm(u, axis=1) ** W.r + np.linalg.norm(v, axis=1) ** W.r + W.C_W
    bad = np.nonzero(lhs > rhs * (1 + 1e-12) + 1e-12)[0]
    checks.append(AssumptionCheck("A3", bad.size == 0, f"|W| <= |u|^{W.r} + |v|^{W.r} + {W.C_W:.6g}",
                                  None if bad.size == 0 else (u[bad[0]].tolist(), v[bad[0]].tolist())))

    # (A4)
    t = 10 ** rng.uniform(-3, 1.5, size=n_samples)
    vals = V.radial_array(t)
    bad = np.nonzero(vals < V.a_V * t ** V.q_V - V.b_V - 1e-9 * (1 + np.abs(vals)))[0]
    ok = bad.size == 0 and int(V.q_V) == V.q_V and V.q_V >= 1 and V.a_V >= 0 and V.b_V >= 0
    checks.append(AssumptionCheck("A4", ok, f"V(s) >= {V.a_V}|s|^{V.q_V} - {V.b_V}",
                                  None if bad.size == 0 else float(t[bad[0]])))

    # (A5), analytic
    lhs = a5_margin(phi.P, V.q_V, W.r)
    checks.append(AssumptionCheck("A5", lhs > 1, f"(P-2)(q_V/r-1) = {lhs:.6g}, needs > 1", None if lhs > 1 else lhs))
    return AssumptionReport(checks)


def _pair_sum(phi: PositionalPotential, pts: np.ndarray) -> float:
    n = len(pts)
    if n < 2:
        return 0.0
    i, j = np.triu_indices(n, 1)
    r = np.linalg.norm(pts[i] - pts[j], axis=1)
    return float(np.sum(phi.radial_array(r)))


class NoFeasiblePQ(ValueError):
    pass


def select_pq(spec_or_constants) -> tuple[int, int, tuple[float, float]]:
    """Smallest integer pair with ``2 < p < P``, ``q < q_V`` and ``(p-2)(q/r-1) >= 1``.

    Accepts a :class:`ModelSpec` or a ``(P, q_V, r)`` tuple.
    """
    if isinstance(spec_or_constants, ModelSpec):
        P, q_V, r = spec_or_constants.phi.P, spec_or_constants.v.q_V, spec_or_constants.w.r
    else:
        P, q_V, r = spec_or_constants
    p = 3
    while p < P:
        for q in range(1, int(math.ceil(q_V))):
            if q < q_V and (p - 2) * (q / r - 1.0) >= 1.0:
                lo, hi = 1.0 / (p - 2), q / r - 1.0
                return p, q, (lo, hi)
        p += 1
    raise NoFeasiblePQ(f"no integers p, q with 2 < p < {P}, q < {q_V}, (p-2)(q/{r}-1) >= 1")
