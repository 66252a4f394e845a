"""Numeric instantiation of the analytic constant chain behind the moment bound."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.special import gammaln, logsumexp

from .configuration import MarkedConfiguration
from .lattice import n0 as lattice_n0, theta as lattice_theta
from .model import ModelSpec, select_pq
from .refmeasure import SpinSampler

__all__ = ["lemma1_constants", "compute_C0", "assemble_chain", "BoundChain", "SeriesDiverging",
           "iq_log_rhs", "certificate_text", "certificate_hash"]


class SeriesDiverging(ArithmeticError):
    pass


def lemma1_constants(eps: float, N0: int, C_W: float) -> tuple[float, float, float, float]:
    """Closed-form constants (C1, C2, C3, C4) splitting the conditional spin energy at tolerance eps."""
    ie = 1.0 / eps
    C1 = N0 / ((1 + ie) * (2 + ie)) + N0 / (2 + ie) + C_W * (2 + N0) / 2
    C2 = 1 / (2 + ie) + 1 / ((1 + ie) * (2 + ie)) + C_W / 2
    C3 = (N0 + 2) / (1 + eps)
    C4 = 1 / (1 + eps)
    return C1, C2, C3, C4


def c0_log_terms(z: float, log_weight, n_max: int) -> np.ndarray:
    """``ln(z^n / n!) + log_weight(n)`` for n = 0..n_max (unit volume)."""
    n = np.arange(n_max + 1, dtype=float)
    with np.errstate(divide="ignore"):
        lz = np.where(n > 0, n * math.log(z), 0.0) if z > 0 else np.where(n > 0, -np.inf, 0.0)
    return lz - gammaln(n + 1) + np.array([log_weight(int(k)) for k in n])


def compute_C0(a: float, beta: float, z: float, *, A_phi: float, B_phi: float, P: float, M: float,
               N0: int, J_inf: float, p: int, eps: float, C1: float, C_b: float,
               n_terms: int | None = None) -> tuple[float, int]:
    """``C0 = ln sum_n z^n/n! exp(-beta A_phi n^P + poly(n))`` and the number of terms used."""
    superlinear = a != 0 or M != 0 or J_inf * C1 != 0
    if superlinear and A_phi > 0:
        assert P > max(2 + 1 / eps, p), "C0 series needs P > max(2 + 1/eps, p)"

    def log_weight(n):
        poly = (a * n ** p + beta * M * N0 / 2 * n * n + beta * B_phi * n
                + beta * J_inf * C1 * n ** (2 + 1 / eps) + C_b * n)
        return -beta * A_phi * n ** P + poly

    if z == 0:
        return 0.0, 1
    if n_terms is not None:
        return float(logsumexp(c0_log_terms(z, log_weight, n_terms - 1))), n_terms
    total = -math.inf
    prev = -math.inf
    rising = 0
    n = 0
    lz = math.log(z)
    while True:
        t = n * lz - math.lgamma(n + 1) + log_weight(n)
        total = np.logaddexp(total, t)
        rising = rising + 1 if t > prev else 0
        if rising >= 50:
            raise SeriesDiverging(f"terms grew for 50 consecutive n (n={n})")
        if n > 0 and t < prev and t < total + math.log(1e-16):
            return float(total), n + 1
        prev = t
        n += 1
        if n > 100_000:
            raise SeriesDiverging("no convergence within 1e5 terms")


@dataclass(frozen=True)
class BoundChain:
    M: float
    p: int
    q: int
    eps: float
    eps_lo: float
    eps_hi: float
    N0: int
    theta: float
    C1: float
    C2: float
    C3: float
    C4: float
    C5: float
    a: float
    b1: float
    b2: float
    C_b1b2: float
    C_spin: float
    C0: float
    n_terms: int
    D: float
    DN0: float
    alpha: float
    Psi: float
    c_analytic: float
    h_scale: float
    dn0_le_1: bool
    dn0_lt_1: bool
    tempered_ok: bool
    spin_bound_valid: bool

    @property
    def feasible(self) -> bool:
        return self.dn0_le_1 and self.dn0_lt_1 and self.tempered_ok

    def as_dict(self) -> dict:
        return asdict(self)


def assemble_chain(model: ModelSpec, a: float | None = None, alpha: float | None = None,
                   eps: float | None = None, spins: SpinSampler | None = None) -> BoundChain:
    p, q, (lo, hi) = select_pq(model)
    eps = lo if eps is None else eps
    if not lo <= eps <= hi:
        raise ValueError(f"eps={eps} outside [{lo}, {hi}]")
    N0 = lattice_n0(model.d, model.range_R)
    th = lattice_theta(model.d, model.range_R)
    C1, C2, C3, C4 = lemma1_constants(eps, N0, model.w.C_W)
    beta, J, M = model.beta, model.J_inf, model.phi.M
    C5 = beta * J * C2 + beta * M / 2
    cmax = max(C5, beta * J * C4)
    if a is None:
        a = 1.05 * N0 * cmax if cmax > 0 else 1.0
    r = model.w.r
    b1 = beta * J * C3 + a
    b2 = max(r * (1 + eps), q)
    spins = spins or SpinSampler(model.v, model.m)
    C_b1b2 = spins.spin_exp_moment(b1, b2)
    # the single-exponent form dominates only when both orders agree
    C_exact = spins.log_exp_poly([(beta * J * C3, r * (1 + eps)), (a, q)])
    C_spin = max(C_b1b2, C_exact)
    phi = model.phi
    C0, n_terms = compute_C0(a, beta, model.z, A_phi=phi.A_phi, B_phi=phi.B_phi, P=phi.P, M=M, N0=N0,
                             J_inf=J, p=p, eps=eps, C1=C1, C_b=C_spin)
    D = cmax / a
    DN0 = D * N0
    if alpha is None:
        alpha = 0.5 * math.log(1 / DN0) / th if 0 < DN0 < 1 else 1.0
    Psi = C0 / (1 - DN0) if DN0 < 1 else math.inf
    return BoundChain(
        M=M, p=p, q=q, eps=eps, eps_lo=lo, eps_hi=hi, N0=N0, theta=th, C1=C1, C2=C2, C3=C3, C4=C4,
        C5=C5, a=a, b1=b1, b2=b2, C_b1b2=C_b1b2, C_spin=C_spin, C0=C0, n_terms=n_terms, D=D, DN0=DN0,
        alpha=alpha, Psi=Psi, c_analytic=D, h_scale=a / C0 if C0 > 0 else math.inf,
        dn0_le_1=DN0 <= 1, dn0_lt_1=DN0 < 1, tempered_ok=math.exp(alpha * th) * DN0 < 1,
        spin_bound_valid=C_exact <= C_b1b2 + 1e-12,
    )


def iq_log_rhs(chain: BoundChain, model: ModelSpec, boundary: MarkedConfiguration, k) -> float:
    """Log of the one-point bound ``e^{C0} exp sum_{j in dk} [C5 N_j^{2+1/eps} + beta J C4 sum |xi|^{r(1+eps)}]``."""
    from .lattice import neighborhood
    nb = neighborhood(k, model.range_R)
    ex = 2 + 1 / chain.eps
    er = model.w.r * (1 + chain.eps)
    total = chain.C0
    for j, idx in boundary.cell_map.items():
        if j in nb:
            mags = np.linalg.norm(boundary.spins[idx], axis=1)
            total += chain.C5 * len(idx) ** ex + model.beta * model.J_inf * chain.C4 * float(np.sum(mags ** er))
    return total


def certificate_text(chain: BoundChain, fingerprint: str) -> str:
    lines = [f"model_fingerprint={fingerprint}"]
    for k, v in chain.as_dict().items():
        lines.append(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}")
    lines.append(f"feasible={chain.feasible}")
    return "\n".join(lines) + "\n"


def certificate_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]
