import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from markedgibbs.bounds import (SeriesDiverging, assemble_chain, certificate_hash, certificate_text, compute_C0,
                                iq_log_rhs, lemma1_constants)
from markedgibbs.configuration import MarkedConfiguration
from markedgibbs.model import ZeroCoupling

from conftest import worked_model


def test_lemma1_examples():
    assert lemma1_constants(1.0, 5, 0.0) == (2.5, 0.5, 3.5, 0.5)
    assert lemma1_constants(1.0, 5, 2.0) == (9.5, 1.5, 3.5, 0.5)
    _, _, C3, C4 = lemma1_constants(1e12, 5, 0.0)
    assert C3 < 1e-10 and C4 < 1e-12


@given(st.floats(0.1, 10), st.integers(1, 30), st.floats(0, 5))
def test_lemma1_constants_positive_and_monotone_in_cw(eps, N0, cw):
    base = lemma1_constants(eps, N0, 0.0)
    more = lemma1_constants(eps, N0, cw)
    assert all(v > 0 for v in base)
    assert more[0] >= base[0] and more[1] >= base[1] and more[2:] == base[2:]


ZERO = dict(A_phi=0.0, B_phi=0.0, P=2.0, M=0.0, N0=5, J_inf=0.0, p=3, eps=1.0, C1=0.0)


@settings(max_examples=40)
@given(st.floats(0.01, 3), st.floats(-2, 2))
def test_c0_exponential_series_identity(z, Cb):
    C0, _ = compute_C0(0.0, 1.0, z, C_b=Cb, **ZERO)
    assert abs(C0 - z * math.exp(Cb)) <= 1e-12 * max(1.0, C0)


def test_c0_zero_activity():
    assert compute_C0(1.0, 1.0, 0.0, C_b=0.3, **ZERO)[0] == 0


WORKED = dict(A_phi=0.0625, B_phi=0.0625, P=4.0, M=0.0, N0=5, J_inf=0.1, p=3, eps=1.0, C1=2.5, C_b=0.15)


def test_c0_truncation_is_stable():
    C0, n = compute_C0(0.2625, 1.0, 0.5, **WORKED)
    C0b, _ = compute_C0(0.2625, 1.0, 0.5, n_terms=2 * n, **WORKED)
    assert abs(C0 - C0b) < 1e-12


@settings(max_examples=30)
@given(st.floats(0, 2), st.floats(0, 2), st.floats(0.05, 2), st.floats(0, 1))
def test_c0_monotone_in_a_and_z(a, da, z, dz):
    lo, _ = compute_C0(a, 1.0, z, **WORKED)
    assert compute_C0(a + da, 1.0, z, **WORKED)[0] >= lo - 1e-12
    assert compute_C0(a, 1.0, z + dz, **WORKED)[0] >= lo - 1e-12


def test_c0_refuses_subcritical_superstability():
    with pytest.raises(AssertionError):
        compute_C0(1.0, 1.0, 0.5, **{**WORKED, "P": 2.5})


def test_c0_reports_divergence():
    with pytest.raises(SeriesDiverging):
        compute_C0(1.0, 1.0, 0.5, **{**WORKED, "A_phi": 0.0})


def test_worked_chain_frozen_values(worked):
    ch = assemble_chain(worked)
    assert (ch.p, ch.q, ch.eps, ch.N0, ch.theta) == (3, 4, 1.0, 5, 2.0)
    assert (ch.C1, ch.C2, ch.C3, ch.C4) == (2.5, 0.5, 3.5, 0.5)
    assert ch.C5 == pytest.approx(0.05)
    assert ch.a == pytest.approx(0.2625)
    assert ch.b1 == pytest.approx(0.6125) and ch.b2 == 4
    assert ch.C_b1b2 == pytest.approx(0.15176839, rel=1e-6)
    assert ch.C0 == pytest.approx(20.3336085, rel=1e-7)
    assert ch.D == pytest.approx(0.05 / 0.2625)
    assert ch.DN0 == pytest.approx(0.952381, rel=1e-6)
    assert ch.alpha == pytest.approx(0.0121975, rel=1e-5)
    assert ch.Psi == pytest.approx(427.0058, rel=1e-6)
    assert ch.h_scale == pytest.approx(0.2625 / ch.C0)
    assert ch.feasible and ch.spin_bound_valid
    assert ch.Psi >= ch.C0


def test_chain_without_interactions(worked):
    ch = assemble_chain(worked.replace(coupling=ZeroCoupling()))
    assert ch.C5 == 0 and ch.D == 0 and ch.Psi == ch.C0


def test_chain_boundary_case_is_infeasible(worked):
    ch = assemble_chain(worked, a=5 * 0.05)
    assert ch.DN0 == pytest.approx(1.0) and not ch.dn0_lt_1 and not ch.feasible


def test_chain_rejects_eps_outside_interval(worked):
    with pytest.raises(ValueError):
        assemble_chain(worked, eps=2.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.0, 0.3))
def test_chain_invariants_on_a_grid(z, J0):
    ch = assemble_chain(worked_model(z=z, J0=J0))
    assert ch.Psi >= ch.C0 >= 0
    assert ch.DN0 < 1 and ch.feasible
    assert ch.C_spin >= ch.C_b1b2


def test_iq_rhs_adds_neighbour_terms(worked):
    ch = assemble_chain(worked)
    empty = MarkedConfiguration.empty(1, 1)
    assert iq_log_rhs(ch, worked, empty, (0,)) == ch.C0
    b = MarkedConfiguration([1.1, 1.2, 5.0], [1.0, 2.0, 3.0], 1, 1)
    expected = ch.C0 + ch.C5 * 2 ** 3 + 0.1 * ch.C4 * (1 + 2 ** 4)
    assert iq_log_rhs(ch, worked, b, (0,)) == pytest.approx(expected)


def test_certificate_round_trip(worked):
    ch = assemble_chain(worked)
    text = certificate_text(ch, worked.fingerprint())
    fields = dict(line.split("=", 1) for line in text.strip().splitlines())
    assert float(fields["C0"]) == ch.C0 and fields["feasible"] == "True"
    assert certificate_hash(text) == certificate_hash(certificate_text(assemble_chain(worked), worked.fingerprint()))
