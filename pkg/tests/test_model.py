import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from markedgibbs.model import (BilinearSpin, ConstantCoupling, CustomPositionalPotential, ModelSpec, NoFeasiblePQ,
                               PolynomialSpinEnergy, PowerLawPotential, PowerLawWellPotential,
                               QuadraticDifferenceSpin, ZeroCoupling, ZeroPotential, a5_margin, select_pq,
                               validate_assumptions)

from conftest import certification_model, ideal_model, worked_model

finite = st.floats(-50, 50, allow_nan=False)


def test_worked_model_passes_every_check(worked):
    rep = validate_assumptions(worked)
    assert rep.ok, rep.failed


def test_certification_model_fails_only_growth(cert):
    rep = validate_assumptions(cert)
    assert [c.name for c in rep.failed] == ["A5"]
    assert rep.get("A5").witness == pytest.approx(0.5)


def test_a5_examples():
    assert a5_margin(4, 6, 2) == 4
    assert a5_margin(2, 11, 3) == 0
    rep = validate_assumptions(ideal_model())
    assert not rep.get("A5").passed


def test_a1_witness_for_long_range_potential():
    leaky = CustomPositionalPotential(lambda r: 1.0 if r <= 1.2 else 0.0,
                                      {"A_phi": 1.0, "B_phi": 1.0, "P": 3.0, "M": 0.0})
    spec = worked_model().replace(phi=leaky)
    rep = validate_assumptions(spec)
    a1 = rep.get("A1")
    assert not a1.passed
    x, y, r = a1.witness
    assert 1.0 < r <= 1.2 and leaky(np.array(x), np.array(y)) == 1.0


@pytest.mark.parametrize("P,qV,r,expected", [(4, 6, 2, (3, 4, (1.0, 1.0))), (5, 8, 2, (3, 4, (1.0, 1.0)))])
def test_select_pq_examples(P, qV, r, expected):
    assert select_pq((P, qV, r)) == expected


def test_select_pq_no_integer_p():
    with pytest.raises(NoFeasiblePQ):
        select_pq((2.5, 100, 1))


@given(st.floats(2.01, 9), st.integers(2, 20), st.floats(1, 4))
def test_select_pq_result_is_feasible(P, qV, r):
    try:
        p, q, (lo, hi) = select_pq((P, qV, r))
    except NoFeasiblePQ:
        # then no pair exists at all: exhaustive scan
        assert not any((p - 2) * (q / r - 1) >= 1 for p in range(3, math.ceil(P)) if p < P for q in range(1, qV))
        return
    assert 2 < p < P and q < qV and (p - 2) * (q / r - 1) >= 1
    assert lo <= hi


def test_power_law_declared_constants():
    phi = PowerLawPotential(1.0, 0.5, 1, 1.0)
    assert phi.P == 2.5 and phi.M == 0
    assert phi.radial(0.3) == pytest.approx(0.3 ** -1.5)
    assert phi.radial(1.0 + 1e-9) == 0.0
    assert phi.A_phi == pytest.approx(2 ** -2.5)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 12), st.integers(0, 10 ** 6))
def test_power_law_superstability_on_a_cube(n, seed):
    phi = PowerLawPotential(1.0, 2.0, 1, 1.0)
    pts = np.random.default_rng(seed).uniform(-0.5, 0.5, n)
    i, j = np.triu_indices(n, 1)
    h = float(np.sum(phi.radial_array(np.abs(pts[i] - pts[j]))))
    assert h >= phi.A_phi * n ** phi.P - phi.B_phi * n - 1e-9


def test_well_potential_has_negative_floor():
    phi = PowerLawWellPotential(1.0, 2.0, 1, 1.0, 0.0, 0.3)
    assert phi.M == 0.3
    r = np.linspace(1e-3, 1.5, 2000)
    assert np.all(phi.radial_array(r) >= -0.3)
    rep = validate_assumptions(worked_model().replace(phi=phi))
    assert rep.ok, rep.failed


@given(st.lists(finite, min_size=4, max_size=4))
def test_symmetry_of_built_in_families(v):
    x, y = np.array([v[0] / 25]), np.array([v[1] / 25])
    u, w = np.array([v[2]]), np.array([v[3]])
    for phi in (PowerLawPotential(1.0, 0.5, 1, 1.0), ZeroPotential()):
        assert phi(x, y) == phi(y, x)
    J = ConstantCoupling(0.2, 1.0)
    assert J(x, y) == J(y, x)
    for W in (BilinearSpin(), QuadraticDifferenceSpin(3.0)):
        assert W(u, w) == W(w, u)


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=4, max_size=4), st.floats(2.1, 6))
def test_spin_growth_bound(v, r):
    u, w = np.array(v[:2]), np.array(v[2:])
    for W in (BilinearSpin(), QuadraticDifferenceSpin(r)):
        lhs = abs(W(u, w))
        rhs = np.linalg.norm(u) ** W.r + np.linalg.norm(w) ** W.r + W.C_W
        assert lhs <= rhs * (1 + 1e-12) + 1e-12


def test_quadratic_difference_requires_r_above_two():
    with pytest.raises(ValueError):
        QuadraticDifferenceSpin(2.0)
    assert QuadraticDifferenceSpin(4.0).C_W == pytest.approx(2.0)


def test_spin_energy_lower_bound():
    V = PolynomialSpinEnergy(6)
    assert V(np.array([2.0])) == 64.0
    assert (V.a_V, V.b_V) == (1.0, 0.0)


def test_fingerprint_tracks_parameters():
    a, b = worked_model(), worked_model()
    assert a.fingerprint() == b.fingerprint() and len(a.fingerprint()) == 16
    assert a.fingerprint() != worked_model(J0=0.2).fingerprint()
    assert a.fingerprint() != certification_model().fingerprint()


def test_model_validation_rejects_bad_dimensions():
    with pytest.raises(ValueError):
        ModelSpec(0, 1, 1.0, 0.5, 1.0, ZeroPotential(), ZeroCoupling(), BilinearSpin(), PolynomialSpinEnergy(4))
    with pytest.raises(ValueError):
        worked_model(z=-1.0)


def test_j_inf_and_ideal_flag():
    assert worked_model(J0=0.3).J_inf == 0.3
    assert ideal_model().is_ideal and not worked_model().is_ideal
