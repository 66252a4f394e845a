import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from markedgibbs import oracle
from markedgibbs.configuration import MarkedConfiguration
from markedgibbs.lattice import Window
from markedgibbs.model import PowerLawPotential, ZeroCoupling
from markedgibbs.oracle import QuadratureUnconverged, brute_partition, oracle_marginals

from conftest import ideal_model, worked_model

CUBE = Window.interval(0, 0)


def test_ideal_gas_closed_form():
    res = brute_partition(CUBE, None, ideal_model(), n_max=5)
    assert res.weights == pytest.approx([0.5 ** n / math.factorial(n) for n in range(6)], rel=1e-15)
    assert res.Z_partial == pytest.approx(1.64869792, abs=1e-8)
    assert abs(res.Z - math.exp(0.5)) < 1e-12
    probs, moms = oracle_marginals(res)
    assert moms[0] is None
    assert probs[1] == pytest.approx(0.5 * math.exp(-0.5))
    assert res.certified


def test_series_without_higher_terms_is_one():
    res = brute_partition(CUBE, None, worked_model(), n_max=0)
    assert res.Z_partial == 1.0 and res.Z == 1.0


def test_hard_core_cube_admits_one_particle():
    model = worked_model().replace(phi=PowerLawPotential(1.0, 2.0, 1, 1.0, core=1.0))
    res = brute_partition(CUBE, None, model, n_max=4)
    assert res.Z == pytest.approx(1.5, abs=1e-12)


@pytest.fixture(scope="module")
def worked_result():
    return brute_partition(CUBE, None, worked_model(), n_max=5)


def test_worked_model_frozen_values(worked_result):
    res = worked_result
    assert res.Z == pytest.approx(1.50192917, rel=1e-7)
    probs, _ = oracle_marginals(res)
    assert probs[:3] == pytest.approx([0.66581036, 0.33290518, 0.00128446], rel=1e-5)
    assert probs[3] == pytest.approx(7.6e-14, rel=0.02)
    assert res.levels[4:] == ["bounded", "bounded"]
    assert res.certified and res.Z >= 1


def test_two_particle_term_against_direct_quadrature(worked_result):
    # positions: int int exp(-|x - y|^-3) over the unit square = int_0^1 2 (1 - r) exp(-r^-3) dr
    pos = integrate.quad(lambda r: 2 * (1 - r) * math.exp(-r ** -3), 0, 1, epsabs=1e-14)[0]
    g = lambda s: math.exp(-s ** 6)
    norm = integrate.quad(g, -3, 3, epsabs=1e-14)[0]
    spin = integrate.dblquad(lambda t, s: g(s) * g(t) * math.exp(0.1 * s * t), -3, 3, -3, 3,
                             epsabs=1e-13)[0] / norm ** 2
    w2 = 0.5 ** 2 / 2 * pos * spin
    assert worked_result.weights[2] == pytest.approx(w2, rel=1e-6)
    assert worked_result.weights[1] == pytest.approx(0.5, rel=1e-12)


def test_repulsion_grows_with_beta():
    model = worked_model().replace(coupling=ZeroCoupling())
    tails = []
    for beta in (0.5, 1.0, 2.0):
        probs, _ = oracle_marginals(brute_partition(CUBE, None, model.replace(beta=beta), n_max=4))
        tails.append(sum(p for p in probs[2:] if p is not None))
    assert tails[0] > tails[1] > tails[2]


@settings(max_examples=12, deadline=None)
@given(st.lists(st.floats(0.5, 1.9), min_size=0, max_size=3), st.floats(-2, 2))
def test_partition_function_at_least_one(xs, spin):
    b = MarkedConfiguration(xs, [spin] * len(xs), 1, 1)
    res = brute_partition(CUBE, b, worked_model(J0=0.3), n_max=3)
    assert res.Z >= 1 and res.Z_partial >= 1


def test_boundary_beyond_range_is_ignored(worked_result):
    far = MarkedConfiguration([2.6, -3.0], [1.0, 1.0], 1, 1)
    res = brute_partition(CUBE, far, worked_model(), n_max=5)
    assert res.Z == worked_result.Z


def test_refinement_gap_raises(monkeypatch):
    monkeypatch.setattr(oracle, "REFINE_TOL", 0.0)
    with pytest.raises(QuadratureUnconverged):
        brute_partition(CUBE, MarkedConfiguration([0.9], [1.0], 1, 1), worked_model(), n_max=2)


def test_size_limits():
    with pytest.raises(ValueError):
        brute_partition(Window.interval(0, 2), None, worked_model())
    with pytest.raises(ValueError):
        brute_partition(CUBE, None, worked_model(), n_max=6)


def test_planar_spins_ideal_moments():
    model = ideal_model(m=2)
    res = brute_partition(CUBE, None, model, n_max=3, q=2)
    assert res.spin_moments[2] == pytest.approx(2 / math.sqrt(math.pi), rel=1e-10)
