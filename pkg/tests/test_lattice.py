import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from markedgibbs.configuration import MarkedConfiguration, cell_indices
from markedgibbs.lattice import (BoundaryParticle, Window, cell_of, cube_gap, from_lattice, n0, neighborhood,
                                 per_cell_F, tempering_F, tempering_F_alpha, theta, to_lattice)
from markedgibbs.refmeasure import sample_poisson_config


def cfg(pos, spins, d=1, m=1):
    return MarkedConfiguration(pos, spins, d, m)


@pytest.mark.parametrize("x,k", [([0.0], (0,)), ([0.5], (1,)), ([-0.5, 1.49], (0, 1)), ([-0.5000001], (-1,))])
def test_cell_of_half_open(x, k):
    assert cell_of(x) == k


def test_neighborhood_examples():
    assert neighborhood((0,), 1.0) == {(-2,), (-1,), (0,), (1,), (2,)}
    assert n0(1, 1.0) == 5
    assert neighborhood((0,), 0.5) == {(-1,), (0,), (1,)}
    assert n0(1, 0.5) == 3
    nb2 = neighborhood((0, 0), 1.0)
    assert len(nb2) == 21 and (2, 2) not in nb2 and (2, 1) in nb2
    assert theta(1, 1.0) == 2


@given(st.integers(-5, 5), st.integers(-5, 5), st.floats(0.1, 3.5))
def test_neighborhood_is_symmetric_and_gap_based(a, b, R):
    j, k = (a, b), (0, 0)
    assert (j in neighborhood(k, R)) == (k in neighborhood(j, R)) == (cube_gap(j, k) <= R)


def test_tempering_F_examples():
    assert tempering_F(MarkedConfiguration.empty(1, 1), 3, 4) == 0
    assert tempering_F(cfg([0.1, -0.2], [1.0, -1.0]), 3, 4) == 10
    assert tempering_F(cfg([0.1], [2.0]), 3, 4) == 17


def test_tempering_F_alpha_examples():
    w = Window.interval(-5, 5)
    assert tempering_F_alpha(MarkedConfiguration.empty(1, 1), w, 1.0, 3, 4) == 0
    assert tempering_F_alpha(cfg([0.2], [1.0]), w, 1.0, 3, 4) == 2
    one = cfg([3.1], [1.0])
    assert tempering_F_alpha(one, w, 1.0, 3, 4) == pytest.approx(2 * math.exp(-3))


def test_to_lattice_example():
    img = to_lattice(cfg([0.7], [1.0]))
    assert list(img.entries) == [(1,)]
    assert img.entries[(1,)].positions[0, 0] == pytest.approx(-0.3)
    assert from_lattice(to_lattice(MarkedConfiguration.empty(1, 1))).n == 0


def test_face_particle_warns():
    with pytest.warns(BoundaryParticle):
        to_lattice(cfg([0.5], [1.0]))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        to_lattice(cfg([0.49], [1.0]))


@settings(max_examples=200)
@given(arrays(float, st.tuples(st.integers(0, 12), st.just(2)), elements=st.floats(-20, 20)),
       st.integers(0, 2 ** 31))
def test_lattice_round_trip_exact(pos, seed):
    spins = np.random.default_rng(seed).normal(size=(len(pos), 1))
    c = MarkedConfiguration(pos, spins, 2, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryParticle)
        img = to_lattice(c)
    for k, e in img.entries.items():
        assert np.all(e.positions >= -0.5) and np.all(e.positions <= 0.5)
    assert from_lattice(img).same_as(c)


@given(st.integers(0, 2 ** 31))
def test_per_cell_F_partitions_the_configuration(seed):
    rng = np.random.default_rng(seed)
    c = sample_poisson_config(Window.interval(-3, 3), 1.2, rng)
    F = per_cell_F(c, 3, 4)
    assert sum(c.count_in(k) for k in F) == c.n
    assert all(v >= 1 for v in F.values())


def test_window_shell_and_points(rng):
    w = Window.centered(3)
    assert w.sorted_cells() == [(-1,), (0,), (1,)]
    assert w.shell(1.0) == {(-3,), (-2,), (2,), (3,)}
    pts = w.uniform_points(500, rng)
    assert np.all(w.contains_array(pts))
    assert Window.centered(3, 2).volume == 9
    with pytest.raises(ValueError):
        Window(frozenset())


def test_configuration_basics():
    c = cfg([0.2, 1.4, 1.6, -0.7], [1, 2, 3, 4])
    assert c.count_in((1,)) == 1 and c.count_in((2,)) == 1 and c.count_in((-1,)) == 1
    assert c.in_cells([(0,), (1,)]).n == 2
    assert cell_indices(np.array([[0.5], [-0.5]])).ravel().tolist() == [1, 0]
    with pytest.raises(ValueError):
        c.positions[0, 0] = 3.0
    with pytest.raises(ValueError):
        cfg([0.1, 0.2], [1.0])
    with pytest.raises(ValueError):
        cfg([np.nan], [1.0])
    back = MarkedConfiguration.from_dict(c.to_dict(), 1, 1)
    assert back.same_as(c)
    assert c.subset([3, 0, 2, 1]).same_as(c)
    assert not c.subset([0, 1]).same_as(c)
