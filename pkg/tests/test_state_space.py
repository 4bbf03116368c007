import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dirichlet_forms.forms import form_from_graph, generator_from_form
from dirichlet_forms.random_forms import random_space
from dirichlet_forms.state_space import (DistanceUndefinedError, ParseError, StateSpace,
                                         StateSpaceError, build_circle_grid, build_line_grid,
                                         dumps_state_space, geodesic_distance, loads_state_space)


def test_line_grid_two_points():
    sp = build_line_grid(0, 1, 2)
    assert sp.n == 2 and sp.edges == [(0, 1, 1.0, 1.0)]
    np.testing.assert_array_equal(sp.mu, [0.5, 0.5])


def test_line_grid_ou_size():
    sp = build_line_grid(-6, 6, 601)
    assert sp.n_edges == 600
    np.testing.assert_allclose(sp.weights, 50.0, rtol=1e-12)
    np.testing.assert_allclose(sp.lengths, 0.02, rtol=1e-12)


def test_line_grid_neumann_spectrum():
    # continuum oracle: -f'' = lam f on (0, pi) with f'(0) = f'(pi) = 0 has lam = k^2
    lam = generator_from_form(form_from_graph(build_line_grid(0, math.pi, 201))).eigenvalues
    np.testing.assert_allclose(lam[1:4], [1, 4, 9], rtol=0.01)
    assert abs(lam[0]) < 0.01


def test_circle_grid_weights():
    sp = build_circle_grid(2 * math.pi, 4)
    assert sp.n_edges == 4
    np.testing.assert_allclose(sp.weights, 2 / math.pi, rtol=1e-15)


def test_circle_spectrum():
    lam = generator_from_form(form_from_graph(build_circle_grid(2 * math.pi, 400))).eigenvalues
    expected = np.array([0, 1, 1, 4, 4])
    assert np.all(np.abs(lam[:5] - expected) <= 0.01 * np.maximum(expected, 1))


@pytest.mark.parametrize("a,b,n", [(0, 1, 2), (-6, 6, 601), (-1, 1, 41), (0.3, 7.1, 17)])
def test_line_total_measure(a, b, n):
    assert build_line_grid(a, b, n).total_measure == pytest.approx(b - a, rel=1e-13)


def test_circle_total_measure():
    assert build_circle_grid(2 * math.pi, 400).total_measure == pytest.approx(2 * math.pi, rel=1e-13)


@pytest.mark.parametrize("space", [build_line_grid(0, 1, 5), build_circle_grid(1.0, 7)])
def test_grids_connected(space):
    assert space.connected


@pytest.mark.parametrize("args", [(1, 0, 5), (0, 1, 1), (0, math.inf, 4)])
def test_line_grid_rejects(args):
    with pytest.raises(StateSpaceError):
        build_line_grid(*args)


def test_circle_grid_rejects():
    with pytest.raises(StateSpaceError):
        build_circle_grid(1.0, 2)
    with pytest.raises(StateSpaceError):
        build_circle_grid(-1.0, 5)


def test_invariants_rejected():
    with pytest.raises(StateSpaceError):
        StateSpace.from_edges([1.0, 0.0], [(0, 1, 1.0, 1.0)])
    with pytest.raises(StateSpaceError):
        StateSpace.from_edges([1.0, 1.0], [(0, 1, -1.0, 1.0)])
    with pytest.raises(StateSpaceError):
        StateSpace.from_edges([1.0, 1.0], [(0, 1, 1.0, 0.0)])
    with pytest.raises(StateSpaceError):
        StateSpace.from_edges([1.0, 1.0], [(0, 0, 1.0, 1.0)])
    with pytest.raises(StateSpaceError):
        StateSpace.from_edges([1.0, 1.0], [(0, 1, 1.0, 1.0), (1, 0, 2.0, 1.0)])


def test_connectivity_ignores_nonconducting_edges():
    sp = StateSpace.from_edges([1.0, 1.0, 1.0], [(0, 1, 1.0, 1.0), (1, 2, 0.0, 1.0)])
    assert not sp.connected
    with pytest.raises(DistanceUndefinedError):
        geodesic_distance(sp, 0, 2)


def test_arrays_read_only():
    sp = build_line_grid(0, 1, 3)
    with pytest.raises(ValueError):
        sp.mu[0] = 3.0


def test_geodesic_examples():
    sp = build_line_grid(0, 1, 11)
    assert geodesic_distance(sp, 4, 4) == 0.0
    assert geodesic_distance(sp, 0, 10) == pytest.approx(1.0, abs=1e-14)


def _brute_force_distance(space, p, q):
    adj = {}
    for i, j, _, ln in space.edges:
        adj.setdefault(i, []).append((j, ln))
        adj.setdefault(j, []).append((i, ln))
    best = math.inf

    def walk(v, seen, length):
        nonlocal best
        if v == q:
            best = min(best, length)
            return
        for u, ln in adj[v]:
            if u not in seen:
                walk(u, seen | {u}, length + ln)

    walk(p, {p}, 0.0)
    return best


def test_circle_geodesic_matches_path_enumeration():
    sp = build_circle_grid(2 * math.pi, 8)
    for p, q in itertools.combinations(range(8), 2):
        assert geodesic_distance(sp, p, q) == pytest.approx(_brute_force_distance(sp, p, q), abs=1e-12)
    assert geodesic_distance(sp, 0, 4) == pytest.approx(math.pi, abs=1e-12)


def test_circle_antipodal():
    sp = build_circle_grid(2 * math.pi, 400)
    h = 2 * math.pi / 400
    assert abs(geodesic_distance(sp, 0, 200) - math.pi) <= h


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(3, 30))
def test_geodesic_is_metric(seed, n):
    rng = np.random.default_rng(seed)
    sp = random_space(rng, n)
    D = np.array([sp.distances_from(p) for p in range(n)])
    np.testing.assert_allclose(D, D.T, atol=1e-12)
    assert np.all(np.diag(D) == 0)
    assert np.all(D[~np.eye(n, dtype=bool)] > 0)
    for p, q, r in rng.integers(0, n, size=(50, 3)):
        assert D[p, r] <= D[p, q] + D[q, r] + 1e-12


def test_text_roundtrip():
    sp = build_line_grid(-1, 1, 5)
    psi = np.linspace(1, 2, 5)
    back, bpsi = loads_state_space(dumps_state_space(sp, psi))
    np.testing.assert_array_equal(back.mu, sp.mu)
    np.testing.assert_array_equal(back.coords, sp.coords)
    np.testing.assert_array_equal(bpsi, psi)
    assert back.edges == sp.edges
    plain, none = loads_state_space(dumps_state_space(build_circle_grid(1.0, 4)))
    assert none is None and plain.n == 4


@pytest.mark.parametrize("text,lineno", [
    ("n 2\n0 1.0\n1 -1.0\n0 1 1 1\n", 3),
    ("n 2\n0 1.0\n1 1.0\n0 1 -2 1\n", 4),
    ("# comment\nn 2\n0 1.0\n1 1.0\n\n0 1 -2 1\n", 6),
    ("n 2\n0 1.0\n", 1),
    ("n 2\n0 1.0\n1 1.0\n0 1 1\n", 4),
])
def test_parser_line_numbers(text, lineno):
    with pytest.raises(ParseError) as exc:
        loads_state_space(text)
    assert exc.value.lineno == lineno
    assert f"line {lineno}" in str(exc.value)
