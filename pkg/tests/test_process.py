import math

import numpy as np
import pytest

from dirichlet_forms.forms import Generator, form_from_graph, generator_from_form, SemigroupEvaluator
from dirichlet_forms.ground_state import (gaussian_wavefunction, ground_state_form,
                                          rayleigh_quotient)
from dirichlet_forms.process import (CEMETERY, NoStationaryLawError, NotMarkovGeneratorError,
                                     autocorrelation, conditional_mean, empirical_semigroup,
                                     fit_exponential, ground_state_chain,
                                     jump_chain_from_generator, occupation_statistics,
                                     sample_path, sample_states, stationary_histogram,
                                     stochastic_action, tv_distance)
from dirichlet_forms.state_space import StateSpace, build_circle_grid, build_line_grid


def two_state_chain():
    sp = StateSpace.from_edges([1.0, 1.0], [(0, 1, 1.0, 1.0)])
    return jump_chain_from_generator(Generator(sp, [[1.0, -1.0], [-1.0, 1.0]]))


def heat_chain(n=100):
    return jump_chain_from_generator(generator_from_form(form_from_graph(build_circle_grid(2 * np.pi, n))))


# -- jump chain ---------------------------------------------------------------

def test_two_state_chain():
    ch = two_state_chain()
    np.testing.assert_array_equal(ch.rates, [1.0, 1.0])
    np.testing.assert_array_equal(ch.jump_matrix, [[0, 1], [1, 0]])
    assert ch.conservative and not ch.absorbing.any()


def test_circle_chain_symmetric():
    ch = heat_chain(50)
    np.testing.assert_allclose(ch.rates, ch.rates[0], rtol=1e-12)
    P = ch.jump_matrix
    for i in range(50):
        np.testing.assert_allclose(P[i, [(i - 1) % 50, (i + 1) % 50]], 0.5, rtol=1e-12)
        assert P[i].sum() == pytest.approx(1.0, abs=1e-15)


def test_ground_state_chain_drifts_to_origin(ou_chain, ou_space):
    P = ou_chain.jump_matrix
    x = ou_space.coords[:, 0]
    for i in range(1, ou_space.n - 1):
        toward = i + 1 if x[i] < 0 else i - 1
        away = i - 1 if x[i] < 0 else i + 1
        if x[i] != 0:
            assert P[i, toward] > P[i, away]
    mid = int(np.argmin(np.abs(x)))
    assert P[mid, mid - 1] == pytest.approx(P[mid, mid + 1], rel=1e-12)


def test_positive_off_diagonal_rejected():
    sp = StateSpace.from_edges([1.0, 1.0], [(0, 1, 1.0, 1.0)])
    with pytest.raises(NotMarkovGeneratorError, match=r"H\[0,1\]"):
        jump_chain_from_generator(Generator(sp, [[1.0, 0.5], [0.5, 1.0]]))


def test_negative_row_sum_rejected():
    sp = StateSpace.from_edges([1.0, 1.0], [(0, 1, 1.0, 1.0)])
    with pytest.raises(NotMarkovGeneratorError):
        jump_chain_from_generator(Generator(sp, [[-1.0, 0.0], [0.0, 1.0]]))


def test_killing_goes_to_cemetery():
    sp = StateSpace.from_edges([1.0, 1.0], [(0, 1, 1.0, 1.0)])
    ch = jump_chain_from_generator(Generator(sp, [[3.0, -1.0], [-1.0, 1.0]]))
    assert not ch.conservative
    np.testing.assert_allclose(ch.rates, [3.0, 1.0])
    np.testing.assert_allclose(ch.kill_probability, [2 / 3, 0.0])
    assert CEMETERY in ch.targets
    path = sample_path(ch, 0, 1e6, seed=5)
    # paths end either by reaching the cemetery or at the horizon
    assert path.vertices[-1] == CEMETERY
    assert path.times[-1] < 1e6
    with pytest.raises(NoStationaryLawError):
        stationary_histogram(ch, 10.0)


def test_killed_semigroup_matches_monte_carlo():
    sp = StateSpace.from_edges([1.0, 1.0], [(0, 1, 1.0, 1.0)])
    gen = Generator(sp, [[1.5, -1.0], [-1.0, 1.0]])
    ch = jump_chain_from_generator(gen)
    exact = SemigroupEvaluator(gen).apply(0.8, [1.0, 1.0])[0]
    est, se = empirical_semigroup(ch, 0, 0.8, [1.0, 1.0], 20000, seed=11)
    assert abs(est - exact) <= 3 * se


# -- paths --------------------------------------------------------------------

def test_zero_rate_never_jumps():
    sp = build_line_grid(0, 1, 3)
    ch = jump_chain_from_generator(Generator(sp, np.zeros((3, 3))))
    assert ch.absorbing.all()
    p = sample_path(ch, 1, 100.0, seed=0)
    assert p.n_jumps == 0 and p.state_at(50.0) == 1
    with pytest.raises(NoStationaryLawError):
        stationary_histogram(ch, 10.0)


def test_path_invariants(ou_chain, ou_space):
    p = sample_path(ou_chain, 300, 50.0, seed=3)
    assert np.all(np.diff(p.times) > 0)
    assert p.times[0] == 0.0 and p.times[-1] < 50.0
    assert np.all(np.abs(np.diff(p.vertices)) == 1)


def test_path_reproducible(ou_chain):
    a = sample_path(ou_chain, 300, 20.0, seed=99)
    b = sample_path(ou_chain, 300, 20.0, seed=99)
    c = sample_path(ou_chain, 300, 20.0, seed=100)
    np.testing.assert_array_equal(a.times, b.times)
    np.testing.assert_array_equal(a.vertices, b.vertices)
    assert not np.array_equal(a.times[:5], c.times[:5])


def test_long_path_buffer_growth(ou_chain):
    p = sample_path(ou_chain, 300, 500.0, seed=1)
    assert p.n_jumps > 1024 * 4


def test_path_errors(ou_chain):
    with pytest.raises(ValueError):
        sample_path(ou_chain, 601, 1.0)
    with pytest.raises(ValueError):
        sample_path(ou_chain, 0, 0.0)


def test_holding_time_law():
    ch = heat_chain(20)
    q = ch.rates[0]
    holds = np.array([sample_path(ch, 0, 1e3 / q, seed=7, path_index=k).times[1]
                      for k in range(10_000)])
    se = holds.std(ddof=1) / math.sqrt(holds.size)
    assert abs(holds.mean() - 1 / q) <= 3 * se


def test_path_csv(ou_chain):
    p = sample_path(ou_chain, 300, 5.0, seed=1234)
    lines = p.to_csv().splitlines()
    assert "seed=1234" in lines[0]
    assert lines[1] == "t,vertex"
    assert len(lines) == p.times.size + 2
    t, v = lines[2].split(",")
    assert float(t) == 0.0 and int(v) == 300


def test_states_independent_of_workers(ou_chain):
    starts = np.full(10_000, 300)
    a = sample_states(ou_chain, starts, [0.5, 0.1], seed=4)
    b = sample_states(ou_chain, starts, [0.5, 0.1], seed=4, workers=3)
    np.testing.assert_array_equal(a, b)
    # columns follow the requested time order
    c = sample_states(ou_chain, starts, [0.1], seed=4)
    assert a.shape == (10_000, 2) and c.shape == (10_000, 1)


# -- Monte Carlo semigroup ----------------------------------------------------

def test_semigroup_at_time_zero(ou_chain, rng):
    f = rng.standard_normal(ou_chain.n)
    est, se = empirical_semigroup(ou_chain, 250, 0.0, f, 100, seed=0)
    assert est == f[250] and se == 0.0


def test_semigroup_of_constant(ou_chain):
    est, se = empirical_semigroup(ou_chain, 250, 3.0, np.ones(ou_chain.n), 1000, seed=0)
    assert est == 1.0 and se == 0.0


def test_two_state_monte_carlo():
    est, se = empirical_semigroup(two_state_chain(), 0, 1.0, [1.0, 0.0], 100_000, seed=2)
    exact = 0.5 * (1 + math.exp(-2))
    assert exact == pytest.approx(0.5677, abs=1e-4)
    assert abs(est - exact) <= 3 * se


def test_semigroup_errors(ou_chain):
    f = np.ones(ou_chain.n)
    with pytest.raises(ValueError):
        empirical_semigroup(ou_chain, -1, 1.0, f, 10)
    with pytest.raises(ValueError):
        empirical_semigroup(ou_chain, 0, -1.0, f, 10)
    with pytest.raises(ValueError):
        empirical_semigroup(ou_chain, 0, 1.0, f, 0)


# -- stationary law -----------------------------------------------------------

def test_two_state_stationary():
    stats = occupation_statistics(two_state_chain(), 1e5, 10.0, seed=8)
    h = stats.histogram
    assert h.sum() == pytest.approx(1.0, abs=1e-14)
    # time in state 0 over a horizon T has variance ~ T/4 for this chain
    sigma = math.sqrt(stats.horizon / 4) / stats.horizon
    assert abs(h[0] - 0.5) <= 3 * sigma


def test_circle_stationary_uniform():
    ch = heat_chain(100)
    h = stationary_histogram(ch, 1e5, 10.0, seed=6)
    assert tv_distance(h, np.full(100, 0.01)) <= 0.02


def test_ou_stationary(ou_chain, ou_psi):
    h = stationary_histogram(ou_chain, 1e4, 10.0, seed=42)
    assert tv_distance(h, ou_psi.density) <= 0.02


def test_stationary_rejects_reducible():
    sp = StateSpace.from_edges([1, 1, 1, 1], [(0, 1, 1.0, 1.0), (2, 3, 1.0, 1.0)])
    ch = jump_chain_from_generator(generator_from_form(form_from_graph(sp)))
    with pytest.raises(NoStationaryLawError):
        stationary_histogram(ch, 10.0)
    with pytest.raises(ValueError):
        stationary_histogram(two_state_chain(), 1.0, 2.0)


def test_flux_reversibility():
    psi = gaussian_wavefunction(build_line_grid(-4, 4, 61))
    ch = ground_state_chain(psi)
    J = occupation_statistics(ch, 2e4, 10.0, seed=21).jumps
    for i in range(60):
        a, b = J[i, i + 1], J[i + 1, i]
        # the two counts differ by at most one along a path on a line
        assert abs(a - b) <= max(1, 3 * math.sqrt(a + b))


def test_flux_reversibility_circle_like(rng):
    # a graph with cycles: counts are reversible only statistically
    sp = build_circle_grid(1.0, 12)
    x = sp.coords
    psi_vals = np.exp(0.5 * x[:, 0])
    from dirichlet_forms.ground_state import WaveFunction
    ch = ground_state_chain(WaveFunction(sp, psi_vals).normalize())
    J = occupation_statistics(ch, 2e4, 10.0, seed=22).jumps
    for i in range(12):
        j = (i + 1) % 12
        a, b = J[i, j], J[j, i]
        assert abs(int(a) - int(b)) <= 3 * math.sqrt(a + b)


def test_holding_statistics_match_rates(ou_chain):
    st = occupation_statistics(ou_chain, 1e4, 10.0, seed=5)
    seen = st.holding_count > 2000
    mean = st.holding_sum[seen] / st.holding_count[seen]
    se = (1 / ou_chain.rates[seen]) / np.sqrt(st.holding_count[seen])
    z = (mean - 1 / ou_chain.rates[seen]) / se
    assert np.mean(np.abs(z) <= 3) > 0.97


# -- action identity ----------------------------------------------------------

def test_action_identity(ou_psi, ou_chain, ou_gs):
    assert stochastic_action(ou_chain) == rayleigh_quotient(ou_gs.form, np.ones(ou_gs.space.n))
    with pytest.raises(ValueError):
        stochastic_action(two_state_chain())


# -- OU diagnostics -----------------------------------------------------------

def test_autocorrelation_rate(ou_chain, ou_space):
    x = ou_space.coords[:, 0]
    lags = np.linspace(0, 2, 9)
    cov, se = autocorrelation(ou_chain, x, lags, 20_000, seed=3)
    c, lam = fit_exponential(lags, cov, se)
    assert abs(lam - 2) <= 0.05 * 2
    assert c == pytest.approx(0.5, rel=0.05)


def test_mean_reversion(ou_chain, ou_space, ou_psi):
    x = ou_space.coords[:, 0]
    start = int(np.argmin(np.abs(x - 1.5)))
    lags = np.array([0.1, 0.25, 0.5])
    m, se = conditional_mean(ou_chain, x, start, lags, 20_000, seed=4)
    gap = 2.0
    rel = np.abs(m / (x[start] * np.exp(-gap * lags)) - 1)
    assert np.all(rel <= 0.05)


def test_fit_exponential_exact():
    t = np.linspace(0, 2, 11)
    c, lam = fit_exponential(t, 0.7 * np.exp(-1.3 * t))
    assert c == pytest.approx(0.7, rel=1e-8) and lam == pytest.approx(1.3, rel=1e-8)
