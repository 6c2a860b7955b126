"""Core chain operations against hand-derived and matrix-power oracles."""

import math

import numpy as np
import pytest

from rapidmix import (
    Distribution,
    FiniteChain,
    RandomSource,
    check_reversible,
    evolve,
    l1_distance,
    lazify,
    lazy_cycle_chain,
    load_chain_json,
    metropolize,
    mixing_time_exact,
    random_reversible_chain,
    relative_entropy,
    simulate,
    stationary,
)
from rapidmix.errors import (
    DimensionMismatch,
    NonPositiveWeight,
    NotErgodic,
    ZeroStationaryMass,
)

FLIP = FiniteChain(np.array([[0.5, 0.5], [0.5, 0.5]]))
TWO_STATE = FiniteChain(np.array([[0.9, 0.1], [0.2, 0.8]]))


def lazy_triangle():
    P = np.full((3, 3), 0.25)
    np.fill_diagonal(P, 0.5)
    return FiniteChain(P)


# ---------------------------------------------------------------------------
# construction invariants
# ---------------------------------------------------------------------------

def test_rejects_bad_row_sums():
    with pytest.raises(ValueError):
        FiniteChain(np.array([[0.5, 0.4], [0.5, 0.5]]))


def test_rejects_negative_entries():
    with pytest.raises(ValueError):
        FiniteChain(np.array([[1.1, -0.1], [0.5, 0.5]]))


def test_distribution_validation():
    with pytest.raises(ValueError):
        Distribution(np.array([0.5, 0.4]))
    with pytest.raises(ValueError):
        Distribution(np.array([1.5, -0.5]))


# ---------------------------------------------------------------------------
# stationary
# ---------------------------------------------------------------------------

def test_stationary_doubly_stochastic():
    pi = stationary(FLIP)
    np.testing.assert_allclose(pi.probs, [0.5, 0.5], atol=1e-12)


def test_stationary_two_state_detailed_balance():
    # pi_0 * 0.1 = pi_1 * 0.2 gives (2/3, 1/3)
    pi = stationary(TWO_STATE)
    np.testing.assert_allclose(pi.probs, [2 / 3, 1 / 3], atol=1e-10)


def test_stationary_lazy_triangle_uniform():
    pi = stationary(lazy_triangle())
    np.testing.assert_allclose(pi.probs, [1 / 3] * 3, atol=1e-12)


def test_stationary_fixed_point_residual():
    rng = RandomSource(7)
    for k in range(20):
        chain = random_reversible_chain(5, rng.derive(k))
        pi = stationary(chain)
        assert np.abs(pi.probs @ chain.transition - pi.probs).max() < 1e-10
        assert pi.probs.min() > 0


def test_stationary_rejects_reducible():
    P = np.array([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(NotErgodic):
        stationary(FiniteChain(P))


def test_stationary_rejects_periodic():
    P = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(NotErgodic):
        stationary(FiniteChain(P))


# ---------------------------------------------------------------------------
# reversibility
# ---------------------------------------------------------------------------

def test_symmetric_chain_reversible():
    assert check_reversible(FLIP, Distribution.uniform(2), 1e-12)


def test_two_state_reversible():
    assert check_reversible(TWO_STATE, Distribution(np.array([2 / 3, 1 / 3])), 1e-12)


def test_directed_cycle_not_reversible():
    P = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)
    assert not check_reversible(FiniteChain(P), Distribution.uniform(3), 1e-9)


def test_check_reversible_dimension_guard():
    with pytest.raises(DimensionMismatch):
        check_reversible(FLIP, Distribution.uniform(3), 1e-9)


# ---------------------------------------------------------------------------
# lazify
# ---------------------------------------------------------------------------

def test_lazify_flip():
    lazy = lazify(FiniteChain(np.array([[0.0, 1.0], [1.0, 0.0]])))
    np.testing.assert_allclose(lazy.transition, [[0.5, 0.5], [0.5, 0.5]])


def test_lazify_identity_fixed_point():
    eye = FiniteChain(np.eye(3))
    np.testing.assert_allclose(lazify(eye).transition, np.eye(3))


def test_lazify_eigenvalues_shift():
    # eigenvalues of (I+P)/2 are (1+lambda)/2, hence nonnegative
    rng = RandomSource(11)
    for k in range(10):
        chain = random_reversible_chain(5, rng.derive(k), lazy=False)
        lam = np.sort(np.linalg.eigvals(chain.transition).real)
        lam_lazy = np.sort(np.linalg.eigvals(lazify(chain).transition).real)
        np.testing.assert_allclose(lam_lazy, (1 + lam) / 2, atol=1e-9)
        assert lam_lazy.min() >= -1e-10


def test_lazify_preserves_stationary():
    rng = RandomSource(13)
    for k in range(100):
        chain = random_reversible_chain(int(3 + k % 6), rng.derive(k), lazy=False)
        pi = stationary(chain)
        pi_lazy = stationary(lazify(chain))
        np.testing.assert_allclose(pi.probs, pi_lazy.probs, atol=1e-9)


# ---------------------------------------------------------------------------
# metropolize
# ---------------------------------------------------------------------------

def test_metropolize_unit_weights_noop():
    out = metropolize(TWO_STATE, np.ones(2))
    np.testing.assert_allclose(out.transition, TWO_STATE.transition)


def test_metropolize_two_state_example():
    out = metropolize(FLIP, np.array([1.0, 2.0]))
    assert out.transition[0, 1] == pytest.approx(0.5)
    assert out.transition[1, 0] == pytest.approx(0.25)
    np.testing.assert_allclose(stationary(out).probs, [1 / 3, 2 / 3], atol=1e-10)


def test_metropolize_three_state_target():
    P = np.full((3, 3), 1 / 3)
    out = metropolize(FiniteChain(P), np.array([1.0, 1.0, 4.0]))
    np.testing.assert_allclose(stationary(out).probs, [1 / 6, 1 / 6, 2 / 3], atol=1e-10)


def test_metropolize_reversible_wrt_reweighted():
    rng = RandomSource(17)
    for k in range(20):
        chain = random_reversible_chain(5, rng.derive(k))
        F = rng.derive(1000 + k).generator.uniform(0.5, 3.0, size=5)
        out = metropolize(chain, F)
        target = stationary(chain).probs * F
        target /= target.sum()
        assert check_reversible(out, Distribution(target), 1e-10)


def test_metropolize_rejects_nonpositive():
    with pytest.raises(NonPositiveWeight):
        metropolize(FLIP, np.array([1.0, 0.0]))


# ---------------------------------------------------------------------------
# evolve / l1 / mixing time
# ---------------------------------------------------------------------------

def test_evolve_t0_identity():
    p0 = Distribution(np.array([0.3, 0.7]))
    np.testing.assert_allclose(evolve(TWO_STATE, p0, 0).probs, p0.probs)


def test_evolve_one_step():
    out = evolve(FLIP, Distribution.point_mass(2, 0), 1)
    np.testing.assert_allclose(out.probs, [0.5, 0.5])


def test_evolve_two_steps_matches_matrix_power():
    # row 0 of P^2 for the 0.9/0.1 chain is (0.83, 0.17)
    out = evolve(TWO_STATE, Distribution.point_mass(2, 0), 2)
    np.testing.assert_allclose(out.probs, [0.83, 0.17], atol=1e-12)
    oracle = np.linalg.matrix_power(TWO_STATE.transition, 2)[0]
    np.testing.assert_allclose(out.probs, oracle, atol=1e-12)


def test_l1_examples():
    assert l1_distance(Distribution.uniform(2), Distribution.uniform(2)) == 0
    assert l1_distance(Distribution.point_mass(2, 0), Distribution.point_mass(2, 1)) == 2
    assert l1_distance(Distribution.point_mass(2, 0), Distribution.uniform(2)) == 1


def test_l1_monotone_under_evolution():
    rng = RandomSource(23)
    for k in range(20):
        chain = random_reversible_chain(5, rng.derive(k))
        pi = stationary(chain)
        for x in range(5):
            p = Distribution.point_mass(5, x)
            prev = l1_distance(p, pi)
            for _ in range(30):
                p = evolve(chain, p, 1)
                cur = l1_distance(p, pi)
                assert cur <= prev + 1e-12
                prev = cur


def test_mixing_time_flip_is_one():
    assert mixing_time_exact(FLIP) == 1


def test_mixing_time_identity_not_ergodic():
    with pytest.raises(NotErgodic):
        mixing_time_exact(FiniteChain(np.eye(2)))


def test_mixing_time_lazy_4cycle_oracle():
    # independent full-enumeration oracle (np.linalg.matrix_power) gives 2
    chain = lazy_cycle_chain(4)
    pi = np.full(4, 0.25)
    expected = None
    for t in range(1, 50):
        Pt = np.linalg.matrix_power(chain.transition, t)
        if max(np.abs(Pt[x] - pi).sum() for x in range(4)) <= 0.25:
            expected = t
            break
    assert expected == 2
    assert mixing_time_exact(chain) == expected


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def test_simulate_identity_constant():
    path = simulate(FiniteChain(np.eye(3)), 1, 50, RandomSource(3))
    assert (path == 1).all()


def test_simulate_deterministic_by_seed():
    a = simulate(TWO_STATE, 0, 200, RandomSource(5))
    b = simulate(TWO_STATE, 0, 200, RandomSource(5))
    assert (a == b).all()
    c = simulate(TWO_STATE, 0, 200, RandomSource(6))
    assert (a != c).any()


def test_simulate_frequencies_match_stationary():
    chain = FiniteChain(np.array([[0.75, 0.25], [0.25, 0.75]]))
    path = simulate(chain, 0, 1_000_000, RandomSource(42))
    freq = np.bincount(path, minlength=2) / path.size
    np.testing.assert_allclose(freq, stationary(chain).probs, atol=0.01)


def test_simulate_endpoint_law_matches_evolve():
    # empirical endpoint frequencies vs exact evolution, 3-sigma binomial band
    chain = lazy_triangle()
    t, trials = 4, 100_000
    rng = RandomSource(99)
    ends = np.array([simulate(chain, 0, t, rng.derive(i))[-1] for i in range(trials)])
    freq = np.bincount(ends, minlength=3) / trials
    exact = evolve(chain, Distribution.point_mass(3, 0), t).probs
    sigma = np.sqrt(exact * (1 - exact) / trials)
    assert (np.abs(freq - exact) <= 3 * sigma + 1e-12).all()


# ---------------------------------------------------------------------------
# relative entropy
# ---------------------------------------------------------------------------

def test_entropy_zero_at_reference():
    assert relative_entropy(Distribution.uniform(4), Distribution.uniform(4)) == 0


def test_entropy_point_mass_uniform():
    n = 8
    assert relative_entropy(
        Distribution.point_mass(n, 2), Distribution.uniform(n)
    ) == pytest.approx(math.log(n))


def test_entropy_two_term_example():
    val = relative_entropy(
        Distribution(np.array([0.75, 0.25])), Distribution.uniform(2)
    )
    assert val == pytest.approx(0.75 * math.log(1.5) + 0.25 * math.log(0.5))


def test_entropy_bounded_by_log_inv_pi0():
    rng = RandomSource(31)
    for k in range(20):
        chain = random_reversible_chain(5, rng.derive(k))
        pi = stationary(chain)
        for x in range(5):
            ent = relative_entropy(Distribution.point_mass(5, x), pi)
            assert ent <= math.log(1 / pi.probs.min()) + 1e-12


def test_entropy_monotone_under_evolution():
    rng = RandomSource(37)
    for k in range(20):
        chain = random_reversible_chain(5, rng.derive(k))
        pi = stationary(chain)
        p = Distribution.point_mass(5, k % 5)
        prev = relative_entropy(p, pi)
        for _ in range(30):
            p = evolve(chain, p, 1)
            cur = relative_entropy(p, pi)
            assert cur <= prev + 1e-12
            prev = cur


def test_entropy_zero_mass_guard():
    with pytest.raises(ZeroStationaryMass):
        relative_entropy(Distribution.uniform(2), Distribution(np.array([1.0, 0.0])))


# ---------------------------------------------------------------------------
# chain file format
# ---------------------------------------------------------------------------

def test_load_chain_json_roundtrip():
    text = '{"n": 2, "P": [[0.9, 0.1], [0.2, 0.8]], "labels": ["a", "b"]}'
    chain = load_chain_json(text)
    np.testing.assert_allclose(chain.transition, TWO_STATE.transition)
    assert chain.labels == ("a", "b")


def test_load_chain_json_renormalizes_within_1e9():
    text = '{"P": [[0.9000000001, 0.1], [0.2, 0.8]]}'
    chain = load_chain_json(text)
    np.testing.assert_allclose(chain.transition.sum(axis=1), [1.0, 1.0], atol=1e-15)


def test_load_chain_json_rejects_bad_rows():
    with pytest.raises(ValueError):
        load_chain_json('{"P": [[0.again]]}')
    with pytest.raises(ValueError):
        load_chain_json('{"P": [[0.7, 0.1], [0.2, 0.8]]}')
