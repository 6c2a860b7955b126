"""Conductance, blocking conductance, and the three mixing bounds, verified
against exhaustive enumeration and matrix-power oracles."""

import math

import numpy as np
import pytest

from rapidmix import (
    Distribution,
    FiniteChain,
    RandomSource,
    amplified_mixing_check,
    avcond_mixing_bound,
    blocking_conductance_of_set,
    build_bcf,
    cheeger_check,
    conductance_of_set,
    entropy_decay_report,
    ergodic_flow,
    global_conductance,
    lazify,
    lazy_cycle_chain,
    lazy_hypercube_chain,
    mixing_time_exact,
    random_reversible_chain,
    spectral_summary,
    stationary,
    tv_bound_thm1,
)
from rapidmix.diagnostics import BlockingFunction
from rapidmix.errors import BadSetMass, EmptyProfile, NotLazy, NotReversible, TooLarge, ZeroPsi

FLIP = FiniteChain(np.array([[0.5, 0.5], [0.5, 0.5]]))


def brute_force_phi(chain, half_range=True):
    """Independent subset-loop oracle for the global conductance."""
    pi = stationary(chain).probs
    P = chain.transition
    n = chain.n_states
    best = np.inf
    for mask in range(1, (1 << n) - 1):
        S = [i for i in range(n) if mask >> i & 1]
        Sbar = [i for i in range(n) if not mask >> i & 1]
        m = pi[S].sum()
        if half_range and m > 0.5 + 1e-9:
            continue
        if not half_range and m >= 0.75 - 1e-9:
            continue
        Q = sum(pi[x] * P[x, y] for x in S for y in Sbar)
        best = min(best, Q / m)
    return best


# ---------------------------------------------------------------------------
# spectral summary and Theorem-1-style bound
# ---------------------------------------------------------------------------

def test_spectral_flip_rank_one():
    s = spectral_summary(FLIP)
    assert s.lambda2 == pytest.approx(0.0, abs=1e-12)
    assert s.pi0 == pytest.approx(0.5)


def test_spectral_nonlazy_flip_has_minus_one():
    s = spectral_summary(FiniteChain(np.array([[0.0, 1.0], [1.0, 0.0]])))
    assert s.lambdaN == pytest.approx(-1.0)


def test_spectral_cube3_lambda2():
    s = spectral_summary(lazy_hypercube_chain(3))
    assert s.lambda2 == pytest.approx(2 / 3, abs=1e-12)


def test_spectral_matches_direct_eigenvalues():
    rng = RandomSource(41)
    for k in range(20):
        chain = random_reversible_chain(6, rng.derive(k))
        s = spectral_summary(chain)
        ev = np.sort(np.linalg.eigvals(chain.transition).real)
        assert s.lambda2 == pytest.approx(ev[-2], abs=1e-9)
        assert s.lambdaN == pytest.approx(ev[0], abs=1e-9)


def test_spectral_rejects_nonreversible():
    P = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    with pytest.raises(NotReversible):
        spectral_summary(FiniteChain(P))


def test_tv_bound_values():
    s = spectral_summary(FLIP)
    assert tv_bound_thm1(s, 1) == pytest.approx(0.0, abs=1e-11)
    from rapidmix.diagnostics import SpectralSummary

    s2 = SpectralSummary(lambda2=0.5, lambdaN=0.1, pi0=0.25)
    assert tv_bound_thm1(s2, 2) == pytest.approx(1.0)


def test_tv_bound_dominates_distance():
    rng = RandomSource(43)
    for k in range(30):
        chain = random_reversible_chain(int(3 + k % 6), rng.derive(k))
        s = spectral_summary(chain)
        pi = stationary(chain).probs
        Pt = np.eye(chain.n_states)
        for t in range(101):
            dist = np.abs(Pt - pi[None, :]).sum(axis=1).max()
            assert dist <= tv_bound_thm1(s, t) + 1e-9
            Pt = Pt @ chain.transition


# ---------------------------------------------------------------------------
# ergodic flow and per-set conductance
# ---------------------------------------------------------------------------

def test_flow_whole_space_is_one():
    pi = stationary(FLIP)
    assert ergodic_flow(FLIP, pi, [0, 1], [0, 1]) == pytest.approx(1.0)


def test_flow_flip_singleton():
    pi = stationary(FLIP)
    assert ergodic_flow(FLIP, pi, [0], [1]) == pytest.approx(0.25)


def test_flow_symmetric_for_reversible():
    rng = RandomSource(47)
    for k in range(20):
        chain = random_reversible_chain(6, rng.derive(k))
        pi = stationary(chain)
        gen = rng.derive(100 + k).generator
        S = list(np.nonzero(gen.random(6) < 0.5)[0])
        T = [i for i in range(6) if i not in S]
        if not S or not T:
            continue
        assert ergodic_flow(chain, pi, S, T) == pytest.approx(
            ergodic_flow(chain, pi, T, S), abs=1e-12
        )


def test_conductance_flip_singleton():
    pi = stationary(FLIP)
    assert conductance_of_set(FLIP, pi, [0]) == pytest.approx(0.5)


def test_conductance_half_cube():
    for n in (2, 3, 4):
        chain = lazy_hypercube_chain(n)
        pi = stationary(chain)
        S = [x for x in range(1 << n) if not x & 1]
        assert conductance_of_set(chain, pi, S) == pytest.approx(1 / (2 * n), abs=1e-12)


def test_conductance_absorbing_set_zero():
    P = np.array([[1.0, 0.0], [0.5, 0.5]])
    chain = FiniteChain(P)
    pi = Distribution(np.array([1.0, 0.0]))
    # no outgoing flow from {0}
    assert ergodic_flow(chain, pi, [0], [1]) == 0.0


# ---------------------------------------------------------------------------
# global conductance profile
# ---------------------------------------------------------------------------

def test_global_flip():
    prof = global_conductance(FLIP)
    assert prof.global_phi == pytest.approx(0.5)


def test_global_cube2():
    prof = global_conductance(lazy_hypercube_chain(2))
    assert prof.global_phi == pytest.approx(0.25, abs=1e-12)
    assert prof.phi_asymmetric == pytest.approx(0.25, abs=1e-12)


def test_global_cube_theta_one_over_n():
    for n in (2, 3, 4):
        prof = global_conductance(lazy_hypercube_chain(n))
        assert 0.9 <= prof.phi_asymmetric * 2 * n <= 1.1
        assert prof.global_phi * 2 * n == pytest.approx(1.0, abs=1e-9)


def test_global_cube4_asymmetric_minimum():
    # over the asymmetric range the mass-11/16 set wins with 5/44
    prof = global_conductance(lazy_hypercube_chain(4))
    assert prof.phi_asymmetric == pytest.approx(5 / 44, abs=1e-12)


def test_global_matches_brute_force():
    rng = RandomSource(53)
    for k in range(10):
        chain = random_reversible_chain(5, rng.derive(k))
        prof = global_conductance(chain)
        assert prof.global_phi == pytest.approx(brute_force_phi(chain), abs=1e-12)


def test_global_invariant_under_relabeling():
    rng = RandomSource(59)
    chain = random_reversible_chain(6, rng)
    perm = rng.generator.permutation(6)
    P2 = chain.transition[np.ix_(perm, perm)]
    prof1 = global_conductance(chain)
    prof2 = global_conductance(FiniteChain(P2))
    assert prof1.global_phi == pytest.approx(prof2.global_phi, abs=1e-12)
    assert prof1.phi_asymmetric == pytest.approx(prof2.phi_asymmetric, abs=1e-12)


def test_global_guard():
    with pytest.raises(TooLarge):
        global_conductance(FiniteChain(np.eye(23)))


def test_profile_for_set_accessor():
    prof = global_conductance(FLIP, include_psi=True)
    entry = prof.for_set([0])
    assert entry["phi"] == pytest.approx(0.5)
    assert entry["psi"] == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# cheeger two-sided check
# ---------------------------------------------------------------------------

def test_cheeger_flip_hand_values():
    rep = cheeger_check(FLIP)
    assert (rep.phi, rep.lambda2) == (pytest.approx(0.5), pytest.approx(0.0, abs=1e-12))
    assert rep.lower == pytest.approx(0.0)
    assert rep.upper == pytest.approx(7 / 8)
    assert rep.holds


def test_cheeger_random_sweep():
    rng = RandomSource(61)
    for k in range(100):
        chain = random_reversible_chain(int(3 + k % 6), rng.derive(k))
        assert cheeger_check(chain).holds


def test_cheeger_rejects_nonlazy():
    with pytest.raises(NotLazy):
        cheeger_check(FiniteChain(np.array([[0.0, 1.0], [1.0, 0.0]])))


def test_cheeger_holds_on_cube4_with_half_range_phi():
    # the asymmetric-range minimum 5/44 would violate the lower bound here
    rep = cheeger_check(lazy_hypercube_chain(4))
    assert rep.holds
    assert rep.lambda2 == pytest.approx(0.75, abs=1e-12)
    assert 1 - 2 * (5 / 44) > rep.lambda2 + 1e-3


# ---------------------------------------------------------------------------
# blocking conductance
# ---------------------------------------------------------------------------

def test_psi_flip_singleton():
    pi = stationary(FLIP)
    assert blocking_conductance_of_set(FLIP, pi, [0]) == pytest.approx(0.5)


def test_psi_by_definition_enumeration():
    """Independent oracle: scan a fine alpha grid, enumerating every blocking
    set at each alpha, and compare with the breakpoint evaluation."""
    rng = RandomSource(67)
    for k in range(5):
        chain = random_reversible_chain(5, rng.derive(k))
        pi = stationary(chain)
        P = chain.transition
        n = 5
        gen = rng.derive(100 + k).generator
        mask = 0
        while mask in (0, (1 << n) - 1) or pi.probs[
            [i for i in range(n) if mask >> i & 1]
        ].sum() > 0.75:
            mask = int(gen.integers(1, (1 << n) - 1))
        S = [i for i in range(n) if mask >> i & 1]
        Sbar = [i for i in range(n) if i not in S]
        piS = pi.probs[S].sum()
        qcols = {y: sum(pi.probs[x] * P[x, y] for x in S) for y in Sbar}
        total = sum(qcols.values())
        best = 0.0
        for frac in np.linspace(1e-6, 1.0, 4001):
            alpha = frac * piS
            worst = total
            for bmask in range(1 << len(Sbar)):
                bset = [Sbar[i] for i in range(len(Sbar)) if bmask >> i & 1]
                if pi.probs[bset].sum() <= alpha:
                    worst = min(worst, total - sum(qcols[y] for y in bset))
            best = max(best, alpha * worst / piS**2)
        val = blocking_conductance_of_set(chain, pi, S)
        assert val >= best - 1e-9
        assert val <= best + 0.01  # grid resolution slack


def test_psi_dominates_quarter_phi_squared():
    rng = RandomSource(71)
    for k in range(20):
        chain = random_reversible_chain(5, rng.derive(k))
        prof = global_conductance(chain, include_psi=True)
        sel = ~np.isnan(prof.psi)
        assert (prof.psi[sel] >= 0.25 * prof.phi[sel] ** 2 - 1e-12).all()


def test_psi_rejects_full_mass():
    pi = stationary(FLIP)
    with pytest.raises(BadSetMass):
        blocking_conductance_of_set(FLIP, pi, [0, 1])


# ---------------------------------------------------------------------------
# blocking function and the averaged-conductance bound
# ---------------------------------------------------------------------------

def test_bcf_constant_data_unchanged():
    prof = global_conductance(FLIP, include_psi=True)
    bcf = build_bcf(prof, prof.pi0)
    np.testing.assert_allclose(bcf.values, [0.5, 0.5])
    assert bcf.breakpoints[-1] == pytest.approx(0.75)


def test_bcf_defining_inequalities():
    rng = RandomSource(73)
    for k in range(20):
        chain = random_reversible_chain(5, rng.derive(k))
        prof = global_conductance(chain, include_psi=True)
        bcf = build_bcf(prof, prof.pi0)
        sel = ~np.isnan(prof.psi)
        for mass, psi_val in zip(prof.mass[sel], prof.psi[sel]):
            assert bcf.value_at(mass) <= psi_val + 1e-12
        # grid check of the factor-2 regularity condition
        grid = np.linspace(prof.pi0 / 2, 0.75, 200)
        for t in grid:
            for tp in grid:
                if t <= tp <= (4 / 3) * t:
                    assert bcf.value_at(t) <= 2 * bcf.value_at(tp) + 1e-12


def test_bcf_requires_psi():
    prof = global_conductance(FLIP, include_psi=False)
    with pytest.raises(EmptyProfile):
        build_bcf(prof, prof.pi0)


def test_avcond_closed_form_constant():
    bcf = BlockingFunction(breakpoints=np.array([0.75]), values=np.array([1.0]))
    assert avcond_mixing_bound(bcf, 3 / 8) == pytest.approx(500 * math.log(2))
    bcf2 = BlockingFunction(breakpoints=np.array([0.75]), values=np.array([0.25]))
    pi0 = 0.1
    assert avcond_mixing_bound(bcf2, pi0) == pytest.approx(
        500 / 0.25 * math.log(0.75 / pi0)
    )


def test_avcond_zero_psi_guard():
    bcf = BlockingFunction(breakpoints=np.array([0.3, 0.75]), values=np.array([0.0, 1.0]))
    with pytest.raises(ZeroPsi):
        avcond_mixing_bound(bcf, 0.1)


def test_avcond_dominates_exact_mixing_time():
    rng = RandomSource(79)
    for k in range(50):
        chain = random_reversible_chain(int(3 + k % 4), rng.derive(k))
        prof = global_conductance(chain, include_psi=True)
        bcf = build_bcf(prof, prof.pi0)
        bound = avcond_mixing_bound(bcf, prof.pi0)
        assert bound >= mixing_time_exact(chain)


# ---------------------------------------------------------------------------
# entropy decay and amplification
# ---------------------------------------------------------------------------

def test_entropy_report_stationary_start_all_zero():
    pi = stationary(FLIP)
    rep = entropy_decay_report(FLIP, pi, 5)
    assert all(row[1] == pytest.approx(0.0, abs=1e-14) for row in rep.rows)


def test_entropy_report_flip_monotone():
    rep = entropy_decay_report(FLIP, Distribution.point_mass(2, 0), 10)
    ents = [row[1] for row in rep.rows]
    assert ents[0] == pytest.approx(math.log(2))
    assert all(b <= a + 1e-12 for a, b in zip(ents, ents[1:]))
    assert all(row[2] is None or row[2] <= 1 + 1e-12 for row in rep.rows)


def test_entropy_alpha_reported_alongside_lambda2():
    chain = lazy_cycle_chain(4)
    rep = entropy_decay_report(chain, Distribution.point_mass(4, 0), 20)
    s = spectral_summary(chain)
    # reported side by side only; no ordering asserted
    assert 0.0 <= rep.alpha_hat <= 1.0 + 1e-12
    assert -1.0 <= s.lambda2 < 1.0


def test_amplified_eps_quarter_reduces_to_tau():
    assert amplified_mixing_check(lazy_cycle_chain(4), 0.25)


def test_amplified_small_eps_lazy_4cycle():
    assert amplified_mixing_check(lazy_cycle_chain(4), 1e-3)


def test_amplified_eps_above_one_vacuous():
    assert amplified_mixing_check(lazy_cycle_chain(4), 1.5)
