"""Coupling and path-coupling harness.

A coupling runs two copies of a chain jointly so that each coordinate is
marginally the chain; the probability that the copies have not met bounds the
distance to stationarity.  This module verifies marginals statistically,
estimates meeting probabilities, checks the coupling/TV inequality, computes
exact path-coupling contraction factors over adjacent state pairs, and ships
the same-coordinate coupling on the hypercube as the worked instance.

The TV inequality is asserted with the standard 1/2 factor,
(1/2) sum_x |p^(t)(x) - pi(x)| <= Pr(X_t != Y_t) + 3 SE; reports also carry
the unhalved sum.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .chains import Distribution, FiniteChain, evolve, lazy_hypercube_chain, stationary
from .errors import DimensionMismatch, NoContraction
from .rng import RandomSource, as_generator

JointStep = Callable[[int, int, np.random.Generator], tuple[int, int]]
JointLaw = Callable[[int, int], list[tuple[float, int, int]]]

EXACT_OUTCOME_GUARD = 1_000_000


@dataclass
class CouplingRule:
    """Joint one-step rule for a pair of copies of ``chain``.

    ``joint_step(x, y, gen)`` returns the next pair; once the copies are equal
    they must move identically forever.  ``joint_law(x, y)``, when available,
    enumerates the joint outcomes as (probability, x', y') triples and enables
    exact contraction expectations.
    """

    chain: FiniteChain | None
    joint_step: JointStep
    joint_law: JointLaw | None = None
    name: str = "coupling"


@dataclass(frozen=True)
class PathMetricGraph:
    """Connected directed graph on the states with shortest-path distances."""

    adjacency: np.ndarray
    distances: np.ndarray
    diameter: int

    @staticmethod
    def from_adjacency(adj: np.ndarray) -> "PathMetricGraph":
        adj = np.asarray(adj, dtype=bool).copy()
        np.fill_diagonal(adj, False)
        dist = shortest_path(csr_matrix(adj), method="D", unweighted=True)
        if np.isinf(dist).any():
            raise ValueError("metric graph must be connected")
        return PathMetricGraph(adjacency=adj, distances=dist.astype(int),
                               diameter=int(dist.max()))

    @staticmethod
    def from_chain(chain: FiniteChain) -> "PathMetricGraph":
        return PathMetricGraph.from_adjacency(chain.transition > 0)


@dataclass(frozen=True)
class ContractionReport:
    beta_pc: float
    per_pair: dict  # (u, v) -> expected next distance, over adjacent pairs
    exact: bool
    standard_error: float = 0.0


@dataclass(frozen=True)
class MeetProbability:
    p_hat: float
    standard_error: float
    trials: int


@dataclass(frozen=True)
class CouplingTvReport:
    t: int
    tv_half_l1: float      # (1/2) sum |p^(t) - pi|
    l1_unhalved: float     # the raw sum, as displayed in reports
    meet_failure: MeetProbability
    holds: bool


def independent_coupling(chain: FiniteChain) -> CouplingRule:
    """Both copies draw independently until they meet, then move together."""
    P = chain.transition
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0
    n = chain.n_states

    def step(x: int, y: int, gen: np.random.Generator) -> tuple[int, int]:
        nx = int(np.searchsorted(cum[x], gen.random(), side="right"))
        if x == y:
            return nx, nx
        ny = int(np.searchsorted(cum[y], gen.random(), side="right"))
        return nx, ny

    def law(x: int, y: int):
        if x == y:
            return [(float(P[x, a]), a, a) for a in range(n) if P[x, a] > 0]
        return [
            (float(P[x, a] * P[y, b]), a, b)
            for a in range(n) if P[x, a] > 0
            for b in range(n) if P[y, b] > 0
        ]

    return CouplingRule(chain=chain, joint_step=step, joint_law=law, name="independent")


def hypercube_coupling_rule(n: int) -> CouplingRule:
    """Same-coordinate coupling on the lazy cube walk over {0,1}^n.

    Both copies draw the same coordinate j and the same fresh bit b and set
    coordinate j to b.  Marginally this is the lazy cube walk (the fresh bit
    equals the current bit with probability 1/2), and once equal the copies
    stay equal.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    chain = lazy_hypercube_chain(n) if n <= 12 else None

    def step(x: int, y: int, gen: np.random.Generator) -> tuple[int, int]:
        j = int(gen.integers(n))
        b = int(gen.integers(2))
        mask = 1 << j
        nx = (x | mask) if b else (x & ~mask)
        ny = (y | mask) if b else (y & ~mask)
        return nx, ny

    def law(x: int, y: int):
        out = []
        p = 1.0 / (2 * n)
        for j in range(n):
            mask = 1 << j
            for b in (0, 1):
                nx = (x | mask) if b else (x & ~mask)
                ny = (y | mask) if b else (y & ~mask)
                out.append((p, nx, ny))
        return out

    return CouplingRule(chain=chain, joint_step=step, joint_law=law,
                        name=f"hypercube-same-coordinate-{n}")


def verify_marginals(
    rule: CouplingRule,
    trials: int,
    tol: float,
    rng: RandomSource | np.random.Generator = 0,
    start_pairs: list[tuple[int, int]] | None = None,
) -> bool:
    """Statistically check that each coordinate of the joint step follows the
    chain's transition row: for every tested start pair, the empirical
    one-step frequencies of X and of Y must match P within tol entrywise."""
    if rule.chain is None:
        raise DimensionMismatch("rule has no explicit chain to verify against")
    gen = as_generator(rng)
    P = rule.chain.transition
    n = rule.chain.n_states
    if start_pairs is None:
        picks = [(0, n - 1), (n - 1, 0), (0, 0)]
        while len(picks) < min(6, n * n):
            pair = (int(gen.integers(n)), int(gen.integers(n)))
            if pair not in picks:
                picks.append(pair)
        start_pairs = picks
    for x0, y0 in start_pairs:
        fx = np.zeros(n)
        fy = np.zeros(n)
        for _ in range(trials):
            nx, ny = rule.joint_step(x0, y0, gen)
            fx[nx] += 1
            fy[ny] += 1
        fx /= trials
        fy /= trials
        if np.abs(fx - P[x0]).max() > tol or np.abs(fy - P[y0]).max() > tol:
            return False
    return True


def meet_failure_curve(
    rule: CouplingRule,
    x0: int,
    y0: int,
    t_max: int,
    trials: int,
    rng: RandomSource | np.random.Generator,
) -> list[MeetProbability]:
    """Monte Carlo Pr(X_t != Y_t) for t = 0..t_max from one batch of trials.

    Relies on coalescence permanence: each trial only records its meeting
    time, and the curve is the survival function of that time.
    """
    gen = as_generator(rng)
    not_met_counts = np.zeros(t_max + 1, dtype=np.int64)
    for _ in range(trials):
        x, y = x0, y0
        for t in range(t_max + 1):
            if x != y:
                not_met_counts[t] += 1
            else:
                break
            if t < t_max:
                x, y = rule.joint_step(x, y, gen)
    out = []
    for t in range(t_max + 1):
        p = not_met_counts[t] / trials
        se = float(np.sqrt(max(p * (1 - p), 1.0 / trials) / trials))
        out.append(MeetProbability(p_hat=float(p), standard_error=se, trials=trials))
    return out


def estimate_meet_prob(
    rule: CouplingRule,
    x0: int,
    y0: int,
    t: int,
    trials: int,
    rng: RandomSource | np.random.Generator,
) -> MeetProbability:
    """Monte Carlo estimate of Pr(X_t != Y_t) with its binomial standard error."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return meet_failure_curve(rule, x0, y0, t, trials, rng)[t]


def coupling_tv_check(
    rule: CouplingRule,
    chain: FiniteChain,
    x0: int,
    t: int,
    trials: int,
    rng: RandomSource | np.random.Generator,
) -> CouplingTvReport:
    """Check (1/2) sum |p^(t) - pi| <= Pr(X_t != Y_t) + 3 SE with Y_0 drawn
    from the exact stationary distribution."""
    gen = as_generator(rng)
    pi = stationary(chain)
    p_t = evolve(chain, Distribution.point_mass(chain.n_states, x0), t)
    l1 = float(np.abs(p_t.probs - pi.probs).sum())
    not_met = 0
    for _ in range(trials):
        x = x0
        y = int(gen.choice(chain.n_states, p=pi.probs))
        for _ in range(t):
            if x == y:
                break
            x, y = rule.joint_step(x, y, gen)
        if x != y:
            not_met += 1
    p = not_met / trials
    se = float(np.sqrt(max(p * (1 - p), 1.0 / trials) / trials))
    est = MeetProbability(p_hat=float(p), standard_error=se, trials=trials)
    holds = 0.5 * l1 <= p + 3 * se
    return CouplingTvReport(t=t, tv_half_l1=0.5 * l1, l1_unhalved=l1,
                            meet_failure=est, holds=bool(holds))


def path_contraction_factor(
    rule: CouplingRule,
    metric: PathMetricGraph | None = None,
    mc_trials: int = 4000,
    rng: RandomSource | np.random.Generator = 0,
) -> ContractionReport:
    """Worst expected next-step distance over adjacent state pairs.

    Uses the exact joint law when the rule provides one and the outcome space
    is small; otherwise Monte Carlo with a reported standard error.
    """
    if metric is None:
        if rule.chain is None:
            raise DimensionMismatch("need a metric graph or an explicit chain")
        metric = PathMetricGraph.from_chain(rule.chain)
    dist = metric.distances
    pairs = [(int(u), int(v)) for u, v in zip(*np.nonzero(metric.adjacency))]
    per_pair: dict = {}
    if rule.joint_law is not None:
        laws = []
        total_outcomes = 0
        for u, v in pairs:
            law = rule.joint_law(u, v)
            total_outcomes += len(law)
            if total_outcomes > EXACT_OUTCOME_GUARD:
                break
            laws.append(law)
        if total_outcomes <= EXACT_OUTCOME_GUARD:
            for (u, v), law in zip(pairs, laws):
                per_pair[(u, v)] = float(sum(p * dist[nu, nv] for p, nu, nv in law))
            return ContractionReport(beta_pc=max(per_pair.values()), per_pair=per_pair,
                                     exact=True)
    gen = as_generator(rng)
    worst_se = 0.0
    for u, v in pairs:
        draws = np.empty(mc_trials)
        for i in range(mc_trials):
            nu, nv = rule.joint_step(u, v, gen)
            draws[i] = dist[nu, nv]
        per_pair[(u, v)] = float(draws.mean())
        worst_se = max(worst_se, float(draws.std(ddof=1) / np.sqrt(mc_trials)))
    return ContractionReport(beta_pc=max(per_pair.values()), per_pair=per_pair,
                             exact=False, standard_error=worst_se)


def path_coupling_bound(diameter: int, beta_pc: float, t: int) -> float:
    """Path-coupling bound D * beta^t on Pr(X_t != Y_t)."""
    if not 0.0 <= beta_pc < 1.0:
        raise NoContraction(f"contraction factor {beta_pc} is not in [0, 1)")
    if t < 0:
        raise ValueError("t must be >= 0")
    return float(diameter) * beta_pc ** t
