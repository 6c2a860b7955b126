"""Explicit finite reversible Markov chains.

A chain is a dense row-stochastic matrix over N indexed states.  This module
covers construction and validation, stationary distributions, lazification,
the Metropolis filter, exact t-step evolution, trajectory simulation, L1
distances, exact mixing time, and relative entropy.  Everything downstream
(conductance, coupling, the concrete samplers) reduces its theorem checks to
these primitives.

Distance convention: the unhalved L1 sum "sum_x |p(x) - q(x)|" is used
everywhere, so the mixing threshold is 1/4 on a scale where disjoint
distributions are at distance 2.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    DimensionMismatch,
    NonPositiveWeight,
    NotErgodic,
    TooLarge,
    ZeroStationaryMass,
)
from .rng import RandomSource, as_generator

ROW_SUM_TOL = 1e-12
MIXING_STATE_GUARD = 4096
DIRECT_SOLVE_LIMIT = 512


@dataclass(frozen=True)
class Distribution:
    """Probability vector over chain states (entries >= 0, sum 1 within 1e-12)."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1:
            raise DimensionMismatch(f"distribution must be a vector, got shape {p.shape}")
        if p.size == 0:
            raise DimensionMismatch("distribution must be nonempty")
        if p.min() < -1e-12:
            raise ValueError(f"negative probability {p.min()}")
        p = np.clip(p, 0.0, None)
        s = p.sum()
        if abs(s - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {s}, expected 1 within 1e-12")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n(self) -> int:
        return self.probs.size

    def __getitem__(self, i: int) -> float:
        return float(self.probs[i])

    @staticmethod
    def point_mass(n: int, x: int) -> "Distribution":
        p = np.zeros(n)
        p[x] = 1.0
        return Distribution(p)

    @staticmethod
    def uniform(n: int) -> "Distribution":
        return Distribution(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class FiniteChain:
    """Row-stochastic transition matrix with optional state labels.

    Stochasticity is validated at construction; ergodicity is *not* assumed,
    it is checked by the operations that require it (stationary, mixing).
    """

    transition: np.ndarray
    labels: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise DimensionMismatch(f"transition matrix must be square, got {P.shape}")
        if P.shape[0] == 0:
            raise DimensionMismatch("chain must have at least one state")
        if P.min() < 0.0 or P.max() > 1.0 + 1e-12:
            raise ValueError("transition probabilities must lie in [0, 1]")
        rows = P.sum(axis=1)
        worst = np.abs(rows - 1.0).max()
        if worst > ROW_SUM_TOL:
            raise ValueError(f"row sums deviate from 1 by {worst:.3e} (> {ROW_SUM_TOL})")
        P = P.copy()
        P.setflags(write=False)
        object.__setattr__(self, "transition", P)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != P.shape[0]:
                raise DimensionMismatch("labels length must match state count")
            object.__setattr__(self, "labels", labels)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    def is_strongly_connected(self) -> bool:
        adj = csr_matrix(self.transition > 0)
        n_comp, _ = connected_components(adj, directed=True, connection="strong")
        return n_comp == 1

    def is_aperiodic(self) -> bool:
        """Gcd of cycle lengths is 1 (any self-loop settles it immediately)."""
        if np.any(np.diag(self.transition) > 0):
            return True
        return _period(self.transition) == 1

    def is_ergodic(self) -> bool:
        return self.is_strongly_connected() and self.is_aperiodic()

    def is_lazy(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.diag(self.transition) >= 0.5 - tol))


def _period(P: np.ndarray) -> int:
    """Gcd of directed cycle lengths through state 0 (assumes strong connectivity)."""
    n = P.shape[0]
    depth = np.full(n, -1)
    depth[0] = 0
    order = [0]
    g = 0
    head = 0
    while head < len(order):
        x = order[head]
        head += 1
        for y in np.nonzero(P[x] > 0)[0]:
            if depth[y] < 0:
                depth[y] = depth[x] + 1
                order.append(int(y))
            else:
                g = math.gcd(g, depth[x] + 1 - depth[y])
    return abs(g) if g != 0 else 0


def _require_ergodic(chain: FiniteChain) -> None:
    if not chain.is_strongly_connected():
        raise NotErgodic("chain is reducible (transition graph not strongly connected)")
    if not chain.is_aperiodic():
        raise NotErgodic("chain is periodic")


def stationary(chain: FiniteChain) -> Distribution:
    """Stationary distribution pi with pi P = pi.

    Direct linear solve for small chains; power iteration on the lazified
    matrix (same stationary distribution, nonnegative spectrum) above
    DIRECT_SOLVE_LIMIT states.
    """
    _require_ergodic(chain)
    return solve_stationary_irreducible(chain)


def solve_stationary_irreducible(chain: FiniteChain) -> Distribution:
    """pi P = pi for a strongly connected chain; unlike :func:`stationary`
    this does not demand aperiodicity (the fixed point is still unique)."""
    if not chain.is_strongly_connected():
        raise NotErgodic("chain is reducible (transition graph not strongly connected)")
    P = chain.transition
    n = chain.n_states
    if n <= DIRECT_SOLVE_LIMIT:
        # Solve (P^T - I) pi = 0 with the normalization row sum(pi) = 1.
        A = P.T - np.eye(n)
        A[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        pi = np.linalg.solve(A, b)
    else:
        lazy = 0.5 * (np.eye(n) + P)
        pi = np.full(n, 1.0 / n)
        for _ in range(1_000_000):
            nxt = pi @ lazy
            if np.abs(nxt - pi).sum() < 1e-12:
                pi = nxt
                break
            pi = nxt
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    residual = np.abs(pi @ P - pi).max()
    if residual > 1e-10:
        raise NotErgodic(f"stationary solve residual {residual:.3e} exceeds 1e-10")
    if pi.min() <= 0.0:
        raise NotErgodic("stationary distribution has a zero entry")
    return Distribution(pi)


def check_reversible(chain: FiniteChain, pi: Distribution, tol: float) -> bool:
    """True iff |pi(x) P_xy - pi(y) P_yx| <= tol for every pair x, y."""
    if pi.n != chain.n_states:
        raise DimensionMismatch("distribution length does not match state count")
    flow = pi.probs[:, None] * chain.transition
    return bool(np.abs(flow - flow.T).max() <= tol)


def lazify(chain: FiniteChain) -> FiniteChain:
    """Half-step chain (I + P)/2: holding probability >= 1/2 everywhere,
    stationary distribution unchanged, spectrum mapped to (1 + lambda)/2 >= 0."""
    n = chain.n_states
    return FiniteChain(0.5 * (np.eye(n) + chain.transition), labels=chain.labels)


def metropolize(chain: FiniteChain, weights: np.ndarray) -> FiniteChain:
    """Metropolis filter: accept the proposed move x -> y with min(1, F(y)/F(x)).

    Off-diagonal entries become P_xy * min(1, F(y)/F(x)); the rejected mass is
    added to the diagonal.  If the input chain is reversible with stationary
    pi, the result is reversible with stationary proportional to pi * F.
    """
    F = np.asarray(weights, dtype=float)
    if F.shape != (chain.n_states,):
        raise DimensionMismatch("one positive weight per state required")
    if F.min() <= 0.0:
        raise NonPositiveWeight(f"weights must be > 0, got min {F.min()}")
    P = chain.transition
    accept = np.minimum(1.0, F[None, :] / F[:, None])
    Q = P * accept
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, 1.0 - Q.sum(axis=1))
    return FiniteChain(Q, labels=chain.labels)


def evolve(chain: FiniteChain, p0: Distribution, t: int) -> Distribution:
    """Exact t-step evolution p0 P^t by repeated vector-matrix products."""
    if p0.n != chain.n_states:
        raise DimensionMismatch("distribution length does not match state count")
    if t < 0:
        raise ValueError("t must be >= 0")
    p = p0.probs.copy()
    P = chain.transition
    for _ in range(t):
        p = p @ P
    return Distribution(p / p.sum())


def simulate(
    chain: FiniteChain,
    x0: int,
    t: int,
    rng: RandomSource | np.random.Generator,
) -> np.ndarray:
    """One trajectory of length t+1 starting at x0, reproducible by seed."""
    if not (0 <= x0 < chain.n_states):
        raise DimensionMismatch(f"start state {x0} out of range")
    if t < 0:
        raise ValueError("t must be >= 0")
    gen = as_generator(rng)
    cum = np.cumsum(chain.transition, axis=1)
    cum[:, -1] = 1.0
    path = np.empty(t + 1, dtype=np.int64)
    path[0] = x0
    draws = gen.random(t)
    x = x0
    for i in range(t):
        x = int(np.searchsorted(cum[x], draws[i], side="right"))
        path[i + 1] = x
    return path


def l1_distance(p: Distribution, q: Distribution) -> float:
    """Unhalved L1 distance sum_x |p(x) - q(x)|, in [0, 2]."""
    if p.n != q.n:
        raise DimensionMismatch("distributions have different lengths")
    return float(np.abs(p.probs - q.probs).sum())


def mixing_time_exact(chain: FiniteChain, threshold: float = 0.25) -> int:
    """Least t >= 1 with max_x sum |P^t(x,.) - pi| <= threshold.

    Deterministic starts suffice: L1 distance to pi is convex in the initial
    distribution, so the maximum over all p0 is attained at a point mass.
    """
    if chain.n_states > MIXING_STATE_GUARD:
        raise TooLarge(f"{chain.n_states} states exceeds the {MIXING_STATE_GUARD} guard")
    pi = stationary(chain).probs
    Pt = chain.transition.copy()
    P = chain.transition
    for t in range(1, 1_000_001):
        if np.abs(Pt - pi[None, :]).sum(axis=1).max() <= threshold:
            return t
        Pt = Pt @ P
    raise NotErgodic("mixing threshold not reached within 1e6 steps")


def relative_entropy(p: Distribution, pi: Distribution) -> float:
    """Ent(p) = sum_x p(x) log(p(x)/pi(x)), natural log, 0 log 0 = 0."""
    if p.n != pi.n:
        raise DimensionMismatch("distributions have different lengths")
    if pi.probs.min() <= 0.0:
        raise ZeroStationaryMass("reference distribution must be strictly positive")
    mask = p.probs > 0
    val = float(np.sum(p.probs[mask] * np.log(p.probs[mask] / pi.probs[mask])))
    return max(val, 0.0)


# ---------------------------------------------------------------------------
# Named chain constructors used throughout the tests and the CLI.
# ---------------------------------------------------------------------------

def lazy_cycle_chain(n: int) -> FiniteChain:
    """Lazy walk on the n-cycle: stay 1/2, each neighbor 1/4."""
    P = np.zeros((n, n))
    for i in range(n):
        P[i, i] = 0.5
        P[i, (i + 1) % n] += 0.25
        P[i, (i - 1) % n] += 0.25
    return FiniteChain(P)


def lazy_hypercube_chain(n: int) -> FiniteChain:
    """Lazy walk on {0,1}^n (states are bitmasks): stay 1/2, each of the n
    neighbors with probability 1/(2n)."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if n > 12:
        raise TooLarge("explicit hypercube chain guard is n <= 12")
    N = 1 << n
    P = np.zeros((N, N))
    for x in range(N):
        P[x, x] = 0.5
        for j in range(n):
            P[x, x ^ (1 << j)] = 1.0 / (2 * n)
    labels = tuple(format(x, f"0{n}b") for x in range(N))
    return FiniteChain(P, labels=labels)


def random_reversible_chain(
    n: int,
    rng: RandomSource | np.random.Generator,
    sparsity: float = 0.0,
    lazy: bool = True,
) -> FiniteChain:
    """Random reversible ergodic chain: the walk on a random positive
    symmetric weight matrix (stationary mass proportional to weighted degree),
    optionally sparsified while keeping a connecting cycle, then lazified."""
    if n < 2:
        raise ValueError("need at least 2 states")
    if not 0.0 <= sparsity < 1.0:
        raise ValueError("sparsity must be in [0, 1)")
    gen = as_generator(rng)
    W = gen.uniform(0.2, 1.0, size=(n, n))
    W = W + W.T
    if sparsity > 0.0:
        drop = gen.random((n, n)) < sparsity
        drop = np.triu(drop, 1)
        drop = drop | drop.T
        W[drop] = 0.0
        for i in range(n):  # keep a Hamiltonian cycle so the walk stays connected
            W[i, (i + 1) % n] = max(W[i, (i + 1) % n], 0.3)
            W[(i + 1) % n, i] = W[i, (i + 1) % n]
    np.fill_diagonal(W, 0.0)
    P = W / W.sum(axis=1, keepdims=True)
    chain = FiniteChain(P)
    return lazify(chain) if lazy else chain


# ---------------------------------------------------------------------------
# Chain file format: {"n": N, "P": [[row0...], ...], "labels": [...] optional}
# ---------------------------------------------------------------------------

def load_chain_json(text: str) -> FiniteChain:
    """Parse the chain file format; rows must sum to 1 within 1e-9 and are
    renormalized exactly before construction."""
    doc = json.loads(text)
    if "P" not in doc:
        raise ValueError("chain file must contain a 'P' matrix")
    P = np.asarray(doc["P"], dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError(f"'P' must be square, got shape {P.shape}")
    if "n" in doc and int(doc["n"]) != P.shape[0]:
        raise ValueError("'n' does not match the matrix size")
    rows = P.sum(axis=1)
    if np.abs(rows - 1.0).max() > 1e-9:
        raise ValueError("rows must sum to 1 within 1e-9")
    if P.min() < 0:
        raise ValueError("probabilities must be nonnegative")
    labels = tuple(doc["labels"]) if "labels" in doc else None
    return FiniteChain(P / rows[:, None], labels=labels)


def chain_to_json(chain: FiniteChain) -> str:
    doc: dict = {"n": chain.n_states, "P": chain.transition.tolist()}
    if chain.labels is not None:
        doc["labels"] = list(chain.labels)
    return json.dumps(doc)
