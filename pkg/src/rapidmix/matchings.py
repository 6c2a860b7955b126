"""The permanent pipeline over bipartite matchings.

Exact oracles (matching enumeration, permanent via permutation sum and Ryser),
the walk over perfect and near-perfect matchings with its four transition
rules, dense-case rejection sampling, modified hole weights computed exactly
by enumeration, the Metropolis-reweighted walk, and a counting-from-sampling
permanent estimator.

Vertices are 0-based on both sides; a matching is stored as the tuple of right
partners per left vertex, -1 for unmatched.  With n the side size, a perfect
matching has n edges and a near-perfect matching has n-1 edges and one hole on
each side.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .chains import FiniteChain, metropolize
from .errors import (
    DimensionMismatch,
    EmptyHoleClass,
    InvalidState,
    NoPerfectMatching,
    NotConnected,
    NotDense,
    RejectionBudgetExhausted,
    TooLarge,
)
from .rng import RandomSource, as_generator

ENUMERATION_GUARD = 10
PERMANENT_GUARD = 12
CHAIN_STATE_GUARD = 4096


@dataclass(frozen=True)
class BipartiteGraph:
    """Bipartite graph on n+n vertices with optional positive edge weights."""

    n: int
    edges: tuple[tuple[int, int], ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise DimensionMismatch("side size must be >= 1")
        seen = set()
        for (i, j) in self.edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise DimensionMismatch(f"edge ({i},{j}) out of range for n={self.n}")
            if (i, j) in seen:
                raise InvalidState(f"duplicate edge ({i},{j})")
            seen.add((i, j))
        object.__setattr__(self, "edges", tuple((int(i), int(j)) for i, j in self.edges))
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if len(w) != len(self.edges):
                raise DimensionMismatch("one weight per edge required")
            if any(x <= 0 for x in w):
                raise InvalidState("edge weights must be positive")
            object.__setattr__(self, "weights", w)

    @staticmethod
    def from_matrix(A: np.ndarray) -> "BipartiteGraph":
        A = np.asarray(A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch("adjacency matrix must be square")
        edges = tuple((int(i), int(j)) for i, j in zip(*np.nonzero(A != 0)))
        return BipartiteGraph(n=A.shape[0], edges=edges)

    @staticmethod
    def complete(n: int, weights: np.ndarray | None = None) -> "BipartiteGraph":
        edges = tuple((i, j) for i in range(n) for j in range(n))
        w = None if weights is None else tuple(float(weights[i][j]) for i, j in edges)
        return BipartiteGraph(n=n, edges=edges, weights=w)

    @cached_property
    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=np.int64)
        for i, j in self.edges:
            A[i, j] = 1
        return A

    @cached_property
    def edge_weight(self) -> dict:
        if self.weights is None:
            return {e: 1.0 for e in self.edges}
        return dict(zip(self.edges, self.weights))

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        out = [[] for _ in range(self.n)]
        for i, j in self.edges:
            out[i].append(j)
        return tuple(tuple(sorted(js)) for js in out)


@dataclass(frozen=True)
class Matching:
    """Right partner per left vertex; -1 marks the unmatched left vertex."""

    pairing: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "pairing", tuple(int(j) for j in self.pairing))
        used = [j for j in self.pairing if j >= 0]
        if len(set(used)) != len(used):
            raise InvalidState("two left vertices share a right partner")

    @property
    def n(self) -> int:
        return len(self.pairing)

    @property
    def size(self) -> int:
        return sum(1 for j in self.pairing if j >= 0)

    @property
    def is_perfect(self) -> bool:
        return self.size == self.n

    @property
    def is_near_perfect(self) -> bool:
        return self.size == self.n - 1

    @property
    def holes(self) -> tuple[int, int] | None:
        """(left hole, right hole) for a near-perfect matching, else None."""
        if not self.is_near_perfect:
            return None
        left = next(i for i, j in enumerate(self.pairing) if j < 0)
        used = set(self.pairing)
        right = next(j for j in range(self.n) if j not in used)
        return (left, right)

    @property
    def edge_set(self) -> frozenset:
        return frozenset((i, j) for i, j in enumerate(self.pairing) if j >= 0)

    def weight(self, g: BipartiteGraph) -> float:
        ew = g.edge_weight
        out = 1.0
        for e in self.edge_set:
            out *= ew[e]
        return out


def enumerate_matchings(g: BipartiteGraph) -> tuple[list[Matching], list[Matching]]:
    """Exhaustive duplicate-free lists of perfect and near-perfect matchings."""
    if g.n > ENUMERATION_GUARD:
        raise TooLarge(f"n={g.n} exceeds the enumeration guard ({ENUMERATION_GUARD})")
    perfect: list[Matching] = []
    near: list[Matching] = []
    nbr = g.neighbors
    pairing: list[int] = []
    used = [False] * g.n

    def rec(i: int, skipped: bool) -> None:
        if i == g.n:
            m = Matching(tuple(pairing))
            (near if skipped else perfect).append(m)
            return
        if not skipped:
            pairing.append(-1)
            rec(i + 1, True)
            pairing.pop()
        for j in nbr[i]:
            if not used[j]:
                used[j] = True
                pairing.append(j)
                rec(i + 1, skipped)
                pairing.pop()
                used[j] = False

    rec(0, False)
    return perfect, near


def permanent_by_permutations(A: np.ndarray) -> float:
    """Permanent as the explicit sum over permutations (oracle, n <= 8)."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n > 8:
        raise TooLarge("permutation enumeration guard is n <= 8")
    from itertools import permutations

    total = 0.0
    for sigma in permutations(range(n)):
        prod = 1.0
        for i, j in enumerate(sigma):
            prod *= A[i, j]
            if prod == 0.0:
                break
        total += prod
    return total


def permanent_exact(A: np.ndarray) -> float:
    """Exact permanent of a nonnegative matrix by Ryser's inclusion-exclusion
    (agrees with the permutation sum; cross-checked in tests for n <= 8)."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch("matrix must be square")
    n = A.shape[0]
    if n > PERMANENT_GUARD:
        raise TooLarge(f"n={n} exceeds the permanent guard ({PERMANENT_GUARD})")
    if n == 0:
        return 1.0
    masks = np.arange(1, 1 << n, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
    row_sums = A @ bits.T                      # (n, masks): sum_{j in S} A_ij
    prods = np.prod(row_sums, axis=0)
    signs = np.where((n - bits.sum(axis=1).astype(int)) % 2 == 0, 1.0, -1.0)
    return float(np.dot(signs, prods))


def dense_check(A: np.ndarray) -> bool:
    """True iff every row of the square 0-1 matrix has at least n/2 ones."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch("matrix must be square")
    n = A.shape[0]
    return bool(np.all(2 * (A != 0).sum(axis=1) >= n))


def column_dense_check(A: np.ndarray) -> bool:
    """Companion report: every column has at least n/2 ones."""
    return dense_check(np.asarray(A).T)


def maximum_matching(g: BipartiteGraph) -> Matching:
    """Maximum matching by augmenting paths."""
    match_l = [-1] * g.n
    match_r = [-1] * g.n
    nbr = g.neighbors

    def augment(u: int, seen: list[bool]) -> bool:
        for v in nbr[u]:
            if not seen[v]:
                seen[v] = True
                if match_r[v] < 0 or augment(match_r[v], seen):
                    match_l[u] = v
                    match_r[v] = u
                    return True
        return False

    for u in range(g.n):
        augment(u, [False] * g.n)
    return Matching(tuple(match_l))


def _apply_edge(m: Matching, u: int, v: int) -> Matching:
    """One transition of the matching walk given the picked edge (u, v).

    perfect and (u,v) in M        -> drop the edge
    near-perfect, u and v unmatched -> add the edge
    near-perfect, u matched to w, v unmatched -> add (u,v), drop (u,w)
    near-perfect, v matched to w, u unmatched -> add (u,v), drop (w,v)
    otherwise stay.
    """
    pairing = list(m.pairing)
    if m.is_perfect:
        if pairing[u] == v:
            pairing[u] = -1
            return Matching(tuple(pairing))
        return m
    u_partner = pairing[u]
    v_partner = next((i for i, j in enumerate(pairing) if j == v), -1)
    if u_partner < 0 and v_partner < 0:
        pairing[u] = v
        return Matching(tuple(pairing))
    if u_partner >= 0 and v_partner < 0:
        pairing[u] = v
        return Matching(tuple(pairing))
    if u_partner < 0 and v_partner >= 0:
        pairing[v_partner] = -1
        pairing[u] = v
        return Matching(tuple(pairing))
    return m


def broder_step(
    g: BipartiteGraph,
    current: Matching,
    rng: RandomSource | np.random.Generator,
) -> Matching:
    """One step of the matching walk: pick an edge uniformly, apply the rule."""
    if current.n != g.n or not (current.is_perfect or current.is_near_perfect):
        raise InvalidState("state must be a perfect or near-perfect matching of g")
    gen = as_generator(rng)
    u, v = g.edges[int(gen.integers(len(g.edges)))]
    return _apply_edge(current, u, v)


def broder_state_space(g: BipartiteGraph) -> list[Matching]:
    """Canonically ordered state list: perfect matchings first, then
    near-perfect, each sorted by pairing tuple."""
    perfect, near = enumerate_matchings(g)
    return sorted(perfect, key=lambda m: m.pairing) + sorted(near, key=lambda m: m.pairing)


def broder_chain_explicit(g: BipartiteGraph) -> tuple[FiniteChain, list[Matching]]:
    """Materialize the matching walk over perfect plus near-perfect matchings.

    Raises NotConnected when the walk is reducible on this graph (connectivity
    is detected, not assumed).
    """
    states = broder_state_space(g)
    if not states:
        raise NoPerfectMatching("graph has no perfect or near-perfect matchings")
    if len(states) > CHAIN_STATE_GUARD:
        raise TooLarge(f"{len(states)} matchings exceed the chain guard ({CHAIN_STATE_GUARD})")
    index = {m.pairing: k for k, m in enumerate(states)}
    N = len(states)
    P = np.zeros((N, N))
    p_edge = 1.0 / len(g.edges)
    for k, m in enumerate(states):
        for (u, v) in g.edges:
            nxt = _apply_edge(m, u, v)
            P[k, index[nxt.pairing]] += p_edge
    labels = tuple(
        "P:" + ",".join(f"{i}-{j}" for i, j in sorted(m.edge_set))
        if m.is_perfect
        else "N:" + ",".join(f"{i}-{j}" for i, j in sorted(m.edge_set))
        + f"|holes{m.holes}"
        for m in states
    )
    chain = FiniteChain(P, labels=labels)
    if not chain.is_strongly_connected():
        raise NotConnected("matching walk is reducible on this graph")
    return chain, states


def near_perfect_ratio(g: BipartiteGraph) -> float:
    """|near-perfect| / |perfect|; inf when there is no perfect matching."""
    perfect, near = enumerate_matchings(g)
    if not perfect:
        return math.inf
    return len(near) / len(perfect)


def _near_perfect_start(g: BipartiteGraph) -> Matching:
    m = maximum_matching(g)
    if m.size < g.n - 1:
        raise NoPerfectMatching("graph has no near-perfect matching to start from")
    if m.is_perfect:
        pairing = list(m.pairing)
        pairing[0] = -1
        return Matching(tuple(pairing))
    return m


def sample_perfect_rejection(
    g: BipartiteGraph,
    steps_per_trial: int,
    max_trials: int,
    rng: RandomSource | np.random.Generator,
) -> Matching:
    """Run the matching walk and accept when the endpoint is perfect.

    The walk continues from its current state across trials, so later trials
    start closer to stationarity.
    """
    if max_trials < 1:
        raise RejectionBudgetExhausted("max_trials must be >= 1")
    if maximum_matching(g).size < g.n:
        raise NoPerfectMatching("graph has no perfect matching")
    gen = as_generator(rng)
    state = _near_perfect_start(g)
    for _ in range(max_trials):
        for _ in range(steps_per_trial):
            state = broder_step(g, state, gen)
        if state.is_perfect:
            return state
    raise RejectionBudgetExhausted(
        f"no perfect matching accepted in {max_trials} trials"
    )


# ---------------------------------------------------------------------------
# Batched matching walk: many independent walkers advanced with numpy, used
# by the permanent estimator.  The per-edge rule is identical to _apply_edge
# (cross-checked in tests).
# ---------------------------------------------------------------------------

class _BatchWalk:
    def __init__(self, g: BipartiteGraph, width: int, rng: np.random.Generator):
        self.g = g
        self.n = g.n
        self.width = width
        self.gen = rng
        self.eu = np.array([e[0] for e in g.edges], dtype=np.int64)
        self.ev = np.array([e[1] for e in g.edges], dtype=np.int64)
        start = _near_perfect_start(g)
        self.match_l = np.tile(np.array(start.pairing, dtype=np.int64), (width, 1))
        self.match_r = np.full((width, self.n), -1, dtype=np.int64)
        rows = np.arange(width)
        for i, j in enumerate(start.pairing):
            if j >= 0:
                self.match_r[rows, j] = i

    def step(self, times: int = 1) -> None:
        for _ in range(times):
            self._apply_fixed_edges(self.gen.integers(len(self.eu), size=self.width))

    def _apply_fixed_edges(self, e: np.ndarray) -> None:
        rows = np.arange(self.width)
        u = self.eu[e]
        v = self.ev[e]
        pu = self.match_l[rows, u]          # right partner of u (or -1)
        pv = self.match_r[rows, v]          # left partner of v (or -1)
        perfect = (self.match_l >= 0).all(axis=1)
        # perfect and edge present: drop it
        drop = perfect & (pu == v)
        r = rows[drop]
        self.match_l[r, u[drop]] = -1
        self.match_r[r, v[drop]] = -1
        near = ~perfect
        # both endpoints unmatched: add the edge
        add = near & (pu < 0) & (pv < 0)
        r = rows[add]
        self.match_l[r, u[add]] = v[add]
        self.match_r[r, v[add]] = u[add]
        # u matched to w, v unmatched: shift u's partner to v
        shift_u = near & (pu >= 0) & (pv < 0)
        r = rows[shift_u]
        self.match_r[r, pu[shift_u]] = -1
        self.match_l[r, u[shift_u]] = v[shift_u]
        self.match_r[r, v[shift_u]] = u[shift_u]
        # v matched to w, u unmatched: shift v's partner to u
        shift_v = near & (pu < 0) & (pv >= 0)
        r = rows[shift_v]
        self.match_l[r, pv[shift_v]] = -1
        self.match_l[r, u[shift_v]] = v[shift_v]
        self.match_r[r, v[shift_v]] = u[shift_v]

    def perfect_rows(self) -> np.ndarray:
        return (self.match_l >= 0).all(axis=1)


def permanent_estimate(
    A: np.ndarray,
    eps: float,
    rng: RandomSource | np.random.Generator,
    walkers: int = 256,
) -> dict:
    """Sampling-based permanent estimator for dense 0-1 matrices.

    Counting is reduced to sampling by edge-fraction self-reducibility: the
    fraction f of uniform perfect matchings containing a fixed edge (0, j)
    satisfies per(A) = per(A contracted on that edge) / f.  At each level the
    edge with the largest empirical fraction is chosen (f >= 1/deg keeps the
    per-level variance bounded) and the telescoped product of 1/f-hat is
    returned.  Samples come from thinned batched matching-walk trajectories
    with rejection to perfect states.

    Returns {"estimate", "samples_used", "levels"}.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch("matrix must be square")
    if not np.isin(A, (0, 1)).all():
        raise InvalidState("matrix entries must be 0 or 1")
    if A.shape[0] > ENUMERATION_GUARD:
        raise TooLarge(f"n={A.shape[0]} exceeds the desk-scale guard ({ENUMERATION_GUARD})")
    if not dense_check(A):
        raise NotDense("every row must have at least n/2 ones")
    if eps <= 0:
        raise ValueError("eps must be positive")
    gen = as_generator(rng)
    current = A.astype(np.int64).copy()
    estimate = 1.0
    samples_used = 0
    levels = []
    while current.shape[0] > 1:
        g = BipartiteGraph.from_matrix(current)
        if maximum_matching(g).size < g.n:
            raise NoPerfectMatching("no perfect matching at an estimator level")
        n_lvl = g.n
        # Sample budget: per-level relative variance about (1/f - 1)/m, summed
        # over the n-1 levels; the 12/eps^2 scaling keeps the total comfortably
        # inside eps at constant confidence for desk-scale n.
        target = max(600, math.ceil(12.0 * (n_lvl - 1) / (eps * eps)))
        counts = np.zeros(n_lvl, dtype=np.int64)
        total = 0
        walk = _BatchWalk(g, walkers, gen)
        thin = max(4, len(g.edges) // 2)
        walk.step(10 * len(g.edges))  # burn-in
        while total < target:
            walk.step(thin)
            rows = np.nonzero(walk.perfect_rows())[0]
            if rows.size:
                partners = walk.match_l[rows, 0]
                np.add.at(counts, partners, 1)
                total += rows.size
        j_star = int(np.argmax(counts))
        f_hat = counts[j_star] / total
        estimate /= f_hat
        samples_used += total
        levels.append({"n": n_lvl, "edge": (0, j_star), "fraction": float(f_hat),
                       "samples": int(total)})
        keep = [i for i in range(n_lvl) if i != 0]
        keep_c = [j for j in range(n_lvl) if j != j_star]
        current = current[np.ix_(keep, keep_c)]
    if current[0, 0] != 1:
        raise NoPerfectMatching("contracted instance has a zero final entry")
    return {"estimate": float(estimate), "samples_used": int(samples_used),
            "levels": levels}


# ---------------------------------------------------------------------------
# Modified hole weights and the reweighted walk.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModifiedWeights:
    """Hole weights w'(u, v) = (total weight of perfect matchings) /
    (total weight of near-perfect matchings with holes (u, v)), computed
    exactly by enumeration.  Hole patterns with no near-perfect matching have
    no w' (it is undefined there); they are listed in ``empty_holes`` and
    never occur as walk states."""

    w_prime: dict  # (left hole, right hole) -> float
    empty_holes: tuple = ()

    def modified_weight(self, m: Matching, g: BipartiteGraph) -> float:
        """w'(M): the plain weight for perfect M, w(M) w'(u, v) for holes (u, v)."""
        base = m.weight(g)
        if m.is_perfect:
            return base
        holes = m.holes
        if holes is None:
            raise InvalidState("matching is neither perfect nor near-perfect")
        return base * self.w_prime[holes]


def jsv_modified_weights(g: BipartiteGraph, strict: bool = False) -> ModifiedWeights:
    """Exact hole weights from enumerated matching-weight sums.

    With strict=True, any hole pattern without a near-perfect matching raises
    EmptyHoleClass instead of being reported in the result.
    """
    perfect, near = enumerate_matchings(g)
    if not perfect:
        raise NoPerfectMatching("modified weights need at least one perfect matching")
    w_perfect = sum(m.weight(g) for m in perfect)
    sums: dict = {}
    for m in near:
        sums[m.holes] = sums.get(m.holes, 0.0) + m.weight(g)
    missing = tuple(
        (u, v) for u in range(g.n) for v in range(g.n) if (u, v) not in sums
    )
    if missing and strict:
        raise EmptyHoleClass(f"no near-perfect matching for hole patterns {missing}")
    return ModifiedWeights(w_prime={k: w_perfect / s for k, s in sums.items()},
                           empty_holes=missing)


def jsv_weighted_chain(
    g: BipartiteGraph, mw: ModifiedWeights
) -> tuple[FiniteChain, list[Matching], np.ndarray]:
    """Metropolis filter of the matching walk targeting the modified weights.

    The plain walk is symmetric (uniform stationary), so filtering with
    F = w'(M) makes the stationary distribution proportional to w'(M).
    Returns (chain, states, weights table aligned with states).
    """
    base, states = broder_chain_explicit(g)
    F = np.array([mw.modified_weight(m, g) for m in states])
    return metropolize(base, F), states, F


# ---------------------------------------------------------------------------
# Matrix input: {"n": n, "A": [[0/1,...],...]} or {"edges": [[i,j,w],...]}
# ---------------------------------------------------------------------------

def load_matrix_json(text: str) -> BipartiteGraph:
    doc = json.loads(text)
    if "A" in doc:
        A = np.asarray(doc["A"])
        if "n" in doc and int(doc["n"]) != A.shape[0]:
            raise ValueError("'n' does not match the matrix size")
        return BipartiteGraph.from_matrix(A)
    if "edges" in doc:
        rows = doc["edges"]
        edges = tuple((int(r[0]), int(r[1])) for r in rows)
        weights = None
        if rows and len(rows[0]) > 2:
            weights = tuple(float(r[2]) for r in rows)
        n = doc.get("n")
        if n is None:
            n = 1 + max(max(i for i, _ in edges), max(j for _, j in edges))
        return BipartiteGraph(n=int(n), edges=edges, weights=weights)
    raise ValueError("matrix file must contain 'A' or 'edges'")
