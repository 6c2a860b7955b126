"""Ising oracles and the subgraph-world sampler.

The Ising energy H(sigma) = -sum_{i,j} V_ij sigma_i sigma_j - B sum_k sigma_k
runs over all ordered pairs (i, j) *including the diagonal*, exactly as the
defining display is printed (many texts restrict to i < j; every oracle and
test here shares the ordered-pair convention, so results are internally
consistent).  The partition function is the exact sum over all 2^n spin
vectors.

The subgraph world is a distribution over edge subsets T of a weighted graph
with weight mu^|odd(T)| prod_{e in T} w(e), where odd(T) is the set of
odd-degree vertices of T.  Subsets are represented as integer bitmasks over
the edge list.  The sampler is the lazy Metropolis single-edge flip: with
probability 1/2 stay, otherwise pick an edge uniformly, toggle it, and accept
with min(1, w(T')/w(T)).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .chains import FiniteChain
from .errors import BadSpinValue, DimensionMismatch, InvalidState, NonPositiveWeight, TooLarge
from .rng import RandomSource, as_generator

SPIN_GUARD = 20
WORLD_SUM_GUARD = 22
WORLD_CHAIN_GUARD = 12

SubgraphState = int  # bitmask over the world's edge list


@dataclass(frozen=True)
class IsingProblem:
    """Symmetric interaction matrix V, external field B, inverse temperature beta."""

    V: np.ndarray
    B: float
    beta: float

    def __post_init__(self):
        V = np.asarray(self.V, dtype=float)
        if V.ndim != 2 or V.shape[0] != V.shape[1]:
            raise DimensionMismatch("interaction matrix must be square")
        if np.abs(V - V.T).max() > 1e-12:
            raise InvalidState("interaction matrix must be symmetric within 1e-12")
        if self.beta < 0:
            raise InvalidState("beta must be nonnegative")
        V = V.copy()
        V.setflags(write=False)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "B", float(self.B))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def n(self) -> int:
        return self.V.shape[0]


def hamiltonian(problem: IsingProblem, sigma: np.ndarray) -> float:
    """Energy of one spin configuration (entries must be exactly +-1)."""
    s = np.asarray(sigma)
    if s.shape != (problem.n,):
        raise DimensionMismatch(f"expected {problem.n} spins, got shape {s.shape}")
    if not np.isin(s, (-1, 1)).all():
        raise BadSpinValue("spins must be -1 or +1")
    s = s.astype(float)
    return float(-(s @ problem.V @ s) - problem.B * s.sum())


def partition_exact(problem: IsingProblem) -> float:
    """Z = sum over all 2^n spin vectors of exp(-beta H(sigma))."""
    n = problem.n
    if n > SPIN_GUARD:
        raise TooLarge(f"n={n} exceeds the spin enumeration guard ({SPIN_GUARD})")
    total = 0.0
    chunk = 1 << 14
    for start in range(0, 1 << n, chunk):
        stop = min(start + chunk, 1 << n)
        codes = np.arange(start, stop, dtype=np.int64)
        spins = (((codes[:, None] >> np.arange(n)[None, :]) & 1) * 2 - 1).astype(float)
        inter = np.einsum("si,ij,sj->s", spins, problem.V, spins)
        H = -inter - problem.B * spins.sum(axis=1)
        total += float(np.exp(-problem.beta * H).sum())
    return total


@dataclass(frozen=True)
class SubgraphWorld:
    """Graph with positive edge weights and the odd-degree penalty mu."""

    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    weights: tuple[float, ...]
    mu: float

    def __post_init__(self):
        if self.n_vertices < 1:
            raise DimensionMismatch("need at least one vertex")
        seen = set()
        for (u, v) in self.edges:
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise DimensionMismatch(f"edge ({u},{v}) out of range")
            if u == v:
                raise InvalidState("self-loops are not allowed")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise InvalidState(f"duplicate edge {key}")
            seen.add(key)
        if len(self.weights) != len(self.edges):
            raise DimensionMismatch("one weight per edge required")
        if any(w <= 0 for w in self.weights):
            raise NonPositiveWeight("edge weights must be positive")
        if self.mu <= 0:
            raise NonPositiveWeight("mu must be positive")
        object.__setattr__(self, "edges", tuple((int(u), int(v)) for u, v in self.edges))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def incident_masks(self) -> tuple[int, ...]:
        masks = [0] * self.n_vertices
        for k, (u, v) in enumerate(self.edges):
            masks[u] |= 1 << k
            masks[v] |= 1 << k
        return tuple(masks)

    @staticmethod
    def uniform(n_vertices: int, edges, mu: float = 1.0, w: float = 1.0) -> "SubgraphWorld":
        edges = tuple(edges)
        return SubgraphWorld(n_vertices=n_vertices, edges=edges,
                             weights=tuple([w] * len(edges)), mu=mu)


def odd_degree_count(world: SubgraphWorld, T: SubgraphState) -> int:
    return sum(
        1 for mask in world.incident_masks if (T & mask).bit_count() % 2 == 1
    )


def subgraph_weight(world: SubgraphWorld, T: SubgraphState) -> float:
    """w(T) = mu^|odd(T)| * product of the selected edge weights."""
    if T < 0 or T >> world.n_edges:
        raise InvalidState("subset mask out of range for this edge list")
    prod = 1.0
    for k in range(world.n_edges):
        if T >> k & 1:
            prod *= world.weights[k]
    return world.mu ** odd_degree_count(world, T) * prod


def subgraph_weight_table(world: SubgraphWorld) -> np.ndarray:
    """w(T) for every subset mask (vectorized enumeration)."""
    m = world.n_edges
    if m > WORLD_SUM_GUARD:
        raise TooLarge(f"|E|={m} exceeds the subset enumeration guard ({WORLD_SUM_GUARD})")
    inc = np.zeros((m, world.n_vertices))
    for k, (u, v) in enumerate(world.edges):
        inc[k, u] = 1
        inc[k, v] = 1
    w = np.asarray(world.weights)
    out = np.empty(1 << m)
    chunk = 1 << 15
    for start in range(0, 1 << m, chunk):
        stop = min(start + chunk, 1 << m)
        masks = np.arange(start, stop, dtype=np.int64)
        bits = ((masks[:, None] >> np.arange(m)[None, :]) & 1).astype(float)
        odd = (bits @ inc) % 2
        prods = np.prod(np.where(bits > 0, w[None, :], 1.0), axis=1)
        out[start:stop] = world.mu ** odd.sum(axis=1) * prods
    return out


def subgraph_total_weight(world: SubgraphWorld) -> float:
    """Normalization sum_T w(T) over all 2^|E| subsets."""
    return float(subgraph_weight_table(world).sum())


def subgraph_chain_step(
    world: SubgraphWorld,
    T: SubgraphState,
    rng: RandomSource | np.random.Generator,
) -> SubgraphState:
    """Lazy Metropolis single-edge flip.

    Order is fixed for seed reproducibility: lazy coin, then edge pick, then
    accept coin.  The weight ratio for toggling edge k is computed locally
    from the parity change of its two endpoints.
    """
    gen = as_generator(rng)
    if gen.random() < 0.5:
        return T
    k = int(gen.integers(world.n_edges))
    ratio = _toggle_ratio(world, T, k)
    if ratio >= 1.0 or gen.random() < ratio:
        return T ^ (1 << k)
    return T


def _toggle_ratio(world: SubgraphWorld, T: SubgraphState, k: int) -> float:
    u, v = world.edges[k]
    masks = world.incident_masks
    delta_odd = 0
    for vertex in (u, v):
        if (T & masks[vertex]).bit_count() % 2 == 1:
            delta_odd -= 1  # odd endpoint becomes even
        else:
            delta_odd += 1
    if T >> k & 1:
        # removing k flips endpoint parities the same way, but the weight drops
        return world.mu ** delta_odd / world.weights[k]
    return world.mu ** delta_odd * world.weights[k]


def subgraph_chain_explicit(world: SubgraphWorld) -> FiniteChain:
    """Materialize the lazy Metropolis flip chain over all 2^|E| subsets."""
    m = world.n_edges
    if m > WORLD_CHAIN_GUARD:
        raise TooLarge(f"|E|={m} exceeds the explicit chain guard ({WORLD_CHAIN_GUARD})")
    w = subgraph_weight_table(world)
    N = 1 << m
    P = np.zeros((N, N))
    base = 0.5 / m  # lazy half times uniform edge pick
    for T in range(N):
        for k in range(m):
            T2 = T ^ (1 << k)
            P[T, T2] = base * min(1.0, w[T2] / w[T])
        P[T, T] = 1.0 - P[T].sum()
    labels = tuple(format(T, f"0{m}b")[::-1] for T in range(N))
    return FiniteChain(P, labels=labels)


@dataclass(frozen=True)
class SubgraphSampleReport:
    samples: np.ndarray          # visited subset masks, one per record
    steps_per_sample: int
    empirical: np.ndarray | None  # frequency per subset mask when enumerable
    l1_vs_exact: float | None


def sample_subgraphs(
    world: SubgraphWorld,
    steps: int,
    count: int,
    rng: RandomSource | np.random.Generator,
    start: SubgraphState = 0,
) -> SubgraphSampleReport:
    """Record ``count`` states of one trajectory, ``steps`` flips apart.

    When the subset space is enumerable the report compares the empirical
    frequencies with the exact distribution w(T)/sum w(T).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if count < 0:
        raise ValueError("count must be >= 0")
    gen = as_generator(rng)
    samples = np.empty(count, dtype=np.int64)
    T = start
    for i in range(count):
        for _ in range(steps):
            T = subgraph_chain_step(world, T, gen)
        samples[i] = T
    empirical = None
    l1 = None
    if world.n_edges <= WORLD_CHAIN_GUARD and count > 0:
        table = subgraph_weight_table(world)
        exact = table / table.sum()
        empirical = np.bincount(samples, minlength=1 << world.n_edges) / count
        l1 = float(np.abs(empirical - exact).sum())
    return SubgraphSampleReport(samples=samples, steps_per_sample=steps,
                                empirical=empirical, l1_vs_exact=l1)


# ---------------------------------------------------------------------------
# JSON inputs.
# Ising: {"n": n, "V": [[...]], "B": b, "beta": beta}
# World: {"nodes": k, "edges": [[u, v, w], ...], "mu": mu}
# ---------------------------------------------------------------------------

def load_ising_json(text: str) -> IsingProblem:
    doc = json.loads(text)
    V = np.asarray(doc["V"], dtype=float)
    if "n" in doc and int(doc["n"]) != V.shape[0]:
        raise ValueError("'n' does not match the matrix size")
    return IsingProblem(V=V, B=float(doc.get("B", 0.0)), beta=float(doc["beta"]))


def load_world_json(text: str) -> SubgraphWorld:
    doc = json.loads(text)
    rows = doc["edges"]
    edges = tuple((int(r[0]), int(r[1])) for r in rows)
    weights = tuple(float(r[2]) if len(r) > 2 else 1.0 for r in rows)
    nodes = doc.get("nodes")
    if nodes is None:
        nodes = 1 + max(max(u, v) for u, v in edges)
    return SubgraphWorld(n_vertices=int(nodes), edges=edges, weights=weights,
                         mu=float(doc.get("mu", 1.0)))
