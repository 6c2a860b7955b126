"""Conductance, blocking conductance, spectral summaries, and the machine
checks for the eigenvalue distance bound, the two-sided conductance/eigenvalue
inequality, and the averaged-conductance mixing-time bound.

Subset quantities are computed exhaustively (this module is the oracle), so
state counts are guarded: 2^N enumeration for conductance, 3^N for the
blocking profile.

Two global conductance figures are reported.  ``global_phi`` minimizes the
escape probability Q(S, S-bar)/pi(S) over sets with pi(S) <= 1/2; this is the
quantity for which the two-sided eigenvalue bounds hold (on the lazy 4-cube a
mass-11/16 set has escape probability 5/44 < 1/8, which would break the lower
bound).  ``phi_asymmetric`` is the minimum of the same ratio over the wider
asymmetric range 0 < pi(S) < 3/4 and is carried in the profile for reference.
Blocking conductance uses the asymmetric range 0 < pi(S) <= 3/4 throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chains import Distribution, FiniteChain, evolve, l1_distance, mixing_time_exact
from .chains import check_reversible, relative_entropy, solve_stationary_irreducible, stationary
from .errors import (
    BadSetMass,
    DimensionMismatch,
    EmptyProfile,
    EmptySet,
    NotLazy,
    NotReversible,
    TooLarge,
    ZeroPsi,
)

SUBSET_GUARD = 22       # 2^N enumeration for conductance
PSI_PROFILE_GUARD = 14  # 3^N enumeration for the full blocking profile
SPECTRAL_GUARD = 1024
_CHUNK = 1 << 15


@dataclass(frozen=True)
class SpectralSummary:
    """Second-largest and smallest eigenvalues plus the minimum stationary mass."""

    lambda2: float
    lambdaN: float
    pi0: float


@dataclass(frozen=True)
class ConductanceProfile:
    """Per-subset ergodic flow and escape probability for every nonempty
    proper subset, indexed by bitmask (mask m is stored at position m-1)."""

    n_states: int
    mass: np.ndarray        # pi(S) per mask
    flow: np.ndarray        # Q(S, S-bar) per mask
    phi: np.ndarray         # flow / mass per mask
    psi: np.ndarray | None  # blocking conductance where pi(S) <= 3/4, else NaN
    global_phi: float       # min phi over 0 < pi(S) <= 1/2
    phi_asymmetric: float   # min phi over 0 < pi(S) < 3/4 (paper's printed range)
    pi0: float
    set_size_buckets: np.ndarray  # sorted distinct masses <= 3/4 (psi breakpoints)

    def for_set(self, subset) -> dict:
        mask = _subset_mask(subset, self.n_states)
        if mask <= 0 or mask >= (1 << self.n_states) - 1:
            raise EmptySet("subset must be nonempty and proper")
        i = mask - 1
        entry = {"mass": float(self.mass[i]), "flow": float(self.flow[i]),
                 "phi": float(self.phi[i])}
        if self.psi is not None:
            entry["psi"] = float(self.psi[i])
        return entry


@dataclass(frozen=True)
class BlockingFunction:
    """Step function psi on (0, 3/4]: piece i covers (breakpoints[i-1],
    breakpoints[i]] and takes values[i]; the last breakpoint is always 3/4."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if b.size == 0 or b.size != v.size:
            raise EmptyProfile("breakpoints and values must be nonempty and aligned")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    def value_at(self, t: float) -> float:
        if not 0.0 < t <= self.breakpoints[-1] + 1e-12:
            raise ValueError(f"t={t} outside (0, {self.breakpoints[-1]}]")
        # breakpoints are masses rounded to 12 decimals; round the query the
        # same way so equal masses land on their own piece
        t = round(min(t, float(self.breakpoints[-1])), 12)
        i = int(np.searchsorted(self.breakpoints, t, side="left"))
        return float(self.values[min(i, self.values.size - 1)])


@dataclass(frozen=True)
class CheegerReport:
    phi: float
    lambda2: float
    lower: float   # 1 - 2 phi
    upper: float   # 1 - phi^2 / 2
    holds: bool


def _subset_mask(subset, n: int) -> int:
    mask = 0
    for s in subset:
        s = int(s)
        if not 0 <= s < n:
            raise DimensionMismatch(f"state {s} out of range for {n} states")
        mask |= 1 << s
    return mask


def _subset_list(subset, n: int) -> np.ndarray:
    idx = np.asarray(sorted({int(s) for s in subset}), dtype=np.int64)
    if idx.size and (idx[0] < 0 or idx[-1] >= n):
        raise DimensionMismatch("subset index out of range")
    return idx


def spectral_summary(chain: FiniteChain, pi: Distribution | None = None) -> SpectralSummary:
    """Eigenvalues of the similarity-symmetrized matrix D^{1/2} P D^{-1/2}.

    Requires a reversible irreducible chain; for such chains these are exactly
    the eigenvalues of P.  Periodic chains are admitted (their stationary
    vector is still unique), which is how lambdaN = -1 shows up.
    """
    if chain.n_states > SPECTRAL_GUARD:
        raise TooLarge(f"{chain.n_states} states exceeds the {SPECTRAL_GUARD} guard")
    if chain.n_states < 2:
        raise DimensionMismatch("need at least 2 states for lambda2")
    if pi is None:
        pi = solve_stationary_irreducible(chain)
    if not check_reversible(chain, pi, 1e-10):
        raise NotReversible("chain is not reversible w.r.t. its stationary distribution")
    root = np.sqrt(pi.probs)
    sym = (root[:, None] / root[None, :]) * chain.transition
    ev = np.linalg.eigvalsh(0.5 * (sym + sym.T))
    return SpectralSummary(lambda2=float(ev[-2]), lambdaN=float(ev[0]),
                           pi0=float(pi.probs.min()))


def tv_bound_thm1(s: SpectralSummary, t: int) -> float:
    """Eigenvalue upper bound (1/pi0) * max(|lambda2|, |lambdaN|)^t on the
    unhalved L1 distance to stationarity after t steps."""
    if t < 0:
        raise ValueError("t must be >= 0")
    lam = max(abs(s.lambda2), abs(s.lambdaN))
    return (1.0 / s.pi0) * lam ** t


def ergodic_flow(chain: FiniteChain, pi: Distribution, S, T) -> float:
    """Q(S, T) = sum_{x in S, y in T} pi(x) P_xy."""
    n = chain.n_states
    si = _subset_list(S, n)
    ti = _subset_list(T, n)
    if si.size == 0 or ti.size == 0:
        return 0.0
    block = chain.transition[np.ix_(si, ti)]
    return float(pi.probs[si] @ block.sum(axis=1))


def conductance_of_set(chain: FiniteChain, pi: Distribution, S) -> float:
    """Escape probability Phi(S) = Q(S, S-bar) / pi(S)."""
    n = chain.n_states
    si = _subset_list(S, n)
    if si.size == 0:
        raise EmptySet("conductance needs a nonempty subset")
    mass = float(pi.probs[si].sum())
    if mass <= 0.0:
        raise EmptySet("subset carries no stationary mass")
    comp = np.setdiff1d(np.arange(n), si, assume_unique=False)
    return ergodic_flow(chain, pi, si, comp) / mass


def global_conductance(chain: FiniteChain, include_psi: bool = False) -> ConductanceProfile:
    """Exhaustive per-subset flow/escape profile over all nonempty proper
    subsets.  With include_psi, the blocking conductance of every subset with
    pi(S) <= 3/4 is computed as well (3^N work, tighter guard)."""
    n = chain.n_states
    if n > SUBSET_GUARD:
        raise TooLarge(f"{n} states exceeds the 2^N enumeration guard ({SUBSET_GUARD})")
    if include_psi and n > PSI_PROFILE_GUARD:
        raise TooLarge(f"{n} states exceeds the blocking-profile guard ({PSI_PROFILE_GUARD})")
    pi = stationary(chain)
    F = pi.probs[:, None] * chain.transition
    n_masks = (1 << n) - 2
    mass = np.empty(n_masks)
    flow = np.empty(n_masks)
    bit_cols = np.arange(n, dtype=np.int64)
    for start in range(1, n_masks + 1, _CHUNK):
        stop = min(start + _CHUNK, n_masks + 1)
        masks = np.arange(start, stop, dtype=np.int64)
        B = ((masks[:, None] >> bit_cols[None, :]) & 1).astype(float)
        m = B @ pi.probs
        inside = np.einsum("ij,ij->i", B @ F, B)
        mass[start - 1:stop - 1] = m
        flow[start - 1:stop - 1] = m - inside
    phi = flow / mass
    # Range boundaries carry a 1e-9 band: stationary masses come out of a
    # linear solve, so a set of exact mass 3/4 may compute as 0.75 - 1e-16 and
    # must still fall on the excluded side of the strict inequality.
    half = mass <= 0.5 + 1e-9
    wide = mass < 0.75 - 1e-9
    global_phi = float(phi[half].min())
    phi_asymmetric = float(phi[wide].min())
    psi = None
    if include_psi:
        psi = np.full(n_masks, np.nan)
        for mask in range(1, n_masks + 1):
            if mass[mask - 1] <= 0.75 + 1e-9:
                psi[mask - 1] = _psi_of_mask(chain, pi.probs, F, mask)
    buckets = np.unique(np.round(mass[mass <= 0.75 + 1e-9], 12))
    return ConductanceProfile(
        n_states=n, mass=mass, flow=flow, phi=phi, psi=psi,
        global_phi=global_phi, phi_asymmetric=phi_asymmetric,
        pi0=float(pi.probs.min()), set_size_buckets=buckets,
    )


def _psi_of_mask(chain: FiniteChain, pi: np.ndarray, F: np.ndarray, mask: int) -> float:
    """Exact blocking conductance of the subset encoded by ``mask``.

    Psi(S) = sup over alpha in (0, pi(S)) of
             min over B in S-bar with pi(B) <= alpha of alpha Q(S, S-bar \\ B) / pi(S)^2.

    The inner minimum is a step function of alpha with breakpoints at the
    achievable blocking masses pi(B); between breakpoints the objective grows
    linearly in alpha, so the supremum is attained by evaluating each piece at
    its right endpoint, the last piece at alpha = pi(S).
    """
    n = chain.n_states
    si = np.nonzero([(mask >> i) & 1 for i in range(n)])[0]
    co = np.nonzero([not (mask >> i) & 1 for i in range(n)])[0]
    piS = float(pi[si].sum())
    q_cols = F[np.ix_(si, co)].sum(axis=0)  # flow from S into each outside state
    total_out = float(q_cols.sum())
    k = co.size
    if k == 0:
        raise BadSetMass("subset has empty complement")
    # All blocking sets B in the complement: masses and blocked flow.
    b_masks = np.arange(1 << k, dtype=np.int64)
    bits = ((b_masks[:, None] >> np.arange(k)[None, :]) & 1).astype(float)
    b_mass = bits @ pi[co]
    b_flow = bits @ q_cols
    feasible = b_mass < piS - 1e-15
    b_mass = b_mass[feasible]
    b_flow = b_flow[feasible]
    order = np.argsort(b_mass, kind="stable")
    b_mass = b_mass[order]
    b_flow = np.maximum.accumulate(b_flow[order])  # best blockable flow by mass
    # Collapse to distinct breakpoint masses, keeping the best flow at each.
    uniq_mass, last_idx = np.unique(np.round(b_mass, 15), return_index=True)
    idx_end = np.append(last_idx[1:], b_mass.size) - 1
    best_flow = b_flow[idx_end]
    remaining = total_out - best_flow            # value of the inner min on each piece
    right_ends = np.append(uniq_mass[1:], piS)   # each piece evaluated at its right end
    return float(np.max(right_ends * remaining) / piS ** 2)


def blocking_conductance_of_set(chain: FiniteChain, pi: Distribution, S) -> float:
    """Exact Psi(S) for one subset with 0 < pi(S) <= 3/4."""
    n = chain.n_states
    if n > SUBSET_GUARD:
        raise TooLarge(f"{n} states exceeds the enumeration guard ({SUBSET_GUARD})")
    si = _subset_list(S, n)
    if si.size == 0:
        raise EmptySet("blocking conductance needs a nonempty subset")
    mass = float(pi.probs[si].sum())
    if mass <= 0.0:
        raise EmptySet("subset carries no stationary mass")
    if mass > 0.75 + 1e-9:
        raise BadSetMass(f"pi(S) = {mass} exceeds 3/4")
    F = pi.probs[:, None] * chain.transition
    return _psi_of_mask(chain, pi.probs, F, int(_subset_mask(si, n)))


def cheeger_check(chain: FiniteChain) -> CheegerReport:
    """Two-sided eigenvalue/conductance check 1 - 2 Phi <= lambda2 <= 1 - Phi^2/2
    for a lazy, ergodic, reversible chain, with 1e-9 slack."""
    if not chain.is_lazy():
        raise NotLazy("some holding probability is below 1/2; lazify first")
    profile = global_conductance(chain)
    s = spectral_summary(chain)
    lower = 1.0 - 2.0 * profile.global_phi
    upper = 1.0 - 0.5 * profile.global_phi ** 2
    holds = (lower - 1e-9 <= s.lambda2 <= upper + 1e-9)
    return CheegerReport(phi=profile.global_phi, lambda2=s.lambda2,
                         lower=lower, upper=upper, holds=bool(holds))


def build_bcf(profile: ConductanceProfile, pi0: float) -> BlockingFunction:
    """Lower step-function envelope of the blocking conductance by set mass.

    Raw bucket values min{Psi(S) : pi(S) = t} are smoothed downward (never
    raised) until psi(t) <= 2 psi(t') holds for all t <= t' <= (4/3) t, which
    keeps psi(pi(S)) <= Psi(S) sound while satisfying the technical condition.
    """
    if profile.psi is None:
        raise EmptyProfile("profile lacks blocking values; rerun with include_psi=True")
    sel = ~np.isnan(profile.psi)
    if not np.any(sel):
        raise EmptyProfile("no subsets with pi(S) <= 3/4 recorded")
    masses = np.round(profile.mass[sel], 12)
    psis = profile.psi[sel]
    breakpoints = np.unique(masses)
    values = np.array([psis[masses == b].min() for b in breakpoints])
    if breakpoints[-1] < 0.75:
        breakpoints = np.append(breakpoints, 0.75)
        values = np.append(values, values[-1])
    # Downward smoothing, right to left; piece j is reachable from piece i
    # when its open left end t_{j-1} lies below (4/3) t_i.
    for i in range(values.size - 2, -1, -1):
        reach = breakpoints[i:-1] < (4.0 / 3.0) * breakpoints[i] + 1e-15
        js = np.nonzero(reach)[0] + i + 1
        if js.size:
            values[i] = min(values[i], 2.0 * values[js].min())
    return BlockingFunction(breakpoints=breakpoints, values=values)


def avcond_mixing_bound(psi: BlockingFunction, pi0: float) -> float:
    """Averaged-conductance mixing bound 500 * integral_{pi0}^{3/4} dt /(t psi(t)),
    evaluated in closed form on each step of psi."""
    if not 0.0 < pi0 < 0.75:
        raise ValueError("pi0 must lie in (0, 3/4)")
    total = 0.0
    lo = pi0
    prev = 0.0
    for b, v in zip(psi.breakpoints, psi.values):
        seg_lo = max(lo, prev)
        seg_hi = min(b, 0.75)
        prev = b
        if seg_hi <= seg_lo:
            continue
        if v <= 0.0:
            raise ZeroPsi(f"psi vanishes on ({seg_lo}, {seg_hi}]")
        total += math.log(seg_hi / seg_lo) / v
    return 500.0 * total


@dataclass(frozen=True)
class EntropyDecayReport:
    rows: list  # (t, entropy, ratio to previous entropy or None)
    alpha_hat: float  # largest per-step ratio observed (reported, never asserted)


def entropy_decay_report(chain: FiniteChain, p0: Distribution, horizon: int) -> EntropyDecayReport:
    """Exact relative-entropy trajectory Ent(p^(t)) for t = 0..horizon."""
    pi = stationary(chain)
    rows = []
    p = p0
    prev = None
    alpha = 0.0
    for t in range(horizon + 1):
        ent = relative_entropy(p, pi)
        ratio = None
        if prev is not None and prev > 1e-300:
            ratio = ent / prev
            alpha = max(alpha, ratio)
        rows.append((t, ent, ratio))
        prev = ent
        p = evolve(chain, p, 1)
    return EntropyDecayReport(rows=rows, alpha_hat=alpha)


def amplified_mixing_check(chain: FiniteChain, eps: float) -> bool:
    """Check sum |p^(t) - pi| <= eps at t = ceil(tau * ln(1/eps)) from every
    deterministic start.  For eps >= 1 the step count clamps to 0 and eps is
    clamped to the trivial L1 bound 2, so the check is vacuously true."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    tau = mixing_time_exact(chain)
    if eps >= 1.0:
        return True
    t = max(0, math.ceil(tau * math.log(1.0 / eps)))
    pi = stationary(chain)
    Pt = np.linalg.matrix_power(chain.transition, t)
    dists = np.abs(Pt - pi.probs[None, :]).sum(axis=1)
    return bool(dists.max() <= eps)
