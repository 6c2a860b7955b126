"""Geometric random walks in convex bodies given by membership oracles.

Bodies carry a membership test plus an inner radius r and outer radius R
about a center (the ball of radius r about the center lies inside the body,
the ball of radius R contains it).  Points exactly on a face count as
members.  The walks are: the ball walk (propose uniform in a delta-ball, stay
on rejection), the coordinate grid walk (2n axis neighbors at spacing delta),
and the Metropolis ball walk for log-concave densities.

Volume is estimated by the multiphase product over the nested bodies
K_i = K intersected with the ball of radius r 2^{i/n}: the innermost phase is
a known ball volume and each ratio is the fraction of walk samples of K_i
that land in K_{i-1}.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .chains import FiniteChain
from .errors import (
    BadRounding,
    CutTooLarge,
    DimensionMismatch,
    InvalidState,
    StartOutsideBody,
    TooLarge,
)
from .rng import RandomSource, as_generator

VOLUME_DIM_GUARD = 8


@dataclass(frozen=True)
class ConvexBody:
    """Membership-oracle convex body with rounding data r, R about a center."""

    dimension: int
    contains: Callable[[np.ndarray], bool]
    center: np.ndarray
    inner_radius: float
    outer_radius: float
    diameter: float
    kind: str = "oracle"
    data: dict | None = None

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.shape != (self.dimension,):
            raise DimensionMismatch("center must match the dimension")
        if not 0 < self.inner_radius <= self.outer_radius:
            raise InvalidState("need 0 < r <= R")
        object.__setattr__(self, "center", c)

    def member(self, x: np.ndarray) -> bool:
        return bool(self.contains(np.asarray(x, dtype=float)))


def cube_body(low, high) -> ConvexBody:
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)
    if low.shape != high.shape or low.ndim != 1:
        raise DimensionMismatch("low/high must be equal-length vectors")
    if np.any(high <= low):
        raise InvalidState("need low < high on every axis")
    half = (high - low) / 2
    center = (low + high) / 2
    return ConvexBody(
        dimension=low.size,
        contains=lambda x: bool(np.all(x >= low) and np.all(x <= high)),
        center=center,
        inner_radius=float(half.min()),
        outer_radius=float(np.linalg.norm(half)),
        diameter=float(np.linalg.norm(high - low)),
        kind="cube",
        data={"low": low, "high": high},
    )


def ball_body(center, radius: float) -> ConvexBody:
    center = np.asarray(center, dtype=float)
    if radius <= 0:
        raise InvalidState("radius must be positive")
    return ConvexBody(
        dimension=center.size,
        contains=lambda x: bool(np.linalg.norm(x - center) <= radius),
        center=center,
        inner_radius=float(radius),
        outer_radius=float(radius),
        diameter=float(2 * radius),
        kind="ball",
        data={"radius": float(radius)},
    )


def halfspace_body(A, b, r: float, R: float, center=None) -> ConvexBody:
    """Intersection {x : A x <= b}; the caller supplies the rounding r, R."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.shape != (A.shape[0],):
        raise DimensionMismatch("A must be (m, n) with b of length m")
    n = A.shape[1]
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    if np.any(A @ c > b):
        raise InvalidState("center must lie inside the intersection")
    return ConvexBody(
        dimension=n,
        contains=lambda x: bool(np.all(A @ x <= b)),
        center=c,
        inner_radius=float(r),
        outer_radius=float(R),
        diameter=float(2 * R),
        kind="halfspaces",
        data={"A": A, "b": b},
    )


def affine_image_body(base: ConvexBody, M, shift, r: float, R: float) -> ConvexBody:
    """Image {M x + shift : x in base}; membership inverts the map, rounding
    data is supplied by the caller."""
    M = np.asarray(M, dtype=float)
    shift = np.asarray(shift, dtype=float)
    Minv = np.linalg.inv(M)
    center = M @ base.center + shift
    return ConvexBody(
        dimension=base.dimension,
        contains=lambda x: base.member(Minv @ (x - shift)),
        center=center,
        inner_radius=float(r),
        outer_radius=float(R),
        diameter=float(2 * R),
        kind="affine",
        data={"base": base.kind},
    )


@dataclass(frozen=True)
class LogConcaveDensity:
    """Positive density on the body; log-concavity is spot-checked, not proven."""

    fn: Callable[[np.ndarray], float]

    def __call__(self, x: np.ndarray) -> float:
        return float(self.fn(np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class WalkConfig:
    delta: float
    steps: int
    seed: int = 0

    def __post_init__(self):
        if self.delta <= 0:
            raise InvalidState("step size delta must be positive")
        if self.steps < 0:
            raise InvalidState("steps must be >= 0")


def uniform_in_ball(center: np.ndarray, delta: float, rng) -> np.ndarray:
    """Uniform point in the solid delta-ball: isotropic normal direction times
    radius delta * U^(1/n)."""
    gen = as_generator(rng)
    center = np.asarray(center, dtype=float)
    n = center.size
    direction = gen.normal(size=n)
    norm = np.linalg.norm(direction)
    while norm == 0.0:
        direction = gen.normal(size=n)
        norm = np.linalg.norm(direction)
    radius = delta * gen.random() ** (1.0 / n)
    return center + direction * (radius / norm)


def ball_walk_step(body: ConvexBody, x: np.ndarray, delta: float, rng) -> np.ndarray:
    """Propose uniform in the delta-ball about x; move when inside the body."""
    x = np.asarray(x, dtype=float)
    if not body.member(x):
        raise StartOutsideBody("current point is outside the body")
    y = uniform_in_ball(x, delta, rng)
    return y if body.member(y) else x


def coordinate_walk_step(body: ConvexBody, x: np.ndarray, delta: float, rng) -> np.ndarray:
    """Pick one of the 2n coordinate neighbors at spacing delta uniformly;
    move when inside the body."""
    x = np.asarray(x, dtype=float)
    if not body.member(x):
        raise StartOutsideBody("current point is outside the body")
    gen = as_generator(rng)
    pick = int(gen.integers(2 * body.dimension))
    axis, sign = divmod(pick, 2)
    y = x.copy()
    y[axis] += delta if sign else -delta
    return y if body.member(y) else x


def metropolis_walk_step(
    body: ConvexBody, F: LogConcaveDensity, x: np.ndarray, delta: float, rng
) -> np.ndarray:
    """Ball-walk proposal filtered by min(1, F(y)/F(x)); stationary density
    proportional to F on the body."""
    x = np.asarray(x, dtype=float)
    if not body.member(x):
        raise StartOutsideBody("current point is outside the body")
    gen = as_generator(rng)
    y = uniform_in_ball(x, delta, gen)
    if not body.member(y):
        return x
    ratio = F(y) / F(x)
    if ratio >= 1.0 or gen.random() < ratio:
        return y
    return x


@dataclass(frozen=True)
class WalkResult:
    points: np.ndarray
    acceptance_rate: float
    mean_displacement: float
    histograms: list  # per-axis (bin_edges, counts)


def run_walk(
    body: ConvexBody,
    config: WalkConfig,
    kind: str = "ball",
    F: LogConcaveDensity | None = None,
    start: np.ndarray | None = None,
    bins: int = 20,
) -> WalkResult:
    """Seeded trajectory of the requested walk with an occupancy summary."""
    if kind not in ("ball", "coordinate", "metropolis"):
        raise InvalidState(f"unknown walk kind {kind!r}")
    if kind == "metropolis" and F is None:
        raise InvalidState("metropolis walk needs a density")
    x = body.center.copy() if start is None else np.asarray(start, dtype=float)
    if not body.member(x):
        raise StartOutsideBody("start point is outside the body")
    gen = RandomSource(config.seed).generator
    n = body.dimension
    steps = config.steps
    pts = np.empty((steps + 1, n))
    pts[0] = x
    accepted = 0
    # proposal randomness is drawn in blocks up front; accept coins are
    # consumed lazily, so a flat density walks exactly like the ball walk
    if kind == "coordinate":
        picks = gen.integers(2 * n, size=steps)
        for i in range(steps):
            axis, sign = divmod(int(picks[i]), 2)
            y = x.copy()
            y[axis] += config.delta if sign else -config.delta
            if body.member(y):
                x = y
                accepted += 1
            pts[i + 1] = x
    else:
        dirs = gen.normal(size=(steps, n))
        norms = np.linalg.norm(dirs, axis=1)
        norms[norms == 0.0] = 1.0
        offsets = dirs * (config.delta * gen.random(steps) ** (1.0 / n) / norms)[:, None]
        coins = gen.random(steps)
        coin_idx = 0
        fx = F(x) if kind == "metropolis" else 1.0
        for i in range(steps):
            y = x + offsets[i]
            if body.member(y):
                if kind == "ball":
                    x = y
                    accepted += 1
                else:
                    fy = F(y)
                    take = fy >= fx
                    if not take:
                        take = coins[coin_idx] < fy / fx
                        coin_idx += 1
                    if take:
                        x = y
                        fx = fy
                        accepted += 1
            pts[i + 1] = x
    rate = accepted / steps if steps else 0.0
    disp = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).mean()) if config.steps else 0.0
    histograms = []
    for axis in range(body.dimension):
        counts, edges = np.histogram(pts[:, axis], bins=bins)
        histograms.append((edges, counts))
    return WalkResult(points=pts, acceptance_rate=rate,
                      mean_displacement=disp, histograms=histograms)


def ball_volume(n: int, radius: float) -> float:
    """Closed-form volume of the n-ball."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * radius ** n


def _probe_rounding(body: ConvexBody, gen: np.random.Generator, probes: int = 64) -> None:
    """Spot-check that the ball of radius r about the center is inside the body."""
    n = body.dimension
    for _ in range(probes):
        d = gen.normal(size=n)
        d /= np.linalg.norm(d)
        p = body.center + 0.999 * body.inner_radius * d
        if not body.member(p):
            raise BadRounding("inner radius probe left the body")


def volume_estimate(
    body: ConvexBody,
    eps: float,
    rng: RandomSource | np.random.Generator,
    samples_per_phase: int | None = None,
    thin: int | None = None,
    burn_in: int | None = None,
) -> dict:
    """Multiphase volume estimate to target relative error eps.

    Phase radii follow r 2^(i/n); each ratio vol(K_{i-1})/vol(K_i) is the
    fraction of thinned ball-walk samples of K_i inside K_{i-1}, and the
    walk warm-starts each phase from the previous endpoint.

    Returns {"volume", "phases", "samples_per_phase"}.
    """
    n = body.dimension
    if n > VOLUME_DIM_GUARD:
        raise TooLarge(f"dimension {n} exceeds the desk-scale guard ({VOLUME_DIM_GUARD})")
    if eps <= 0:
        raise ValueError("eps must be positive")
    gen = as_generator(rng)
    _probe_rounding(body, gen)
    r, R, c = body.inner_radius, body.outer_radius, body.center
    m = max(0, math.ceil(n * math.log2(R / r)))
    radii = [r * 2 ** (i / n) for i in range(m + 1)]
    if samples_per_phase is None:
        samples_per_phase = max(800, math.ceil(20.0 * max(m, 1) / (eps * eps)))
    if thin is None:
        thin = max(3, n)
    if burn_in is None:
        burn_in = 60 * n
    volume = ball_volume(n, r)
    phases = []
    x = c.copy()
    outer_tol = R * (1 + 1e-9)
    for i in range(1, m + 1):
        rad = radii[i]
        prev = radii[i - 1]
        delta = max(0.35 * rad / math.sqrt(n), 0.25 * r)

        def member_phase(p, rad=rad):
            return body.member(p) and np.linalg.norm(p - c) <= rad

        if not member_phase(x):
            x = c.copy()
        # proposal randomness drawn in blocks; the walk itself is sequential
        total_steps = burn_in + thin * samples_per_phase
        dirs = gen.normal(size=(total_steps, n))
        norms = np.linalg.norm(dirs, axis=1)
        norms[norms == 0.0] = 1.0
        steps = dirs * (delta * gen.random(total_steps) ** (1.0 / n) / norms)[:, None]
        hits = 0
        k = 0
        for _ in range(burn_in):
            y = x + steps[k]
            k += 1
            if member_phase(y):
                x = y
        for _ in range(samples_per_phase):
            for _ in range(thin):
                y = x + steps[k]
                k += 1
                if member_phase(y):
                    x = y
            if np.linalg.norm(x - c) > outer_tol:
                raise BadRounding("walk sample left the outer ball")
            if np.linalg.norm(x - c) <= prev:
                hits += 1
        ratio = hits / samples_per_phase
        if ratio <= 0.0:
            raise BadRounding("phase ratio collapsed to zero; radii inconsistent")
        volume /= ratio
        phases.append({"radius": rad, "ratio": ratio})
    return {"volume": float(volume), "phases": phases,
            "samples_per_phase": int(samples_per_phase)}


# ---------------------------------------------------------------------------
# Halfspace isoperimetry checks on boxes with separable log-linear densities
# F(x) = exp(-sum_i a_i x_i): all integrals in closed form.
# ---------------------------------------------------------------------------

def _exp_integral(a: float, lo: float, hi: float) -> float:
    """Integral of exp(-a x) over [lo, hi]."""
    if a == 0.0:
        return hi - lo
    return (math.exp(-a * lo) - math.exp(-a * hi)) / a


def isoperimetry_halfspace_check(
    body: ConvexBody,
    rates,
    cuts,
    axis: int = 0,
) -> list[dict]:
    """Check boundary-mass >= (2/d) cut-mass for halfspace cuts of a box.

    The cut S = {x : x_axis <= s} must carry at most half the total mass
    (CutTooLarge otherwise).  Both sides are evaluated in closed form for the
    separable density exp(-sum a_i x_i); rates all zero gives the uniform case.
    """
    if body.kind != "cube" or body.data is None:
        raise InvalidState("halfspace isoperimetry checks run on box bodies")
    low = body.data["low"]
    high = body.data["high"]
    a = np.asarray(rates, dtype=float)
    if a.shape != (body.dimension,):
        raise DimensionMismatch("one rate per axis required")
    if not 0 <= axis < body.dimension:
        raise DimensionMismatch("cut axis out of range")
    full = [_exp_integral(a[i], low[i], high[i]) for i in range(body.dimension)]
    total_mass = math.prod(full)
    cross = math.prod(full[i] for i in range(body.dimension) if i != axis)
    d = body.diameter
    out = []
    for s in cuts:
        s = float(s)
        if not low[axis] < s < high[axis]:
            raise InvalidState(f"cut {s} outside the box on axis {axis}")
        cut_mass = _exp_integral(a[axis], low[axis], s) * cross
        if cut_mass > 0.5 * total_mass + 1e-12:
            raise CutTooLarge(
                f"cut mass {cut_mass:.6g} exceeds half of {total_mass:.6g}"
            )
        boundary = math.exp(-a[axis] * s) * cross
        rhs = (2.0 / d) * cut_mass
        out.append({
            "s": s,
            "boundary_integral": boundary,
            "rhs": rhs,
            "margin": boundary - rhs,
            "holds": bool(boundary >= rhs - 1e-12),
        })
    return out


def coordinate_grid_chain(body: ConvexBody, delta: float) -> tuple[FiniteChain, np.ndarray]:
    """Explicit chain of the coordinate walk over the delta-grid points of the
    body (grid anchored at the center), for desk-scale validation."""
    n = body.dimension
    start = tuple(np.zeros(n, dtype=np.int64))
    if not body.member(body.center):
        raise StartOutsideBody("center must belong to the body")
    seen = {start: 0}
    order = [start]
    queue = [start]
    while queue:
        node = queue.pop()
        for axis in range(n):
            for sign in (-1, 1):
                nxt = list(node)
                nxt[axis] += sign
                nxt = tuple(nxt)
                if nxt in seen:
                    continue
                point = body.center + delta * np.asarray(nxt, dtype=float)
                if body.member(point):
                    seen[nxt] = len(order)
                    order.append(nxt)
                    queue.append(nxt)
                    if len(order) > 4096:
                        raise TooLarge("grid exceeds the explicit chain guard (4096 points)")
    N = len(order)
    P = np.zeros((N, N))
    move = 1.0 / (2 * n)
    for k, node in enumerate(order):
        for axis in range(n):
            for sign in (-1, 1):
                nxt = list(node)
                nxt[axis] += sign
                j = seen.get(tuple(nxt))
                if j is None:
                    P[k, k] += move
                else:
                    P[k, j] += move
    points = body.center + delta * np.asarray(order, dtype=float)
    return FiniteChain(P), points


# ---------------------------------------------------------------------------
# Body input JSON:
#   {"type": "cube", "low": [...], "high": [...]}
#   {"type": "ball", "center": [...], "radius": rho}
#   {"type": "halfspaces", "A": [[...]], "b": [...], "r": r, "R": R,
#    "center": [...] optional}
# ---------------------------------------------------------------------------

def load_body_json(text: str) -> ConvexBody:
    doc = json.loads(text)
    kind = doc.get("type")
    if kind == "cube":
        return cube_body(doc["low"], doc["high"])
    if kind == "ball":
        return ball_body(doc["center"], float(doc["radius"]))
    if kind == "halfspaces":
        return halfspace_body(doc["A"], doc["b"], float(doc["r"]), float(doc["R"]),
                              center=doc.get("center"))
    raise ValueError(f"unknown body type {kind!r}")
