"""Command-line front end.

One subcommand per module pipeline; reports are canonical JSON (sorted keys)
or flattened CSV on stdout, byte-identical for identical (input, flags,
seed).  Wall time goes to stderr so the report stream stays reproducible.
With --figures DIR, each run also renders a matplotlib summary figure.

Exit codes: 0 success, 2 usage error, 3 missing or invalid input file,
4 domain guard (TooLarge, NotErgodic, ...).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import chains, coupling, diagnostics, geometry, ising, matchings
from .errors import RapidmixError, UnsupportedFormat
from .rng import RandomSource

DEFAULT_SEED = 1729

_USAGE_EXIT = 2
_INPUT_EXIT = 3
_DOMAIN_EXIT = 4

_DEFAULTS = {
    "spectrum": {"steps": 50},
    "conductance": {},
    "mix": {"steps": 50, "eps": 1e-3},
    "couple": {"steps": 50, "trials": 2000},
    "permanent": {"eps": 0.1},
    "ising": {},
    "subgraph": {"steps": 1, "trials": 20000},
    "volume": {"eps": 0.1},
    "walk": {"steps": 10000, "delta": 0.1},
}


@dataclass
class RunSpec:
    subcommand: str
    input_path: str
    seed: int
    steps: int | None
    trials: int | None
    eps: float | None
    delta: float | None
    fmt: str
    output: str | None
    figures: str | None
    kind: str = "ball"


@dataclass
class Report:
    subcommand: str
    input_digest: str
    seed: int
    results: dict
    wall_time_ms: float


def parse_args(argv: list[str]) -> RunSpec:
    parser = argparse.ArgumentParser(
        prog="rapidmix",
        description="Markov-chain mixing diagnostics and samplers",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _DEFAULTS:
        p = sub.add_parser(name)
        p.add_argument("input", help="input JSON file")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--steps", type=int, default=_DEFAULTS[name].get("steps"))
        p.add_argument("--trials", type=int, default=_DEFAULTS[name].get("trials"))
        p.add_argument("--eps", type=float, default=_DEFAULTS[name].get("eps"))
        p.add_argument("--delta", type=float, default=_DEFAULTS[name].get("delta"))
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--output", default=None)
        p.add_argument("--figures", default=None, help="directory for PNG figures")
        if name == "walk":
            p.add_argument("--kind", choices=("ball", "coordinate", "metropolis"),
                           default="ball")
    ns = parser.parse_args(argv)
    return RunSpec(
        subcommand=ns.subcommand,
        input_path=ns.input,
        seed=ns.seed,
        steps=ns.steps,
        trials=ns.trials,
        eps=ns.eps,
        delta=ns.delta,
        fmt=ns.format,
        output=ns.output,
        figures=ns.figures,
        kind=getattr(ns, "kind", "ball"),
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def emit_report(report: Report, fmt: str = "json") -> str:
    """Canonical serialization; wall time is deliberately excluded so output
    bytes depend only on (input, flags, seed)."""
    doc = {
        "subcommand": report.subcommand,
        "input_digest": report.input_digest,
        "seed": report.seed,
        "results": _jsonable(report.results),
    }
    if fmt == "json":
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        numeric = {
            k: v
            for k, v in sorted(doc["results"].items())
            if isinstance(v, (int, float)) and not isinstance(v, bool)
        }
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["subcommand", "seed", *numeric.keys()])
        writer.writerow([doc["subcommand"], doc["seed"], *numeric.values()])
        return buf.getvalue()
    raise UnsupportedFormat(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# Command handlers: each returns (results dict, payload for figures).
# ---------------------------------------------------------------------------

def _cmd_spectrum(text: str, spec: RunSpec):
    chain = chains.load_chain_json(text)
    s = diagnostics.spectral_summary(chain)
    horizon = spec.steps or 50
    bound = [[t, diagnostics.tv_bound_thm1(s, t)] for t in range(horizon + 1)]
    pi = chains.stationary(chain)
    Pt = np.eye(chain.n_states)
    dist = []
    for t in range(horizon + 1):
        dist.append([t, float(np.abs(Pt - pi.probs[None, :]).sum(axis=1).max())])
        Pt = Pt @ chain.transition
    results = {"lambda2": s.lambda2, "lambdaN": s.lambdaN, "pi0": s.pi0,
               "bound_curve": bound}
    return results, {"distance_curve": dist}


def _cmd_conductance(text: str, spec: RunSpec):
    chain = chains.load_chain_json(text)
    profile = diagnostics.global_conductance(chain, include_psi=True)
    s = diagnostics.spectral_summary(chain)
    cheeger = diagnostics.cheeger_check(chain)
    bcf = diagnostics.build_bcf(profile, profile.pi0)
    bound = diagnostics.avcond_mixing_bound(bcf, profile.pi0)
    tau = chains.mixing_time_exact(chain)
    results = {
        "phi": profile.global_phi,
        "phi_asymmetric_range": profile.phi_asymmetric,
        "lambda2": s.lambda2,
        "lambdaN": s.lambdaN,
        "pi0": s.pi0,
        "cheeger": {"lower": cheeger.lower, "upper": cheeger.upper,
                    "holds": cheeger.holds},
        "psi": {"breakpoints": bcf.breakpoints.tolist(),
                "values": bcf.values.tolist()},
        "avcond_bound": bound,
        "mixing_time": tau,
    }
    return results, {"mass": profile.mass, "phi": profile.phi}


def _cmd_mix(text: str, spec: RunSpec):
    chain = chains.load_chain_json(text)
    tau = chains.mixing_time_exact(chain)
    eps = spec.eps or 1e-3
    amplified_t = max(0, math.ceil(tau * math.log(1.0 / eps))) if eps < 1 else 0
    holds = diagnostics.amplified_mixing_check(chain, eps)
    pi = chains.stationary(chain)
    horizon = max(spec.steps or 50, 2 * tau)
    worst_start = int(np.argmin(pi.probs))
    report = diagnostics.entropy_decay_report(
        chain, chains.Distribution.point_mass(chain.n_states, worst_start), horizon
    )
    Pt = np.eye(chain.n_states)
    dist = []
    for t in range(horizon + 1):
        dist.append([t, float(np.abs(Pt - pi.probs[None, :]).sum(axis=1).max())])
        Pt = Pt @ chain.transition
    results = {
        "mixing_time": tau,
        "amplified": {"eps": eps, "t": amplified_t, "holds": holds},
        "entropy": [[t, e, r] for t, e, r in report.rows],
        "entropy_alpha_hat": report.alpha_hat,
        "distance_curve": dist,
    }
    return results, {}


def _cmd_couple(text: str, spec: RunSpec):
    doc = json.loads(text)
    seed = RandomSource(spec.seed)
    if isinstance(doc, dict) and doc.get("type") == "hypercube":
        n = int(doc["n"])
        rule = coupling.hypercube_coupling_rule(n)
        chain = rule.chain
        x0, y0 = 0, (1 << n) - 1
    else:
        chain = chains.load_chain_json(text)
        rule = coupling.independent_coupling(chain)
        x0, y0 = 0, chain.n_states - 1
    metric = coupling.PathMetricGraph.from_chain(chain)
    contraction = coupling.path_contraction_factor(rule, metric, rng=seed.derive(1))
    t_max = spec.steps or 50
    trials = spec.trials or 2000
    curve = coupling.meet_failure_curve(rule, x0, y0, t_max, trials, seed.derive(2))
    measured = [[t, c.p_hat, c.standard_error] for t, c in enumerate(curve)]
    bound_curve = None
    if contraction.beta_pc < 1.0:
        bound_curve = [
            [t, coupling.path_coupling_bound(metric.diameter, contraction.beta_pc, t)]
            for t in range(t_max + 1)
        ]
    results = {
        "beta_pc": contraction.beta_pc,
        "beta_exact": contraction.exact,
        "diameter": metric.diameter,
        "bound_curve": bound_curve,
        "measured": measured,
        "start_pair": [x0, y0],
    }
    return results, {}


def _cmd_permanent(text: str, spec: RunSpec):
    g = matchings.load_matrix_json(text)
    A = g.adjacency
    est = matchings.permanent_estimate(A, spec.eps or 0.1, RandomSource(spec.seed))
    results = {
        "estimate": est["estimate"],
        "samples_used": est["samples_used"],
        "seed": spec.seed,
    }
    if A.shape[0] <= matchings.PERMANENT_GUARD:
        exact = matchings.permanent_exact(A)
        results["exact"] = exact
        results["rel_error"] = abs(est["estimate"] - exact) / exact if exact else None
    return results, {"levels": est["levels"]}


def _cmd_ising(text: str, spec: RunSpec):
    problem = ising.load_ising_json(text)
    Z = ising.partition_exact(problem)
    results = {"n": problem.n, "beta": problem.beta, "B": problem.B, "Z": Z}
    if problem.beta > 0:
        results["free_energy"] = -math.log(Z) / problem.beta
    payload = {}
    if problem.n <= 14:
        codes = np.arange(1 << problem.n, dtype=np.int64)
        spins = (((codes[:, None] >> np.arange(problem.n)[None, :]) & 1) * 2 - 1).astype(float)
        inter = np.einsum("si,ij,sj->s", spins, problem.V, spins)
        payload["energies"] = (-inter - problem.B * spins.sum(axis=1)).tolist()
        results["ground_energy"] = float(min(payload["energies"]))
    return results, payload


def _cmd_subgraph(text: str, spec: RunSpec):
    world = ising.load_world_json(text)
    steps = spec.steps or 1
    count = spec.trials or 20000
    report = ising.sample_subgraphs(world, steps, count, RandomSource(spec.seed))
    results = {
        "samples": count,
        "steps": steps,
        "l1_vs_exact": report.l1_vs_exact,
        "seed": spec.seed,
    }
    payload = {}
    if report.empirical is not None:
        table = ising.subgraph_weight_table(world)
        payload["empirical"] = report.empirical
        payload["exact"] = table / table.sum()
    return results, payload


def _cmd_volume(text: str, spec: RunSpec):
    body = geometry.load_body_json(text)
    est = geometry.volume_estimate(body, spec.eps or 0.1, RandomSource(spec.seed))
    results = {
        "volume": est["volume"],
        "phases": est["phases"],
        "samples_per_phase": est["samples_per_phase"],
        "seed": spec.seed,
    }
    if body.kind == "cube":
        exact = float(np.prod(body.data["high"] - body.data["low"]))
        results["exact"] = exact
        results["rel_error"] = abs(est["volume"] - exact) / exact
    elif body.kind == "ball":
        exact = geometry.ball_volume(body.dimension, body.data["radius"])
        results["exact"] = exact
        results["rel_error"] = abs(est["volume"] - exact) / exact
    return results, {}


def _cmd_walk(text: str, spec: RunSpec):
    body = geometry.load_body_json(text)
    config = geometry.WalkConfig(delta=spec.delta or 0.1, steps=spec.steps or 10000,
                                 seed=spec.seed)
    F = None
    if spec.kind == "metropolis":
        F = geometry.LogConcaveDensity(lambda x: math.exp(-float(np.sum(x))))
    result = geometry.run_walk(body, config, kind=spec.kind, F=F)
    results = {
        "kind": spec.kind,
        "steps": config.steps,
        "delta": config.delta,
        "acceptance_rate": result.acceptance_rate,
        "mean_displacement": result.mean_displacement,
        "end_point": result.points[-1].tolist(),
        "seed": spec.seed,
    }
    return results, {"points": result.points}


_HANDLERS = {
    "spectrum": _cmd_spectrum,
    "conductance": _cmd_conductance,
    "mix": _cmd_mix,
    "couple": _cmd_couple,
    "permanent": _cmd_permanent,
    "ising": _cmd_ising,
    "subgraph": _cmd_subgraph,
    "volume": _cmd_volume,
    "walk": _cmd_walk,
}


def run_command(spec: RunSpec, text: str) -> tuple[Report, dict]:
    start = time.perf_counter()
    results, payload = _HANDLERS[spec.subcommand](text, spec)
    wall = (time.perf_counter() - start) * 1000.0
    digest = hashlib.sha256(text.encode()).hexdigest()
    return Report(subcommand=spec.subcommand, input_digest=digest, seed=spec.seed,
                  results=results, wall_time_ms=wall), payload


def _write(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def main(argv: list[str] | None = None) -> int:
    spec = parse_args(sys.argv[1:] if argv is None else argv)
    try:
        text = Path(spec.input_path).read_text()
    except OSError as exc:
        _write(json.dumps({"error": "MissingInput", "detail": str(exc)},
                          sort_keys=True) + "\n", spec.output)
        return _INPUT_EXIT
    try:
        report, payload = run_command(spec, text)
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        _write(json.dumps({"error": "InvalidInput", "detail": str(exc)},
                          sort_keys=True) + "\n", spec.output)
        return _INPUT_EXIT
    except RapidmixError as exc:
        _write(json.dumps({"error": type(exc).__name__, "detail": str(exc)},
                          sort_keys=True) + "\n", spec.output)
        return _DOMAIN_EXIT
    _write(emit_report(report, spec.fmt), spec.output)
    if spec.figures is not None:
        from . import plots

        plots.render_figures(spec.subcommand, report.results, payload,
                             Path(spec.figures))
    print(f"wall-time: {report.wall_time_ms:.1f} ms", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
