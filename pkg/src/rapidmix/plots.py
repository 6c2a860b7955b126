"""Figure rendering for CLI reports.

Each subcommand gets one PNG summarizing its result next to the JSON/CSV
stream: bound curves on log scales, per-subset conductance scatter with the
blocking step function, coupling bound versus measured meeting failure, and
occupancy histograms for the geometric walks.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

_PNG_META = {"Software": "rapidmix"}


def _save(fig, outdir: Path, name: str) -> str:
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / name
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)
    return str(path)


def render_figures(subcommand: str, results: dict, payload: dict, outdir: Path) -> list[str]:
    fn = _RENDERERS.get(subcommand)
    if fn is None:
        return []
    return fn(results, payload, Path(outdir))


def _spectrum(results: dict, payload: dict, outdir: Path) -> list[str]:
    curve = np.asarray(results["bound_curve"])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(curve[:, 0], np.maximum(curve[:, 1], 1e-300), label="eigenvalue bound")
    if "distance_curve" in payload:
        d = np.asarray(payload["distance_curve"])
        ax.semilogy(d[:, 0], np.maximum(d[:, 1], 1e-300), label="worst-start L1 distance")
    ax.set_xlabel("t")
    ax.set_ylabel("L1 distance bound")
    ax.set_title(f"lambda2={results['lambda2']:.4f}, lambdaN={results['lambdaN']:.4f}")
    ax.legend()
    fig.tight_layout()
    return [_save(fig, outdir, "spectrum.png")]


def _conductance(results: dict, payload: dict, outdir: Path) -> list[str]:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.scatter(payload["mass"], payload["phi"], s=6, alpha=0.5)
    ax1.axhline(results["phi"], color="tab:red", lw=1,
                label=f"phi={results['phi']:.4f}")
    ax1.set_xlabel("pi(S)")
    ax1.set_ylabel("escape probability")
    ax1.legend()
    b = results["psi"]["breakpoints"]
    v = results["psi"]["values"]
    xs = [0.0]
    for x in b:
        xs.append(x)
    ax2.step(xs, [v[0]] + list(v), where="pre")
    ax2.set_xlabel("set mass t")
    ax2.set_ylabel("blocking function")
    fig.tight_layout()
    return [_save(fig, outdir, "conductance.png")]


def _mix(results: dict, payload: dict, outdir: Path) -> list[str]:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    d = np.asarray(results["distance_curve"])
    ax1.semilogy(d[:, 0], np.maximum(d[:, 1], 1e-300))
    ax1.axhline(0.25, color="tab:red", lw=1, label="threshold 1/4")
    ax1.axvline(results["mixing_time"], color="tab:green", lw=1,
                label=f"tau={results['mixing_time']}")
    ax1.set_xlabel("t")
    ax1.set_ylabel("worst-start L1 distance")
    ax1.legend()
    ent = np.asarray([[row[0], row[1]] for row in results["entropy"]])
    ax2.semilogy(ent[:, 0], np.maximum(ent[:, 1], 1e-300))
    ax2.set_xlabel("t")
    ax2.set_ylabel("relative entropy")
    fig.tight_layout()
    return [_save(fig, outdir, "mix.png")]


def _couple(results: dict, payload: dict, outdir: Path) -> list[str]:
    fig, ax = plt.subplots(figsize=(6, 4))
    measured = np.asarray(results["measured"])
    ax.errorbar(measured[:, 0], measured[:, 1], yerr=3 * measured[:, 2],
                fmt=".", ms=4, label="measured Pr(X_t != Y_t), 3 SE")
    if results.get("bound_curve"):
        bound = np.asarray(results["bound_curve"])
        ax.plot(bound[:, 0], bound[:, 1], label="D beta^t")
    ax.set_yscale("log")
    ax.set_ylim(bottom=max(1e-6, measured[measured[:, 1] > 0, 1].min() / 10)
                if np.any(measured[:, 1] > 0) else 1e-6)
    ax.set_xlabel("t")
    ax.set_ylabel("meeting failure probability")
    ax.set_title(f"beta_pc={results['beta_pc']:.4f}, D={results['diameter']}")
    ax.legend()
    fig.tight_layout()
    return [_save(fig, outdir, "couple.png")]


def _permanent(results: dict, payload: dict, outdir: Path) -> list[str]:
    fig, ax = plt.subplots(figsize=(6, 4))
    fractions = [lvl["fraction"] for lvl in payload["levels"]]
    ax.bar(range(1, len(fractions) + 1), fractions)
    ax.set_xlabel("estimator level")
    ax.set_ylabel("chosen-edge fraction")
    ax.set_title(f"estimate={results['estimate']:.4g}")
    fig.tight_layout()
    return [_save(fig, outdir, "permanent.png")]


def _ising(results: dict, payload: dict, outdir: Path) -> list[str]:
    fig, ax = plt.subplots(figsize=(6, 4))
    if "energies" in payload:
        ax.hist(payload["energies"], bins=30)
        ax.set_xlabel("H(sigma)")
        ax.set_ylabel("count")
    ax.set_title(f"Z={results['Z']:.6g} (n={results['n']}, beta={results['beta']})")
    fig.tight_layout()
    return [_save(fig, outdir, "ising.png")]


def _subgraph(results: dict, payload: dict, outdir: Path) -> list[str]:
    fig, ax = plt.subplots(figsize=(7, 4))
    if "empirical" in payload:
        emp = np.asarray(payload["empirical"])
        exact = np.asarray(payload["exact"])
        idx = np.arange(emp.size)
        width = 0.4
        ax.bar(idx - width / 2, emp, width, label="empirical")
        ax.bar(idx + width / 2, exact, width, label="exact")
        ax.set_xlabel("subset mask")
        ax.set_ylabel("frequency")
        ax.legend()
    title = f"{results['samples']} samples"
    if results.get("l1_vs_exact") is not None:
        title += f", L1 vs exact = {results['l1_vs_exact']:.4f}"
    ax.set_title(title)
    fig.tight_layout()
    return [_save(fig, outdir, "subgraph.png")]


def _volume(results: dict, payload: dict, outdir: Path) -> list[str]:
    fig, ax = plt.subplots(figsize=(6, 4))
    ratios = [p["ratio"] for p in results["phases"]]
    ax.bar(range(1, len(ratios) + 1), ratios)
    ax.axhline(0.5, color="tab:red", lw=1)
    ax.set_xlabel("phase")
    ax.set_ylabel("shrink ratio")
    ax.set_title(f"volume={results['volume']:.5g}")
    fig.tight_layout()
    return [_save(fig, outdir, "volume.png")]


def _walk(results: dict, payload: dict, outdir: Path) -> list[str]:
    pts = np.asarray(payload["points"])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.hist(pts[:, 0], bins=25)
    ax1.set_xlabel("axis 0")
    ax1.set_ylabel("occupancy")
    if pts.shape[1] >= 2:
        ax2.plot(pts[:, 0], pts[:, 1], lw=0.3)
        ax2.set_xlabel("axis 0")
        ax2.set_ylabel("axis 1")
    else:
        ax2.plot(pts[:, 0], lw=0.3)
        ax2.set_xlabel("t")
        ax2.set_ylabel("position")
    fig.suptitle(f"acceptance={results['acceptance_rate']:.3f}")
    fig.tight_layout()
    return [_save(fig, outdir, "walk.png")]


_RENDERERS = {
    "spectrum": _spectrum,
    "conductance": _conductance,
    "mix": _mix,
    "couple": _couple,
    "permanent": _permanent,
    "ising": _ising,
    "subgraph": _subgraph,
    "volume": _volume,
    "walk": _walk,
}
