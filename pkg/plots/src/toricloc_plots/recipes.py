"""Figure recipes for the simulation CSV outputs.

Four kinds are supported, one per CSV schema emitted by the simulation
package: localization profiles, winding-curve crossing families,
intersection extrapolations, and the critical-disorder phase diagram.
Rendering never recomputes physics; fitted parameters are read from the
JSON sidecars produced upstream. Output is deterministic for fixed inputs:
fixed style, Agg backend, no timestamps embedded.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("profile", "crossings", "extrapolation", "phase-diagram")

EXPECTED_COLUMNS = {
    "profile": ["distance", "sup_amplitude", "realization_id"],
    "crossings": ["delta", "w2_mean", "stderr", "n_realizations"],
    "extrapolation": ["density", "L_small", "L_large", "delta_star", "err"],
    "phase-diagram": ["density", "delta_c", "err", "mode", "n_intersections"],
}

_STYLE = {
    "figure.figsize": (6.0, 4.2),
    "figure.dpi": 130,
    "savefig.dpi": 130,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "toricloc-plots",
}

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


class SchemaMismatchError(ValueError):
    """Input CSV whose header does not match the declared figure kind."""

    def __init__(self, kind, expected, got):
        missing = [c for c in expected if c not in got]
        unexpected = [c for c in got if c not in expected]
        super().__init__(
            f"CSV does not match kind {kind!r}: expected columns {expected}, "
            f"got {got}; missing {missing}, unexpected {unexpected}"
        )
        self.missing = missing
        self.unexpected = unexpected


@dataclass
class PlotRecipe:
    """What to draw: input CSVs, figure kind, output path, styling options."""

    kind: str
    inputs: list[str]
    output: str
    labels: list[str] = field(default_factory=list)
    sidecar: str | None = None  # JSON with fits from the simulation package
    title: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; one of {KINDS}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def read_table(path, kind):
    """Read one of the simulation CSVs, validating its header for `kind`."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ValueError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    if header != EXPECTED_COLUMNS[kind]:
        raise SchemaMismatchError(kind, EXPECTED_COLUMNS[kind], header)
    return body


def _label_for(recipe, i):
    if i < len(recipe.labels):
        return recipe.labels[i]
    stem = recipe.inputs[i]
    stem = stem.replace("\\", "/").rsplit("/", 1)[-1]
    return stem.rsplit(".", 1)[0]


def _render_profile(recipe, ax):
    body = read_table(recipe.inputs[0], "profile")
    pts = [(int(d), float(a)) for d, a, rid in body if rid != "mean"]
    mean = [(int(d), float(a)) for d, a, rid in body if rid == "mean"]
    if not mean:  # single-realization files may carry no explicit mean rows
        mean = pts
    if pts:
        xs, ys = zip(*pts)
        ax.semilogy(xs, np.maximum(ys, 1e-300), ".", ms=2.5, alpha=0.25,
                    color=_COLORS[0], label="realizations")
    xs, ys = zip(*mean)
    ax.semilogy(xs, np.maximum(ys, 1e-300), "o", ms=4, color=_COLORS[1],
                label="disorder mean")
    if recipe.sidecar:
        with open(recipe.sidecar) as fh:
            side = json.load(fh)
        fit = side.get("fit", {})
        if fit.get("xi_loc"):
            d = np.linspace(min(xs), max(xs), 128)
            ax.semilogy(d, fit["amplitude"] * np.exp(-d / fit["xi_loc"]),
                        "-", color="k", lw=1,
                        label=f"envelope, xi={fit['xi_loc']:.2f}")
    ax.set_xlabel("distance")
    ax.set_ylabel("sup_t |amplitude|")
    ax.legend(loc="upper right", fontsize=8)


def _render_crossings(recipe, ax):
    for i, path in enumerate(recipe.inputs):
        body = read_table(path, "crossings")
        d = np.array([float(r[0]) for r in body])
        w2 = np.array([float(r[1]) for r in body])
        err = np.array([float(r[2]) for r in body])
        ax.errorbar(d, w2, yerr=err, marker="o", ms=4, capsize=2,
                    color=_COLORS[i % len(_COLORS)], label=_label_for(recipe, i))
    ax.set_xlabel("disorder bound")
    ax.set_ylabel("winding number squared")
    ax.legend(fontsize=8)


def _render_extrapolation(recipe, ax):
    body = read_table(recipe.inputs[0], "extrapolation")
    inv_l = np.array(
        [2.0 / (float(r[1]) + float(r[2])) for r in body]
    )
    d = np.array([float(r[3]) for r in body])
    err = np.array([float(r[4]) for r in body])
    ax.errorbar(inv_l, d, yerr=err, fmt="s", ms=5, capsize=3,
                color=_COLORS[0], label="pair crossings")
    if recipe.sidecar:
        with open(recipe.sidecar) as fh:
            side = json.load(fh)
        for p in side.get("critical_points", []):
            ax.axhline(p["delta_c"], color=_COLORS[1], lw=1,
                       label=f"extrapolated: {p['delta_c']:.2f}")
            ax.axhspan(p["delta_c"] - p["err"], p["delta_c"] + p["err"],
                       color=_COLORS[1], alpha=0.15)
    ax.set_xlim(left=0)
    ax.set_xlabel("1 / mean pair size")
    ax.set_ylabel("crossing disorder")
    ax.legend(fontsize=8)


def _render_phase_diagram(recipe, ax):
    body = read_table(recipe.inputs[0], "phase-diagram")
    n = np.array([float(r[0]) for r in body])
    d = np.array([float(r[1]) for r in body])
    err = np.array([float(r[2]) for r in body])
    order = np.argsort(n)
    ax.errorbar(n[order], d[order], yerr=err[order], marker="o", ms=5,
                capsize=3, color=_COLORS[0])
    ax.set_xlabel("particle density")
    ax.set_ylabel("critical disorder")
    if len(n) > 0:
        mid_n = float(np.median(n))
        top = float(d.max() + err.max())
        ax.text(mid_n, 0.25 * top, "SF", fontsize=14, ha="center")
        ax.text(mid_n, 1.05 * top, "BG", fontsize=14, ha="center")
        ax.set_ylim(0, 1.25 * top)


_RENDERERS = {
    "profile": _render_profile,
    "crossings": _render_crossings,
    "extrapolation": _render_extrapolation,
    "phase-diagram": _render_phase_diagram,
}


def render(recipe: PlotRecipe) -> str:
    """Draw the figure and write it to recipe.output; returns the path."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        try:
            _RENDERERS[recipe.kind](recipe, ax)
            if recipe.title:
                ax.set_title(recipe.title)
            fig.savefig(recipe.output, metadata=_deterministic_metadata(
                recipe.output))
        finally:
            plt.close(fig)
    return recipe.output


def _deterministic_metadata(path):
    # Strip creator/date fields that would break byte-identical re-renders.
    if path.endswith(".png"):
        return {"Software": None}
    if path.endswith(".svg"):
        return {"Date": None, "Creator": None}
    if path.endswith((".pdf", ".ps", ".eps")):
        return {"CreationDate": None, "Creator": None, "Producer": None}
    return None
