"""Finite-size-scaling analysis of the superfluid to Bose-glass transition.

Disorder-averaged winding curves <W^2>(Delta) at fixed (L, beta rule,
density) cross for consecutive sizes; the crossings, extrapolated in 1/L,
locate the critical disorder. With beta ~ L^2 (dynamical exponent z = 2,
taken as input) the curves should instead share a single crossing; both
rules are supported and must agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, interp1d
from scipy.optimize import brentq

from .errors import (
    AmbiguousCrossingError,
    InsufficientDataError,
    NoCrossingError,
)

BETA_RULES = ("L", "L2_OVER_16")


def beta_for(rule: str, L: int) -> float:
    if rule == "L":
        return float(L)
    if rule == "L2_OVER_16":
        return L * L / 16.0
    raise ValueError(f"unknown beta rule {rule!r}; choose from {BETA_RULES}")


@dataclass
class ScalingCurve:
    """<W^2> vs disorder bound at fixed size, beta rule, and density."""

    L: int
    beta_rule: str
    density: float
    deltas: np.ndarray
    w2: np.ndarray
    stderr: np.ndarray
    n_realizations: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.deltas = np.asarray(self.deltas, dtype=float)
        self.w2 = np.asarray(self.w2, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if not np.all(np.diff(self.deltas) > 0):
            raise ValueError("disorder grid must be strictly increasing")
        if not (self.deltas.size == self.w2.size == self.stderr.size):
            raise ValueError("curve arrays must have equal length")

    def interpolant(self, w2=None):
        w2 = self.w2 if w2 is None else w2
        if self.deltas.size >= 4:
            return CubicSpline(self.deltas, w2)
        return interp1d(self.deltas, w2, kind="linear")


@dataclass
class CrossingResult:
    delta_star: float
    err: float
    pair: tuple[int, int]
    n_bootstrap_ok: int = 0


@dataclass
class CriticalPoint:
    """Extrapolated critical disorder at one density."""

    density: float
    delta_c: float
    err: float
    mode: str
    intersections: list = field(default_factory=list)
    residual: float = 0.0
    diagnostics: dict = field(default_factory=dict)


def _find_crossings(fa, fb, lo, hi, n_grid=512):
    """Sign changes of fa - fb on [lo, hi]; exact zeros without a sign
    change (e.g. identical curves) do not count as crossings."""
    xs = np.linspace(lo, hi, n_grid)
    h = np.asarray(fa(xs) - fb(xs), dtype=float)
    nz = np.flatnonzero(h != 0.0)
    roots = []
    for a, b in zip(nz[:-1], nz[1:]):
        if h[a] * h[b] < 0:
            roots.append(
                float(brentq(lambda x: float(fa(x) - fb(x)), xs[a], xs[b]))
            )
    # collapse near-duplicates from grid boundaries
    dedup: list[float] = []
    for r in roots:
        if not dedup or abs(r - dedup[-1]) > (hi - lo) * 1e-6:
            dedup.append(r)
    return dedup


def intersection(
    curve_a: ScalingCurve,
    curve_b: ScalingCurve,
    bootstrap: int = 256,
    bootstrap_seed: int = 1,
) -> CrossingResult:
    """Crossing of two sizes' curves, with a parametric-bootstrap error.

    Raises NoCrossingError when the difference never changes sign on the
    overlap, AmbiguousCrossingError (listing all) when it does more than
    once.
    """
    if curve_a.L == curve_b.L:
        raise ValueError("curves must belong to different system sizes")
    lo = max(curve_a.deltas.min(), curve_b.deltas.min())
    hi = min(curve_a.deltas.max(), curve_b.deltas.max())
    if hi <= lo:
        raise NoCrossingError("curves do not overlap in the disorder bound")
    fa = curve_a.interpolant()
    fb = curve_b.interpolant()
    roots = _find_crossings(fa, fb, lo, hi)
    if not roots:
        raise NoCrossingError(
            f"no sign change between L={curve_a.L} and L={curve_b.L} on "
            f"[{lo}, {hi}]"
        )
    if len(roots) > 1:
        raise AmbiguousCrossingError(roots)
    center = roots[0]

    rng = np.random.Generator(np.random.PCG64(bootstrap_seed))
    samples = []
    for _ in range(bootstrap):
        wa = curve_a.w2 + rng.standard_normal(curve_a.w2.size) * curve_a.stderr
        wb = curve_b.w2 + rng.standard_normal(curve_b.w2.size) * curve_b.stderr
        try:
            r = _find_crossings(curve_a.interpolant(wa), curve_b.interpolant(wb), lo, hi)
        except Exception:
            continue
        if len(r) == 1:
            samples.append(r[0])
        elif len(r) > 1:
            samples.append(min(r, key=lambda x: abs(x - center)))
    err = float(np.std(samples, ddof=1)) if len(samples) > 3 else float("nan")
    return CrossingResult(
        delta_star=float(center),
        err=err,
        pair=(curve_a.L, curve_b.L),
        n_bootstrap_ok=len(samples),
    )


def consecutive_intersections(
    curves: list[ScalingCurve], bootstrap: int = 256, bootstrap_seed: int = 1
) -> list[CrossingResult]:
    ordered = sorted(curves, key=lambda c: c.L)
    out = []
    for a, b in zip(ordered[:-1], ordered[1:]):
        out.append(
            intersection(a, b, bootstrap=bootstrap, bootstrap_seed=bootstrap_seed)
        )
    return out


def extrapolate_critical(
    intersections,
    mode: str = "linear",
    density: float = float("nan"),
    drop_smallest: bool = False,
) -> CriticalPoint:
    """Infinite-size critical disorder from pairwise crossings.

    mode='linear' fits Delta*(1/L) with weights 1/err^2 (L is the mean of
    the pair); mode='constant' is the weighted mean. `drop_smallest`
    excludes the crossing involving the smallest size (out of the scaling
    regime).
    """
    items = []
    for it in intersections:
        if isinstance(it, CrossingResult):
            items.append((it.pair, it.delta_star, it.err))
        else:
            pair, d, e = it
            items.append((tuple(pair), float(d), float(e)))
    if drop_smallest and len(items) > 1:
        smallest = min(min(p) for p, _, _ in items)
        items = [x for x in items if min(x[0]) != smallest]
    if len(items) < 2:
        raise InsufficientDataError(
            f"need >= 2 usable intersections, have {len(items)}"
        )
    x = np.array([2.0 / (p[0] + p[1]) for p, _, _ in items])  # 1 / mean L
    y = np.array([d for _, d, _ in items])
    e = np.array([err for _, _, err in items], dtype=float)
    finite = np.isfinite(e) & (e > 0)
    e = np.where(finite, e, e[finite].max() if np.any(finite) else 1.0)
    e = np.maximum(e, 1e-12)
    w = 1.0 / e**2

    if mode == "constant":
        delta_c = float(np.sum(w * y) / np.sum(w))
        err = float(np.sqrt(1.0 / np.sum(w)))
        resid = float(np.sqrt(np.mean((y - delta_c) ** 2)))
    elif mode == "linear":
        # weighted LSQ for y = delta_c + m x
        W = np.sum(w)
        Wx = np.sum(w * x)
        Wy = np.sum(w * y)
        Wxx = np.sum(w * x * x)
        Wxy = np.sum(w * x * y)
        det = W * Wxx - Wx * Wx
        if det <= 0:
            raise InsufficientDataError("degenerate abscissas for linear fit")
        delta_c = float((Wxx * Wy - Wx * Wxy) / det)
        slope = float((W * Wxy - Wx * Wy) / det)
        err = float(np.sqrt(Wxx / det))
        resid = float(np.sqrt(np.mean((y - (delta_c + slope * x)) ** 2)))
    else:
        raise ValueError(f"unknown extrapolation mode {mode!r}")

    return CriticalPoint(
        density=density,
        delta_c=delta_c,
        err=err,
        mode=mode,
        intersections=items,
        residual=resid,
        diagnostics={"x": x.tolist(), "y": y.tolist(), "err": e.tolist()},
    )


def phase_diagram(
    curves_by_density: dict,
    mode: str = "linear",
    drop_smallest: bool = False,
    bootstrap: int = 256,
    bootstrap_seed: int = 1,
) -> tuple[list[CriticalPoint], dict]:
    """One CriticalPoint per density; failures are collected, not raised."""
    points = []
    failures = {}
    for density in sorted(curves_by_density):
        try:
            inters = consecutive_intersections(
                curves_by_density[density],
                bootstrap=bootstrap,
                bootstrap_seed=bootstrap_seed,
            )
            points.append(
                extrapolate_critical(
                    inters, mode=mode, density=density, drop_smallest=drop_smallest
                )
            )
        except Exception as exc:  # propagate per-density failures in the report
            failures[density] = f"{type(exc).__name__}: {exc}"
    return points, failures


def collapse_table(curves: list[ScalingCurve], delta_c: float, nu: float = 1.0):
    """Data-collapse diagnostic rows (L, delta, x=(delta-delta_c)*L^(1/nu),
    y=<W^2>); emitted for plotting only, never fitted."""
    rows = []
    for c in sorted(curves, key=lambda c: c.L):
        for d, w2, err in zip(c.deltas, c.w2, c.stderr):
            rows.append(
                (c.L, float(d), float((d - delta_c) * c.L ** (1.0 / nu)),
                 float(w2), float(err))
            )
    return rows
