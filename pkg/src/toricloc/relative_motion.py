"""Fixed-quasi-momentum Hamiltonians for the relative motion of a defect pair.

On the infinite lattice the pair dynamics decomposes into fibers labelled by
the total quasi-momentum k. Each fiber acts on the relative coordinate
l in Z^2: a translation-invariant part T0 built from the perturbation's
translation classes,

    T0(l, j) = c * sum_p xi_p * exp(i p2.k) * [j == l + p2 - p1],
    c = 2 / (2 pi)^4,

with p = (p1, p2) the displacement pair of the two particles, plus a
short-range inhomogeneous part near the origin. The hardcore constraint is
realized by zeroing every entry with l = 0 or j = 0; that correction is the
minimal inhomogeneous part and any additional short-range inhomogeneity can
be attached explicitly. Numerics truncate to a hard-wall box.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .dynamics import evolve
from .errors import ReflectionWarning, UnsupportedSectorError
from .geometry import LatticeGeometry, periodic_delta
from .perturbations import PerturbationTerm, single_axis_terms

PREFACTOR = 2.0 / (2.0 * np.pi) ** 4  # kept verbatim; only rescales time


@dataclass(frozen=True)
class HopClass:
    """One translation class of terms: relative displacement and coefficient."""

    displacement: tuple[int, int]
    coefficient: float


def term_classes(terms, geometry: LatticeGeometry) -> list[HopClass]:
    """Collapse a geometry-bound term list into translation classes.

    Each class is keyed by the canonical relative layout of its support;
    only single-path terms (edge sets with exactly two odd-degree sites) are
    admitted. Closed-loop terms shift the diagonal by a constant and are
    dropped; four-endpoint terms would move both particles at once and are
    rejected.
    """
    if not single_axis_terms(terms, "z"):
        raise UnsupportedSectorError("fiber construction expects Z-only terms")
    classes: dict[tuple, tuple[tuple[int, int], float]] = {}
    L = geometry.L
    for t in terms:
        edges = t.edges()
        # canonical layout: offsets (d, dx, dy) relative to each candidate
        # anchor edge; the lexicographically smallest wins, so translates
        # and support reorderings land on one key
        dxys = [geometry.edge_dxy(e) for e in edges]
        layout = min(
            tuple(sorted((d, (x - x0) % L, (y - y0) % L) for d, x, y in dxys))
            for _, x0, y0 in dxys
        )
        boundary = sorted(geometry.edge_boundary_stars(edges))
        if len(boundary) == 0:
            continue
        if len(boundary) != 2:
            raise UnsupportedSectorError(
                "fiber construction supports terms whose edge set has exactly "
                f"two endpoints; got {len(boundary)} for support {t.support}"
            )
        disp = periodic_delta(boundary[0], boundary[1], L)
        if disp < (0, 0):
            disp = (-disp[0], -disp[1])
        key = layout
        if key in classes:
            prev_disp, prev_xi = classes[key]
            if abs(prev_xi - t.coefficient) > 1e-12 * max(1.0, abs(prev_xi)):
                raise ValueError(
                    "terms are not translation invariant: class "
                    f"{key} has coefficients {prev_xi} and {t.coefficient}"
                )
        else:
            classes[key] = (disp, t.coefficient)
    return [HopClass(d, xi) for d, xi in classes.values()]


def _box_index(radius: int):
    side = 2 * radius + 1

    def flat(lx: int, ly: int) -> int:
        return (lx + radius) * side + (ly + radius)

    return side, flat


@dataclass
class FiberHamiltonian:
    """Truncated fiber at quasi-momentum k: T0 plus inhomogeneous part."""

    k: tuple[float, float]
    box_radius: int
    classes: list[HopClass]
    t0: sp.csr_matrix = field(repr=False)
    ti: sp.csr_matrix = field(repr=False)

    @property
    def side(self) -> int:
        return 2 * self.box_radius + 1

    @property
    def dim(self) -> int:
        return self.side**2

    def flat_index(self, lx: int, ly: int) -> int:
        r = self.box_radius
        if abs(lx) > r or abs(ly) > r:
            raise ValueError(f"site ({lx}, {ly}) outside box of radius {r}")
        return (lx + r) * self.side + (ly + r)

    def matrix(self) -> sp.csr_matrix:
        return (self.t0 + self.ti).tocsr()

    def max_hop_speed(self) -> float:
        """Crude light-cone bound: 2 * sum over moves of |amp| * |move|_inf."""
        total = 0.0
        for c in self.classes:
            d = max(abs(c.displacement[0]), abs(c.displacement[1]))
            total += 4.0 * abs(PREFACTOR * c.coefficient) * d
        return 2.0 * total

    def with_inhomogeneity(self, extra: sp.spmatrix) -> "FiberHamiltonian":
        extra = sp.csr_matrix(extra)
        if extra.shape != (self.dim, self.dim):
            raise ValueError("inhomogeneity shape mismatch")
        return FiberHamiltonian(
            k=self.k,
            box_radius=self.box_radius,
            classes=self.classes,
            t0=self.t0,
            ti=(self.ti + extra).tocsr(),
        )


def _class_moves(c: HopClass, k) -> list[tuple[tuple[int, int], complex]]:
    """The four displacement pairs of one class, as (j - l move, amplitude).

    p = (d, 0) and (-d, 0) move particle 1 (no k phase); p = (0, d) and
    (0, -d) move particle 2 and carry exp(i p2.k).
    """
    d = np.asarray(c.displacement)
    kv = np.asarray(k, dtype=float)
    amp = PREFACTOR * c.coefficient
    return [
        (tuple(-d), amp),                                   # p=( d,0): j = l - d
        (tuple(d), amp),                                    # p=(-d,0): j = l + d
        (tuple(d), amp * np.exp(1j * float(d @ kv))),       # p=(0, d)
        (tuple(-d), amp * np.exp(-1j * float(d @ kv))),     # p=(0,-d)
    ]


def build_fiber(
    k,
    terms,
    box_radius: int,
    geometry: LatticeGeometry | None = None,
) -> FiberHamiltonian:
    """Fiber Hamiltonian on the hard-wall box of the given radius.

    `terms` may be geometry-bound PerturbationTerms (translation classes are
    extracted; pass the geometry they live on) or a ready list of HopClass.
    """
    if terms and isinstance(terms[0], PerturbationTerm):
        if geometry is None:
            raise ValueError("geometry required to classify PerturbationTerms")
        classes = term_classes(terms, geometry)
    else:
        classes = list(terms)
    max_reach = max((max(map(abs, c.displacement)) for c in classes), default=0)
    if box_radius < max_reach + 2:
        raise ValueError(
            f"box radius {box_radius} too small for hop reach {max_reach}"
        )

    side, flat = _box_index(box_radius)
    dim = side * side
    rows, cols, vals = [], [], []
    r = box_radius
    for c in classes:
        for (mx, my), amp in _class_moves(c, k):
            for lx in range(-r, r + 1):
                jx = lx + mx
                if abs(jx) > r:
                    continue
                for ly in range(-r, r + 1):
                    jy = ly + my
                    if abs(jy) > r:
                        continue
                    rows.append(flat(lx, ly))
                    cols.append(flat(jx, jy))
                    vals.append(amp)
    t0 = sp.coo_matrix(
        (np.asarray(vals, dtype=complex), (rows, cols)), shape=(dim, dim)
    ).tocsr()

    # hardcore: zero the origin row and column; the difference is the
    # minimal short-range inhomogeneous part
    o = flat(0, 0)
    full = t0.tolil(copy=True)
    full[o, :] = 0
    full[:, o] = 0
    ti = (full.tocsr() - t0).tocsr()
    ti.eliminate_zeros()
    return FiberHamiltonian(
        k=tuple(float(x) for x in k),
        box_radius=box_radius,
        classes=classes,
        t0=t0,
        ti=ti,
    )


def random_short_range_inhomogeneity(
    box_radius: int,
    support_radius: int,
    strength: float,
    seed: int,
    hop_range: int = 1,
) -> sp.csr_matrix:
    """Random Hermitian hopping supported on the |l|_inf <= support_radius
    ball (origin row/column excluded), with hops of |l-j|_inf <= hop_range."""
    side, flat = _box_index(box_radius)
    dim = side * side
    rng = np.random.Generator(np.random.PCG64(seed))
    rows, cols, vals = [], [], []
    rs = support_radius
    sites = [
        (x, y)
        for x in range(-rs, rs + 1)
        for y in range(-rs, rs + 1)
        if (x, y) != (0, 0)
    ]
    for i, (x, y) in enumerate(sites):
        for (u, v) in sites[i:]:
            if max(abs(u - x), abs(v - y)) > hop_range:
                continue
            a = strength * (2.0 * rng.random() - 1.0)
            rows.append(flat(x, y))
            cols.append(flat(u, v))
            vals.append(a)
            if (u, v) != (x, y):
                rows.append(flat(u, v))
                cols.append(flat(x, y))
                vals.append(a)
    return sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()


def fiber_dispersion(k, terms, q, geometry: LatticeGeometry | None = None) -> complex:
    """Plane-wave eigenvalue of T0 at relative momentum q:
    E_q = c * sum_p xi_p exp(i p2.k) exp(i q.(p2 - p1))."""
    if terms and isinstance(terms[0], PerturbationTerm):
        classes = term_classes(terms, geometry)
    else:
        classes = list(terms)
    qv = np.asarray(q, dtype=float)
    e = 0.0 + 0.0j
    for c in classes:
        for (mx, my), amp in _class_moves(c, k):
            # move = j - l = p2 - p1 appears as exp(i q . move)
            e += amp * np.exp(1j * (qv[0] * mx + qv[1] * my))
    return complex(e)


def gaussian_packet(
    fiber: FiberHamiltonian, center, sigma: float, carrier_q
) -> np.ndarray:
    """Normalized Gaussian wave packet with plane-wave carrier, zero at the
    hardcore origin."""
    r = fiber.box_radius
    xs = np.arange(-r, r + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    cx, cy = center
    qx, qy = carrier_q
    psi = np.exp(
        -((gx - cx) ** 2 + (gy - cy) ** 2) / (4.0 * sigma**2)
        + 1j * (qx * gx + qy * gy)
    )
    psi = psi.reshape(-1)
    psi[fiber.flat_index(0, 0)] = 0.0
    return psi / np.linalg.norm(psi)


@dataclass
class EscapeReport:
    """In-region probability trace of a wave packet on the truncated fiber."""

    times: np.ndarray
    in_region_probability: np.ndarray
    region_halfwidth: int
    reflection_time: float
    contaminated: bool
    threshold: float
    threshold_time: float | None

    @property
    def escaped(self) -> bool:
        return self.threshold_time is not None


def central_region(fiber: FiberHamiltonian, halfwidth: int) -> list[int]:
    return [
        fiber.flat_index(x, y)
        for x in range(-halfwidth, halfwidth + 1)
        for y in range(-halfwidth, halfwidth + 1)
    ]


def ballistic_escape_probe(
    fiber: FiberHamiltonian,
    psi0: np.ndarray,
    times,
    region_halfwidth: int = 2,
    threshold: float = 0.05,
    method: str = "expm",
) -> EscapeReport:
    """Track the probability of a central region during free-ish spreading.

    The reported reflection time is conservative: (distance from the packet
    bulk to the wall) / (light-cone speed bound); samples beyond it are
    flagged, not discarded.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    r = fiber.box_radius
    amp2 = np.abs(psi0) ** 2
    xs = np.arange(-r, r + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    radius = np.maximum(np.abs(gx), np.abs(gy)).reshape(-1)
    order = np.argsort(radius, kind="stable")
    cum = np.cumsum(amp2[order])
    bulk_radius = float(radius[order][np.searchsorted(cum, 0.999)])
    speed = fiber.max_hop_speed()
    reflection_time = (r - bulk_radius) / speed if speed > 0 else np.inf

    region = central_region(fiber, region_halfwidth)
    states = evolve(fiber.matrix(), psi0, times, method=method)
    probs = (np.abs(states[:, region]) ** 2).sum(axis=1)

    contaminated = bool(np.any(times > reflection_time))
    if contaminated:
        warnings.warn(
            f"escape probe sampled past the reflection bound {reflection_time:.3g}",
            ReflectionWarning,
            stacklevel=2,
        )
    below = np.flatnonzero((probs < threshold) & (times <= reflection_time))
    threshold_time = float(times[below[0]]) if below.size else None
    return EscapeReport(
        times=times,
        in_region_probability=probs,
        region_halfwidth=region_halfwidth,
        reflection_time=float(reflection_time),
        contaminated=contaminated,
        threshold=threshold,
        threshold_time=threshold_time,
    )
