"""Periodic square-lattice bookkeeping for the toric code.

Conventions (all indices row-major from (0, 0)):
  site (x, y)            index x*L + y,  x, y in 0..L-1
  edge (d, x, y)         index d*L^2 + x*L + y; d=0 points +x, d=1 points +y,
                         i.e. the edge leaves site (x, y) in direction d
  star s(x, y)           the 4 edges meeting site (x, y); index like sites
  plaquette p(x, y)      the square with corners (x, y)..(x+1, y+1); index
                         like sites; its dual-lattice vertex sits at
                         (x + 1/2, y + 1/2)

Stars host electric defects (violated prod-X), plaquettes magnetic ones
(violated prod-Z). Paths of edges live either on the lattice (consecutive
edges share a site) or on the dual lattice (consecutive edges share a
plaquette).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArityError, DegeneratePathError, InvalidSizeError


def _coords(site, L: int) -> tuple[int, int]:
    """Accept a site as an index or an (x, y) pair; return (x, y) mod L."""
    if np.isscalar(site):
        s = int(site)
        return s // L % L, s % L
    x, y = site
    return int(x) % L, int(y) % L


def periodic_l1_distance(a, b, L: int) -> int:
    """Minimum |dx|+|dy| over periodic images of two sites on the L-torus."""
    ax, ay = _coords(a, L)
    bx, by = _coords(b, L)
    dx = abs(ax - bx)
    dy = abs(ay - by)
    return min(dx, L - dx) + min(dy, L - dy)


def periodic_delta(a, b, L: int) -> tuple[int, int]:
    """Shortest signed displacement b - a on the torus (ties resolve to +)."""
    ax, ay = _coords(a, L)
    bx, by = _coords(b, L)
    dx = (bx - ax) % L
    dy = (by - ay) % L
    if dx > L - dx:
        dx -= L
    if dy > L - dy:
        dy -= L
    return dx, dy


def hausdorff_distance(x, y, L: int) -> int:
    """Set-level max-min periodic 1-norm distance between two n-site configs."""
    xs = [_coords(s, L) for s in x]
    ys = [_coords(s, L) for s in y]
    if len(xs) != len(ys) or not xs:
        raise ArityError(f"configurations must have equal size >= 1, got {len(xs)} and {len(ys)}")
    d_xy = max(min(periodic_l1_distance(a, b, L) for b in ys) for a in xs)
    d_yx = max(min(periodic_l1_distance(a, b, L) for a in xs) for b in ys)
    return max(d_xy, d_yx)


@dataclass
class LatticePath:
    """Ordered edge list on the lattice (kind='primal') or dual lattice."""

    kind: str
    edges: list[int] = field(default_factory=list)
    endpoints: tuple[int, int] | None = None  # star or plaquette indices

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def closed(self) -> bool:
        return self.endpoints is None or self.endpoints[0] == self.endpoints[1]

    def edge_set(self) -> frozenset[int]:
        return frozenset(self.edges)


class LatticeGeometry:
    """Immutable torus geometry: adjacency between edges, stars, plaquettes."""

    def __init__(self, L: int):
        if L < 2:
            raise InvalidSizeError(f"torus linear size must be >= 2, got {L}")
        self.L = int(L)
        L = self.L
        self.n_sites = L * L
        self.n_edges = 2 * L * L
        self.n_stars = L * L
        self.n_plaquettes = L * L

        # edge -> the two stars (its endpoints) and the two plaquettes it borders
        edge_stars = np.empty((self.n_edges, 2), dtype=np.int64)
        edge_plaquettes = np.empty((self.n_edges, 2), dtype=np.int64)
        for d in (0, 1):
            for x in range(L):
                for y in range(L):
                    e = self.edge_index(d, x, y)
                    if d == 0:
                        edge_stars[e] = (self.site_index(x, y), self.site_index(x + 1, y))
                        edge_plaquettes[e] = (
                            self.site_index(x, y),
                            self.site_index(x, y - 1),
                        )
                    else:
                        edge_stars[e] = (self.site_index(x, y), self.site_index(x, y + 1))
                        edge_plaquettes[e] = (
                            self.site_index(x, y),
                            self.site_index(x - 1, y),
                        )
        self.edge_stars = edge_stars
        self.edge_plaquettes = edge_plaquettes

        star_edges = [[] for _ in range(self.n_stars)]
        plaquette_edges = [[] for _ in range(self.n_plaquettes)]
        for e in range(self.n_edges):
            for s in edge_stars[e]:
                star_edges[s].append(e)
            for p in edge_plaquettes[e]:
                plaquette_edges[p].append(e)
        self.star_edges = np.array(star_edges, dtype=np.int64)
        self.plaquette_edges = np.array(plaquette_edges, dtype=np.int64)

        self.edge_stars.setflags(write=False)
        self.edge_plaquettes.setflags(write=False)
        self.star_edges.setflags(write=False)
        self.plaquette_edges.setflags(write=False)

    # -- index helpers -------------------------------------------------------

    def site_index(self, x: int, y: int) -> int:
        return (x % self.L) * self.L + (y % self.L)

    def site_xy(self, s: int) -> tuple[int, int]:
        return s // self.L, s % self.L

    def edge_index(self, d: int, x: int, y: int) -> int:
        return d * self.n_sites + (x % self.L) * self.L + (y % self.L)

    def edge_dxy(self, e: int) -> tuple[int, int, int]:
        d, r = divmod(e, self.n_sites)
        return d, r // self.L, r % self.L

    def edge_midpoint(self, e: int) -> tuple[float, float]:
        d, x, y = self.edge_dxy(e)
        return (x + 0.5, y) if d == 0 else (x, y + 0.5)

    def edge_between_stars(self, s1: int, s2: int) -> int:
        """The edge joining two adjacent stars (the +direction one if L=2)."""
        x1, y1 = self.site_xy(s1)
        dx, dy = periodic_delta(s1, s2, self.L)
        if (abs(dx), abs(dy)) not in ((1, 0), (0, 1)):
            raise ValueError(f"stars {s1} and {s2} are not adjacent")
        if dx == 1:
            return self.edge_index(0, x1, y1)
        if dx == -1:
            return self.edge_index(0, x1 - 1, y1)
        if dy == 1:
            return self.edge_index(1, x1, y1)
        return self.edge_index(1, x1, y1 - 1)

    def edge_distance(self, e1: int, e2: int) -> float:
        """Periodic Euclidean distance between edge midpoints."""
        x1, y1 = self.edge_midpoint(e1)
        x2, y2 = self.edge_midpoint(e2)
        L = self.L
        dx = abs(x1 - x2)
        dy = abs(y1 - y2)
        dx = min(dx, L - dx)
        dy = min(dy, L - dy)
        return float(np.hypot(dx, dy))

    # -- boundaries ----------------------------------------------------------

    def edge_boundary_stars(self, edges) -> frozenset[int]:
        """Stars touched by an odd number of the given edges."""
        count: dict[int, int] = {}
        for e in edges:
            for s in self.edge_stars[e]:
                count[s] = count.get(s, 0) + 1
        return frozenset(s for s, c in count.items() if c % 2)

    def edge_boundary_plaquettes(self, edges) -> frozenset[int]:
        """Plaquettes touched by an odd number of the given edges."""
        count: dict[int, int] = {}
        for e in edges:
            for p in self.edge_plaquettes[e]:
                count[p] = count.get(p, 0) + 1
        return frozenset(p for p, c in count.items() if c % 2)


def build_torus(L: int) -> LatticeGeometry:
    """Build the L x L torus geometry (L >= 2)."""
    return LatticeGeometry(L)


def _staircase_steps(a, b, L: int) -> list[tuple[int, int]]:
    """Unit steps from a to b: all x-moves first, then y-moves.

    Wrap direction chosen to minimise the step count; ties go to +.
    """
    dx, dy = periodic_delta(a, b, L)
    steps = []
    sx = 1 if dx >= 0 else -1
    for _ in range(abs(dx)):
        steps.append((sx, 0))
    sy = 1 if dy >= 0 else -1
    for _ in range(abs(dy)):
        steps.append((0, sy))
    return steps


def shortest_path(s1, s2, geometry: LatticeGeometry) -> LatticePath:
    """Deterministic shortest primal path between two stars (x-moves first)."""
    L = geometry.L
    a = geometry.site_index(*_coords(s1, L))
    b = geometry.site_index(*_coords(s2, L))
    if a == b:
        raise DegeneratePathError(f"both endpoints are star {a}")
    edges = []
    x, y = geometry.site_xy(a)
    for (mx, my) in _staircase_steps(a, b, L):
        if mx == 1:
            edges.append(geometry.edge_index(0, x, y))
        elif mx == -1:
            edges.append(geometry.edge_index(0, x - 1, y))
        elif my == 1:
            edges.append(geometry.edge_index(1, x, y))
        else:
            edges.append(geometry.edge_index(1, x, y - 1))
        x, y = (x + mx) % L, (y + my) % L
    return LatticePath(kind="primal", edges=edges, endpoints=(a, b))


def shortest_dual_path(p1, p2, geometry: LatticeGeometry) -> LatticePath:
    """Deterministic shortest dual path between two plaquettes.

    Dual steps are recorded as the primal edges they cross: p(x,y)->p(x+1,y)
    crosses edge (1, x+1, y); p(x,y)->p(x,y+1) crosses edge (0, x, y+1).
    """
    L = geometry.L
    a = geometry.site_index(*_coords(p1, L))
    b = geometry.site_index(*_coords(p2, L))
    if a == b:
        raise DegeneratePathError(f"both endpoints are plaquette {a}")
    edges = []
    x, y = geometry.site_xy(a)
    for (mx, my) in _staircase_steps(a, b, L):
        if mx == 1:
            edges.append(geometry.edge_index(1, x + 1, y))
        elif mx == -1:
            edges.append(geometry.edge_index(1, x, y))
        elif my == 1:
            edges.append(geometry.edge_index(0, x, y + 1))
        else:
            edges.append(geometry.edge_index(0, x, y))
        x, y = (x + mx) % L, (y + my) % L
    return LatticePath(kind="dual", edges=edges, endpoints=(a, b))


def dual_path_through(waypoints, geometry: LatticeGeometry) -> LatticePath:
    """Concatenate staircase dual paths through a sequence of plaquettes."""
    if len(waypoints) < 2:
        raise ValueError("need at least two waypoints")
    edges: list[int] = []
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        edges.extend(shortest_dual_path(a, b, geometry).edges)
    a = geometry.site_index(*_coords(waypoints[0], geometry.L))
    b = geometry.site_index(*_coords(waypoints[-1], geometry.L))
    return LatticePath(kind="dual", edges=edges, endpoints=(a, b))
