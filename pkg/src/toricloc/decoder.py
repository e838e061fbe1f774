"""Syndrome decoding and the coherent-memory experiment.

Decoding: pair up same-species defects at minimum total periodic 1-norm cost
(exact branch-and-bound up to 12 defects, greedy beyond) and fuse each pair
along the deterministic shortest path. A stored qubit fails when the loop
formed by the true error and the applied correction winds around the torus.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg

from .effective import DisorderField, build_defect_hamiltonian
from .errors import InconsistentCorrectionError, InvalidSyndromeError
from .geometry import (
    LatticeGeometry,
    LatticePath,
    periodic_l1_distance,
    shortest_dual_path,
    shortest_path,
)
from .seeds import seed_derive
from .spin_oracle import Syndrome

EXACT_MATCHING_LIMIT = 12  # exhaustive/branch-and-bound up to this many defects


@dataclass
class Pairing:
    """Perfect matching of a syndrome, with its total 1-norm cost."""

    electric_pairs: list[tuple[int, int]] = field(default_factory=list)
    magnetic_pairs: list[tuple[int, int]] = field(default_factory=list)
    cost: int = 0
    optimal: bool = True


@dataclass(frozen=True)
class LogicalOutcome:
    """Winding parities of the combined error+correction loops."""

    electric: tuple[int, int] = (0, 0)
    magnetic: tuple[int, int] = (0, 0)

    @property
    def trivial(self) -> bool:
        return self.electric == (0, 0) and self.magnetic == (0, 0)


def _min_weight_pairing(points: list[int], L: int) -> tuple[list[tuple[int, int]], int]:
    """Exact minimum-cost perfect matching by branch and bound."""
    best_pairs: list[tuple[int, int]] = []
    best_cost = [np.inf]

    dist = {
        (a, b): periodic_l1_distance(a, b, L)
        for i, a in enumerate(points)
        for b in points[i + 1 :]
    }

    def recurse(rest: tuple[int, ...], cost: int, pairs: list[tuple[int, int]]):
        if cost >= best_cost[0]:
            return
        if not rest:
            best_cost[0] = cost
            best_pairs[:] = pairs
            return
        a = rest[0]
        for j in range(1, len(rest)):
            b = rest[j]
            d = dist[(a, b) if (a, b) in dist else (b, a)]
            recurse(
                rest[1:j] + rest[j + 1 :],
                cost + d,
                pairs + [(a, b)],
            )

    recurse(tuple(sorted(points)), 0, [])
    return best_pairs, int(best_cost[0])


def _greedy_pairing(points: list[int], L: int) -> tuple[list[tuple[int, int]], int]:
    rest = sorted(points)
    pairs = []
    cost = 0
    while rest:
        a = rest.pop(0)
        j = int(np.argmin([periodic_l1_distance(a, b, L) for b in rest]))
        b = rest.pop(j)
        pairs.append((a, b))
        cost += periodic_l1_distance(a, b, L)
    return pairs, cost


def decode(
    syndrome: Syndrome, geometry: LatticeGeometry
) -> tuple[Pairing, list[LatticePath]]:
    """Minimum-cost pairing plus shortest fusion paths for each species."""
    pairing = Pairing()
    paths: list[LatticePath] = []
    for kind, pts in (("electric", syndrome.stars), ("magnetic", syndrome.plaquettes)):
        pts = sorted(pts)
        if len(pts) % 2:
            raise InvalidSyndromeError(
                f"{kind} syndrome has odd cardinality {len(pts)}"
            )
        if not pts:
            continue
        if len(pts) <= EXACT_MATCHING_LIMIT:
            pairs, cost = _min_weight_pairing(pts, geometry.L)
        else:
            pairs, cost = _greedy_pairing(pts, geometry.L)
            pairing.optimal = False
        pairing.cost += cost
        if kind == "electric":
            pairing.electric_pairs = pairs
            paths.extend(shortest_path(a, b, geometry) for a, b in pairs)
        else:
            pairing.magnetic_pairs = pairs
            paths.extend(shortest_dual_path(a, b, geometry) for a, b in pairs)
    return pairing, paths


def _xor_edges(paths) -> tuple[set[int], set[int]]:
    primal: set[int] = set()
    dual: set[int] = set()
    for p in paths:
        target = primal if p.kind == "primal" else dual
        for e in p.edges:
            if e in target:
                target.remove(e)
            else:
                target.add(e)
    return primal, dual


def _winding_parities(edges: set[int], geometry: LatticeGeometry, kind: str):
    """Crossing parities of the two fixed transversal cuts.

    Primal loops: the x-winding counts +x edges at x = L-1, the y-winding +y
    edges at y = L-1. Dual loops: the x-winding counts the +y edges crossed
    when a dual path wraps in x (edges (1, 0, y)), and mirrored for y.
    """
    L = geometry.L
    if kind == "primal":
        cut_x = {geometry.edge_index(0, L - 1, y) for y in range(L)}
        cut_y = {geometry.edge_index(1, x, L - 1) for x in range(L)}
    else:
        cut_x = {geometry.edge_index(1, 0, y) for y in range(L)}
        cut_y = {geometry.edge_index(0, x, 0) for x in range(L)}
    return (len(edges & cut_x) % 2, len(edges & cut_y) % 2)


def logical_class(
    error_paths, correction_paths, geometry: LatticeGeometry
) -> LogicalOutcome:
    """Homology class of error + correction; nontrivial means a logical error."""
    primal, dual = _xor_edges(list(error_paths) + list(correction_paths))
    if geometry.edge_boundary_stars(primal):
        raise InconsistentCorrectionError(
            "combined primal edge set is not a union of closed loops"
        )
    if geometry.edge_boundary_plaquettes(dual):
        raise InconsistentCorrectionError(
            "combined dual edge set is not a union of closed loops"
        )
    return LogicalOutcome(
        electric=_winding_parities(primal, geometry, "primal"),
        magnetic=_winding_parities(dual, geometry, "dual"),
    )


@dataclass
class MemoryResult:
    """One arm of the memory experiment."""

    delta: float
    t_readout: float
    failures: np.ndarray  # bool per trial
    measured: list[tuple[int, int]]
    seeds: list[int]
    metadata: dict

    @property
    def n_trials(self) -> int:
        return self.failures.size

    @property
    def failure_rate(self) -> float:
        return float(self.failures.mean())

    @property
    def stderr(self) -> float:
        p, n = self.failure_rate, self.n_trials
        return float(np.sqrt(max(p * (1 - p), 1.0 / n**2) / n))


def paired_failure_z(a: MemoryResult, b: MemoryResult) -> float:
    """One-sided z score that arm `a` fails more often than arm `b`,
    using the shared-seed pairing of trials."""
    if a.n_trials != b.n_trials:
        raise ValueError("arms have different trial counts")
    diff = a.failures.astype(float) - b.failures.astype(float)
    sd = diff.std(ddof=1)
    if sd == 0:
        return float("inf") if diff.mean() > 0 else 0.0
    return float(diff.mean() / (sd / np.sqrt(diff.size)))


def memory_experiment(
    geometry: LatticeGeometry,
    terms,
    delta: float,
    t_readout: float,
    trials: int,
    seed: int,
    creation_edge: int | None = None,
) -> MemoryResult:
    """Create an adjacent electric pair, evolve, measure, decode, classify.

    Per trial: a disorder realization (seeded by trial index), exact
    evolution of the two-defect wavefunction to t_readout, projective
    position sampling from |psi|^2, minimum-cost fusion, and the homology
    class of creation string + shortest-path lifts + correction. Measurement
    seeds depend only on (seed, trial), so arms with different delta pair up.
    """
    L = geometry.L
    if creation_edge is None:
        creation_edge = geometry.edge_index(0, L // 2 - 1, L // 2)
    s1, s2 = (int(s) for s in geometry.edge_stars[creation_edge])
    x0 = tuple(sorted((s1, s2)))
    creation = LatticePath(kind="primal", edges=[creation_edge], endpoints=(s1, s2))

    h_clean = build_defect_hamiltonian(geometry, terms, None, 2, "electric")
    i0 = h_clean.config_index(x0)
    basis = h_clean.basis
    psi0 = np.zeros(h_clean.dim, dtype=complex)
    psi0[i0] = 1.0

    psi_cached = None
    if delta == 0:
        psi_cached = _readout_state(h_clean, psi0, t_readout)

    failures = np.zeros(trials, dtype=bool)
    measured: list[tuple[int, int]] = []
    seeds = []
    for trial in range(trials):
        measure_seed = seed_derive(seed, trial)
        seeds.append(measure_seed)
        if psi_cached is not None:
            psi_t = psi_cached
        else:
            disorder_seed = seed_derive(seed, 1_000_000 + trial)
            disorder = DisorderField.potential_box(geometry, delta, disorder_seed)
            h = build_defect_hamiltonian(geometry, terms, disorder, 2, "electric")
            psi_t = _readout_state(h, psi0, t_readout)
        rng = np.random.Generator(np.random.PCG64(measure_seed))
        prob = np.abs(psi_t) ** 2
        prob = prob / prob.sum()
        y = basis[rng.choice(len(basis), p=prob)]
        measured.append(y)
        failures[trial] = not _classify_trial(geometry, creation, x0, y).trivial

    return MemoryResult(
        delta=float(delta),
        t_readout=float(t_readout),
        failures=failures,
        measured=measured,
        seeds=seeds,
        metadata={
            "L": L,
            "creation_edge": int(creation_edge),
            "x0": list(x0),
            "readout_model": "projective position sampling from |psi|^2",
            "error_lift": "min-total-distance assignment, staircase shortest paths",
            "master_seed": int(seed),
        },
    )


def _readout_state(h, psi0, t_readout):
    m = h.matrix().astype(complex)
    if t_readout == 0:
        return psi0.copy()
    return sp.linalg.expm_multiply((-1j * t_readout) * m, psi0)


def _classify_trial(geometry, creation, x0, y) -> LogicalOutcome:
    """Homology outcome for measured pair y given creation sites x0."""
    lifts = []
    # defects are indistinguishable: lift along the cheaper assignment
    d_direct = periodic_l1_distance(x0[0], y[0], geometry.L) + periodic_l1_distance(
        x0[1], y[1], geometry.L
    )
    d_swap = periodic_l1_distance(x0[0], y[1], geometry.L) + periodic_l1_distance(
        x0[1], y[0], geometry.L
    )
    pairs = ((x0[0], y[0]), (x0[1], y[1])) if d_direct <= d_swap else (
        (x0[0], y[1]),
        (x0[1], y[0]),
    )
    for a, b in pairs:
        if a != b:
            lifts.append(shortest_path(a, b, geometry))
    syndrome = Syndrome(stars=frozenset(y) if y[0] != y[1] else frozenset(),
                        plaquettes=frozenset())
    _, corrections = decode(syndrome, geometry)
    return logical_class([creation] + lifts, corrections, geometry)
