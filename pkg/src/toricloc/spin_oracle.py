"""Exact statevector engine for tiny toric codes (L <= 3, up to 18 qubits).

Ground truth for the defect-level Hamiltonian builder: sector bases are
path-operator states applied to a fixed ground state, and matrix elements
are computed by full 2^(2L^2) statevector arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import OracleTooLargeError, UnsupportedSectorError
from .geometry import LatticeGeometry, shortest_dual_path, shortest_path
from .perturbations import PerturbationTerm

_MAX_L = 3


@dataclass
class PauliFrame:
    """A Pauli string up to phase: per-edge X and Z bits."""

    x_bits: np.ndarray
    z_bits: np.ndarray

    @classmethod
    def identity(cls, geometry: LatticeGeometry) -> "PauliFrame":
        n = geometry.n_edges
        return cls(np.zeros(n, dtype=bool), np.zeros(n, dtype=bool))

    @classmethod
    def z_string(cls, edges, geometry: LatticeGeometry) -> "PauliFrame":
        f = cls.identity(geometry)
        for e in edges:
            f.z_bits[e] ^= True
        return f

    @classmethod
    def x_string(cls, edges, geometry: LatticeGeometry) -> "PauliFrame":
        f = cls.identity(geometry)
        for e in edges:
            f.x_bits[e] ^= True
        return f

    def compose(self, other: "PauliFrame") -> "PauliFrame":
        return PauliFrame(self.x_bits ^ other.x_bits, self.z_bits ^ other.z_bits)


@dataclass(frozen=True)
class Syndrome:
    """Violated stars (electric defects) and plaquettes (magnetic defects)."""

    stars: frozenset[int]
    plaquettes: frozenset[int]

    @property
    def empty(self) -> bool:
        return not self.stars and not self.plaquettes


def syndrome_of(frame: PauliFrame, geometry: LatticeGeometry) -> Syndrome:
    """Stabilizers anticommuting with the frame, by overlap parity.

    A star (prod X) is violated by the frame's Z support, a plaquette
    (prod Z) by its X support.
    """
    z_par = frame.z_bits[geometry.star_edges].sum(axis=1) % 2
    x_par = frame.x_bits[geometry.plaquette_edges].sum(axis=1) % 2
    return Syndrome(
        stars=frozenset(np.flatnonzero(z_par).tolist()),
        plaquettes=frozenset(np.flatnonzero(x_par).tolist()),
    )


# -- statevector helpers ------------------------------------------------------
#
# Basis states are integers whose bit e is the Z eigenvalue of edge e
# (bit 0 -> +1). A Pauli string with X mask mx, Z mask mz and ny Y factors
# acts as  i^ny * (-1)^parity((idx ^ mx) & mz)  at the flipped index.


def _bit_parity(idx: np.ndarray, mask: int) -> np.ndarray:
    par = np.zeros(idx.shape, dtype=np.int8)
    b = 0
    while mask >> b:
        if (mask >> b) & 1:
            par ^= ((idx >> b) & 1).astype(np.int8)
        b += 1
    return par


def _apply_pauli(psi: np.ndarray, idx: np.ndarray, mx: int, mz: int, ny: int):
    src = psi[idx ^ mx] if mx else psi
    if mz:
        sign = 1.0 - 2.0 * _bit_parity(idx ^ mx, mz)
        src = src * sign
    if ny % 4:
        src = src * (1j) ** (ny % 4)
    return src


def _term_masks(term: PerturbationTerm) -> tuple[int, int, int]:
    mx = mz = ny = 0
    for e, a in term.support:
        if a == "x":
            mx |= 1 << e
        elif a == "z":
            mz |= 1 << e
        else:
            mx |= 1 << e
            mz |= 1 << e
            ny += 1
    return mx, mz, ny


def _check_size(geometry: LatticeGeometry):
    if geometry.L > _MAX_L:
        raise OracleTooLargeError(
            f"statevector oracle limited to L <= {_MAX_L}, got L={geometry.L}"
        )


def ground_state(geometry: LatticeGeometry, kind: str = "electric") -> np.ndarray:
    """Toric-code ground state with trivial logical labels.

    kind='electric': uniform superposition over the star-group orbit of
    |0...0> (every closed primal Z loop acts as +1, so electric path states
    depend only on their endpoints). kind='magnetic' is the dual state built
    from plaquette projectors on |+...+>, with the mirrored property.
    """
    _check_size(geometry)
    n = geometry.n_edges
    dim = 1 << n
    idx = np.arange(dim, dtype=np.int64)
    if kind == "electric":
        psi = np.zeros(dim)
        psi[0] = 1.0
        groups = geometry.star_edges
    elif kind == "magnetic":
        psi = np.full(dim, 1.0 / np.sqrt(dim))
        groups = geometry.plaquette_edges
    else:
        raise ValueError(f"unknown ground-state kind {kind!r}")
    for edges in groups:
        if kind == "electric":
            mask = 0
            for e in edges:
                mask |= 1 << int(e)
            psi = psi + psi[idx ^ mask]
        else:
            mask = 0
            for e in edges:
                mask |= 1 << int(e)
            psi = psi + (1.0 - 2.0 * _bit_parity(idx, mask)) * psi
    psi /= np.linalg.norm(psi)
    return psi


def _canonical_pairing(sites: tuple[int, ...]) -> list[tuple[int, int]]:
    """Deterministic pairing: repeatedly pair the lowest index with the next."""
    rest = sorted(sites)
    pairs = []
    while rest:
        a = rest.pop(0)
        b = rest.pop(0)
        pairs.append((a, b))
    return pairs


def sector_basis_state(
    geometry: LatticeGeometry,
    config: tuple[int, ...],
    g: np.ndarray,
    kind: str = "electric",
) -> np.ndarray:
    """Path-operator state with defects at `config`, canonical paths."""
    idx = np.arange(g.size, dtype=np.int64)
    psi = g
    for a, b in _canonical_pairing(config):
        if kind == "electric":
            edges = shortest_path(a, b, geometry).edges
            mask = 0
            for e in edges:
                mask |= 1 << e
            psi = (1.0 - 2.0 * _bit_parity(idx, mask)) * psi
        else:
            edges = shortest_dual_path(a, b, geometry).edges
            mask = 0
            for e in edges:
                mask |= 1 << e
            psi = psi[idx ^ mask]
    return psi


def sector_configurations(geometry: LatticeGeometry, n_defects: int) -> list[tuple[int, ...]]:
    return list(combinations(range(geometry.n_sites), n_defects))


def exact_sector_projection(
    terms,
    sector: tuple[int, int],
    geometry: LatticeGeometry,
):
    """Project the perturbation onto a fixed-defect-number sector, exactly.

    Returns (matrix, basis) where basis lists the sorted defect
    configurations (stars for electric pairs, plaquettes for magnetic) and
    matrix[i, j] = <basis_i| H_pert |basis_j> by full statevector arithmetic.
    Only sectors with a single dynamic species are supported.
    """
    _check_size(geometry)
    n_e, n_m = sector
    if n_e and n_m:
        raise UnsupportedSectorError(
            "mixed sectors with both defect species are not supported"
        )
    if n_e:
        kind, n_defects = "electric", 2 * n_e
    elif n_m:
        kind, n_defects = "magnetic", 2 * n_m
    else:
        raise UnsupportedSectorError("ground sector has no defects to project onto")

    g = ground_state(geometry, kind)
    configs = sector_configurations(geometry, n_defects)
    dim = 1 << geometry.n_edges
    idx = np.arange(dim, dtype=np.int64)
    basis = np.empty((len(configs), dim))
    for i, c in enumerate(configs):
        basis[i] = sector_basis_state(geometry, c, g, kind)

    masks = [(_term_masks(t), t.coefficient) for t in terms]
    mat = np.zeros((len(configs), len(configs)), dtype=complex)
    for j in range(len(configs)):
        acc = np.zeros(dim, dtype=complex)
        for (mx, mz, ny), xi in masks:
            acc += xi * _apply_pauli(basis[j], idx, mx, mz, ny)
        mat[:, j] = basis @ acc
    return mat, configs
