"""Defect-level hopping Hamiltonians.

A perturbation term toggles the defects on the odd-degree endpoints of its
edge set; within a fixed-particle-number sector this is finite-range hopping
with hardcore exclusion (moves that change the defect count leave the sector
and are dropped). Randomized stabilizer couplings enter as a diagonal
potential 2*J per occupied site, and a static opposite-species pair created
along a string flips the sign of every hop whose edges cross it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .errors import AxisMismatchError, UnknownConfigurationError, UnsupportedSectorError
from .geometry import LatticeGeometry, LatticePath
from .perturbations import PerturbationTerm

_SECTOR_AXIS = {"electric": "z", "magnetic": "x"}


@dataclass
class DisorderField:
    """Random positive stabilizer couplings J_e (stars), J_m (plaquettes)."""

    j_e: np.ndarray
    j_m: np.ndarray
    low: float
    high: float
    strength: float
    seed: int

    @classmethod
    def uniform(
        cls,
        geometry: LatticeGeometry,
        low: float,
        high: float,
        seed: int,
        strength: float = 1.0,
    ) -> "DisorderField":
        """Couplings iid uniform on (low, high], bit-reproducible from seed."""
        if low < 0 or high <= low:
            raise ValueError(f"need 0 <= low < high, got [{low}, {high}]")
        rng = np.random.Generator(np.random.PCG64(seed))
        j_e = low + (high - low) * rng.random(geometry.n_stars)
        j_m = low + (high - low) * rng.random(geometry.n_plaquettes)
        # keep couplings strictly positive even when low == 0
        eps = np.nextafter(low, high) - low
        j_e = np.maximum(j_e, low + eps)
        j_m = np.maximum(j_m, low + eps)
        return cls(j_e=j_e, j_m=j_m, low=low, high=high, strength=strength, seed=seed)

    @classmethod
    def potential_box(
        cls, geometry: LatticeGeometry, delta: float, seed: int
    ) -> "DisorderField":
        """Couplings such that the defect potential V = 2J is uniform on (0, delta]."""
        return cls.uniform(geometry, 0.0, delta / 2.0, seed)

    def potential(self, kind: str) -> np.ndarray:
        j = self.j_e if kind == "electric" else self.j_m
        return 2.0 * self.strength * j

    def to_json_dict(self) -> dict:
        return {
            "schema": "toricloc/disorder-field/v1",
            "distribution": {"kind": "uniform", "low": self.low, "high": self.high},
            "strength": self.strength,
            "seed": int(self.seed),
        }

    @classmethod
    def from_json_dict(cls, doc: dict, geometry: LatticeGeometry) -> "DisorderField":
        if doc.get("schema") != "toricloc/disorder-field/v1":
            raise ValueError(f"unknown schema {doc.get('schema')!r}")
        dist = doc["distribution"]
        f = cls.uniform(
            geometry, float(dist["low"]), float(dist["high"]), int(doc["seed"])
        )
        f.strength = float(doc["strength"])
        return f


@dataclass
class HoppingHamiltonian:
    """Hermitian hopping matrix over same-size defect configurations."""

    geometry: LatticeGeometry
    defect_type: str
    n_defects: int
    basis: list[tuple[int, ...]]
    index: dict[tuple[int, ...], int]
    rows: np.ndarray
    cols: np.ndarray
    amplitudes: np.ndarray
    diagonal: np.ndarray
    terms: list[PerturbationTerm] = field(repr=False, default_factory=list)
    disorder: DisorderField | None = None
    string_edges: frozenset[int] = frozenset()

    @property
    def dim(self) -> int:
        return len(self.basis)

    def config_index(self, config) -> int:
        key = tuple(sorted(int(s) for s in config))
        try:
            return self.index[key]
        except KeyError:
            raise UnknownConfigurationError(
                f"configuration {key} is not in the {self.n_defects}-defect basis"
            ) from None

    def matrix(self) -> sp.csr_matrix:
        m = sp.coo_matrix(
            (self.amplitudes, (self.rows, self.cols)), shape=(self.dim, self.dim)
        ).tocsr()
        m = m + sp.diags(self.diagonal)
        return m.tocsr()

    def dense(self) -> np.ndarray:
        return self.matrix().toarray()


def _boundary_sites(geometry: LatticeGeometry, term: PerturbationTerm, kind: str):
    if kind == "electric":
        return tuple(sorted(geometry.edge_boundary_stars(term.edges())))
    return tuple(sorted(geometry.edge_boundary_plaquettes(term.edges())))


def build_defect_hamiltonian(
    geometry: LatticeGeometry,
    terms,
    disorder: DisorderField | None,
    n_defects: int,
    defect_type: str = "electric",
    string: LatticePath | None = None,
) -> HoppingHamiltonian:
    """Assemble the in-sector hopping matrix for n same-species defects.

    Hop amplitude between configurations c -> c' is the sum of coefficients
    over terms whose edge-set boundary toggles c into c'; moves changing the
    defect count (pair creation/annihilation, two defects fusing on one
    site) are excluded. The diagonal is the disorder potential summed over
    occupied sites. A dual (resp. primal) `string` multiplies each term's
    contribution by (-1)^(overlap with the string), realizing the braiding
    sign of a static opposite-species pair.
    """
    if defect_type not in _SECTOR_AXIS:
        raise ValueError(f"unknown defect type {defect_type!r}")
    if n_defects < 1:
        raise ValueError("need at least one defect")
    axis = _SECTOR_AXIS[defect_type]
    for t in terms:
        bad = [a for a in t.axes() if a != axis]
        if bad:
            raise AxisMismatchError(
                f"{defect_type} sector admits only {axis!r} factors; "
                f"term {t.support} leaves the sector"
            )

    n_sites = geometry.n_sites
    basis = list(combinations(range(n_sites), n_defects))
    index = {c: i for i, c in enumerate(basis)}

    string_edges = frozenset(string.edges) if string is not None else frozenset()
    if string_edges and (n_defects != 1 or defect_type != "electric"):
        raise UnsupportedSectorError(
            "braiding strings are supported for a single dynamic electric defect"
        )

    rows: list[int] = []
    cols: list[int] = []
    amps: list[float] = []
    diag_const = 0.0

    others_cache: dict[tuple[int, ...], list[tuple[int, ...]]] = {}

    for t in terms:
        xi = t.coefficient
        if string_edges:
            xi *= -1.0 if len(string_edges.intersection(t.edges())) % 2 else 1.0
        boundary = _boundary_sites(geometry, t, defect_type)
        b = len(boundary)
        if b == 0:
            diag_const += xi  # closed loop: acts as the identity in-sector
            continue
        half = b // 2
        if half > n_defects:
            continue  # needs more defects on the boundary than the sector has
        spectators = n_defects - half
        if boundary not in others_cache:
            bset = set(boundary)
            pool = [s for s in range(n_sites) if s not in bset]
            others_cache[boundary] = pool
        pool = others_cache[boundary]
        for occupied in combinations(boundary, half):
            target = tuple(s for s in boundary if s not in occupied)
            for rest in combinations(pool, spectators):
                c = tuple(sorted(occupied + rest))
                c2 = tuple(sorted(target + rest))
                rows.append(index[c2])
                cols.append(index[c])
                amps.append(xi)

    diagonal = np.full(len(basis), diag_const)
    if disorder is not None:
        v = disorder.potential(defect_type)
        occ = np.array(basis, dtype=np.int64).reshape(len(basis), n_defects)
        diagonal = diagonal + v[occ].sum(axis=1)

    return HoppingHamiltonian(
        geometry=geometry,
        defect_type=defect_type,
        n_defects=n_defects,
        basis=basis,
        index=index,
        rows=np.asarray(rows, dtype=np.int64),
        cols=np.asarray(cols, dtype=np.int64),
        amplitudes=np.asarray(amps, dtype=np.float64),
        diagonal=diagonal,
        terms=list(terms),
        disorder=disorder,
        string_edges=string_edges,
    )


def attach_braiding_string(
    hamiltonian: HoppingHamiltonian, string: LatticePath
) -> HoppingHamiltonian:
    """Negate every hop whose edges cross the dual string (rebuilds from terms)."""
    if hamiltonian.n_defects != 1 or hamiltonian.defect_type != "electric":
        raise UnsupportedSectorError(
            "braiding strings are supported for a single dynamic electric defect"
        )
    if string.kind != "dual":
        raise ValueError("braiding string must be a dual-lattice path")
    return build_defect_hamiltonian(
        hamiltonian.geometry,
        hamiltonian.terms,
        hamiltonian.disorder,
        hamiltonian.n_defects,
        hamiltonian.defect_type,
        string=string,
    )
