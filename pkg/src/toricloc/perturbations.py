"""Few-body Pauli perturbation terms and the standard presets.

A term is one product  xi * sigma_{e1,a1} ... sigma_{em,am}  over m distinct
edges. Collections of such terms drive the in-sector defect hopping; presets
cover a homogeneous field (one single-edge term per edge) and a truncated
dipolar ZZ interaction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .geometry import LatticeGeometry

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class PerturbationTerm:
    """One coupling: coefficient and a list of (edge index, Pauli axis)."""

    coefficient: float
    support: tuple[tuple[int, str], ...]

    def __post_init__(self):
        if not self.support:
            raise ValueError("term support must be nonempty")
        edges = [e for e, _ in self.support]
        if len(set(edges)) != len(edges):
            raise ValueError("term edges must be pairwise distinct")
        for _, axis in self.support:
            if axis not in AXES:
                raise ValueError(f"unknown Pauli axis {axis!r}")

    @property
    def m(self) -> int:
        return len(self.support)

    def edges(self) -> tuple[int, ...]:
        return tuple(e for e, _ in self.support)

    def axes(self) -> tuple[str, ...]:
        return tuple(a for _, a in self.support)

    def radius(self, geometry: LatticeGeometry) -> float:
        """Max pairwise midpoint distance of the support edges."""
        es = self.edges()
        if len(es) == 1:
            return 0.0
        return max(
            geometry.edge_distance(a, b) for i, a in enumerate(es) for b in es[i + 1 :]
        )


def single_axis_terms(terms, axis: str) -> bool:
    """True when every factor of every term uses the given axis."""
    return all(all(a == axis for a in t.axes()) for t in terms)


def field_preset(geometry: LatticeGeometry, eta: float, b_vector) -> list[PerturbationTerm]:
    """Homogeneous field coupling: one term per edge and nonzero B component.

    B parallel to z yields exactly one Z term per edge with coefficient
    eta * B_z.
    """
    bx, by, bz = (float(c) for c in b_vector)
    terms = []
    for e in range(geometry.n_edges):
        for comp, axis in ((bx, "x"), (by, "y"), (bz, "z")):
            if comp != 0.0:
                terms.append(PerturbationTerm(eta * comp, ((e, axis),)))
    return terms


def dipolar_preset(
    geometry: LatticeGeometry, eta: float, cutoff: float
) -> list[PerturbationTerm]:
    """ZZ part of a 1/r^3 dipolar coupling, truncated at midpoint distance
    `cutoff`.

    The separation vectors lie in the lattice plane, so the anisotropic part
    carries no ZZ component; the ordered double sum over edge pairs collapses
    to a factor 2 per unordered pair.
    """
    if cutoff < 1:
        raise ValueError(f"dipolar cutoff must be >= 1, got {cutoff}")
    terms = []
    for e1 in range(geometry.n_edges):
        for e2 in range(e1 + 1, geometry.n_edges):
            r = geometry.edge_distance(e1, e2)
            if 0.0 < r <= cutoff:
                terms.append(
                    PerturbationTerm(2.0 * eta / r**3, ((e1, "z"), (e2, "z")))
                )
    return terms


# -- JSON schema for term lists and disorder fields --------------------------

def terms_to_json(terms, path=None) -> str:
    """Serialize a term list to the documented JSON schema."""
    doc = {
        "schema": "toricloc/perturbation-terms/v1",
        "terms": [
            {"coefficient": float(t.coefficient),
             "support": [[int(e), a] for e, a in t.support]}
            for t in terms
        ],
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def terms_from_json(source) -> list[PerturbationTerm]:
    """Inverse of :func:`terms_to_json`; accepts a JSON string or a path."""
    if isinstance(source, str) and source.lstrip().startswith("{"):
        doc = json.loads(source)
    else:
        with open(source) as fh:
            doc = json.load(fh)
    if doc.get("schema") != "toricloc/perturbation-terms/v1":
        raise ValueError(f"unknown schema {doc.get('schema')!r}")
    return [
        PerturbationTerm(
            float(t["coefficient"]),
            tuple((int(e), str(a)) for e, a in t["support"]),
        )
        for t in doc["terms"]
    ]
