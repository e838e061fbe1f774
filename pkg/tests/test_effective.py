import numpy as np
import pytest

from toricloc import (
    DisorderField,
    PerturbationTerm,
    attach_braiding_string,
    build_defect_hamiltonian,
    build_torus,
    dual_path_through,
    exact_sector_projection,
    field_preset,
    shortest_dual_path,
)
from toricloc.errors import (
    AxisMismatchError,
    UnknownConfigurationError,
    UnsupportedSectorError,
)


def random_z_terms(g, rng, n_terms, max_m=2, cutoff=2.0):
    terms = []
    for _ in range(n_terms):
        if max_m == 1 or rng.random() < 0.5:
            sup = ((int(rng.integers(g.n_edges)), "z"),)
        else:
            while True:
                e1, e2 = rng.integers(g.n_edges, size=2)
                if e1 != e2 and g.edge_distance(int(e1), int(e2)) <= cutoff:
                    break
            sup = ((int(e1), "z"), (int(e2), "z"))
        terms.append(PerturbationTerm(float(rng.normal()), sup))
    return terms


def test_single_edge_terms_are_nearest_neighbor_hopping():
    g = build_torus(3)
    terms = field_preset(g, 1.0, (0, 0, 1))
    h = build_defect_hamiltonian(g, terms, None, 1, "electric")
    m = h.dense()
    assert np.abs(m - m.T).max() == 0.0
    for i, (a,) in enumerate(h.basis):
        for j, (b,) in enumerate(h.basis):
            from toricloc import periodic_l1_distance

            d = periodic_l1_distance(a, b, g.L)
            expect = 1.0 if d == 1 else 0.0
            assert m[i, j] == pytest.approx(expect), (a, b)


def test_oracle_equivalence_small():
    g = build_torus(2)
    rng = np.random.default_rng(21)
    for _ in range(3):
        terms = random_z_terms(g, rng, 6)
        m, basis = exact_sector_projection(terms, (1, 0), g)
        h = build_defect_hamiltonian(g, terms, None, 2, "electric")
        assert basis == h.basis
        assert np.abs(m.real - h.dense()).max() < 1e-12


def test_hardcore_exclusion():
    # a term whose boundary is exactly the occupied pair annihilates it:
    # the move leaves the sector and produces no matrix element
    g = build_torus(3)
    u, v = int(g.edge_stars[0][0]), int(g.edge_stars[0][1])
    term = PerturbationTerm(1.0, ((0, "z"),))
    h = build_defect_hamiltonian(g, [term], None, 2, "electric")
    i = h.config_index((u, v))
    m = h.dense()
    assert np.abs(m[i]).max() == 0.0
    # and every basis configuration keeps two distinct sites
    assert all(len(set(c)) == 2 for c in h.basis)


def test_diagonal_is_twice_the_coupling():
    g = build_torus(3)
    dis = DisorderField.uniform(g, 0.5, 2.5, seed=9)
    h = build_defect_hamiltonian(g, [], dis, 1, "electric")
    for i, (s,) in enumerate(h.basis):
        assert h.diagonal[i] == pytest.approx(2.0 * dis.j_e[s])
    # two defects add their potentials
    h2 = build_defect_hamiltonian(g, [], dis, 2, "electric")
    for i, (a, b) in enumerate(h2.basis):
        assert h2.diagonal[i] == pytest.approx(2.0 * (dis.j_e[a] + dis.j_e[b]))


def test_disorder_field_reproducible_and_positive():
    g = build_torus(6)
    d1 = DisorderField.uniform(g, 0.0, 25.0, seed=123)
    d2 = DisorderField.uniform(g, 0.0, 25.0, seed=123)
    assert (d1.j_e == d2.j_e).all() and (d1.j_m == d2.j_m).all()
    assert (d1.j_e > 0).all() and (d1.j_m > 0).all()
    d3 = DisorderField.uniform(g, 0.0, 25.0, seed=124)
    assert not (d1.j_e == d3.j_e).all()
    # potential_box: V = 2J uniform on (0, delta]
    pb = DisorderField.potential_box(g, 50.0, seed=7)
    v = pb.potential("electric")
    assert (v > 0).all() and (v <= 50.0).all()
    assert abs(v.mean() - 25.0) < 5.0


def test_disorder_json_roundtrip():
    g = build_torus(4)
    d = DisorderField.uniform(g, 0.25, 3.0, seed=55, strength=2.0)
    d.strength = 2.0
    back = DisorderField.from_json_dict(d.to_json_dict(), g)
    assert (back.j_e == d.j_e).all()
    assert back.strength == d.strength


def test_axis_mismatch_rejected():
    g = build_torus(2)
    terms = field_preset(g, 1.0, (1.0, 0, 0))
    with pytest.raises(AxisMismatchError):
        build_defect_hamiltonian(g, terms, None, 1, "electric")
    with pytest.raises(AxisMismatchError):
        build_defect_hamiltonian(g, field_preset(g, 1.0, (0, 0, 1.0)), None, 1,
                                 "magnetic")


def test_translation_covariance_without_disorder():
    g = build_torus(4)
    terms = field_preset(g, 1.0, (0, 0, 1))
    h = build_defect_hamiltonian(g, terms, None, 2, "electric")
    m = h.matrix().todok()
    rng = np.random.default_rng(2)
    for _ in range(60):
        (a, b) = h.basis[rng.integers(h.dim)]
        dx, dy = rng.integers(4, size=2)

        def shift(s):
            x, y = g.site_xy(int(s))
            return g.site_index(x + dx, y + dy)

        c1 = tuple(sorted((shift(a), shift(b))))
        for j, (u, v) in enumerate(h.basis):
            val = m[h.config_index((a, b)), j]
            c2 = tuple(sorted((shift(u), shift(v))))
            assert m[h.config_index(c1), h.config_index(c2)] == pytest.approx(val)


def test_unknown_configuration():
    g = build_torus(3)
    h = build_defect_hamiltonian(g, [], None, 2, "electric")
    with pytest.raises(UnknownConfigurationError):
        h.config_index((1, 1))


def test_braiding_string_rules():
    g = build_torus(8)
    terms = field_preset(g, 1.0, (0, 0, 1))
    dis = DisorderField.potential_box(g, 10.0, seed=5)
    h = build_defect_hamiltonian(g, terms, dis, 1, "electric")

    # empty-string attach is the identity operation
    empty = dual_path_through([(2, 2), (2, 2)], g) if False else None
    from toricloc.geometry import LatticePath

    h_same = attach_braiding_string(h, LatticePath(kind="dual", edges=[]))
    assert np.abs(h.dense() - h_same.dense()).max() == 0.0

    # crossing hops flip sign
    string = shortest_dual_path((2, 4), (6, 4), g)
    hb = attach_braiding_string(h, string)
    diff = hb.dense() - h.dense()
    flipped = np.argwhere(diff != 0)
    assert len(flipped) == 2 * len(string.edges)
    for i, j in flipped:
        assert hb.dense()[i, j] == -h.dense()[i, j]

    # a closed contractible string is a pure gauge: identical spectrum
    # (legs stay below L/2 so every staircase goes the short way)
    loop = dual_path_through([(1, 1), (1, 4), (4, 4), (4, 1), (1, 1)], g)
    hc = attach_braiding_string(h, loop)
    assert np.abs(
        np.linalg.eigvalsh(hc.dense()) - np.linalg.eigvalsh(h.dense())
    ).max() < 1e-10

    # unsupported sectors are refused
    h2 = build_defect_hamiltonian(g, terms, dis, 2, "electric")
    with pytest.raises(UnsupportedSectorError):
        attach_braiding_string(h2, string)


def test_homotopic_strings_conjugate_by_diagonal_sign():
    g = build_torus(8)
    terms = field_preset(g, 1.0, (0, 0, 1))
    dis = DisorderField.potential_box(g, 10.0, seed=6)
    h = build_defect_hamiltonian(g, terms, dis, 1, "electric")
    s1 = shortest_dual_path((1, 3), (6, 3), g)
    s2 = dual_path_through([(1, 3), (1, 6), (6, 6), (6, 3)], g)
    h1 = attach_braiding_string(h, s1).dense()
    h2 = attach_braiding_string(h, s2).dense()
    # find the diagonal sign vector relating them, then verify exactly
    ratio = np.ones(h1.shape[0])
    # the sign pattern is determined by connected propagation from site 0
    import collections

    signs = {0: 1.0}
    queue = collections.deque([0])
    adj = np.argwhere(h1 != 0)
    neighbors = collections.defaultdict(list)
    for i, j in adj:
        if i != j:
            neighbors[i].append(j)
    while queue:
        i = queue.popleft()
        for j in neighbors[i]:
            if j not in signs:
                signs[j] = signs[i] * np.sign(h1[i, j] * h2[i, j])
                queue.append(j)
    d = np.array([signs[i] for i in range(h1.shape[0])])
    assert np.abs(d[:, None] * h1 * d[None, :] - h2).max() < 1e-12


def test_hops_have_finite_range():
    # an m-edge term moves defects at most m steps
    g = build_torus(6)
    terms = tl_dipolar(g)
    h = build_defect_hamiltonian(g, terms, None, 2, "electric")
    m = h.matrix().tocoo()
    from toricloc import hausdorff_distance
    for i, j in zip(m.row, m.col):
        if i != j:
            d = hausdorff_distance(
                [g.site_xy(s) for s in h.basis[i]],
                [g.site_xy(s) for s in h.basis[j]],
                g.L,
            )
            assert d <= 2


def tl_dipolar(g):
    from toricloc import dipolar_preset

    return dipolar_preset(g, 1.0, cutoff=1.0)
