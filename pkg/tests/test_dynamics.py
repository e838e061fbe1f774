import numpy as np
import pytest

from toricloc import (
    DisorderField,
    LocalizationProfile,
    build_defect_hamiltonian,
    build_torus,
    escape_probability,
    evolve,
    field_preset,
    fit_localization_length,
    localization_study,
    sup_amplitude_profile,
)
from toricloc.errors import (
    InsufficientDataError,
    NonHermitianError,
    UnknownConfigurationError,
)


def test_zero_hamiltonian_is_identity():
    psi0 = np.array([0.6, 0.8j], dtype=complex)
    out = evolve(np.zeros((2, 2)), psi0, [0.0, 1.0, 7.5])
    assert np.abs(out - psi0).max() < 1e-14


def test_single_site_phase():
    e = 1.3
    out = evolve(np.array([[e]]), np.array([1.0 + 0j]), [0.0, 2.0])
    assert np.abs(out[1, 0] - np.exp(-1j * e * 2.0)) < 1e-12
    assert abs(np.linalg.norm(out[1]) - 1.0) < 1e-12


def test_two_site_rabi():
    # frozen closed form: |<2|exp(-iHt)|1>| = |sin(h t)|
    h = 0.9
    ts = np.linspace(0.0, 6.0, 25)
    out = evolve(np.array([[0.0, h], [h, 0.0]]), np.array([1, 0], complex), ts)
    assert np.abs(np.abs(out[:, 1]) - np.abs(np.sin(h * ts))).max() < 1e-12


def test_non_hermitian_rejected():
    with pytest.raises(NonHermitianError):
        evolve(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([1, 0], complex), [1.0])


def _small_system(delta=0.0, seed=1, L=6):
    g = build_torus(L)
    terms = field_preset(g, 1.0, (0, 0, 1))
    dis = DisorderField.potential_box(g, delta, seed) if delta else None
    return g, build_defect_hamiltonian(g, terms, dis, 2, "electric")


def test_unitarity_reversal_energy_conservation():
    g, h = _small_system(delta=3.0, seed=4)
    m = h.matrix()
    psi0 = np.zeros(h.dim, complex)
    psi0[h.config_index((0, 1))] = 1.0
    ts = [1.0, 3.0, 7.0]
    states = evolve(h, psi0, ts)
    norms = np.linalg.norm(states, axis=1)
    assert np.abs(norms - 1.0).max() < 1e-10
    # reverse evolution returns the start
    back = evolve(h, states[-1], [-ts[-1]])
    assert np.abs(back[0] - psi0).max() < 1e-8
    # energy conservation
    e0 = np.vdot(psi0, m @ psi0).real
    for s in states:
        assert abs(np.vdot(s, m @ s).real - e0) < 1e-8


def test_dense_and_expm_agree():
    g, h = _small_system(delta=5.0, seed=8)
    psi0 = np.zeros(h.dim, complex)
    psi0[h.config_index((7, 8))] = 1.0
    ts = [0.5, 2.0, 4.0]
    a = evolve(h, psi0, ts, method="dense")
    b = evolve(h, psi0, ts, method="expm")
    assert np.abs(a - b).max() < 1e-8


def test_profile_at_t0_is_a_delta():
    g, h = _small_system()
    x0 = (int(g.site_index(2, 2)), int(g.site_index(2, 3)))
    prof = sup_amplitude_profile(h, x0, [0.0])
    i0 = h.config_index(x0)
    assert prof.amplitudes[i0] == pytest.approx(1.0)
    others = np.delete(prof.amplitudes, i0)
    assert np.abs(others).max() < 1e-12


def test_profile_unknown_start():
    g, h = _small_system()
    with pytest.raises(UnknownConfigurationError):
        sup_amplitude_profile(h, (0, 0), [1.0])


def test_escape_probability_limits():
    g, h = _small_system()
    psi0 = np.zeros(h.dim, complex)
    psi0[h.config_index((0, 1))] = 1.0
    assert escape_probability(h, psi0, range(h.dim), 5.0) == pytest.approx(1.0)
    assert escape_probability(h, psi0, [], 5.0) == 0.0


def test_escape_probability_equilibrates_to_diagonal_ensemble():
    # oracle: infinite-time average from the eigendecomposition, with
    # degenerate levels grouped (the free lattice is highly degenerate)
    g = build_torus(40)
    terms = field_preset(g, 1.0, (0, 0, 1))
    h = build_defect_hamiltonian(g, terms, None, 1, "electric")
    m = h.dense()
    w, v = np.linalg.eigh(m)
    i0 = h.config_index((int(g.site_index(20, 20)),))
    region = [h.config_index((int(g.site_index(x, y)),))
              for x in range(19, 22) for y in range(19, 22)]
    c0 = v[i0, :]
    # group eigenvalues into degenerate clusters
    order = np.argsort(w)
    clusters = []
    start = 0
    for k in range(1, len(w) + 1):
        if k == len(w) or w[order[k]] - w[order[start]] > 1e-9:
            clusters.append(order[start:k])
            start = k
    p_bar = 0.0
    for x in region:
        for idx in clusters:
            p_bar += abs(np.sum(v[x, idx] * np.conj(c0[idx]))) ** 2
    psi0 = np.zeros(h.dim, complex)
    psi0[i0] = 1.0
    rng = np.random.default_rng(17)
    ts = np.sort(rng.uniform(300.0, 3000.0, 80))
    probs = escape_probability(h, psi0, region, ts)
    assert abs(probs.mean() - p_bar) < 0.35 * p_bar
    # equilibrated level is at the uniform-spreading scale |region|/L^2
    assert p_bar < 6.0 * len(region) / g.n_sites


def test_fit_examples():
    d = np.arange(12)
    prof = LocalizationProfile(distances=d, amplitudes=np.exp(-d / 2.0),
                               metric="distance")
    fit = fit_localization_length(prof)
    assert abs(fit.xi_loc - 2.0) < 1e-6
    assert not fit.delocalized

    flat = LocalizationProfile(distances=d, amplitudes=np.full(12, 0.3),
                               metric="distance")
    fit = fit_localization_length(flat)
    assert fit.delocalized

    short = LocalizationProfile(distances=np.arange(3),
                                amplitudes=np.exp(-np.arange(3.0)),
                                metric="distance")
    with pytest.raises(InsufficientDataError):
        fit_localization_length(short)


def test_localization_study_reproducible_and_binned():
    g = build_torus(5)
    terms = field_preset(g, 1.0, (0, 0, 1))
    x0 = [(2, 2), (2, 3)]
    p1 = localization_study(g, terms, 2, x0, np.arange(1, 6.0), delta=8.0,
                            realizations=3, master_seed=99)
    p2 = localization_study(g, terms, 2, x0, np.arange(1, 6.0), delta=8.0,
                            realizations=3, master_seed=99)
    assert (p1.amplitudes == p2.amplitudes).all()
    assert p1.per_realization.shape == (3, len(p1.distances))
    assert p1.metric == "relative"
    bins, env = p1.envelope()
    assert (np.diff(bins) > 0).all()
    assert env.max() <= 1.0 + 1e-12
    # delta=0 collapses to a single realization
    p0 = localization_study(g, terms, 2, x0, np.arange(1, 6.0), delta=0.0,
                            realizations=5, master_seed=99)
    assert p0.per_realization.shape[0] == 1


def test_profile_csv_roundtrip(tmp_path):
    g = build_torus(4)
    terms = field_preset(g, 1.0, (0, 0, 1))
    prof = localization_study(g, terms, 1, [(1, 1)], [1.0, 2.0], delta=2.0,
                              realizations=2, master_seed=3)
    path = tmp_path / "prof.csv"
    prof.metadata["manifest"] = "m.json"
    prof.write_csv(path)
    text = path.read_text().splitlines()
    assert text[0] == "# manifest: m.json"
    assert text[1].split(",") == ["distance", "sup_amplitude", "realization_id"]
    assert len(text) == 2 + 3 * len(prof.distances)
