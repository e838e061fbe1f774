"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances and protocol parameters are pinned here; nothing is deferred to
later calibration. The disorder-scan fixture (shared by the two critical-
disorder criteria) is the longest stage and runs the same code path as the
`scan` subcommand.
"""

import json
import subprocess
import sys
import warnings

import numpy as np
import pytest

from toricloc import (
    BoseModel,
    HopClass,
    ScalingCurve,
    ballistic_escape_probe,
    build_defect_hamiltonian,
    build_fiber,
    build_torus,
    consecutive_intersections,
    decode,
    exact_sector_projection,
    extrapolate_critical,
    field_preset,
    fit_localization_length,
    gaussian_packet,
    localization_study,
    logical_class,
    memory_experiment,
    random_short_range_inhomogeneity,
    run_qmc,
    tune_mu,
)
from toricloc.decoder import paired_failure_z
from toricloc.dynamics import LocalizationProfile
from toricloc.geometry import LatticePath, shortest_dual_path
from toricloc.perturbations import PerturbationTerm
from toricloc.relative_motion import PREFACTOR
from toricloc.seeds import seed_derive
from toricloc.spin_oracle import Syndrome

from oracles import brute_force_pairing_cost, hardcore_ed

pytestmark = pytest.mark.acceptance


def report(criterion, ok, detail):
    line = f"ACCEPTANCE {'PASS' if ok else 'FAIL'} [{criterion}] {detail}"
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line


# -- 1. oracle equivalence ------------------------------------------------------


def test_oracle_equivalence_l3():
    g = build_torus(3)
    rng = np.random.default_rng(20260809)
    worst = 0.0
    for _ in range(10):
        terms = []
        for _ in range(int(rng.integers(3, 8))):
            if rng.random() < 0.5:
                sup = ((int(rng.integers(g.n_edges)), "z"),)
            else:
                while True:
                    e1, e2 = rng.integers(g.n_edges, size=2)
                    if e1 != e2 and g.edge_distance(int(e1), int(e2)) <= 2.0:
                        break
                sup = ((int(e1), "z"), (int(e2), "z"))
            terms.append(PerturbationTerm(float(rng.normal()), sup))
        m_oracle, basis = exact_sector_projection(terms, (1, 0), g)
        h = build_defect_hamiltonian(g, terms, None, 2, "electric")
        # align the statevector basis with the builder's configuration order
        perm = [h.config_index(c) for c in basis]
        m_eff = h.dense()[np.ix_(perm, perm)]
        worst = max(worst, float(np.abs(m_oracle.real - m_eff).max()))
        worst = max(worst, float(np.abs(m_oracle.imag).max()))
    report(
        "1 oracle equivalence",
        worst < 1e-12,
        f"10 random Z-only sets on L=3, max entry deviation {worst:.2e} < 1e-12",
    )


# -- 2. two-defect localization (Fig. 1 left, property form) ---------------------


def test_two_defect_localization_profile():
    g = build_torus(10)
    terms = field_preset(g, 1.0, (0, 0, 1))
    x0 = [(4, 5), (5, 5)]  # nearest-neighbour pair
    t_grid = np.arange(1.0, 61.0)
    disordered = localization_study(
        g, terms, 2, x0, t_grid, delta=50.0, realizations=20,
        master_seed=1618, metric="relative", method="expm",
    )
    clean = localization_study(
        g, terms, 2, x0, t_grid, delta=0.0, realizations=1,
        master_seed=1618, metric="relative", method="expm",
    )
    bins_d, env_d = disordered.envelope()
    bins_c, env_c = clean.envelope()
    ratio_d = env_d[-1] / env_d[0]
    ratio_c = env_c[-1] / env_c[0]
    fit = fit_localization_length(disordered)
    ok = (
        ratio_d < 1e-2
        and ratio_c > 1e-1
        and not fit.delocalized
        and np.isfinite(fit.xi_loc)
        and fit.xi_loc > 0
    )
    report(
        "2 pair localization",
        ok,
        f"delta=50: envelope ratio {ratio_d:.2e} < 1e-2, xi={fit.xi_loc:.2f}; "
        f"delta=0: ratio {ratio_c:.2f} > 1e-1",
    )


# -- 3. braiding string barely affects localization (Fig. 1 right) ----------------


def _string_profiles():
    g = build_torus(40)
    terms = field_preset(g, 1.0, (0, 0, 1))
    straight = shortest_dual_path((10, 20), (30, 20), g)
    assert len(straight) == 20
    x0 = [(20, 20)]
    t_grid = np.arange(1.0, 101.0)
    kw = dict(metric="distance", method="dense")
    with_string = localization_study(
        g, terms, 1, x0, t_grid, delta=50.0, realizations=10,
        master_seed=2718, string=straight, **kw,
    )
    without = localization_study(
        g, terms, 1, x0, t_grid, delta=50.0, realizations=10,
        master_seed=2718, string=None, **kw,
    )
    return g, terms, straight, with_string, without


def _floored_fit(profile, floor=1e-12):
    bins, env = profile.envelope()
    keep = env > floor  # below this the propagator is numerical noise
    return fit_localization_length(
        LocalizationProfile(distances=bins[keep], amplitudes=env[keep],
                            metric=profile.metric)
    )


def test_braiding_string_and_gauge():
    g, terms, straight, with_string, without = _string_profiles()
    xi_s = _floored_fit(with_string).xi_loc
    xi_0 = _floored_fit(without).xi_loc
    rel = abs(xi_s - xi_0) / (0.5 * (xi_s + xi_0))

    # exact gauge property: homotopic strings, identical disorder
    from toricloc import DisorderField, attach_braiding_string, sup_amplitude_profile
    from toricloc.geometry import dual_path_through

    dis = DisorderField.potential_box(g, 50.0, seed=seed_derive(2718, 0))
    h = build_defect_hamiltonian(g, terms, dis, 1, "electric")
    h1 = attach_braiding_string(h, straight)
    detour = dual_path_through([(10, 20), (10, 23), (30, 23), (30, 20)], g)
    h2 = attach_braiding_string(h, detour)
    t_grid = np.arange(1.0, 101.0)
    p1 = sup_amplitude_profile(h1, [(20, 20)], t_grid, metric="distance",
                               method="dense")
    p2 = sup_amplitude_profile(h2, [(20, 20)], t_grid, metric="distance",
                               method="dense")
    gauge_dev = float(np.abs(p1.amplitudes - p2.amplitudes).max())

    ok = rel <= 0.25 and gauge_dev < 1e-8
    report(
        "3 braiding phases",
        ok,
        f"xi with string {xi_s:.3f} vs without {xi_0:.3f} "
        f"(rel diff {100 * rel:.1f}% <= 25%); homotopic-string profile "
        f"deviation {gauge_dev:.2e} < 1e-8",
    )


# -- 4. ballistic escape of the relative motion -----------------------------------


def test_relative_motion_escape():
    classes = [HopClass((1, 0), 1.0), HopClass((0, 1), 1.0)]
    fiber = build_fiber((0.0, 0.0), classes, 60)
    # impurity at half the hopping scale: scattering without deep bound states
    fiber = fiber.with_inhomogeneity(
        random_short_range_inhomogeneity(
            60, support_radius=4, strength=0.5 * PREFACTOR, seed=12
        )
    )
    psi0 = gaussian_packet(fiber, (0.0, 0.0), 3.0, (np.pi / 2, np.pi / 2))
    bound = ballistic_escape_probe(fiber, psi0, [0.0], region_halfwidth=2)
    times = np.linspace(0.0, 0.92 * bound.reflection_time, 9)
    rep = ballistic_escape_probe(fiber, psi0, times, region_halfwidth=2,
                                 threshold=0.05)
    ok = rep.escaped and not rep.contaminated
    pmin = float(rep.in_region_probability.min())
    report(
        "4 relative escape",
        ok,
        f"central 5x5 probability reaches {pmin:.3f} < 0.05 at "
        f"t={rep.threshold_time:.0f} before reflection bound "
        f"{rep.reflection_time:.0f}",
    )


# -- 5. decoder optimality and homotopy invariance ---------------------------------


def test_decoder_matching_and_homotopy():
    g = build_torus(12)
    rng = np.random.default_rng(5150)
    mismatches = 0
    for _ in range(500):
        n = 2 * int(rng.integers(1, 5))
        pts = [int(p) for p in rng.choice(g.n_stars, n, replace=False)]
        pairing, _ = decode(Syndrome(frozenset(pts), frozenset()), g)
        if pairing.cost != brute_force_pairing_cost(pts, g.L):
            mismatches += 1

    g8 = build_torus(8)
    edges = set(g8.edge_index(0, x, 3) for x in range(8))
    base = logical_class([LatticePath("primal", sorted(edges), None)], [], g8)
    changes = 0
    for _ in range(1000):
        p = int(rng.integers(g8.n_plaquettes))
        edges ^= set(int(e) for e in g8.plaquette_edges[p])
        out = logical_class([LatticePath("primal", sorted(edges), None)], [], g8)
        if out != base:
            changes += 1
    ok = mismatches == 0 and changes == 0
    report(
        "5 decoder",
        ok,
        f"500 syndromes matched optimally ({mismatches} mismatches); "
        f"1000 local deformations left the logical class unchanged "
        f"({changes} changes)",
    )


# -- 6. memory experiment: disorder protects the stored qubit ----------------------


def test_memory_experiment_significance():
    g = build_torus(10)
    terms = field_preset(g, 1.0, (0, 0, 1))
    t_readout = 4.0 * g.L
    free = memory_experiment(g, terms, delta=0.0, t_readout=t_readout,
                             trials=200, seed=2026)
    pinned = memory_experiment(g, terms, delta=50.0, t_readout=t_readout,
                               trials=200, seed=2026)
    z = paired_failure_z(free, pinned)
    ok = z >= 3.0 and pinned.failure_rate < free.failure_rate
    report(
        "6 memory experiment",
        ok,
        f"failure rate {free.failure_rate:.3f} (delta=0) vs "
        f"{pinned.failure_rate:.3f} (delta=50), one-sided z={z:.1f} >= 3",
    )


# -- 7. QMC exactness on the 2x2 lattice --------------------------------------------


def test_qmc_matches_exact_diagonalization():
    model = BoseModel(L=2, beta=2.0, mu=0.0, delta=0.0, t=1.0, seed=0)
    e_exact, n_exact, _ = hardcore_ed(model)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        obs = run_qmc(model, thermalization=20_000, sweeps=1_000_000, bins=64,
                      chain_seed=424242)
    de = abs(obs.energy - e_exact) / obs.energy_err
    dn = abs(obs.density - n_exact) / obs.density_err
    ok = de < 3.0 and dn < 3.0 and obs.metadata["sweeps"] >= 1_000_000
    report(
        "7 qmc exactness",
        ok,
        f"energy {obs.energy:.4f} vs {e_exact:.4f} ({de:.2f} sigma), "
        f"density {obs.density:.4f} vs {n_exact:.4f} ({dn:.2f} sigma), "
        f"10^6 measurement sweeps",
    )


# -- 8. clean superfluid ---------------------------------------------------------------


def test_clean_superfluid():
    model = BoseModel(L=8, beta=8.0, mu=0.0, delta=0.0, t=1.0, seed=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        obs = run_qmc(model, thermalization=4000, sweeps=30000, bins=40,
                      chain_seed=171717)
    sig = obs.rho_s / obs.rho_s_err
    ok = sig > 5.0 and abs(obs.density - 0.5) < 0.02
    report(
        "8 clean superfluid",
        ok,
        f"rho_s = {obs.rho_s:.4f} +- {obs.rho_s_err:.4f} "
        f"({sig:.1f} sigma > 0) at half filling",
    )


# -- 9/10. desk-scale critical-disorder protocol ----------------------------------------

DESK_SIZES = (6, 8, 12)
DESK_DELTAS_125 = (4.0, 5.0, 6.0, 7.0, 8.0)
DESK_DELTAS_PH = (4.0, 5.5, 7.0, 8.5)
DESK_SWEEPS = dict(thermalization=2500, measurement=10000, bins=40)
DESK_MASTER = 77001


def _desk_cell(density, L, delta, disorder_seed, warm_mu):
    model = BoseModel(L=L, beta=float(L), mu=0.0, delta=delta, t=1.0,
                      seed=disorder_seed)
    bracket = None if warm_mu is None else (warm_mu - 1.5, warm_mu + 1.5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mu = tune_mu(model, density, tolerance=0.005,
                     master_seed=seed_derive(disorder_seed, 1),
                     initial_bracket=bracket)
        obs = run_qmc(model.with_mu(mu),
                      thermalization=DESK_SWEEPS["thermalization"],
                      sweeps=DESK_SWEEPS["measurement"],
                      bins=DESK_SWEEPS["bins"],
                      chain_seed=seed_derive(disorder_seed, 2))
    return mu, obs


def _desk_curves(density, deltas, realizations, salt):
    curves = []
    for L in DESK_SIZES:
        w2 = {d: [] for d in deltas}
        for r in range(realizations):
            warm = None
            for d in deltas:
                seed = seed_derive(DESK_MASTER, salt + hash((L, r, d)) % (1 << 32))
                mu, obs = _desk_cell(density, L, d, seed, warm)
                warm = mu
                w2[d].append(obs.w2)
        curves.append(
            ScalingCurve(
                L=L, beta_rule="L", density=density,
                deltas=np.asarray(deltas),
                w2=np.array([np.mean(w2[d]) for d in deltas]),
                stderr=np.array(
                    [np.std(w2[d], ddof=1) / np.sqrt(realizations) for d in deltas]
                ),
                n_realizations=realizations,
            )
        )
    return curves


@pytest.fixture(scope="module")
def desk_scan():
    out = {}
    out[0.125] = _desk_curves(0.125, DESK_DELTAS_125, realizations=20, salt=0)
    out[0.25] = _desk_curves(0.25, DESK_DELTAS_PH, realizations=12, salt=1 << 33)
    out[0.75] = _desk_curves(0.75, DESK_DELTAS_PH, realizations=12, salt=1 << 34)
    return out


def _critical_estimate(curves, density):
    inters = consecutive_intersections(curves, bootstrap=256, bootstrap_seed=7)
    return extrapolate_critical(inters, mode="constant", density=density)


def test_critical_disorder_bracket(desk_scan):
    cp = _critical_estimate(desk_scan[0.125], 0.125)
    ok = 4.8 <= cp.delta_c <= 7.8
    pairs = ", ".join(
        f"L{p[0]}-L{p[1]}: {d:.2f}+-{e:.2f}" for p, d, e in cp.intersections
    )
    report(
        "9 critical disorder bracket",
        ok,
        f"n=0.125 desk estimate {cp.delta_c:.2f} +- {cp.err:.2f} in [4.8, 7.8] "
        f"(crossings {pairs}; thermodynamic reference 6.3(2))",
    )


def test_particle_hole_symmetric_critical_point(desk_scan):
    cp_a = _critical_estimate(desk_scan[0.25], 0.25)
    cp_b = _critical_estimate(desk_scan[0.75], 0.75)
    diff = abs(cp_a.delta_c - cp_b.delta_c)
    err = float(np.hypot(cp_a.err, cp_b.err))
    ok = diff <= 2.0 * err
    report(
        "10 particle-hole symmetry",
        ok,
        f"delta_c(0.25) = {cp_a.delta_c:.2f}+-{cp_a.err:.2f}, "
        f"delta_c(0.75) = {cp_b.delta_c:.2f}+-{cp_b.err:.2f}, "
        f"difference {diff:.2f} <= 2 sigma = {2 * err:.2f}",
    )


# -- 11. manifest determinism -------------------------------------------------------------


def _cli(args):
    return subprocess.run([sys.executable, "-m", "toricloc.cli"] + args,
                          capture_output=True, text=True)


def test_manifest_rerun_determinism(tmp_path):
    configs = {
        "evolve": {"L": 5, "delta": 6.0, "t_max": 5, "n_defects": 2, "hop": 1.0,
                   "realizations": 2, "seed": 3, "label": "ev"},
        "relative": {"k": [0.0, 0.0], "box_radius": 16, "hop": 1.0,
                     "inhomogeneity": {"support_radius": 3, "strength": 0.001},
                     "packet": {"center": [0, 0], "sigma": 2.5,
                                "q": [1.5708, 1.5708]},
                     "region_halfwidth": 2, "n_times": 5, "seed": 4,
                     "label": "rel"},
        "decode-experiment": {"L": 5, "deltas": [0.0, 20.0], "t_readout": 6.0,
                              "trials": 8, "hop": 1.0, "seed": 5,
                              "label": "mem"},
        "qmc": {"L": 3, "beta": 2.0, "delta": 1.0, "mu": 0.2, "seed": 6,
                "sweeps": {"thermalization": 100, "measurement": 1200,
                           "bins": 32}, "label": "q"},
        "scan": {"densities": [0.5], "sizes": [3, 4], "beta_rule": "L",
                 "deltas": [1.0, 6.0, 11.0], "realizations": 2, "seed": 7,
                 "sweeps": {"thermalization": 200, "measurement": 1000,
                            "bins": 32}, "label": "sc"},
    }
    failures = []
    for sub, cfg in configs.items():
        cfg_path = tmp_path / f"{sub}.json"
        cfg_path.write_text(json.dumps(cfg))
        first = tmp_path / sub / "a"
        second = tmp_path / sub / "b"
        r1 = _cli([sub, "--config", str(cfg_path), "--out-dir", str(first)])
        if r1.returncode != 0:
            failures.append(f"{sub}: first run rc={r1.returncode} {r1.stderr}")
            continue
        manifest = first / f"{cfg['label']}_manifest.json"
        r2 = _cli(["rerun", str(manifest), "--out-dir", str(second)])
        if r2.returncode != 0:
            failures.append(f"{sub}: rerun rc={r2.returncode} {r2.stderr}")
            continue
        outputs = json.loads(manifest.read_text())["outputs"]
        for name in outputs:
            if (first / name).read_bytes() != (second / name).read_bytes():
                failures.append(f"{sub}: {name} differs")

    # analyze consumes scan outputs; rerun it the same way
    an_cfg = tmp_path / "an.json"
    an_cfg.write_text(json.dumps({
        "curves": str(tmp_path / "scan" / "a" / "sc_curves.json"),
        "mode": "constant", "bootstrap": 32, "bootstrap_seed": 1,
        "label": "an",
    }))
    a1 = tmp_path / "analyze" / "a"
    a2 = tmp_path / "analyze" / "b"
    r = _cli(["analyze", "--config", str(an_cfg), "--out-dir", str(a1)])
    if r.returncode != 0:
        failures.append(f"analyze: rc={r.returncode} {r.stderr}")
    else:
        r = _cli(["rerun", str(a1 / "an_manifest.json"), "--out-dir", str(a2)])
        if r.returncode != 0:
            failures.append(f"analyze rerun: rc={r.returncode}")
        else:
            for name in json.loads((a1 / "an_manifest.json").read_text())["outputs"]:
                if (a1 / name).read_bytes() != (a2 / name).read_bytes():
                    failures.append(f"analyze: {name} differs")
    report(
        "11 determinism",
        not failures,
        "all six subcommands reproduce byte-identical outputs from their "
        "manifests" if not failures else "; ".join(failures),
    )
