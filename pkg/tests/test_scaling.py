import numpy as np
import pytest

from toricloc import (
    CrossingResult,
    ScalingCurve,
    beta_for,
    collapse_table,
    consecutive_intersections,
    extrapolate_critical,
    intersection,
    phase_diagram,
)
from toricloc.errors import (
    AmbiguousCrossingError,
    InsufficientDataError,
    NoCrossingError,
)


def linear_curve(L, delta_c, deltas, a=2.0, err=0.02, noise=None, rng=None,
                 density=0.125):
    # the family y = a - L*(delta - delta_c) crosses at delta_c for every pair
    y = a - L * (np.asarray(deltas) - delta_c)
    if noise:
        y = y + rng.standard_normal(len(deltas)) * noise
    return ScalingCurve(
        L=L, beta_rule="L", density=density, deltas=np.asarray(deltas),
        w2=y, stderr=np.full(len(deltas), err), n_realizations=8,
    )


def test_beta_rules():
    assert beta_for("L", 12) == 12.0
    assert beta_for("L2_OVER_16", 16) == 16.0
    with pytest.raises(ValueError):
        beta_for("cubic", 4)


def test_curve_validation():
    with pytest.raises(ValueError):
        ScalingCurve(L=4, beta_rule="L", density=0.5,
                     deltas=np.array([2.0, 1.0]), w2=np.zeros(2),
                     stderr=np.zeros(2))


def test_identical_curves_rejected():
    deltas = np.linspace(3, 9, 7)
    a = linear_curve(8, 6.0, deltas)
    with pytest.raises(ValueError):
        intersection(a, a)
    b = ScalingCurve(L=12, beta_rule="L", density=0.125, deltas=deltas,
                     w2=a.w2.copy(), stderr=a.stderr.copy())
    with pytest.raises(NoCrossingError):
        intersection(a, b)  # difference never changes sign


def test_synthetic_crossing_recovered_exactly():
    deltas = np.linspace(4, 9, 11)
    a = linear_curve(8, 6.3, deltas)
    b = linear_curve(12, 6.3, deltas)
    res = intersection(a, b, bootstrap=64, bootstrap_seed=3)
    assert res.delta_star == pytest.approx(6.3, abs=1e-9)
    assert res.pair == (8, 12)
    assert res.err < 0.05


def test_multiple_crossings_listed():
    deltas = np.linspace(0, 2 * np.pi, 25)
    a = ScalingCurve(L=4, beta_rule="L", density=0.5, deltas=deltas,
                     w2=np.sin(deltas + 0.5), stderr=np.full(25, 0.01))
    b = ScalingCurve(L=8, beta_rule="L", density=0.5, deltas=deltas,
                     w2=np.zeros(25), stderr=np.full(25, 0.01))
    with pytest.raises(AmbiguousCrossingError) as exc:
        intersection(a, b)
    assert len(exc.value.crossings) >= 2


def test_no_overlap():
    a = linear_curve(8, 6.0, np.linspace(1, 3, 5))
    b = linear_curve(12, 6.0, np.linspace(5, 8, 5))
    with pytest.raises(NoCrossingError):
        intersection(a, b)


def test_extrapolation_modes():
    # constant intersections: the weighted mean with pooled error
    inters = [((6, 8), 5.0, 0.2), ((8, 12), 5.0, 0.2)]
    cp = extrapolate_critical(inters, mode="constant", density=0.125)
    assert cp.delta_c == pytest.approx(5.0)
    assert cp.err == pytest.approx(0.2 / np.sqrt(2))
    # Delta*(L) = 6.3 + 2/L recovers 6.3 under the linear-in-1/L fit
    pairs = [(6, 8), (8, 12), (12, 16), (16, 24)]
    inters = [
        (p, 6.3 + 2.0 / (0.5 * (p[0] + p[1])), 0.05) for p in pairs
    ]
    cp = extrapolate_critical(inters, mode="linear", density=0.125)
    assert cp.delta_c == pytest.approx(6.3, abs=1e-9)
    with pytest.raises(InsufficientDataError):
        extrapolate_critical(inters[:1], mode="linear")
    with pytest.raises(ValueError):
        extrapolate_critical(inters, mode="quadratic")


def test_drop_smallest():
    inters = [((4, 6), 99.0, 0.05), ((8, 12), 6.4, 0.05), ((12, 16), 6.35, 0.05)]
    cp = extrapolate_critical(inters, mode="constant", drop_smallest=True)
    assert 6.2 < cp.delta_c < 6.5


def test_determinism():
    deltas = np.linspace(4, 9, 9)
    rng = np.random.default_rng(0)
    a = linear_curve(8, 6.3, deltas, noise=0.05, rng=rng)
    b = linear_curve(12, 6.3, deltas, noise=0.05, rng=rng)
    r1 = intersection(a, b, bootstrap=128, bootstrap_seed=9)
    r2 = intersection(a, b, bootstrap=128, bootstrap_seed=9)
    assert r1.delta_star == r2.delta_star and r1.err == r2.err


def test_beta_rule_protocols_agree_on_synthetic_family():
    # same underlying crossing produced by both temperature scalings
    deltas = np.linspace(4, 9, 11)
    rng = np.random.default_rng(4)
    points = {}
    for rule in ("L", "L2_OVER_16"):
        curves = []
        for L in (8, 12, 16):
            c = linear_curve(L, 6.3, deltas, noise=0.04, rng=rng)
            c = ScalingCurve(L=L, beta_rule=rule, density=0.125,
                             deltas=c.deltas, w2=c.w2, stderr=c.stderr)
            curves.append(c)
        inters = consecutive_intersections(curves, bootstrap=128,
                                           bootstrap_seed=11)
        points[rule] = extrapolate_critical(inters, mode="linear",
                                            density=0.125)
    d = abs(points["L"].delta_c - points["L2_OVER_16"].delta_c)
    err = np.hypot(points["L"].err, points["L2_OVER_16"].err)
    assert d < 2 * max(err, 0.02)


def test_phase_diagram_collects_failures():
    deltas = np.linspace(4, 9, 9)
    good = [linear_curve(8, 6.0, deltas, density=0.25),
            linear_curve(12, 6.0, deltas, density=0.25),
            linear_curve(16, 6.0, deltas, density=0.25)]
    flat = [
        ScalingCurve(L=8, beta_rule="L", density=0.5, deltas=deltas,
                     w2=np.ones(9), stderr=np.full(9, 0.01)),
        ScalingCurve(L=12, beta_rule="L", density=0.5, deltas=deltas,
                     w2=np.ones(9) + 0.5, stderr=np.full(9, 0.01)),
    ]
    points, failures = phase_diagram({0.25: good, 0.5: flat}, mode="constant")
    assert [p.density for p in points] == [0.25]
    assert 0.5 in failures


def test_collapse_table_shape():
    deltas = np.linspace(4, 9, 5)
    curves = [linear_curve(8, 6.0, deltas), linear_curve(12, 6.0, deltas)]
    rows = collapse_table(curves, 6.0, nu=1.0)
    assert len(rows) == 10
    L, d, x, w2, err = rows[0]
    assert x == pytest.approx((d - 6.0) * L)


@pytest.mark.slow
def test_bootstrap_coverage():
    # 68% intervals must cover the true crossing in 60-76% of trials
    deltas = np.linspace(4.0, 9.0, 9)
    rng = np.random.default_rng(12)
    hits = 0
    trials = 500
    for t in range(trials):
        a = linear_curve(8, 6.3, deltas, err=0.15, noise=0.15, rng=rng)
        b = linear_curve(12, 6.3, deltas, err=0.15, noise=0.15, rng=rng)
        try:
            res = intersection(a, b, bootstrap=96, bootstrap_seed=1000 + t)
        except (NoCrossingError, AmbiguousCrossingError):
            continue
        if abs(res.delta_star - 6.3) <= res.err:
            hits += 1
    coverage = hits / trials
    assert 0.60 <= coverage <= 0.76, coverage
