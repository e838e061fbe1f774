"""Worm-algorithm path-integral Monte Carlo for disordered hard-core bosons.

Model: H = -t sum_<ij> b_i^dag b_j - sum_i (mu - eps_i) n_i on the L x L
torus, eps_i iid uniform on [-delta, delta], continuous imaginary time
(no discretization error). Observables are measured in the diagonal
(closed-worm) sector; the superfluid density follows from the winding
number, rho_s = <W^2> / (2 beta) in two dimensions.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _worm_kernel as K
from .errors import BracketingError, ThermalizationWarning
from .seeds import seed_derive, splitmix64

_META_I = 8
_META_F = 4
_N_OBS = 4  # density, W^2, energy, kinks
_MOVES = ("open", "close", "timeshift", "insertkink", "deletekink")


@dataclass
class BoseModel:
    """Hard-core bosons with a seeded box-disorder onsite potential."""

    L: int
    beta: float
    mu: float = 0.0
    delta: float = 0.0
    t: float = 1.0
    seed: int = 0
    flip_disorder: bool = False  # eps -> -eps, for particle-hole checks

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("lattice size must be >= 2")
        if self.beta <= 0:
            raise ValueError("inverse temperature must be positive")

    @property
    def n_sites(self) -> int:
        return self.L * self.L

    def epsilon(self) -> np.ndarray:
        """Onsite offsets, iid uniform on [-delta, delta], fixed by the seed."""
        if self.delta == 0:
            return np.zeros(self.n_sites)
        rng = np.random.Generator(np.random.PCG64(self.seed))
        eps = rng.uniform(-self.delta, self.delta, self.n_sites)
        return -eps if self.flip_disorder else eps

    def onsite(self) -> np.ndarray:
        """V_i = mu - eps_i entering the diagonal weight exp(sum V_i l_i)."""
        return self.mu - self.epsilon()

    def neighbor_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """nbr[i, d] for steps +x, -x, +y, -y, plus per-direction unit steps."""
        L = self.L
        nbr = np.empty((self.n_sites, 4), dtype=np.int32)
        for x in range(L):
            for y in range(L):
                i = x * L + y
                nbr[i, 0] = ((x + 1) % L) * L + y
                nbr[i, 1] = ((x - 1) % L) * L + y
                nbr[i, 2] = x * L + (y + 1) % L
                nbr[i, 3] = x * L + (y - 1) % L
        ndx = np.array([1, -1, 0, 0], dtype=np.int8)
        ndy = np.array([0, 0, 1, -1], dtype=np.int8)
        return nbr, ndx, ndy

    def with_mu(self, mu: float) -> "BoseModel":
        return BoseModel(
            L=self.L, beta=self.beta, mu=mu, delta=self.delta, t=self.t,
            seed=self.seed, flip_disorder=self.flip_disorder,
        )


@dataclass
class WormRng:
    """xoshiro256** state; plain array so checkpoints capture it exactly."""

    state: np.ndarray

    @classmethod
    def from_seed(cls, seed: int) -> "WormRng":
        s = []
        z = seed & ((1 << 64) - 1)
        for _ in range(4):
            z = splitmix64(z + 0x9E3779B97F4A7C15)
            s.append(z)
        if not any(s):
            s[0] = 1
        return cls(state=np.array(s, dtype=np.uint64))


class WormState:
    """Worldline configuration: per-site circular event lists plus counters."""

    def __init__(self, model: BoseModel, capacity: int | None = None):
        n = model.n_sites
        if capacity is None:
            capacity = max(
                4096, int(16 * n * model.beta * max(model.t, 0.25))
            )
        self.model = model
        self.capacity = capacity
        self.ev_time = np.zeros(capacity)
        self.ev_site = np.full(capacity, -1, dtype=np.int32)
        self.ev_next = np.full(capacity, -1, dtype=np.int32)
        self.ev_prev = np.full(capacity, -1, dtype=np.int32)
        self.ev_kind = np.full(capacity, -1, dtype=np.int8)
        self.ev_partner = np.full(capacity, -1, dtype=np.int32)
        self.ev_occ = np.zeros(capacity, dtype=np.int8)
        self.ev_dx = np.zeros(capacity, dtype=np.int8)
        self.ev_dy = np.zeros(capacity, dtype=np.int8)
        self.site_anchor = np.full(n, -1, dtype=np.int32)
        self.site_nev = np.zeros(n, dtype=np.int32)
        self.site_base = np.zeros(n, dtype=np.int8)
        self.free_stack = np.arange(capacity, dtype=np.int32)
        self.meta_i = np.zeros(_META_I, dtype=np.int64)
        self.meta_i[K.M_FREE_TOP] = capacity
        self.meta_i[K.M_HEAD] = -1
        self.meta_i[K.M_TAIL] = -1
        self.meta_f = np.zeros(_META_F)
        self.counters = np.zeros(16, dtype=np.int64)
        nbr, ndx, ndy = model.neighbor_table()
        self._nbr, self._ndx, self._ndy = nbr, ndx, ndy
        self._onsite = model.onsite()

    # -- views ----------------------------------------------------------------

    @property
    def is_diagonal(self) -> bool:
        return self.meta_i[K.M_HEAD] < 0

    @property
    def n_kinks(self) -> int:
        return int(self.meta_i[K.M_NKINKS])

    def winding(self) -> tuple[int, int]:
        L = self.model.L
        sx, sy = int(self.meta_i[K.M_WINDX]), int(self.meta_i[K.M_WINDY])
        if self.is_diagonal:
            if sx % L or sy % L:
                raise AssertionError("winding steps not a multiple of L")
            return sx // L, sy // L
        return sx // L, sy // L  # worm sector: informational only

    def occupied_length(self) -> float:
        return float(self.meta_f[K.F_SL])

    def occupation_at_zero(self) -> np.ndarray:
        """Occupation snapshot at tau = 0."""
        n = self.model.n_sites
        occ = np.zeros(n, dtype=np.int8)
        for s in range(n):
            if self.site_nev[s] == 0:
                occ[s] = self.site_base[s]
            else:
                e = K._covering(
                    s, 0.0, self.ev_time, self.ev_next, self.site_anchor, self.site_nev
                )
                occ[s] = self.ev_occ[e]
        return occ

    def site_events(self, s: int) -> list[tuple[float, int, int]]:
        """(time, kind, event id) around site s, in list order."""
        out = []
        e = self.site_anchor[s]
        for _ in range(self.site_nev[s]):
            out.append((float(self.ev_time[e]), int(self.ev_kind[e]), int(e)))
            e = self.ev_next[e]
        return out

    # -- invariants -------------------------------------------------------------

    def validate(self):
        """Cross-check the linked lists, occupations, and running counters."""
        model = self.model
        beta = model.beta
        seen_heads = 0
        seen_tails = 0
        s_l = 0.0
        s_v = 0.0
        v = self._onsite
        for s in range(model.n_sites):
            evs = self.site_events(s)
            assert len(evs) % 2 == 0, f"odd event count on site {s}"
            if not evs:
                if self.site_base[s]:
                    s_l += beta
                    s_v += beta * v[s]
                continue
            times = [t for t, _, _ in evs]
            rolled = sorted(times)
            start = times.index(rolled[0])
            assert times[start:] + times[:start] == rolled, f"ring disorder on {s}"
            occs = [int(self.ev_occ[e]) for _, _, e in evs]
            for a, b in zip(occs, occs[1:] + occs[:1]):
                assert a != b, f"occupation does not alternate on site {s}"
            for (t0, _, e0), (t1, _, _) in zip(evs, evs[1:] + evs[:1]):
                seg = (t1 - t0) % beta
                if seg == 0.0:
                    seg = beta
                if self.ev_occ[e0]:
                    s_l += seg
                    s_v += seg * v[s]
            for t, kind, e in evs:
                if kind == K.KIND_HEAD:
                    seen_heads += 1
                elif kind == K.KIND_TAIL:
                    seen_tails += 1
                else:
                    p = self.ev_partner[e]
                    assert p >= 0 and self.ev_partner[p] == e, "unpaired kink"
                    assert self.ev_time[p] == t, "kink partners at different times"
        if self.is_diagonal:
            assert seen_heads == 0 and seen_tails == 0
            assert int(self.meta_i[K.M_WINDX]) % model.L == 0
            assert int(self.meta_i[K.M_WINDY]) % model.L == 0
        else:
            assert seen_heads == 1 and seen_tails == 1
        assert abs(s_l - self.meta_f[K.F_SL]) < 1e-7 * max(1.0, abs(s_l)) + 1e-9
        assert abs(s_v - self.meta_f[K.F_SV]) < 1e-7 * max(1.0, abs(s_v)) + 1e-9

    # -- capacity ----------------------------------------------------------------

    def grow(self):
        old = self.capacity
        new = old * 2
        for name in (
            "ev_time", "ev_site", "ev_next", "ev_prev", "ev_kind",
            "ev_partner", "ev_occ", "ev_dx", "ev_dy",
        ):
            arr = getattr(self, name)
            bigger = np.full(new, -1, dtype=arr.dtype) if arr.dtype != np.float64 \
                else np.zeros(new)
            bigger[:old] = arr
            setattr(self, name, bigger)
        free = np.empty(new, dtype=np.int32)
        top = int(self.meta_i[K.M_FREE_TOP])
        free[:top] = self.free_stack[:top]
        free[top : top + (new - old)] = np.arange(old, new, dtype=np.int32)
        self.free_stack = free
        self.meta_i[K.M_FREE_TOP] = top + (new - old)
        self.capacity = new

    # -- checkpointing -------------------------------------------------------------

    CHECKPOINT_VERSION = "toricloc-worm-checkpoint/v1"

    def save_checkpoint(self, path, rng: WormRng, extra: dict | None = None):
        payload = {
            "version": np.array(self.CHECKPOINT_VERSION),
            "model": np.array(
                [self.model.L, self.model.beta, self.model.mu, self.model.delta,
                 self.model.t, self.model.seed]
            ),
            "rng": rng.state,
            "capacity": np.array(self.capacity),
        }
        for name in (
            "ev_time", "ev_site", "ev_next", "ev_prev", "ev_kind", "ev_partner",
            "ev_occ", "ev_dx", "ev_dy", "site_anchor", "site_nev", "site_base",
            "free_stack", "meta_i", "meta_f", "counters",
        ):
            payload[name] = getattr(self, name)
        for k, v in (extra or {}).items():
            payload["x_" + k] = v
        np.savez_compressed(path, **payload)

    @classmethod
    def load_checkpoint(cls, path, model: BoseModel) -> tuple["WormState", WormRng, dict]:
        data = np.load(path, allow_pickle=False)
        if str(data["version"]) != cls.CHECKPOINT_VERSION:
            raise ValueError(f"unknown checkpoint version {data['version']}")
        ref = np.array(
            [model.L, model.beta, model.mu, model.delta, model.t, model.seed]
        )
        if not np.allclose(data["model"], ref):
            raise ValueError("checkpoint does not match the requested model")
        state = cls(model, capacity=int(data["capacity"]))
        for name in (
            "ev_time", "ev_site", "ev_next", "ev_prev", "ev_kind", "ev_partner",
            "ev_occ", "ev_dx", "ev_dy", "site_anchor", "site_nev", "site_base",
            "free_stack", "meta_i", "meta_f", "counters",
        ):
            getattr(state, name)[...] = data[name]
        rng = WormRng(state=data["rng"].copy())
        extra = {k[2:]: data[k] for k in data.files if k.startswith("x_")}
        return state, rng, extra


def default_worm_weight(model: BoseModel) -> float:
    """Relative weight of worm-sector configurations; any positive value is
    valid (diagonal-sector observables do not depend on it)."""
    return 1.0 / (model.n_sites * model.beta**2)


def attempts_per_sweep(model: BoseModel) -> int:
    return max(1, round(model.n_sites * model.beta))


def _drive(state: WormState, rng: WormRng, n_sweeps: int, sweep_offset: int,
           total_sweeps: int, acc, acc_count, occ_hist, track_patterns: bool,
           worm_weight: float, measure_every: int = 1):
    """Run sweeps with transparent capacity growth."""
    model = state.model
    n_bins = acc.shape[0] if acc is not None else 0
    if acc is None:
        acc = np.zeros((1, _N_OBS))
        acc_count = np.zeros(1, dtype=np.int64)
        n_bins = 0
    att = attempts_per_sweep(model)
    done = 0
    pos = 0
    while done < n_sweeps:
        sw, pos, status = K.run_sweeps(
            model.beta, model.t, worm_weight, model.n_sites, model.L,
            state._onsite, state._nbr, state._ndx, state._ndy,
            state.ev_time, state.ev_site, state.ev_next, state.ev_prev,
            state.ev_kind, state.ev_partner, state.ev_occ, state.ev_dx,
            state.ev_dy, state.site_anchor, state.site_nev, state.site_base,
            state.free_stack, state.meta_i, state.meta_f, rng.state,
            state.counters,
            n_sweeps - done, att, pos, sweep_offset + done, total_sweeps,
            acc, acc_count, n_bins, occ_hist, track_patterns, measure_every,
        )
        done += sw
        if status == K.OK:
            break
        state.grow()


def worm_sweep(state: WormState, model: BoseModel, rng: WormRng,
               worm_weight: float | None = None) -> WormState:
    """One sweep (n_sites * beta update attempts); returns the mutated state."""
    if model is not state.model:
        state.model = model
        state._onsite = model.onsite()
        state._nbr, state._ndx, state._ndy = model.neighbor_table()
    ww = default_worm_weight(model) if worm_weight is None else worm_weight
    _drive(state, rng, 1, 0, 1, None, None, np.zeros(1, dtype=np.int64), False, ww)
    return state


@dataclass
class ObservableSet:
    """Binned diagonal-sector estimates with standard errors."""

    density: float
    density_err: float
    w2: float
    w2_err: float
    rho_s: float
    rho_s_err: float
    energy: float
    energy_err: float
    kinks: float
    bins: int
    measurements: int
    diagonal_fraction: float
    acceptance: dict
    thermalized: bool
    pattern_counts: np.ndarray | None = None
    bin_table: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def summary_dict(self) -> dict:
        return {
            "density": self.density,
            "density_err": self.density_err,
            "w2": self.w2,
            "w2_err": self.w2_err,
            "rho_s": self.rho_s,
            "rho_s_err": self.rho_s_err,
            "energy": self.energy,
            "energy_err": self.energy_err,
            "kinks": self.kinks,
            "bins": self.bins,
            "measurements": self.measurements,
            "diagonal_fraction": self.diagonal_fraction,
            "acceptance": self.acceptance,
            "thermalized": self.thermalized,
            "metadata": self.metadata,
        }


def run_qmc(
    model: BoseModel,
    thermalization: int,
    sweeps: int,
    bins: int = 64,
    chain_seed: int | None = None,
    track_patterns: bool = False,
    state: WormState | None = None,
    rng: WormRng | None = None,
    checkpoint_path=None,
    checkpoint_every: int = 0,
    resume: bool = False,
    worm_weight: float | None = None,
    measure_every: int = 1,
) -> ObservableSet:
    """Thermalize, then measure `sweeps` sweeps into `bins` bins.

    Errors are binned standard errors (and a jackknife for rho_s); a
    ThermalizationWarning is issued when first- and second-half means of the
    winding estimator disagree beyond 3 sigma. With `checkpoint_path` the
    full state (including RNG) is saved every `checkpoint_every` measurement
    sweeps and can be resumed exactly.
    """
    if bins < 32:
        raise ValueError("need at least 32 bins for error estimates")
    if sweeps < bins:
        raise ValueError("need at least one sweep per bin")
    ww = default_worm_weight(model) if worm_weight is None else worm_weight
    if chain_seed is None:
        chain_seed = seed_derive(model.seed, 0xC0FFEE)

    acc = np.zeros((bins, _N_OBS))
    acc_count = np.zeros(bins, dtype=np.int64)
    track_ok = track_patterns and model.n_sites <= 20
    occ_hist = np.zeros(1 << model.n_sites if track_ok else 1, dtype=np.int64)
    measured_from = 0

    if resume and checkpoint_path is not None:
        if os.path.exists(checkpoint_path):
            state, rng, extra = WormState.load_checkpoint(checkpoint_path, model)
            acc[...] = extra["acc"]
            acc_count[...] = extra["acc_count"]
            if track_ok:
                occ_hist[...] = extra["occ_hist"]
            measured_from = int(extra["measured_sweeps"])
            thermalization = 0
    if state is None:
        state = WormState(model)
    if rng is None:
        rng = WormRng.from_seed(chain_seed)

    if thermalization > 0:
        _drive(state, rng, thermalization, 0, max(thermalization, 1), None, None,
               np.zeros(1, dtype=np.int64), False, ww)

    done = measured_from
    step = checkpoint_every if (checkpoint_path and checkpoint_every) else sweeps
    while done < sweeps:
        chunk = min(step, sweeps - done)
        _drive(state, rng, chunk, done, sweeps, acc, acc_count, occ_hist,
               track_ok, ww, measure_every)
        done += chunk
        if checkpoint_path and (checkpoint_every or done >= sweeps):
            state.save_checkpoint(
                checkpoint_path, rng,
                extra={
                    "acc": acc, "acc_count": acc_count, "occ_hist": occ_hist,
                    "measured_sweeps": np.array(done),
                },
            )

    good = acc_count > 0
    n_good = int(good.sum())
    if n_good < max(2, bins // 2):
        warnings.warn(
            f"only {n_good}/{bins} bins saw diagonal measurements",
            ThermalizationWarning, stacklevel=2,
        )
    if n_good >= 2:
        means = acc[good] / acc_count[good, None]
    else:  # starved diagonal sector: report NaNs rather than divide by zero
        means = np.full((2, _N_OBS), np.nan)

    def est(col):
        vals = means[:, col]
        return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals)))

    density, density_err = est(0)
    w2, w2_err = est(1)
    energy, energy_err = est(2)
    kinks, _ = est(3)

    # jackknife over bins for rho_s = <W^2>/(2 beta)
    vals = means[:, 1]
    n = len(vals)
    jack = (vals.sum() - vals) / (n - 1) / (2.0 * model.beta)
    rho_s = float(vals.mean() / (2.0 * model.beta))
    rho_s_err = float(np.sqrt((n - 1) / n * ((jack - jack.mean()) ** 2).sum()))

    half = n // 2
    thermal_ok = True
    if half >= 2:
        a, b = vals[:half], vals[half:]
        spread = np.sqrt(
            a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b)
        )
        if spread > 0 and abs(a.mean() - b.mean()) > 3.0 * spread:
            thermal_ok = False
            warnings.warn(
                "first/second half winding means differ beyond 3 sigma; "
                "increase thermalization",
                ThermalizationWarning, stacklevel=2,
            )

    bin_edges = [(b * sweeps) // bins for b in range(bins + 1)]
    bin_table = [
        {
            "bin": b,
            "sweep_start": bin_edges[b],
            "sweep_end": bin_edges[b + 1],
            "count": int(acc_count[b]),
            "density": float(acc[b, 0] / acc_count[b]) if acc_count[b] else None,
            "w2": float(acc[b, 1] / acc_count[b]) if acc_count[b] else None,
            "energy": float(acc[b, 2] / acc_count[b]) if acc_count[b] else None,
            "kinks": float(acc[b, 3] / acc_count[b]) if acc_count[b] else None,
        }
        for b in range(bins)
    ]

    c = state.counters
    acceptance = {
        name: (float(c[2 * i + 1] / c[2 * i]) if c[2 * i] else 0.0)
        for i, name in enumerate(_MOVES)
    }
    total_meas = int(acc_count.sum())
    obs = ObservableSet(
        density=density, density_err=density_err,
        w2=w2, w2_err=w2_err,
        rho_s=rho_s, rho_s_err=rho_s_err,
        energy=energy, energy_err=energy_err,
        kinks=kinks,
        bins=n_good,
        measurements=total_meas,
        diagonal_fraction=total_meas / max(sweeps // measure_every, 1),
        acceptance=acceptance,
        thermalized=thermal_ok,
        pattern_counts=occ_hist if track_ok else None,
        bin_table=bin_table,
        metadata={
            "L": model.L, "beta": model.beta, "mu": model.mu,
            "delta": model.delta, "t": model.t, "seed": int(model.seed),
            "chain_seed": int(chain_seed),
            "thermalization": int(thermalization),
            "sweeps": int(sweeps),
            "disorder_convention": "epsilon ~ U[-delta, delta]; a uniform "
            "[0, 2*delta] potential differs only by a mu shift",
        },
    )
    return obs


def tune_mu(
    model: BoseModel,
    target_density: float,
    tolerance: float = 0.005,
    master_seed: int | None = None,
    initial_bracket: tuple[float, float] | None = None,
    max_bisections: int = 12,
) -> float:
    """Bisect mu until the measured density hits the target.

    The density is monotone in mu. Early bisections use short runs and the
    final confirmations long ones; the confirm loop re-expands the bracket
    if a long run lands outside tolerance. The initial bracket spans the
    band plus the disorder bound (or the warm-start window given) and is
    doubled up to 10 times if it fails to bracket, after which a
    BracketingError is raised.
    """
    if not 0.0 < target_density < 1.0:
        raise ValueError("target density must lie strictly between 0 and 1")
    if master_seed is None:
        master_seed = seed_derive(model.seed, 0x7C4E)

    idx = 0

    def measure(mu: float, thermal: int, sweeps: int) -> float:
        nonlocal idx
        m = model.with_mu(mu)
        with warnings.catch_warnings():
            # deliberately short runs; their bin diagnostics are noise
            warnings.simplefilter("ignore", ThermalizationWarning)
            obs = run_qmc(
                m,
                thermalization=thermal,
                sweeps=max(sweeps, 32),
                bins=32,
                chain_seed=seed_derive(master_seed, idx),
            )
        idx += 1
        return obs.density

    if initial_bracket is not None:
        lo, hi = float(initial_bracket[0]), float(initial_bracket[1])
    else:
        span = model.delta + 4.0 * model.t + 1.0
        lo, hi = -span, span
    for attempt in range(11):
        if attempt == 10:
            raise BracketingError(
                f"could not bracket density {target_density} after 10 doublings"
            )
        n_lo = measure(lo, 300, 600)
        n_hi = measure(hi, 300, 600)
        if n_lo <= target_density <= n_hi:
            break
        width = hi - lo
        if n_lo > target_density:
            lo -= width
        if n_hi < target_density:
            hi += width

    for it in range(max_bisections):
        mu_mid = 0.5 * (lo + hi)
        if it < max_bisections - 4:
            n_mid = measure(mu_mid, 500, 1000)
        else:
            n_mid = measure(mu_mid, 1000, 2500)
        if n_mid < target_density:
            lo = mu_mid
        else:
            hi = mu_mid

    mu_mid = 0.5 * (lo + hi)
    for _ in range(4):
        n_fin = measure(mu_mid, 1500, 6000)
        if abs(n_fin - target_density) <= tolerance:
            return mu_mid
        width = max(hi - lo, 0.05)
        if n_fin < target_density:
            lo, hi = mu_mid, mu_mid + 2.0 * width
        else:
            lo, hi = mu_mid - 2.0 * width, mu_mid
        for _ in range(5):
            mu_mid = 0.5 * (lo + hi)
            n_mid = measure(mu_mid, 800, 2000)
            if n_mid < target_density:
                lo = mu_mid
            else:
                hi = mu_mid
        mu_mid = 0.5 * (lo + hi)
    return mu_mid
