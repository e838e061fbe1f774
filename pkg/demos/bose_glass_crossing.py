"""Mini superfluid-to-Bose-glass crossing study at density 1/8.

Per disorder realization: tune the chemical potential to the target
density, then measure the winding number squared. Curves <W^2>(Delta) for
two sizes with beta = L cross near the transition; the full desk protocol
(three sizes, 20 realizations, see configs/desk_scan_n0.125.json) and the
long-run protocol (configs/longrun_n0.125.json) refine this toward the
thermodynamic critical point.

Takes a few minutes at these settings.
"""

import os

import numpy as np

from toricloc import BoseModel, ScalingCurve, intersection, run_qmc, tune_mu
from toricloc.seeds import seed_derive

DENSITY = 0.125
SIZES = (6, 8)
DELTAS = (4.0, 6.0, 8.0)
REALIZATIONS = 4
MASTER = 555
OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

curves = []
for L in SIZES:
    w2 = {d: [] for d in DELTAS}
    for r in range(REALIZATIONS):
        warm = None
        for d in DELTAS:
            seed = seed_derive(MASTER, 1000 * L + 10 * r + int(d))
            model = BoseModel(L=L, beta=float(L), delta=d, seed=seed)
            mu = tune_mu(model, DENSITY, tolerance=0.01,
                         master_seed=seed_derive(seed, 1),
                         initial_bracket=None if warm is None
                         else (warm - 1.5, warm + 1.5))
            warm = mu
            obs = run_qmc(model.with_mu(mu), thermalization=1500, sweeps=6000,
                          bins=32, chain_seed=seed_derive(seed, 2))
            w2[d].append(obs.w2)
            print(f"L={L} delta={d} r={r}: mu={mu:+.2f} "
                  f"n={obs.density:.3f} W2={obs.w2:.3f}")
    curves.append(ScalingCurve(
        L=L, beta_rule="L", density=DENSITY, deltas=np.array(DELTAS),
        w2=np.array([np.mean(w2[d]) for d in DELTAS]),
        stderr=np.array([np.std(w2[d], ddof=1) / np.sqrt(REALIZATIONS)
                         for d in DELTAS]),
        n_realizations=REALIZATIONS,
    ))

res = intersection(curves[0], curves[1], bootstrap=128, bootstrap_seed=1)
print(f"\nL={SIZES[0]} and L={SIZES[1]} curves cross at "
      f"Delta = {res.delta_star:.2f} +- {res.err:.2f} "
      f"(thermodynamic reference: 6.3(2))")
