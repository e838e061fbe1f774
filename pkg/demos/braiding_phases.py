"""Does braiding around static magnetic charges change localization?

A single electric defect hops on the disordered torus while a static
magnetic pair sits at the ends of a dual string; every hop crossing the
string picks up a minus sign. Two checks, desk scale:

  1. gauge exactness: two homotopic strings give identical amplitude
     profiles (the sign fields differ by a pure gauge);
  2. robustness: the fitted localization length barely moves when the
     string is removed altogether.
"""

import os

import numpy as np

from toricloc import (
    DisorderField,
    attach_braiding_string,
    build_defect_hamiltonian,
    build_torus,
    dual_path_through,
    field_preset,
    fit_localization_length,
    localization_study,
    shortest_dual_path,
    sup_amplitude_profile,
)
from toricloc.dynamics import LocalizationProfile

L = 16
DELTA = 50.0
T_MAX = 40
OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

geometry = build_torus(L)
terms = field_preset(geometry, 1.0, (0.0, 0.0, 1.0))
string = shortest_dual_path((4, 8), (12, 8), geometry)  # straight, length L/2
start = [(8, 8)]
t_grid = np.arange(1.0, T_MAX + 1.0)

# 1. exact gauge property on one disorder realization
disorder = DisorderField.potential_box(geometry, DELTA, seed=7)
h = build_defect_hamiltonian(geometry, terms, disorder, 1, "electric")
detour = dual_path_through([(4, 8), (4, 11), (12, 11), (12, 8)], geometry)
p1 = sup_amplitude_profile(attach_braiding_string(h, string), start, t_grid)
p2 = sup_amplitude_profile(attach_braiding_string(h, detour), start, t_grid)
print("homotopic strings, max profile deviation:",
      f"{np.abs(p1.amplitudes - p2.amplitudes).max():.2e}")

# 2. localization length with and without the string, disorder averaged
def floored_fit(profile, floor=1e-12):
    bins, env = profile.envelope()
    keep = env > floor
    return fit_localization_length(
        LocalizationProfile(distances=bins[keep], amplitudes=env[keep],
                            metric=profile.metric)
    )

for label, s in (("with string", string), ("without", None)):
    prof = localization_study(
        geometry, terms, 1, start, t_grid, delta=DELTA, realizations=5,
        master_seed=2718, string=s, metric="distance",
    )
    fit = floored_fit(prof)
    print(f"{label:>12}: xi = {fit.xi_loc:.3f}")
    prof.write_csv(os.path.join(OUT, f"braiding_{label.replace(' ', '_')}.csv"))
