"""Toric-code defect dynamics, localization diagnostics, decoding, and
worm-algorithm QMC for the disordered hard-core boson transition."""

__version__ = "0.1.0"

from .geometry import (
    LatticeGeometry,
    LatticePath,
    build_torus,
    dual_path_through,
    hausdorff_distance,
    periodic_l1_distance,
    shortest_dual_path,
    shortest_path,
)
from .perturbations import (
    PerturbationTerm,
    dipolar_preset,
    field_preset,
    terms_from_json,
    terms_to_json,
)
from .spin_oracle import (
    PauliFrame,
    Syndrome,
    exact_sector_projection,
    ground_state,
    syndrome_of,
)
from .effective import (
    DisorderField,
    HoppingHamiltonian,
    attach_braiding_string,
    build_defect_hamiltonian,
)
from .dynamics import (
    FitResult,
    LocalizationProfile,
    escape_probability,
    evolve,
    fit_localization_length,
    localization_study,
    sup_amplitude_profile,
)
from .relative_motion import (
    FiberHamiltonian,
    HopClass,
    ballistic_escape_probe,
    build_fiber,
    fiber_dispersion,
    gaussian_packet,
    random_short_range_inhomogeneity,
)
from .decoder import (
    LogicalOutcome,
    MemoryResult,
    Pairing,
    decode,
    logical_class,
    memory_experiment,
    paired_failure_z,
)
from .qmc import (
    BoseModel,
    ObservableSet,
    WormRng,
    WormState,
    run_qmc,
    tune_mu,
    worm_sweep,
)
from .scaling import (
    CriticalPoint,
    CrossingResult,
    ScalingCurve,
    beta_for,
    collapse_table,
    consecutive_intersections,
    extrapolate_critical,
    intersection,
    phase_diagram,
)
from .seeds import seed_derive

__all__ = [
    "LatticeGeometry", "LatticePath", "build_torus", "dual_path_through",
    "hausdorff_distance", "periodic_l1_distance", "shortest_dual_path",
    "shortest_path",
    "PerturbationTerm", "dipolar_preset", "field_preset", "terms_from_json",
    "terms_to_json",
    "PauliFrame", "Syndrome", "exact_sector_projection", "ground_state",
    "syndrome_of",
    "DisorderField", "HoppingHamiltonian", "attach_braiding_string",
    "build_defect_hamiltonian",
    "FitResult", "LocalizationProfile", "escape_probability", "evolve",
    "fit_localization_length", "localization_study", "sup_amplitude_profile",
    "FiberHamiltonian", "HopClass", "ballistic_escape_probe", "build_fiber",
    "fiber_dispersion", "gaussian_packet", "random_short_range_inhomogeneity",
    "LogicalOutcome", "MemoryResult", "Pairing", "decode", "logical_class",
    "memory_experiment", "paired_failure_z",
    "BoseModel", "ObservableSet", "WormRng", "WormState", "run_qmc", "tune_mu",
    "worm_sweep",
    "CriticalPoint", "CrossingResult", "ScalingCurve", "beta_for",
    "collapse_table", "consecutive_intersections", "extrapolate_critical",
    "intersection", "phase_diagram",
    "seed_derive",
    "__version__",
]
