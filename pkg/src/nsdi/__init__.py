"""Classical trajectory simulation of correlated multi-electron ionization.

Strong-field multiple ionization treated classically: electrons escape
together over the field-induced (Stark) saddle of the effective potential.
The package provides the symmetric two-electron model, the unconstrained
two-electron model, the N-electron ring generalization, saddle and
stability analysis, microcanonical initial-condition sampling, ensemble
propagation and final-momentum statistics.
"""

from .analysis import (EmptyEnsembleError, Histogram, Outcome, SymmetryStats,
                       classify, hump_metric, ion_parallel_histogram,
                       perp_electron_histogram, symmetry_stats,
                       tail_is_monotone, zero_suppression)
from .ensemble import EnsembleResult, run_ensemble
from .fields import (DEFAULT_OMEGA, FieldParams, INTENSITY_AU,
                     effective_field, effective_field_rate, envelope,
                     field_from_intensity, intensity_from_field)
from .integrate import (Event, IntegratorConfig, NoCrossingError,
                        TrajectoryRecord, integrate, locate_event,
                        zero_field_reference)
from .models import (FullState2e, NGonState, SymState2e,
                     hamiltonian_full3d, hamiltonian_ngon, hamiltonian_sym2e,
                     hessian_full3d, hessian_ngon, hessian_sym2e,
                     ngon_repulsion_coef, ngon_to_sym2e,
                     potential_full3d, potential_ngon, potential_sym2e,
                     rhs_full3d, rhs_ngon, rhs_sym2e, symmetric_embedding)
from .saddle import (DegenerateSpectrumError, NGonSaddle, SaddleInfo,
                     StabilitySpectrum, ZeroFieldError, classify_stability,
                     ngon_existence_criterion, ngon_saddle_scan,
                     ngon_scan_table, perturbed_saddle_trajectories,
                     saddle_pair_configuration, saddle_stability,
                     saddle_sym2e, stability_hessian)
from .sampling import (EnsembleSpec, SamplingRegion, derive_region,
                       derive_stream, sample_initial, thin_shell_oracle)

__version__ = "0.1.0"

# configuration files written by the CLI carry this schema tag
CONFIG_SCHEMA_VERSION = 1

__all__ = [
    "DEFAULT_OMEGA", "FieldParams", "INTENSITY_AU",
    "effective_field", "effective_field_rate", "envelope",
    "field_from_intensity", "intensity_from_field",
    "Event", "IntegratorConfig", "NoCrossingError", "TrajectoryRecord",
    "integrate", "locate_event", "zero_field_reference",
    "FullState2e", "NGonState", "SymState2e",
    "hamiltonian_full3d", "hamiltonian_ngon", "hamiltonian_sym2e",
    "hessian_full3d", "hessian_ngon", "hessian_sym2e",
    "ngon_repulsion_coef", "ngon_to_sym2e",
    "potential_full3d", "potential_ngon", "potential_sym2e",
    "rhs_full3d", "rhs_ngon", "rhs_sym2e", "symmetric_embedding",
    "EmptyEnsembleError", "Histogram", "Outcome", "SymmetryStats",
    "classify", "hump_metric", "ion_parallel_histogram",
    "perp_electron_histogram", "symmetry_stats", "tail_is_monotone",
    "zero_suppression",
    "EnsembleResult", "run_ensemble",
    "DegenerateSpectrumError", "NGonSaddle", "SaddleInfo",
    "StabilitySpectrum", "ZeroFieldError", "classify_stability",
    "ngon_existence_criterion", "ngon_saddle_scan", "ngon_scan_table",
    "perturbed_saddle_trajectories", "saddle_pair_configuration",
    "saddle_stability", "saddle_sym2e", "stability_hessian",
    "EnsembleSpec", "SamplingRegion", "derive_region", "derive_stream",
    "sample_initial", "thin_shell_oracle",
    "__version__", "CONFIG_SCHEMA_VERSION",
]
