"""Random equilibria of contractive stochastic systems, computed by pullback along frozen noise paths."""

from .noise import (GridError, HorizonError, ShiftedPathView, TwoSidedWienerPath, dump_path, extend,
                    increment, load_path, refine, sample_path, shift)
from .systems import (AdditiveDissipative, AdditiveLipschitz, HypothesisReport, MultiplicativeLipschitz,
                      PRESETS, StratonovichDissipative, SystemSpec, preset, spec_from_config, validate_spec)
from .integrators import (Trajectory, fundamental_matrix, integrate_exponential, integrate_ito,
                          integrate_random_ode, integrate_stratonovich, matrix_exponential, self_convergence)
from .stationary import OUBundle, conjugate, conjugate_pipeline, inverse_conjugate, ou_u, ou_z1, ou_z2
from .pullback import (BlowUpError, EquilibriumEstimate, PullbackRun, RateFit, TemperednessReport,
                       birkhoff_average, discrete_pullback, estimate_equilibrium, pullback_state,
                       top_lyapunov, verify_h1, verify_h2, verify_invariance, verify_uniqueness)

__version__ = "0.1.0"
