"""rhclab: receding-horizon control simulation with disturbance attenuation certificates."""

from .analysis import (CertificationReport, CertificationError, ConstantsReport,
                       ValueBoundCertificate, attenuation_regret, attenuation_threshold,
                       certify, certify_minmax_value_bounds, certify_value_bounds,
                       choose_decay, consistent_minmax_horizon, consistent_preview_horizon,
                       cost_envelope, derive_constants, disturbance_gain,
                       estimate_sensitivity_constants, estimate_theta_sensitivity,
                       min_horizon, regret_curve, value_decrease_constants,
                       worst_case_decrease_constants, worst_case_threshold)
from .controllers import (DivergenceError, OnlineRunConfig, run_known_preview,
                          run_minmax_no_preview, run_unknown_preview)
from .disturbances import (DisturbanceSource, DisturbanceSpec, ShiftedSource,
                           build_source, energy)
from .estimation import (Dataset, EstimateReport, RankDeficiencyError, estimate_linear,
                         estimate_linear_in_params, probe_input, synthetic_estimate)
from .horizon import HorizonSolution, first_control, horizon_value, solve_horizon
from .minmax import MinMaxSolution, minmax_first_control, minmax_value, solve_minmax
from .model import (Box, ConfigurationError, CostModel, SystemModel, Trajectory,
                    custom_cost, custom_system, linear_in_params_system, linear_system,
                    quadratic_cost)

__version__ = "0.1.0"
