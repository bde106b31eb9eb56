"""Poisson-exponential-Tweedie count models: pmf evaluation, sampling,
dispersion indexes and estimating-function regression."""
__version__ = "0.1.0"

from .errors import (ConvergenceError, DomainError, EvaluationError, ParseError,
                     PetweedieError, RankDeficiencyError, TailUnderflowError)
from .tweedie import TweedieParams, sample_tweedie, tweedie_density, tweedie_logdensity
from .pet import (PetParams, QuadratureWarning, ht_index, logpmf, logpmf_quadrature,
                  negative_binomial_distance, pet_log_likelihood, pet_mean, pet_variance,
                  pmf_mc, pmf_pgf, pmf_quadrature, sample_pet)
from .indexes import (IndexReport, empirical_indexes, g0_dispersion_test, index_curves,
                      summary_indexes, theoretical_indexes)
from .estimating import (FitResult, GofResult, RegressionData, chaser_fit, chi_square_gof,
                         godambe_covariance, paic, pearson_ef, quasi_score,
                         sensitivity_matrices, variability_matrices)
from .study import (FrequencyTable, SimStudyDesign, expected_frequencies,
                    fit_frequency_table_profile, run_simulation_study, swiss_accidents)
from .io import read_csv, read_frequency_table, read_report, write_report
