"""Causal binomial approximation of sampled paths, with error bounds and pricing."""

from .adaptive import AdaptiveTrack, HoelderCertificate, HoelderParams, check_hoelder, track_adaptive
from .crr import (CrrTree, call, complete_market_demo, price_european, price_european_sum, put,
                  risk_neutral_prob, tree_from_tracker, tree_from_volatility)
from .errors import (BudgetExceededError, InvalidArgumentError, NumericOverflowError,
                     PreconditionError, UnverifiedBoundWarning)
from .experiment import (ConvergenceReport, ExperimentConfig, load_config, run_experiment,
                         tune_three_epsilon)
from .fields import DriftField, capped_mean_reversion, constant_drift, zero_drift
from .grid import (PathEnsemble, ProcessSpec, SampledPath, TimeGrid, gen_example, gen_ito,
                   gen_ito_ensemble, gen_wiener, gen_wiener_ensemble, generate)
from .log_tracker import MultiplicativePath, rates_from_logslope, track_log
from .metrics import NormEstimate, lq_distance, lq_norm, sup_error, xc_norm
from .ode_binary import BinaryNoiseSolution, residual_true, solve_binary_ode
from .preprocess import PreprocessParams, clip, mollify, preprocess
from .tracker import BinomialPath, TrackerParams, track, track_affine, track_step

__version__ = "0.1.0"
