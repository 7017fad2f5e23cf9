"""Sharp interval estimates of conditional treatment effects under the marginal sensitivity model."""
from .bounds import (ArmProblem, CateInterval, arm_problem, cate_interval, interval_curve, ipw_kernel_regression,
                     mu_lower, mu_upper, pcate_interval, threshold_path, weighted_mu)
from .data import IntervalCurve, ObsDataset, Schema, SimTruth, load_csv, read_interval_csv, write_dataset_csv, \
    write_interval_csv
from .estimators import KernelCateBounds, MinimaxRegretPolicy
from .exceptions import (ConvergenceError, EmptySampleError, NumericalError, ParseError, SchemaError,
                         ValidationError)
from .kernels import KernelSpec, boundary_normalizer, kernel_weight, kernel_weights, loocv_bandwidth
from .msm import MsmParams, SensitivityBracket, bracket, calibrate_gamma
from .policy import PolicyTable, minimax_policy, policy_risk_mc, worst_case_regret
from .propensity import LogisticModel, fit_logistic, predict_e1

__version__ = "0.1.0"
