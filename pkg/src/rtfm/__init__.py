"""Tail-robust Tucker factor models for tensor-valued time series.

The estimation pipeline combines element-wise data truncation with
projection-based iterative eigendecomposition of mode-wise second moments:
loading spaces, core factors, factor numbers, truncation-level tuning, a
simulation/evaluation harness and a rolling-window robust forecaster.
"""

__version__ = "0.1.0"

from .estimator import (
    LoadingSet,
    common_component,
    estimate_factors,
    estimate_loadings,
    initial_loadings,
    refine_loadings,
)
from .evaluate import (
    McSummary,
    common_error,
    ks_critical,
    ks_statistic,
    loading_error,
    normality_diagnostic,
)
from .forecast import ForecastConfig, forecast_one, lagged_second_moment, rolling_errors
from .linalg import EigenPairs, canonical_sign, sym_eig, varimax
from .moments import mode_second_moment, projected_second_moment, theoretical_tau, truncate
from .ranks import RankConfig, RankResult, estimate_ranks, ratio_select
from .simulate import (
    OutlierConfig,
    TensorDgpConfig,
    VectorDgpConfig,
    contaminate,
    gen_tensor,
    gen_vector,
)
from .tensor_ops import (
    fold,
    frobenius_norm,
    kron,
    kron_all,
    kron_omit,
    mode_product,
    multi_mode_product,
    unfold,
    unfold_series,
    unvec,
    vec,
)
from .tuning import CvConfig, CvResult, cv_tau, tau_grid

__all__ = [
    "__version__",
    "LoadingSet", "common_component", "estimate_factors", "estimate_loadings",
    "initial_loadings", "refine_loadings",
    "McSummary", "common_error", "ks_critical", "ks_statistic", "loading_error",
    "normality_diagnostic",
    "ForecastConfig", "forecast_one", "lagged_second_moment", "rolling_errors",
    "EigenPairs", "canonical_sign", "sym_eig", "varimax",
    "mode_second_moment", "projected_second_moment", "theoretical_tau", "truncate",
    "RankConfig", "RankResult", "estimate_ranks", "ratio_select",
    "OutlierConfig", "TensorDgpConfig", "VectorDgpConfig", "contaminate",
    "gen_tensor", "gen_vector",
    "fold", "frobenius_norm", "kron", "kron_all", "kron_omit", "mode_product",
    "multi_mode_product", "unfold", "unfold_series", "unvec", "vec",
    "CvConfig", "CvResult", "cv_tau", "tau_grid",
]
