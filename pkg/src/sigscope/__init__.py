"""Truncated signatures of stochastic paths and their asymptotics.

Computes geometric, discrete Itô and closed-form Hermite signatures, the
limit functional ``L = limsup ||(n/2)! X^n||^{2/n}``, and the quadratic
variation and Hurst parameter recovered from it.
"""

__version__ = "0.1.0"

from .estimators import (
    LimitEstimate,
    estimate_fwis_norm,
    estimate_hurst,
    estimate_qv,
    hurst_from_limit,
    limit_functional,
)
from .hermite import HermitePolynomial, hermite_coeffs, hermite_eval, ito_iterated_integral
from .signatures import (
    Flavor,
    SignatureResult,
    closed_form_ito_signature_1d,
    fwis_closed_form_signature,
    geometric_signature,
    ito_discrete_signature,
    ito_strat_convert_1d,
)
from .stochastic_paths import (
    FbmSpec,
    SamplePath,
    StepFunction,
    apply_linear,
    simulate_bm,
    simulate_fbm,
    theta_norm_sq,
    wiener_integral,
)
from .tensor_algebra import NormKind, TensorSeries, concat, level_norm, tensor_exp, zero_series

__all__ = [
    "FbmSpec",
    "Flavor",
    "HermitePolynomial",
    "LimitEstimate",
    "NormKind",
    "SamplePath",
    "SignatureResult",
    "StepFunction",
    "TensorSeries",
    "apply_linear",
    "closed_form_ito_signature_1d",
    "concat",
    "estimate_fwis_norm",
    "estimate_hurst",
    "estimate_qv",
    "fwis_closed_form_signature",
    "geometric_signature",
    "hermite_coeffs",
    "hermite_eval",
    "hurst_from_limit",
    "ito_discrete_signature",
    "ito_iterated_integral",
    "ito_strat_convert_1d",
    "level_norm",
    "limit_functional",
    "simulate_bm",
    "simulate_fbm",
    "tensor_exp",
    "theta_norm_sq",
    "wiener_integral",
    "zero_series",
]
