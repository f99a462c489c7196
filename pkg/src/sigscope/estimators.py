"""The signature-asymptotics functional and what it recovers.

For a truncated signature the functional is approximated by

    a_n = ((n/2)! * ||X^n||_n) ** (2/n),    L ≈ max_{n in window} a_n

and, for one-dimensional Itô-type signatures, ``<X>_t = 2 L``. Applied to the
iterated fWIS integrals of fBM with integrand ``1_{[0,t]}`` this gives
``L = t^{2H} / 2`` and hence an estimate of ``H``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .hermite import DEGENERACY_TOL, cosine_factor, log_half_factorial
from .signatures import Flavor, SignatureResult
from .tensor_algebra import NormKind, level_norm

__all__ = [
    "LimitEstimate",
    "default_window",
    "estimate_fwis_norm",
    "estimate_hurst",
    "estimate_qv",
    "hurst_from_limit",
    "limit_functional",
]

_ITO_1D = (Flavor.ITO_DISCRETE, Flavor.ITO_CLOSED_FORM_1D)


@dataclass(frozen=True)
class LimitEstimate:
    """Window-max estimate of the limit functional with per-level data.

    Attributes:
        value: ``max a_n`` over the window.
        per_level: ``(n, a_n)`` for every level in the window.
        window: inclusive ``(n_min, n_max)``.
        norm: norm used on each level.
        degeneracy_flags: levels whose Hermite cosine factor is below the
            degeneracy tolerance (only computed for 1-D closed forms and
            1-D path signatures, where ``qv`` and ``x_t`` are known).
    """

    value: float
    per_level: tuple[tuple[int, float], ...]
    window: tuple[int, int]
    norm: NormKind
    degeneracy_flags: tuple[int, ...] = field(default=())

    @property
    def argmax(self) -> int:
        return max(self.per_level, key=lambda item: item[1])[0]

    @property
    def degenerate(self) -> bool:
        """True when every level of the window is flagged."""
        return len(self.degeneracy_flags) == len(self.per_level)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "window": list(self.window),
            "norm": self.norm.value,
            "levels": [n for n, _ in self.per_level],
            "a_n": [a for _, a in self.per_level],
            "degeneracy_flags": list(self.degeneracy_flags),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def default_window(depth: int) -> tuple[int, int]:
    """``[ceil(N/2), N]``, never starting below level 2."""
    return (max(2, math.ceil(depth / 2)), depth)


def _resolve_window(window, depth: int) -> tuple[int, int]:
    if window is None:
        window = default_window(depth)
    lo, hi = int(window[0]), int(window[1])
    if lo < 2:
        raise ValueError(f"window must start at level >= 2, got {lo}")
    if hi > depth:
        raise ValueError(f"window end {hi} exceeds signature depth {depth}")
    if lo > hi:
        raise ValueError(f"empty window [{lo}, {hi}]")
    return lo, hi


def _a_n(n: int, norm_value: float) -> float:
    if norm_value == 0.0:
        return 0.0
    return math.exp((2.0 / n) * (log_half_factorial(n) + math.log(norm_value)))


def limit_functional(
    sig: SignatureResult,
    window: tuple[int, int] | None = None,
    norm: NormKind | str = NormKind.L1,
    degeneracy_tol: float = DEGENERACY_TOL,
) -> LimitEstimate:
    """Estimate ``limsup_n ||(n/2)! X^n||^{2/n}`` by a window maximum."""
    norm = NormKind.parse(norm)
    lo, hi = _resolve_window(window, sig.depth)
    per_level = tuple((n, _a_n(n, level_norm(sig.series, n, norm))) for n in range(lo, hi + 1))

    flags: tuple[int, ...] = ()
    qv, x_t = sig.meta.get("qv"), sig.meta.get("x_t")
    if sig.dim == 1 and qv is not None and x_t is not None and qv > 0:
        levels = np.arange(lo, hi + 1)
        cos = np.abs(cosine_factor(levels, x_t, qv))
        flags = tuple(int(n) for n in levels[cos < degeneracy_tol])

    value = max(a for _, a in per_level)
    return LimitEstimate(value, per_level, (lo, hi), norm, flags)


def _require_1d(sig: SignatureResult, allowed: tuple[Flavor, ...], what: str) -> None:
    if sig.dim != 1:
        raise ValueError(f"{what} needs a 1-D signature, got dim {sig.dim}")
    if sig.flavor not in allowed:
        names = ", ".join(f.value for f in allowed)
        raise ValueError(f"{what} needs a signature of flavor {names}; got {sig.flavor.value}")


def estimate_qv(sig: SignatureResult, window: tuple[int, int] | None = None) -> float:
    """Quadratic variation ``2 L`` from a 1-D Itô signature."""
    _require_1d(sig, _ITO_1D, "estimate_qv")
    return 2.0 * limit_functional(sig, window).value


def estimate_fwis_norm(sig: SignatureResult, window: tuple[int, int] | None = None) -> float:
    """``||f||²_{θ,H,t} = 2 L`` from iterated fWIS integrals."""
    _require_1d(sig, (Flavor.FWIS_CLOSED_FORM_1D,), "estimate_fwis_norm")
    return 2.0 * limit_functional(sig, window).value


def _check_time(t: float) -> None:
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    if t == 1:
        raise ValueError("t = 1 makes the Hurst formula degenerate (log t = 0)")
    if t < 1:
        raise ValueError("t < 1 reverses the limsup surrogate; use t > 1")


def hurst_from_limit(limit: LimitEstimate | float, t: float) -> float:
    """``H = log(2 L) / (2 log t)``; requires ``t > 1``."""
    _check_time(t)
    value = limit.value if isinstance(limit, LimitEstimate) else float(limit)
    if value <= 0:
        raise ValueError("limit functional is zero; the Hurst parameter is not identifiable")
    return math.log(2.0 * value) / (2.0 * math.log(t))


def estimate_hurst(sig: SignatureResult, t: float, window: tuple[int, int] | None = None) -> float:
    """Hurst parameter from the signature of fBM with integrand ``1_{[0,t]}``.

    1-D Itô signatures are accepted too, as the ``H = ½`` case.
    """
    _require_1d(sig, (Flavor.FWIS_CLOSED_FORM_1D,) + _ITO_1D, "estimate_hurst")
    _check_time(t)
    return hurst_from_limit(limit_functional(sig, window), t)
