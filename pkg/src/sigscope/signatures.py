"""Signature engines for sampled paths and closed-form 1-D signatures.

Two path-based engines share one chunked kernel layout:

* geometric: the signature of the piecewise-linear interpolation, i.e. the
  Chen product of ``exp(Δ_k)`` over the segments (Stratonovich proxy);
* discrete Itô: the left-point iterated sums, which is the Chen product of
  ``1 + Δ_k`` over the steps.

Both kernels accept a batch of increment arrays ``(B, m, d)`` and vectorise
over time inside fixed-size chunks, so memory stays bounded by
``B * chunk * d**(N-1)`` floats; the top level is reduced straight to
its end value with a batched matrix product.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .hermite import ito_levels
from .stochastic_paths import SamplePath, StepFunction, theta_norm_sq
from .tensor_algebra import TensorSeries, check_budget, concat

__all__ = [
    "Flavor",
    "SignatureResult",
    "closed_form_ito_signature_1d",
    "fwis_closed_form_signature",
    "geometric_levels_batch",
    "geometric_signature",
    "ito_discrete_signature",
    "ito_levels_batch",
    "ito_strat_convert_1d",
]

# Largest temporary kept by a kernel chunk, in float64 elements.
CHUNK_ELEMENTS = 1 << 22


class Flavor(enum.Enum):
    GEOMETRIC = "geometric"
    ITO_DISCRETE = "ito_discrete"
    ITO_CLOSED_FORM_1D = "ito_closed_form_1d"
    FWIS_CLOSED_FORM_1D = "fwis_closed_form_1d"


@dataclass(frozen=True, eq=False)
class SignatureResult:
    """A truncated signature over ``[0, T]`` together with how it was made.

    ``meta`` carries the scalars the closed forms were built from (``qv``,
    ``x_t``, ``hurst``...) so estimators can run their diagnostics.
    """

    series: TensorSeries
    flavor: Flavor
    interval: tuple[float, float | None] = (0.0, None)
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.series.levels[0][0] != 1.0:
            raise ValueError("a signature has level-0 entry exactly 1")

    @property
    def dim(self) -> int:
        return self.series.dim

    @property
    def depth(self) -> int:
        return self.series.depth

    def level(self, n: int) -> np.ndarray:
        return self.series.level(n)

    def to_dict(self) -> dict:
        out = self.series.to_dict()
        out["flavor"] = self.flavor.value
        out["interval"] = list(self.interval)
        out["meta"] = self.meta
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "SignatureResult":
        series = TensorSeries.from_levels([np.asarray(b) for b in data["levels"]], data["dim"])
        interval = tuple(data.get("interval", (0.0, None)))
        return cls(series, Flavor(data["flavor"]), interval, dict(data.get("meta", {})))


# --- batched kernels --------------------------------------------------------


def _as_batch(increments) -> np.ndarray:
    inc = np.asarray(increments, dtype=np.float64)
    if inc.ndim == 2:
        inc = inc[None]
    if inc.ndim != 3:
        raise ValueError(f"increments must have shape (B, m, d), got {inc.shape}")
    return inc


def _chunk_len(batch: int, dim: int, depth: int) -> int:
    # the widest per-step block materialised is level depth-1
    return max(1, CHUNK_ELEMENTS // max(1, batch * dim ** max(depth - 1, 1)))


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # (..., p) x (..., q) -> (..., p*q), row-major multi-index
    return (a[..., :, None] * b[..., None, :]).reshape(a.shape[:-1] + (-1,))


def _advance(offset: np.ndarray, steps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Running sums of ``steps`` along time starting at ``offset``.

    Returns the value before each step and the value after the last one.
    """
    cs = np.cumsum(steps, axis=1)
    path = np.empty_like(cs)
    path[:, 0] = offset
    path[:, 1:] = offset[:, None, :] + cs[:, :-1]
    return path, offset + cs[:, -1]


def _final_sum(offset: np.ndarray, below: np.ndarray, dx: np.ndarray) -> np.ndarray:
    # offset + sum_k below_k ⊗ dx_k, as one batched matmul over time
    return offset + np.matmul(below.transpose(0, 2, 1), dx).reshape(offset.shape)


def ito_levels_batch(increments, depth: int) -> list[np.ndarray]:
    """Discrete Itô signature levels of a batch of paths.

    Runs ``S^n_{k+1} = S^n_k + S^{n-1}_k ⊗ Δ_k``. Returns ``depth + 1``
    arrays of shape ``(B, d**n)``.
    """
    inc = _as_batch(increments)
    B, m, d = inc.shape
    check_budget(d, depth)
    state = [np.ones((B, 1))] + [np.zeros((B, d**n)) for n in range(1, depth + 1)]
    chunk = _chunk_len(B, d, depth)
    for start in range(0, m, chunk):
        dx = inc[:, start : start + chunk]
        below = np.ones(dx.shape[:2] + (1,))
        for n in range(1, depth):
            below, state[n] = _advance(state[n], _outer(below, dx))
        state[depth] = _final_sum(state[depth], below, dx)
    return state


def geometric_levels_batch(increments, depth: int) -> list[np.ndarray]:
    """Signature levels of the piecewise-linear interpolations of a batch.

    Level ``n`` moves at step ``k`` by ``sum_{j<n} S^j_k ⊗ Δ^{⊗(n-j)}/(n-j)!``,
    evaluated by Horner's rule; returns ``depth + 1`` arrays ``(B, d**n)``.
    """
    inc = _as_batch(increments)
    B, m, d = inc.shape
    check_budget(d, depth)
    state = [np.ones((B, 1))] + [np.zeros((B, d**n)) for n in range(1, depth + 1)]
    chunk = _chunk_len(B, d, depth)
    for start in range(0, m, chunk):
        dx = inc[:, start : start + chunk]
        paths = [np.ones(dx.shape[:2] + (1,))]
        for n in range(1, depth + 1):
            acc = paths[0]
            for j in range(1, n):
                acc = paths[j] + _outer(acc, dx / (n - j + 1))
            if n < depth:
                path, state[n] = _advance(state[n], _outer(acc, dx))
                paths.append(path)
            else:
                state[n] = _final_sum(state[n], acc, dx)
    return state


def _series_from_batch(levels: list[np.ndarray], index: int, dim: int) -> TensorSeries:
    return TensorSeries(dim, len(levels) - 1, tuple(block[index] for block in levels))


# --- public engines ------------------------------------------------------------


def _check_depth(depth: int) -> None:
    if depth < 1:
        raise ValueError(f"signature depth must be >= 1, got {depth}")


def geometric_signature(path: SamplePath, depth: int) -> SignatureResult:
    """Signature of the piecewise-linear interpolation of ``path``."""
    _check_depth(depth)
    check_budget(path.dim, depth)
    levels = geometric_levels_batch(path.increments[None], depth)
    return SignatureResult(
        _series_from_batch(levels, 0, path.dim),
        Flavor.GEOMETRIC,
        (0.0, path.horizon),
        {"path": path.meta, "steps": path.steps},
    )


def ito_discrete_signature(path: SamplePath, depth: int) -> SignatureResult:
    """Left-point (Itô) iterated sums of ``path`` up to ``depth``."""
    _check_depth(depth)
    check_budget(path.dim, depth)
    levels = ito_levels_batch(path.increments[None], depth)
    meta: dict[str, Any] = {"path": path.meta, "steps": path.steps}
    if path.dim == 1:
        meta["qv"] = float(path.realized_qv()[0])
        meta["x_t"] = float(path.values[-1, 0])
    return SignatureResult(
        _series_from_batch(levels, 0, path.dim), Flavor.ITO_DISCRETE, (0.0, path.horizon), meta
    )


def closed_form_ito_signature_1d(qv: float, x_t: float, depth: int) -> SignatureResult:
    """Itô signature of a 1-D semimartingale from ``<X>_t`` and ``X_t`` alone.

    Level ``n`` is ``h_n(qv, x_t) / n!``. Levels below ~1e-308 underflow to zero.
    """
    _check_depth(depth)
    if qv < 0:
        raise ValueError(f"quadratic variation must be non-negative, got {qv}")
    levels = ito_levels(qv, x_t, depth)
    series = TensorSeries(1, depth, tuple(levels[n : n + 1] for n in range(depth + 1)))
    return SignatureResult(
        series, Flavor.ITO_CLOSED_FORM_1D, (0.0, None), {"qv": float(qv), "x_t": float(x_t)}
    )


def _qv_exponential(qv: float, depth: int) -> TensorSeries:
    # exp(c e1⊗e1) with c = -qv/2: level 2k is c^k / k!, odd levels vanish
    c = -0.5 * qv
    levels = [np.zeros(1) for _ in range(depth + 1)]
    for k in range(depth // 2 + 1):
        levels[2 * k][0] = c**k / math.factorial(k)
    return TensorSeries(1, depth, tuple(levels))


def ito_strat_convert_1d(strat: SignatureResult, qv: float, inverse: bool = False) -> SignatureResult:
    """Convert a 1-D Stratonovich signature to Itô: ``S ⊗ exp(-½ qv e1⊗e1)``.

    With ``inverse=True`` the map goes back, multiplying by ``exp(+½ qv e1⊗e1)``.
    """
    if strat.dim != 1:
        raise ValueError(f"Itô/Stratonovich conversion is only available for d = 1, got {strat.dim}")
    if qv < 0:
        raise ValueError(f"quadratic variation must be non-negative, got {qv}")
    factor = _qv_exponential(-qv if inverse else qv, strat.depth)
    series = concat(strat.series, factor)
    x_t = float(strat.level(1)[0]) if strat.depth >= 1 else 0.0
    if inverse:
        return SignatureResult(series, Flavor.GEOMETRIC, strat.interval, dict(strat.meta))
    meta = dict(strat.meta, qv=float(qv), x_t=x_t)
    return SignatureResult(series, Flavor.ITO_CLOSED_FORM_1D, strat.interval, meta)


def fwis_closed_form_signature(
    f: StepFunction, hurst: float, t: float, wiener: float, depth: int
) -> SignatureResult:
    """Iterated fWIS integrals of ``X = ∫ f dB^H`` from the realised ``X_t``.

    Level ``n`` is ``h_n(σ², W) / n!`` with ``σ² = ||f||²_{θ,H,t}``.
    """
    _check_depth(depth)
    sigma2 = theta_norm_sq(f, hurst, t)
    levels = ito_levels(sigma2, wiener, depth)
    series = TensorSeries(1, depth, tuple(levels[n : n + 1] for n in range(depth + 1)))
    meta = {"qv": sigma2, "x_t": float(wiener), "hurst": float(hurst), "t": float(t)}
    return SignatureResult(series, Flavor.FWIS_CLOSED_FORM_1D, (0.0, float(t)), meta)
