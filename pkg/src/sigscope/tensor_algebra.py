"""Truncated tensor algebra T^N(R^d).

A :class:`TensorSeries` stores one dense, row-major coefficient block per
level. Level ``n`` holds ``d**n`` coefficients indexed by the multi-index
``(i_1, ..., i_n)``; level 0 is the scalar part.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "DEFAULT_MAX_COEFFICIENTS",
    "MemoryBudgetError",
    "NormKind",
    "TensorSeries",
    "check_budget",
    "get_max_coefficients",
    "set_max_coefficients",
    "concat",
    "level_norm",
    "tensor_exp",
    "tensor_power_action",
    "unit_series",
    "zero_series",
]

DEFAULT_MAX_COEFFICIENTS = 10**8

# Mutable so callers (and the CLI) can raise or lower the cap for a session.
_budget = {"max_coefficients": DEFAULT_MAX_COEFFICIENTS}


class MemoryBudgetError(MemoryError):
    """Raised when ``d**N`` exceeds the configured coefficient budget."""


class NormKind(enum.Enum):
    """Admissible coefficient norm on a tensor level."""

    L1 = "l1"
    L2 = "l2"

    @classmethod
    def parse(cls, value: "NormKind | str") -> "NormKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown norm {value!r}; expected 'l1' or 'l2'") from None


def set_max_coefficients(limit: int) -> None:
    """Set the process-wide cap on ``d**N`` coefficients."""
    if limit < 1:
        raise ValueError("coefficient budget must be positive")
    _budget["max_coefficients"] = int(limit)


def get_max_coefficients() -> int:
    return _budget["max_coefficients"]


def check_budget(dim: int, depth: int, limit: int | None = None) -> None:
    """Refuse truncations whose top level would exceed the coefficient budget."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    cap = get_max_coefficients() if limit is None else limit
    # Compare in log space so huge depths do not build huge integers.
    if depth * math.log(dim) > math.log(cap) + 1e-12:
        raise MemoryBudgetError(
            f"d**N = {dim}**{depth} coefficients exceeds the budget of {cap}"
        )


def _readonly(block: np.ndarray) -> np.ndarray:
    block = np.array(block, dtype=np.float64, copy=True).ravel()
    block.flags.writeable = False
    return block


@dataclass(frozen=True, eq=False)
class TensorSeries:
    """Element of the truncated tensor algebra ``T^N(R^dim)``.

    Attributes:
        dim: Dimension ``d`` of the base space.
        depth: Truncation order ``N``.
        levels: ``N + 1`` read-only flat blocks; block ``n`` has ``d**n`` entries.
    """

    dim: int
    depth: int
    levels: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        check_budget(self.dim, self.depth)
        if len(self.levels) != self.depth + 1:
            raise ValueError(
                f"expected {self.depth + 1} levels for depth {self.depth}, got {len(self.levels)}"
            )
        blocks = []
        for n, block in enumerate(self.levels):
            block = _readonly(block)
            if block.size != self.dim**n:
                raise ValueError(
                    f"level {n} must have {self.dim**n} entries, got {block.size}"
                )
            blocks.append(block)
        object.__setattr__(self, "levels", tuple(blocks))

    @classmethod
    def from_levels(cls, levels: Sequence[np.ndarray | Sequence[float]], dim: int) -> "TensorSeries":
        return cls(dim=dim, depth=len(levels) - 1, levels=tuple(np.asarray(b) for b in levels))

    def level(self, n: int, shaped: bool = False) -> np.ndarray:
        """Return level ``n``, flat or reshaped to ``(d,) * n``."""
        if not 0 <= n <= self.depth:
            raise IndexError(f"level {n} out of range for depth {self.depth}")
        block = self.levels[n]
        return block.reshape((self.dim,) * n) if shaped else block

    def __getitem__(self, n: int) -> np.ndarray:
        return self.level(n)

    def allclose(self, other: "TensorSeries", rtol: float = 1e-12, atol: float = 0.0) -> bool:
        _check_compatible(self, other)
        return all(
            np.allclose(a, b, rtol=rtol, atol=atol) for a, b in zip(self.levels, other.levels)
        )

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "depth": self.depth,
            "levels": [block.tolist() for block in self.levels],
        }


def zero_series(dim: int, depth: int) -> TensorSeries:
    """The additive zero of ``T^N(R^dim)``."""
    check_budget(dim, depth)
    return TensorSeries(dim, depth, tuple(np.zeros(dim**n) for n in range(depth + 1)))


def unit_series(dim: int, depth: int) -> TensorSeries:
    """The multiplicative unit ``(1, 0, 0, ...)``."""
    check_budget(dim, depth)
    levels = [np.zeros(dim**n) for n in range(depth + 1)]
    levels[0][0] = 1.0
    return TensorSeries(dim, depth, tuple(levels))


def _check_compatible(a: TensorSeries, b: TensorSeries) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} != {b.dim}")
    if a.depth != b.depth:
        raise ValueError(f"depth mismatch: {a.depth} != {b.depth}")


def concat(a: TensorSeries, b: TensorSeries) -> TensorSeries:
    """Truncated tensor product ``a ⊗ b``.

    Level ``n`` of the result is ``sum_k a_k ⊗ b_{n-k}``. Applied to the
    signatures of two consecutive path pieces this is Chen's identity.
    """
    _check_compatible(a, b)
    out = []
    for n in range(a.depth + 1):
        acc = np.zeros(a.dim**n)
        for k in range(n + 1):
            acc += np.multiply.outer(a.levels[k], b.levels[n - k]).ravel()
        out.append(acc)
    return TensorSeries(a.dim, a.depth, tuple(out))


def tensor_exp(increment: Sequence[float] | np.ndarray, depth: int) -> TensorSeries:
    """Signature of a single linear segment: level ``n`` is ``Δ^{⊗n} / n!``."""
    delta = np.atleast_1d(np.asarray(increment, dtype=np.float64))
    if delta.ndim != 1:
        raise ValueError("increment must be a vector")
    dim = delta.size
    check_budget(dim, depth)
    levels = [np.ones(1)]
    for n in range(1, depth + 1):
        levels.append(np.multiply.outer(levels[-1], delta / n).ravel())
    return TensorSeries(dim, depth, tuple(levels))


def level_norm(a: TensorSeries, n: int, kind: NormKind | str = NormKind.L1) -> float:
    """ℓ¹ or ℓ² norm of the coefficients of level ``n``.

    Sums are correctly rounded (``math.fsum``), so the result does not depend
    on coefficient order and permuting tensor slots leaves it bit-identical.
    """
    kind = NormKind.parse(kind)
    block = a.level(n)
    if kind is NormKind.L1:
        return math.fsum(np.abs(block).tolist())
    return math.sqrt(math.fsum((block * block).tolist()))


def tensor_power_action(a: TensorSeries, matrix: np.ndarray) -> TensorSeries:
    """Apply ``V^{⊗n}`` to every level.

    For a linear map ``V`` the signature of ``V X`` is this image of the
    signature of ``X``, level by level.
    """
    V = np.asarray(matrix, dtype=np.float64)
    if V.shape != (a.dim, a.dim):
        raise ValueError(f"matrix must be {a.dim}x{a.dim}, got {V.shape}")
    out = [a.levels[0].copy()]
    for n in range(1, a.depth + 1):
        block = a.level(n, shaped=True)
        for axis in range(n):
            block = np.moveaxis(np.tensordot(V, block, axes=([1], [axis])), 0, axis)
        out.append(block.ravel())
    return TensorSeries(a.dim, a.depth, tuple(out))
