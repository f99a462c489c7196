"""Seeded simulation of sampled paths and step-function Wiener integrals.

Every generator is a pure function of its arguments and a seed. Trial seeds
for Monte-Carlo drivers come from :func:`trial_seed`, which mixes a master
seed and a trial index through :class:`numpy.random.SeedSequence`, so a trial
draws the same numbers whatever order or thread it runs in.
"""

from __future__ import annotations

import csv
import io
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

__all__ = [
    "CovarianceFactorizationError",
    "FbmSpec",
    "SamplePath",
    "StepFunction",
    "apply_linear",
    "fbm_covariance",
    "fbm_increment_covariance",
    "make_rng",
    "simulate_bm",
    "simulate_bm_increments",
    "simulate_fbm",
    "theta_kernel",
    "theta_norm_sq",
    "trial_seed",
    "wiener_integral",
]

Seed = int | np.random.SeedSequence | None


class CovarianceFactorizationError(np.linalg.LinAlgError):
    """The fBM covariance matrix could not be Cholesky-factorised."""


def trial_seed(master_seed: int, trial_index: int) -> np.random.SeedSequence:
    """Seed of trial ``trial_index`` under ``master_seed``."""
    return np.random.SeedSequence([int(master_seed), int(trial_index)])


def make_rng(seed: Seed) -> np.random.Generator:
    return np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class SamplePath:
    """A d-dimensional path sampled on ``0 = t_0 < t_1 < ... < t_m``.

    ``values`` has shape ``(m + 1, d)`` and its first row is zero.
    """

    times: np.ndarray
    values: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=np.float64).ravel()
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] != times.size:
            raise ValueError(
                f"values must have shape ({times.size}, d), got {values.shape}"
            )
        if times.size < 2:
            raise ValueError("a path needs at least two grid points")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if times[0] != 0.0:
            raise ValueError("paths start at t = 0")
        if np.any(values[0] != 0.0):
            raise ValueError("paths start at the origin")
        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def steps(self) -> int:
        return self.times.size - 1

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def realized_qv(self) -> np.ndarray:
        """Per-coordinate sum of squared increments."""
        return np.sum(self.increments**2, axis=0)

    @classmethod
    def from_increments(cls, times: np.ndarray, increments: np.ndarray, meta=None) -> "SamplePath":
        inc = np.asarray(increments, dtype=np.float64)
        if inc.ndim == 1:
            inc = inc[:, None]
        values = np.vstack([np.zeros((1, inc.shape[1])), np.cumsum(inc, axis=0)])
        return cls(times, values, dict(meta or {}))

    def to_csv(self, target: str | Path | io.TextIOBase | None = None) -> str:
        """Write ``t,x1..xd`` rows at 17 significant digits; returns the text."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"x{i + 1}" for i in range(self.dim)])
        for t, row in zip(self.times, self.values):
            writer.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])
        text = buf.getvalue()
        if isinstance(target, (str, Path)):
            Path(target).write_text(text)
        elif target is not None:
            target.write(text)
        return text

    @classmethod
    def from_csv(cls, source: str | Path | io.TextIOBase) -> "SamplePath":
        if isinstance(source, (str, Path)):
            text = Path(source).read_text()
        else:
            text = source.read()
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], [r for r in rows[1:] if r]
        if not header or header[0] != "t":
            raise ValueError("CSV header must start with 't'")
        data = np.array(body, dtype=np.float64)
        return cls(data[:, 0], data[:, 1:], {"source": "csv"})

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "values": self.values.tolist(),
            "meta": self.meta,
        }


def _uniform_grid(T: float, m: int) -> np.ndarray:
    if T <= 0:
        raise ValueError(f"horizon must be positive, got {T}")
    if m < 1:
        raise ValueError(f"need at least one step, got {m}")
    return np.linspace(0.0, T, m + 1)


def simulate_bm_increments(rng: np.random.Generator, d: int, T: float, m: int) -> np.ndarray:
    """``(m, d)`` standard Brownian increments on a uniform grid."""
    return rng.standard_normal((m, d)) * np.sqrt(T / m)


def simulate_bm(d: int, T: float, m: int, seed: Seed = None) -> SamplePath:
    """d-dimensional standard Brownian motion on ``m`` uniform steps of ``[0, T]``."""
    if d < 1:
        raise ValueError(f"dim must be >= 1, got {d}")
    times = _uniform_grid(T, m)
    inc = simulate_bm_increments(make_rng(seed), d, T, m)
    return SamplePath.from_increments(times, inc, {"generator": "bm", "dim": d, "seed": _seed_repr(seed)})


def apply_linear(path: SamplePath, V) -> SamplePath:
    """The path ``t -> V X_t``."""
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise ValueError(f"V must be square, got shape {V.shape}")
    if V.shape[1] != path.dim:
        raise ValueError(f"V is {V.shape[0]}x{V.shape[1]} but the path has dim {path.dim}")
    meta = dict(path.meta, linear_map=V.tolist())
    return SamplePath(path.times, path.values @ V.T, meta)


@dataclass(frozen=True)
class FbmSpec:
    """Fractional Brownian motion on ``steps`` uniform steps of ``[0, horizon]``."""

    hurst: float
    horizon: float = 1.0
    steps: int = 256
    dim: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"Hurst parameter must lie in (0, 1), got {self.hurst}")
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.steps < 1:
            raise ValueError(f"need at least one step, got {self.steps}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")


def fbm_covariance(hurst: float, s, t):
    """``R_H(s, t) = ½(t^{2H} + s^{2H} - |t - s|^{2H})``."""
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    two_h = 2.0 * hurst
    return 0.5 * (np.abs(t) ** two_h + np.abs(s) ** two_h - np.abs(t - s) ** two_h)


_chol_cache: dict[tuple[float, float, int], np.ndarray] = {}
_chol_lock = threading.Lock()


def _cholesky_factor(hurst: float, T: float, m: int) -> np.ndarray:
    key = (float(hurst), float(T), int(m))
    factor = _chol_cache.get(key)
    if factor is not None:
        return factor
    with _chol_lock:
        factor = _chol_cache.get(key)
        if factor is None:
            grid = _uniform_grid(T, m)[1:]
            cov = fbm_covariance(hurst, grid[:, None], grid[None, :])
            try:
                factor = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as exc:
                raise CovarianceFactorizationError(
                    f"fBM covariance is not numerically positive definite (H={hurst}, m={m})"
                ) from exc
            factor.flags.writeable = False
            _chol_cache[key] = factor
    return factor


def simulate_fbm(spec: FbmSpec, seed: Seed = None) -> SamplePath:
    """Exact-law fBM samples via the Cholesky factor of the grid covariance.

    Coordinates are independent copies. The factor is computed once per
    ``(H, T, m)`` and shared across seeds and threads.
    """
    factor = _cholesky_factor(spec.hurst, spec.horizon, spec.steps)
    z = make_rng(seed).standard_normal((spec.steps, spec.dim))
    values = np.vstack([np.zeros((1, spec.dim)), factor @ z])
    meta = {
        "generator": "fbm",
        "hurst": spec.hurst,
        "dim": spec.dim,
        "seed": _seed_repr(seed),
    }
    return SamplePath(_uniform_grid(spec.horizon, spec.steps), values, meta)


def _seed_repr(seed: Seed):
    if isinstance(seed, np.random.SeedSequence):
        entropy = seed.entropy
        return list(entropy) if isinstance(entropy, (list, tuple)) else entropy
    return seed


# --- fractional Wiener integrals of step functions -------------------------


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous step function: ``values[i]`` on ``[knots[i], knots[i+1])``."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        knots = np.array(self.knots, dtype=np.float64).ravel()
        values = np.array(self.values, dtype=np.float64).ravel()
        if knots.size < 2 or values.size != knots.size - 1:
            raise ValueError("need len(values) == len(knots) - 1 >= 1")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)

    @classmethod
    def indicator(cls, a: float, b: float) -> "StepFunction":
        return cls([a, b], [1.0])

    @classmethod
    def constant(cls, c: float, a: float, b: float) -> "StepFunction":
        return cls([a, b], [c])

    def __call__(self, u):
        u = np.asarray(u, dtype=np.float64)
        idx = np.searchsorted(self.knots, u, side="right") - 1
        inside = (idx >= 0) & (idx < self.values.size)
        return np.where(inside, self.values[np.clip(idx, 0, self.values.size - 1)], 0.0)

    def restrict(self, t: float) -> "StepFunction":
        """The function times ``1_{[0, t]}``, with knots clipped to ``[0, t]``."""
        lo = max(self.knots[0], 0.0)
        hi = min(self.knots[-1], t)
        if hi <= lo:
            return StepFunction([0.0, max(t, 1.0)], [0.0])
        inner = self.knots[(self.knots > lo) & (self.knots < hi)]
        knots = np.concatenate([[lo], inner, [hi]])
        return StepFunction(knots, self(knots[:-1]))


def fbm_increment_covariance(hurst: float, a, b, c, d):
    """``E[(B_b - B_a)(B_d - B_c)]`` for fBM, i.e. ``∫_a^b ∫_c^d θ_H``.

    ``½(|b-c|^{2H} + |a-d|^{2H} - |a-c|^{2H} - |b-d|^{2H})``; also valid at
    ``H = ½`` where it reduces to the overlap length.
    """
    two_h = 2.0 * hurst
    g = lambda z: np.abs(z) ** two_h  # noqa: E731
    return 0.5 * (g(b - c) + g(a - d) - g(a - c) - g(b - d))


def theta_kernel(hurst: float, s: float, t: float) -> float:
    """Covariance density ``H(2H-1)|s-t|^{2H-2}`` of fBM for ``H > ½``."""
    if not 0.5 < hurst < 1.0:
        raise ValueError(f"theta kernel needs H in (1/2, 1), got {hurst}")
    if s == t:
        raise ValueError("theta kernel is singular on the diagonal s == t")
    return hurst * (2 * hurst - 1) * abs(s - t) ** (2 * hurst - 2)


def theta_norm_sq(f: StepFunction, hurst: float, t: float) -> float:
    """``∫_0^t ∫_0^t f(u) f(v) θ_H(u, v) du dv`` in closed form.

    Each pair of cells integrates exactly through the fBM increment
    covariance, so the diagonal singularity costs no quadrature error.
    ``H = ½`` is accepted as the white-noise limit (the plain L² norm).
    """
    if not 0.5 <= hurst < 1.0:
        raise ValueError(f"theta norm needs H in [1/2, 1), got {hurst}")
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    g = f.restrict(t)
    if not np.any(g.values):
        return 0.0
    a, b = g.knots[:-1], g.knots[1:]
    cov = fbm_increment_covariance(hurst, a[:, None], b[:, None], a[None, :], b[None, :])
    return float(max(g.values @ cov @ g.values, 0.0))


def wiener_integral(path: SamplePath, f: StepFunction) -> float:
    """``∫_0^T f dB^H`` for a step ``f`` constant on the path's grid cells."""
    if path.dim != 1:
        raise ValueError(f"Wiener integrals need a 1-D path, got dim {path.dim}")
    grid = path.times
    for knot in f.knots:
        if grid[0] <= knot <= grid[-1] and not np.any(np.isclose(grid, knot, rtol=0, atol=1e-12 * max(1.0, grid[-1]))):
            raise ValueError(f"step function knot {knot} is not a grid point")
    # midpoints keep knots that sit on grid points from rounding to the wrong side
    per_cell = f(0.5 * (grid[:-1] + grid[1:]))
    return float(np.dot(per_cell, path.increments[:, 0]))
