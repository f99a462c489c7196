"""Scaled bivariate Hermite polynomials ``h_n(t, x)``.

The family is defined by the generating function

    exp(a x - a^2 t / 2) = sum_n a^n / n! * h_n(t, x)

and obeys ``h_{n+1} = x h_n - n t h_{n-1}`` with ``h_0 = 1``, ``h_1 = x``.
``h_n(<X>_t, X_t) / n!`` is the n-th iterated Itô integral of a continuous
one-dimensional semimartingale started at zero.

Coefficients are kept as exact Python integers: ``h_n(t, x) = sum_k c[k] t^k
x^(n-2k)``. The probabilists' polynomial is ``He_n(x) = h_n(1, x)`` and the
physicists' one is ``H_n(y) = h_n(2, 2y)``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "AsymptoticCheck",
    "HermitePolynomial",
    "asymptotic_check",
    "cosine_factor",
    "hermite_asymptotic",
    "hermite_coeffs",
    "hermite_eval",
    "hermite_eval_exact",
    "ito_iterated_integral",
    "ito_levels",
    "log_half_factorial",
    "physicists_hermite",
]

DEGENERACY_TOL = 0.05


@dataclass(frozen=True)
class HermitePolynomial:
    """Exact coefficient table of ``h_n``.

    ``coeffs[k]`` multiplies ``t^k x^(n-2k)`` for ``k = 0..n//2``.
    """

    order: int
    coeffs: tuple[int, ...]

    def dx(self) -> tuple[int, ...]:
        """Coefficients of ``∂_x h_n`` on the monomials ``t^k x^(n-1-2k)``."""
        n = self.order
        return tuple(c * (n - 2 * k) for k, c in enumerate(self.coeffs) if n - 2 * k > 0)

    def heat(self) -> tuple[Fraction, ...]:
        """Coefficients of ``(∂_t + ½∂_x²) h_n`` on ``t^j x^(n-2-2j)``."""
        n = self.order
        out = []
        for j in range((n - 2) // 2 + 1) if n >= 2 else ():
            dt = (j + 1) * self.coeffs[j + 1] if j + 1 < len(self.coeffs) else 0
            dxx = Fraction(self.coeffs[j] * (n - 2 * j) * (n - 2 * j - 1), 2)
            out.append(dt + dxx)
        return tuple(out)

    def __call__(self, t: float, x: float) -> float:
        return hermite_eval(self.order, t, x)


_cache: list[tuple[int, ...]] = [(1,), (1,)]
_cache_lock = threading.Lock()


def hermite_coeffs(n: int) -> HermitePolynomial:
    """Exact coefficient table of ``h_n`` from the three-term recurrence."""
    if n < 0:
        raise ValueError(f"order must be non-negative, got {n}")
    if n >= len(_cache):
        with _cache_lock:
            # c_{k+1} = c_k - k * c_{k-1} shifted by one power of t
            while len(_cache) <= n:
                k = len(_cache) - 1
                cur, prev = _cache[k], _cache[k - 1]
                nxt = list(cur) + [0] * ((k + 1) // 2 + 1 - len(cur))
                for j, c in enumerate(prev):
                    nxt[j + 1] -= k * c
                _cache.append(tuple(nxt))
    return HermitePolynomial(n, _cache[n])


def _exact_numerator(n: int, t: float, x: float) -> tuple[int, int]:
    """``h_n(t, x)`` as an exact ratio of integers (floats are dyadic rationals)."""
    coeffs = hermite_coeffs(n).coeffs
    p, q = float(x).as_integer_ratio()
    a, b = float(t).as_integer_ratio()
    half, odd = divmod(n, 2)
    # h_n * b^half * q^n = p^odd * sum_k c_k (a q^2)^k (b p^2)^(half-k)
    step, tq = b * p * p, a * q * q
    acc, tpow = 0, 1
    for c in coeffs:
        acc = acc * step + c * tpow
        tpow *= tq
    # coeffs has half+1 entries, so acc already carries the right powers
    return p**odd * acc, b**half * q**n


def hermite_eval_exact(n: int, t: float, x: float) -> Fraction:
    """``h_n(t, x)`` evaluated exactly at the given (binary) floats."""
    num, den = _exact_numerator(n, t, x)
    return Fraction(num, den)


def hermite_eval(n: int, t: float, x: float) -> float:
    """``h_n(t, x)`` rounded once from the exact rational value."""
    num, den = _exact_numerator(n, t, x)
    return num / den


def ito_iterated_integral(n: int, qv: float, x_t: float) -> float:
    """n-th iterated Itô integral ``h_n(<X>_t, X_t) / n!``."""
    if qv < 0:
        raise ValueError(f"quadratic variation must be non-negative, got {qv}")
    num, den = _exact_numerator(n, qv, x_t)
    return num / (den * math.factorial(n))


def ito_levels(qv, x_t, depth: int) -> np.ndarray:
    """All levels ``h_n(qv, x)/n!`` for ``n = 0..depth`` in floating point.

    Vectorised over broadcastable ``qv`` and ``x_t``; the result has shape
    ``(depth + 1,) + broadcast shape``. Runs the Hermite recurrence divided
    through by ``(n+1)!``, which keeps magnitudes near the signature scale
    rather than near ``h_n`` itself.
    """
    qv = np.asarray(qv, dtype=np.float64)
    x = np.asarray(x_t, dtype=np.float64)
    if np.any(qv < 0):
        raise ValueError("quadratic variation must be non-negative")
    shape = np.broadcast(qv, x).shape
    out = np.empty((depth + 1,) + shape)
    out[0] = 1.0
    if depth >= 1:
        out[1] = x
    for n in range(1, depth):
        out[n + 1] = (x * out[n] - qv * out[n - 1]) / (n + 1)
    return out


def log_half_factorial(n: int | np.ndarray) -> float | np.ndarray:
    """``log((n/2)!)`` with ``(n/2)! := Γ(n/2 + 1)`` for odd ``n`` too."""
    if np.ndim(n) == 0:
        return math.lgamma(n / 2 + 1)
    from scipy.special import gammaln

    return gammaln(np.asarray(n, dtype=np.float64) / 2 + 1)


def physicists_hermite(n: int, y: float) -> float:
    """Physicists' ``H_n(y) = h_n(2, 2y)``, exact then rounded."""
    return hermite_eval(n, 2.0, 2.0 * y)


def hermite_asymptotic(n: int, y: float) -> float:
    """Large-``n`` approximation of the physicists' ``H_n(y)``.

    ``e^{y²/2} 2^n / √π · Γ((n+1)/2) · cos(y√(2n) - nπ/2)``
    """
    if n < 1:
        raise ValueError("asymptotic formula needs n >= 1")
    log_mag = y * y / 2 + n * math.log(2.0) + math.lgamma((n + 1) / 2) - 0.5 * math.log(math.pi)
    return math.exp(log_mag) * math.cos(y * math.sqrt(2 * n) - n * math.pi / 2)


def cosine_factor(n, x, t):
    """Oscillatory factor ``cos(x √(n/t) - nπ/2)`` of ``h_n(t, x)`` at large ``n``."""
    n = np.asarray(n, dtype=np.float64)
    return np.cos(x * np.sqrt(n / t) - n * np.pi / 2)


@dataclass(frozen=True)
class AsymptoticCheck:
    order: int
    y: float
    exact: float
    asymptotic: float
    ratio: float
    degenerate: bool


def asymptotic_check(n: int, y: float, tol: float = DEGENERACY_TOL) -> AsymptoticCheck:
    """Compare ``H_n(y)`` with its asymptotic form.

    ``degenerate`` is set when the cosine factor is below ``tol`` in absolute
    value; the ratio is then meaningless and reported as NaN.
    """
    exact = physicists_hermite(n, y)
    approx = hermite_asymptotic(n, y)
    cosine = math.cos(y * math.sqrt(2 * n) - n * math.pi / 2)
    degenerate = abs(cosine) < tol
    ratio = float("nan") if degenerate else exact / approx
    return AsymptoticCheck(n, y, exact, approx, ratio, degenerate)
