r"""Special-function kernels for the Bingham moment formulas.

Two families are needed:

* exponentially scaled modified Bessel functions :math:`e^{-\lambda} I_p(\lambda)`
  for :math:`p \in \{0, 1, 2\}` (moments on the unit circle), and
* the confluent hypergeometric function :math:`{}_1F_1(a; b; z)` for the
  half-integer parameter pairs appearing in the sphere moments.

Scalar routines sum their series in double-double arithmetic and round once.
The ``*_array`` variants are plain-double numpy versions used where many
values are needed at once (initial-guess tables, the biaxial quadrature).
"""

from __future__ import annotations

import math

import numpy as np

from .extreal import ExtReal, two_prod

__all__ = [
    "bessel_i_scaled",
    "bessel_i_scaled_all",
    "bessel_i_scaled_array",
    "hyp1f1",
    "hyp1f1_scaled",
    "kummer_scaled",
    "kummer_scaled_array",
    "kummer_scaled_array_multi",
    "kummer_scaled_ext",
    "SUPPORTED_HYP1F1",
]

# series/asymptotic switch for e^{-x} I_p(x); the smallest asymptotic term is
# about e^{-2x}, so 25 keeps it below 1e-21
BESSEL_ASYMPTOTIC_FROM = 25.0
# switch for e^{-x} 1F1(a; b; x); smallest asymptotic term ~ e^{-x}
KUMMER_ASYMPTOTIC_FROM = 60.0

SUPPORTED_HYP1F1 = (
    (0.5, 1.5), (1.5, 2.5), (2.5, 3.5),
    (1.0, 1.5), (2.0, 2.5), (3.0, 3.5),
)

_TWO_PI = ExtReal(6.283185307179586, 2.4492935982947064e-16)
_SERIES_RTOL = 1e-20


def _bessel_series(p: int, lam: float) -> ExtReal:
    half = ExtReal(0.5 * lam)
    q = ExtReal(*two_prod(half.hi, half.hi))
    term = ExtReal(1.0)
    for j in range(1, p + 1):
        term = term * half / float(j)
    total = term
    k = 0
    while True:
        k += 1
        term = term * q / float(k * (k + p))
        total = total + term
        if term.hi <= _SERIES_RTOL * total.hi:
            break
    return total


def _bessel_asymptotic(p: int, lam: float) -> ExtReal:
    mu4 = 4.0 * p * p
    term = ExtReal(1.0)
    total = term
    prev = 1.0
    k = 0
    while True:
        k += 1
        odd = 2 * k - 1
        term = term * (odd * odd - mu4) / (8.0 * k * lam)
        mag = abs(term.hi)
        if mag == 0.0:
            break
        if mag > prev:
            raise ArithmeticError(f"asymptotic series for I_{p}({lam}) diverged")
        total = total + term
        prev = mag
        if mag <= _SERIES_RTOL * abs(total.hi):
            break
    return total / (_TWO_PI * lam).sqrt()


def bessel_i_scaled(p: int, lam: float) -> float:
    r"""Return :math:`e^{-\lambda} I_p(\lambda)` for ``p`` in {0, 1, 2}.

    Power series below ``BESSEL_ASYMPTOTIC_FROM`` and the Hankel asymptotic
    expansion above it, both accumulated in double-double.

    Raises
    ------
    ValueError
        If ``lam < 0``, ``lam`` is not finite or ``p`` is unsupported.
    """
    if p not in (0, 1, 2):
        raise ValueError(f"Bessel order must be 0, 1 or 2, got {p!r}")
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0.0:
        raise ValueError(f"lambda must be finite and >= 0, got {lam!r}")
    if lam == 0.0:
        return 1.0 if p == 0 else 0.0
    if lam <= BESSEL_ASYMPTOTIC_FROM:
        return float(_bessel_series(p, lam) * math.exp(-lam))
    return float(_bessel_asymptotic(p, lam))


def bessel_i_scaled_all(lam: float) -> tuple[ExtReal, ExtReal, ExtReal]:
    """Scaled ``I_0, I_1, I_2`` at ``lam`` as ExtReal values (common scale).

    The common factor is irrelevant for ratios, so the series branch skips the
    ``e^{-lam}`` multiplication.
    """
    lam = float(lam)
    if lam < 0.0 or not math.isfinite(lam):
        raise ValueError(f"lambda must be finite and >= 0, got {lam!r}")
    if lam == 0.0:
        return ExtReal(1.0), ExtReal(0.0), ExtReal(0.0)
    if lam <= BESSEL_ASYMPTOTIC_FROM:
        return tuple(_bessel_series(p, lam) for p in (0, 1, 2))
    return tuple(_bessel_asymptotic(p, lam) for p in (0, 1, 2))


def bessel_i_scaled_array(p: int, lam) -> np.ndarray:
    """Vectorised plain-double version of :func:`bessel_i_scaled`."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise ValueError("lambda must be finite and >= 0")
    out = np.empty_like(lam)
    small = lam <= BESSEL_ASYMPTOTIC_FROM
    if np.any(small):
        x = lam[small]
        q = 0.25 * x * x
        term = (0.5 * x) ** p / math.factorial(p)
        total = term.copy()
        for k in range(1, 200):
            term = term * q / (k * (k + p))
            total += term
            if np.all(term <= 1e-17 * total):
                break
        out[small] = total * np.exp(-x)
    big = ~small
    if np.any(big):
        x = lam[big]
        mu4 = 4.0 * p * p
        term = np.ones_like(x)
        total = np.ones_like(x)
        for k in range(1, 60):
            odd = 2 * k - 1
            term = term * (odd * odd - mu4) / (8.0 * k * x)
            total += term
            if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
                break
        out[big] = total / np.sqrt(2.0 * np.pi * x)
    return out


def _check_params(a: float, b: float, z: float) -> None:
    if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(z)):
        raise ValueError("hyp1f1 arguments must be finite")
    # positive-term regime of the (Kummer-transformed) series
    if not (a > 0.0 and b > a):
        raise ValueError(f"hyp1f1 supports b > a > 0 only, got a={a}, b={b}")


def _kummer_series(a: float, b: float, x: float) -> ExtReal:
    term = ExtReal(1.0)
    total = term
    k = 0
    while True:
        term = term * ((a + k) * x) / ((b + k) * (k + 1))
        k += 1
        total = total + term
        if term.hi <= _SERIES_RTOL * total.hi:
            return total


def _kummer_asymptotic(a: float, b: float, x: float) -> ExtReal:
    # e^{-x} 1F1(a;b;x) ~ Gamma(b)/Gamma(a) x^(a-b) 2F0(b-a, 1-a;; 1/x)
    term = ExtReal(1.0)
    total = term
    prev = 1.0
    k = 0
    while True:
        term = term * ((b - a + k) * (1.0 - a + k)) / ((k + 1) * x)
        k += 1
        mag = abs(term.hi)
        if mag == 0.0:
            break
        if mag > prev:
            raise ArithmeticError(f"asymptotic 1F1({a};{b};{x}) diverged")
        total = total + term
        prev = mag
        if mag <= _SERIES_RTOL * abs(total.hi):
            break
    return total * (math.gamma(b) / math.gamma(a) * x ** (a - b))


def kummer_scaled(a: float, b: float, x: float) -> float:
    r"""Return :math:`e^{-x}\,{}_1F_1(a; b; x)` for ``x >= 0`` and ``b > a > 0``."""
    a, b, x = float(a), float(b), float(x)
    _check_params(a, b, x)
    if x < 0.0:
        raise ValueError("kummer_scaled needs x >= 0")
    if x < KUMMER_ASYMPTOTIC_FROM:
        return float(_kummer_series(a, b, x) * math.exp(-x))
    return float(_kummer_asymptotic(a, b, x))


def kummer_scaled_ext(a: float, b: float, x: float) -> ExtReal:
    r"""Double-double :math:`e^{-x}\,{}_1F_1(a; b; x)` for ratios at a common ``x``.

    The rounding of ``e^{-x}`` is a common relative factor for every pair
    ``(a, b)`` at the same ``x`` and cancels exactly in ratios.
    """
    a, b, x = float(a), float(b), float(x)
    _check_params(a, b, x)
    if x < 0.0:
        raise ValueError("kummer_scaled_ext needs x >= 0")
    if x < KUMMER_ASYMPTOTIC_FROM:
        return _kummer_series(a, b, x) * math.exp(-x)
    return _kummer_asymptotic(a, b, x)


def hyp1f1_scaled(a: float, b: float, z: float) -> float:
    r"""Return :math:`e^{-\max(z, 0)}\,{}_1F_1(a; b; z)`.

    For ``z <= 0`` this is the function itself, evaluated through Kummer's
    transformation ``1F1(a;b;z) = e^z 1F1(b-a;b;-z)`` so that every series term
    is positive.  For ``z > 0`` the exponential growth is divided out, which is
    all that ratios of moments need.
    """
    a, b, z = float(a), float(b), float(z)
    _check_params(a, b, z)
    if z <= 0.0:
        return kummer_scaled(b - a, b, -z)
    return kummer_scaled(a, b, z)


def hyp1f1(a: float, b: float, z: float) -> float:
    """Confluent hypergeometric function ``1F1(a; b; z)`` for real ``z``.

    Parameters
    ----------
    a, b : float
        Parameters with ``b > a > 0``; the pairs in ``SUPPORTED_HYP1F1`` are the
        ones the closure uses, other pairs go through the same positive-term
        series.
    z : float
        Argument.

    Raises
    ------
    ValueError
        Unsupported parameters or non-finite input.
    OverflowError
        If the result exceeds the double range (large positive ``z``).
    """
    a, b, z = float(a), float(b), float(z)
    _check_params(a, b, z)
    if z <= 0.0:
        return kummer_scaled(b - a, b, -z)
    if z < KUMMER_ASYMPTOTIC_FROM:
        return float(_kummer_series(a, b, z))
    value = _kummer_asymptotic(a, b, z)
    log_v = math.log(value.hi) + z
    if log_v > 709.78:
        raise OverflowError(f"1F1({a};{b};{z}) exceeds the double range")
    return float(value * math.exp(z))


def kummer_scaled_array(a: float, b: float, x) -> np.ndarray:
    r"""Vectorised plain-double :math:`e^{-x}\,{}_1F_1(a; b; x)`, ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    if not (a > 0.0 and b > a):
        raise ValueError(f"kummer_scaled_array supports b > a > 0 only, got a={a}, b={b}")
    if np.any(x < 0):
        raise ValueError("kummer_scaled_array needs x >= 0")
    out = np.empty_like(x)
    small = x < KUMMER_ASYMPTOTIC_FROM
    if np.any(small):
        xs = x[small]
        term = np.ones_like(xs)
        total = np.ones_like(xs)
        for k in range(400):
            term = term * ((a + k) / ((b + k) * (k + 1))) * xs
            total += term
            if np.all(term <= 1e-17 * total):
                break
        out[small] = total * np.exp(-xs)
    big = ~small
    if np.any(big):
        xb = x[big]
        inv = 1.0 / xb
        term = np.ones_like(xb)
        total = np.ones_like(xb)
        for k in range(80):
            term = term * (((b - a + k) * (1.0 - a + k)) / (k + 1)) * inv
            total += term
            if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
                break
        out[big] = total * (math.gamma(b) / math.gamma(a)) * xb ** (a - b)
    return out


def kummer_scaled_array_multi(a: float, bs, x) -> list[np.ndarray]:
    r""":math:`e^{-x}\,{}_1F_1(a; b; x)` for several ``b`` sharing one pass over ``x``.

    Same algorithm as :func:`kummer_scaled_array`; the powers of ``x`` and the
    exponential are shared, which roughly halves the cost of three calls.
    """
    x = np.asarray(x, dtype=float)
    bs = [float(b) for b in bs]
    if not (a > 0.0 and all(b > a for b in bs)):
        raise ValueError(f"kummer_scaled_array_multi supports b > a > 0 only, got a={a}, b={bs}")
    if np.any(x < 0):
        raise ValueError("kummer_scaled_array_multi needs x >= 0")
    outs = [np.empty_like(x) for _ in bs]
    small = x < KUMMER_ASYMPTOTIC_FROM
    if np.any(small):
        xs = x[small]
        terms = [np.ones_like(xs) for _ in bs]
        totals = [np.ones_like(xs) for _ in bs]
        for k in range(400):
            done = True
            for term, total, b in zip(terms, totals, bs):
                term *= xs
                term *= (a + k) / ((b + k) * (k + 1))
                total += term
                if done and not np.all(term <= 1e-17 * total):
                    done = False
            if done:
                break
        scale = np.exp(-xs)
        for out, total in zip(outs, totals):
            out[small] = total * scale
    big = ~small
    if np.any(big):
        xb = x[big]
        inv = 1.0 / xb
        for out, b in zip(outs, bs):
            term = np.ones_like(xb)
            total = np.ones_like(xb)
            for k in range(80):
                term = term * (((b - a + k) * (1.0 - a + k)) / (k + 1)) * inv
                total += term
                if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
                    break
            out[big] = total * (math.gamma(b) / math.gamma(a)) * xb ** (a - b)
    return outs
