"""Piecewise 1D Legendre tables for eta(mu), shared by the circle and uniaxial closures."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError, DomainError
from .quadrature import CLAMP_TOL, LegendreSeries1D, gauss_legendre, legendre_fit_1d, tail_l2


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


_EVAL_CHUNK = 1 << 14  # points per block; keeps the recurrence buffers in cache


def _clenshaw_block(coef: np.ndarray, x: np.ndarray) -> np.ndarray:
    # in-place Clenshaw; same recurrence as quadrature.clenshaw
    n = len(coef) - 1
    b1 = np.full_like(x, coef[n])
    if n == 0:
        return b1
    b2 = np.zeros_like(x)
    tmp = np.empty_like(x)
    for k in range(n - 1, -1, -1):
        np.multiply(x, b1, out=tmp)
        tmp *= (2 * k + 1) / (k + 1)
        b2 *= (k + 1) / (k + 2)
        tmp -= b2
        tmp += coef[k]
        b2, b1, tmp = b1, tmp, b2
    return b1


def _clenshaw_fast(coef: np.ndarray, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size <= _EVAL_CHUNK:
        return _clenshaw_block(coef, x)
    flat = x.ravel()
    out = np.empty_like(flat)
    for a in range(0, flat.size, _EVAL_CHUNK):
        out[a:a + _EVAL_CHUNK] = _clenshaw_block(coef, flat[a:a + _EVAL_CHUNK])
    return out.reshape(x.shape)


@dataclass(frozen=True)
class Table1D:
    """eta as a piecewise Legendre series in mu.

    ``breakpoints`` has one more entry than ``series``; piece ``i`` covers
    ``[breakpoints[i], breakpoints[i+1]]``.  ``endpoint_values`` pins the
    exact value at domain ends that Gauss sampling never reaches.
    """

    domain: str
    variant: str
    breakpoints: tuple[float, ...]
    series: tuple[LegendreSeries1D, ...]
    residuals: tuple[float, ...]
    endpoint_values: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        if len(bp) != len(self.series) + 1 or any(b >= c for b, c in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be increasing with one more entry than pieces")
        for s, lo, hi in zip(self.series, bp, bp[1:]):
            if s.lo != lo or s.hi != hi:
                raise ValueError("series intervals must match the breakpoints")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "series", tuple(self.series))
        object.__setattr__(self, "residuals", tuple(float(r) for r in self.residuals))

    @property
    def lo(self) -> float:
        return self.breakpoints[0]

    @property
    def hi(self) -> float:
        return self.breakpoints[-1]

    def __call__(self, mu):
        return eval_table1d(self, mu)


def eval_table1d(table: Table1D, mu):
    """Evaluate a :class:`Table1D` at scalar or array ``mu``."""
    u = np.asarray(mu, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    lo, hi = table.lo, table.hi
    tol = CLAMP_TOL * max(1.0, hi - lo)
    if u.size:
        umin, umax = float(u.min()), float(u.max())
        if not (umin >= lo - tol and umax <= hi + tol):
            bad = ~((u >= lo - tol) & (u <= hi + tol))
            raise DomainError(f"mu={u[bad][0]!r} outside table domain [{lo}, {hi}]")
        if umin < lo or umax > hi:
            u = np.clip(u, lo, hi)
    if len(table.series) == 1:
        out = _clenshaw_fast(table.series[0].coef, (2.0 * u - (lo + hi)) / (hi - lo))
    else:
        # group points by piece, evaluate each group contiguously, scatter back
        flat = u.ravel()
        piece = np.zeros(flat.shape, dtype=np.int8)
        for b in table.breakpoints[1:-1]:
            piece += flat >= b
        order = np.argsort(piece, kind="stable")
        bounds = np.concatenate([[0], np.cumsum(np.bincount(piece, minlength=len(table.series)))])
        us = flat[order]
        res = np.empty_like(us)
        for i, s in enumerate(table.series):
            a, b = bounds[i], bounds[i + 1]
            if a < b:
                x = us[a:b]
                x *= 2.0 / (s.hi - s.lo)
                x -= (s.lo + s.hi) / (s.hi - s.lo)
                res[a:b] = _clenshaw_fast(s.coef, x)
        out = np.empty_like(flat)
        out[order] = res
        out = out.reshape(u.shape)
    for end, value in table.endpoint_values.items():
        out[u == end] = value
    return float(out[0]) if scalar else out


def build_table1d(
    domain: str,
    variant: str,
    breakpoints: Sequence[float],
    degrees: Sequence[int],
    quad_orders: Sequence[int],
    eta_of_mu: Callable[[np.ndarray], tuple[np.ndarray, dict]],
    endpoint_values: dict,
    metadata: dict,
) -> Table1D:
    """Sample ``eta_of_mu`` at the Gauss nodes of every piece and fit.

    ``eta_of_mu`` returns the eta samples and a diagnostics dict (merged into
    the per-piece metadata).  Each piece is fitted up to degree ``N - 1`` and
    truncated to its degree; the discarded tail gives the residual estimate.
    """
    if not (len(breakpoints) == len(degrees) + 1 == len(quad_orders) + 1):
        raise ValueError("need one degree and one quadrature order per piece")
    series, residuals, diags = [], [], []
    for i, (lo, hi) in enumerate(zip(breakpoints, breakpoints[1:])):
        n, N = int(degrees[i]), int(quad_orders[i])
        if not 0 <= n < N:
            raise ValueError(f"piece {i}: degree {n} must be below the quadrature order {N}")
        rule = gauss_legendre(N)
        mu = rule.mapped(lo, hi)
        try:
            eta, diag = eta_of_mu(mu)
        except ConvergenceError as exc:
            raise ConvergenceError(f"piece {i} [{lo}, {hi}]: {exc}") from exc
        full = legendre_fit_1d(eta, rule, N - 1, lo, hi)
        series.append(LegendreSeries1D(full.coef[: n + 1], lo, hi))
        residuals.append(tail_l2(full.coef, n))
        diags.append({"quad_n": N, "degree": n, **diag, "tail_coef": [float(c) for c in full.coef[n + 1:]]})
    meta = dict(metadata)
    meta["quad_n"] = max(int(q) for q in quad_orders)
    meta["build_timestamp"] = utc_timestamp()
    meta["pieces"] = diags
    return Table1D(domain, variant, tuple(breakpoints), tuple(series), tuple(residuals),
                   dict(endpoint_values), meta)
