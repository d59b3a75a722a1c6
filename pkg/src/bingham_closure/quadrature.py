"""Gauss-Legendre rules and Legendre series (1D and tensor-product 2D).

Series live on a physical interval (or rectangle) that is mapped affinely onto
``[-1, 1]`` (or ``[-1, 1]^2``).  Fitting is discrete projection with a Gauss
rule; evaluation uses the Clenshaw recurrence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError

CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes (increasing) and weights on ``[-1, 1]``.

    ``nodes_lo`` holds the rounding residual of each node (exact root minus
    ``nodes``); fitting uses it to evaluate ``L_k`` at the exact roots.
    """

    nodes: np.ndarray
    weights: np.ndarray
    nodes_lo: np.ndarray | None = None

    @property
    def order(self) -> int:
        return len(self.nodes)

    def mapped(self, lo: float, hi: float) -> np.ndarray:
        """Nodes mapped onto ``[lo, hi]``."""
        return 0.5 * (hi - lo) * self.nodes + 0.5 * (hi + lo)


_RULE_CACHE: dict[int, QuadratureRule] = {}


def gauss_legendre(n: int) -> QuadratureRule:
    """Gauss-Legendre rule of order ``n`` (1 <= n <= 2048).

    Nodes are the roots of ``L_n``, found by Newton's method from
    Chebyshev-type initial guesses; only the positive half is computed and
    mirrored so that the rule is exactly symmetric.
    """
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= 2048:
        raise ValueError(f"quadrature order must be an integer in [1, 2048], got {n!r}")
    n = int(n)
    if n in _RULE_CACHE:
        return _RULE_CACHE[n]
    m = (n + 1) // 2
    k = np.arange(1, m + 1)
    x = np.cos(np.pi * (4 * k - 1) / (4 * n + 2))
    for _ in range(100):
        p, dp = _legendre_and_derivative(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    else:  # pragma: no cover - Newton from these guesses always converges
        raise ConvergenceError(f"Gauss-Legendre nodes for n={n} did not converge")
    x, xl, w = _refine_extended(n, x)
    if n % 2:
        x[-1] = 0.0
        xl[-1] = 0.0
    # x is decreasing and positive; mirror into the full increasing rule
    nodes = np.concatenate([-x, x[::-1][n % 2:]])
    nodes_lo = np.concatenate([-xl, xl[::-1][n % 2:]])
    weights = np.concatenate([w, w[::-1][n % 2:]])
    rule = QuadratureRule(nodes, weights, nodes_lo)
    for arr in (nodes, nodes_lo, weights):
        arr.flags.writeable = False
    _RULE_CACHE[n] = rule
    return rule


def _legendre_and_derivative(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p0 = np.ones_like(x)
    p1 = x.copy()
    if n == 0:
        return p0, np.zeros_like(x)
    for k in range(1, n):
        p0, p1 = p1, ((2 * k + 1) * x * p1 - k * p0) / (k + 1)
    # factored form: x*x - 1 loses digits near the endpoints
    dp = n * (p0 - x * p1) / ((1.0 - x) * (1.0 + x))
    return p1, dp


def _dd_two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _dd_two_prod(a, b):
    p = a * b
    t = 134217729.0 * a
    ah = t - (t - a)
    al = a - ah
    t = 134217729.0 * b
    bh = t - (t - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_norm(s, e):
    hi = s + e
    return hi, e - (hi - s)


def _dd_add(ah, al, bh, bl):
    s, e = _dd_two_sum(ah, bh)
    return _dd_norm(s, e + al + bl)


def _dd_scale(ah, al, c: float):
    p, e = _dd_two_prod(ah, c)
    return _dd_norm(p, e + al * c)


def _dd_mul(ah, al, bh, bl):
    p, e = _dd_two_prod(ah, bh)
    return _dd_norm(p, e + ah * bl + al * bh)


def _dd_div(ah, al, bh, bl):
    q1 = ah / bh
    ph, pl = _dd_mul(bh, bl, q1, 0.0 * q1)
    rh, rl = _dd_add(ah, al, -ph, -pl)
    return _dd_norm(q1, (rh + rl) / bh)


def _refine_extended(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One Newton step and the weights, with the three-term recurrence in double-double.

    Plain-double recurrence error grows like ``n * eps`` and, near the
    endpoints, is amplified in the weights by ``1 / (1 - x^2)``.
    """
    zero = np.zeros_like(x)
    xh, xl = x.copy(), zero.copy()
    for _ in range(2):
        p0h, p0l = np.ones_like(x), zero.copy()
        p1h, p1l = xh.copy(), xl.copy()
        for k in range(1, n):
            th, tl = _dd_mul(xh, xl, p1h, p1l)
            th, tl = _dd_scale(th, tl, 2 * k + 1.0)
            ah, al = _dd_scale(p0h, p0l, -float(k))
            th, tl = _dd_add(th, tl, ah, al)
            p0h, p0l = p1h, p1l
            p1h, p1l = _dd_div(th, tl, np.full_like(x, k + 1.0), zero)
        omh, oml = _dd_add(np.ones_like(x), zero, -xh, -xl)
        oph, opl = _dd_add(np.ones_like(x), zero, xh, xl)
        denh, denl = _dd_mul(omh, oml, oph, opl)
        numh, numl = _dd_mul(xh, xl, p1h, p1l)
        numh, numl = _dd_add(p0h, p0l, -numh, -numl)
        numh, numl = _dd_scale(numh, numl, float(n))
        dph, dpl = _dd_div(numh, numl, denh, denl)
        sh, sl = _dd_div(p1h, p1l, dph, dpl)
        xh, xl = _dd_add(xh, xl, -sh, -sl)
    d2h, d2l = _dd_mul(dph, dpl, dph, dpl)
    d2h, d2l = _dd_mul(d2h, d2l, denh, denl)
    wh, _ = _dd_div(np.full_like(x, 2.0), zero, d2h, d2l)
    return xh, xl, wh


def legendre_vander(x, n: int) -> np.ndarray:
    """Matrix ``V[..., k] = L_k(x)`` for ``k = 0..n``.

    Built row by row (degree-major, contiguous) and returned as a transposed
    view, which is several times faster than writing strided columns.
    """
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    if flat.size <= 4:
        return _vander_small(flat, n).reshape(x.shape + (n + 1,))
    v = np.empty((n + 1, flat.size))
    v[0] = 1.0
    if n >= 1:
        v[1] = flat
    for k in range(1, n):
        np.multiply(flat, v[k], out=v[k + 1])
        v[k + 1] *= (2 * k + 1) / (k + 1)
        v[k + 1] -= (k / (k + 1)) * v[k - 1]
    return v.T.reshape(x.shape + (n + 1,))


def _vander_small(flat: np.ndarray, n: int) -> np.ndarray:
    rows = []
    for t in flat.tolist():
        r = [1.0, t][: n + 1]
        for k in range(1, n):
            r.append((t * r[k]) * ((2 * k + 1) / (k + 1)) - (k / (k + 1)) * r[k - 1])
        rows.append(r)
    return np.array(rows, dtype=float).reshape(len(rows), n + 1)


def rule_vander_dd(rule: QuadratureRule, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``L_k`` at the exact Gauss roots, ``k = 0..n``, as a double-double pair.

    The recurrence runs in double-double from ``nodes + nodes_lo``; plain
    double rounding would otherwise grow like ``k * eps`` and, at the
    endpoints where ``L_k'`` is O(k^2), the node rounding alone would show
    up in high-order coefficients.
    """
    xh = np.asarray(rule.nodes, dtype=float)
    xl = np.zeros_like(xh) if rule.nodes_lo is None else np.asarray(rule.nodes_lo, dtype=float)
    m = len(xh)
    vh = np.empty((m, n + 1))
    vl = np.zeros((m, n + 1))
    vh[:, 0] = 1.0
    if n >= 1:
        vh[:, 1], vl[:, 1] = xh, xl
    for k in range(1, n):
        th, tl = _dd_mul(xh, xl, vh[:, k], vl[:, k])
        th, tl = _dd_scale(th, tl, 2 * k + 1.0)
        ah, al = _dd_scale(vh[:, k - 1], vl[:, k - 1], -float(k))
        th, tl = _dd_add(th, tl, ah, al)
        kk = np.full_like(xh, k + 1.0)
        vh[:, k + 1], vl[:, k + 1] = _dd_div(th, tl, kk, np.zeros_like(xh))
    return vh, vl


def rule_vander(rule: QuadratureRule, n: int) -> np.ndarray:
    """``L_k`` at the exact Gauss roots, rounded to double."""
    vh, vl = rule_vander_dd(rule, n)
    return vh + vl


def _project_dd(f: np.ndarray, rule: QuadratureRule, n: int) -> np.ndarray:
    # sum_j f_j w_j L_k(x_j) with every product and the running sum in double-double
    vh, vl = rule_vander_dd(rule, n)
    ph, pl = _dd_two_prod(f, np.asarray(rule.weights, dtype=float))
    sh = np.zeros(n + 1)
    sl = np.zeros(n + 1)
    for j in range(len(f)):
        th, tl = _dd_mul(vh[j], vl[j], ph[j], pl[j])
        sh, sl = _dd_add(sh, sl, th, tl)
    return sh + sl


def _to_unit(u, lo: float, hi: float):
    u = np.asarray(u, dtype=float)
    width = hi - lo
    tol = CLAMP_TOL * max(1.0, abs(width))
    if np.any(u < lo - tol) or np.any(u > hi + tol):
        bad = u[(u < lo - tol) | (u > hi + tol)].ravel()[0]
        raise DomainError(f"value {bad!r} outside series domain [{lo}, {hi}]")
    x = (2.0 * u - (lo + hi)) / width
    return np.clip(x, -1.0, 1.0)


def clenshaw(coef, x):
    """Evaluate ``sum_k coef[k] L_k(x)`` by backward recurrence."""
    coef = np.asarray(coef, dtype=float)
    x = np.asarray(x, dtype=float)
    n = len(coef) - 1
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for k in range(n, -1, -1):
        b0 = coef[k] + ((2 * k + 1) / (k + 1)) * x * b1 - ((k + 1) / (k + 2)) * b2
        b2 = b1
        b1 = b0
    return b1


@dataclass(frozen=True)
class LegendreSeries1D:
    """``sum_k coef[k] L_k(x)`` with ``x`` the affine image of ``u in [lo, hi]``."""

    coef: np.ndarray
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        coef = np.array(self.coef, dtype=float)
        if coef.ndim != 1 or coef.size == 0 or not np.all(np.isfinite(coef)):
            raise ValueError("coefficients must be a non-empty finite 1D array")
        if not self.hi > self.lo:
            raise ValueError("series interval must have hi > lo")
        coef.flags.writeable = False
        object.__setattr__(self, "coef", coef)

    @property
    def degree(self) -> int:
        return len(self.coef) - 1

    def __call__(self, u):
        return legendre_eval(self, u)


def legendre_eval(series: LegendreSeries1D, u):
    """Evaluate a 1D series at ``u`` (scalar or array) with Clenshaw's recurrence.

    Points outside the interval by at most ``CLAMP_TOL`` (relative to its
    width) are clamped; anything farther raises :class:`DomainError`.
    """
    x = _to_unit(u, series.lo, series.hi)
    out = clenshaw(series.coef, x)
    return float(out) if out.ndim == 0 else out


def legendre_fit_1d(samples, rule: QuadratureRule, n: int, lo: float = -1.0, hi: float = 1.0):
    """Project samples taken at ``rule``'s nodes onto ``L_0..L_n``.

    Each coefficient ``b_k = (2k+1)/2 sum_j f_j L_k(x_j) w_j`` is accumulated in
    double-double in node order, so the result is deterministic.
    """
    f = np.asarray(samples, dtype=float)
    if f.shape != (rule.order,):
        raise ValueError(f"expected {rule.order} samples, got shape {f.shape}")
    if not 0 <= n < rule.order:
        raise ValueError(f"degree {n} must satisfy 0 <= n < N = {rule.order}")
    coef = _project_dd(f, rule, n) * ((2 * np.arange(n + 1) + 1) / 2.0)
    return LegendreSeries1D(coef, lo, hi)


def tail_l2(coef, n: int) -> float:
    """Estimated L2 truncation error ``sqrt(sum_{k>n} b_k^2 * 2/(2k+1))``."""
    coef = np.asarray(coef, dtype=float)
    k = np.arange(len(coef))
    mask = k > n
    return float(math.sqrt(np.sum(coef[mask] ** 2 * 2.0 / (2 * k[mask] + 1))))


@dataclass(frozen=True)
class LegendreSeries2D:
    """``sum_{s,t} coef[s,t] L_s(x') L_t(y')`` on the rectangle ``x_range x y_range``.

    ``x'`` and ``y'`` are the affine images of ``(x, y)`` on ``[-1, 1]^2``.
    """

    coef: np.ndarray
    x_range: tuple[float, float] = (-1.0, 1.0)
    y_range: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        coef = np.array(self.coef, dtype=float)
        if coef.ndim != 2 or coef.size == 0 or not np.all(np.isfinite(coef)):
            raise ValueError("coefficients must be a non-empty finite 2D array")
        coef.flags.writeable = False
        object.__setattr__(self, "coef", coef)
        object.__setattr__(self, "x_range", tuple(float(v) for v in self.x_range))
        object.__setattr__(self, "y_range", tuple(float(v) for v in self.y_range))

    @property
    def degrees(self) -> tuple[int, int]:
        return self.coef.shape[0] - 1, self.coef.shape[1] - 1

    def __call__(self, x, y):
        return legendre_eval_2d(self, x, y)


def legendre_eval_2d(series: LegendreSeries2D, x, y):
    """Evaluate a tensor-product series.

    Scalars go through nested Clenshaw (first over ``s`` with row vectors,
    then over ``t``); arrays use Legendre Vandermonde rows and one matrix
    product, which is the same sum ordered for BLAS.
    """
    xs = _to_unit(x, *series.x_range)
    ys = _to_unit(y, *series.y_range)
    if xs.ndim == 0 and ys.ndim == 0:
        row = clenshaw_rows(series.coef, float(xs))
        return float(clenshaw(row, float(ys)))
    xs, ys = np.broadcast_arrays(xs, ys)
    n1, n2 = series.degrees
    vx = legendre_vander(xs.ravel(), n1)
    vy = legendre_vander(ys.ravel(), n2)
    return np.einsum("ij,ij->i", vx @ series.coef, vy).reshape(xs.shape)


def clenshaw_rows(coef: np.ndarray, x: float) -> np.ndarray:
    """Clenshaw over the first axis: returns ``sum_s coef[s, :] L_s(x)``."""
    n = coef.shape[0] - 1
    b1 = np.zeros(coef.shape[1:])
    b2 = np.zeros(coef.shape[1:])
    for k in range(n, -1, -1):
        b0 = coef[k] + ((2 * k + 1) / (k + 1)) * x * b1 - ((k + 1) / (k + 2)) * b2
        b2, b1 = b1, b0
    return b1


def legendre_fit_2d(samples, rule_x: QuadratureRule, rule_y: QuadratureRule, n1: int, n2: int,
                    x_range=(-1.0, 1.0), y_range=(-1.0, 1.0)) -> LegendreSeries2D:
    """Tensor-product discrete projection of samples on the Gauss grid.

    ``samples[i, j]`` is the value at ``(rule_x.nodes[i], rule_y.nodes[j])``.
    """
    f = np.asarray(samples, dtype=float)
    if f.shape != (rule_x.order, rule_y.order):
        raise ValueError(f"expected samples of shape {(rule_x.order, rule_y.order)}, got {f.shape}")
    if not (0 <= n1 < rule_x.order and 0 <= n2 < rule_y.order):
        raise ValueError("degrees must be below the quadrature orders")
    # first pass over x for every y column, second over y; both in double-double
    vxh, vxl = rule_vander_dd(rule_x, n1)
    vyh, vyl = rule_vander_dd(rule_y, n2)
    wx = np.asarray(rule_x.weights, dtype=float)
    wy = np.asarray(rule_y.weights, dtype=float)
    ah = np.zeros((n1 + 1, rule_y.order))
    al = np.zeros_like(ah)
    for i in range(rule_x.order):
        ph, pl = _dd_two_prod(f[i], wx[i])
        th, tl = _dd_mul(vxh[i][:, None], vxl[i][:, None], ph[None, :], pl[None, :])
        ah, al = _dd_add(ah, al, th, tl)
    ch = np.zeros((n1 + 1, n2 + 1))
    cl = np.zeros_like(ch)
    for j in range(rule_y.order):
        ph, pl = _dd_mul(ah[:, j], al[:, j], wy[j], 0.0)
        th, tl = _dd_mul(ph[:, None], pl[:, None], vyh[j][None, :], vyl[j][None, :])
        ch, cl = _dd_add(ch, cl, th, tl)
    coef = ch + cl
    coef *= ((2 * np.arange(n1 + 1) + 1) / 2.0)[:, None]
    coef *= ((2 * np.arange(n2 + 1) + 1) / 2.0)[None, :]
    return LegendreSeries2D(coef, x_range, y_range)


def tail_l2_2d(coef, n1: int, n2: int) -> float:
    """Estimated L2 error of truncating a 2D coefficient array to ``s<=n1, t<=n2``."""
    coef = np.asarray(coef, dtype=float)
    s = np.arange(coef.shape[0])[:, None]
    t = np.arange(coef.shape[1])[None, :]
    gamma = (2.0 / (2 * s + 1)) * (2.0 / (2 * t + 1))
    mask = (s > n1) | (t > n2)
    return float(math.sqrt(np.sum(np.where(mask, coef**2 * gamma, 0.0))))

