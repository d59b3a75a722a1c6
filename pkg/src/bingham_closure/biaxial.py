r"""Biaxial Bingham closure on the unit sphere.

Density :math:`\propto \exp[-(\lambda_1 + \lambda_2\cos 2\varphi)\sin^2\theta]`
with :math:`\lambda_1 \ge \lambda_2 \ge 0`, i.e. ``exp(-m^T B m)`` with
``B = diag(lam1 + lam2, lam1 - lam2, 0)``, so ``m11 <= m22 <= m33``.

Moments are ratios of one-dimensional integrals of :math:`{}_1F_1` over
:math:`\varphi`.  The closure itself tabulates ``eta1, eta2, eta3`` as 2D
Legendre series over the square ``(x, y)`` obtained from the moment
triangle ``A(0,0), B(1/2,-1/2), C(2/3,0)`` in ``(mu1, mu2)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, DomainError
from .quadrature import (
    CLAMP_TOL,
    LegendreSeries2D,
    gauss_legendre,
    legendre_fit_2d,
    legendre_vander,
    tail_l2_2d,
)
from .piecewise import utc_timestamp
from .specfun import kummer_scaled_array_multi
from .tensor import UNIQUE_3D, eig_sym3, rotate4_diagonal, sanitize

__all__ = [
    "BiaxialState",
    "BiaxialBlock",
    "BiaxialTable",
    "forward_moments_biaxial",
    "forward_biaxial_array",
    "oracle_moments_sphere",
    "map_mu_to_xy",
    "map_xy_to_mu",
    "invert_mu_biaxial",
    "invert_mu_biaxial_array",
    "build_table_biaxial",
    "eval_eta123",
    "close_3d",
    "diagonal_pairs_biaxial",
    "PIECEWISE_BLOCKS",
]

LAMBDA_CAP = 1e5
QUAD_N = 128
NEWTON_TOL = 1e-15
MAX_NEWTON = 100
MAX_HALVINGS = 30
NOISE_FLOOR = 1e-13
ISOTROPY_RADIUS = 1e-10
ISOTROPIC_ETA = (8.0 / 15.0, 0.0, 4.0 / 15.0)
MU_C = (2.0 / 3.0, 0.0)

# (x range, y range, (n1, n2) for eta1, eta2, eta3) of the six blocks
PIECEWISE_BLOCKS = (
    ((-1.0, 1.0), (0.0, 1.0), ((17, 15), (17, 15), (17, 16))),
    ((-1.0, -1.0 / 3.0), (-2.0 / 3.0, 0.0), ((22, 22), (22, 21), (23, 21))),
    ((-1.0 / 3.0, 1.0), (-2.0 / 3.0, 0.0), ((16, 20), (16, 20), (16, 21))),
    ((-1.0, -0.8), (-1.0, -2.0 / 3.0), ((24, 26), (23, 26), (23, 26))),
    ((-0.8, -1.0 / 3.0), (-1.0, -2.0 / 3.0), ((23, 24), (23, 25), (22, 26))),
    ((-1.0 / 3.0, 1.0), (-1.0, -2.0 / 3.0), ((20, 24), (21, 24), (22, 25))),
)
GLOBAL_DEGREES = (100, 100)
GLOBAL_QUAD_N = 128
PIECEWISE_QUAD_N = 40


# -- forward moments -------------------------------------------------------------


@dataclass(frozen=True)
class BiaxialState:
    """``mu1 = m11 + m22``, ``mu2 = m11 - m22`` and the three second-order functionals."""

    mu1: float
    mu2: float
    eta1: float
    eta2: float
    eta3: float

    def jacobian(self) -> np.ndarray:
        """``d(mu1, mu2)/d(lam1, lam2)``."""
        return _jacobian(self.mu1, self.mu2, self.eta1, self.eta2, self.eta3)

    def fourth_moments(self) -> dict:
        """Nonzero diagonal-frame fourth moments keyed by index string."""
        P = diagonal_pairs_biaxial(self.mu1, self.mu2, self.eta1, self.eta2, self.eta3)
        return {"1111": P[0, 0], "2222": P[1, 1], "3333": P[2, 2],
                "1122": P[0, 1], "1133": P[0, 2], "2233": P[1, 2]}


def _jacobian(mu1, mu2, eta1, eta2, eta3):
    j11 = mu1 * mu1 - eta1
    j12 = mu1 * mu2 - eta2
    j22 = mu2 * mu2 - eta3
    return np.stack([np.stack([j11, j12], -1), np.stack([j12, j22], -1)], -2)


@lru_cache(maxsize=8)
def _omega_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    w = (np.arange(n) + 0.5) * (0.5 * np.pi / n)
    return np.sin(w) ** 2, np.cos(w) ** 2


def _integrals(lam1: np.ndarray, lam2: np.ndarray, n: int):
    """Quadrature sums proportional to the moment integrals.

    With ``psi = pi/2 - phi`` the argument is ``s = d + 2 lam2 sin^2 psi``
    (``d = lam1 - lam2``), peaked at ``psi = 0`` when ``lam2 >> d``.  The
    substitution ``tan psi = c tan omega``, ``c^2 = (d+1)/(d+2 lam2+1)``,
    spreads the peak over the whole period; the integrand in ``omega`` is
    smooth and periodic, so the midpoint rule converges spectrally.
    """
    d = lam1 - lam2
    c2 = (d + 1.0) / (d + 2.0 * lam2 + 1.0)
    s2, co2 = _omega_nodes(n)
    den = co2[None, :] + c2[:, None] * s2[None, :]
    sin2psi = c2[:, None] * s2[None, :] / den
    jac = np.sqrt(c2)[:, None] / den
    s = d[:, None] + 2.0 * lam2[:, None] * sin2psi
    f1, f2, f3 = kummer_scaled_array_multi(0.5, (1.5, 2.5, 3.5), s)
    cos2phi = 2.0 * sin2psi - 1.0
    f1 = f1 * jac
    f2 = f2 * jac
    f3 = f3 * jac
    i1 = f1.sum(axis=1)
    i2 = f2.sum(axis=1)
    i2c = (f2 * cos2phi).sum(axis=1)
    f3c = f3 * cos2phi
    i3 = f3.sum(axis=1)
    i3c = f3c.sum(axis=1)
    i3cc = (f3c * cos2phi).sum(axis=1)
    return i1, i2, i2c, i3, i3c, i3cc


def forward_biaxial_array(lam1, lam2, quad_n: int = QUAD_N) -> np.ndarray:
    """Vectorised forward map: rows ``(mu1, mu2, eta1, eta2, eta3)`` for each parameter pair."""
    lam1 = np.atleast_1d(np.asarray(lam1, dtype=float))
    lam2 = np.atleast_1d(np.asarray(lam2, dtype=float))
    lam1, lam2 = np.broadcast_arrays(lam1, lam2)
    out = np.empty(lam1.shape + (5,))
    flat1, flat2 = lam1.ravel(), lam2.ravel()
    res = np.empty((flat1.size, 5))
    chunk = max(1, 2**21 // quad_n)
    for a in range(0, flat1.size, chunk):
        i1, i2, i2c, i3, i3c, i3cc = _integrals(flat1[a:a + chunk], flat2[a:a + chunk], quad_n)
        res[a:a + chunk] = np.stack([
            (2.0 / 3.0) * i2 / i1, (2.0 / 3.0) * i2c / i1,
            (8.0 / 15.0) * i3 / i1, (8.0 / 15.0) * i3c / i1, (8.0 / 15.0) * i3cc / i1,
        ], axis=-1)
    out[...] = res.reshape(out.shape)
    return out


def _check_params(lam1: float, lam2: float) -> None:
    if not (math.isfinite(lam1) and math.isfinite(lam2)):
        raise DomainError("Bingham parameters must be finite")
    if not (lam1 >= lam2 >= 0.0):
        raise DomainError(f"need lam1 >= lam2 >= 0, got ({lam1}, {lam2})")
    if lam1 > LAMBDA_CAP:
        raise DomainError(f"lam1 = {lam1} exceeds the supported range {LAMBDA_CAP:g}")


def forward_moments_biaxial(lam1: float, lam2: float, quad_n: int = QUAD_N, audit: bool = False):
    """Partition function and moment state at ``(lam1, lam2)``.

    Returns ``(z, BiaxialState)``.  With ``audit=True`` the computation is
    repeated with twice the nodes and :class:`ConvergenceError` is raised if
    any quantity moves by more than 1e-11.
    """
    lam1, lam2 = float(lam1), float(lam2)
    _check_params(lam1, lam2)
    i1, *_ = _integrals(np.array([lam1]), np.array([lam2]), quad_n)
    z = 8.0 * (0.5 * np.pi / quad_n) * float(i1[0])
    row = forward_biaxial_array(lam1, lam2, quad_n)[0]
    if audit:
        ref = forward_biaxial_array(lam1, lam2, 2 * quad_n)[0]
        if np.max(np.abs(ref - row)) > 1e-11:
            raise ConvergenceError(f"moment quadrature not converged at ({lam1}, {lam2}) with N={quad_n}")
    return z, BiaxialState(*(float(v) for v in row))


def oracle_moments_sphere(B_diag, n_theta: int = 256, n_phi: int = 1024):
    """Direct quadrature of the moments of ``exp(-m^T B m)`` for diagonal ``B``.

    Gauss-Legendre in ``cos(theta)`` times the periodic trapezoid rule in
    ``phi``.  Returns ``(m_diag, q)`` with ``m_diag = (m11, m22, m33)`` and
    ``q`` the 15 unique fourth moments.  Accurate to about 1e-12 for
    ``max|B| <= 200``.
    """
    b = np.asarray(B_diag, dtype=float)
    if b.shape != (3,) or not np.all(np.isfinite(b)):
        raise DomainError("B_diag must be three finite numbers")
    if np.max(np.abs(b)) > 200:
        warnings.warn("oracle_moments_sphere: accuracy not guaranteed for max|B| > 200", stacklevel=2)
    rule = gauss_legendre(n_theta)
    u = rule.nodes
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt((1.0 - u) * (1.0 + u))
    m = np.stack([st[:, None] * np.cos(phi)[None, :],
                  st[:, None] * np.sin(phi)[None, :],
                  np.broadcast_to(u[:, None], (n_theta, n_phi))], axis=0)
    e = b[0] * m[0] ** 2 + b[1] * m[1] ** 2 + b[2] * m[2] ** 2
    w = np.exp(-(e - e.min())) * rule.weights[:, None]
    z = w.sum()
    m_diag = np.array([np.sum(w * m[i] ** 2) for i in range(3)]) / z
    q = np.array([np.sum(w * m[i] * m[j] * m[k] * m[l]) for i, j, k, l in UNIQUE_3D]) / z
    return m_diag, q


# -- triangle <-> square ------------------------------------------------------------


def map_mu_to_xy(mu1, mu2):
    """``x = 8 mu2/(3 mu1 + 3 mu2 - 2) - 1``, ``y = 3 mu1 + 3 mu2 - 1``.

    The vertex ``C = (2/3, 0)`` is singular (it is the whole edge ``y = 1``);
    there ``x`` is returned as ``-1``.  Results are clamped to the square.
    """
    mu1 = np.asarray(mu1, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    den = 3.0 * mu1 + 3.0 * mu2 - 2.0
    near_c = den > -1e-13
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(near_c, -1.0, 8.0 * mu2 / np.where(near_c, -1.0, den) - 1.0)
    y = 3.0 * mu1 + 3.0 * mu2 - 1.0
    x = np.clip(x, -1.0, 1.0)
    y = np.clip(y, -1.0, 1.0)
    if x.ndim == 0:
        return float(x), float(y)
    return x, y


def map_xy_to_mu(x, y):
    """Inverse of :func:`map_mu_to_xy`."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t = (1.0 + x) * (1.0 - y) / 8.0
    mu1 = t + y / 3.0 + 1.0 / 3.0
    mu2 = -t
    if mu1.ndim == 0:
        return float(mu1), float(mu2)
    return mu1, mu2


def _in_triangle(mu1, mu2, tol=CLAMP_TOL):
    return (mu2 <= tol) & (mu1 + mu2 >= -tol) & (3.0 * mu1 - mu2 <= 2.0 + tol)


# -- inversion -----------------------------------------------------------------------


@lru_cache(maxsize=1)
def _init_grid():
    l1 = np.geomspace(1e-3, LAMBDA_CAP, 64)
    ratio = np.linspace(0.0, 1.0, 64)
    L1, R = np.meshgrid(l1, ratio, indexing="ij")
    lam1 = L1.ravel()
    lam2 = (L1 * R).ravel()
    f = forward_biaxial_array(lam1, lam2)
    x, y = map_mu_to_xy(f[:, 0], f[:, 1])
    return lam1, lam2, np.stack([x, y], axis=-1)


def _initial_guess(mu1: np.ndarray, mu2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lam1, lam2, xy = _init_grid()
    x, y = map_mu_to_xy(mu1, mu2)
    pts = np.stack([np.atleast_1d(x), np.atleast_1d(y)], axis=-1)
    idx = np.empty(len(pts), dtype=int)
    for a in range(0, len(pts), 2048):
        d2 = ((pts[a:a + 2048, None, :] - xy[None, :, :]) ** 2).sum(axis=-1)
        idx[a:a + 2048] = d2.argmin(axis=1)
    return lam1[idx].copy(), lam2[idx].copy()


def _project(lam1, lam2):
    lam2 = np.clip(lam2, 0.0, LAMBDA_CAP)
    lam1 = np.clip(lam1, lam2, LAMBDA_CAP)
    lam2 = np.minimum(lam2, lam1)
    return lam1, lam2


def invert_mu_biaxial_array(mu1, mu2, tol: float = NEWTON_TOL, quad_n: int = QUAD_N):
    """Vectorised Newton inversion of ``(mu1, mu2) -> (lam1, lam2)``.

    Each step solves ``J dlam = mu* - mu`` with the explicit 2x2 inverse,
    projects onto ``lam1 >= lam2 >= 0`` and halves the step until the
    residual norm does not grow.  A point stops when the residual is below
    ``tol``, when successive images differ by less than ``tol``, or when
    the residual is below ``NOISE_FLOOR`` and no longer halves per step.

    Returns ``(lam1, lam2, iterations, final_state)`` where ``final_state``
    holds rows ``(mu1, mu2, eta1, eta2, eta3)`` at the solution.
    """
    t1 = np.atleast_1d(np.asarray(mu1, dtype=float)).copy()
    t2 = np.atleast_1d(np.asarray(mu2, dtype=float)).copy()
    if not np.all(_in_triangle(t1, t2)):
        bad = np.flatnonzero(~_in_triangle(t1, t2))[0]
        raise DomainError(f"(mu1, mu2) = ({t1[bad]}, {t2[bad]}) outside the moment triangle")
    n = t1.size
    lam1, lam2 = _initial_guess(t1, t2)
    iso = np.hypot(t1 - MU_C[0], t2 - MU_C[1]) <= ISOTROPY_RADIUS
    lam1[iso] = 0.0
    lam2[iso] = 0.0
    state = forward_biaxial_array(lam1, lam2, quad_n)
    res = np.stack([t1 - state[:, 0], t2 - state[:, 1]], axis=-1)
    rnorm = np.hypot(res[:, 0], res[:, 1])
    iters = np.zeros(n, dtype=int)
    active = ~iso & (rnorm > tol)
    for _ in range(MAX_NEWTON):
        if not np.any(active):
            break
        ia = np.flatnonzero(active)
        J = _jacobian(*state[ia].T)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        if np.any(np.abs(det) < 1e-300):
            k = ia[np.abs(det) < 1e-300][0]
            raise ConvergenceError(f"singular Jacobian at node {k} (mu1={t1[k]}, mu2={t2[k]})")
        r = res[ia]
        d1 = (J[:, 1, 1] * r[:, 0] - J[:, 0, 1] * r[:, 1]) / det
        d2 = (-J[:, 1, 0] * r[:, 0] + J[:, 0, 0] * r[:, 1]) / det
        step = np.ones(len(ia))
        pending = np.ones(len(ia), dtype=bool)
        new1, new2 = lam1[ia].copy(), lam2[ia].copy()
        new_state = state[ia].copy()
        for _h in range(MAX_HALVINGS + 1):
            p = np.flatnonzero(pending)
            c1, c2 = _project(lam1[ia[p]] + step[p] * d1[p], lam2[ia[p]] + step[p] * d2[p])
            st = forward_biaxial_array(c1, c2, quad_n)
            rn = np.hypot(t1[ia[p]] - st[:, 0], t2[ia[p]] - st[:, 1])
            ok = rn <= rnorm[ia[p]] * (1.0 + 1e-12) + 1e-16
            acc = p[ok]
            new1[acc], new2[acc] = c1[ok], c2[ok]
            new_state[acc] = st[ok]
            pending[acc] = False
            step[p[~ok]] *= 0.5
            if not np.any(pending):
                break
        iters[ia] += 1
        old = rnorm[ia].copy()
        moved = np.hypot(new_state[:, 0] - state[ia, 0], new_state[:, 1] - state[ia, 1])
        lam1[ia], lam2[ia] = new1, new2
        state[ia] = new_state
        res[ia] = np.stack([t1[ia] - new_state[:, 0], t2[ia] - new_state[:, 1]], axis=-1)
        rnorm[ia] = np.hypot(res[ia, 0], res[ia, 1])
        # stagnation at the noise floor of the forward map, or no acceptable step
        stalled = (rnorm[ia] <= NOISE_FLOOR) & (rnorm[ia] > 0.5 * old)
        done = (rnorm[ia] <= tol) | (moved <= tol) | stalled | pending
        active[ia[done]] = False
    if np.any(active):
        k = np.flatnonzero(active)[0]
        raise ConvergenceError(
            f"Newton inversion did not converge for node {k} (mu1={t1[k]}, mu2={t2[k]}); "
            f"residual {rnorm[k]:.3e}")
    state[iso] = np.array([MU_C[0], MU_C[1], *ISOTROPIC_ETA])
    return lam1, lam2, iters, state


def invert_mu_biaxial(mu1: float, mu2: float, tol: float = NEWTON_TOL, full_output: bool = False):
    """Scalar wrapper of :func:`invert_mu_biaxial_array`; returns ``(lam1, lam2)``."""
    l1, l2, it, st = invert_mu_biaxial_array(mu1, mu2, tol)
    if full_output:
        return float(l1[0]), float(l2[0]), int(it[0]), BiaxialState(*(float(v) for v in st[0]))
    return float(l1[0]), float(l2[0])


# -- tables --------------------------------------------------------------------------


@dataclass(frozen=True)
class BiaxialBlock:
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    series: tuple[LegendreSeries2D, LegendreSeries2D, LegendreSeries2D]
    residuals: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "x_range", tuple(float(v) for v in self.x_range))
        object.__setattr__(self, "y_range", tuple(float(v) for v in self.y_range))
        object.__setattr__(self, "series", tuple(self.series))
        object.__setattr__(self, "residuals", tuple(float(r) for r in self.residuals))
        for s in self.series:
            if s.x_range != self.x_range or s.y_range != self.y_range:
                raise ValueError("series rectangle must match the block")
        n1 = max(s.coef.shape[0] for s in self.series)
        n2 = max(s.coef.shape[1] for s in self.series)
        packed = np.zeros((n1, 3 * n2))
        for i, s in enumerate(self.series):
            packed[: s.coef.shape[0], i * n2: i * n2 + s.coef.shape[1]] = s.coef
        packed.flags.writeable = False
        object.__setattr__(self, "_packed", packed)


@dataclass(frozen=True)
class BiaxialTable:
    """Blocks tiling ``[-1, 1]^2`` with three 2D series each."""

    variant: str
    blocks: tuple[BiaxialBlock, ...]
    metadata: dict = field(default_factory=dict)
    domain: str = "sphere_biaxial"

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        area = sum((b.x_range[1] - b.x_range[0]) * (b.y_range[1] - b.y_range[0]) for b in self.blocks)
        if abs(area - 4.0) > 1e-12:
            raise ValueError("blocks do not tile the square")
        for b in self.blocks:
            if not (-1.0 <= b.x_range[0] < b.x_range[1] <= 1.0 and -1.0 <= b.y_range[0] < b.y_range[1] <= 1.0):
                raise ValueError("block outside the square")
        for i, a in enumerate(self.blocks):
            for b in self.blocks[i + 1:]:
                ox = min(a.x_range[1], b.x_range[1]) - max(a.x_range[0], b.x_range[0])
                oy = min(a.y_range[1], b.y_range[1]) - max(a.y_range[0], b.y_range[0])
                if ox > 1e-15 and oy > 1e-15:
                    raise ValueError("blocks overlap")

    @property
    def residuals(self):
        return [b.residuals for b in self.blocks]


def _eta_on_grid(xr, yr, N: int, tol: float):
    rule = gauss_legendre(N)
    gx = rule.mapped(*xr)
    gy = rule.mapped(*yr)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    mu1, mu2 = map_xy_to_mu(X.ravel(), Y.ravel())
    _, _, iters, state = invert_mu_biaxial_array(mu1, mu2, tol)
    etas = [state[:, 2 + i].reshape(N, N) for i in range(3)]
    return rule, etas, iters


def build_table_biaxial(variant: str = "global", degrees=None, quad_n: int | None = None,
                        tol: float = NEWTON_TOL, blocks=None) -> BiaxialTable:
    """Build the eta1/eta2/eta3 table.

    ``degrees`` is ``(n1, n2)`` for the global variant (default ``(100, 100)``
    on 128 x 128 nodes).  The piecewise variant uses six blocks with per-eta
    degrees of at most 26 (40 x 40 nodes per block).  Each series is fitted
    to degree ``N - 1`` and truncated; the discarded coefficients give the
    residual estimate.
    """
    if variant == "global":
        n1, n2 = GLOBAL_DEGREES if degrees is None else tuple(int(v) for v in degrees)
        layout = blocks or (((-1.0, 1.0), (-1.0, 1.0), ((n1, n2),) * 3),)
        N = GLOBAL_QUAD_N if quad_n is None else int(quad_n)
    elif variant == "piecewise":
        layout = blocks or PIECEWISE_BLOCKS
        N = PIECEWISE_QUAD_N if quad_n is None else int(quad_n)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    built, info = [], []
    for bi, (xr, yr, degs) in enumerate(layout):
        if any(not (0 <= a < N and 0 <= b < N) for a, b in degs):
            raise ValueError(f"block {bi}: degrees must be below the quadrature order {N}")
        try:
            rule, etas, iters = _eta_on_grid(xr, yr, N, tol)
        except ConvergenceError as exc:
            raise ConvergenceError(f"block {bi}: {exc}") from exc
        series, residuals, tails = [], [], []
        for eta, (a, b) in zip(etas, degs):
            full = legendre_fit_2d(eta, rule, rule, N - 1, N - 1, xr, yr)
            series.append(LegendreSeries2D(full.coef[: a + 1, : b + 1], xr, yr))
            residuals.append(tail_l2_2d(full.coef, a, b))
            tails.append(_decay_profile(full.coef))
        built.append(BiaxialBlock(xr, yr, tuple(series), tuple(residuals)))
        info.append({"quad_n": N, "degrees": [list(d) for d in degs],
                     "newton_iterations_max": int(iters.max()), "coef_decay": tails})
    meta = {"newton_tol": tol, "moment_quad_n": QUAD_N, "precision": "double-double accumulation",
            "quad_n": N, "build_timestamp": utc_timestamp(), "blocks": info}
    return BiaxialTable(variant, tuple(built), meta)


def _decay_profile(coef: np.ndarray) -> dict:
    # max |b_st| along each index, for coefficient-decay plots,
    # and the residual of the square truncation s, t <= k for every k
    a = np.abs(coef)
    k1 = np.arange(coef.shape[0])[:, None]
    k2 = np.arange(coef.shape[1])[None, :]
    energy = coef**2 * (2.0 / (2 * k1 + 1)) * (2.0 / (2 * k2 + 1))
    diag = [math.sqrt(energy[k + 1:, :].sum() + energy[: k + 1, k + 1:].sum()) for k in range(min(coef.shape))]
    return {"s": [float(v) for v in a.max(axis=1)], "t": [float(v) for v in a.max(axis=0)],
            "residual_square": [float(v) for v in diag]}


_CHUNK = 1 << 15


def _eval_block(block: BiaxialBlock, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    P = block._packed
    n1, n3 = P.shape
    n2 = n3 // 3
    (x0, x1), (y0, y1) = block.x_range, block.y_range
    xs = (2.0 * x - (x0 + x1)) / (x1 - x0)
    ys = (2.0 * y - (y0 + y1)) / (y1 - y0)
    out = np.empty((len(x), 3))
    for a in range(0, len(x), _CHUNK):
        vx = legendre_vander(xs[a:a + _CHUNK], n1 - 1)
        vy = legendre_vander(ys[a:a + _CHUNK], n2 - 1)
        r = (vx @ P).reshape(-1, 3, n2)
        out[a:a + _CHUNK] = np.einsum("pkt,pt->pk", r, vy)
    return out


def _cell_index(table: BiaxialTable):
    cached = table.__dict__.get("_cells")
    if cached is not None:
        return cached
    xe = np.unique([v for b in table.blocks for v in b.x_range])
    ye = np.unique([v for b in table.blocks for v in b.y_range])
    cell = np.full((len(xe) - 1, len(ye) - 1), -1, dtype=np.int8)
    xm, ym = 0.5 * (xe[1:] + xe[:-1]), 0.5 * (ye[1:] + ye[:-1])
    for i, b in enumerate(table.blocks):
        cx = (xm > b.x_range[0]) & (xm < b.x_range[1])
        cy = (ym > b.y_range[0]) & (ym < b.y_range[1])
        cell[np.ix_(cx, cy)] = i
    if np.any(cell < 0):
        raise ValueError("blocks do not tile the square")
    object.__setattr__(table, "_cells", (xe, ye, cell))
    return xe, ye, cell


def eval_eta123(table: BiaxialTable, mu1, mu2) -> np.ndarray:
    """``(eta1, eta2, eta3)`` at ``(mu1, mu2)``; returns shape ``(..., 3)``.

    Points within ``1e-10`` of the isotropic vertex return the exact
    isotropic values.

    Raises
    ------
    DomainError
        If a point lies outside the triangle by more than the clamp tolerance.
    """
    mu1 = np.asarray(mu1, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    mu1, mu2 = np.broadcast_arrays(mu1, mu2)
    shape = mu1.shape
    m1, m2 = mu1.ravel(), mu2.ravel()
    if not np.all(np.isfinite(m1) & np.isfinite(m2)) or not np.all(_in_triangle(m1, m2)):
        bad = np.flatnonzero(~_in_triangle(m1, m2) | ~np.isfinite(m1 + m2))[0]
        raise DomainError(f"(mu1, mu2) = ({m1[bad]}, {m2[bad]}) outside the moment triangle")
    x, y = map_mu_to_xy(m1, m2)
    x, y = np.atleast_1d(x), np.atleast_1d(y)
    out = np.empty((m1.size, 3))
    blocks = table.blocks
    if len(blocks) == 1:
        out[:] = _eval_block(blocks[0], x, y)
    else:
        # block id from a cell grid over the distinct block edges
        xe, ye, cell = _cell_index(table)
        ix = np.searchsorted(xe, x, side="right") - 1
        iy = np.searchsorted(ye, y, side="right") - 1
        np.clip(ix, 0, len(xe) - 2, out=ix)
        np.clip(iy, 0, len(ye) - 2, out=iy)
        bid = cell[ix, iy]
        order = np.argsort(bid, kind="stable")
        bounds = np.searchsorted(bid[order], np.arange(len(blocks) + 1))
        res = np.empty((m1.size, 3))
        xo, yo = x[order], y[order]
        for i, b in enumerate(blocks):
            lo, hi = bounds[i], bounds[i + 1]
            if lo < hi:
                res[lo:hi] = _eval_block(b, xo[lo:hi], yo[lo:hi])
        out[order] = res
    iso = np.hypot(m1 - MU_C[0], m2 - MU_C[1]) <= ISOTROPY_RADIUS
    out[iso] = ISOTROPIC_ETA
    return out.reshape(shape + (3,))


def diagonal_pairs_biaxial(mu1, mu2, eta1, eta2, eta3) -> np.ndarray:
    """Diagonal-frame ``q_aabb`` matrix from ``mu`` and ``eta`` values."""
    mu1, mu2, eta1, eta2, eta3 = (np.asarray(v, dtype=float) for v in (mu1, mu2, eta1, eta2, eta3))
    P = np.empty(np.broadcast(mu1, eta1).shape + (3, 3))
    P[..., 0, 0] = (eta1 + 2.0 * eta2 + eta3) / 4.0
    P[..., 1, 1] = (eta1 - 2.0 * eta2 + eta3) / 4.0
    P[..., 2, 2] = 1.0 - 2.0 * mu1 + eta1
    P[..., 0, 1] = P[..., 1, 0] = (eta1 - eta3) / 4.0
    P[..., 0, 2] = P[..., 2, 0] = ((mu1 + mu2) - (eta1 + eta2)) / 2.0
    P[..., 1, 2] = P[..., 2, 1] = ((mu1 - mu2) - (eta1 - eta2)) / 2.0
    return P


def close_3d(M_hat, table: BiaxialTable, sanitize_input: bool = True) -> np.ndarray:
    """Fourth moments (15 unique components) for one or a stack of 3x3 second moments."""
    M = np.asarray(M_hat, dtype=float)
    if M.shape[-2:] != (3, 3):
        raise DomainError(f"expected 3x3 second moments, got shape {M.shape}")
    if sanitize_input:
        M = sanitize(M)
    w, U = eig_sym3(M)
    w = np.clip(w, 0.0, 1.0)
    mu1 = w[..., 0] + w[..., 1]
    mu2 = np.minimum(w[..., 0] - w[..., 1], 0.0)
    eta = eval_eta123(table, mu1, mu2)
    P = diagonal_pairs_biaxial(mu1, mu2, eta[..., 0], eta[..., 1], eta[..., 2])
    return rotate4_diagonal(P, U)
