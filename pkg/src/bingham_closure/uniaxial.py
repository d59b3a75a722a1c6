r"""Uniaxial Bingham closure on the unit sphere.

Density :math:`\propto \exp(-2\lambda\cos^2\theta)` about the local 3-axis,
:math:`\lambda \in \mathbb{R}` (``lam > 0`` oblate, ``lam < 0`` prolate).  With
:math:`F_a = {}_1F_1(a; a+1; -2\lambda)`

.. math::  \mu = 2\langle\cos^2\theta\rangle = \tfrac23 F_{3/2}/F_{1/2},\qquad
           \eta = 4\langle\cos^4\theta\rangle = \tfrac45 F_{5/2}/F_{1/2},

and :math:`\mu'(\lambda) = \mu^2 - \eta < 0`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache, partial

import numpy as np

from .errors import ConvergenceError, DomainError, NotUniaxialError
from .piecewise import Table1D, build_table1d, eval_table1d
from .specfun import kummer_scaled_array, kummer_scaled_ext
from .tensor import eig_sym3, rotate4_diagonal, sanitize

__all__ = [
    "UniaxialState",
    "forward_moments_uni",
    "invert_mu_uni",
    "build_table_uni",
    "eval_eta_uni",
    "close_3d_uniaxial",
    "uniaxial_pairs",
    "PIECEWISE_BREAKPOINTS",
]

LAMBDA_CAP = 1e5
MU_MIN = 1e-12
MU_MAX = 2.0 - 1e-12
NEWTON_TOL = 1e-15
MAX_NEWTON = 100
MULTIPLICITY_TOL = 1e-10

PIECEWISE_BREAKPOINTS = (0.0, 0.045, 0.103, 0.2, 0.36, 2.0 / 3.0, 1.26, 1.56, 1.73, 1.84, 1.925, 2.0)
PIECEWISE_DEGREE = 18
GLOBAL_DEGREE = 160
GLOBAL_QUAD_N = 200
PIECEWISE_QUAD_N = 48


@dataclass(frozen=True)
class UniaxialState:
    lam: float
    mu: float
    eta: float

    @property
    def dmu(self) -> float:
        """``d mu / d lambda = mu**2 - eta`` (negative)."""
        return self.mu * self.mu - self.eta


def _ratios(lam: float):
    # the three 1F1 at a common argument, scaled by a common factor
    if lam >= 0.0:
        x = 2.0 * lam
        f1, f3, f5 = (kummer_scaled_ext(1.0, b, x) for b in (1.5, 2.5, 3.5))
    else:
        x = -2.0 * lam
        f1, f3, f5 = (kummer_scaled_ext(a, a + 1.0, x) for a in (0.5, 1.5, 2.5))
    mu = f3 / f1 * (2.0 / 3.0)
    eta = f5 / f1 * 0.8
    return mu, eta


def _check_lam(lam: float) -> float:
    lam = float(lam)
    if not math.isfinite(lam) or abs(lam) > LAMBDA_CAP:
        raise DomainError(f"lambda must be finite with |lambda| <= {LAMBDA_CAP:g}, got {lam!r}")
    return lam


def forward_moments_uni(lam: float) -> UniaxialState:
    """``mu`` and ``eta`` of the uniaxial density at parameter ``lam``."""
    lam = _check_lam(lam)
    mu, eta = _ratios(lam)
    return UniaxialState(lam, float(mu), float(eta))


def _forward_array(lam: np.ndarray) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    mu = np.empty_like(lam)
    pos = lam >= 0
    x = 2.0 * lam[pos]
    mu[pos] = (2.0 / 3.0) * kummer_scaled_array(1.0, 2.5, x) / kummer_scaled_array(1.0, 1.5, x)
    x = -2.0 * lam[~pos]
    mu[~pos] = (2.0 / 3.0) * kummer_scaled_array(1.5, 2.5, x) / kummer_scaled_array(0.5, 1.5, x)
    return mu


@lru_cache(maxsize=1)
def _mu_init_table() -> tuple[np.ndarray, np.ndarray]:
    g = np.geomspace(1e-4, LAMBDA_CAP, 1024)
    lam = np.concatenate([-g[::-1], [0.0], g])
    return lam, _forward_array(lam)


def invert_mu_uni(mu_target: float, tol: float = NEWTON_TOL, full_output: bool = False):
    """Parameter ``lam`` with ``mu(lam) = mu_target`` (``mu`` decreases in ``lam``).

    Newton's method with ``mu' = mu^2 - eta``, started from the nearest
    tabulated point and safeguarded by a bracket with bisection.
    """
    t = float(mu_target)
    if not (MU_MIN <= t <= MU_MAX):
        raise DomainError(f"mu target must lie in [{MU_MIN}, {MU_MAX}], got {t!r}")
    lam_tab, mu_tab = _mu_init_table()
    if not (mu_tab[-1] <= t <= mu_tab[0]):
        raise ConvergenceError(f"mu={t!r} lies beyond mu at the lambda cap +-{LAMBDA_CAP:g} "
                               f"([{mu_tab[-1]!r}, {mu_tab[0]!r}])")
    # mu_tab is decreasing; bracket [lo, hi] in lambda with mu(lo) >= t >= mu(hi)
    k = int(np.searchsorted(-mu_tab, -t, side="left"))
    lo = float(lam_tab[k - 1]) if k > 0 else -LAMBDA_CAP
    hi = float(lam_tab[k]) if k < len(lam_tab) else LAMBDA_CAP
    lam = lo if k > 0 and abs(mu_tab[k - 1] - t) < abs(mu_tab[min(k, len(lam_tab) - 1)] - t) else hi
    if t == 2.0 / 3.0:
        lam = 0.0
    for it in range(MAX_NEWTON + 1):
        mu, eta = _ratios(lam)
        r = float(t - mu)
        if abs(r) <= tol:
            return (lam, it) if full_output else lam
        if r < 0:
            lo = max(lo, lam)
        else:
            hi = min(hi, lam)
        slope = float(mu * mu - eta)
        new = lam + r / slope if slope < 0 else math.nan
        if not (lo < new < hi) or new == lam:
            if hi - lo <= 4 * np.finfo(float).eps * max(abs(lo), abs(hi), 1.0) and abs(r) <= 8 * tol:
                return (lam, it) if full_output else lam
            new = 0.5 * (lo + hi)
        lam = new
    raise ConvergenceError(f"Newton inversion for mu={t!r} did not converge in {MAX_NEWTON} iterations")


def _eta_samples(mu: np.ndarray, tol: float = NEWTON_TOL):
    eta = np.empty_like(mu)
    iters = []
    for j, m in enumerate(mu):
        try:
            lam, it = invert_mu_uni(float(m), tol=tol, full_output=True)
        except (ConvergenceError, DomainError) as exc:
            raise ConvergenceError(f"node {j} (mu={m!r}): {exc}") from exc
        eta[j] = forward_moments_uni(lam).eta
        iters.append(it)
    return eta, {"newton_iterations_max": max(iters), "newton_iterations": iters}


def build_table_uni(variant: str = "global", degrees=None, quad_n=None, breakpoints=None,
                    tol: float = NEWTON_TOL) -> Table1D:
    """Build the uniaxial eta(mu) table on ``mu in [0, 2]``.

    Global: one series of degree 160 from 200 nodes.  Piecewise: eleven
    intervals split at ``mu = 2/3`` into oblate and prolate parts, degree 18.
    """
    if variant == "global":
        breakpoints = (0.0, 2.0) if breakpoints is None else tuple(breakpoints)
        degrees = GLOBAL_DEGREE if degrees is None else degrees
        quad_n = GLOBAL_QUAD_N if quad_n is None else quad_n
    elif variant == "piecewise":
        breakpoints = PIECEWISE_BREAKPOINTS if breakpoints is None else tuple(breakpoints)
        degrees = PIECEWISE_DEGREE if degrees is None else degrees
        quad_n = PIECEWISE_QUAD_N if quad_n is None else quad_n
    else:
        raise ValueError(f"unknown variant {variant!r}")
    npieces = len(breakpoints) - 1
    degrees = (int(degrees),) * npieces if np.ndim(degrees) == 0 else tuple(degrees)
    quads = (int(quad_n),) * npieces if np.ndim(quad_n) == 0 else tuple(quad_n)
    meta = {"newton_tol": tol, "precision": "double-double accumulation"}
    return build_table1d("sphere_uniaxial", variant, breakpoints, degrees, quads, partial(_eta_samples, tol=tol),
                         {0.0: 0.0, 2.0: 4.0}, meta)


def eval_eta_uni(table: Table1D, mu):
    if table.domain != "sphere_uniaxial":
        raise ValueError(f"expected a uniaxial table, got domain {table.domain!r}")
    return eval_table1d(table, mu)


def uniaxial_pairs(mu, eta, axis):
    """Diagonal-frame ``q_aabb`` matrix for symmetry axis ``axis`` (0, 1 or 2)."""
    mu = np.asarray(mu, dtype=float)
    eta = np.asarray(eta, dtype=float)
    axis = np.broadcast_to(np.asarray(axis), mu.shape)
    q_aa = eta / 4.0
    q_ab = mu / 4.0 - eta / 8.0
    q_bb = 0.375 * (1.0 - mu) + 0.09375 * eta
    P = np.empty(mu.shape + (3, 3))
    for i in range(3):
        for j in range(3):
            on_i, on_j = axis == i, axis == j
            P[..., i, j] = np.where(on_i & on_j, q_aa,
                                    np.where(on_i | on_j, q_ab,
                                             np.where(i == j, q_bb, q_bb / 3.0)))
    return P


def close_3d_uniaxial(M_hat, table: Table1D, sanitize_input: bool = True) -> np.ndarray:
    """Fourth moments (15 unique components) of a uniaxial second moment.

    The eigenvalue that differs from the other two marks the symmetry axis,
    with ``m_axis = mu/2``.

    Raises
    ------
    NotUniaxialError
        If no two eigenvalues agree within 1e-10.
    """
    M = np.asarray(M_hat, dtype=float)
    if M.shape[-2:] != (3, 3):
        raise DomainError(f"expected 3x3 second moments, got shape {M.shape}")
    if sanitize_input:
        M = sanitize(M)
    w, U = eig_sym3(M)
    low_pair = w[..., 1] - w[..., 0] <= MULTIPLICITY_TOL
    high_pair = w[..., 2] - w[..., 1] <= MULTIPLICITY_TOL
    if not np.all(low_pair | high_pair):
        raise NotUniaxialError("second moment has three distinct eigenvalues; use the biaxial closure")
    # equal low pair: axis is the largest eigenvector; otherwise the smallest
    axis = np.where(low_pair, 2, 0)
    m_axis = np.where(low_pair, w[..., 2], w[..., 0])
    mu = np.clip(2.0 * m_axis, 0.0, 2.0)
    eta = eval_eta_uni(table, mu)
    return rotate4_diagonal(uniaxial_pairs(mu, eta, axis), U)
