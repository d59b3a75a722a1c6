r"""Bingham closure on the unit circle.

The density is :math:`f_\lambda(\theta) \propto \exp(\lambda\cos 2\theta)`
with :math:`\lambda \ge 0`, so that in the diagonal frame
:math:`\mu = m_{11} - m_{22} = I_1/I_0 \ge 0` and
:math:`\eta = \langle\cos^2 2\theta\rangle = (1 + I_2/I_0)/2`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache, partial

import numpy as np

from .errors import ConvergenceError, DomainError
from .piecewise import Table1D, build_table1d, eval_table1d
from .specfun import bessel_i_scaled_all, bessel_i_scaled_array
from .tensor import eig_sym2, rotate4_diagonal, sanitize

__all__ = [
    "CircleState",
    "forward_moments",
    "invert_mu",
    "build_table",
    "eval_eta",
    "close_2d",
    "oracle_moments_2d",
    "diagonal_moments_2d",
    "PIECEWISE_BREAKPOINTS",
    "PIECEWISE_DEGREES",
]

LAMBDA_CAP = 1e6
MU_MAX = 1.0 - 1e-12
NEWTON_TOL = 1e-15
MAX_NEWTON = 100

PIECEWISE_BREAKPOINTS = (0.0, 0.5, 0.73, 0.84, 0.91, 0.96, 1.0)
PIECEWISE_DEGREES = (19, 19, 18, 18, 18, 18)
GLOBAL_DEGREE = 150
GLOBAL_QUAD_N = 200
PIECEWISE_QUAD_N = 48


@dataclass(frozen=True)
class CircleState:
    """Bingham parameter and the two moment functions it generates."""

    lam: float
    mu: float
    eta: float

    @property
    def dmu(self) -> float:
        """``d mu / d lambda = eta - mu**2``."""
        return self.eta - self.mu * self.mu


def _state_ext(lam: float):
    i0, i1, i2 = bessel_i_scaled_all(lam)
    mu = i1 / i0
    eta = (i2 / i0 + 1.0) * 0.5
    return mu, eta


def forward_moments(lam: float) -> CircleState:
    """``mu`` and ``eta`` at Bingham parameter ``lam`` from scaled Bessel ratios.

    Raises
    ------
    DomainError
        If ``lam`` is negative or not finite.  (Negative parameters are the
        same distribution with the axes swapped.)
    """
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0.0:
        raise DomainError(f"lambda must be finite and >= 0, got {lam!r}")
    mu, eta = _state_ext(lam)
    return CircleState(lam, float(mu), float(eta))


@lru_cache(maxsize=1)
def _mu_init_table() -> tuple[np.ndarray, np.ndarray]:
    lam = np.concatenate([[0.0], np.geomspace(1e-4, LAMBDA_CAP, 2048)])
    mu = bessel_i_scaled_array(1, lam) / bessel_i_scaled_array(0, lam)
    mu = np.maximum.accumulate(mu)
    return lam, mu


def invert_mu(mu_target: float, tol: float = NEWTON_TOL, full_output: bool = False):
    """Bingham parameter with ``mu(lam) = mu_target``.

    Newton's method ``lam += (mu* - mu)/(eta - mu^2)``, started from the
    tabulated ``(lam_i, mu_i)`` with the largest ``mu_i <= mu_target``.
    Because ``mu`` is concave in ``lam``, iterates approach from below; a
    bracket with bisection guards against steps that overshoot.

    Returns ``lam`` or, with ``full_output``, ``(lam, iterations)``.

    Raises
    ------
    DomainError
        For ``mu_target`` outside ``[0, 1 - 1e-12]``.
    ConvergenceError
        If ``mu_target`` needs ``lam`` beyond the cap (``1e6``, where
        ``mu = 1 - 5e-7``) or 100 iterations do not reach ``tol``.
    """
    t = float(mu_target)
    if not (0.0 <= t <= MU_MAX):
        raise DomainError(f"mu target must lie in [0, {MU_MAX}], got {t!r}")
    if t == 0.0:
        return (0.0, 0) if full_output else 0.0
    lam_tab, mu_tab = _mu_init_table()
    if t > mu_tab[-1]:
        raise ConvergenceError(f"mu={t!r} exceeds mu at the lambda cap {LAMBDA_CAP:g} ({mu_tab[-1]!r})")
    i = int(np.searchsorted(mu_tab, t, side="right")) - 1
    lo = float(lam_tab[max(i, 0)])
    hi = float(lam_tab[i + 1]) if i + 1 < len(lam_tab) else LAMBDA_CAP
    lam = lo
    for it in range(MAX_NEWTON + 1):
        mu, eta = _state_ext(lam)
        r = float(t - mu)
        if abs(r) <= tol:
            return (lam, it) if full_output else lam
        if r > 0:
            lo = max(lo, lam)
        else:
            hi = min(hi, lam)
        slope = float(eta - mu * mu)
        step = r / slope if slope > 0 else math.inf
        new = lam + step
        if not (lo < new < hi) or new == lam:
            if new == lam or hi - lo <= 4 * np.finfo(float).eps * hi:
                # parameter resolution exhausted
                if abs(r) <= 8 * tol:
                    return (lam, it) if full_output else lam
            new = 0.5 * (lo + hi)
        lam = new
    raise ConvergenceError(f"Newton inversion for mu={t!r} did not converge in {MAX_NEWTON} iterations")


def _eta_samples(mu: np.ndarray, tol: float = NEWTON_TOL):
    eta = np.empty_like(mu)
    iters = []
    for j, m in enumerate(mu):
        try:
            lam, it = invert_mu(float(m), tol=tol, full_output=True)
        except ConvergenceError as exc:
            raise ConvergenceError(f"node {j} (mu={m!r}): {exc}") from exc
        eta[j] = forward_moments(lam).eta
        iters.append(it)
    return eta, {"newton_iterations_max": max(iters), "newton_iterations": iters}


def build_table(variant: str = "global", degrees=None, quad_n=None, breakpoints=None,
                tol: float = NEWTON_TOL) -> Table1D:
    """Build the eta(mu) table.

    ``variant="global"`` uses one series on ``[0, 1]`` (default degree 150,
    200 nodes); ``"piecewise"`` uses the six intervals of the reference
    partition with degrees (19, 19, 18, 18, 18, 18).
    """
    if variant == "global":
        breakpoints = (0.0, 1.0) if breakpoints is None else tuple(breakpoints)
        degrees = (GLOBAL_DEGREE,) if degrees is None else degrees
        quad_n = GLOBAL_QUAD_N if quad_n is None else quad_n
    elif variant == "piecewise":
        breakpoints = PIECEWISE_BREAKPOINTS if breakpoints is None else tuple(breakpoints)
        degrees = PIECEWISE_DEGREES if degrees is None else degrees
        quad_n = PIECEWISE_QUAD_N if quad_n is None else quad_n
    else:
        raise ValueError(f"unknown variant {variant!r}")
    npieces = len(breakpoints) - 1
    if np.ndim(degrees) == 0:
        degrees = (int(degrees),) * npieces
    quads = (int(quad_n),) * npieces if np.ndim(quad_n) == 0 else tuple(quad_n)
    meta = {"newton_tol": tol, "precision": "double-double accumulation"}
    return build_table1d("circle", variant, breakpoints, degrees, quads, partial(_eta_samples, tol=tol),
                         {1.0: 1.0}, meta)


def eval_eta(table: Table1D, mu):
    """eta(mu) from a circle table; ``mu = 1`` gives exactly 1."""
    if table.domain != "circle":
        raise ValueError(f"expected a circle table, got domain {table.domain!r}")
    return eval_table1d(table, mu)


def diagonal_moments_2d(mu, eta):
    """``(q1111, q1122, q2222)`` in the diagonal frame from ``mu`` and ``eta``."""
    mu = np.asarray(mu, dtype=float)
    eta = np.asarray(eta, dtype=float)
    q4 = (1.0 + 2.0 * mu + eta) / 4.0
    q2 = (1.0 - eta) / 4.0
    q0 = (1.0 - 2.0 * mu + eta) / 4.0
    return q4, q2, q0


def close_2d(M_hat, table: Table1D, sanitize_input: bool = True) -> np.ndarray:
    """Fourth moments (unique components ``q1111, q1112, q1122, q1222, q2222``).

    Accepts one 2x2 matrix or a stack of them.
    """
    M = np.asarray(M_hat, dtype=float)
    if M.shape[-2:] != (2, 2):
        raise DomainError(f"expected 2x2 second moments, got shape {M.shape}")
    if sanitize_input:
        M = sanitize(M)
    lam, U = eig_sym2(M)
    mu = np.clip(lam[..., 0] - lam[..., 1], 0.0, 1.0)
    eta = eval_eta(table, mu)
    q4, q2, q0 = diagonal_moments_2d(mu, eta)
    P = np.empty(M.shape)
    P[..., 0, 0] = q4
    P[..., 0, 1] = P[..., 1, 0] = q2
    P[..., 1, 1] = q0
    return rotate4_diagonal(P, U)


ORACLE_POINTS = 4096


def oracle_moments_2d(lam: float, n: int = ORACLE_POINTS):
    """Moments of ``exp(lam cos 2 theta)`` by the periodic trapezoid rule.

    Returns ``(mu, eta, q)`` where ``q`` holds the five unique fourth moments
    in the frame where the density is diagonal.  Independent of the Bessel
    path; accurate to about 1e-13 for ``lam <= 500``.
    """
    lam = float(lam)
    if lam < 0 or not math.isfinite(lam):
        raise DomainError(f"lambda must be finite and >= 0, got {lam!r}")
    if lam > 500:
        warnings.warn("oracle_moments_2d: accuracy not guaranteed for lambda > 500", stacklevel=2)
    theta = 2.0 * np.pi * np.arange(n) / n
    c, s = np.cos(theta), np.sin(theta)
    w = np.exp(lam * (np.cos(2.0 * theta) - 1.0))
    z = w.sum()
    mean = lambda f: float(np.dot(w, f) / z)  # noqa: E731
    m11, m22 = mean(c * c), mean(s * s)
    eta = mean(np.cos(2.0 * theta) ** 2)
    q = np.array([mean(c**4), mean(c**3 * s), mean(c * c * s * s), mean(c * s**3), mean(s**4)])
    return m11 - m22, eta, q
