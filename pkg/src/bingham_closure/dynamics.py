r"""Homogeneous second-moment dynamics of rigid rods closed with the Bingham closure.

.. math::
   \dot M = \frac{1}{De}\Big[-6\big(M - \tfrac{I}{3}\big)
            + 4U_0\,(M\cdot M - M:Q)\Big] + \kappa M + M\kappa^T - c\,\kappa:Q,

with :math:`(A:Q)_{ij} = \sum_{kl} A_{kl} Q_{ijkl}` and ``Q`` the closed
fourth moment of ``M`` (scaled by ``tr M`` so the contraction identity holds
off the unit-trace set).  ``c = 1`` reproduces the literal form
(``flow_variant="paper"``); ``c = 2`` keeps ``tr M`` constant
(``flow_variant="trace-preserving"``, the default).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .biaxial import BiaxialTable, close_3d
from .errors import ConvergenceError, DomainError
from .tensor import full4, sanitize

__all__ = ["FlowParams", "Trajectory", "FLOW_VARIANTS", "make_closure", "rhs", "integrate",
           "scalar_order_parameter", "TRAJECTORY_COLUMNS"]

FLOW_VARIANTS = {"paper": 1.0, "trace-preserving": 2.0}
BLOWUP_BOUNDS = (-0.05, 1.05)
TRAJECTORY_COLUMNS = ("t", "m11", "m22", "m33", "m12", "m13", "m23", "S", "trace_drift")
_IDENT3 = np.eye(3) / 3.0


@dataclass(frozen=True)
class FlowParams:
    """Deborah number ``De > 0``, potential strength ``U0 >= 0`` and velocity gradient ``kappa``."""

    De: float
    U0: float = 0.0
    kappa: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        De, U0 = float(self.De), float(self.U0)
        if not (math.isfinite(De) and De > 0):
            raise DomainError(f"De must be positive, got {self.De!r}")
        if not (math.isfinite(U0) and U0 >= 0):
            raise DomainError(f"U0 must be non-negative, got {self.U0!r}")
        k = np.array(self.kappa, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(k)):
            raise DomainError("kappa must be finite")
        k.flags.writeable = False
        object.__setattr__(self, "De", De)
        object.__setattr__(self, "U0", U0)
        object.__setattr__(self, "kappa", k)


def make_closure(closure) -> Callable[[np.ndarray], np.ndarray]:
    """Turn a biaxial table (or any ``M -> Q`` callable) into a closure function."""
    if isinstance(closure, BiaxialTable):
        table = closure
        return lambda M: close_3d(M, table)
    if callable(closure):
        return closure
    raise TypeError("closure must be a biaxial table or a callable returning 15 unique components")


def _double_dot(T: np.ndarray, A: np.ndarray) -> np.ndarray:
    return np.einsum("ijkl,kl->ij", T, A)


def rhs(M, p: FlowParams, closure, flow_variant: str = "trace-preserving") -> np.ndarray:
    """``dM/dt`` at second moment ``M`` (3x3)."""
    try:
        c = FLOW_VARIANTS[flow_variant]
    except KeyError:
        raise ValueError(f"flow_variant must be one of {sorted(FLOW_VARIANTS)}, got {flow_variant!r}") from None
    M = np.asarray(M, dtype=float)
    closure = make_closure(closure)
    # extend the closure by homogeneity, Q(M) = tr(M) Q(M / tr M), so that
    # sum_k Q_ijkk = M_ij holds even when the trace has drifted
    tau = float(np.trace(M))
    if not tau > 0:
        raise DomainError(f"second moment must have positive trace, got {tau!r}")
    T = tau * full4(closure(M / tau))
    k = p.kappa
    diffusion = -6.0 * (M - _IDENT3) + 4.0 * p.U0 * (M @ M - _double_dot(T, M))
    out = diffusion / p.De + k @ M + M @ k.T - c * _double_dot(T, k)
    return 0.5 * (out + out.T)


def scalar_order_parameter(M) -> float:
    """``S = (3/2)(lambda_max(M) - 1/3)``."""
    return 1.5 * (float(np.linalg.eigvalsh(np.asarray(M, dtype=float))[-1]) - 1.0 / 3.0)


@dataclass
class Trajectory:
    """Sampled states with per-sample diagnostics."""

    t: np.ndarray
    M: np.ndarray
    trace_drift: np.ndarray
    lambda_max: np.ndarray
    flow_variant: str = "trace-preserving"

    @property
    def S(self) -> np.ndarray:
        return 1.5 * (self.lambda_max - 1.0 / 3.0)

    @property
    def final(self) -> np.ndarray:
        return self.M[-1]

    def rows(self):
        """CSV rows in :data:`TRAJECTORY_COLUMNS` order."""
        idx = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
        for t, M, s, d in zip(self.t, self.M, self.S, self.trace_drift):
            yield [float(t)] + [float(M[i, j]) for i, j in idx] + [float(s), float(d)]

    def to_csv(self, path_or_file) -> None:
        if hasattr(path_or_file, "write"):
            self._write(path_or_file)
        else:
            with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
                self._write(fh)

    def _write(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for row in self.rows():
            w.writerow([repr(v) for v in row])


def integrate(M0, p: FlowParams, closure, dt: float, t_end: float,
              flow_variant: str = "trace-preserving", project: bool = True,
              record_every: int = 1) -> Trajectory:
    """Classical fourth-order Runge-Kutta with a fixed step.

    ``M0`` is sanitized once.  With ``project`` each new state is
    symmetrized, rescaled to unit trace and eigen-clipped; without it the
    state evolves untouched, which exposes the raw trace drift.

    Raises
    ------
    ConvergenceError
        If an eigenvalue leaves ``[-0.05, 1.05]`` before projection.
    """
    dt, t_end = float(dt), float(t_end)
    if not (dt > 0 and math.isfinite(dt)):
        raise DomainError(f"dt must be positive, got {dt!r}")
    if not (t_end >= 0 and math.isfinite(t_end)):
        raise DomainError(f"t_end must be non-negative, got {t_end!r}")
    if flow_variant not in FLOW_VARIANTS:
        raise ValueError(f"flow_variant must be one of {sorted(FLOW_VARIANTS)}, got {flow_variant!r}")
    record_every = max(1, int(record_every))
    f = make_closure(closure)
    nsteps = int(round(t_end / dt))
    M = sanitize(np.asarray(M0, dtype=float).reshape(3, 3))
    ts, Ms, drift, lmax = [], [], [], []

    def record(k, M):
        ts.append(k * dt)
        Ms.append(M.copy())
        drift.append(float(np.trace(M)) - 1.0)
        lmax.append(float(np.linalg.eigvalsh(M)[-1]))

    def F(X):
        return rhs(X, p, f, flow_variant)

    record(0, M)
    for k in range(1, nsteps + 1):
        k1 = F(M)
        k2 = F(M + 0.5 * dt * k1)
        k3 = F(M + 0.5 * dt * k2)
        k4 = F(M + dt * k3)
        M = M + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        w = np.linalg.eigvalsh(0.5 * (M + M.T))
        if not np.all(np.isfinite(w)) or w[0] < BLOWUP_BOUNDS[0] or w[-1] > BLOWUP_BOUNDS[1]:
            raise ConvergenceError(f"blow-up at step {k} (t={k * dt:g}): eigenvalues {w.tolist()}")
        if project:
            M = sanitize(M)
        if k % record_every == 0 or k == nsteps:
            record(k, M)
    return Trajectory(np.array(ts), np.array(Ms), np.array(drift), np.array(lmax), flow_variant)
