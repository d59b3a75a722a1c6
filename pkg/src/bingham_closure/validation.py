"""Oracle validation of closure tables.

Samples Bingham parameters (not moments), computes the exact second and
fourth moments by direct quadrature, applies a random rotation, and compares
the closure of the rotated second moment with the rotated oracle fourth
moment.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .biaxial import BiaxialTable, close_3d, oracle_moments_sphere
from .circle import close_2d, oracle_moments_2d
from .piecewise import Table1D
from .tensor import rotate4
from .uniaxial import close_3d_uniaxial

__all__ = ["ValidationReport", "random_rotation", "validate_table", "SAMPLING"]

# parameter ranges sampled uniformly for each domain
SAMPLING = {
    "circle": {"lam": (0.0, 100.0)},
    "sphere_uniaxial": {"lam": (-50.0, 50.0)},
    "sphere_biaxial": {"lam1": (0.0, 40.0), "min_gap": 1e-3},
}


@dataclass(frozen=True)
class ValidationReport:
    domain: str
    samples: int
    seed: int
    max_error: float
    mean_error: float
    worst_params: tuple

    def lines(self):
        yield f"domain: {self.domain}"
        yield f"samples: {self.samples}"
        yield f"seed: {self.seed}"
        yield f"max_abs_error: {self.max_error!r}"
        yield f"mean_abs_error: {self.mean_error!r}"
        yield "worst_params: " + " ".join(repr(float(v)) for v in self.worst_params)


def random_rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    """Haar-random proper rotation from the QR factorization of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def _circle_case(table, rng):
    lo, hi = SAMPLING["circle"]["lam"]
    lam = rng.uniform(lo, hi)
    mu, _, q = oracle_moments_2d(lam)
    U = random_rotation(rng, 2)
    M = U @ np.diag([(1.0 + mu) / 2.0, (1.0 - mu) / 2.0]) @ U.T
    return (lam,), close_2d(M, table), rotate4(q, U)


def _uniaxial_case(table, rng):
    lo, hi = SAMPLING["sphere_uniaxial"]["lam"]
    lam = rng.uniform(lo, hi)
    m, q = oracle_moments_sphere((0.0, 0.0, 2.0 * lam))
    m[0] = m[1] = 0.5 * (m[0] + m[1])
    U = random_rotation(rng, 3)
    M = U @ np.diag(m) @ U.T
    return (lam,), close_3d_uniaxial(M, table), rotate4(q, U)


def _biaxial_case(table, rng):
    lo, hi = SAMPLING["sphere_biaxial"]["lam1"]
    gap = SAMPLING["sphere_biaxial"]["min_gap"]
    while True:
        lam1 = rng.uniform(lo, hi)
        lam2 = rng.uniform(0.0, lam1)
        m, q = oracle_moments_sphere((lam1 + lam2, lam1 - lam2, 0.0))
        if np.min(np.diff(np.sort(m))) > gap:
            break
    U = random_rotation(rng, 3)
    M = U @ np.diag(m) @ U.T
    return (lam1, lam2), close_3d(M, table), rotate4(q, U)


def validate_table(table, samples: int = 1000, seed: int = 0, workers: int | None = None) -> ValidationReport:
    """Max and mean absolute fourth-moment error over random parameters.

    Every sample draws from its own generator spawned from ``seed``, so the
    report depends only on ``seed`` and ``samples``, not on ``workers``.
    """
    if isinstance(table, BiaxialTable):
        case = _biaxial_case
    elif isinstance(table, Table1D) and table.domain == "circle":
        case = _circle_case
    elif isinstance(table, Table1D) and table.domain == "sphere_uniaxial":
        case = _uniaxial_case
    else:
        raise TypeError(f"cannot validate {type(table).__name__}")
    samples = int(samples)
    if samples < 1:
        raise ValueError("samples must be at least 1")
    streams = np.random.SeedSequence(int(seed)).spawn(samples)

    def run(ss):
        p, q_closure, q_oracle = case(table, np.random.default_rng(ss))
        return p, float(np.max(np.abs(q_closure - q_oracle)))

    workers = workers or min(8, os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, streams))
    else:
        results = [run(ss) for ss in streams]
    errs = np.array([e for _, e in results])
    worst = int(np.argmax(errs))
    return ValidationReport(table.domain, samples, int(seed), float(errs.max()), float(errs.mean()),
                            tuple(float(v) for v in results[worst][0]))
