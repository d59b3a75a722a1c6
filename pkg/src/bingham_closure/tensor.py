"""Symmetric eigendecompositions, fourth-order tensor rotation and moment containers.

Conventions
-----------
* The columns of ``U`` are eigenvectors, so ``U.T @ M_hat @ U`` is diagonal and
  ``M_hat = U @ diag(m) @ U.T``.
* A fourth-order moment is stored by its unique components under full index
  symmetry, in lexicographic multiset order (see ``UNIQUE_2D``/``UNIQUE_3D``).

All functions accept a single tensor or a stack (leading batch axes).
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, DomainError

__all__ = [
    "UNIQUE_2D",
    "UNIQUE_3D",
    "eig_sym2",
    "eig_sym3",
    "sanitize",
    "full4",
    "unique4",
    "rotate4",
    "rotate4_diagonal",
    "second_from_unique",
    "second_to_unique",
    "contract2",
]

SANITIZE_TOL = 1e-12
_JACOBI_THRESHOLD = 1e-15
_JACOBI_MAX_SWEEPS = 15


def _multisets(d: int) -> tuple[tuple[int, int, int, int], ...]:
    return tuple(itertools.combinations_with_replacement(range(d), 4))


UNIQUE_2D = _multisets(2)  # 1111, 1112, 1122, 1222, 2222
UNIQUE_3D = _multisets(3)  # 15 entries, 1111 ... 3333


def _label(ix) -> str:
    return "q" + "".join(str(i + 1) for i in ix)


UNIQUE_2D_LABELS = tuple(_label(ix) for ix in UNIQUE_2D)
UNIQUE_3D_LABELS = tuple(_label(ix) for ix in UNIQUE_3D)


def _unique_index(d: int) -> np.ndarray:
    # position of every (i,j,k,l) in the unique list
    table = {ix: n for n, ix in enumerate(_multisets(d))}
    idx = np.empty((d,) * 4, dtype=int)
    for ijkl in itertools.product(range(d), repeat=4):
        idx[ijkl] = table[tuple(sorted(ijkl))]
    return idx


_INDEX = {2: _unique_index(2), 3: _unique_index(3)}
_NUNIQUE = {5: 2, 15: 3}


def full4(q) -> np.ndarray:
    """Expand unique components (..., 5) or (..., 15) to the full (..., d, d, d, d) tensor."""
    q = np.asarray(q, dtype=float)
    d = _NUNIQUE.get(q.shape[-1])
    if d is None:
        raise ValueError(f"expected 5 or 15 unique components, got {q.shape[-1]}")
    return q[..., _INDEX[d]]


def unique4(t) -> np.ndarray:
    """Extract unique components from a full (..., d, d, d, d) tensor.

    Each component is the average over its index permutations, so a tensor
    that is symmetric up to rounding is symmetrised on the way.
    """
    t = np.asarray(t, dtype=float)
    d = t.shape[-1]
    flat = t.reshape(t.shape[:-4] + (d**4,))
    return flat @ _SCATTER[d]


def _scatter_matrix(d: int) -> np.ndarray:
    idx = _INDEX[d].ravel()
    n = len(_multisets(d))
    s = np.zeros((d**4, n))
    s[np.arange(d**4), idx] = 1.0
    return s / s.sum(axis=0)


_SCATTER = {2: _scatter_matrix(2), 3: _scatter_matrix(3)}


def second_from_unique(m) -> np.ndarray:
    """Build full symmetric matrices from unique components.

    2D rows are ``(m11, m12)`` with ``m22 = 1 - m11``; 3D rows are
    ``(m11, m22, m33, m12, m13, m23)``.
    """
    m = np.asarray(m, dtype=float)
    if m.shape[-1] == 2:
        out = np.empty(m.shape[:-1] + (2, 2))
        out[..., 0, 0] = m[..., 0]
        out[..., 1, 1] = 1.0 - m[..., 0]
        out[..., 0, 1] = out[..., 1, 0] = m[..., 1]
        return out
    if m.shape[-1] == 6:
        out = np.empty(m.shape[:-1] + (3, 3))
        for n, (i, j) in enumerate(((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))):
            out[..., i, j] = out[..., j, i] = m[..., n]
        return out
    raise ValueError(f"expected 2 or 6 second-moment components, got {m.shape[-1]}")


def second_to_unique(M) -> np.ndarray:
    """Inverse of :func:`second_from_unique`."""
    M = np.asarray(M, dtype=float)
    if M.shape[-2:] == (2, 2):
        return np.stack([M[..., 0, 0], 0.5 * (M[..., 0, 1] + M[..., 1, 0])], axis=-1)
    if M.shape[-2:] == (3, 3):
        pairs = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
        return np.stack([0.5 * (M[..., i, j] + M[..., j, i]) for i, j in pairs], axis=-1)
    raise ValueError(f"expected 2x2 or 3x3 matrices, got shape {M.shape}")


def contract2(q) -> np.ndarray:
    """``sum_k Q_ijkk`` as a full matrix, from unique components."""
    t = full4(q)
    return np.einsum("...ijkk->...ij", t)


# -- eigendecomposition -------------------------------------------------------


def eig_sym2(M_hat):
    """Closed-form eigensystem of a trace-one symmetric 2x2 matrix.

    Returns ``(lam, U)`` with ``lam[..., 0] >= lam[..., 1]`` and the
    eigenvectors in the columns of ``U``.  For ``b = m12 != 0`` the columns are
    ``(b, lam_i - a)`` normalised; for ``b = 0`` ``U`` is the identity
    (``a >= 1/2``) or the swap matrix (``a < 1/2``).
    """
    M_hat = np.asarray(M_hat, dtype=float)
    a = M_hat[..., 0, 0]
    b = 0.5 * (M_hat[..., 0, 1] + M_hat[..., 1, 0])
    c = 1.0 - 2.0 * a
    r = np.hypot(c, 2.0 * b)
    lam1 = 0.5 * (1.0 + r)
    lam2 = 0.5 * (1.0 - r)
    # lam1 - a = (c + r)/2 and lam2 - a = (c - r)/2, each in its cancellation-free form
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = np.where(c >= 0, 0.5 * (c + r), 2.0 * b * b / (r - c))
        d2 = np.where(c <= 0, 0.5 * (c - r), -2.0 * b * b / (c + r))
    n1 = np.hypot(b, d1)
    n2 = np.hypot(b, d2)
    U = np.empty(M_hat.shape)
    nz = b != 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        U[..., 0, 0] = np.where(nz, b / n1, np.where(a >= 0.5, 1.0, 0.0))
        U[..., 1, 0] = np.where(nz, d1 / n1, np.where(a >= 0.5, 0.0, 1.0))
        U[..., 0, 1] = np.where(nz, b / n2, np.where(a >= 0.5, 0.0, 1.0))
        U[..., 1, 1] = np.where(nz, d2 / n2, np.where(a >= 0.5, 1.0, 0.0))
    return np.stack([lam1, lam2], axis=-1), U


def eig_sym3(M_hat):
    """Eigensystem of symmetric 3x3 matrices by cyclic Jacobi sweeps.

    Eigenvalues are returned ascending.  Columns of ``U`` are eigenvectors;
    the first two have their largest-magnitude entry made positive and the
    third is their cross product, so ``det(U) = +1``.
    """
    A = np.array(M_hat, dtype=float)
    single = A.ndim == 2
    A = A.reshape(-1, 3, 3)
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    V = np.broadcast_to(np.eye(3), A.shape).copy()
    scale = np.maximum(np.abs(A).max(axis=(1, 2)), np.finfo(float).tiny)
    if A.shape[0] <= _SCALAR_BATCH:
        A, V = _jacobi_scalar(A, V, scale)
    else:
        A, V = _jacobi_batched(A, V, scale)
    return _order_eigen(A, V, scale, M_hat, single)


_SCALAR_BATCH = 4


def _jacobi_scalar(A, V, scale):
    # same sweeps as the batched version, in plain floats (no per-op numpy overhead)
    for n in range(A.shape[0]):
        a = A[n].tolist()
        v = V[n].tolist()
        for _ in range(_JACOBI_MAX_SWEEPS):
            off = math.sqrt(a[0][1] ** 2 + a[0][2] ** 2 + a[1][2] ** 2)
            if off <= _JACOBI_THRESHOLD * scale[n]:
                break
            for p, q in ((0, 1), (0, 2), (1, 2)):
                apq = a[p][q]
                if apq == 0.0:
                    continue
                theta = (a[q][q] - a[p][p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0)) if theta != 0.0 else 1.0
                cs = 1.0 / math.sqrt(t * t + 1.0)
                sn = t * cs
                for row in a:
                    rp, rq = row[p], row[q]
                    row[p], row[q] = cs * rp - sn * rq, sn * rp + cs * rq
                rp, rq = a[p], a[q]
                a[p] = [cs * x - sn * y for x, y in zip(rp, rq)]
                a[q] = [sn * x + cs * y for x, y in zip(rp, rq)]
                a[p][q] = a[q][p] = 0.0
                for row in v:
                    rp, rq = row[p], row[q]
                    row[p], row[q] = cs * rp - sn * rq, sn * rp + cs * rq
        else:
            off = math.sqrt(a[0][1] ** 2 + a[0][2] ** 2 + a[1][2] ** 2)
            if off > 1e-13 * scale[n]:
                raise ConvergenceError("Jacobi sweeps did not converge")
        A[n] = a
        V[n] = v
    return A, V


def _jacobi_batched(A, V, scale):
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = np.sqrt(A[:, 0, 1] ** 2 + A[:, 0, 2] ** 2 + A[:, 1, 2] ** 2)
        if np.all(off <= _JACOBI_THRESHOLD * scale):
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = A[:, p, q]
            active = np.abs(apq) > 0.0
            if not np.any(active):
                continue
            app = A[:, p, p]
            aqq = A[:, q, q]
            with np.errstate(divide="ignore", invalid="ignore"):
                theta = np.where(active, (aqq - app) / (2.0 * apq), 0.0)
                t = np.where(active, np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0)
            t = np.where(active & (theta == 0.0), 1.0, t)
            cs = 1.0 / np.sqrt(t * t + 1.0)
            sn = t * cs
            c_, s_ = cs[:, None], sn[:, None]
            # A <- G^T A G and V <- V G for the Givens rotation in the (p, q) plane
            ap, aq = A[:, :, p].copy(), A[:, :, q].copy()
            A[:, :, p] = c_ * ap - s_ * aq
            A[:, :, q] = s_ * ap + c_ * aq
            ap, aq = A[:, p, :].copy(), A[:, q, :].copy()
            A[:, p, :] = c_ * ap - s_ * aq
            A[:, q, :] = s_ * ap + c_ * aq
            vp, vq = V[:, :, p].copy(), V[:, :, q].copy()
            V[:, :, p] = c_ * vp - s_ * vq
            V[:, :, q] = s_ * vp + c_ * vq
            A[:, p, q] = A[:, q, p] = 0.0
    else:
        off = np.sqrt(A[:, 0, 1] ** 2 + A[:, 0, 2] ** 2 + A[:, 1, 2] ** 2)
        if np.any(off > 1e-13 * scale):
            raise ConvergenceError("Jacobi sweeps did not converge")
    return A, V


def _order_eigen(A, V, scale, M_hat, single):
    w = np.diagonal(A, axis1=1, axis2=2).copy()
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    V = np.take_along_axis(V, order[:, None, :], axis=2)
    # ties: order columns by the position of their largest-magnitude entry
    tie_tol = 1e-15 * scale
    for _ in range(2):
        for i in (0, 1):
            lead = np.abs(V).argmax(axis=1)
            swap = (w[:, i + 1] - w[:, i] <= tie_tol) & (lead[:, i] > lead[:, i + 1])
            if np.any(swap):
                V[swap, :, i], V[swap, :, i + 1] = V[swap, :, i + 1].copy(), V[swap, :, i].copy()
    for col in (0, 1):
        v = V[:, :, col]
        big = np.take_along_axis(v, np.abs(v).argmax(axis=1)[:, None], axis=1)
        V[:, :, col] = v * np.where(big < 0, -1.0, 1.0)
    V[:, :, 2] = np.cross(V[:, :, 0], V[:, :, 1])
    if single:
        return w[0], V[0]
    return w.reshape(np.shape(M_hat)[:-2] + (3,)), V.reshape(np.shape(M_hat))


# -- rotation ------------------------------------------------------------------


def rotate4(q, U) -> np.ndarray:
    """Rotate a fully symmetric fourth-order tensor: ``q'_ijkl = U_ia U_jb U_kc U_ld q_abcd``.

    ``q`` is given and returned as unique components.
    """
    t = full4(q)
    U = np.asarray(U, dtype=float)
    out = np.einsum("...ia,...jb,...kc,...ld,...abcd->...ijkl", U, U, U, U, t, optimize=True)
    return unique4(out)


def rotate4_diagonal(pairs, U) -> np.ndarray:
    """Rotate a tensor whose only nonzero entries have every index repeated evenly.

    ``pairs[..., a, b]`` holds ``q_aabb`` (with ``pairs[..., a, a] = q_aaaa``).
    Writing ``E_a = u_a u_a^T`` for the columns of ``U``,
    ``Q = sum_ab P_ab (E_a (x) E_b)`` symmetrised, with ``P_aa = q_aaaa/3`` and
    ``P_ab = q_aabb``.  Works on unique components directly, which is much
    cheaper than the generic rotation.
    """
    pairs = np.asarray(pairs, dtype=float)
    U = np.asarray(U, dtype=float)
    d = pairs.shape[-1]
    batch = pairs.shape[:-2]
    P = pairs.reshape(-1, d, d).copy()
    diag = np.arange(d)
    P[:, diag, diag] /= 3.0
    Uf = U.reshape(-1, d, d)
    I, J, K, L = _pair_index(d)
    m = len(_multisets(d))
    out = np.empty((P.shape[0], m))
    for a in range(0, P.shape[0], _ROT_CHUNK):
        u, pp = Uf[a:a + _ROT_CHUNK], P[a:a + _ROT_CHUNK]
        # the three pairings (ij|kl), (ik|jl), (il|jk) for every unique component
        ea = u[:, I, :] * u[:, J, :]
        eb = u[:, K, :] * u[:, L, :]
        s = np.einsum("nma,nab,nmb->nm", ea, pp, eb)
        out[a:a + _ROT_CHUNK] = s.reshape(-1, m, 3).sum(axis=2)
    return out.reshape(batch + (m,))


_ROT_CHUNK = 1 << 14


@lru_cache(maxsize=None)
def _pair_index(d: int):
    I, J, K, L = [], [], [], []
    for i, j, k, l in _multisets(d):
        for a, b, c, e in ((i, j, k, l), (i, k, j, l), (i, l, j, k)):
            I.append(a)
            J.append(b)
            K.append(c)
            L.append(e)
    return tuple(np.array(v) for v in (I, J, K, L))


# -- sanitation ------------------------------------------------------------------


def sanitize(M, tol: float = SANITIZE_TOL) -> np.ndarray:
    """Project a (stack of) second-moment matrix onto symmetric, trace-one, PSD.

    Symmetrises, rescales the trace to one and, only where an eigenvalue lies
    outside ``[0, 1]`` by more than ``tol``, clips the spectrum and
    renormalises.

    Raises
    ------
    DomainError
        For non-finite input or a non-positive trace.
    """
    M = np.array(M, dtype=float)
    if M.shape[-1] not in (2, 3) or M.shape[-2] != M.shape[-1]:
        raise DomainError(f"expected 2x2 or 3x3 matrices, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DomainError("second moment contains non-finite entries")
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    tr = np.trace(M, axis1=-2, axis2=-1)
    if np.any(tr <= 0.0):
        raise DomainError("second moment must have positive trace")
    M = M / tr[..., None, None]
    w, V = np.linalg.eigh(M)
    bad = np.any((w < -tol) | (w > 1.0 + tol), axis=-1)
    if np.any(bad):
        wc = np.clip(w, 0.0, 1.0)
        wc = wc / wc.sum(axis=-1, keepdims=True)
        fixed = np.einsum("...ia,...a,...ja->...ij", V, wc, V)
        M = np.where(bad[..., None, None], fixed, M)
    return M
