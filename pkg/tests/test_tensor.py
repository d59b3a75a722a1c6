import itertools

import numpy as np
import pytest

from bingham_closure.errors import DomainError
from bingham_closure.tensor import (
    UNIQUE_2D,
    UNIQUE_3D,
    contract2,
    eig_sym2,
    eig_sym3,
    full4,
    rotate4,
    rotate4_diagonal,
    sanitize,
    second_from_unique,
    second_to_unique,
    unique4,
)
from bingham_closure.validation import random_rotation


def random_moment(rng, d):
    U = random_rotation(rng, d)
    w = rng.dirichlet(np.ones(d))
    return U @ np.diag(w) @ U.T


def random_symmetric4(rng, d):
    return unique4(rng.standard_normal((d,) * 4))


def test_unique_layout_counts():
    assert len(UNIQUE_2D) == 5 and len(UNIQUE_3D) == 15
    assert UNIQUE_3D[0] == (0, 0, 0, 0) and UNIQUE_3D[-1] == (2, 2, 2, 2)


@pytest.mark.parametrize("d", [2, 3])
def test_full4_is_fully_symmetric(d):
    rng = np.random.default_rng(0)
    t = full4(random_symmetric4(rng, d))
    for perm in itertools.permutations(range(4)):
        np.testing.assert_array_equal(t, np.transpose(t, perm))
    np.testing.assert_allclose(unique4(full4(unique4(t))), unique4(t), rtol=3e-16, atol=0)


def test_second_moment_packing_round_trip():
    rng = np.random.default_rng(1)
    M = random_moment(rng, 3)
    M = 0.5 * (M + M.T)
    np.testing.assert_array_equal(second_from_unique(second_to_unique(M)), M)
    m2 = np.array([0.7, 0.1])
    np.testing.assert_allclose(second_from_unique(m2), [[0.7, 0.1], [0.1, 0.3]], rtol=2.3e-16, atol=0)


def test_eig2_examples():
    lam, U = eig_sym2(np.diag([0.7, 0.3]))
    np.testing.assert_allclose(lam, [0.7, 0.3], rtol=2.3e-16, atol=0)
    np.testing.assert_array_equal(U, np.eye(2))
    lam, _ = eig_sym2(np.full((2, 2), 0.5))
    np.testing.assert_allclose(lam, [1.0, 0.0], atol=1e-16)
    lam, U = eig_sym2(np.array([[0.6, 0.2], [0.2, 0.4]]))
    np.testing.assert_allclose(lam, [0.5 + np.sqrt(0.05), 0.5 - np.sqrt(0.05)], rtol=0, atol=1e-16)
    _, U = eig_sym2(np.diag([0.3, 0.7]))
    np.testing.assert_array_equal(U, [[0, 1], [1, 0]])


def test_eig2_reconstruction_batch():
    rng = np.random.default_rng(2)
    M = np.array([random_moment(rng, 2) for _ in range(500)])
    lam, U = eig_sym2(M)
    assert np.all(lam[:, 0] >= lam[:, 1])
    np.testing.assert_allclose(lam.sum(axis=1), 1.0, atol=1e-15)
    R = np.einsum("nij,nj,nkj->nik", U, lam, U)
    assert np.max(np.abs(R - M)) < 1e-15
    np.testing.assert_allclose(np.einsum("nji,njk->nik", U, U), np.broadcast_to(np.eye(2), M.shape), atol=1e-15)


def test_eig3_examples():
    lam, U = eig_sym3(np.eye(3) / 3)
    np.testing.assert_array_equal(lam, [1 / 3] * 3)
    np.testing.assert_array_equal(U, np.eye(3))
    lam, U = eig_sym3(np.diag([0.5, 0.2, 0.3]))
    np.testing.assert_array_equal(lam, [0.2, 0.3, 0.5])
    assert set(np.abs(U).ravel()) == {0.0, 1.0}
    assert np.linalg.det(U) == pytest.approx(1.0)


@pytest.mark.parametrize("batch", [1, 3, 200])
def test_eig3_reconstruction(batch):
    rng = np.random.default_rng(batch)
    M = np.array([random_moment(rng, 3) for _ in range(batch)])
    lam, U = eig_sym3(M)
    assert np.all(np.diff(lam, axis=1) >= 0)
    D = np.einsum("nji,njk,nkl->nil", U, M, U)
    off = D - np.einsum("ni,ij->nij", lam, np.eye(3))
    assert np.max(np.abs(off)) < 1e-14
    np.testing.assert_allclose(np.linalg.det(U), 1.0, atol=1e-14)
    np.testing.assert_allclose(np.einsum("nij,nj,nkj->nik", U, lam, U), M, atol=1e-14)


def test_eig3_scalar_and_batched_paths_agree():
    rng = np.random.default_rng(7)
    M = np.array([random_moment(rng, 3) for _ in range(10)])
    lam_b, U_b = eig_sym3(M)
    for k in range(10):
        lam_s, U_s = eig_sym3(M[k])
        np.testing.assert_allclose(lam_s, lam_b[k], atol=1e-15)
        np.testing.assert_allclose(U_s, U_b[k], atol=1e-14)


def test_eig3_repeated_eigenvalues_deterministic():
    U0 = random_rotation(np.random.default_rng(3), 3)
    M = U0 @ np.diag([0.25, 0.25, 0.5]) @ U0.T
    a = eig_sym3(M)
    b = eig_sym3(M.copy())
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


@pytest.mark.parametrize("d", [2, 3])
def test_rotate_identity_and_inverse(d):
    rng = np.random.default_rng(d)
    q = random_symmetric4(rng, d)
    np.testing.assert_allclose(rotate4(q, np.eye(d)), q, atol=1e-15)
    U = random_rotation(rng, d)
    np.testing.assert_allclose(rotate4(rotate4(q, U), U.T), q, atol=1e-13)


def test_rotate_90_degrees_2d():
    q = np.array([0.5, 0.0, 0.1, 0.0, 0.3])
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    r = rotate4(q, R)
    np.testing.assert_allclose(r, [0.3, 0.0, 0.1, 0.0, 0.5], atol=1e-16)


def test_rotate_contraction_identity():
    rng = np.random.default_rng(4)
    q = random_symmetric4(rng, 3)
    U = random_rotation(rng, 3)
    np.testing.assert_allclose(contract2(rotate4(q, U)), U @ contract2(q) @ U.T, atol=1e-14)


@pytest.mark.parametrize("d", [2, 3])
def test_rotate_diagonal_matches_generic(d):
    rng = np.random.default_rng(10 + d)
    n = 50
    P = rng.uniform(0, 1, (n, d, d))
    P = 0.5 * (P + np.swapaxes(P, 1, 2))
    U = np.array([random_rotation(rng, d) for _ in range(n)])
    t = np.zeros((n,) + (d,) * 4)
    for a in range(d):
        for b in range(d):
            if a == b:
                t[:, a, a, a, a] = P[:, a, a]
            else:
                for idx in set(itertools.permutations((a, a, b, b))):
                    t[(slice(None),) + idx] = P[:, a, b]
    ref = rotate4(unique4(t), U)
    np.testing.assert_allclose(rotate4_diagonal(P, U), ref, atol=1e-15)


def test_sanitize():
    M = np.array([[0.5, 0.1, 0.0], [0.1, 0.3, 0.0], [0.0, 0.0, 0.2]]) * 2.0
    S = sanitize(M)
    assert np.trace(S) == pytest.approx(1.0, abs=1e-16)
    bad = np.diag([1.2, -0.1, -0.1])
    w = np.linalg.eigvalsh(sanitize(bad))
    assert w.min() >= 0 and abs(w.sum() - 1) < 1e-15
    with pytest.raises(DomainError):
        sanitize(np.full((3, 3), np.nan))
    with pytest.raises(DomainError):
        sanitize(-np.eye(3))
