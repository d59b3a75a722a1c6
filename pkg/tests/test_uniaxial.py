import mpmath as mp
import numpy as np
import pytest

from bingham_closure.biaxial import oracle_moments_sphere
from bingham_closure.errors import ConvergenceError, DomainError, NotUniaxialError
from bingham_closure.tensor import UNIQUE_3D, rotate4
from bingham_closure.uniaxial import (
    build_table_uni,
    close_3d_uniaxial,
    eval_eta_uni,
    forward_moments_uni,
    invert_mu_uni,
)
from bingham_closure.validation import random_rotation

Q3333 = UNIQUE_3D.index((2, 2, 2, 2))


def mp_moments(lam):
    # <cos^2>, <cos^4> of exp(-2 lam t^2) on t in [-1, 1], by mpmath quadrature
    mp.mp.dps = 30
    w = lambda t: mp.exp(-2 * lam * t * t)  # noqa: E731
    z = mp.quad(w, [-1, 0, 1])
    m2 = mp.quad(lambda t: t**2 * w(t), [-1, 0, 1]) / z
    m4 = mp.quad(lambda t: t**4 * w(t), [-1, 0, 1]) / z
    return float(2 * m2), float(4 * m4)


def test_isotropic_values():
    s = forward_moments_uni(0.0)
    assert abs(s.mu - 2 / 3) < 1e-16 and abs(s.eta - 4 / 5) < 1e-16


@pytest.mark.parametrize("lam", [-300.0, -5.0, -0.1, 0.7, 12.0, 400.0])
def test_forward_against_mpmath(lam):
    s = forward_moments_uni(lam)
    mu, eta = mp_moments(lam)
    assert abs(s.mu - mu) <= 2e-16 * max(1.0, mu) * 4
    assert abs(s.eta - eta) <= 2e-16 * max(1.0, eta) * 4


def test_forward_matches_sphere_oracle():
    lam = -5.0
    s = forward_moments_uni(lam)
    m, q = oracle_moments_sphere((0.0, 0.0, 2.0 * lam))
    assert abs(s.mu - 2 * m[2]) < 1e-12
    assert abs(s.eta - 4 * q[Q3333]) < 1e-12


def test_forward_monotone_and_limits():
    lam = np.linspace(-1e3, 1e3, 400)
    mu = np.array([forward_moments_uni(x).mu for x in lam])
    assert np.all(np.diff(mu) < 0)
    assert forward_moments_uni(1e5).mu < 1e-4
    assert forward_moments_uni(-1e5).mu > 2 - 1e-4
    with pytest.raises(DomainError):
        forward_moments_uni(2e5)


def test_mu_squared_minus_eta_negative():
    # d mu / d lambda = mu^2 - eta is negative everywhere
    for lam in np.linspace(-50, 50, 201):
        s = forward_moments_uni(lam)
        assert s.mu**2 - s.eta < 0


def test_invert_examples():
    assert invert_mu_uni(2 / 3) == 0.0
    lam, it = invert_mu_uni(1.9, full_output=True)
    assert lam < 0 and abs(forward_moments_uni(lam).mu - 1.9) <= 1e-15
    assert it <= 10
    with pytest.raises(DomainError):
        invert_mu_uni(2.0)
    with pytest.raises(ConvergenceError):
        invert_mu_uni(1e-7)


def test_small_build():
    t = build_table_uni("global", degrees=40, quad_n=60)
    assert t.domain == "sphere_uniaxial" and t.series[0].degree == 40
    assert all(p["newton_iterations_max"] <= 10 for p in t.metadata["pieces"])


def test_piecewise_structure(uni_piecewise):
    t = uni_piecewise
    assert len(t.series) == 11 and 2 / 3 in t.breakpoints
    assert all(s.degree == 18 for s in t.series)
    i = t.breakpoints.index(0.36)
    assert t.residuals[i] <= 1e-14
    assert all(p["newton_iterations_max"] <= 10 for p in t.metadata["pieces"])


def test_eval_against_inversion(uni_piecewise, uni_global):
    rng = np.random.default_rng(3)
    mu = rng.uniform(1e-4, 2 - 1e-4, 500)
    ref = np.array([forward_moments_uni(invert_mu_uni(m)).eta for m in mu])
    for t in (uni_piecewise, uni_global):
        assert np.max(np.abs(eval_eta_uni(t, mu) - ref)) <= 5e-14
        assert eval_eta_uni(t, 0.0) == 0.0 and eval_eta_uni(t, 2.0) == 4.0


def test_close_examples(uni_piecewise):
    q = close_3d_uniaxial(np.eye(3) / 3, uni_piecewise)
    full = dict(zip(UNIQUE_3D, q))
    for i in range(3):
        assert abs(full[(i, i, i, i)] - 1 / 5) < 1e-14
    assert abs(full[(0, 0, 1, 1)] - 1 / 15) < 1e-14
    q = close_3d_uniaxial(np.diag([0.0, 0.0, 1.0]), uni_piecewise)
    expect = np.zeros(15)
    expect[Q3333] = 1.0
    np.testing.assert_allclose(q, expect, atol=1e-15)


def test_close_matches_oracle(uni_piecewise):
    rng = np.random.default_rng(11)
    for _ in range(30):
        lam = rng.uniform(-50, 50)
        m, q = oracle_moments_sphere((0.0, 0.0, 2.0 * lam))
        m[0] = m[1] = 0.5 * (m[0] + m[1])
        U = random_rotation(rng, 3)
        M = U @ np.diag(m) @ U.T
        assert np.max(np.abs(close_3d_uniaxial(M, uni_piecewise) - rotate4(q, U))) <= 1e-12


def test_close_rejects_biaxial(uni_piecewise):
    with pytest.raises(NotUniaxialError):
        close_3d_uniaxial(np.diag([0.2, 0.3, 0.5]), uni_piecewise)
