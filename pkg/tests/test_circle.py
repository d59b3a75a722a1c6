import mpmath as mp
import numpy as np
import pytest

from bingham_closure.circle import (
    build_table,
    close_2d,
    eval_eta,
    forward_moments,
    invert_mu,
    oracle_moments_2d,
)
from bingham_closure.errors import ConvergenceError, DomainError
from bingham_closure.quadrature import gauss_legendre
from bingham_closure.tensor import rotate4
from bingham_closure.validation import random_rotation


def test_forward_at_zero():
    s = forward_moments(0.0)
    assert s.mu == 0.0 and s.eta == 0.5


def test_forward_at_one_against_mpmath():
    mp.mp.dps = 30
    s = forward_moments(1.0)
    assert abs(s.mu - float(mp.besseli(1, 1) / mp.besseli(0, 1))) < 1e-16
    assert abs(s.mu - 0.4463899659) < 1e-10
    assert abs(s.eta - float((mp.besseli(2, 1) / mp.besseli(0, 1) + 1) / 2)) < 1e-16


def test_forward_large_lambda_asymptotic():
    lam = 1e4
    s = forward_moments(lam)
    # I1/I0 = 1 - 1/(2x) - 1/(8x^2) - 1/(8x^3) + ...
    approx = 1 - 1 / (2 * lam) - 1 / (8 * lam**2) - 1 / (8 * lam**3)
    assert abs(s.mu - approx) < 1e-12


def test_forward_monotone_and_eta_bounds():
    lam = np.concatenate([[0.0], np.geomspace(1e-3, 1e5, 300)])
    st = [forward_moments(x) for x in lam]
    mu = np.array([s.mu for s in st])
    eta = np.array([s.eta for s in st])
    assert np.all(np.diff(mu) > 0)
    assert np.all(eta > mu**2) and np.all(eta < 1)


def test_forward_rejects_negative():
    with pytest.raises(DomainError):
        forward_moments(-1.0)


def test_invert_examples():
    assert invert_mu(0.0) == 0.0
    lam = invert_mu(forward_moments(1.0).mu)
    assert abs(lam - 1.0) < 1e-14
    with pytest.raises(DomainError):
        invert_mu(1.0)
    with pytest.raises(ConvergenceError):
        invert_mu(1 - 1e-9)


@pytest.mark.parametrize("mu", [1e-9, 0.2, 0.5, 0.9, 0.999, 1 - 1e-6])
def test_invert_round_trip(mu):
    lam, it = invert_mu(mu, full_output=True)
    assert abs(forward_moments(lam).mu - mu) <= 1e-15
    assert it <= 6


def test_last_piece_node_lambda_is_finite():
    r = gauss_legendre(48)
    mu = float(r.mapped(0.96, 1.0)[-1])
    lam = invert_mu(mu)
    assert np.isfinite(lam)
    assert abs(lam * 2 * (1 - mu) - 1) < 0.01


def test_oracle_examples():
    mu, eta, q = oracle_moments_2d(0.0)
    assert abs(mu) < 1e-15 and abs(eta - 0.5) < 1e-15
    assert abs(q[1]) < 1e-15 and abs(q[3]) < 1e-15
    mu, eta, q = oracle_moments_2d(1.0)
    s = forward_moments(1.0)
    assert abs(mu - s.mu) < 1e-13 and abs(eta - s.eta) < 1e-13
    for lam in (0.3, 5.0, 80.0):
        mu, eta, q = oracle_moments_2d(lam)
        q4, q2, q0 = q[0], q[2], q[4]
        assert abs(q0 + q2 - (1 - mu) / 2) < 1e-14
        assert abs(q2 + q4 - (1 + mu) / 2) < 1e-14


def test_build_small_table_and_metadata():
    t = build_table("global", degrees=30, quad_n=40)
    assert t.domain == "circle" and t.variant == "global"
    assert len(t.series) == 1 and t.series[0].degree == 30
    assert t.metadata["pieces"][0]["newton_iterations_max"] <= 6
    with pytest.raises(ValueError):
        build_table("spline")


def test_piecewise_structure(circle_piecewise):
    t = circle_piecewise
    assert t.breakpoints == (0.0, 0.5, 0.73, 0.84, 0.91, 0.96, 1.0)
    assert [s.degree for s in t.series] == [19, 19, 18, 18, 18, 18]
    assert t.residuals[0] <= 1e-14


def test_eval_endpoints(circle_piecewise, circle_global):
    for t in (circle_piecewise, circle_global):
        assert abs(eval_eta(t, 0.0) - 0.5) <= 1e-14
        assert eval_eta(t, 1.0) == 1.0
        with pytest.raises(DomainError):
            eval_eta(t, 1.001)


def test_eval_against_inversion(circle_piecewise, circle_global):
    rng = np.random.default_rng(0)
    mu = rng.uniform(0, 0.999999, 1000)
    ref = np.array([forward_moments(invert_mu(m)).eta for m in mu])
    for t in (circle_piecewise, circle_global):
        assert np.max(np.abs(eval_eta(t, mu) - ref)) <= 5e-14


def test_eval_scalar_array_shapes(circle_piecewise):
    t = circle_piecewise
    assert isinstance(eval_eta(t, 0.3), float)
    u = np.linspace(0, 1, 12).reshape(3, 4)
    out = eval_eta(t, u)
    assert out.shape == (3, 4)
    np.testing.assert_array_equal(out.ravel(), [eval_eta(t, v) for v in u.ravel()])


def test_close_examples(circle_piecewise):
    q = close_2d(np.eye(2) / 2, circle_piecewise)
    np.testing.assert_allclose(q, [3 / 8, 0, 1 / 8, 0, 3 / 8], atol=1e-14)
    q = close_2d(np.diag([1.0, 0.0]), circle_piecewise)
    np.testing.assert_allclose(q, [1, 0, 0, 0, 0], atol=1e-15)


def test_close_matches_oracle(circle_piecewise):
    rng = np.random.default_rng(5)
    for _ in range(50):
        lam = rng.uniform(0, 100)
        mu, _, q = oracle_moments_2d(lam)
        U = random_rotation(rng, 2)
        M = U @ np.diag([(1 + mu) / 2, (1 - mu) / 2]) @ U.T
        assert np.max(np.abs(close_2d(M, circle_piecewise) - rotate4(q, U))) <= 1e-12


def test_close_batch_matches_single(circle_piecewise):
    rng = np.random.default_rng(9)
    Ms = []
    for _ in range(20):
        U = random_rotation(rng, 2)
        a = rng.uniform(0.5, 1)
        Ms.append(U @ np.diag([a, 1 - a]) @ U.T)
    Ms = np.array(Ms)
    batch = close_2d(Ms, circle_piecewise)
    for k in range(20):
        np.testing.assert_allclose(batch[k], close_2d(Ms[k], circle_piecewise), atol=1e-16)
