import numpy as np
import pytest

from contraprox.metric import Metric, pairing


def test_euclidean_norm_identity():
    m = Metric.identity(2)
    assert m.norm(np.array([3.0, 4.0])) == pytest.approx(5.0, abs=1e-14)


def test_norm_zero_vector():
    m = Metric(np.array([[4.0, 1.0], [1.0, 2.0]]))
    assert m.norm(np.zeros(2)) == 0.0


def test_diag_metric_norm():
    m = Metric(np.diag([4.0, 1.0]))
    assert m.norm(np.array([1.0, 1.0])) == pytest.approx(np.sqrt(5.0), rel=1e-14)


def test_dual_norm_self_dual_identity():
    m = Metric.identity(2)
    assert m.dual_norm(np.array([3.0, 4.0])) == pytest.approx(5.0, abs=1e-14)


def test_dual_norm_diag():
    m = Metric(np.diag([4.0, 1.0]))
    assert m.dual_norm(np.array([1.0, 0.0])) == pytest.approx(0.5, rel=1e-14)
    assert m.dual_norm(np.zeros(2)) == 0.0


def test_pairing_basics():
    assert pairing(np.array([1.0, 2.0]), np.array([3.0, 4.0])) == 11.0
    assert pairing(np.zeros(3), np.ones(3)) == 0.0


def _random_spd(rng, n):
    G = rng.standard_normal((n, n))
    return G @ G.T + n * np.eye(n)


def test_cauchy_schwarz_random():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = rng.integers(2, 8)
        m = Metric(_random_spd(rng, n))
        s = rng.standard_normal(n) * 10
        x = rng.standard_normal(n) * 10
        assert abs(pairing(s, x)) <= m.dual_norm(s) * m.norm(x) + 1e-10


def test_duality_consistency():
    rng = np.random.default_rng(8)
    for _ in range(30):
        n = rng.integers(1, 9)
        m = Metric(_random_spd(rng, n))
        x = rng.standard_normal(n)
        assert m.dual_norm(m.apply(x)) == pytest.approx(m.norm(x), rel=1e-12, abs=1e-12)


def test_norm_homogeneity_and_triangle():
    rng = np.random.default_rng(9)
    for _ in range(30):
        n = rng.integers(2, 7)
        m = Metric(_random_spd(rng, n))
        x, y = rng.standard_normal(n), rng.standard_normal(n)
        t = rng.uniform(-5, 5)
        assert m.norm(t * x) == pytest.approx(abs(t) * m.norm(x), rel=1e-12, abs=1e-13)
        assert m.norm(x + y) <= m.norm(x) + m.norm(y) + 1e-12
        assert m.dual_norm(x + y) <= m.dual_norm(x) + m.dual_norm(y) + 1e-12


def test_solve_inverts_apply():
    rng = np.random.default_rng(10)
    m = Metric(_random_spd(rng, 5))
    x = rng.standard_normal(5)
    np.testing.assert_allclose(m.solve(m.apply(x)), x, rtol=1e-10, atol=1e-12)


def test_rejects_nonsymmetric():
    with pytest.raises(ValueError, match="symmetric"):
        Metric(np.array([[1.0, 0.5], [0.2, 1.0]]))


def test_rejects_indefinite():
    with pytest.raises(ValueError, match="positive definite"):
        Metric(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_rejects_singular():
    with pytest.raises(ValueError, match="positive definite"):
        Metric(np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_dimension_mismatch():
    m = Metric.identity(3)
    with pytest.raises(ValueError, match="dimension"):
        m.norm(np.ones(2))
    with pytest.raises(ValueError, match="dimension"):
        pairing(np.ones(2), np.ones(3))
