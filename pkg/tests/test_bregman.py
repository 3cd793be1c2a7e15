import numpy as np
import pytest

from contraprox.bregman import CustomProx, PowerProx, divergence_of
from contraprox.metric import Metric


def test_power_value_order1():
    d = PowerProx(1, np.zeros(2), Metric.identity(2))
    assert d.value(np.array([3.0, 4.0])) == pytest.approx(12.5, abs=1e-14)


def test_power_value_order2():
    d = PowerProx(2, np.zeros(2), Metric.identity(2))
    assert d.value(np.array([1.0, 0.0])) == pytest.approx(1.0 / 3.0, rel=1e-14)


def test_value_zero_at_center():
    d = PowerProx(3, np.array([1.0, -2.0]), Metric.identity(2))
    assert d.value(np.array([1.0, -2.0])) == 0.0


def test_gradient_order1_is_metric_apply():
    d = PowerProx(1, np.zeros(2), Metric.identity(2))
    np.testing.assert_allclose(d.gradient(np.array([2.0, 1.0])), [2.0, 1.0])


def test_gradient_order2_unit_vector():
    d = PowerProx(2, np.zeros(2), Metric.identity(2))
    np.testing.assert_allclose(d.gradient(np.array([1.0, 0.0])), [1.0, 0.0])


def test_gradient_at_center_no_zero_power():
    # order 1 short-circuits; higher orders vanish smoothly
    for p in (1, 2, 3):
        d = PowerProx(p, np.ones(3), Metric.identity(3))
        np.testing.assert_allclose(d.gradient(np.ones(3)), np.zeros(3))


def _central_difference(fn, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    for p in (1, 2):
        for _ in range(5):
            n = rng.integers(2, 6)
            G = rng.standard_normal((n, n))
            metric = Metric(G @ G.T + n * np.eye(n))
            d = PowerProx(p, rng.standard_normal(n), metric)
            x = rng.standard_normal(n) + 0.5
            fd = _central_difference(d.value, x)
            np.testing.assert_allclose(d.gradient(x), fd, rtol=1e-6, atol=1e-8)


def test_divergence_zero_iff_equal():
    rng = np.random.default_rng(4)
    d = PowerProx(2, np.zeros(3), Metric.identity(3))
    x = rng.standard_normal(3)
    assert d.divergence(x, x) == 0.0
    y = x + 0.1
    assert d.divergence(x, y) > 1e-12


def test_divergence_order1_is_half_squared_distance():
    d = PowerProx(1, np.zeros(2), Metric.identity(2))
    val = d.divergence(np.zeros(2), np.array([3.0, 4.0]))
    assert val == pytest.approx(12.5, rel=1e-14)


def test_divergence_order2_hand_value():
    d = PowerProx(2, np.zeros(2), Metric.identity(2))
    # d(y)-d(x)-<grad d(x), y-x> = 1/3 - 1/3 - (-1) = 1
    val = d.divergence(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert val == pytest.approx(1.0, rel=1e-14)


def test_uniform_lower_bound_hand_value():
    d = PowerProx(2, np.zeros(2), Metric.identity(2))
    x, y = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    bound = d.uniform_lower_bound(x, y)
    assert bound == pytest.approx((1.0 / 6.0) * np.sqrt(2.0) ** 3, rel=1e-12)
    assert d.divergence(x, y) >= bound


def test_uniform_bound_equality_order1():
    rng = np.random.default_rng(5)
    d = PowerProx(1, np.zeros(4), Metric.identity(4))
    for _ in range(10):
        x, y = rng.standard_normal(4), rng.standard_normal(4)
        assert d.divergence(x, y) == pytest.approx(d.uniform_lower_bound(x, y), rel=1e-12)


def test_uniform_bound_random_pairs():
    rng = np.random.default_rng(6)
    for p in (1, 2, 3):
        for _ in range(20):
            n = rng.integers(2, 6)
            G = rng.standard_normal((n, n))
            metric = Metric(G @ G.T + n * np.eye(n))
            d = PowerProx(p, rng.standard_normal(n), metric)
            x, y = rng.standard_normal(n) * 2, rng.standard_normal(n) * 2
            assert d.divergence(x, y) >= d.uniform_lower_bound(x, y) - 1e-12


def test_additivity_of_divergences():
    # nonnegative combination of a power prox and a quadratic
    rng = np.random.default_rng(7)
    metric = Metric.identity(3)
    d1 = PowerProx(2, np.zeros(3), metric)
    d2 = PowerProx(1, np.ones(3), metric)
    a1, a2 = 0.7, 2.5
    combo = CustomProx(
        lambda x: a1 * d1.value(x) + a2 * d2.value(x),
        lambda x: a1 * d1.gradient(x) + a2 * d2.gradient(x),
        order=2, uniform_constant=a1 * d1.uniform_constant, center=np.zeros(3),
        metric=metric)
    for _ in range(10):
        x, y = rng.standard_normal(3), rng.standard_normal(3)
        expect = a1 * d1.divergence(x, y) + a2 * d2.divergence(x, y)
        assert combo.divergence(x, y) == pytest.approx(expect, rel=1e-10, abs=1e-12)


def test_linear_functions_have_zero_divergence():
    rng = np.random.default_rng(8)
    g = rng.standard_normal(4)
    value = lambda x: 3.0 + float(g @ x)
    grad = lambda x: g
    for _ in range(5):
        x, y = rng.standard_normal(4), rng.standard_normal(4)
        assert divergence_of(value, grad, x, y) == pytest.approx(0.0, abs=1e-12)


def test_power_constant_is_two_to_one_minus_p():
    for p in (1, 2, 3, 4):
        d = PowerProx(p, np.zeros(2), Metric.identity(2))
        assert d.uniform_constant == pytest.approx(2.0 ** (1 - p))


def test_rejects_bad_order():
    with pytest.raises(ValueError):
        PowerProx(0, np.zeros(2), Metric.identity(2))
