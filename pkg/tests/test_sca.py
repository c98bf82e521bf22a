import numpy as np
import pytest

from irsrelay.sca import (
    AffineBound,
    NonPositiveLocalPoint,
    SlackLocalPoint,
    taylor_bound_u,
    taylor_bound_u3,
    taylor_bound_v,
    u3_value,
    u_value,
    v_value,
)


def central_diff(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2 * h)


def test_bound_u_reference_point():
    b = taylor_bound_u(1.0, 1.0, 1.0)
    assert b.constant == pytest.approx(1.0)
    assert b.coeff_s == pytest.approx(-1.0 / (2 * np.log(2)), rel=1e-12)
    assert b.coeff_i == pytest.approx(-1.0 / (2 * np.log(2)), rel=1e-12)


def test_bound_u_matches_finite_differences():
    # O(1)-scaled points: the fixed 1e-6 step leaves cancellation noise well
    # below the 1e-5 relative tolerance there.
    rng = np.random.default_rng(0)
    for _ in range(50):
        s, i = rng.uniform(0.05, 5.0, size=2)
        c = rng.uniform(1.0, 10.0)
        b = taylor_bound_u(s, i, c)
        ds = central_diff(lambda x: u_value(x, i, c), s)
        di = central_diff(lambda x: u_value(s, x, c), i)
        assert b.coeff_s == pytest.approx(ds, rel=1e-5)
        assert b.coeff_i == pytest.approx(di, rel=1e-5)


def test_bound_u_tangent_and_global():
    rng = np.random.default_rng(1)
    b = taylor_bound_u(2.0, 0.5, 3.0)
    assert b(2.0, 0.5) == pytest.approx(u_value(2.0, 0.5, 3.0), rel=1e-14)
    for _ in range(1000):
        s, i = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), size=2))
        assert b(s, i) <= u_value(s, i, 3.0) + 1e-12


def test_bound_v_reference_point():
    b = taylor_bound_v(1.0, 1.0)
    # bound(S, I) = 3 - S - I.
    assert b(0.0, 0.0) == pytest.approx(3.0)
    assert b.coeff_s == pytest.approx(-1.0)
    assert b.coeff_i == pytest.approx(-1.0)


def test_bound_v_matches_finite_differences():
    rng = np.random.default_rng(2)
    for _ in range(50):
        s, i = rng.uniform(0.05, 20.0, size=2)
        b = taylor_bound_v(s, i)
        assert b.coeff_s == pytest.approx(central_diff(lambda x: v_value(x, i), s), rel=1e-5)
        assert b.coeff_i == pytest.approx(central_diff(lambda x: v_value(s, x), i), rel=1e-5)


def test_bound_v_tangent_and_global():
    rng = np.random.default_rng(3)
    b = taylor_bound_v(0.7, 1.9)
    assert b(0.7, 1.9) == pytest.approx(v_value(0.7, 1.9), rel=1e-14)
    for _ in range(1000):
        s, i = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), size=2))
        assert b(s, i) <= v_value(s, i) + 1e-12


def test_bound_u3_tangent_gradient_and_global():
    rng = np.random.default_rng(4)
    z1, z2 = SlackLocalPoint(0.4, 2.0), SlackLocalPoint(3.0, 0.8)
    b = taylor_bound_u3(z1, z2)
    assert b((z1.s, z1.i, z2.s, z2.i)) == pytest.approx(u3_value(z1.s, z1.i, z2.s, z2.i), rel=1e-14)
    grads = [
        central_diff(lambda x: u3_value(x, z1.i, z2.s, z2.i), z1.s),
        central_diff(lambda x: u3_value(z1.s, x, z2.s, z2.i), z1.i),
        central_diff(lambda x: u3_value(z1.s, z1.i, x, z2.i), z2.s),
        central_diff(lambda x: u3_value(z1.s, z1.i, z2.s, x), z2.i),
    ]
    for got, want in zip(b.coeffs, grads):
        assert got == pytest.approx(want, rel=1e-5)
    for _ in range(1000):
        z = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), size=4))
        assert b(z) <= u3_value(*z) + 1e-12


def test_rejects_nonpositive_local_points():
    with pytest.raises(NonPositiveLocalPoint):
        taylor_bound_u(0.0, 1.0, 1.0)
    with pytest.raises(NonPositiveLocalPoint):
        taylor_bound_v(1.0, -2.0)
    with pytest.raises(NonPositiveLocalPoint):
        SlackLocalPoint(np.inf, 1.0)


def test_rejects_c_below_one():
    with pytest.raises(ValueError):
        taylor_bound_u(1.0, 1.0, 0.5)


def test_affine_bound_is_plain_dataclass():
    b = AffineBound(1.0, -0.5, -0.25, 1.0, 2.0)
    assert b(1.0, 2.0) == pytest.approx(1.0)
    assert b(2.0, 2.0) == pytest.approx(0.5)
