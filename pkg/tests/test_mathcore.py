import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aggdyn.mathcore import (
    IllConditionedWarning,
    InvalidOrientationError,
    SingularMatrixError,
    Wrench,
    cross,
    left_jacobian,
    left_jacobian_rate,
    quat_exp,
    quat_from_axis_angle,
    quat_mul,
    quat_rotate,
    quat_to_matrix,
    skew,
    solve_dense,
    wrench_shift,
)

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)
vec3s = arrays(float, 3, elements=finite)


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ((1, 0, 0), (0, 1, 0), (0, 0, 1)),
        ((0, 0, 1), (0, 0, 1), (0, 0, 0)),
        ((2, 0, 0), (0, 3, 0), (0, 0, 6)),
    ],
)
def test_cross_examples(a, b, expected):
    np.testing.assert_array_equal(cross(a, b), expected)


@given(vec3s, vec3s)
def test_cross_antisymmetric(a, b):
    np.testing.assert_array_equal(cross(a, b), -cross(b, a))


@given(vec3s, vec3s)
def test_skew_matches_cross(a, b):
    np.testing.assert_allclose(skew(a) @ b, cross(a, b), rtol=1e-12, atol=1e-9)


def test_quat_rotate_identity():
    np.testing.assert_array_equal(quat_rotate([1, 0, 0, 0], [1, 2, 3]), [1, 2, 3])


def test_quat_rotate_quarter_turn_about_z():
    q = quat_from_axis_angle([0, 0, 1], math.pi / 2)
    np.testing.assert_allclose(quat_rotate(q, [1, 0, 0]), [0, 1, 0], atol=1e-15)


def test_quat_rotate_rejects_unnormalized():
    with pytest.raises(InvalidOrientationError):
        quat_rotate([1.0, 0.0, 0.0, 1e-4], [1, 0, 0])


@given(arrays(float, 4, elements=st.floats(-1, 1)).filter(lambda q: np.linalg.norm(q) > 0.1), vec3s)
def test_quat_rotate_is_isometry(q, v):
    q = q / np.linalg.norm(q)
    r = quat_rotate(q, v)
    assert abs(np.linalg.norm(r) - np.linalg.norm(v)) <= 1e-12 * max(1.0, np.linalg.norm(v))
    np.testing.assert_allclose(r, quat_to_matrix(q) @ v, atol=1e-12 * max(1.0, np.linalg.norm(v)))


def test_quat_exp_matches_axis_angle():
    rv = np.array([0.3, -0.2, 0.9])
    t = np.linalg.norm(rv)
    np.testing.assert_allclose(quat_exp(rv), quat_from_axis_angle(rv / t, t), atol=1e-15)
    small = np.array([1e-6, 2e-6, -1e-6])
    t = np.linalg.norm(small)
    np.testing.assert_allclose(quat_exp(small), quat_from_axis_angle(small / t, t), atol=1e-18)


@pytest.mark.parametrize("scale", [1e-7, 1e-3, 0.2, 0.31, 1.5])
def test_left_jacobian_against_finite_difference(scale):
    rng = np.random.default_rng(int(scale * 1e7) % 1000)
    theta = rng.normal(size=3) * scale
    thetadot = rng.normal(size=3)
    h = 1e-6

    def R(th):
        return quat_to_matrix(quat_exp(th))

    # (dR/dt) R^T = [J thetadot]x
    dR = (R(theta + h * thetadot) - R(theta - h * thetadot)) / (2 * h)
    W = dR @ R(theta).T
    omega = np.array([W[2, 1], W[0, 2], W[1, 0]])
    np.testing.assert_allclose(left_jacobian(theta) @ thetadot, omega, atol=1e-8)
    dJ = (left_jacobian(theta + h * thetadot) - left_jacobian(theta - h * thetadot)) / (2 * h)
    np.testing.assert_allclose(left_jacobian_rate(theta, thetadot), dJ @ thetadot, atol=1e-8)


def test_wrench_shift_lever_arm():
    w = wrench_shift(Wrench(np.array([0.0, 0, 1]), np.zeros(3)), [0, 0, 0], [1, 0, 0])
    np.testing.assert_array_equal(w.force, [0, 0, 1])
    np.testing.assert_array_equal(w.moment, [0, 1, 0])


@given(vec3s, vec3s, vec3s)
def test_wrench_shift_zero_shift(f, m, p):
    w = wrench_shift(Wrench(f, m), p, p)
    np.testing.assert_array_equal(w.force, f)
    np.testing.assert_array_equal(w.moment, m)


@given(vec3s, vec3s, vec3s, vec3s)
def test_wrench_shift_round_trip(f, m, a, b):
    w = wrench_shift(wrench_shift(Wrench(f, m), a, b), b, a)
    scale = 1.0 + np.abs(m).max() + np.abs(f).max() * (np.abs(a).max() + np.abs(b).max())
    np.testing.assert_allclose(w.moment, m, atol=1e-14 * scale)


@given(vec3s, vec3s, vec3s, vec3s, vec3s)
def test_wrench_shift_composes(f, m, p, q, r):
    w = Wrench(f, m)
    two = wrench_shift(wrench_shift(w, p, q), q, r)
    one = wrench_shift(w, p, r)
    scale = 1.0 + np.abs(m).max() + np.abs(f).max() * max(np.abs(p).max(), np.abs(q).max(), np.abs(r).max())
    np.testing.assert_allclose(two.moment, one.moment, atol=1e-12 * scale)


def test_solve_dense_identity():
    np.testing.assert_array_equal(solve_dense(np.eye(3), [1.0, 2.0, 3.0]), [1, 2, 3])


def test_solve_dense_diagonal():
    np.testing.assert_allclose(solve_dense([[2.0, 0.0], [0.0, 4.0]], [2.0, 8.0]), [1.0, 2.0], rtol=0, atol=1e-15)


def test_solve_dense_needs_pivoting():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_array_equal(solve_dense(A, [3.0, 5.0]), [5.0, 3.0])


def test_solve_dense_random_12():
    rng = np.random.default_rng(12)
    A = rng.normal(size=(12, 12)) + 12 * np.eye(12)
    b = rng.normal(size=12)
    x = solve_dense(A, b)
    assert np.max(np.abs(A @ x - b)) < 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 60), st.integers(0, 2**32 - 1))
def test_solve_dense_residual_on_diagonally_dominant(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, size=(n, n))
    A += np.diag(np.sign(np.diag(A)) * (np.abs(A).sum(axis=1) + 1.0))
    b = rng.uniform(-10, 10, size=n)
    x = solve_dense(A, b)
    assert np.max(np.abs(A @ x - b)) <= 1e-9 * (1 + np.max(np.abs(b)))


def test_solve_dense_singular():
    with pytest.raises(SingularMatrixError):
        solve_dense([[1.0, 2.0], [2.0, 4.0]], [1.0, 2.0])
    with pytest.raises(SingularMatrixError):
        solve_dense(np.zeros((2, 2)), [0.0, 0.0])


def test_solve_dense_condition_warning():
    A = np.array([[1.0, 1e6], [0.0, 1e-5]])
    with pytest.warns(IllConditionedWarning):
        solve_dense(A, [1.0, 1.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        solve_dense(np.diag([1.0, 1e-6]), [1.0, 1.0])


def test_solve_dense_shape_errors():
    with pytest.raises(ValueError):
        solve_dense(np.ones((2, 3)), [1.0, 2.0])
    with pytest.raises(ValueError):
        solve_dense(np.eye(2), [1.0, 2.0, 3.0])


def test_quat_mul_composes_rotations():
    rng = np.random.default_rng(3)
    p, q = (x / np.linalg.norm(x) for x in rng.normal(size=(2, 4)))
    np.testing.assert_allclose(quat_to_matrix(quat_mul(p, q)), quat_to_matrix(p) @ quat_to_matrix(q), atol=1e-14)
