import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from floatbody import kernel as K
from floatbody.errors import GeometryError
from floatbody.envelope import CurvatureProfile, build_envelope
from floatbody.kernel import KernelContext

from conftest import admissible_points

SPHERE = KernelContext(build_envelope(CurvatureProfile.zero()))


def test_gamma_rule_integrates_weight_exactly():
    s, w = K.gamma_rule(64)
    assert w.sum() == pytest.approx(math.pi / 4, rel=1e-14)
    # int_0^1 sqrt(1 - G^2) G^2 dG = pi / 16
    assert np.sum(w * (1 - s)) == pytest.approx(math.pi / 16, rel=1e-13)


def test_graded_rule_handles_the_break(contexts):
    ctx = contexts["quartic"]
    s, w = K.gamma_nodes(ctx, np.array([0.3, 0.6]), 0.9)
    assert s.shape == w.shape and s.shape[0] == 2
    np.testing.assert_allclose(w.sum(axis=1), math.pi / 4, rtol=1e-13)


@settings(max_examples=100, deadline=None)
@given(phi=st.floats(0.01, 1.0), frac=st.floats(0.01, 1.0))
def test_sphere_Q_closed_form(phi, frac):
    ctx = SPHERE
    alpha = frac * phi
    assert K.Q(alpha, phi, alpha, ctx) == pytest.approx(1 + alpha / phi, rel=1e-10)


def test_sphere_Z_is_the_half_chord(sphere_ctx):
    alpha, phi = 0.3, 0.7
    # slice at height alpha of the unit sphere, cut by the section through the centre
    expected = math.sqrt(1 - alpha**2 - (alpha * math.sqrt(1 - phi**2) / phi) ** 2)
    assert K.Z(alpha, phi, alpha, sphere_ctx) == pytest.approx(expected, rel=1e-12)
    assert K.X(alpha, phi, alpha, sphere_ctx) == pytest.approx(alpha * math.sqrt(1 - phi**2) / phi)


def test_sphere_boundary_matrix(sphere_ctx):
    for chi in (0.1, 0.4, 0.8, 1.0):
        A = K.a_matrix(chi, np.array([chi, -chi]), sphere_ctx)
        r = math.pi / math.sqrt(2)
        np.testing.assert_allclose(A[0], [r * chi**0.5, -r * chi**0.5], rtol=1e-12)
        np.testing.assert_allclose(A[1], [r * chi**1.5, r * chi**1.5], rtol=1e-12)
        assert np.linalg.det(A) == pytest.approx(math.pi**2 * chi**2, rel=1e-12)


def test_G_vanishes_on_the_diagonal(contexts, sphere_ctx):
    for ctx in [sphere_ctx, *contexts.values()]:
        for i in (1, 2):
            assert K.G(i, 1, 0.4, 0.4, 0.5, ctx) == 0.0


def test_rhs_constants(sphere_ctx):
    # d^2/dchi^2 of (32/35) chi^{7/2} is 8 chi^{3/2}
    assert 32 / 35 * 3.5 * 2.5 == pytest.approx(8.0, abs=1e-15)
    chi, h = 0.6, 1e-4
    fd = (K.F(chi + h, sphere_ctx) - 2 * K.F(chi, sphere_ctx) + K.F(chi - h, sphere_ctx)) / h**2
    np.testing.assert_allclose(fd, K.f_rhs(chi, sphere_ctx), rtol=1e-6, atol=1e-12)
    assert sphere_ctx.I_rhs == pytest.approx(math.pi / 8)


def test_sphere_satisfies_differentiated_equations(sphere_ctx):
    """SIGN o (A Y' + int c) = F'' for Y = (chi, -chi)."""
    ctx = sphere_ctx
    yp = np.array([1.0, -1.0])
    for chi in (0.3, 0.7):
        A = K.a_matrix(chi, np.array([chi, -chi]), ctx)

        def c(alpha, i, j):
            return K.c_kernel(alpha, chi, np.array([alpha, -alpha]), yp, ctx)[i, j]

        H = np.array([[quad(c, 0, chi, args=(i, j), epsabs=1e-13, limit=200)[0]
                       for j in range(2)] for i in range(2)])
        lhs = (K.SIGN * (A * yp[None, :] + H)).sum(axis=1)
        np.testing.assert_allclose(lhs, K.f_rhs(chi, ctx), atol=1e-9)


@pytest.mark.parametrize("family", ["quartic", "cos1", "cos3"])
def test_derivatives_match_finite_differences(contexts, envelopes, family):
    ctx = contexts[family]
    h = ctx.h_fd
    for alpha, chi, y in admissible_points(envelopes[family], 6, seed=1):
        for i in (1, 2):
            g = [K.G(i, 1, alpha, chi + k * h, y, ctx) for k in (-1, 0, 1)]
            assert K.dG(i, 1, alpha, chi, y, ctx) == pytest.approx((g[2] - g[0]) / (2 * h), rel=1e-6)
            assert K.d2G(i, 1, alpha, chi, y, ctx) == pytest.approx(
                (g[2] - 2 * g[1] + g[0]) / h**2, rel=1e-4)


def test_boundary_matrix_is_one_sided_derivative(contexts):
    ctx = contexts["cos1"]
    chi, Y = 0.6, np.array([0.4, -0.9])
    A = K.a_matrix(chi, Y, ctx)
    h = 1e-7 * chi
    for i in (1, 2):
        for j in (0, 1):
            fd = K.G(i, j + 1, chi - h, chi, Y[j], ctx) / h
            assert fd == pytest.approx(A[i - 1, j], rel=1e-4)


def test_history_kernel_approaches_diagonal_limit(contexts):
    ctx = contexts["cos3"]
    chi = 0.5
    y = np.array([0.45, -0.55])
    D = K.diag_d2G(chi, y, ctx)
    near = K.d2G_history(np.array([chi * (1 - 1e-7)]), chi, y[:, None], ctx)[..., 0]
    np.testing.assert_allclose(near, D, rtol=1e-5)


def test_history_batch_matches_pointwise(contexts):
    ctx = contexts["quartic"]
    alphas = np.array([0.2, 0.5, 0.8])
    Y = np.vstack([alphas, -alphas])
    D = K.d2G_history(alphas, 0.9, Y, ctx)
    for k, a in enumerate(alphas):
        for i in (1, 2):
            for j in range(2):
                assert D[i - 1, j, k] == pytest.approx(K.d2G(i, j + 1, a, 0.9, Y[j, k], ctx), rel=1e-12)


@pytest.mark.parametrize("family", ["cos1", "quartic"])
def test_gamma_order_does_not_move_the_kernel(envelopes, family):
    vals = []
    for n in (32, 64, 128):
        ctx = KernelContext(envelopes[family], gamma_order=n)
        vals.append([K.d2G(i, 1, 0.35, 0.85, 0.4, ctx) for i in (1, 2)])
    vals = np.array(vals)
    np.testing.assert_allclose(vals[0], vals[2], rtol=1e-7)
    np.testing.assert_allclose(vals[1], vals[2], rtol=1e-7)


def test_zero_chord_is_a_geometry_error(sphere_ctx):
    with pytest.raises(GeometryError):
        K.Q(0.3, 0.6, 0.0, sphere_ctx)


def test_order_violations(sphere_ctx):
    with pytest.raises(ValueError):
        K.P(0.7, 0.6, 0.5, sphere_ctx)
    with pytest.raises(ValueError):
        K.c_kernel(0.5, 0.5, np.array([0.5, -0.5]), np.array([1.0, -1.0]), sphere_ctx)
    with pytest.raises(ValueError):
        K.X(0.0, 0.0, 0.1, sphere_ctx)
