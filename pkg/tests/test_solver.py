import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floatbody import kernel as K
from floatbody import solver as S
from floatbody.envelope import CurvatureProfile, build_envelope
from floatbody.errors import GeometryError, NumericError, SolverStall


@pytest.mark.parametrize("kind", S.GRIDS)
def test_grid_shape(kind):
    chi, jac, ht = S.make_grid(16, kind)
    assert chi[0] == 0.0 and chi[-1] == 1.0
    assert np.all(np.diff(chi) > 0)
    # trapezoid in tau integrates dchi exactly to 1 within O(h^2)
    w = ht * jac
    assert w.sum() - 0.5 * (w[0] + w[-1]) == pytest.approx(1.0, abs=5e-3)


def test_config_validation():
    with pytest.raises(ValueError):
        S.SolverConfig(2)
    with pytest.raises(ValueError):
        S.SolverConfig(64, grid="log")
    with pytest.raises(ValueError):
        S.SolverConfig(64, chi_start=1.5)


def test_sphere_is_emplaced_exactly(sphere_solution):
    sol = sphere_solution
    assert sol.condition_i_satisfied
    np.testing.assert_allclose(sol.Y[0], sol.chi, atol=1e-14)
    np.testing.assert_allclose(sol.Y[1], -sol.chi, atol=1e-14)
    assert sol.trivial_deviation() < 1e-14


def test_forced_sphere_march_stays_on_the_sphere(sphere_ctx):
    sol = S.solve(sphere_ctx, S.SolverConfig(64, chi_start=0.25))
    assert sol.start_index > 2
    assert sol.trivial_deviation() < 1e-3
    np.testing.assert_allclose(sol.det[1:] / (math.pi**2 * sol.chi[1:] ** 2), 1.0, atol=1e-2)


def test_solve_is_deterministic(contexts):
    cfg = S.SolverConfig(64)
    a = S.solve(contexts["cos1"], cfg)
    b = S.solve(contexts["cos1"], cfg)
    assert np.array_equal(a.Y, b.Y) and np.array_equal(a.Yp, b.Yp)


def test_start_rule(contexts):
    q = S.solve(contexts["quartic"], S.SolverConfig(128))
    assert q.chi_start <= math.sin(math.pi / 4) + 1e-12
    assert q.chi[q.start_index + 1] > math.sin(math.pi / 4)
    c = S.solve(contexts["cos1"], S.SolverConfig(128))
    assert not c.condition_i_satisfied and c.start_index == 2


def test_residuals_of_a_converged_run(cos1_solution):
    ctx = cos1_solution.ctx
    for p in (0.25, 0.5, 0.75, 1.0):
        r = S.residual(cos1_solution, p)
        assert abs(r[0]) < 1e-4 * ctx.R**3
        assert abs(r[1]) < 1e-4 * ctx.I


def test_residual_of_exact_sphere_vanishes(sphere_solution):
    for p in (0.3, 1.0):
        np.testing.assert_allclose(S.residual(sphere_solution, p), 0.0, atol=1e-12)


def _tilted(sol, eps):
    """Y1 += eps * chi: keeps Y(0) on the envelope, breaks the moment balance."""
    Y, Yp = sol.Y.copy(), sol.Yp.copy()
    Y[0] += eps * sol.chi
    Yp[0] += eps
    return S.Solution(sol.chi, Y, Yp, sol.ctx, sol.det, sol.start_index,
                      sol.condition_i_satisfied)


def test_corrupted_solution_fails_the_residual(cos1_solution):
    I = cos1_solution.ctx.I
    bad = _tilted(cos1_solution, 0.01)
    worst = max(np.abs(S.residual(bad, p)).max() for p in (0.25, 0.5, 0.75, 1.0))
    assert worst > 10 * 1e-4 * I


def test_offset_start_is_not_a_valid_body(cos1_solution):
    sol = cos1_solution
    Y = sol.Y.copy()
    Y[0] += 0.01
    bad = S.Solution(sol.chi, Y, sol.Yp, sol.ctx, sol.det, sol.start_index,
                     sol.condition_i_satisfied)
    with pytest.raises((GeometryError, NumericError)):
        S.residual(bad, 0.5)


def test_residual_rejects_bad_section(sphere_solution):
    with pytest.raises(ValueError):
        S.residual(sphere_solution, 0.0)


def test_cosine_n2_stalls_near_the_pole():
    ctx = K.KernelContext(build_envelope(CurvatureProfile.cosine_odd(2, 0.5)))
    with pytest.raises(SolverStall) as info:
        S.solve(ctx, S.SolverConfig(128))
    exc = info.value
    assert 0.9 < exc.chi < 1.0
    assert exc.partial is not None and exc.partial.chi[-1] < exc.chi


def test_interpolant_reproduces_nodes(cos1_solution):
    for j, spl in enumerate(cos1_solution.interpolant()):
        np.testing.assert_allclose(spl(cos1_solution.chi), cos1_solution.Y[j], atol=1e-14)


def test_solution_csv(tmp_path, cos1_solution):
    path = tmp_path / "sol.csv"
    S.write_csv(cos1_solution, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["chi", "Y1", "Y2", "Y1p", "Y2p", "detA", "r1", "r2"]
    assert len(rows) == cos1_solution.chi.size + 1


@settings(max_examples=4, deadline=None)
@given(c=st.floats(0.01, 0.1))
def test_branches_monotone_for_small_amplitude(c):
    ctx = K.KernelContext(build_envelope(CurvatureProfile.cosine_odd(1, c)))
    sol = S.solve(ctx, S.SolverConfig(64))
    assert np.all(np.diff(sol.Y[0]) > 0)
    assert np.all(np.diff(sol.Y[1]) < 0)


def test_tube_deviation_is_proportional_to_amplitude():
    devs = []
    for c in (0.05, 0.1):
        ctx = K.KernelContext(build_envelope(CurvatureProfile.cosine_odd(1, c)))
        devs.append(S.solve(ctx, S.SolverConfig(64)).trivial_deviation())
    assert devs[1] / devs[0] == pytest.approx(2.0, rel=0.1)


def test_quartic_response_becomes_linear_as_amplitude_shrinks():
    devs = []
    for c in (0.03125, 0.0625, 0.125):
        ctx = K.KernelContext(build_envelope(CurvatureProfile.piecewise_quartic(c)))
        devs.append(S.solve(ctx, S.SolverConfig(128)).trivial_deviation())
    r_small, r_big = devs[1] / devs[0], devs[2] / devs[1]
    assert 2.0 < r_small < r_big < 2.1
