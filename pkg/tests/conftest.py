import math

import numpy as np
import pytest

from floatbody import kernel as K
from floatbody import solver as S
from floatbody.envelope import CurvatureProfile, build_envelope

FAMILIES = {
    "quartic": CurvatureProfile.piecewise_quartic(0.5),
    "cos1": CurvatureProfile.cosine_odd(1, 0.5),
    "cos3": CurvatureProfile.cosine_odd(3, 0.4),
}


@pytest.fixture(scope="session")
def sphere_ctx():
    return K.KernelContext(build_envelope(CurvatureProfile.zero()))


@pytest.fixture(scope="session")
def envelopes():
    return {k: build_envelope(p) for k, p in FAMILIES.items()}


@pytest.fixture(scope="session")
def contexts(envelopes):
    return {k: K.KernelContext(e) for k, e in envelopes.items()}


@pytest.fixture(scope="session")
def sphere_solution(sphere_ctx):
    return S.solve(sphere_ctx, S.SolverConfig(256))


@pytest.fixture(scope="session")
def cos1_solution(contexts):
    return S.solve(contexts["cos1"], S.SolverConfig(256))


@pytest.fixture(scope="session")
def quartic_solution(contexts):
    return S.solve(contexts["quartic"], S.SolverConfig(256))


def admissible_points(env, n, seed=0):
    """(alpha, chi, y) triples with heights near the two contour branches.

    The rng here only picks test points; nothing in the package is random.
    """
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < n:
        chi = rng.uniform(0.15, 0.95)
        alpha = chi * rng.uniform(0.1, 0.9)
        j = len(pts) % 2
        y = float(env.b(0.0)) + (1 - 2 * j) * alpha * (1.0 + 0.1 * rng.uniform(-1, 1))
        pts.append((alpha, chi, y))
    return pts


def unit_circle_contour(n=512):
    from floatbody.shape import Contour

    t = np.linspace(0.0, math.pi, n + 1)
    x = np.sin(t)
    x[0] = x[-1] = 0.0
    y = np.cos(t)
    return Contour(x, y, np.abs(y), np.where(t <= 0.5 * math.pi, 1, 2))
