"""March the Volterra-type IVP for the contour heights Y_1, Y_2.

The unknown is the pair of slice heights ``Y_j(chi)`` (branch 1 above the
bottom point, branch 2 below) together with ``Y'_j``.  On a grid
``chi_k`` the steps are

* emplace the spherical segment up to ``chi_start``;
* for every further node, evaluate the history integral with the
  trapezoid rule over the already known nodes, treat its endpoint term
  implicitly, and advance with an Euler predictor and one trapezoid
  corrector (PECE).

Both trapezoid rules act in the grid parameter ``tau`` (see
:func:`make_grid`), so that ``dY/dtau = Y' dchi/dtau`` is what gets
integrated.  At the pole ``dchi/dtau = 0`` for the angle grid, which keeps
the last step finite even when ``Y'`` grows without bound there.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import kernel as K
from .errors import GeometryError, NumericError, SolverStall

#: (-1)^{j+1} for branches j = 1, 2
BRANCH = np.array([1.0, -1.0])
GRIDS = ("angle", "uniform")


def make_grid(n, kind="angle"):
    """Nodes on [0, 1] with ``n`` intervals, uniform in a parameter ``tau``.

    Returns ``(chi, dchi/dtau, tau step)``.  ``angle`` takes
    tau = arcsin(chi): trajectories are smooth in the angle, while in chi
    they may carry (1 - chi)^{3/2} terms at the pole, and the steps shrink
    there accordingly.
    """
    if kind == "uniform":
        return np.linspace(0.0, 1.0, n + 1), np.ones(n + 1), 1.0 / n
    tau = np.linspace(0.0, 0.5 * math.pi, n + 1)
    chi = np.sin(tau)
    jac = np.cos(tau)
    chi[-1], jac[-1] = 1.0, 0.0
    return chi, jac, 0.5 * math.pi / n


@dataclass(frozen=True)
class SolverConfig:
    """Grid and control parameters of a march.

    ``chi_start=None`` picks ``alpha1`` when the envelope vanishes on an
    initial arc and ``fallback_start`` otherwise.  The march starts from the
    last grid node not beyond that value (at least node 2).
    """

    n_intervals: int = 1024
    grid: str = "angle"
    chi_start: float | None = None
    fallback_start: float = 1e-3
    det_tol: float = 1e-6
    jump_tol: float = 0.05
    # jump_tol: largest predictor/corrector gap (in units of R) accepted
    # before the step is declared to have left the solution branch

    def __post_init__(self):
        if self.n_intervals < 4:
            raise ValueError("need at least 4 grid intervals")
        if self.grid not in GRIDS:
            raise ValueError(f"grid must be one of {GRIDS}")
        if self.chi_start is not None and not 0.0 <= self.chi_start < 1.0:
            raise ValueError("chi_start must lie in [0, 1)")


@dataclass
class Solution:
    chi: np.ndarray
    Y: np.ndarray
    Yp: np.ndarray
    ctx: K.KernelContext
    det: np.ndarray
    start_index: int
    condition_i_satisfied: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def chi_start(self):
        return float(self.chi[self.start_index])

    def interpolant(self):
        """C1 piecewise-cubic Hermite interpolants of Y_1, Y_2."""
        return [CubicHermiteSpline(self.chi, self.Y[j], self.Yp[j]) for j in range(2)]

    def trivial_deviation(self):
        """max_k |Y_j(chi_k) - Y_j(0) - (-1)^{j+1} R chi_k| over both branches."""
        ref = self.Y[:, :1] + self.ctx.R * BRANCH[:, None] * self.chi[None, :]
        return float(np.max(np.abs(self.Y - ref)))


def _start_index(chi, ctx, cfg):
    env = ctx.envelope
    if cfg.chi_start is not None:
        start = cfg.chi_start
    elif env.condition_i_satisfied:
        start = env.alpha1
    else:
        start = cfg.fallback_start
    # the alpha=0 history value is extrapolated from two interior nodes
    k = int(np.searchsorted(chi, start * (1.0 + 1e-12), side="right")) - 1
    return max(2, k), start


def _det_check(chi, A, ctx, cfg, partial):
    # det A starts at +pi^2 chi^2 R^5 on the sphere; a sign change means a
    # singular point was stepped over, so the comparison is signed
    det = float(np.linalg.det(A))
    floor = cfg.det_tol * K.det_scale(chi, ctx)
    if not det >= floor:
        raise SolverStall(
            f"boundary matrix nearly singular at chi={chi:.6g} (det={det:.3e})",
            chi=chi, det=det, partial=partial,
        )
    return det


def history(chi, alphas, Y, Yp, ctx, weights):
    """Trapezoid history sum over the known nodes, without the endpoint term.

    ``alphas`` starts at 0 and ``weights`` are the matching trapezoid
    weights (the last one including half of the step to ``chi``).  The
    kernel is not evaluated at ``alpha = 0`` but linearly extrapolated from
    the next two nodes.
    """
    D = K.d2G_history(alphas[1:], chi, Y[:, 1:], ctx)
    c = D * Yp[None, :, 1:]
    c0 = c[..., 0] - (c[..., 1] - c[..., 0]) * (alphas[1] - alphas[0]) / (alphas[2] - alphas[1])
    return weights[0] * c0 + (c * weights[1:]).sum(axis=-1)


def rhs(chi, y, H, ctx, h=0.0, cfg=None, partial=None):
    """Y'(chi) from the 2x2 system given the known history sum ``H``.

    ``H[i, j]`` holds the unsigned history integral of branch ``j`` in
    equation ``i``.  With ``h > 0`` the trapezoid endpoint weight
    ``h/2`` on the diagonal kernel is folded into the system matrix.
    Returns ``(Y', det A)``.
    """
    cfg = cfg or SolverConfig()
    y = np.asarray(y, float)
    A = K.a_matrix(chi, y, ctx)
    det = _det_check(chi, A, ctx, cfg, partial)
    M = A
    if h:
        M = A + 0.5 * h * K.diag_d2G(chi, y, ctx)
    M = K.SIGN * M
    b = K.f_rhs(chi, ctx) - (K.SIGN * H).sum(axis=1)
    yp = np.linalg.solve(M, b)
    if not np.all(np.isfinite(yp)):
        raise NumericError(f"non-finite slope at chi={chi:.6g}")
    return yp, det


def _start_values(chi, k0, ctx):
    """Y, Y' of the translated sphere on the nodes ``0..k0``."""
    y0 = float(ctx.envelope.b(0.0))
    Y = y0 + ctx.R * BRANCH[:, None] * chi[None, : k0 + 1]
    return Y, np.repeat(ctx.R * BRANCH[:, None], k0 + 1, axis=1)


def _march(ctx, cfg, grid, k0, Y, Yp, det):
    """Fill nodes ``k0 + 1 ..`` of ``Y``, ``Yp``, ``det`` in place."""
    chi, jac, htau = grid
    n = chi.size - 1
    wfull = htau * jac
    env = ctx.envelope

    def partial(k):
        return Solution(chi[: k + 1].copy(), Y[:, : k + 1].copy(), Yp[:, : k + 1].copy(),
                        ctx, det[: k + 1].copy(), k0, env.condition_i_satisfied,
                        {"stopped_at": float(chi[k])})

    for k in range(k0, n):
        c1 = chi[k + 1]
        # trapezoid weights in tau, first node halved, endpoint handled in rhs
        w = wfull[: k + 1].copy()
        w[0] *= 0.5
        h_end = htau * jac[k + 1]
        try:
            H = history(c1, chi[: k + 1], Y[:, : k + 1], Yp[:, : k + 1], ctx, w)
            y_pred = Y[:, k] + htau * jac[k] * Yp[:, k]
            yp_1, _ = rhs(c1, y_pred, H, ctx, h_end, cfg, None)
            y_corr = Y[:, k] + 0.5 * htau * (jac[k] * Yp[:, k] + jac[k + 1] * yp_1)
            yp_corr, d = rhs(c1, y_corr, H, ctx, h_end, cfg, None)
            gap = float(np.max(np.abs(y_corr - y_pred)))
            if gap > cfg.jump_tol * ctx.R:
                raise SolverStall(
                    f"predictor and corrector disagree by {gap:.3g} at chi={c1:.6g}; "
                    "the boundary matrix is close to singular", chi=float(c1), det=d)
        except SolverStall as exc:
            exc.partial = partial(k)
            raise
        except GeometryError as exc:
            raise GeometryError(f"{exc} (while stepping to chi={c1:.6g})") from exc
        Y[:, k + 1] = y_corr
        Yp[:, k + 1] = yp_corr
        det[k + 1] = d


def solve(ctx, cfg=None):
    """Integrate from the spherical initial segment to chi = 1."""
    cfg = cfg or SolverConfig()
    env = ctx.envelope
    n = cfg.n_intervals
    grid = make_grid(n, cfg.grid)
    chi = grid[0]
    Y = np.full((2, n + 1), np.nan)
    Yp = np.full((2, n + 1), np.nan)
    det = np.full(n + 1, np.nan)
    k0, start = _start_index(chi, ctx, cfg)
    Y[:, : k0 + 1], Yp[:, : k0 + 1] = _start_values(chi, k0, ctx)
    det[1 : k0 + 1] = [np.linalg.det(K.a_matrix(c, Y[:, k], ctx)) for k, c in enumerate(chi[1 : k0 + 1], 1)]
    _march(ctx, cfg, grid, k0, Y, Yp, det)

    diagnostics = {
        "n_intervals": n,
        "grid": cfg.grid,
        "chi_start": float(chi[k0]),
        "requested_start": float(start),
        "corrector_passes": 1,
        "endpoint_included": True,
        "min_det_ratio": float(np.nanmin(det[1:] / (math.pi**2 * chi[1:] ** 2 * ctx.R**5))),
    }
    return Solution(chi, Y, Yp, ctx, det, k0, env.condition_i_satisfied, diagnostics)


# ---------------------------------------------------------------------------
# independent check of the original moment conditions


def _half_chord(alpha, phi, y, ctx):
    """Z = sqrt(x(alpha)^2 - x(phi)^2) straight from the section geometry."""
    x_phi = K.X(alpha, phi, y, ctx)
    x_alpha = K.X(alpha, alpha, y, ctx)
    sq = x_alpha * x_alpha - x_phi * x_phi
    if np.any(sq < -1e-10 * np.maximum(x_alpha * x_alpha, 1e-300)):
        raise GeometryError(f"imaginary half chord below section phi={phi:.6g}")
    return np.sqrt(np.maximum(sq, 0.0))


def _moment_integrals(sol, phi, order):
    """Unsigned moment integrals [power-1, power-2] x [branch] at ``phi``."""
    ctx = sol.ctx
    b_phi = float(ctx.envelope.b(phi))
    # t-images of the grid knots below phi; the interpolant is smooth between them
    knots = sol.chi[(sol.chi > 0) & (sol.chi < phi)]
    tk = np.unique(np.concatenate([[0.0, 1.0], np.sqrt(1.0 - knots / phi)]))
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = tk[:-1, None], tk[1:, None]
    t = (0.5 * (lo + hi) + 0.5 * (hi - lo) * x).ravel()
    wt = (0.5 * (hi - lo) * w).ravel()
    alpha = phi * (1.0 - t * t)
    jac = 2.0 * phi * t * wt
    out = np.empty((2, 2))
    for j, spl in enumerate(sol.interpolant()):
        y = spl(alpha)
        base = _half_chord(alpha, phi, y, ctx) * spl.derivative()(alpha) * jac
        out[0, j] = np.sum(base * (y - b_phi))
        out[1, j] = np.sum(base * (y - b_phi) ** 2)
    return out


def residual(sol, phi, tol=1e-10):
    """(r1, r2): centroid balance and inertia mismatch at section ``phi``.

    Both moment integrals are evaluated directly from the half-chord ``Z``
    and the Hermite interpolant of the stored trajectory, independently of
    the transformed kernel.  ``alpha = phi (1 - t^2)`` removes the
    square-root behaviour of ``Z`` at ``alpha = phi``; Gauss-Legendre rules
    of two orders on every knot interval give the error check.  ``r2`` is
    returned in the same units as ``I``.
    """
    if not 0.0 < phi <= 1.0 + 1e-14:
        raise ValueError("phi must lie in (0, 1]")
    phi = min(float(phi), 1.0)
    lo = _moment_integrals(sol, phi, 8)
    hi = _moment_integrals(sol, phi, 12)
    scale = max(1.0, float(np.max(np.abs(hi))))
    if not np.all(np.isfinite(hi)) or np.max(np.abs(hi - lo)) > tol * scale:
        raise NumericError(f"residual quadrature did not settle at phi={phi:.6g}")
    out = (K.SIGN * hi).sum(axis=1)
    out[1] -= sol.ctx.I_rhs * phi**3
    return out


def residual_profile(sol, phis=None):
    """Residual pairs on a set of sections (default: every grid node > 0)."""
    phis = sol.chi[1:] if phis is None else np.asarray(phis, float)
    return np.array([residual(sol, p) for p in phis])


def write_csv(sol, path, residuals=None):
    """Dump chi, Y1, Y2, Y1', Y2', det A, r1, r2 (residuals optional)."""
    n = sol.chi.size
    r = np.full((n, 2), np.nan)
    if residuals is not None:
        r[1:] = residuals
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["chi", "Y1", "Y2", "Y1p", "Y2p", "detA", "r1", "r2"])
        for k in range(n):
            w.writerow([repr(float(v)) for v in (
                sol.chi[k], sol.Y[0, k], sol.Y[1, k], sol.Yp[0, k], sol.Yp[1, k],
                sol.det[k], r[k, 0], r[k, 1])])
