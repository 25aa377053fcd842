"""Geometric kernel of the neutral-floating initial value problem.

Notation follows the sine variables: ``alpha`` labels the horizontal slice
of the body at height ``y = Y_j(alpha)``, ``phi`` (or ``chi``) labels the
tilted water section.  For fixed ``y`` let

    x(phi; y) = a(phi) + (y - b(phi)) sqrt(1 - phi^2) / phi,   g = x^2.

Then ``Z^2 = g(alpha) - g(phi)`` and the desingularised half-chord is
``Q = phi * P`` with the divided difference ``P = (g(alpha) - g(phi)) /
(phi - alpha)``.  Everything downstream (``G``, its chi-derivatives, the
boundary matrix and the history kernel) is expressed through ``P``.

``g`` is evaluated as ``u^2 (1 - phi^2)`` with ``u = atilde + (y - b)/phi``,
which stays smooth up to the pole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import GeometryError

#: sign pattern (-1)^{i+j+1} of the centroid (i=1) and inertia (i=2)
#: equations, rows i, columns j
SIGN = np.array([[-1.0, 1.0], [1.0, -1.0]])

# int_0^1 (1 - G^2)^{1/2} dG and int_0^1 (1 - G^2)^{3/2} dG
_W1 = math.pi / 4.0
_W3 = 3.0 * math.pi / 16.0
HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class KernelContext:
    """Immutable bundle of envelope, sphere radius and quadrature settings.

    ``I`` is the second moment of a radius-``R`` disk about a diameter, the
    moment every water section must share.  The inertia equation integrates
    over half chords, so its right-hand side uses ``I_rhs = I / 2``.
    """

    envelope: object
    R: float = 1.0
    gamma_order: int = 64
    t_order: int = 8
    near: float = 0.05
    h_fd: float = 3e-5

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be positive")

    @property
    def I(self):
        return math.pi * self.R**4 / 4.0

    @property
    def I_rhs(self):
        return 0.5 * self.I


@lru_cache(maxsize=None)
def gamma_rule(n):
    """Nodes ``s = 1 - Gamma^2`` and weights for int_0^1 sqrt(1-G^2) f(G^2) dG.

    Gauss-Chebyshev rule of the second kind folded onto [0, 1]; exact when
    ``f`` is a polynomial in ``Gamma^2`` of degree < n.
    """
    k = np.arange(1, n + 1)
    th = k * math.pi / (n + 1)
    x = np.cos(th)
    w = math.pi / (n + 1) * np.sin(th) ** 2
    keep = x >= -1e-15
    s = 1.0 - x[keep] ** 2
    w = np.where(np.abs(x[keep]) < 1e-15, 0.5 * w[keep], w[keep])
    return s, w


@lru_cache(maxsize=None)
def _graded01(levels, n=8):
    """Gauss-Legendre on [0, 1] split geometrically towards 0."""
    x, w = np.polynomial.legendre.leggauss(n)
    edges = [0.0] + [2.0 ** (-m) for m in range(levels, -1, -1)]
    ts, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        ts.append(0.5 * (lo + hi) + 0.5 * (hi - lo) * x)
        ws.append(0.5 * (hi - lo) * w)
    return np.concatenate(ts), np.concatenate(ws)


def gamma_nodes(ctx, alpha, chi):
    """Per-slice rule for int_0^1 sqrt(1 - Gamma^2) f dGamma as (s, w).

    Smooth envelopes share the folded Chebyshev rule.  Otherwise the
    integral is taken in ``psi = arcsin(Gamma)`` (weight cos^2 psi), split
    where ``phi`` crosses an envelope break, and the first panel is graded
    towards ``psi = 0``: for an envelope whose curvature of ``b`` blows up
    at the pole the integrand varies on the scale ``sqrt(1 - chi)`` there.
    Returns arrays of shape ``alpha.shape + (n,)``.
    """
    alpha = np.asarray(alpha, float)
    env = ctx.envelope
    breaks = env._edges[1:-1]
    singular = getattr(env, "pole_singular", False)
    if not singular and len(breaks) == 0:
        s, w = gamma_rule(ctx.gamma_order)
        return np.broadcast_to(s, alpha.shape + s.shape), np.broadcast_to(w, alpha.shape + w.shape)
    scale = math.sqrt(max(1.0 - chi, 0.0))
    levels = 2
    if singular:
        levels = max(2, int(math.ceil(math.log2(1.0 / max(scale, 1e-9)))) + 1)
    # split angle per slice; pi/4 when no break falls inside (alpha, chi)
    edges = [np.zeros_like(alpha)]
    for bp in breaks:
        with np.errstate(divide="ignore", invalid="ignore"):
            sb = (bp - alpha) / (chi - alpha)
        inside = (alpha < bp) & (bp < chi)
        edges.append(np.where(inside, np.arcsin(np.sqrt(np.clip(1.0 - sb, 0.0, 1.0))), np.nan))
    edges.append(np.full_like(alpha, HALF_PI))
    edges = np.stack(edges)
    if len(breaks) == 0:
        edges = np.concatenate([edges[:1], np.full_like(alpha, 0.25 * math.pi)[None], edges[1:]])
    else:
        # unused breaks fall back to evenly spread dummy edges
        dummy = np.linspace(0.0, HALF_PI, len(breaks) + 2)[1:-1, None]
        edges[1:-1] = np.where(np.isnan(edges[1:-1]), dummy, edges[1:-1])
        edges = np.sort(edges, axis=0)
    tg, wg = _graded01(levels)
    tm, wm = _gl01(16)
    psis, wts = [], []
    for k, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        t, wt = (tg, wg) if k == 0 else (tm, wm)
        width = (hi - lo)[..., None]
        psis.append(lo[..., None] + width * t)
        wts.append(width * wt)
    psi = np.concatenate(psis, axis=-1)
    c = np.cos(psi)
    return c * c, np.concatenate(wts, axis=-1) * c * c


@lru_cache(maxsize=None)
def _gl01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _g_terms(phi, y, ev):
    """g, g', g'' at ``phi`` for fixed ``y`` from envelope values ``ev``."""
    at, bb = ev
    m = y - bb[0]
    inv = 1.0 / phi
    u = at[0] + m * inv
    u1 = at[1] - bb[1] * inv - m * inv**2
    u2 = at[2] - bb[2] * inv + 2.0 * bb[1] * inv**2 + 2.0 * m * inv**3
    v = (1.0 - phi) * (1.0 + phi)
    v1 = -2.0 * phi
    g = u * u * v
    g1 = 2.0 * u * u1 * v + u * u * v1
    g2 = 2.0 * (u1 * u1 + u * u2) * v + 4.0 * u * u1 * v1 - 2.0 * u * u
    return g, g1, g2


def _p_stack(alpha, phi, ys, ctx):
    """P, dP/dphi, d2P/dphi2 for several heights sharing (alpha, phi).

    ``alpha`` and ``phi`` are flat arrays of equal length, ``ys`` a list of
    such arrays.  Returns one ``(P, P', P'')`` triple per height together
    with ``(b, b', b'')`` at ``phi``.
    """
    env = ctx.envelope
    h = phi - alpha
    near = h < ctx.near * alpha
    far = ~near
    ev_phi = env.derivs(phi, 2)
    ev_alpha = None
    if far.any():
        at, bb = env.derivs(alpha[far], 0)
        ev_alpha = (np.vstack([at, at, at]), np.vstack([bb, bb, bb]))
    if near.any():
        # P = -int_0^1 g'(alpha + t h) dt,  P' = -int_0^1 t g''(alpha + t h) dt
        an, hn = alpha[near], h[near]
        tx, tw = _gl01(ctx.t_order)
        cuts = [np.zeros_like(an)]
        for bp in env._edges[1:-1]:
            with np.errstate(divide="ignore", invalid="ignore"):
                cuts.append(np.where(hn > 0, np.clip((bp - an) / hn, 0.0, 1.0), 0.0))
        cuts.append(np.ones_like(an))
        cuts = np.sort(np.stack(cuts), axis=0)
        panels = []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            t = lo[:, None] + (hi - lo)[:, None] * tx[None, :]
            w = (hi - lo)[:, None] * tw[None, :]
            pts = an[:, None] + t * hn[:, None]
            panels.append((t, w, pts, env.derivs(pts, 2)))
    out = []
    for y in ys:
        g, g1, g2 = _g_terms(phi, y, ev_phi)
        P = np.empty_like(h)
        P1 = np.empty_like(h)
        if ev_alpha is not None:
            ga = _g_terms(alpha[far], y[far], ev_alpha)[0]
            hf = h[far]
            P[far] = (ga - g[far]) / hf
            P1[far] = (-g1[far] - P[far]) / hf
        if near.any():
            yn = y[near][:, None]
            sp = np.zeros_like(an)
            sp1 = np.zeros_like(an)
            for t, w, pts, ev in panels:
                _, q1, q2 = _g_terms(pts, yn, ev)
                sp += np.sum(w * q1, axis=1)
                sp1 += np.sum(w * t * q2, axis=1)
            P[near] = -sp
            P1[near] = -sp1
        with np.errstate(divide="ignore", invalid="ignore"):
            P2 = np.where(h > 0, (-g2 - 2.0 * P1) / np.where(h > 0, h, 1.0), 0.0)
        out.append((P, P1, P2))
    return out, ev_phi[1][:3]


def _p_terms(alpha, phi, y, ctx):
    """P, dP/dphi, d2P/dphi2 and b, b', b'' at phi (broadcast arrays)."""
    alpha, phi, y = np.broadcast_arrays(
        np.asarray(alpha, float), np.asarray(phi, float), np.asarray(y, float)
    )
    shape = alpha.shape
    (pt,), bb = _p_stack(alpha.ravel(), phi.ravel(), [y.ravel()], ctx)
    return [q.reshape(shape) for q in (*pt, *bb)]


def _k_terms(i, P, P1, P2, m, b1, b2):
    """K = sqrt(P) (y - b)^i and its first two phi-derivatives."""
    if np.any(P <= 0):
        raise GeometryError("non-positive desingularised chord Q")
    sq = np.sqrt(P)
    sq1 = P1 / (2.0 * sq)
    sq2 = P2 / (2.0 * sq) - P1 * P1 / (4.0 * sq * P)
    if i == 1:
        mi, mi1, mi2 = m, -b1, -b2
    else:
        mi, mi1, mi2 = m * m, -2.0 * m * b1, 2.0 * b1 * b1 - 2.0 * m * b2
    return sq * mi, sq1 * mi + sq * mi1, sq2 * mi + 2.0 * sq1 * mi1 + sq * mi2


def _check_order(alpha, phi, strict=False):
    alpha = np.asarray(alpha, float)
    phi = np.asarray(phi, float)
    bad = (alpha <= 0) | (phi > 1.0 + 1e-15) | ((alpha >= phi) if strict else (alpha > phi))
    if np.any(bad):
        rel = "<" if strict else "<="
        raise ValueError(f"need 0 < alpha {rel} phi <= 1")


# ---------------------------------------------------------------------------
# point-wise geometric functions


def X(alpha, phi, y, ctx):
    """x-coordinate where the section of angle ``phi`` meets height ``y``."""
    phi = np.asarray(phi, float)
    if np.any(phi <= 0):
        raise ValueError("X is singular at phi = 0; use the limit value")
    env = ctx.envelope
    root = np.sqrt((1.0 - phi) * (1.0 + phi))
    return env.atilde(phi) * root + (np.asarray(y, float) - env.b(phi)) * root / phi


def P(alpha, phi, y, ctx):
    _check_order(alpha, phi)
    return _p_terms(alpha, phi, y, ctx)[0]


def Q(alpha, phi, y, ctx):
    """Q = Z^2 / (1 - alpha/phi), continuous up to alpha = phi."""
    q = np.asarray(phi, float) * P(alpha, phi, y, ctx)
    if np.any(q <= 0):
        raise GeometryError("water-section chord is imaginary (Q <= 0)")
    return q


def Q_derivs(alpha, phi, y, ctx):
    """Q and its first two derivatives in phi."""
    _check_order(alpha, phi)
    p, p1, p2 = _p_terms(alpha, phi, y, ctx)[:3]
    phi = np.asarray(phi, float)
    return phi * p, p + phi * p1, 2.0 * p1 + phi * p2


def Z(alpha, phi, y, ctx):
    q = Q(alpha, phi, y, ctx)
    return np.sqrt(q * (1.0 - np.asarray(alpha, float) / np.asarray(phi, float)))


# ---------------------------------------------------------------------------
# transformed kernel G and its chi-derivatives


def _g_pieces(i, alpha, chi, y, ctx):
    s, w = gamma_nodes(ctx, alpha, chi)
    alpha = np.asarray(alpha, float)[..., None]
    y = np.asarray(y, float)[..., None]
    d = chi - alpha
    phi = alpha + s * d
    p, p1, p2, b0, b1, b2 = _p_terms(alpha, phi, y, ctx)
    K, K1, K2 = _k_terms(i, p, p1, p2, y - b0, b1, b2)
    return s, w, d, K, K1, K2


def G(i, j, alpha, chi, y, ctx):
    """Semi-integrated kernel G_ij(alpha, chi, y); zero on the diagonal.

    ``j`` only names the branch; its influence enters through ``y``.
    """
    _check_order(alpha, chi)
    if alpha == chi:
        return 0.0
    s, w, d, K, _, _ = _g_pieces(i, alpha, chi, y, ctx)
    return float(2.0 * d[..., 0] * np.sum(w * K, axis=-1))


def dG(i, j, alpha, chi, y, ctx):
    """dG_ij/dchi."""
    _check_order(alpha, chi)
    s, w, d, K, K1, _ = _g_pieces(i, alpha, chi, y, ctx)
    return float(np.sum(w * (2.0 * K + 2.0 * d * s * K1), axis=-1))


def d2G(i, j, alpha, chi, y, ctx):
    """d^2 G_ij / dchi^2 by differentiation under the Gamma integral."""
    _check_order(alpha, chi)
    s, w, d, _, K1, K2 = _g_pieces(i, alpha, chi, y, ctx)
    return float(np.sum(w * (4.0 * s * K1 + 2.0 * d * s * s * K2), axis=-1))


def d2G_history(alpha, chi, Y, ctx):
    """Second chi-derivative of all four G_ij at many slices at once.

    Parameters
    ----------
    alpha : (m,) array, strictly below ``chi``
    Y : (2, m) array of Y_j(alpha)

    Returns
    -------
    (2, 2, m) array indexed [i, j, k].
    """
    alpha = np.asarray(alpha, float)
    s, w = gamma_nodes(ctx, alpha, chi)
    m = alpha.size
    d = (chi - alpha)[:, None]
    phi = alpha[:, None] + s * d
    al = np.broadcast_to(alpha[:, None], phi.shape).ravel()
    ys = [np.broadcast_to(Y[j][:, None], phi.shape).ravel() for j in range(2)]
    terms, (b0, b1, b2) = _p_stack(al, phi.ravel(), ys, ctx)
    b0, b1, b2 = (q.reshape(phi.shape) for q in (b0, b1, b2))
    out = np.empty((2, 2, m))
    for j, (p, p1, p2) in enumerate(terms):
        p, p1, p2 = (q.reshape(phi.shape) for q in (p, p1, p2))
        y = Y[j][:, None]
        for i in (1, 2):
            _, K1, K2 = _k_terms(i, p, p1, p2, y - b0, b1, b2)
            out[i - 1, j] = np.sum(w * (4.0 * s * K1 + 2.0 * d * s * s * K2), axis=1)
    return out


# ---------------------------------------------------------------------------
# boundary matrix, history kernel and right-hand side


def _diag(chi, Y, ctx):
    Y = np.asarray(Y, float)
    chi_arr = np.full(2, float(chi))
    p, p1, _, b0, b1, b2 = _p_terms(chi_arr, chi_arr, Y, ctx)
    return p, p1, Y - b0, b1, b2


def a_matrix(chi, Y, ctx):
    """Boundary matrix a_ij = dG_ij/dchi at alpha = chi (unsigned).

    Equals (pi/2) chi^{-1/2} Q^{1/2} (Y_j - b)^i with Q taken on the
    diagonal.
    """
    if not chi > 0:
        raise ValueError("chi must be positive")
    p, _, m, _, _ = _diag(chi, Y, ctx)
    if np.any(p <= 0):
        raise GeometryError(f"Q <= 0 on the diagonal at chi={chi:.6g}")
    sq = np.sqrt(p)
    return 0.5 * math.pi * np.vstack([sq * m, sq * m * m])


def diag_d2G(chi, Y, ctx):
    """d^2 G_ij / dchi^2 in the limit alpha -> chi (continuous extension)."""
    p, p1, m, b1, b2 = _diag(chi, Y, ctx)
    out = np.empty((2, 2))
    for i in (1, 2):
        _, K1, _ = _k_terms(i, p, p1, np.zeros(2), m, b1, b2)
        out[i - 1] = 4.0 * _W3 * K1
    return out


def c_kernel(alpha, chi, y, yp, ctx):
    """History kernel c_ij = Y'_j(alpha) d^2 G_ij / dchi^2 (unsigned)."""
    _check_order(alpha, chi, strict=True)
    y = np.asarray(y, float)
    D = d2G_history(np.array([float(alpha)]), chi, y[:, None], ctx)[..., 0]
    return D * np.asarray(yp, float)[None, :]


def F(chi, ctx):
    """Semi-integral of the right-hand side: (0, (32/35) I_rhs chi^{7/2})."""
    return np.array([0.0, 32.0 / 35.0 * ctx.I_rhs * chi**3.5])


def f_rhs(chi, ctx):
    """Second derivative of F: (0, 8 I_rhs chi^{3/2})."""
    return np.array([0.0, 8.0 * ctx.I_rhs * max(chi, 0.0) ** 1.5])


def det_scale(chi, ctx):
    """Trivial-solution size of det A, used for the stall threshold."""
    return math.pi**2 * chi**2 * ctx.R**5
