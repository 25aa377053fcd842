"""Water envelopes built from a signed radius-of-curvature profile.

A profile ``rho(theta)`` gives the radius of curvature of the envelope at
tangent angle ``theta``.  Integrating it yields the envelope coordinates

    A(theta) = int_theta^{pi/2} rho cos,    B(theta) = int_theta^{pi/2} rho sin

which are used in the sine variable ``phi = sin(theta)`` as ``a(phi)`` and
``b(phi)``.  The kernel needs ``atilde = a / sqrt(1 - phi**2)`` and ``b`` with
three derivatives, so both are stored as piecewise Chebyshev series fitted
to quadrature samples (pieces split where the profile is not smooth).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.integrate import quad
from scipy.interpolate import make_interp_spline

from .errors import ProfileError

HALF_PI = 0.5 * math.pi

#: constant balancing the quartic profile so that int rho cos = 0
QUARTIC_BALANCE = 85.0 / 84.0

FAMILIES = ("zero", "cosine_odd", "piecewise_quartic", "tabulated")


@dataclass(frozen=True)
class CurvatureProfile:
    """Signed radius of curvature of the water envelope.

    Parameters
    ----------
    family : str
        One of ``zero``, ``cosine_odd`` (``c cos((2n+1) theta)``),
        ``piecewise_quartic`` (zero up to ``pi/4``, then
        ``c (sin^2 4theta - 85/84 sin^2 8theta)``) or ``tabulated``.
    c : float
        Amplitude.
    n : int
        Harmonic index for ``cosine_odd``.
    knots : tuple of (theta, rho) pairs
        Samples for ``tabulated``; interpolated by a quintic spline.
    """

    family: str = "zero"
    c: float = 0.0
    n: int = 1
    knots: tuple = ()
    _spline: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ProfileError(f"unknown profile family {self.family!r}")
        if self.family == "cosine_odd" and (int(self.n) != self.n or self.n < 1):
            raise ProfileError("cosine_odd needs a positive integer n")
        if self.family == "tabulated":
            pts = np.asarray(self.knots, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 6:
                raise ProfileError("tabulated profile needs >= 6 (theta, rho) knots")
            if pts[0, 0] > 0.0 or pts[-1, 0] < HALF_PI or np.any(np.diff(pts[:, 0]) <= 0):
                raise ProfileError("tabulated knots must increase and cover [0, pi/2]")
            object.__setattr__(self, "_spline", make_interp_spline(pts[:, 0], pts[:, 1], k=5))

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def cosine_odd(cls, n, c):
        return cls("cosine_odd", c=float(c), n=int(n))

    @classmethod
    def piecewise_quartic(cls, c):
        return cls("piecewise_quartic", c=float(c))

    @classmethod
    def tabulated(cls, knots):
        return cls("tabulated", knots=tuple((float(t), float(r)) for t, r in knots))

    def scaled(self, factor):
        if self.family == "tabulated":
            return CurvatureProfile.tabulated([(t, factor * r) for t, r in self.knots])
        return CurvatureProfile(self.family, c=self.c * factor, n=self.n)

    @property
    def breaks(self):
        """Interior angles where rho is only piecewise smooth."""
        if self.family == "piecewise_quartic":
            return (0.25 * math.pi,)
        return ()

    def _raw(self, theta):
        t = np.asarray(theta, dtype=float)
        if self.family == "zero":
            return np.zeros_like(t)
        if self.family == "cosine_odd":
            return self.c * np.cos((2 * self.n + 1) * t)
        if self.family == "piecewise_quartic":
            s4 = np.sin(4.0 * t)
            s8 = np.sin(8.0 * t)
            val = self.c * (s4 * s4 - QUARTIC_BALANCE * s8 * s8)
            return np.where(t <= 0.25 * math.pi, 0.0, val)
        return self._spline(t)

    def __call__(self, theta):
        t = np.asarray(theta, dtype=float)
        if np.any(t < -1e-15) or np.any(t > HALF_PI + 1e-15):
            raise ValueError("theta must lie in [0, pi/2]")
        out = self._raw(np.clip(t, 0.0, HALF_PI))
        return float(out) if out.ndim == 0 else out

    def alpha1(self):
        """Largest phi such that rho vanishes on [0, arcsin(phi)]."""
        if self.family == "zero":
            return 1.0
        if self.family == "cosine_odd":
            return 0.0 if self.c != 0.0 else 1.0
        if self.family == "piecewise_quartic":
            return math.sin(0.25 * math.pi) if self.c != 0.0 else 1.0
        th = np.linspace(0.0, HALF_PI, 20001)
        r = np.abs(self._raw(th))
        scale = max(r.max(), 1e-300)
        nz = np.nonzero(r > 1e-13 * scale)[0]
        if len(nz) == 0:
            return 1.0
        return 0.0 if nz[0] == 0 else math.sin(th[nz[0] - 1])


@dataclass(frozen=True)
class ConstraintReport:
    closure_residual: float  # int_0^{pi/2} rho cos, must vanish so that a(0) = 0
    rho_end: float  # rho(pi/2), must vanish
    alpha1: float

    def ok(self, tol=1e-8):
        return abs(self.closure_residual) <= tol and abs(self.rho_end) <= tol


def _integrate(f, lo, hi, breaks=()):
    """Signed int_lo^hi f, split at profile break points."""
    if hi < lo:
        return -_integrate(f, hi, lo, breaks)
    pts = [lo] + [b for b in breaks if lo < b < hi] + [hi]
    total = 0.0
    for p, q in zip(pts[:-1], pts[1:]):
        if q > p:
            total += quad(f, p, q, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return total


def check_constraints(profile):
    residual = _integrate(lambda t: profile._raw(t) * math.cos(t), 0.0, HALF_PI, profile.breaks)
    return ConstraintReport(
        closure_residual=residual,
        rho_end=float(profile._raw(HALF_PI)),
        alpha1=profile.alpha1(),
    )


def _fit(func, lo, hi, floor=0.0, tol=1e-14):
    """Chebyshev coefficients of ``func`` on [lo, hi], chopped at round-off.

    Coefficients below ``floor`` (an absolute noise level) are dropped.
    """
    for deg in (32, 64, 128, 256):
        coef = C.chebinterpolate(lambda t: func(lo + 0.5 * (t + 1.0) * (hi - lo)), deg)
        cut = max(tol * np.abs(coef).max(), floor)
        if np.abs(coef[-4:]).max() <= cut:
            break
    keep = np.nonzero(np.abs(coef) > max(1e-16 * np.abs(coef).max(), floor))[0]
    if len(keep) == 0:
        return np.zeros(1)
    return coef[: keep[-1] + 1]


def _stack(coef, lo, hi):
    """Coefficient columns of a series and its first three derivatives."""
    cols = [coef]
    s = 2.0 / (hi - lo)
    for k in range(1, 4):
        cols.append(C.chebder(coef, k) * s**k if len(coef) > k else np.zeros(1))
    width = max(len(c) for c in cols)
    out = np.zeros((width, 4))
    for k, c in enumerate(cols):
        out[: len(c), k] = c
    return out


class _Piece:
    """One smooth piece ``f = E(phi) + sqrt(1 - phi^2) O(phi)`` on [lo, hi].

    Near the pole an even profile makes ``atilde`` and ``b`` behave like
    ``(1 - phi)^{3/2}``; splitting into parts even and odd about
    ``theta = pi/2`` keeps both ``E`` and ``O`` analytic in ``phi``.
    """

    def __init__(self, lo, hi, even, odd):
        self.lo, self.hi = lo, hi
        self.even = _stack(even, lo, hi)
        self.odd = None if odd is None else _stack(odd, lo, hi)

    def __call__(self, phi, order=3):
        t = (2.0 * phi - self.lo - self.hi) / (self.hi - self.lo)
        out = C.chebval(t, self.even[:, : order + 1])
        if self.odd is None:
            return out
        o = C.chebval(t, self.odd[:, : order + 1])
        p = np.minimum(phi, 1.0 - 1e-14)
        s = np.sqrt((1.0 - p) * (1.0 + p))
        s1 = -p / s
        s2 = -1.0 / s**3
        if order >= 3:
            s3 = -3.0 * p / s**5
            out[3] += s3 * o[0] + 3.0 * s2 * o[1] + 3.0 * s1 * o[2] + s * o[3]
        if order >= 2:
            out[2] += s2 * o[0] + 2.0 * s1 * o[1] + s * o[2]
        if order >= 1:
            out[1] += s1 * o[0] + s * o[1]
        out[0] += s * o[0]
        return out


class Envelope:
    """Evaluable water envelope; immutable after construction.

    ``derivs(phi)`` returns two ``(4, ...)`` arrays holding ``atilde`` and
    ``b`` with their first three derivatives in ``phi``.
    """

    def __init__(self, profile, report=None):
        self.profile = profile
        self.report = report if report is not None else check_constraints(profile)
        self.alpha1 = self.report.alpha1
        self.condition_i_satisfied = self.alpha1 > 0.0
        edges = [0.0] + [math.sin(t) for t in profile.breaks] + [1.0]
        self._edges = np.asarray(edges)
        self._pieces = []
        split = profile.family in ("cosine_odd", "piecewise_quartic")
        for lo, hi in zip(edges[:-1], edges[1:]):
            pa = self._fit_piece(self._atilde_theta, lo, hi, split and hi == 1.0)
            pb = self._fit_piece(self._B, lo, hi, split and hi == 1.0)
            self._pieces.append((pa, pb))
        # an odd part on the last piece means atilde, b ~ (1 - phi)^{3/2}
        # and a b'' that blows up at the pole
        last_a, last_b = self._pieces[-1]
        self.pole_singular = last_a.odd is not None or last_b.odd is not None
        grid = np.linspace(0.0, 1.0, 4097)
        at, b = self.derivs(grid)
        a = at[0] * np.sqrt(1.0 - grid**2)
        self.delta = float(max(np.abs(a).max(), np.abs(b[0]).max()))

    @staticmethod
    def _fit_piece(f, lo, hi, split):
        probe = [f(math.asin(p)) for p in np.linspace(lo, hi, 17)]
        floor = 1e-15 * max(max(abs(v) for v in probe), 1e-300)
        if not split:
            return _Piece(lo, hi, _fit(np.vectorize(lambda p: f(math.asin(p))), lo, hi, floor), None)

        def even(p):
            t = math.asin(p)
            return 0.5 * (f(t) + f(math.pi - t))

        def odd(p):
            t = math.asin(p)
            return 0.5 * (f(t) - f(math.pi - t)) / math.cos(t)

        ce = _fit(np.vectorize(even), lo, hi, floor)
        co = _fit(np.vectorize(odd), lo, hi, floor)
        if not np.any(co):
            co = None
        return _Piece(lo, hi, ce, co)

    # direct quadrature (angle variable), used for fitting and validation;
    # angles past pi/2 use the analytic continuation of rho
    def _A(self, theta):
        p = self.profile
        return _integrate(lambda t: p._raw(t) * math.cos(t), theta, HALF_PI, p.breaks)

    def _B(self, theta):
        p = self.profile
        return _integrate(lambda t: p._raw(t) * math.sin(t), theta, HALF_PI, p.breaks)

    def _atilde_theta(self, theta):
        return self._A(theta) / math.cos(theta)

    def a_direct(self, phi):
        """a(phi) by adaptive quadrature in the angle variable."""
        return self._A(math.asin(phi))

    def b_direct(self, phi):
        return self._B(math.asin(phi))

    def derivs(self, phi, order=3):
        """``atilde`` and ``b`` with derivatives up to ``order`` (<= 3)."""
        phi = np.asarray(phi, dtype=float)
        flat = phi.ravel()
        rows = order + 1
        if len(self._pieces) == 1:
            pa, pb = self._pieces[0]
            at, bb = pa(flat, order), pb(flat, order)
        else:
            at = np.empty((rows, flat.size))
            bb = np.empty((rows, flat.size))
            idx = np.clip(np.searchsorted(self._edges, flat, side="right") - 1, 0, len(self._pieces) - 1)
            for k, (pa, pb) in enumerate(self._pieces):
                m = idx == k
                if m.any():
                    at[:, m] = pa(flat[m], order)
                    bb[:, m] = pb(flat[m], order)
        return at.reshape((rows,) + phi.shape), bb.reshape((rows,) + phi.shape)

    def atilde(self, phi, order=0):
        return self.derivs(phi, order)[0][order]

    def b(self, phi, order=0):
        return self.derivs(phi, order)[1][order]

    def a(self, phi):
        phi = np.asarray(phi, dtype=float)
        return self.atilde(phi) * np.sqrt(1.0 - phi**2)

    def da(self, phi):
        """a'(phi); equals -rho(arcsin phi)."""
        phi = np.asarray(phi, dtype=float)
        at = self.derivs(phi, 1)[0]
        root = np.sqrt(1.0 - phi**2)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = at[1] * root - at[0] * phi / root
        return np.where(phi >= 1.0, 0.0, out)

    def table(self, n=513):
        """Columns phi, a, b, atilde, a', b', b'' on a uniform grid."""
        phi = np.linspace(0.0, 1.0, n)
        at, b = self.derivs(phi)
        return {
            "phi": phi,
            "a": at[0] * np.sqrt(1.0 - phi**2),
            "b": b[0],
            "atilde": at[0],
            "da": self.da(phi),
            "db": b[1],
            "d2b": b[2],
        }


def build_envelope(profile, tol=1e-8):
    """Build and validate the envelope of ``profile``.

    Raises
    ------
    ProfileError
        If the closure integral or rho(pi/2) exceeds ``tol``.
    """
    report = check_constraints(profile)
    if not report.ok(tol):
        raise ProfileError(
            f"profile rejected: int rho cos = {report.closure_residual:.3e}, "
            f"rho(pi/2) = {report.rho_end:.3e}"
        )
    return Envelope(profile, report)


def write_table(envelope, path, n=513):
    """Envelope CSV with columns phi, a, b, atilde, a', b', b''."""
    t = envelope.table(n)
    cols = ["phi", "a", "b", "atilde", "da", "db", "d2b"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in zip(*(t[c] for c in cols)):
            w.writerow([repr(float(v)) for v in row])
