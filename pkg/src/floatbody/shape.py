"""Generating contour and surface of revolution of a floating body.

The contour point of branch ``j`` for section ``phi`` is
``((-1)^{j+1} X_j(phi, phi, Y_j(phi)), Y_j(phi))``.  Branch 1 is traversed
from its pole down to the equator node ``phi = 0`` and branch 2 from there
on to the other pole, so the contour runs pole to pole with ``x >= 0``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from shapely.geometry import LineString

from . import kernel as K
from .errors import InvalidShapeError

_AXIS_TOL = 1e-12


@dataclass(frozen=True)
class Contour:
    x: np.ndarray
    y: np.ndarray
    phi: np.ndarray
    branch: np.ndarray

    def __len__(self):
        return self.x.size

    def scaled(self, factor):
        return Contour(self.x * factor, self.y * factor, self.phi, self.branch)

    def points(self):
        return np.column_stack([self.x, self.y])


def _branch_x(sol, j):
    """(-1)^{j+1} X_j(phi, phi, Y_j(phi)) on the grid, with the phi = 0 limit."""
    env = sol.ctx.envelope
    chi = sol.chi
    sign = 1.0 - 2.0 * j
    x = np.empty_like(chi)
    inner = chi > 0
    x[inner] = K.X(chi[inner], chi[inner], sol.Y[j, inner], sol.ctx)
    # at phi = 0 the ratio (Y - b)/phi tends to Y' - b'
    x[~inner] = env.atilde(0.0) + sol.Yp[j, 0] - env.b(0.0, order=1)
    x[chi >= 1.0] = 0.0
    return sign * x


def contour(sol):
    """Contour of a solution, pole (branch 1) to pole (branch 2)."""
    x1, x2 = _branch_x(sol, 0), _branch_x(sol, 1)
    interior = sol.chi < 1.0
    for xb in (x1, x2):
        if np.any(xb[interior] <= 0.0):
            k = int(np.argmax(xb[interior] <= 0.0))
            raise InvalidShapeError(
                f"contour touches or crosses the axis at phi={sol.chi[k]:.6g} (x={xb[k]:.3g})")
    rev = slice(None, None, -1)
    x = np.concatenate([x1[rev], x2[1:]])
    y = np.concatenate([sol.Y[0][rev], sol.Y[1][1:]])
    phi = np.concatenate([sol.chi[rev], sol.chi[1:]])
    branch = np.concatenate([np.ones(sol.chi.size, int), np.full(sol.chi.size - 1, 2)])
    gap = math.hypot(x1[0] - x2[0], sol.Y[0, 0] - sol.Y[1, 0])
    if gap > 1e-12:
        # both equator endpoints are kept and joined by a straight segment
        x = np.insert(x, sol.chi.size, x2[0])
        y = np.insert(y, sol.chi.size, sol.Y[1, 0])
        phi = np.insert(phi, sol.chi.size, 0.0)
        branch = np.insert(branch, sol.chi.size, 2)
    return Contour(x, y, phi, branch)


@dataclass(frozen=True)
class SimplicityReport:
    delta: float
    margin: float
    worst_phi: float
    self_intersecting: bool

    @property
    def passed(self):
        return self.margin > 0.0 and not self.self_intersecting


def simplicity_check(c, envelope):
    """Sufficient simplicity test plus a direct self-intersection check.

    Every interior contour point must leave the square of half-width
    ``delta = max(|a|, |b|)`` around the origin, i.e. its signed height
    ``(-1)^{j+1} y`` or its radius ``x`` must exceed ``delta``.  The margin
    is the worst such excess.
    """
    delta = float(envelope.delta)
    interior = (c.phi < 1.0) & (c.phi > 0.0)
    signed_y = np.where(c.branch == 1, c.y, -c.y)
    excess = np.maximum(signed_y, c.x) - delta
    if interior.any():
        k = int(np.argmin(np.where(interior, excess, np.inf)))
        margin, worst = float(excess[k]), float(c.phi[k])
    else:
        margin, worst = math.inf, math.nan
    crossing = not LineString(c.points()).is_simple
    return SimplicityReport(delta, margin, worst, crossing)


@dataclass
class RevolutionMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def _tets(self):
        v = self.vertices[self.faces]
        return v, np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])) / 6.0

    def volume(self):
        return float(self._tets()[1].sum())

    def centroid(self):
        v, vol = self._tets()
        return (vol[:, None] * v.sum(axis=1)).sum(axis=0) / (4.0 * vol.sum())

    def edges(self):
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        return e

    def is_watertight(self):
        """Every undirected edge used twice, once in each direction."""
        e = self.edges().astype(np.int64)
        nv = len(self.vertices)
        fwd = np.sort(e[:, 0] * nv + e[:, 1])
        if np.any(np.diff(fwd) == 0):
            return False
        rev = np.sort(e[:, 1] * nv + e[:, 0])
        return bool(np.array_equal(fwd, rev))

    def euler_characteristic(self):
        e = np.sort(self.edges(), axis=1).astype(np.int64)
        n_edges = len(np.unique(e[:, 0] * len(self.vertices) + e[:, 1]))
        return len(self.vertices) - n_edges + len(self.faces)

    def write_obj(self, path):
        with open(path, "w") as fh:
            fh.write("# surface of revolution\n")
            np.savetxt(fh, self.vertices, fmt="v %.17g %.17g %.17g")
            np.savetxt(fh, self.faces + 1, fmt="f %d %d %d")


def revolve(c, n_theta=256, check=True):
    """Triangulated surface from revolving ``c`` about the y axis.

    Interior contour points become rings of ``n_theta`` vertices; the two
    poles are single vertices joined to their neighbouring rings by fans.
    """
    if n_theta < 8:
        raise ValueError("n_theta must be at least 8")
    if check:
        if not LineString(c.points()).is_simple:
            raise InvalidShapeError("contour is self-intersecting")
    if abs(c.x[0]) > _AXIS_TOL or abs(c.x[-1]) > _AXIS_TOL:
        raise InvalidShapeError("contour must start and end on the axis")
    xs, ys = c.x[1:-1], c.y[1:-1]
    m = xs.size
    th = 2.0 * math.pi * np.arange(n_theta) / n_theta
    ring = np.stack([xs[:, None] * np.cos(th), np.broadcast_to(ys[:, None], (m, n_theta)),
                     -xs[:, None] * np.sin(th)], axis=-1).reshape(-1, 3)
    top = np.array([[0.0, c.y[0], 0.0]])
    bottom = np.array([[0.0, c.y[-1], 0.0]])
    verts = np.vstack([top, ring, bottom])
    idx = 1 + np.arange(m * n_theta).reshape(m, n_theta)
    nxt = np.roll(idx, -1, axis=1)
    faces = [np.column_stack([np.zeros(n_theta, int), idx[0], nxt[0]])]
    a, b = idx[:-1].ravel(), nxt[:-1].ravel()
    cc, d = idx[1:].ravel(), nxt[1:].ravel()
    faces.append(np.column_stack([a, cc, d]))
    faces.append(np.column_stack([a, d, b]))
    last = len(verts) - 1
    faces.append(np.column_stack([np.full(n_theta, last), nxt[-1], idx[-1]]))
    mesh = RevolutionMesh(verts, np.vstack(faces))
    if mesh.volume() < 0:
        mesh.faces = mesh.faces[:, ::-1].copy()
    return mesh


def shell_volume(c):
    """Exact volume of the solid swept by the polygonal contour.

    Sum of frustum volumes ``pi/3 dy (x0^2 + x0 x1 + x1^2)``.
    """
    x0, x1 = c.x[:-1], c.x[1:]
    dy = np.diff(c.y)
    return float(abs(np.sum(math.pi / 3.0 * dy * (x0 * x0 + x0 * x1 + x1 * x1))))


def polygon_factor(n_theta):
    """Ratio of an inscribed n-gon area to its circle, (n / 2pi) sin(2pi / n)."""
    return n_theta / (2.0 * math.pi) * math.sin(2.0 * math.pi / n_theta)


def write_contour_csv(c, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phi", "x", "y", "branch"])
        for p, x, y, b in zip(c.phi, c.x, c.y, c.branch):
            w.writerow([repr(float(p)), repr(float(x)), repr(float(y)), int(b)])


def read_obj(path):
    """Triangle mesh from an ASCII OBJ (``v`` and ``f`` records only)."""
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                verts.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) != 3:
                    raise InvalidShapeError("only triangular faces are supported")
                faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
    if not verts or not faces:
        raise InvalidShapeError(f"no mesh found in {path}")
    return RevolutionMesh(np.array(verts, float), np.array(faces, int))
