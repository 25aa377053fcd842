"""Mesh-only hydrostatic check of neutral floating at density 1/2.

Nothing here touches the solver: a closed triangle mesh is cut by planes
parallel to z, the half-volume offset is found by bisection, and the
resulting section's centroid and second moment are compared with the
envelope and the target moment.

Plane at angle ``Phi`` to the xz plane: unit normal
``n = (-sin Phi, cos Phi, 0)``, in-plane axes ``e_u = (cos Phi, sin Phi, 0)``
and ``e_z``.  The submerged part is ``n . p <= offset``.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import GeometryError, InvalidShapeError


def plane_frame(phi_angle):
    s, c = math.sin(phi_angle), math.cos(phi_angle)
    return np.array([-s, c, 0.0]), np.array([c, s, 0.0]), np.array([0.0, 0.0, 1.0])


def _tri_det(a, b, c):
    return np.einsum("ij,ij->i", a, np.cross(b, c))


def _partial_volume(v, s, offset, normal):
    """Six times the clipped volume contributed by triangles ``v`` (F, 3, 3).

    ``s`` holds the vertex heights ``normal . v``.  Each clipped triangle
    closes a tetrahedron with an apex on the plane, so the flat cap adds
    nothing.
    """
    if len(v) == 0:
        return 0.0
    v = v - offset * normal
    s = s - offset
    inside = s <= 0.0
    cnt = inside.sum(axis=1)
    total = 0.0
    full = cnt == 3
    if full.any():
        w = v[full]
        total += _tri_det(w[:, 0], w[:, 1], w[:, 2]).sum()
    for k_in in (1, 2):
        sel = cnt == k_in
        if not sel.any():
            continue
        w, ss, ins = v[sel], s[sel], inside[sel]
        # rotate each triangle so the odd vertex (the lone inside one for
        # k_in = 1, the lone outside one for k_in = 2) comes first
        odd = ins if k_in == 1 else ~ins
        first = np.argmax(odd, axis=1)
        order = (first[:, None] + np.arange(3)[None, :]) % 3
        w = np.take_along_axis(w, order[:, :, None], axis=1)
        ss = np.take_along_axis(ss, order, axis=1)
        p0, p1, p2 = w[:, 0], w[:, 1], w[:, 2]
        t01 = (ss[:, 0] / (ss[:, 0] - ss[:, 1]))[:, None]
        t02 = (ss[:, 0] / (ss[:, 0] - ss[:, 2]))[:, None]
        q1 = p0 + t01 * (p1 - p0)
        q2 = p0 + t02 * (p2 - p0)
        if k_in == 1:
            total += _tri_det(p0, q1, q2).sum()
        else:
            total += _tri_det(q1, p1, p2).sum() + _tri_det(q1, p2, q2).sum()
    return float(total)


def clipped_volume(mesh, normal, offset):
    """Volume of the part of a closed mesh with ``normal . p <= offset``."""
    v = mesh.vertices[mesh.faces]
    return _partial_volume(v, v @ normal, offset, normal) / 6.0


class _Bisection:
    """Clipped volume as a function of the offset inside a shrinking bracket.

    Triangles wholly below the bracket are folded into two running sums,
    since ``det(v0 - o, v1 - o, v2 - o)`` is affine in the apex ``o``;
    triangles wholly above are dropped.  Only the straddling band is clipped.
    """

    def __init__(self, mesh, normal):
        self.normal = normal
        self.v = mesh.vertices[mesh.faces]
        self.s = self.v @ normal
        self.det0 = 0.0
        self.lin = np.zeros(3)

    def shrink(self, lo, hi):
        smax, smin = self.s.max(axis=1), self.s.min(axis=1)
        below = smax <= lo
        if below.any():
            w = self.v[below]
            self.det0 += _tri_det(w[:, 0], w[:, 1], w[:, 2]).sum()
            self.lin += (np.cross(w[:, 1], w[:, 2]) + np.cross(w[:, 2], w[:, 0])
                         + np.cross(w[:, 0], w[:, 1])).sum(axis=0)
        keep = ~below & (smin <= hi)
        self.v, self.s = self.v[keep], self.s[keep]

    def __call__(self, offset):
        fixed = self.det0 - offset * float(self.normal @ self.lin)
        return (fixed + _partial_volume(self.v, self.s, offset, self.normal)) / 6.0


def section_loops(mesh, normal, offset):
    """Closed polylines of the plane section, stitched by mesh-edge identity."""
    f = mesh.faces
    s = mesh.vertices @ normal - offset
    neg = s[f] <= 0.0
    mixed = neg.any(axis=1) & ~neg.all(axis=1)
    if not mixed.any():
        raise GeometryError("plane does not cut the mesh")
    tri = f[mixed]
    nt = neg[mixed]
    links = {}
    for e in range(3):
        a, b = tri[:, e], tri[:, (e + 1) % 3]
        crossing = nt[:, e] != nt[:, (e + 1) % 3]
        links[e] = (np.minimum(a, b), np.maximum(a, b), crossing)
    adj = {}
    for k in range(len(tri)):
        keys = [(int(links[e][0][k]), int(links[e][1][k])) for e in range(3) if links[e][2][k]]
        if len(keys) != 2:
            raise GeometryError("degenerate triangle in section")
        a, b = keys
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    if any(len(v) != 2 for v in adj.values()):
        raise GeometryError("open or branching section polyline (mesh not watertight?)")
    loops, seen = [], set()
    for start in adj:
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
            if nxt == start:
                break
            loop.append(nxt)
            seen.add(nxt)
            prev, cur = cur, nxt
        loops.append(loop)
    pts = []
    for loop in loops:
        e = np.array(loop)
        va, vb = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
        sa, sb = s[e[:, 0]], s[e[:, 1]]
        t = (sa / (sa - sb))[:, None]
        pts.append(va + t * (vb - va))
    return pts


def polygon_moments(u, z):
    """Area, centroid and centroidal second moments of a simple polygon.

    Returns ``(area, (u_c, z_c), (I_uu, I_zz, I_uz))`` with
    ``I_uu = int (u - u_c)^2 dA``, the moment about the centroidal axis
    parallel to z.
    """
    u = np.asarray(u, float)
    z = np.asarray(z, float)
    if u.size < 3:
        raise GeometryError("a polygon needs at least 3 vertices")
    u1, z1 = np.roll(u, -1), np.roll(z, -1)
    cr = u * z1 - u1 * z
    area = 0.5 * cr.sum()
    if area == 0.0:
        raise GeometryError("degenerate polygon")
    uc = (cr * (u + u1)).sum() / (6.0 * area)
    zc = (cr * (z + z1)).sum() / (6.0 * area)
    suu = (cr * (u * u + u * u1 + u1 * u1)).sum() / 12.0
    szz = (cr * (z * z + z * z1 + z1 * z1)).sum() / 12.0
    suz = (cr * (u * z1 + 2.0 * u * z + 2.0 * u1 * z1 + u1 * z)).sum() / 24.0
    sign = 1.0 if area > 0 else -1.0
    area *= sign
    i_uu = sign * suu - area * uc * uc
    i_zz = sign * szz - area * zc * zc
    i_uz = sign * suz - area * uc * zc
    return area, (uc, zc), (i_uu, i_zz, i_uz)


@dataclass
class WaterCut:
    angle: float
    offset: float
    vol_frac: float
    area: float
    centroid: list
    I_z: float
    I_perp: float
    I_uz: float
    iterations: int


def section_properties(mesh, angle, offset):
    """Area, 3D centroid and moments of the section at ``(angle, offset)``."""
    n, eu, ez = plane_frame(angle)
    loops = section_loops(mesh, n, offset)
    if len(loops) != 1:
        raise InvalidShapeError(f"water section at angle {angle:.4f} has {len(loops)} components")
    p = loops[0]
    area, (uc, zc), (i_uu, i_zz, i_uz) = polygon_moments(p @ eu, p @ ez)
    centroid = offset * n + uc * eu + zc * ez
    return area, centroid, (i_uu, i_zz, i_uz)


def water_cut(mesh, angle, vol_tol=1e-6, max_iter=60, total=None):
    """Half-volume cut at angle ``angle`` found by bisection on the offset."""
    n, _, _ = plane_frame(angle)
    total = mesh.volume() if total is None else total
    h = mesh.vertices @ n
    lo, hi = float(h.min()), float(h.max())
    vol = _Bisection(mesh, n)
    frac = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        frac = vol(mid) / total
        if abs(frac - 0.5) < vol_tol:
            break
        if frac < 0.5:
            lo = mid
        else:
            hi = mid
        vol.shrink(lo, hi)
    else:
        raise GeometryError(f"bisection did not reach the half-volume cut at angle {angle:.4f}")
    area, c, (i_uu, i_zz, i_uz) = section_properties(mesh, angle, mid)
    return WaterCut(float(angle), mid, frac, area, [float(v) for v in c], i_uu, i_zz, i_uz, it)


@dataclass
class VerificationReport:
    target_I: float
    records: list = field(default_factory=list)
    max_I_dev: float = 0.0
    max_centroid_dist: float | None = None
    max_vol_frac_err: float = 0.0
    gate: float | None = None
    centroid_tol: float | None = None
    vol_tol: float = 1e-6
    failures: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.failures

    def to_json(self, path=None):
        data = asdict(self)
        data["passed"] = self.passed
        text = json.dumps(data, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def default_angles(k=16):
    return [0.5 * math.pi * i / (k - 1) for i in range(k)]


def verify(mesh, envelope=None, target_I=None, angles=None, gate=None,
           centroid_tol=None, vol_tol=1e-6):
    """Cut the mesh at every angle and collect the neutral-floating checks.

    ``target_I`` defaults to the moment of the first cut.  The verdict
    fails when ``gate`` (on max |I_z/I - 1|) or ``centroid_tol`` (distance
    from the section centroid to the envelope point ``(a, b)(sin Phi)``)
    is exceeded, when a volume fraction misses 1/2, or when a section is
    not a single polygon.
    """
    angles = default_angles() if angles is None else list(angles)
    total = mesh.volume()
    rep = VerificationReport(target_I=float("nan") if target_I is None else float(target_I),
                             gate=gate, centroid_tol=centroid_tol, vol_tol=vol_tol)
    dists = []
    for ang in angles:
        try:
            cut = water_cut(mesh, ang, vol_tol=vol_tol, total=total)
        except (InvalidShapeError, GeometryError) as exc:
            rep.failures.append(f"angle {ang:.4f}: {exc}")
            continue
        if target_I is None and math.isnan(rep.target_I):
            rep.target_I = cut.I_z
        rec = asdict(cut)
        rec["I_z_over_I_minus_1"] = cut.I_z / rep.target_I - 1.0
        if envelope is not None:
            sphi = min(math.sin(ang), 1.0)
            ea, eb = float(envelope.a(sphi)), float(envelope.b(sphi))
            d = math.hypot(cut.centroid[0] - ea, cut.centroid[1] - eb)
            rec["centroid_envelope_dist"] = d
            dists.append(d)
        rep.records.append(rec)
    if rep.records:
        rep.max_I_dev = max(abs(r["I_z_over_I_minus_1"]) for r in rep.records)
        rep.max_vol_frac_err = max(abs(r["vol_frac"] - 0.5) for r in rep.records)
    if dists:
        rep.max_centroid_dist = max(dists)
    if gate is not None and rep.max_I_dev >= gate:
        rep.failures.append(f"max |I_z/I - 1| = {rep.max_I_dev:.3e} exceeds gate {gate:.3e}")
    if centroid_tol is not None and dists and rep.max_centroid_dist >= centroid_tol:
        rep.failures.append(f"centroid offset {rep.max_centroid_dist:.3e} exceeds {centroid_tol:.3e}")
    if rep.max_vol_frac_err >= vol_tol:
        rep.failures.append(f"volume fraction error {rep.max_vol_frac_err:.3e}")
    return rep


def noise_floor(n_theta, n_intervals, angles=None, grid="angle"):
    """max |I_z/I - 1| of a unit-sphere mesh at the given resolution.

    The sphere contour is sampled on the same solver grid as a run, so the
    value isolates the meshing error of that resolution.  Cached.
    """
    angles = tuple(default_angles() if angles is None else (float(a) for a in angles))
    return _noise_floor(int(n_theta), int(n_intervals), angles, grid)


@functools.lru_cache(maxsize=32)
def _noise_floor(n_theta, n_intervals, angles, grid):
    from .shape import Contour, revolve
    from .solver import make_grid

    chi = make_grid(n_intervals, grid)[0]
    x = np.sqrt(np.clip(1.0 - chi * chi, 0.0, None))
    x[-1] = 0.0
    c = Contour(np.concatenate([x[::-1], x[1:]]), np.concatenate([chi[::-1], -chi[1:]]),
                np.concatenate([chi[::-1], chi[1:]]), np.ones(2 * chi.size - 1, int))
    rep = verify(revolve(c, n_theta), target_I=math.pi / 4.0, angles=angles)
    return rep.max_I_dev


def ellipsoid_mesh(equatorial=1.0, polar=1.2, n_theta=256, n_polar=1024):
    """Ellipsoid of revolution about y; negative control for the oracle."""
    from .shape import Contour, revolve

    psi = np.linspace(0.0, math.pi, n_polar + 1)
    x = equatorial * np.sin(psi)
    x[0] = x[-1] = 0.0
    y = polar * np.cos(psi)
    c = Contour(x, y, np.abs(np.cos(psi)), np.where(psi <= 0.5 * math.pi, 1, 2))
    return revolve(c, n_theta)
