"""Planar geometry primitives shared by the kinematics and contact models.

Every routine works on 2-vectors (``numpy`` arrays of shape ``(2,)``) in metres.
Penetration routines report the normal pointing from the robot surface into the
manipuland, so the force the robot applies to the object is ``+normal``.
"""

import math
from dataclasses import dataclass

import numpy as np

EPS = 1e-12
MIN_AREA = 1e-14


@dataclass(frozen=True, slots=True)
class Penetration:
    """Overlap between one robot surface and the manipuland."""

    depth: float
    normal: np.ndarray
    point: np.ndarray
    contact_length: float


# ============================================================================
# Vectors and segments
# ============================================================================

def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def cross2(a: np.ndarray, b: np.ndarray) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def perp(v: np.ndarray) -> np.ndarray:
    """Rotate a vector by +90 degrees."""
    return np.array([-v[1], v[0]])


def reflect_x(p: np.ndarray) -> np.ndarray:
    """Mirror a point about the body midline (x = 0)."""
    return np.array([-p[0], p[1]])


def chord(radius: float, depth: float) -> float:
    """Chord length of a circle cut at ``depth`` below its outermost point."""
    d = min(max(depth, 0.0), radius)
    return 2.0 * math.sqrt(max(2.0 * radius * d - d * d, 0.0))


def closest_point_on_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    ab = b - a
    denom = float(ab @ ab)
    if denom < EPS:
        return a.copy(), 0.0
    t = min(max(float((p - a) @ ab) / denom, 0.0), 1.0)
    return a + t * ab, t


def _proper_intersection(a0, a1, b0, b1) -> np.ndarray | None:
    da = a1 - a0
    db = b1 - b0
    d1 = cross2(da, b0 - a0)
    d2 = cross2(da, b1 - a0)
    d3 = cross2(db, a0 - b0)
    d4 = cross2(db, a1 - b0)
    if d1 * d2 < 0.0 and d3 * d4 < 0.0:
        t = cross2(b0 - a0, db) / cross2(da, db)
        return a0 + t * da
    return None


def segment_segment_distance(a0, a1, b0, b1) -> tuple[float, np.ndarray, np.ndarray]:
    """Exact distance between two segments with the closest point on each."""
    hit = _proper_intersection(a0, a1, b0, b1)
    if hit is not None:
        return 0.0, hit, hit.copy()

    candidates = []
    for p, (s0, s1), on_a in ((a0, (b0, b1), True), (a1, (b0, b1), True),
                              (b0, (a0, a1), False), (b1, (a0, a1), False)):
        q, _ = closest_point_on_segment(p, s0, s1)
        dist = float(np.linalg.norm(p - q))
        candidates.append((dist, p, q) if on_a else (dist, q, p))
    return min(candidates, key=lambda c: c[0])


# ============================================================================
# Convex polygons
# ============================================================================

def rectangle_vertices(center: np.ndarray, angle: float, half_extents: np.ndarray) -> np.ndarray:
    """Counter-clockwise corners of an oriented rectangle."""
    hx, hy = half_extents
    local = np.array([[hx, hy], [-hx, hy], [-hx, -hy], [hx, -hy]])
    return local @ rotation(angle).T + center


def outward_normals(poly: np.ndarray) -> np.ndarray:
    edges = np.roll(poly, -1, axis=0) - poly
    normals = np.column_stack([edges[:, 1], -edges[:, 0]])
    return normals / np.linalg.norm(normals, axis=1, keepdims=True)


def point_in_convex_polygon(p: np.ndarray, poly: np.ndarray) -> bool:
    n = len(poly)
    for i in range(n):
        if cross2(poly[(i + 1) % n] - poly[i], p - poly[i]) < 0.0:
            return False
    return True


def clip_polygon(poly: np.ndarray, point: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Keep the part of ``poly`` where ``(x - point) . normal >= 0``."""
    if len(poly) == 0:
        return poly
    out = []
    dist = (poly - point) @ normal
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        pi, pj = poly[i], poly[j]
        di, dj = dist[i], dist[j]
        if di >= 0.0:
            out.append(pi)
        if (di >= 0.0) != (dj >= 0.0):
            t = di / (di - dj)
            out.append(pi + t * (pj - pi))
    return np.array(out) if out else np.zeros((0, 2))


def polygon_area_centroid(poly: np.ndarray) -> tuple[float, np.ndarray]:
    if len(poly) < 3:
        return 0.0, poly.mean(axis=0) if len(poly) else np.zeros(2)
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * float(cross.sum())
    if abs(area) < MIN_AREA:
        return 0.0, poly.mean(axis=0)
    cx = float(((x + xn) * cross).sum()) / (6.0 * area)
    cy = float(((y + yn) * cross).sum()) / (6.0 * area)
    return abs(area), np.array([cx, cy])


def extent_along(poly: np.ndarray, direction: np.ndarray) -> float:
    proj = poly @ direction
    return float(proj.max() - proj.min())


# ============================================================================
# Robot surface vs manipuland penetration
# ============================================================================

def capsule_circle_penetration(a: np.ndarray, b: np.ndarray, radius: float,
                               center: np.ndarray, obj_radius: float) -> Penetration | None:
    q, _ = closest_point_on_segment(center, a, b)
    offset = center - q
    dist = float(np.linalg.norm(offset))
    depth = radius + obj_radius - dist
    if depth <= 0.0:
        return None
    if dist < EPS:
        axis = b - a
        normal = perp(axis) / np.linalg.norm(axis) if float(axis @ axis) > EPS else np.array([0.0, 1.0])
    else:
        normal = offset / dist
    tangent = perp(normal)
    sensor_extent = abs(float((b - a) @ tangent)) + chord(radius, depth)
    return Penetration(
        depth=depth,
        normal=normal,
        point=center - normal * (obj_radius - 0.5 * depth),
        contact_length=min(chord(obj_radius, depth), sensor_extent),
    )


def capsule_polygon_penetration(a: np.ndarray, b: np.ndarray, radius: float,
                                poly: np.ndarray) -> Penetration | None:
    axis = b - a
    length = float(np.linalg.norm(axis))
    degenerate = length < EPS

    intersecting = point_in_convex_polygon(a, poly)
    if not intersecting and not degenerate:
        n = len(poly)
        intersecting = any(
            _proper_intersection(a, b, poly[i], poly[(i + 1) % n]) is not None for i in range(n)
        )

    normal = None
    depth = 0.0
    if not intersecting:
        n = len(poly)
        best = None
        for i in range(n):
            v0, v1 = poly[i], poly[(i + 1) % n]
            for p in (a, b):
                q, _ = closest_point_on_segment(p, v0, v1)
                d = float(np.linalg.norm(q - p))
                if best is None or d < best[0]:
                    best = (d, p, q)
        for v in poly:
            q, _ = closest_point_on_segment(v, a, b)
            d = float(np.linalg.norm(v - q))
            if d < best[0]:
                best = (d, q, v)
        dist, on_robot, on_object = best
        if dist >= radius:
            return None
        if dist > EPS:
            normal = (on_object - on_robot) / dist
            depth = radius - dist

    if normal is None:
        candidates = list(outward_normals(poly))
        candidates += [-c for c in candidates]
        if not degenerate:
            m = perp(axis / length)
            candidates += [m, -m]
        best_depth = math.inf
        for d in candidates:
            robot_max = max(float(a @ d), float(b @ d)) + radius
            object_min = float((poly @ d).min())
            pen = robot_max - object_min
            if pen < best_depth:
                best_depth, normal = pen, d
        depth = best_depth

    tangent = perp(normal)
    if not degenerate:
        u = axis / length
        w = perp(u)
        region = clip_polygon(poly, a, u)
        region = clip_polygon(region, b, -u)
        region = clip_polygon(region, a - w * radius, w)
        region = clip_polygon(region, a + w * radius, -w)
        area, centroid = polygon_area_centroid(region)
        if area > MIN_AREA:
            return Penetration(depth, normal, centroid, extent_along(region, tangent))

    if degenerate:
        point = a + normal * (radius - 0.5 * depth)
    else:
        deepest = poly[int(np.argmin(poly @ normal))]
        point = deepest + normal * (0.5 * depth)
    return Penetration(depth, normal, point, chord(radius, depth))


def plate_circle_penetration(p0: np.ndarray, p1: np.ndarray, normal: np.ndarray,
                             center: np.ndarray, radius: float) -> Penetration | None:
    """Depth of a circle behind a one-sided plate, measured along the plate normal."""
    span = p1 - p0
    width = float(np.linalg.norm(span))
    t_hat = span / width
    s = float((center - p0) @ t_hat)
    h = float((center - p0) @ normal)
    delta = -s if s < 0.0 else (s - width if s > width else 0.0)
    if delta >= radius:
        return None
    depth = math.sqrt(radius * radius - delta * delta) - h
    if depth <= 0.0:
        return None
    half = math.sqrt(max(radius * radius - h * h, 0.0)) if abs(h) < radius else radius
    lo, hi = max(s - half, 0.0), min(s + half, width)
    point = p0 + t_hat * min(max(s, 0.0), width) - normal * (0.5 * depth)
    return Penetration(depth, normal.copy(), point, max(hi - lo, 0.0))


def plate_polygon_penetration(p0: np.ndarray, p1: np.ndarray, normal: np.ndarray,
                              poly: np.ndarray) -> Penetration | None:
    t_hat = (p1 - p0) / np.linalg.norm(p1 - p0)
    region = clip_polygon(poly, p0, t_hat)
    region = clip_polygon(region, p1, -t_hat)
    region = clip_polygon(region, p0, -normal)
    area, centroid = polygon_area_centroid(region)
    if area <= MIN_AREA:
        return None
    depth = float(-((region - p0) @ normal).min())
    if depth <= 0.0:
        return None
    return Penetration(depth, normal.copy(), centroid, extent_along(region, t_hat))
