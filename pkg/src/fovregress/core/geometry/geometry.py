"""
geometry.py

Camera field-of-view geometry for graded place-recognition ground truth.

Every camera is reduced to a 2D viewing frustum: an isoceles triangle with its
apex at the camera position and two rays of length `range` at
heading ± fov_angle/2. The graded similarity ψ of two cameras is the
intersection-over-union of their frustums:

    ψ(a, b) = area(Fa ∩ Fb) / area(Fa ∪ Fb)
            = I / (area(Fa) + area(Fb) - I)

The intersection of two convex polygons is computed by successive half-plane
clipping: polygon a is clipped against the inner side of every edge of b.

The binary positive rule used for evaluation is independent of the frustums:
two cameras see the same place when their positions are within a distance
threshold (inclusive) and their headings differ by less than an angular
threshold (exclusive). Heading differences are circular.

Classes:
    - CameraPose: validated camera position/orientation.
    - FrustumPolygon: convex CCW polygon with area helpers.

Functions:
    - frustum_polygon, convex_polygon_intersection_area, fov_overlap,
      psi_matrix, is_positive, heading_difference, heading_from_track.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import Polygon

from fovregress.utils.exceptions import InputError

TWO_PI = 2.0 * math.pi

# Below this a range or field of view is treated as degenerate.
_MIN_EXTENT = 1e-9


def normalize_heading(heading):
    """Wrap an angle in radians into [0, 2π)."""
    h = math.fmod(float(heading), TWO_PI)
    if h < 0.0:
        h += TWO_PI
    # fmod of tiny negatives can round up to exactly 2π
    if h >= TWO_PI:
        h = 0.0
    return h


@dataclass(frozen=True)
class CameraPose:
    """
    Planar camera pose with a viewing sector.

    Attributes:
        id (int): Non-negative image identifier.
        x, y (float): Position in meters.
        heading (float): Viewing direction in radians, normalized into [0, 2π).
        fov_angle (float): Opening angle in radians, 0 < fov_angle < π.
        range (float): Sensing range in meters, > 0.
    """

    id: int
    x: float
    y: float
    heading: float
    fov_angle: float
    range: float

    def __post_init__(self):
        if int(self.id) < 0:
            raise InputError(f"Pose id must be non-negative, got {self.id}")
        for name in ("x", "y", "heading", "fov_angle", "range"):
            if not math.isfinite(getattr(self, name)):
                raise InputError(f"Pose {self.id}: {name} must be finite, got {getattr(self, name)}")
        if not self.range > _MIN_EXTENT:
            raise InputError(f"Pose {self.id}: range must be > 0, got {self.range}")
        if not (_MIN_EXTENT < self.fov_angle < math.pi):
            raise InputError(f"Pose {self.id}: fov_angle must lie in (0, π), got {self.fov_angle}")
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "fov_angle", float(self.fov_angle))
        object.__setattr__(self, "range", float(self.range))
        object.__setattr__(self, "heading", normalize_heading(self.heading))

    @classmethod
    def from_degrees(cls, id, x, y, heading_deg, fov_deg, range_m):
        """Build a pose from angles given in degrees."""
        return cls(id, x, y, math.radians(heading_deg % 360.0), math.radians(fov_deg), range_m)

    @property
    def position(self):
        return np.array([self.x, self.y])

    def key(self):
        """Geometric identity of the pose (everything except the id)."""
        return (self.x, self.y, self.heading, self.fov_angle, self.range)


@dataclass(frozen=True)
class FrustumPolygon:
    """
    Convex polygon with counter-clockwise vertices; the first vertex is the apex.

    Attributes:
        vertices (ndarray): (n, 2) array of vertex coordinates in meters.
    """

    vertices: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise InputError(f"A polygon needs at least 3 (x, y) vertices, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def area(self):
        return polygon_area(self.vertices)

    def contains(self, points):
        """
        Vectorized point-in-polygon test (boundary counts as inside).

        Args:
            points (ndarray): (m, 2) array.

        Returns:
            ndarray of bool, shape (m,).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.ones(len(pts), dtype=bool)
        v = self.vertices
        for k in range(len(v)):
            p0, p1 = v[k], v[(k + 1) % len(v)]
            ex, ey = p1 - p0
            inside &= ex * (pts[:, 1] - p0[1]) - ey * (pts[:, 0] - p0[0]) >= 0.0
        return inside

    def to_shapely(self):
        return Polygon(self.vertices)


def polygon_area(vertices):
    """Shoelace area of a simple polygon; 0 for fewer than three vertices."""
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def frustum_polygon(pose):
    """
    Viewing triangle of a camera.

    Parameters:
        pose (CameraPose): The camera.

    Returns:
        FrustumPolygon: apex, right ray end (heading - fov/2), left ray end
        (heading + fov/2), in counter-clockwise order. Its area is
        range² · sin(fov/2) · cos(fov/2).
    """
    half = 0.5 * pose.fov_angle
    right = pose.heading - half
    left = pose.heading + half
    vertices = np.array([
        [pose.x, pose.y],
        [pose.x + pose.range * math.cos(right), pose.y + pose.range * math.sin(right)],
        [pose.x + pose.range * math.cos(left), pose.y + pose.range * math.sin(left)],
    ])
    return FrustumPolygon(vertices)


def _clip_half_plane(subject, p0, p1):
    """Keep the part of a convex polygon on the left of the directed line p0->p1."""
    n = len(subject)
    if n == 0:
        return subject
    ex, ey = p1 - p0
    side = ex * (subject[:, 1] - p0[1]) - ey * (subject[:, 0] - p0[0])
    out = []
    for k in range(n):
        cur, nxt = subject[k], subject[(k + 1) % n]
        s_cur, s_nxt = side[k], side[(k + 1) % n]
        if s_cur >= 0.0:
            out.append(cur)
        if (s_cur >= 0.0) != (s_nxt >= 0.0):
            t = s_cur / (s_cur - s_nxt)
            out.append(cur + t * (nxt - cur))
    return np.array(out, dtype=float).reshape(-1, 2)


def convex_polygon_intersection_area(a, b):
    """
    Area of the intersection of two convex CCW polygons.

    Parameters:
        a, b (FrustumPolygon): Convex polygons with CCW vertex order.

    Returns:
        float: Intersection area in square meters (>= 0).
    """
    clipped = np.array(a.vertices)
    clip = b.vertices
    for k in range(len(clip)):
        clipped = _clip_half_plane(clipped, clip[k], clip[(k + 1) % len(clip)])
        if len(clipped) < 3:
            return 0.0
    return polygon_area(clipped)


def fov_overlap(a, b):
    """
    Graded similarity ψ of two cameras as frustum intersection-over-union.

    Parameters:
        a, b (CameraPose): The two cameras.

    Returns:
        float: ψ in [0, 1]; ψ(a, a) = 1 and ψ(a, b) = ψ(b, a) bit for bit.
    """
    # Canonical argument order makes the result exactly symmetric.
    if b.key() < a.key():
        a, b = b, a
    if a.key() == b.key():
        return 1.0
    if math.hypot(a.x - b.x, a.y - b.y) > a.range + b.range:
        return 0.0
    fa, fb = frustum_polygon(a), frustum_polygon(b)
    inter = convex_polygon_intersection_area(fa, fb)
    if inter <= 0.0:
        return 0.0
    union = fa.area() + fb.area() - inter
    return float(min(1.0, max(0.0, inter / union)))


def psi_matrix(queries, maps):
    """
    ψ for every (query, map) combination.

    Parameters:
        queries (Sequence[CameraPose]): Row poses.
        maps (Sequence[CameraPose]): Column poses.

    Returns:
        ndarray: (len(queries), len(maps)) matrix of ψ values.
    """
    psi = np.zeros((len(queries), len(maps)))
    if len(queries) == 0 or len(maps) == 0:
        return psi
    qxy = np.array([[p.x, p.y] for p in queries])
    mxy = np.array([[p.x, p.y] for p in maps])
    qr = np.array([p.range for p in queries])
    mr = np.array([p.range for p in maps])
    dist = np.hypot(qxy[:, None, 0] - mxy[None, :, 0], qxy[:, None, 1] - mxy[None, :, 1])
    # Frustums lie inside a disk of radius `range` around the apex.
    rows, cols = np.nonzero(dist <= qr[:, None] + mr[None, :])
    for r, c in zip(rows, cols):
        psi[r, c] = fov_overlap(queries[r], maps[c])
    return psi


def heading_difference(h1, h2):
    """Absolute circular difference of two headings in radians, in [0, π]."""
    d = abs(normalize_heading(h1) - normalize_heading(h2))
    return min(d, TWO_PI - d)


def heading_from_track(p, q):
    """
    Heading (radians, [0, 2π)) of travel from point p to point q.

    Parameters:
        p, q (tuple): (x, y) positions.
    """
    return normalize_heading(math.atan2(q[1] - p[1], q[0] - p[0]))


def is_positive(a, b, dist_thresh=25.0, angle_thresh=math.radians(40.0)):
    """
    Binary same-place rule for evaluation ground truth.

    Parameters:
        a, b (CameraPose): The two cameras.
        dist_thresh (float): Maximum position distance in meters (inclusive).
        angle_thresh (float): Heading difference bound in radians (exclusive).

    Returns:
        bool

    Raises:
        InputError: if a threshold is negative.
    """
    if dist_thresh < 0 or angle_thresh < 0:
        raise InputError(f"Thresholds must be non-negative, got {dist_thresh} m / {angle_thresh} rad")
    distance = math.hypot(a.x - b.x, a.y - b.y)
    return distance <= dist_thresh and heading_difference(a.heading, b.heading) < angle_thresh
