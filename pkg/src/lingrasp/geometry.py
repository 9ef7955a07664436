"""Oriented grasp rectangles and the exact geometry behind the success rule.

Coordinates follow image convention: x is the column, y is the row, and
theta is measured from the horizontal axis toward +y. A rectangle is
symmetric under theta -> theta + pi, so orientations are normalized to the
representative range (-pi/2, pi/2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "GraspRect",
    "normalize_theta",
    "rect_corners",
    "polygon_area",
    "clip_polygon",
    "rotated_iou",
    "angle_offset_deg",
    "is_success",
    "harmonic_mean",
    "IOU_THRESHOLD",
    "ANGLE_THRESHOLD_DEG",
]

IOU_THRESHOLD = 0.25
ANGLE_THRESHOLD_DEG = 30.0


def normalize_theta(theta: float) -> float:
    """Map an angle to the representative range (-pi/2, pi/2].

    In-range values pass through unchanged (bit-exact).
    """
    if -math.pi / 2.0 < theta <= math.pi / 2.0:
        return theta
    t = (theta + math.pi / 2.0) % math.pi - math.pi / 2.0
    if t == -math.pi / 2.0:
        t = math.pi / 2.0
    return t


@dataclass(frozen=True)
class GraspRect:
    """5-parameter grasp: center (x, y), opening w, jaw size h, angle theta."""

    x: float
    y: float
    w: float
    h: float
    theta: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"grasp sides must be positive, got w={self.w}, h={self.h}")
        object.__setattr__(self, "theta", normalize_theta(float(self.theta)))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "w", float(self.w))
        object.__setattr__(self, "h", float(self.h))

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h, "theta": self.theta}

    @classmethod
    def from_dict(cls, d: dict) -> "GraspRect":
        return cls(x=d["x"], y=d["y"], w=d["w"], h=d["h"], theta=d["theta"])


def rect_corners(g: GraspRect) -> list[tuple[float, float]]:
    """Counter-clockwise corners; side w lies along theta, side h across it."""
    if not (g.w > 0 and g.h > 0):
        raise ValueError("rectangle sides must be positive")
    ct, st = math.cos(g.theta), math.sin(g.theta)
    hw, hh = g.w / 2.0, g.h / 2.0
    corners = []
    for du, dv in ((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)):
        corners.append((g.x + du * ct - dv * st, g.y + du * st + dv * ct))
    return corners


def polygon_area(poly: list[tuple[float, float]]) -> float:
    """Shoelace area (absolute value)."""
    if len(poly) < 3:
        return 0.0
    s = 0.0
    for (x0, y0), (x1, y1) in zip(poly, poly[1:] + poly[:1]):
        s += x0 * y1 - x1 * y0
    return abs(s) / 2.0


def clip_polygon(subject: list[tuple[float, float]], clip: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clip of a polygon against a convex clip polygon.

    The clip polygon must be counter-clockwise. Points on an edge count as
    inside under a scale-relative tolerance, so coincident or shared edges
    never fabricate spurious crossing points and clipping a polygon
    against itself returns it unchanged.
    """
    scale = 1.0
    for x, y in list(subject) + list(clip):
        scale = max(scale, abs(x), abs(y))
    tol = 1e-10 * scale * scale

    output = list(subject)
    cp1 = clip[-1]
    for cp2 in clip:
        if not output:
            return []
        ex, ey = cp2[0] - cp1[0], cp2[1] - cp1[1]
        inp = output
        output = []
        s = inp[-1]
        s_in = ex * (s[1] - cp1[1]) - ey * (s[0] - cp1[0]) >= -tol
        for e in inp:
            e_in = ex * (e[1] - cp1[1]) - ey * (e[0] - cp1[0]) >= -tol
            if e_in != s_in:
                output.append(_edge_intersection(cp1, cp2, s, e))
            if e_in:
                output.append(e)
            s, s_in = e, e_in
        cp1 = cp2
    return output


def _edge_intersection(p1, p2, p3, p4):
    dcx, dcy = p1[0] - p2[0], p1[1] - p2[1]
    dpx, dpy = p3[0] - p4[0], p3[1] - p4[1]
    n1 = p1[0] * p2[1] - p1[1] * p2[0]
    n2 = p3[0] * p4[1] - p3[1] * p4[0]
    denom = dcx * dpy - dcy * dpx
    return ((n1 * dpx - n2 * dcx) / denom, (n1 * dpy - n2 * dcy) / denom)


def rotated_iou(g1: GraspRect, g2: GraspRect) -> float:
    """Exact intersection-over-union of two oriented rectangles."""
    p1 = rect_corners(g1)
    p2 = rect_corners(g2)
    inter = polygon_area(clip_polygon(p1, p2))
    a1 = polygon_area(p1)
    a2 = polygon_area(p2)
    union = a1 + a2 - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def angle_offset_deg(t1: float, t2: float) -> float:
    """Smallest offset in degrees between two orientations, mod 180."""
    d = abs(math.degrees(t1) - math.degrees(t2)) % 180.0
    return min(d, 180.0 - d)


def is_success(pred: GraspRect, gts: list[GraspRect]) -> bool:
    """Grasp success: some ground truth has IoU strictly above 0.25 and
    angle offset strictly below 30 degrees."""
    if not gts:
        raise ValueError("is_success requires at least one ground-truth grasp")
    for gt in gts:
        if angle_offset_deg(pred.theta, gt.theta) < ANGLE_THRESHOLD_DEG and rotated_iou(pred, gt) > IOU_THRESHOLD:
            return True
    return False


def harmonic_mean(s: float, u: float) -> float:
    """2su/(s+u) over two rates in [0, 1]; zero when both are zero."""
    if not (0.0 <= s <= 1.0 and 0.0 <= u <= 1.0):
        raise ValueError(f"rates must lie in [0, 1], got {s}, {u}")
    if s + u == 0.0:
        return 0.0
    return 2.0 * s * u / (s + u)
