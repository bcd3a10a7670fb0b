"""Boundary tracing and triangulation of rectilinear planar regions.

Rings are lists of integer grid points ``(u, v)`` with the region on the left:
outer boundaries run counter-clockwise, holes clockwise. Triangulation keeps
every ring vertex, including collinear ones, and adds none.
"""

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from cadeval.errors import CadEvalError

logger = logging.getLogger(__name__)

GridPoint = Tuple[int, int]
Ring = List[GridPoint]
Point2 = Tuple[float, float]


class TriangulationError(CadEvalError):
    pass


def trace_rings(mask: np.ndarray) -> List[Ring]:
    """Closed boundary walks of the cells set in ``mask`` (indexed [u, v]).

    Where two boundary walks meet at a vertex the walk turns left, so solid
    cells touching only at a corner end up on separate walks.
    """
    padded = np.pad(mask, 1)
    outgoing: Dict[GridPoint, List[GridPoint]] = {}

    def add(start: GridPoint, end: GridPoint) -> None:
        outgoing.setdefault(start, []).append(end)

    for i, j in zip(*np.nonzero(mask)):
        i, j = int(i), int(j)
        pi, pj = i + 1, j + 1
        if not padded[pi, pj - 1]:
            add((i, j), (i + 1, j))
        if not padded[pi + 1, pj]:
            add((i + 1, j), (i + 1, j + 1))
        if not padded[pi, pj + 1]:
            add((i + 1, j + 1), (i, j + 1))
        if not padded[pi - 1, pj]:
            add((i, j + 1), (i, j))

    for ends in outgoing.values():
        ends.sort()

    def take(point: GridPoint, direction: Optional[Tuple[int, int]]) -> GridPoint:
        ends = outgoing[point]
        if direction is None:
            nxt = ends[0]
        else:
            du, dv = direction
            preferred = [(-dv, du), (du, dv), (dv, -du)]  # left, straight, right
            nxt = min(
                ends,
                key=lambda e: preferred.index((e[0] - point[0], e[1] - point[1])),
            )
        ends.remove(nxt)
        if not ends:
            del outgoing[point]
        return nxt

    rings: List[Ring] = []
    while outgoing:
        # the lowest remaining vertex is never a pinch, so the walk closes there
        start = min(outgoing)
        ring = [start]
        current = take(start, None)
        previous = start
        while current != start:
            ring.append(current)
            direction = (current[0] - previous[0], current[1] - previous[1])
            previous, current = current, take(current, direction)
        rings.append(ring)
    return rings


def simplify_ring(ring: Ring) -> Ring:
    """Drop vertices where the walk continues straight on."""
    out: Ring = []
    n = len(ring)
    for k in range(n):
        prev, cur, nxt = ring[k - 1], ring[k], ring[(k + 1) % n]
        d1 = (cur[0] - prev[0], cur[1] - prev[1])
        d2 = (nxt[0] - cur[0], nxt[1] - cur[1])
        if d1[0] * d2[1] - d1[1] * d2[0] != 0 or d1[0] * d2[0] + d1[1] * d2[1] < 0:
            out.append(cur)
    return out


def signed_area(points: Sequence[Point2]) -> float:
    total = 0.0
    for k in range(len(points)):
        x0, y0 = points[k - 1]
        x1, y1 = points[k]
        total += x0 * y1 - x1 * y0
    return total / 2.0


def _cross(o: Point2, a: Point2, b: Point2) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _in_sector(origin: Point2, prev: Point2, nxt: Point2, target: Point2) -> bool:
    """True when ``target`` lies strictly inside the region angle at ``origin``.

    The region angle sweeps counter-clockwise from the outgoing edge direction
    to the incoming edge's reverse direction.
    """
    start = math.atan2(nxt[1] - origin[1], nxt[0] - origin[0])
    stop = math.atan2(prev[1] - origin[1], prev[0] - origin[0])
    heading = math.atan2(target[1] - origin[1], target[0] - origin[0])
    sweep = (stop - start) % (2 * math.pi)
    if sweep == 0:
        sweep = 2 * math.pi
    rel = (heading - start) % (2 * math.pi)
    return 1e-12 < rel < sweep - 1e-12


def _segments_touch(
    p1: Point2, p2: Point2, q1: Point2, q2: Point2, eps: float
) -> bool:
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True

    def on_segment(a: Point2, b: Point2, p: Point2, d: float) -> bool:
        return (
            abs(d) <= eps
            and min(a[0], b[0]) - eps <= p[0] <= max(a[0], b[0]) + eps
            and min(a[1], b[1]) - eps <= p[1] <= max(a[1], b[1]) + eps
        )

    return (
        on_segment(q1, q2, p1, d1)
        or on_segment(q1, q2, p2, d2)
        or on_segment(p1, p2, q1, d3)
        or on_segment(p1, p2, q2, d4)
    )


def _point_in_rings(point: Point2, rings: Sequence[Sequence[Point2]]) -> bool:
    inside = False
    x, y = point
    for ring in rings:
        for k in range(len(ring)):
            (x0, y0), (x1, y1) = ring[k - 1], ring[k]
            if (y0 > y) != (y1 > y):
                if x < x0 + (y - y0) * (x1 - x0) / (y1 - y0):
                    inside = not inside
    return inside


def _bridge(
    outer: List[int],
    hole: List[int],
    others: Sequence[List[int]],
    xy: Sequence[Point2],
    eps: float,
) -> List[int]:
    """Splice ``hole`` into ``outer`` through the shortest valid bridge."""
    candidates = sorted(
        (
            (xy[o][0] - xy[h][0]) ** 2 + (xy[o][1] - xy[h][1]) ** 2,
            i,
            j,
        )
        for i, o in enumerate(outer)
        for j, h in enumerate(hole)
    )
    rings = [outer, hole, *others]
    edges = [(ring[k - 1], ring[k]) for ring in rings for k in range(len(ring))]
    region = [[xy[p] for p in ring] for ring in rings]

    for _, i, j in candidates:
        o, h = outer[i], hole[j]
        po, ph = xy[o], xy[h]
        if po == ph:
            continue
        if not _in_sector(po, xy[outer[i - 1]], xy[outer[(i + 1) % len(outer)]], ph):
            continue
        if not _in_sector(ph, xy[hole[j - 1]], xy[hole[(j + 1) % len(hole)]], po):
            continue
        blocked = False
        for a, b in edges:
            if xy[a] in (po, ph) or xy[b] in (po, ph):
                continue
            if _segments_touch(po, ph, xy[a], xy[b], eps):
                blocked = True
                break
        if blocked:
            continue
        midpoint = ((po[0] + ph[0]) / 2.0, (po[1] + ph[1]) / 2.0)
        if not _point_in_rings(midpoint, region):
            continue
        return outer[: i + 1] + hole[j:] + hole[: j + 1] + outer[i:]
    raise TriangulationError("No valid bridge from hole to outer boundary")


def _is_ear(ring: List[int], k: int, xy: Sequence[Point2], eps: float) -> bool:
    n = len(ring)
    ia, ib, ic = ring[k - 1], ring[k], ring[(k + 1) % n]
    a, b, c = xy[ia], xy[ib], xy[ic]
    if _cross(a, b, c) <= eps:
        return False
    corners = (a, b, c)
    for m in range(n):
        if m in ((k - 1) % n, k, (k + 1) % n):
            continue
        p = xy[ring[m]]
        if p in corners:
            # another visit of a corner: its edges must stay out of the triangle
            at = corners.index(p)
            origin, left, right = p, corners[at - 1], corners[(at + 1) % 3]
            for q in (xy[ring[m - 1]], xy[ring[(m + 1) % n]]):
                if q == origin:
                    continue
                if _cross(origin, right, q) > eps and _cross(origin, q, left) > eps:
                    return False
            continue
        if (
            _cross(a, b, p) >= -eps
            and _cross(b, c, p) >= -eps
            and _cross(c, a, p) >= -eps
        ):
            return False
    return True


def _ear_clip(
    ring: List[int], xy: Sequence[Point2], eps: float
) -> List[Tuple[int, int, int]]:
    ring = list(ring)
    triangles: List[Tuple[int, int, int]] = []
    while len(ring) > 3:
        # drop zero-width spikes left behind by consumed bridges
        n = len(ring)
        spike = next(
            (k for k in range(n) if xy[ring[k - 1]] == xy[ring[(k + 1) % n]]), None
        )
        if spike is not None:
            ring.pop(spike)
            ring.pop(spike % len(ring))
            continue
        for k in range(n):
            if _is_ear(ring, k, xy, eps):
                triangles.append((ring[k - 1], ring[k], ring[(k + 1) % n]))
                ring.pop(k)
                break
        else:
            raise TriangulationError(f"No ear found in ring of {n} vertices")
    if len(ring) == 3 and _cross(*(xy[p] for p in ring)) > eps:
        triangles.append(tuple(ring))
    return triangles


def triangulate_rings(
    rings: Sequence[Ring], to_xy: Callable[[GridPoint], Point2]
) -> List[Tuple[GridPoint, GridPoint, GridPoint]]:
    """Counter-clockwise triangles covering one connected region.

    ``rings`` holds the region's counter-clockwise outer ring and its clockwise
    holes; ``to_xy`` maps grid points to plane coordinates.
    """
    points: List[GridPoint] = []
    index_rings: List[List[int]] = []
    for ring in rings:
        index_rings.append(list(range(len(points), len(points) + len(ring))))
        points.extend(ring)
    xy = [tuple(float(c) for c in to_xy(p)) for p in points]

    areas = [signed_area([xy[p] for p in ring]) for ring in index_rings]
    outers = [r for r, area in zip(index_rings, areas) if area > 0]
    holes = [r for r, area in zip(index_rings, areas) if area < 0]
    if len(outers) != 1:
        raise TriangulationError(f"Expected one outer ring, found {len(outers)}")

    scale = max(max(abs(c) for c in p) for p in xy) or 1.0
    eps = 1e-12 * scale * scale

    outer = outers[0]
    holes.sort(key=lambda ring: max(xy[p] for p in ring), reverse=True)
    while holes:
        hole = holes.pop(0)
        outer = _bridge(outer, hole, holes, xy, eps)

    return [
        (points[a], points[b], points[c]) for a, b, c in _ear_clip(outer, xy, eps)
    ]
