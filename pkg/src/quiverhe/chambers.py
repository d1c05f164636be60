"""Wall-and-chamber decomposition of the tau parameter space.

At fixed (alpha, sigma) the slope-equality locus of a subobject F,
mu(F; tau) = mu(E; tau), cross-multiplies to an affine hyperplane in tau:

    sum_i tau_i * [rk(E_i) Ssig(F) - rk(F_i) Ssig(E)]
        = D(E) Ssig(F) - D(F) Ssig(E)

with D the tau-free part of the degree and Ssig(.) = sum_i sigma_i rk(.).
Walls are deduplicated exactly (proportional normal/offset pairs merged).
Exact cell geometry is computed only for two-vertex quivers; higher
vertex counts are served by point classification alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .errors import DimensionUnsupportedError
from .quiver import QBundleModel
from .stability import (
    Classification,
    StabilityParams,
    SubobjectSpec,
    classify,
    deg_slope,
    enumerate_subobjects,
)


@dataclass(frozen=True)
class Wall:
    """Affine hyperplane {tau : sum_i normal[i] tau_i = offset}."""

    normal: Mapping[str, Fraction]
    offset: Fraction
    sources: tuple[SubobjectSpec, ...]

    def evaluate(self, tau: Mapping[str, Fraction]) -> Fraction:
        return sum((c * tau[v] for v, c in self.normal.items()), Fraction(0)) - self.offset


@dataclass(frozen=True)
class DegenerateDirection:
    """Subobject whose equality locus is empty or all of tau-space."""

    source: SubobjectSpec
    everywhere_equal: bool


@dataclass(frozen=True)
class WallSet:
    walls: tuple[Wall, ...]
    degenerate: tuple[DegenerateDirection, ...]


def _zero_tau(vertices) -> dict[str, Fraction]:
    return {v: Fraction(0) for v in vertices}


def _raw_wall(model, sub, params0) -> tuple[tuple[Fraction, ...], Fraction]:
    """Normal coefficients (vertex order) and offset, before canonicalization."""
    full = deg_slope(model, None, params0)
    part = deg_slope(model, sub, params0)
    coeffs = []
    for v in model.quiver.vertices:
        rk_e = model.vertex_data[v].rank
        rk_f = sub.entries.get(v).rank if v in sub.entries else 0
        coeffs.append(rk_e * part.sigma_rank - rk_f * full.sigma_rank)
    offset = full.degree * part.sigma_rank - part.degree * full.sigma_rank
    return tuple(coeffs), offset


def _canonicalize(coeffs, offset):
    """Scale so the first nonzero coefficient is 1; degenerate if all zero."""
    for c in coeffs:
        if c != 0:
            return tuple(x / c for x in coeffs), offset / c
    return None


def wall_set(
    model: QBundleModel,
    alpha: Mapping[str, Fraction],
    sigma: Mapping[str, Fraction],
) -> WallSet:
    """One wall per subobject, exactly deduplicated; degenerate equality
    loci (normal identically zero) are dropped from the wall list and
    reported separately."""
    params0 = StabilityParams(alpha=dict(alpha), sigma=dict(sigma),
                              tau=_zero_tau(model.quiver.vertices))
    merged: dict = {}
    order: list = []
    degenerate = []
    for sub in enumerate_subobjects(model):
        coeffs, offset = _raw_wall(model, sub, params0)
        canon = _canonicalize(coeffs, offset)
        if canon is None:
            degenerate.append(DegenerateDirection(sub, everywhere_equal=(offset == 0)))
            continue
        key = canon
        if key not in merged:
            merged[key] = []
            order.append(key)
        merged[key].append(sub)
    walls = []
    for coeffs, offset in order:
        normal = dict(zip(model.quiver.vertices, coeffs))
        walls.append(Wall(normal=normal, offset=offset,
                          sources=tuple(merged[(coeffs, offset)])))
    return WallSet(walls=tuple(walls), degenerate=tuple(degenerate))


@dataclass(frozen=True)
class Cell:
    representative: tuple[Fraction, Fraction]
    classification: Classification
    signs: tuple[int, ...]  # side of each wall, in wall order (+1/-1)


@dataclass(frozen=True)
class ChamberArrangement:
    walls: tuple[Wall, ...]
    cells: tuple[Cell, ...]
    dimension: int
    bounding_box: tuple[Fraction, Fraction, Fraction, Fraction]
    degenerate: tuple[DegenerateDirection, ...] = ()


def _as_line(wall: Wall, vertices) -> tuple[Fraction, Fraction, Fraction]:
    """Wall as a*x + b*y = c in the (tau_v0, tau_v1)-plane."""
    v0, v1 = vertices
    return (wall.normal[v0], wall.normal[v1], wall.offset)


def _intersect(l1, l2):
    a1, b1, c1 = l1
    a2, b2, c2 = l2
    det = a1 * b2 - a2 * b1
    if det == 0:
        return None
    x = (c1 * b2 - c2 * b1) / det
    y = (a1 * c2 - a2 * c1) / det
    return x, y


def arrange_2d(
    walls: Sequence[Wall],
    bounding_box: Sequence,
    vertices: Sequence[str],
    classifier: Callable[[tuple[Fraction, Fraction]], Classification],
) -> tuple[Cell, ...]:
    """Cells of the planar arrangement of ``walls`` clipped to the box.

    Each cell is found through midpoint refinement in exact arithmetic:
    vertical sample lines halfway between consecutive arrangement
    x-coordinates, then sample points halfway between consecutive wall
    crossings on each line.  Cells are exactly the distinct wall-side sign
    vectors realized, each with a rational interior representative.
    """
    if len(vertices) != 2:
        raise DimensionUnsupportedError(
            f"exact arrangements need |Q0| = 2, got {len(vertices)}"
        )
    xmin, xmax, ymin, ymax = (Fraction(b) for b in bounding_box)
    if not (xmin < xmax and ymin < ymax):
        raise DimensionUnsupportedError("bounding box must have positive extent")
    lines = [_as_line(w, vertices) for w in walls]
    box_edges = [
        (Fraction(1), Fraction(0), xmin),
        (Fraction(1), Fraction(0), xmax),
        (Fraction(0), Fraction(1), ymin),
        (Fraction(0), Fraction(1), ymax),
    ]
    all_lines = lines + box_edges

    xs = {xmin, xmax}
    for i in range(len(all_lines)):
        for j in range(i + 1, len(all_lines)):
            pt = _intersect(all_lines[i], all_lines[j])
            if pt is not None and xmin <= pt[0] <= xmax:
                xs.add(pt[0])
    xs = sorted(xs)

    cells: dict[tuple[int, ...], Cell] = {}
    order: list[tuple[int, ...]] = []
    for xa, xb in zip(xs, xs[1:]):
        x_mid = (xa + xb) / 2
        ys = {ymin, ymax}
        for a, b, c in lines:
            if b != 0:
                y = (c - a * x_mid) / b
                if ymin <= y <= ymax:
                    ys.add(y)
        ys = sorted(ys)
        for ya, yb in zip(ys, ys[1:]):
            point = (x_mid, (ya + yb) / 2)
            signs = tuple(
                1 if (a * point[0] + b * point[1] - c) > 0 else -1
                for a, b, c in lines
            )
            if signs not in cells:
                cells[signs] = Cell(
                    representative=point,
                    classification=classifier(point),
                    signs=signs,
                )
                order.append(signs)
    return tuple(cells[s] for s in order)


def classify_sample(
    model: QBundleModel,
    alpha: Mapping[str, Fraction],
    sigma: Mapping[str, Fraction],
    tau_point: Mapping[str, Fraction],
) -> Classification:
    """Classification at one rational tau point; works for any vertex count."""
    params = StabilityParams(alpha=dict(alpha), sigma=dict(sigma), tau=dict(tau_point))
    return classify(model, params)


def chamber_arrangement(
    model: QBundleModel,
    alpha: Mapping[str, Fraction],
    sigma: Mapping[str, Fraction],
    bounding_box: Sequence,
) -> ChamberArrangement:
    """Walls plus classified chamber cells in the two-vertex tau-plane."""
    vertices = model.quiver.vertices
    if len(vertices) != 2:
        raise DimensionUnsupportedError(
            f"exact arrangements need |Q0| = 2, got {len(vertices)}; "
            "use classify_sample for higher vertex counts"
        )
    ws = wall_set(model, alpha, sigma)

    def classifier(point):
        tau = {vertices[0]: point[0], vertices[1]: point[1]}
        return classify_sample(model, alpha, sigma, tau)

    cells = arrange_2d(ws.walls, bounding_box, vertices, classifier)
    box = tuple(Fraction(b) for b in bounding_box)
    return ChamberArrangement(
        walls=ws.walls,
        cells=cells,
        dimension=len(vertices),
        bounding_box=box,
        degenerate=ws.degenerate,
    )
