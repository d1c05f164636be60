"""Quiver combinatorics and the discrete quiver-bundle model.

A model assigns to each vertex a direct sum of line summands (with a pair
of integer degrees each) and to each arrow a block matrix of sections.
Only split models are representable; this makes subobject enumeration
decidable and matches the worked line-bundle fixtures.

Two base fixtures exist:

* ``P1`` -- the round sphere.  Summands are O(m) with equal +/- degrees;
  arrow sections are polynomials in the affine coordinate, one block per
  (head summand, tail summand) pair, subject to the Hom vanishing rule
  dim H0(O(d)) = max(0, d+1).
* ``HopfTable`` -- analytic degrees only (no grid, no PDE).  Summands are
  bidegree pairs (m, -m); a nonzero arrow block requires equal bidegrees
  of its source and target summands.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .errors import (
    DanglingEndpointError,
    DegreeMismatchError,
    DuplicateIdError,
    FixtureViolationError,
    IllegalSectionError,
    ModelValidationError,
)

P1 = "P1"
HOPF_TABLE = "HopfTable"
FIXTURES = (P1, HOPF_TABLE)


@dataclass(frozen=True)
class Arrow:
    id: str
    tail: str
    head: str


@dataclass(frozen=True)
class Quiver:
    vertices: tuple[str, ...]
    arrows: tuple[Arrow, ...]

    def vertex_index(self, v: str) -> int:
        return self.vertices.index(v)

    def arrows_into(self, v: str) -> tuple[Arrow, ...]:
        return tuple(a for a in self.arrows if a.head == v)

    def arrows_out_of(self, v: str) -> tuple[Arrow, ...]:
        return tuple(a for a in self.arrows if a.tail == v)


def build_quiver(vertices: Sequence[str], arrows: Sequence) -> Quiver:
    """Build a quiver, checking identifier uniqueness and arrow endpoints.

    ``arrows`` entries are either ``Arrow`` instances or ``(id, tail, head)``
    triples.  Loops (tail == head) are permitted; the stability layer treats
    them uniformly.
    """
    verts = tuple(str(v) for v in vertices)
    seen = set()
    for v in verts:
        if v in seen:
            raise DuplicateIdError(f"duplicate vertex id {v!r}")
        seen.add(v)
    built = []
    arrow_ids = set()
    for a in arrows:
        if not isinstance(a, Arrow):
            a = Arrow(str(a[0]), str(a[1]), str(a[2]))
        if a.id in arrow_ids:
            raise DuplicateIdError(f"duplicate arrow id {a.id!r}")
        arrow_ids.add(a.id)
        for endpoint in (a.tail, a.head):
            if endpoint not in seen:
                raise DanglingEndpointError(
                    f"arrow {a.id!r} references unknown vertex {endpoint!r}"
                )
        built.append(a)
    return Quiver(vertices=verts, arrows=tuple(built))


@dataclass(frozen=True)
class Summand:
    """One line summand, identified by its pair of +/- degrees."""

    deg_plus: int
    deg_minus: int


@dataclass(frozen=True)
class VertexBundleData:
    summands: tuple[Summand, ...]

    def __post_init__(self):
        if len(self.summands) < 1:
            raise ModelValidationError(
                [FixtureViolationError("vertex needs at least one summand")]
            )

    @property
    def rank(self) -> int:
        return len(self.summands)

    @property
    def deg_plus(self) -> int:
        return sum(s.deg_plus for s in self.summands)

    @property
    def deg_minus(self) -> int:
        return sum(s.deg_minus for s in self.summands)


@dataclass(frozen=True)
class PolySection:
    """Polynomial section of O(d) on the P1 fixture, coefficients in the
    affine coordinate: p(z) = sum coeffs[k] * z**k.  Trailing zeros are
    trimmed on construction, so len(coeffs) <= d+1 for a valid section."""

    coeffs: tuple[complex, ...]

    def __post_init__(self):
        trimmed = tuple(complex(c) for c in self.coeffs)
        while trimmed and trimmed[-1] == 0:
            trimmed = trimmed[:-1]
        object.__setattr__(self, "coeffs", trimmed)

    @property
    def is_zero(self) -> bool:
        return len(self.coeffs) == 0

    @property
    def degree(self) -> int:
        """Degree of the polynomial; -1 for the zero section."""
        return len(self.coeffs) - 1


@dataclass(frozen=True)
class ConstSection:
    """Scalar section on the HopfTable fixture; only zero vs nonzero matters."""

    value: complex

    @property
    def is_zero(self) -> bool:
        return self.value == 0


Section = Optional[object]  # PolySection | ConstSection | None (= zero)


def _section_is_zero(section) -> bool:
    return section is None or section.is_zero


@dataclass(frozen=True)
class ArrowData:
    """Block matrix of sections, head-rank rows by tail-rank columns."""

    blocks: tuple[tuple[Section, ...], ...]

    @property
    def is_zero(self) -> bool:
        return all(_section_is_zero(s) for row in self.blocks for s in row)


@dataclass(frozen=True)
class QBundleModel:
    base: str
    quiver: Quiver
    vertex_data: Mapping[str, VertexBundleData]
    arrow_data: Mapping[str, ArrowData]
    declared_subobjects: Optional[tuple] = None

    def rank(self, v: str) -> int:
        return self.vertex_data[v].rank

    def is_rank_one(self) -> bool:
        return all(d.rank == 1 for d in self.vertex_data.values())

    def arrow_is_nonzero(self, arrow_id: str) -> bool:
        return not self.arrow_data[arrow_id].is_zero


class ValidatedModel(QBundleModel):
    """Marker subclass returned by validate_model; immutable and shareable."""


def _collect_errors(model: QBundleModel) -> list:
    errors = []
    if model.base not in FIXTURES:
        errors.append(FixtureViolationError(f"unknown fixture {model.base!r}"))
        return errors
    quiver = model.quiver

    missing = [v for v in quiver.vertices if v not in model.vertex_data]
    extra = [v for v in model.vertex_data if v not in quiver.vertices]
    if missing or extra:
        errors.append(
            FixtureViolationError(
                f"vertex_data must cover Q0 exactly (missing {missing}, extra {extra})"
            )
        )
        return errors
    missing = [a.id for a in quiver.arrows if a.id not in model.arrow_data]
    extra = [k for k in model.arrow_data if k not in {a.id for a in quiver.arrows}]
    if missing or extra:
        errors.append(
            FixtureViolationError(
                f"arrow_data must cover Q1 exactly (missing {missing}, extra {extra})"
            )
        )
        return errors

    for v in quiver.vertices:
        data = model.vertex_data[v]
        for k, s in enumerate(data.summands):
            if model.base == P1 and s.deg_plus != s.deg_minus:
                errors.append(
                    FixtureViolationError(
                        f"vertex {v!r} summand {k}: P1 needs deg_plus == deg_minus, "
                        f"got ({s.deg_plus}, {s.deg_minus})"
                    )
                )
            if model.base == HOPF_TABLE and s.deg_minus != -s.deg_plus:
                # Rank >= 2 vertices backed by a declared subobject lattice may
                # carry extension-quotient bidegrees outside the L+/L- table.
                if not (data.rank >= 2 and model.declared_subobjects is not None):
                    errors.append(
                        FixtureViolationError(
                            f"vertex {v!r} summand {k}: HopfTable needs "
                            f"deg_minus == -deg_plus, got ({s.deg_plus}, {s.deg_minus})"
                        )
                    )

    for arrow in quiver.arrows:
        data = model.arrow_data[arrow.id]
        head = model.vertex_data[arrow.head]
        tail = model.vertex_data[arrow.tail]
        if len(data.blocks) != head.rank or any(
            len(row) != tail.rank for row in data.blocks
        ):
            errors.append(
                FixtureViolationError(
                    f"arrow {arrow.id!r}: block shape must be "
                    f"{head.rank}x{tail.rank}"
                )
            )
            continue
        for A, row in enumerate(data.blocks):
            for B, section in enumerate(row):
                if _section_is_zero(section):
                    continue
                hs, ts = head.summands[A], tail.summands[B]
                where = f"arrow {arrow.id!r} block ({A},{B})"
                if model.base == P1:
                    if not isinstance(section, PolySection):
                        errors.append(
                            FixtureViolationError(f"{where}: P1 sections are polynomial")
                        )
                        continue
                    d = hs.deg_plus - ts.deg_plus
                    if d < 0:
                        errors.append(
                            IllegalSectionError(
                                f"{where}: H0(O({d})) = 0, section must vanish"
                            )
                        )
                    elif section.degree > d:
                        errors.append(
                            DegreeMismatchError(
                                f"{where}: polynomial degree {section.degree} > {d}"
                            )
                        )
                else:
                    if not isinstance(section, ConstSection):
                        errors.append(
                            FixtureViolationError(
                                f"{where}: HopfTable sections are scalar constants"
                            )
                        )
                        continue
                    if (hs.deg_plus, hs.deg_minus) != (ts.deg_plus, ts.deg_minus):
                        errors.append(
                            IllegalSectionError(
                                f"{where}: Hom vanishes between bidegrees "
                                f"({ts.deg_plus},{ts.deg_minus}) and "
                                f"({hs.deg_plus},{hs.deg_minus})"
                            )
                        )
    return errors


def validate_model(model: QBundleModel) -> ValidatedModel:
    """Check every holomorphicity/fixture constraint; return a sealed model.

    Idempotent: validating a ValidatedModel returns it unchanged.  On
    failure raises ModelValidationError carrying the full error list.
    """
    if isinstance(model, ValidatedModel):
        return model
    errors = _collect_errors(model)
    if errors:
        raise ModelValidationError(errors)
    return ValidatedModel(
        base=model.base,
        quiver=model.quiver,
        vertex_data=dict(model.vertex_data),
        arrow_data=dict(model.arrow_data),
        declared_subobjects=model.declared_subobjects,
    )
