"""Exact slope calculus and stability classification.

Degrees and slopes mix the +/- degrees of each vertex by a weight
``alpha`` in (0,1), scale by ``sigma > 0`` and shift by ``tau``:

    deg(F)  = sum_i  alpha_i sigma_i deg+(F_i)
            + sum_i (1-alpha_i) sigma_i deg-(F_i)
            - sum_i  tau_i rk(F_i)
    slope(F) = deg(F) / sum_i sigma_i rk(F_i)

All arithmetic is exact (fractions.Fraction); comparisons have zero
tolerance.

Subobject universe: for rank-1-per-vertex models the proper nonempty
arrow-closed supports (the saturated summand-supported subobjects);
twisting a summand down strictly lowers both degrees and slope is
strictly increasing in degrees, so nothing else can maximize slope.
Higher-rank vertices require a declared lattice.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .errors import (
    BadParamsError,
    BadSubobjectError,
    NoSubobjectsError,
    UnsupportedRankError,
    ZeroRankError,
)
from .quiver import QBundleModel

ENUMERATED = "enumerated"
DECLARED = "declared"


@dataclass(frozen=True)
class StabilityParams:
    """Per-vertex stability parameters; exact rationals only."""

    alpha: Mapping[str, Fraction]
    sigma: Mapping[str, Fraction]
    tau: Mapping[str, Fraction]

    def __post_init__(self):
        for v, a in self.alpha.items():
            if not (0 < a < 1):
                raise BadParamsError(f"alpha[{v!r}] = {a} not in (0,1)")
        for v, s in self.sigma.items():
            if not s > 0:
                raise BadParamsError(f"sigma[{v!r}] = {s} must be positive")

    def check_covers(self, vertices: Sequence[str]) -> None:
        for name, m in (("alpha", self.alpha), ("sigma", self.sigma), ("tau", self.tau)):
            missing = [v for v in vertices if v not in m]
            if missing:
                raise BadParamsError(f"{name} missing vertices {missing}")

    def with_tau(self, tau: Mapping[str, Fraction]) -> "StabilityParams":
        return StabilityParams(alpha=self.alpha, sigma=self.sigma, tau=dict(tau))


@dataclass(frozen=True)
class SubobjectEntry:
    rank: int
    deg_plus: int
    deg_minus: int


@dataclass(frozen=True)
class SubobjectSpec:
    entries: Mapping[str, SubobjectEntry]
    provenance: str
    name: str = ""

    @property
    def support(self) -> tuple[str, ...]:
        return tuple(v for v, e in self.entries.items() if e.rank > 0)

    def describe(self) -> str:
        return self.name or "{" + ",".join(self.support) + "}"


@dataclass(frozen=True)
class SlopeReport:
    degree: Fraction
    sigma_rank: Fraction
    slope: Fraction


def _entries_of_model(model: QBundleModel) -> dict[str, SubobjectEntry]:
    return {
        v: SubobjectEntry(d.rank, d.deg_plus, d.deg_minus)
        for v, d in model.vertex_data.items()
    }


def deg_slope(
    model: QBundleModel,
    sub: Optional[SubobjectSpec],
    params: StabilityParams,
) -> SlopeReport:
    """Exact (alpha, sigma, tau)-degree and slope of ``sub`` (None = full model)."""
    params.check_covers(model.quiver.vertices)
    entries = _entries_of_model(model) if sub is None else sub.entries
    degree = Fraction(0)
    sigma_rank = Fraction(0)
    for v in model.quiver.vertices:
        e = entries.get(v, SubobjectEntry(0, 0, 0))
        a, s, t = params.alpha[v], params.sigma[v], params.tau[v]
        degree += a * s * e.deg_plus + (1 - a) * s * e.deg_minus - t * e.rank
        sigma_rank += s * e.rank
    if sigma_rank == 0:
        raise ZeroRankError("subobject has total rank zero")
    return SlopeReport(degree=degree, sigma_rank=sigma_rank, slope=degree / sigma_rank)


def subobject_from_support(model: QBundleModel, support: Sequence[str]) -> SubobjectSpec:
    """The saturated summand-supported subobject on ``support`` of a
    rank-1-per-vertex model (degrees copied from the model)."""
    support = tuple(support)
    entries = {}
    for v in model.quiver.vertices:
        d = model.vertex_data[v]
        if v in support:
            entries[v] = SubobjectEntry(d.rank, d.deg_plus, d.deg_minus)
        else:
            entries[v] = SubobjectEntry(0, 0, 0)
    return SubobjectSpec(
        entries=entries,
        provenance=ENUMERATED,
        name="{" + ",".join(support) + "}",
    )


def support_is_arrow_closed(model: QBundleModel, support: Sequence[str]) -> bool:
    """True when every nonzero arrow whose tail lies in the support also has
    its head in the support (phi maps the subobject into itself)."""
    sset = set(support)
    for arrow in model.quiver.arrows:
        if model.arrow_is_nonzero(arrow.id) and arrow.tail in sset and arrow.head not in sset:
            return False
    return True


def arrow_closure(model: QBundleModel, support: Sequence[str]) -> tuple[str, ...]:
    """Smallest arrow-closed vertex set containing ``support``."""
    sset = set(support)
    changed = True
    while changed:
        changed = False
        for arrow in model.quiver.arrows:
            if model.arrow_is_nonzero(arrow.id) and arrow.tail in sset and arrow.head not in sset:
                sset.add(arrow.head)
                changed = True
    return tuple(v for v in model.quiver.vertices if v in sset)


def validate_declared(model: QBundleModel) -> tuple[SubobjectSpec, ...]:
    """Check every declared subobject against the model invariants."""
    full = _entries_of_model(model)
    out = []
    for k, sub in enumerate(model.declared_subobjects or ()):
        where = f"declared subobject {sub.name or k}"
        total_rank = 0
        for v in model.quiver.vertices:
            e = sub.entries.get(v, SubobjectEntry(0, 0, 0))
            if not (0 <= e.rank <= model.rank(v)):
                raise BadSubobjectError(
                    f"{where}: rank {e.rank} at {v!r} outside [0, {model.rank(v)}]"
                )
            if e.rank == 0 and (e.deg_plus, e.deg_minus) != (0, 0):
                raise BadSubobjectError(f"{where}: rank-0 vertex {v!r} with nonzero degree")
            total_rank += e.rank
        if total_rank == 0:
            raise BadSubobjectError(f"{where}: all ranks zero")
        same = all(
            sub.entries.get(v, SubobjectEntry(0, 0, 0)) == full[v]
            for v in model.quiver.vertices
        )
        if same:
            raise BadSubobjectError(f"{where}: equal to the full model")
        out.append(sub)
    return tuple(out)


def enumerate_subobjects(model: QBundleModel) -> list[SubobjectSpec]:
    """Subobject universe of the model.

    Rank-1-per-vertex models get exactly the proper nonempty arrow-closed
    supports, ordered by (support size, vertex order).  Models with a
    rank >= 2 vertex return their declared lattice verbatim after
    validation.
    """
    if model.is_rank_one():
        verts = model.quiver.vertices
        out = []
        for size in range(1, len(verts)):
            for combo in itertools.combinations(range(len(verts)), size):
                support = tuple(verts[i] for i in combo)
                if support_is_arrow_closed(model, support):
                    out.append(subobject_from_support(model, support))
        return out
    if model.declared_subobjects is not None:
        return list(validate_declared(model))
    bad = [v for v in model.quiver.vertices if model.rank(v) >= 2]
    raise UnsupportedRankError(
        f"vertices {bad} have rank >= 2 and no declared subobject lattice"
    )


class Verdict(Enum):
    STABLE = "Stable"
    STRICTLY_SEMISTABLE = "StrictlySemistable"
    UNSTABLE = "Unstable"
    VACUOUSLY_STABLE = "VacuouslyStable"


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    total: SlopeReport
    witnesses: tuple[tuple[SubobjectSpec, SlopeReport], ...] = ()

    @property
    def is_stable(self) -> bool:
        return self.verdict in (Verdict.STABLE, Verdict.VACUOUSLY_STABLE)


def classify(model: QBundleModel, params: StabilityParams) -> Classification:
    """Exact stability classification over the model's subobject universe.

    Stable iff every subobject has strictly smaller slope; strictly
    semistable iff <= holds everywhere with equality achieved (equality
    witnesses returned); unstable otherwise (every slope-exceeding
    subobject returned); vacuously stable when no proper subobject exists.
    """
    total = deg_slope(model, None, params)
    subs = enumerate_subobjects(model)
    if not subs:
        return Classification(verdict=Verdict.VACUOUSLY_STABLE, total=total)
    scored = [(sub, deg_slope(model, sub, params)) for sub in subs]
    above = tuple((s, r) for s, r in scored if r.slope > total.slope)
    equal = tuple((s, r) for s, r in scored if r.slope == total.slope)
    if above:
        return Classification(Verdict.UNSTABLE, total, witnesses=above)
    if equal:
        return Classification(Verdict.STRICTLY_SEMISTABLE, total, witnesses=equal)
    return Classification(Verdict.STABLE, total)


def _tiebreak_key(model: QBundleModel, position: int, sub: SubobjectSpec):
    indices = tuple(model.quiver.vertex_index(v) for v in sub.support)
    return (len(indices), indices, position)


def max_slope_subobject(
    model: QBundleModel, params: StabilityParams
) -> tuple[SubobjectSpec, SlopeReport]:
    """A slope-maximizing subobject; ties broken by smallest support in the
    canonical vertex order, so the answer is deterministic."""
    subs = enumerate_subobjects(model)
    if not subs:
        raise NoSubobjectsError("model has no proper subobjects")
    scored = [(sub, deg_slope(model, sub, params)) for sub in subs]
    best = max(r.slope for _, r in scored)
    candidates = [(i, s, r) for i, (s, r) in enumerate(scored) if r.slope == best]
    i, sub, report = min(candidates, key=lambda t: _tiebreak_key(model, t[0], t[1]))
    return sub, report
