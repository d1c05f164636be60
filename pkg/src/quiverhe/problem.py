"""Problem-file ingestion and canonical serialization.

A problem file is JSON carrying the base fixture (plus grid resolution
and volume for the sphere), the quiver, per-vertex summand data, arrow
section specs, exact rational stability parameters, an optional declared
subobject lattice, and optional solver overrides.  Rationals travel as
strings ("p/q") or integers; they never pass through floating point.

``serialize`` emits a canonical form (sorted keys, normalized numbers,
two-space indent) so that parse -> serialize is byte-stable; the content
hash of that form is the input digest carried by every report.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import ProblemFileError
from .quiver import (
    HOPF_TABLE,
    P1,
    ArrowData,
    ConstSection,
    PolySection,
    QBundleModel,
    Summand,
    ValidatedModel,
    VertexBundleData,
    build_quiver,
    validate_model,
)
from .rationals import format_rational, parse_rational
from .stability import DECLARED, StabilityParams, SubobjectEntry, SubobjectSpec

DEFAULT_GRID = (64, 128)


@dataclass(frozen=True)
class GridSpec:
    n_theta: int
    n_phi: int
    total_volume: Fraction


@dataclass
class Problem:
    model: ValidatedModel
    params: StabilityParams
    grid: GridSpec
    solver_overrides: dict


def _parse_number(value, where: str) -> complex:
    if isinstance(value, bool):
        raise ProblemFileError(f"{where}: booleans are not coefficients")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ProblemFileError(f"{where}: expected number or [re, im], got {value!r}")


def _emit_number(c: complex):
    def real_part(x: float):
        return int(x) if float(x).is_integer() else float(x)

    if c.imag == 0:
        return real_part(c.real)
    return [real_part(c.real), real_part(c.imag)]


def _parse_section(spec, fixture: str, where: str):
    if spec is None or spec == 0:
        return None
    if not isinstance(spec, dict):
        raise ProblemFileError(f"{where}: section must be null or an object")
    if "poly" in spec:
        coeffs = [_parse_number(c, where) for c in spec["poly"]]
        return PolySection(tuple(coeffs))
    if "const" in spec:
        return ConstSection(_parse_number(spec["const"], where))
    raise ProblemFileError(f"{where}: section needs a 'poly' or 'const' key")


def _emit_section(section):
    if section is None:
        return None
    if isinstance(section, PolySection):
        if section.is_zero:
            return None
        return {"poly": [_emit_number(c) for c in section.coeffs]}
    if isinstance(section, ConstSection):
        if section.is_zero:
            return None
        return {"const": _emit_number(section.value)}
    raise ProblemFileError(f"unknown section type {type(section).__name__}")


def _require(mapping, key, where):
    if key not in mapping:
        raise ProblemFileError(f"{where}: missing key {key!r}")
    return mapping[key]


def parse_problem(doc) -> Problem:
    """Parse and fully validate a problem document (dict or JSON text)."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ProblemFileError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ProblemFileError("problem document must be a JSON object")

    base = _require(doc, "base", "problem")
    fixture = _require(base, "fixture", "base")
    if fixture not in (P1, HOPF_TABLE):
        raise ProblemFileError(f"base.fixture must be P1 or HopfTable, got {fixture!r}")
    grid_doc = base.get("grid") or {}
    grid = GridSpec(
        n_theta=int(grid_doc.get("n_theta", DEFAULT_GRID[0])),
        n_phi=int(grid_doc.get("n_phi", DEFAULT_GRID[1])),
        total_volume=parse_rational(base.get("total_volume", 1)),
    )
    if grid.total_volume <= 0:
        raise ProblemFileError("base.total_volume must be positive")

    qdoc = _require(doc, "quiver", "problem")
    arrows = [
        (a["id"], a["tail"], a["head"]) for a in qdoc.get("arrows", [])
    ]
    quiver = build_quiver(_require(qdoc, "vertices", "quiver"), arrows)

    bundle = _require(doc, "bundle", "problem")
    vertex_data = {}
    for v in quiver.vertices:
        vdoc = _require(bundle, v, "bundle")
        summands = tuple(
            Summand(int(s["deg_plus"]), int(s["deg_minus"]))
            for s in _require(vdoc, "summands", f"bundle[{v!r}]")
        )
        vertex_data[v] = VertexBundleData(summands)

    arrows_doc = doc.get("arrows", {})
    arrow_data = {}
    for a in quiver.arrows:
        adoc = arrows_doc.get(a.id)
        if adoc is None:
            raise ProblemFileError(f"arrows: missing section data for {a.id!r}")
        blocks = tuple(
            tuple(_parse_section(s, fixture, f"arrows[{a.id!r}]") for s in row)
            for row in _require(adoc, "blocks", f"arrows[{a.id!r}]")
        )
        arrow_data[a.id] = ArrowData(blocks)

    declared = None
    if "subobjects" in doc:
        declared = []
        for k, sdoc in enumerate(doc["subobjects"]):
            entries = {}
            vdocs = _require(sdoc, "vertices", f"subobjects[{k}]")
            for v in quiver.vertices:
                e = vdocs.get(v)
                if e is None:
                    entries[v] = SubobjectEntry(0, 0, 0)
                else:
                    entries[v] = SubobjectEntry(
                        int(e.get("rank", 0)),
                        int(e.get("deg_plus", 0)),
                        int(e.get("deg_minus", 0)),
                    )
            declared.append(SubobjectSpec(
                entries=entries, provenance=DECLARED, name=str(sdoc.get("name", k)),
            ))
        declared = tuple(declared)

    model = validate_model(QBundleModel(
        base=fixture, quiver=quiver, vertex_data=vertex_data,
        arrow_data=arrow_data, declared_subobjects=declared,
    ))

    pdoc = _require(doc, "params", "problem")
    params = StabilityParams(
        alpha={v: parse_rational(_require(_require(pdoc, "alpha", "params"), v, "alpha"))
               for v in quiver.vertices},
        sigma={v: parse_rational(_require(_require(pdoc, "sigma", "params"), v, "sigma"))
               for v in quiver.vertices},
        tau={v: parse_rational(_require(_require(pdoc, "tau", "params"), v, "tau"))
             for v in quiver.vertices},
    )
    params.check_covers(quiver.vertices)

    solver_overrides = dict(doc.get("solver", {}))
    return Problem(model=model, params=params, grid=grid,
                   solver_overrides=solver_overrides)


def problem_document(problem: Problem) -> dict:
    """Canonical document for a parsed problem."""
    model, params, grid = problem.model, problem.params, problem.grid
    doc = {
        "base": {
            "fixture": model.base,
            "grid": {"n_theta": grid.n_theta, "n_phi": grid.n_phi},
            "total_volume": format_rational(grid.total_volume),
        },
        "quiver": {
            "vertices": list(model.quiver.vertices),
            "arrows": [
                {"id": a.id, "tail": a.tail, "head": a.head}
                for a in model.quiver.arrows
            ],
        },
        "bundle": {
            v: {"summands": [
                {"deg_plus": s.deg_plus, "deg_minus": s.deg_minus}
                for s in model.vertex_data[v].summands
            ]}
            for v in model.quiver.vertices
        },
        "arrows": {
            a.id: {"blocks": [
                [_emit_section(s) for s in row]
                for row in model.arrow_data[a.id].blocks
            ]}
            for a in model.quiver.arrows
        },
        "params": {
            "alpha": {v: format_rational(params.alpha[v]) for v in model.quiver.vertices},
            "sigma": {v: format_rational(params.sigma[v]) for v in model.quiver.vertices},
            "tau": {v: format_rational(params.tau[v]) for v in model.quiver.vertices},
        },
    }
    if model.declared_subobjects is not None:
        doc["subobjects"] = [
            {
                "name": sub.name,
                "vertices": {
                    v: {"rank": e.rank, "deg_plus": e.deg_plus, "deg_minus": e.deg_minus}
                    for v, e in sub.entries.items() if e.rank > 0
                },
            }
            for sub in model.declared_subobjects
        ]
    if problem.solver_overrides:
        doc["solver"] = dict(sorted(problem.solver_overrides.items()))
    return doc


def serialize(problem: Problem) -> str:
    """Canonical byte-stable text form."""
    return json.dumps(problem_document(problem), sort_keys=True, indent=2) + "\n"


def input_digest(problem: Problem) -> str:
    """sha256 of the canonical serialization."""
    return "sha256:" + hashlib.sha256(serialize(problem).encode()).hexdigest()


def load_problem(path) -> Problem:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc}") from None
    return parse_problem(text)
