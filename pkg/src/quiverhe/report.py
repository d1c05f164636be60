"""Report assembly and rendering.

Machine reports are canonical JSON (schema-versioned, sorted keys, no
volatile fields) so identical inputs and seeds produce byte-identical
files; wall-clock timings appear only in the human rendering.  Chamber
runs additionally emit CSV tables for walls and cells.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import __version__
from .errors import IoFailureError
from .rationals import format_rational

SCHEMA_VERSION = 1


@dataclass
class Report:
    command: str
    input_digest: Optional[str]
    seed: Optional[int]
    outcome: dict

    def payload(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "tool_version": __version__,
            "command": self.command,
            "input_digest": self.input_digest,
            "seed": self.seed,
            "outcome": self.outcome,
        }

    def machine_json(self) -> str:
        return json.dumps(self.payload(), sort_keys=True, indent=2,
                          default=_jsonable) + "\n"


def _jsonable(obj):
    try:
        from fractions import Fraction
        if isinstance(obj, Fraction):
            return format_rational(obj)
    except ImportError:  # pragma: no cover
        pass
    import numpy as np
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


# -- outcome payload builders -----------------------------------------------------

def slope_payload(report) -> dict:
    return {
        "degree": format_rational(report.degree),
        "sigma_rank": format_rational(report.sigma_rank),
        "slope": format_rational(report.slope),
    }


def classification_payload(cls) -> dict:
    return {
        "verdict": cls.verdict.value,
        "total": slope_payload(cls.total),
        "witnesses": [
            {
                "subobject": sub.describe(),
                "support": list(sub.support),
                **slope_payload(rep),
            }
            for sub, rep in cls.witnesses
        ],
    }


def walls_payload(arrangement_or_wallset, vertices) -> list:
    return [
        {
            "wall_id": k,
            "normal": {v: format_rational(w.normal[v]) for v in vertices},
            "offset": format_rational(w.offset),
            "sources": [s.describe() for s in w.sources],
        }
        for k, w in enumerate(arrangement_or_wallset.walls)
    ]


def chambers_payload(arr, vertices) -> dict:
    return {
        "dimension": arr.dimension,
        "bounding_box": [format_rational(b) for b in arr.bounding_box],
        "walls": walls_payload(arr, vertices),
        "degenerate_directions": [
            {"source": d.source.describe(), "everywhere_equal": d.everywhere_equal}
            for d in arr.degenerate
        ],
        "cells": [
            {
                "cell_id": k,
                "representative": {
                    vertices[0]: format_rational(c.representative[0]),
                    vertices[1]: format_rational(c.representative[1]),
                },
                "classification": c.classification.verdict.value,
                "signs": list(c.signs),
            }
            for k, c in enumerate(arr.cells)
        ],
    }


def solve_payload(report, state) -> dict:
    out = {
        "outcome": report.outcome,
        "message": report.message,
        "gamma": report.gamma,
        "c_delta": report.c_delta,
        "m_k": report.m_k,
        "final_epsilon": state.epsilon,
        "residual_sup": report.residual_sup,
        "residual_l2": report.residual_l2,
        "trace": [
            {
                "epsilon": t.epsilon,
                "sup_u": dict(t.sup_u),
                "residual_sup": t.residual_sup,
                "residual_l2": t.residual_l2,
                "newton_iterations": t.newton_iterations,
                "envelope_ok": t.envelope_ok,
            }
            for t in report.trace
        ],
    }
    if report.verification is not None:
        out["verification"] = report.verification
    if report.destabilizer is not None:
        d = report.destabilizer
        out["destabilizer"] = {
            "support": list(d.support),
            "collapsed_raw": list(d.collapsed_raw),
            "scale_gaps": dict(d.scale_gaps),
            "idempotent_residual": d.idempotent_residual,
            "self_adjoint_residual": d.self_adjoint_residual,
            "arrow_closure_residual": d.arrow_closure_residual,
            "slope_subobject": format_rational(d.slope_sub),
            "slope_total": format_rational(d.slope_total),
            "matches_max_slope_witness": d.matches_max_slope_witness,
        }
    return out


# -- CSV tables ---------------------------------------------------------------------

def walls_csv(walls, vertices) -> str:
    buf = io.StringIO()
    cols = ["wall_id"] + [f"c_{v}" for v in vertices] + ["offset", "sources"]
    buf.write(",".join(cols) + "\n")
    for k, w in enumerate(walls):
        row = [str(k)]
        row += [format_rational(w.normal[v]) for v in vertices]
        row.append(format_rational(w.offset))
        row.append(";".join(s.describe() for s in w.sources))
        buf.write(",".join(f'"{x}"' if "," in x else x for x in row) + "\n")
    return buf.getvalue()


def cells_csv(cells, vertices) -> str:
    buf = io.StringIO()
    cols = ["cell_id"] + [f"tau_{v}" for v in vertices] + ["classification"]
    buf.write(",".join(cols) + "\n")
    for k, c in enumerate(cells):
        row = [str(k), format_rational(c.representative[0]),
               format_rational(c.representative[1]),
               c.classification.verdict.value]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


# -- rendering ------------------------------------------------------------------------

def render_human(payload: dict, timing_seconds: Optional[float] = None) -> str:
    lines = [
        f"quiverhe {payload.get('tool_version', '?')} :: {payload.get('command', '?')}",
    ]
    if payload.get("input_digest"):
        lines.append(f"input  {payload['input_digest']}")
    if payload.get("seed") is not None:
        lines.append(f"seed   {payload['seed']}")
    lines.append("")
    lines.extend(_render_outcome(payload.get("command", ""), payload.get("outcome", {})))
    if timing_seconds is not None:
        lines.append("")
        lines.append(f"elapsed {timing_seconds:.3f}s")
    return "\n".join(lines) + "\n"


def _render_outcome(command: str, out: dict) -> list:
    lines = []
    if command in ("stability",):
        lines.append(f"classification: {out.get('verdict')}")
        total = out.get("total", {})
        lines.append(f"total slope   : {total.get('slope')} "
                     f"(degree {total.get('degree')} / sigma-rank {total.get('sigma_rank')})")
        for w in out.get("witnesses", []):
            lines.append(f"  witness {w['subobject']}: slope {w['slope']}")
    elif command == "chambers":
        lines.append(f"walls: {len(out.get('walls', []))}  cells: {len(out.get('cells', []))}")
        for w in out.get("walls", []):
            terms = " + ".join(f"({c})*tau_{v}" for v, c in w["normal"].items())
            lines.append(f"  wall {w['wall_id']}: {terms} = {w['offset']}  "
                         f"[{';'.join(w['sources'])}]")
        for c in out.get("cells", []):
            rep = ", ".join(f"tau_{v}={x}" for v, x in c["representative"].items())
            lines.append(f"  cell {c['cell_id']}: {c['classification']} at ({rep})")
    elif command == "solve":
        lines.append(f"outcome: {out.get('outcome')}  {out.get('message', '')}".rstrip())
        lines.append(f"gamma = {out.get('gamma')}, c_delta = {out.get('c_delta')}, "
                     f"m_K = {out.get('m_k')}")
        res = out.get("residual_sup", {})
        lines.append("residual sup per vertex: "
                     + ", ".join(f"{v}: {r:.3e}" for v, r in res.items()))
        if "verification" in out:
            ver = out["verification"]
            lines.append(f"gamma-identity residual: {ver['gamma_identity_residual']:.3e}")
            for a, r in ver.get("pairing_identity", {}).items():
                lines.append(f"pairing identity [{a}]: rel {r['relative_residual']:.3e}")
        if "destabilizer" in out:
            d = out["destabilizer"]
            lines.append(f"destabilizer support: {{{','.join(d['support'])}}} "
                         f"slope {d['slope_subobject']} >= {d['slope_total']} "
                         f"(matches witness: {d['matches_max_slope_witness']})")
    elif command == "props":
        lines.append(f"instances: {out.get('instances')}  passed: {out.get('passed')}")
        for key in ("min_prop36_gap", "min_prop310_gap", "max_adjoint_residual",
                    "max_involution_residual", "max_moment_hermiticity",
                    "max_trace_telescope"):
            if key in out:
                lines.append(f"  {key}: {out[key]:.3e}")
        for f in out.get("failures", []):
            lines.append(f"  FAILURE {f}")
    elif command == "validate":
        lines.append(f"valid: {out.get('valid')}")
        for e in out.get("errors", []):
            lines.append(f"  {e}")
    else:
        lines.append(json.dumps(out, sort_keys=True, indent=2, default=_jsonable))
    return lines


def write_text(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from None
    return path
