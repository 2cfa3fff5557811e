"""JSON input documents.

A document looks like::

    {"name": "weighted-S3", "m": 1,
     "lambda": [[1, 0], [0, 1]],
     "xi": ["3/2", "1/2"],
     "solver": {"N": 2048, "t_step": 0.05}}

Geometry fields accept integers and ``"p/q"`` strings only. JSON floats are
refused there, so nothing inexact can reach the exact pipeline. The optional
``solver`` block holds plain numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import exact
from .cone_geometry import MomentCone
from .errors import InputError

SOLVER_KEYS = {"L": float, "N": int, "t_step": float, "bracket_tol": float,
               "t_max": float, "tail_rel": float}


@dataclass(frozen=True)
class InputDocument:
    cone: MomentCone
    name: str = ""
    solver: dict = field(default_factory=dict)


def _rational(value, where: str):
    if isinstance(value, float):
        raise InputError(f"{where}: float {value!r} not allowed; use an integer or 'p/q'")
    try:
        return exact.parse_rational(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise InputError(f"{where}: {exc}") from None


def _integer(value, where: str) -> int:
    q = _rational(value, where)
    if q.denominator != 1:
        raise InputError(f"{where}: expected an integer, got {q}")
    return int(q)


def parse_document(obj) -> InputDocument:
    if not isinstance(obj, dict):
        raise InputError("document must be a JSON object")
    missing = [k for k in ("m", "lambda", "xi") if k not in obj]
    if missing:
        raise InputError(f"missing field(s): {', '.join(missing)}")
    m = _integer(obj["m"], "m")
    lam = obj["lambda"]
    if not isinstance(lam, list) or not all(isinstance(r, list) for r in lam):
        raise InputError("lambda must be a list of integer vectors")
    normals = [[_integer(x, f"lambda[{a}][{i}]") for i, x in enumerate(r)]
               for a, r in enumerate(lam)]
    if not isinstance(obj["xi"], list):
        raise InputError("xi must be a list")
    xi = [_rational(x, f"xi[{i}]") for i, x in enumerate(obj["xi"])]
    solver = obj.get("solver", {}) or {}
    if not isinstance(solver, dict):
        raise InputError("solver must be an object")
    parsed = {}
    for key, value in solver.items():
        if key not in SOLVER_KEYS:
            raise InputError(f"unknown solver option {key!r}")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InputError(f"solver.{key} must be a number")
        parsed[key] = SOLVER_KEYS[key](value)
    name = obj.get("name", "")
    if not isinstance(name, str):
        raise InputError("name must be a string")
    return InputDocument(MomentCone(m, normals, xi), name, parsed)


def load_document(path) -> InputDocument:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return parse_document(obj)


def to_document(cone: MomentCone, name: str = "", solver: dict | None = None) -> dict:
    doc = {
        "m": cone.m,
        "lambda": [[int(x) for x in n] for n in cone.normals],
        "xi": exact.fmt_vec(cone.reeb),
    }
    if name:
        doc["name"] = name
    if solver:
        doc["solver"] = dict(solver)
    return doc


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
