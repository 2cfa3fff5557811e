"""Command-line front end.

Exit codes: 0 success, 1 usage or malformed input, 2 input outside the
supported geometric hypotheses, 3 internal or solver failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, exact
from .catalog import builtin_entries, expected_strings, get_entry
from .document import InputDocument, dumps, load_document, to_document
from .errors import HypothesisError, InputError, ToricSasakiError
from .ma_solver import (
    SolverConfig,
    blowup_diagnostics,
    continuity_path,
    trace_csv,
    trace_dat,
)
from .pipeline import analyze, describe, validate, validation_block

OUT_ENV = "TORIC_SASAKI_OUT"

EXIT_OK, EXIT_USAGE, EXIT_HYPOTHESIS, EXIT_INTERNAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def exit_code(err: BaseException) -> int:
    if isinstance(err, InputError):
        return EXIT_USAGE
    if isinstance(err, HypothesisError):
        return EXIT_HYPOTHESIS
    return EXIT_INTERNAL


def jsonable(obj):
    """Plain JSON data; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def provenance(command: str, doc: InputDocument, parameters: dict | None = None) -> dict:
    return {"tool": "toric-sasaki", "version": __version__, "command": command,
            "input_name": doc.name, "parameters": jsonable(parameters or {})}


def _emit(report: dict, out=None) -> None:
    (out or sys.stdout).write(dumps(jsonable(report)))


# ---------------------------------------------------------------------------
# commands

def cmd_validate(doc: InputDocument) -> tuple[dict, int]:
    try:
        gamma, rep, cone = validate(doc.cone)
    except ToricSasakiError as err:
        return {"validation": {"passed": False, "error": err.to_dict()},
                "provenance": provenance("validate", doc)}, exit_code(err)
    return {"validation": validation_block(gamma, rep, cone),
            "provenance": provenance("validate", doc)}, EXIT_OK


def cmd_r(doc: InputDocument) -> tuple[dict, int]:
    try:
        geo = analyze(doc.cone)
    except ToricSasakiError as err:
        return {"error": err.to_dict(), "provenance": provenance("r", doc)}, exit_code(err)
    report = describe(geo)
    report["provenance"] = provenance("r", doc)
    return report, EXIT_OK


def solver_settings(doc: InputDocument, args) -> dict:
    settings = {"L": None, "N": None, "t_step": 0.05, "bracket_tol": 1e-2,
                "t_max": None, "tail_rel": 1e-10}
    settings.update(doc.solver)
    for key in settings:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def cmd_solve_path(doc: InputDocument, settings: dict) -> tuple[dict, str, str, int]:
    """Returns ``(report, csv text, dat text, exit code)``."""
    prov = provenance("solve-path", doc, settings)
    try:
        geo = analyze(doc.cone)
    except ToricSasakiError as err:
        return {"error": err.to_dict(), "provenance": prov}, "", "", exit_code(err)
    report = describe(geo)
    report["provenance"] = prov
    cfg = SolverConfig(tail_rel=settings["tail_rel"], t_step=settings["t_step"],
                       bracket_tol=settings["bracket_tol"])
    try:
        grid = geo.grid(N=settings["N"], L=settings["L"], tail_rel=settings["tail_rel"])
        result = continuity_path(grid, cfg, t_max=settings["t_max"])
    except (ToricSasakiError, ValueError) as err:
        info = err.to_dict() if isinstance(err, ToricSasakiError) else {
            "code": "InputError", "message": str(err)}
        report["path"] = {"error": info}
        code = EXIT_USAGE if isinstance(err, ValueError) else exit_code(err)
        return report, "", "", code
    report["path"] = path_block(geo, result)
    return report, trace_csv(result), trace_dat(result), EXIT_OK


def path_block(geo, result) -> dict:
    b = result.bracket
    R_exact = float(geo.rreport.R)
    accepted = result.states
    block = {
        "grid": result.grid.describe(),
        "bracket": {"t_lo": b.t_lo, "t_hi": b.t_hi, "width": None if b.t_hi is None
                    else b.t_hi - b.t_lo, "reason": b.reason, "detail": b.detail},
        "R_numeric": b.R_numeric,
        "R_exact": exact.fmt(geo.rreport.R),
        "abs_error": None if b.R_numeric is None else abs(b.R_numeric - R_exact),
        "accepted_states": len(accepted),
        "attempts": len(result.trace),
        "residual_max": {
            "mass": max(s.mass_residual for s in accepted),
            "moment": max(s.moment_residual for s in accepted),
        },
    }
    if len(accepted) >= 2:
        block["diagnostics"] = blowup_diagnostics(result, geo.rreport.binding_facets)
    return block


def output_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or ".")


def cmd_catalog_list() -> str:
    lines = []
    for e in builtin_entries():
        exp = expected_strings(e)
        R = exp.get("R")
        r_text = f"R={R['value']} ({R['provenance']})" if R else "R=?"
        lines.append(f"{e.name}\tm={e.m}\t{r_text}\t{e.notes}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="toric-sasaki",
                description="Exact R invariant and continuity-path solver for toric Sasaki cones.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("validate", help="check the cone hypotheses").add_argument("file")
    sub.add_parser("r", help="exact R with polytope data").add_argument("file")

    sp = sub.add_parser("solve-path", help="run the continuity path and bracket its threshold")
    sp.add_argument("file")
    sp.add_argument("--L", type=float, help="box half-width (default: tail rule)")
    sp.add_argument("--N", type=int, help="nodes per axis")
    sp.add_argument("--t-step", dest="t_step", type=float)
    sp.add_argument("--bracket-tol", dest="bracket_tol", type=float)
    sp.add_argument("--t-max", dest="t_max", type=float, help="stop early at this t")
    sp.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or .)")
    sp.add_argument("--stem", help="output file stem (default: input file stem)")

    cp = sub.add_parser("catalog", help="built-in examples")
    csub = cp.add_subparsers(dest="action", required=True, parser_class=_Parser)
    csub.add_parser("list")
    ep = csub.add_parser("export")
    ep.add_argument("name")
    ep.add_argument("-o", "--output", help="write to a file instead of stdout")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as stop:      # usage errors, --help, --version
        return int(stop.code or 0)
    try:
        return _dispatch(args)
    except InputError as err:
        print(f"toric-sasaki: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ToricSasakiError as err:
        print(f"toric-sasaki: {err.code}: {err}", file=sys.stderr)
        return exit_code(err)
    except Exception as err:  # noqa: BLE001 -- last-resort guard, reported as internal
        print(f"toric-sasaki: internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_INTERNAL


def _dispatch(args) -> int:
    if args.command == "catalog":
        if args.action == "list":
            sys.stdout.write(cmd_catalog_list())
            return EXIT_OK
        try:
            entry = get_entry(args.name)
        except KeyError:
            raise InputError(f"no catalog entry named {args.name!r}") from None
        text = dumps(to_document(entry.cone, entry.name))
        if args.output:
            Path(args.output).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK

    doc = load_document(args.file)
    if args.command == "validate":
        report, code = cmd_validate(doc)
        _emit(report)
        return code
    if args.command == "r":
        report, code = cmd_r(doc)
        _emit(report)
        return code

    settings = solver_settings(doc, args)
    report, csv_text, dat_text, code = cmd_solve_path(doc, settings)
    out = output_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = args.stem or Path(args.file).stem
    if csv_text:
        (out / f"{stem}_trace.csv").write_text(csv_text)
        (out / f"{stem}_trace.dat").write_text(dat_text)
    (out / f"{stem}_report.json").write_text(dumps(jsonable(report)))
    path = report.get("path", {})
    summary = {k: path.get(k) for k in ("R_numeric", "R_exact", "abs_error")}
    summary["reason"] = path.get("bracket", {}).get("reason")
    summary["report"] = str(out / f"{stem}_report.json")
    _emit(summary)
    return code


if __name__ == "__main__":
    sys.exit(main())
