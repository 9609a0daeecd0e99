"""Subprocess adapter for external MIP solvers.

The backend command is a template with ``{in}`` and ``{out}`` placeholders;
the model is written as MPS to ``{in}``, the command is run, and the
solution file at ``{out}`` is parsed.  Two solution-file dialects:

  plain         one ``<column-name> <value>`` pair per line, using the
                mangled MPS column names; every column must appear.  Lines
                starting with ``#`` are comments.  Optional directives:
                ``=obj= <float>`` and ``=status= <status>``.
  plain-sparse  same, but columns missing from the file default to zero.

The objective is recomputed from the parsed values so a sloppy solver
cannot misreport it.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
import time
from pathlib import Path

from ..mipbuild import LinearModel
from .bnb import (
    STATUS_FEASIBLE_GAP, STATUS_INFEASIBLE, STATUS_OPTIMAL, STATUS_TIME_LIMIT,
    STATUS_UNBOUNDED, SolveResult, SolverConfig,
)
from .mps import emit_mps, name_table

_KNOWN_STATUSES = {
    STATUS_OPTIMAL, STATUS_FEASIBLE_GAP, STATUS_INFEASIBLE,
    STATUS_UNBOUNDED, STATUS_TIME_LIMIT,
}


class ExternalSolverError(RuntimeError):
    pass


def parse_solution_file(text: str, model: LinearModel,
                        dialect: str = "plain") -> tuple[dict, float | None, str]:
    """Returns (values by column index, reported objective or None, status)."""
    if dialect not in ("plain", "plain-sparse"):
        raise ExternalSolverError(f"unknown solution dialect {dialect!r}")
    names = name_table(model)["columns"]
    index_of = {mangled: i for i, mangled in enumerate(names)}
    values: dict[int, float] = {}
    objective = None
    status = STATUS_OPTIMAL
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "=obj=":
            try:
                objective = float(parts[1])
            except (IndexError, ValueError):
                raise ExternalSolverError(f"line {lineno}: bad =obj= directive")
            continue
        if parts[0] == "=status=":
            if len(parts) < 2 or parts[1] not in _KNOWN_STATUSES:
                raise ExternalSolverError(f"line {lineno}: bad =status= directive")
            status = parts[1]
            continue
        if len(parts) != 2:
            raise ExternalSolverError(
                f"line {lineno}: expected '<name> <value>', got {raw!r}"
            )
        name, sval = parts
        if name not in index_of:
            raise ExternalSolverError(f"line {lineno}: unknown column {name!r}")
        try:
            values[index_of[name]] = float(sval)
        except ValueError:
            raise ExternalSolverError(f"line {lineno}: bad value {sval!r}")
    if status in (STATUS_INFEASIBLE, STATUS_UNBOUNDED):
        return {}, objective, status
    missing = set(range(len(model.variables))) - set(values)
    if missing:
        if dialect == "plain":
            missing_names = sorted(
                names, key=lambda nm: index_of[nm]
            )
            absent = [nm for nm in missing_names if index_of[nm] in missing]
            raise ExternalSolverError(
                f"solution file missing {len(missing)} column(s), "
                f"first: {absent[0]}"
            )
        for i in missing:
            values[i] = 0.0
    return values, objective, status


def solve_external(model: LinearModel, cfg: SolverConfig) -> SolveResult:
    """Write MPS, invoke the configured solver command, parse its solution."""
    cfg.validate()
    if cfg.backend != "external":
        raise ExternalSolverError("config backend is not 'external'")
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory(prefix="stochepi-") as tmp:
        mps_path = Path(tmp) / "model.mps"
        sol_path = Path(tmp) / "solution.txt"
        mps_path.write_text(emit_mps(model))
        command = cfg.external_command.replace("{in}", str(mps_path)) \
                                      .replace("{out}", str(sol_path))
        argv = shlex.split(command)
        try:
            proc = subprocess.run(
                argv, capture_output=True, text=True, timeout=cfg.time_limit,
            )
        except subprocess.TimeoutExpired:
            return SolveResult(STATUS_TIME_LIMIT, None, None, None, None,
                               {"wall_time": time.perf_counter() - t0})
        except OSError as exc:
            raise ExternalSolverError(f"cannot run {argv[0]!r}: {exc}") from None
        if proc.returncode != 0:
            raise ExternalSolverError(
                f"solver exited with {proc.returncode}: {proc.stderr.strip()[:500]}"
            )
        if not sol_path.exists():
            raise ExternalSolverError("solver produced no solution file")
        values, reported_obj, status = parse_solution_file(
            sol_path.read_text(), model, cfg.external_dialect
        )
    wall = time.perf_counter() - t0
    if status in (STATUS_INFEASIBLE, STATUS_UNBOUNDED):
        return SolveResult(status, None, None, None, None, {"wall_time": wall})
    ordered = [values[i] for i in range(len(model.variables))]
    objective = model.objective_value(ordered)
    if reported_obj is not None and abs(reported_obj - objective) > \
            1e-6 * max(1.0, abs(objective)):
        raise ExternalSolverError(
            f"solver reported objective {reported_obj} but its values give "
            f"{objective}"
        )
    return SolveResult(status, objective, objective if status == STATUS_OPTIMAL
                       else None, 0.0 if status == STATUS_OPTIMAL else None,
                       ordered, {"wall_time": wall})
