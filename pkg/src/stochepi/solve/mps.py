"""Fixed-format MPS emission plus an internal reader for round-trip tests.

Names are mangled to at most 8 characters (``X0000001`` for columns,
``R0000001`` for rows, ``OBJ`` for the objective); ``name_table`` returns
the stable mangled-to-original mapping so external-solver solutions can be
mapped back.  Values are printed with the shortest exact representation
when it fits the 12-character numeric field and fall back to scientific
notation otherwise.  Re-emitting a parsed file reproduces it byte for byte.
"""

from __future__ import annotations

from ..mipbuild import Constraint, LinearModel, SENSE_EQ, SENSE_GE, SENSE_LE, Variable

_OBJ = "OBJ"
_RHS = "RHS"
_BND = "BND"


class MpsError(ValueError):
    pass


def column_name(index: int) -> str:
    return f"X{index + 1:07d}"


def row_name(index: int) -> str:
    return f"R{index + 1:07d}"


def name_table(model: LinearModel) -> dict:
    """Mangled name -> original name, for columns and rows."""
    return {
        "objective": _OBJ,
        "columns": {column_name(i): v.name for i, v in enumerate(model.variables)},
        "rows": {row_name(i): c.name for i, c in enumerate(model.constraints)},
    }


def _fmt(value: float) -> str:
    if value != value or value in (float("inf"), float("-inf")):
        raise MpsError(f"cannot write non-finite value {value}")
    if value == int(value) and abs(value) < 1e12:
        return str(int(value))
    s = repr(float(value))
    if len(s) <= 12:
        return s
    return f"{value:.6e}" if value >= 0 else f"{value:.5e}"


def _pairs_line(col: str, pairs: list[tuple[str, str]]) -> str:
    # fields at columns 5, 15, 25, 40, 50 (1-based)
    line = f"    {col:<8}  {pairs[0][0]:<8}  {pairs[0][1]:<12}"
    if len(pairs) > 1:
        line = f"{line:<39} {pairs[1][0]:<8}  {pairs[1][1]:<12}"
    return line.rstrip()


def emit_mps(model: LinearModel, name: str = "STOCHEPI") -> str:
    """Serialize as fixed-format MPS (minimization, integer markers)."""
    problems = model.validate()
    if problems:
        raise MpsError("invalid model: " + "; ".join(problems))
    out: list[str] = [f"NAME          {name}", "ROWS", f" N  {_OBJ}"]
    sense_code = {SENSE_LE: "L", SENSE_GE: "G", SENSE_EQ: "E"}
    for i, row in enumerate(model.constraints):
        out.append(f" {sense_code[row.sense]}  {row_name(i)}")

    by_col: dict[int, list[tuple[str, str]]] = {i: [] for i in range(model.n_variables)}
    for j, coef in sorted(model.objective.items()):
        by_col[j].append((_OBJ, _fmt(coef)))
    for i, row in enumerate(model.constraints):
        for j in sorted(row.coeffs):
            by_col[j].append((row_name(i), _fmt(row.coeffs[j])))

    out.append("COLUMNS")
    marker_q = "'MARKER'"
    integer_open = False
    marker_count = 0

    def marker_line(kind: str) -> str:
        return f"    MK{marker_count:06d}  {marker_q:<25}'{kind}'"

    for j, var in enumerate(model.variables):
        if var.is_integer != integer_open:
            marker_count += 1
            out.append(marker_line("INTORG" if var.is_integer else "INTEND"))
            integer_open = var.is_integer
        entries = by_col[j] or [(_OBJ, "0")]
        for k in range(0, len(entries), 2):
            out.append(_pairs_line(column_name(j), entries[k:k + 2]))
    if integer_open:
        marker_count += 1
        out.append(marker_line("INTEND"))

    out.append("RHS")
    rhs_pairs = [(row_name(i), _fmt(row.rhs))
                 for i, row in enumerate(model.constraints) if row.rhs != 0.0]
    for k in range(0, len(rhs_pairs), 2):
        out.append(_pairs_line(_RHS, rhs_pairs[k:k + 2]))

    out.append("BOUNDS")
    inf = float("inf")
    for j, var in enumerate(model.variables):
        col = column_name(j)
        if var.lb == var.ub:
            out.append(f" FX {_BND:<8}  {col:<8}  {_fmt(var.lb)}")
            continue
        if var.lb == -inf and var.ub == inf:
            out.append(f" FR {_BND:<8}  {col:<8}")
            continue
        if var.is_integer:
            if var.lb != -inf:
                out.append(f" LI {_BND:<8}  {col:<8}  {_fmt(var.lb)}")
            else:
                out.append(f" MI {_BND:<8}  {col:<8}")
            if var.ub != inf:
                out.append(f" UI {_BND:<8}  {col:<8}  {_fmt(var.ub)}")
        else:
            if var.lb == -inf:
                out.append(f" MI {_BND:<8}  {col:<8}")
            elif var.lb != 0.0:
                out.append(f" LO {_BND:<8}  {col:<8}  {_fmt(var.lb)}")
            if var.ub != inf:
                out.append(f" UP {_BND:<8}  {col:<8}  {_fmt(var.ub)}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def parse_mps(text: str) -> LinearModel:
    """Internal reader for the dialect ``emit_mps`` writes.

    Supports NAME/ROWS/COLUMNS/RHS/BOUNDS/ENDATA with integer markers.
    RANGES sections are rejected: the writer never produces them and the
    reader exists to check writer output.
    """
    model = LinearModel()
    rows_by_name: dict[str, int] = {}
    cols_by_name: dict[str, int] = {}
    obj_row: str | None = None
    section = None
    integer_mode = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw.startswith(" ") and not raw.startswith("\t"):
            parts = raw.split()
            section = parts[0]
            if section == "RANGES":
                raise MpsError("RANGES sections are not supported")
            if section not in ("NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"):
                raise MpsError(f"line {lineno}: unknown section {section!r}")
            continue
        fields = raw.split()
        if section == "ROWS":
            kind, rname = fields[0], fields[1]
            if kind == "N":
                if obj_row is None:
                    obj_row = rname
                continue
            sense = {"L": SENSE_LE, "G": SENSE_GE, "E": SENSE_EQ}.get(kind)
            if sense is None:
                raise MpsError(f"line {lineno}: unknown row type {kind!r}")
            rows_by_name[rname] = len(model.constraints)
            model.constraints.append(Constraint(rname, {}, sense, 0.0))
        elif section == "COLUMNS":
            if len(fields) >= 3 and fields[1] == "'MARKER'":
                integer_mode = fields[2] == "'INTORG'"
                continue
            cname = fields[0]
            if cname not in cols_by_name:
                cols_by_name[cname] = len(model.variables)
                model.variables.append(Variable(cname, 0.0, float("inf"),
                                                integer_mode))
            j = cols_by_name[cname]
            for k in range(1, len(fields) - 1, 2):
                rname, sval = fields[k], fields[k + 1]
                val = float(sval)
                if rname == obj_row:
                    if val != 0.0:
                        model.objective[j] = val
                elif rname in rows_by_name:
                    model.constraints[rows_by_name[rname]].coeffs[j] = val
                else:
                    raise MpsError(f"line {lineno}: unknown row {rname!r}")
        elif section == "RHS":
            for k in range(1, len(fields) - 1, 2):
                rname, sval = fields[k], fields[k + 1]
                if rname not in rows_by_name:
                    raise MpsError(f"line {lineno}: unknown row {rname!r}")
                model.constraints[rows_by_name[rname]].rhs = float(sval)
        elif section == "BOUNDS":
            kind = fields[0]
            cname = fields[2]
            if cname not in cols_by_name:
                raise MpsError(f"line {lineno}: unknown column {cname!r}")
            var = model.variables[cols_by_name[cname]]
            val = float(fields[3]) if len(fields) > 3 else None
            if kind == "FX":
                var.lb = var.ub = val
            elif kind in ("LO", "LI"):
                var.lb = val
            elif kind in ("UP", "UI"):
                var.ub = val
            elif kind == "FR":
                var.lb, var.ub = -float("inf"), float("inf")
            elif kind == "MI":
                var.lb = -float("inf")
            elif kind == "PL":
                var.ub = float("inf")
            elif kind == "BV":
                var.lb, var.ub = 0.0, 1.0
                var.is_integer = True
            else:
                raise MpsError(f"line {lineno}: unknown bound type {kind!r}")
        elif section in ("NAME", "ENDATA", None):
            continue
    return model
