"""Solution audit: list every constraint, bound, and integrality violation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..mipbuild import LinearModel, SENSE_EQ, SENSE_GE, SENSE_LE


@dataclass(frozen=True)
class Violation:
    kind: str       # "row" | "bound" | "integrality"
    name: str
    amount: float

    def __str__(self) -> str:
        return f"{self.kind} {self.name}: off by {self.amount:.3e}"


def check_feasibility(model: LinearModel, values: Sequence[float],
                      tol: float = 1e-6) -> list[Violation]:
    """Every row violated beyond tol plus every bound/integrality violation.

    Row violations are measured in absolute terms after evaluating the row
    activity; an empty report means the point is feasible at the given
    tolerance.
    """
    if len(values) != model.n_variables:
        raise ValueError(
            f"expected {model.n_variables} values, got {len(values)}"
        )
    out: list[Violation] = []
    for var, x in zip(model.variables, values):
        if x < var.lb - tol:
            out.append(Violation("bound", var.name, var.lb - x))
        elif x > var.ub + tol:
            out.append(Violation("bound", var.name, x - var.ub))
        if var.is_integer and abs(x - round(x)) > tol:
            out.append(Violation("integrality", var.name, abs(x - round(x))))
    for row in model.constraints:
        act = sum(c * values[i] for i, c in row.coeffs.items())
        if row.sense == SENSE_LE:
            excess = act - row.rhs
        elif row.sense == SENSE_GE:
            excess = row.rhs - act
        else:
            excess = abs(act - row.rhs)
        if excess > tol:
            out.append(Violation("row", row.name, excess))
    return out
