"""Dense bounded-variable primal simplex.

Works on a standard form with one slack column per row (so the constraint
matrix is [A | I] without the identity ever being materialized).  Phase one
minimizes the total bound violation of the basic variables with composite
piecewise-linear costs, which needs no artificial columns and accepts any
starting basis, so branch-and-bound can warm start child nodes from the
parent basis.  Phase two is the usual bounded-variable iteration with bound
flips.

Numerics: the basis inverse is kept explicitly and updated by elementary
row operations, with periodic refactorization; rows and columns are
equilibrated by powers of two (exact in binary floating point).  Dantzig
pricing by default; Bland's rule is engaged after a run of degenerate
pivots and disengaged once the objective moves again.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mipbuild import LinearModel, SENSE_LE, SENSE_GE

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_AT_LO = 0
_AT_UP = 1
_BASIC = 2

_PIVOT_TOL = 1e-9
_DUAL_TOL = 1e-9
_FEAS_ABS = 1e-7      # per-variable bound violation that phase 1 must repair
_FEAS_REL = 1e-9
_FEAS_GIVEUP = 1e-7   # stalled phase-1 residue (relative, per variable)
_REFACTOR_EVERY = 128
_STALL_LIMIT = 256


@dataclass
class SimplexResult:
    status: str
    objective: float | None
    x: np.ndarray | None          # structural variable values
    iterations: int
    basis: np.ndarray | None = None
    vstat: np.ndarray | None = None
    binv: np.ndarray | None = None

    def warm_start(self) -> tuple | None:
        if self.basis is None:
            return None
        return (self.basis, self.vstat, self.binv)


class NumericalTrouble(RuntimeError):
    pass


def _pow2_scale(v: np.ndarray) -> np.ndarray:
    """Nearest power of two to 1/entry, elementwise (1 where entry is 0)."""
    out = np.ones_like(v)
    nz = v > 0
    out[nz] = np.exp2(-np.round(np.log2(v[nz])))
    return out


class StandardForm:
    """Reusable standard-form view of a LinearModel.

    The matrix, costs, and right-hand side are fixed; variable bounds can be
    overridden per solve, which is what branch-and-bound needs.
    """

    def __init__(self, model: LinearModel):
        problems = model.validate()
        if problems:
            raise ValueError("invalid model: " + "; ".join(problems))
        self.model = model
        n = model.n_variables
        m = model.n_constraints
        self.n = n
        self.m = m
        A = np.zeros((m, n))
        b = np.empty(m)
        slack_lo = np.empty(m)
        slack_up = np.empty(m)
        for i, row in enumerate(model.constraints):
            for j, coef in row.coeffs.items():
                A[i, j] = coef
            b[i] = row.rhs
            if row.sense == SENSE_LE:
                slack_lo[i], slack_up[i] = 0.0, np.inf
            elif row.sense == SENSE_GE:
                slack_lo[i], slack_up[i] = -np.inf, 0.0
            else:
                slack_lo[i], slack_up[i] = 0.0, 0.0
        c = np.zeros(n)
        for j, coef in model.objective.items():
            c[j] = coef
        self.base_lo = np.array([v.lb for v in model.variables], dtype=float)
        self.base_up = np.array([v.ub for v in model.variables], dtype=float)

        # power-of-two equilibration (exact): x_original = col_scale * x
        row_max = np.abs(A).max(axis=1, initial=0.0)
        self.row_scale = _pow2_scale(row_max)
        A = A * self.row_scale[:, None]
        col_max = np.abs(A).max(axis=0, initial=0.0)
        self.col_scale = _pow2_scale(col_max)
        self.A = np.ascontiguousarray(A * self.col_scale[None, :])
        self.b = b * self.row_scale
        self.c = c * self.col_scale
        self.slack_lo = slack_lo / self.row_scale
        self.slack_up = slack_up / self.row_scale
        self._equality = np.array(
            [row.sense == "=" for row in model.constraints], dtype=bool
        )
        self._crash = self._triangular_crash()

    def _triangular_crash(self) -> tuple[np.ndarray, np.ndarray]:
        """Starting basis from the model's staircase structure: for each
        equality row, make basic the first structural column whose earliest
        appearance is that row (a permuted-triangular, hence nonsingular,
        selection); remaining rows keep their slack."""
        m, n = self.m, self.n
        nz = self.A != 0.0
        any_nz = nz.any(axis=0)
        first_app = np.where(any_nz, nz.argmax(axis=0), -1)
        basis = np.arange(n, n + m, dtype=np.int64)
        vstat = np.full(n + m, _AT_LO, dtype=np.int8)
        row_max = np.abs(self.A).max(axis=1, initial=0.0)
        used = np.zeros(n, dtype=bool)
        for i in range(m):
            if not self._equality[i]:
                continue
            cols = np.flatnonzero(nz[i])
            cand = cols[(first_app[cols] == i) & ~used[cols]]
            if cand.size == 0:
                continue
            good = cand[np.abs(self.A[i, cand]) >= 0.01 * row_max[i]]
            if good.size == 0:
                continue
            j = int(good[np.argmax(np.abs(self.A[i, good]))])
            basis[i] = j
            used[j] = True
        vstat[basis] = _BASIC
        return basis, vstat

    def scaled_bounds(self, lo: np.ndarray | None, up: np.ndarray | None
                      ) -> tuple[np.ndarray, np.ndarray]:
        lo = self.base_lo if lo is None else np.asarray(lo, dtype=float)
        up = self.base_up if up is None else np.asarray(up, dtype=float)
        full_lo = np.concatenate([lo / self.col_scale, self.slack_lo])
        full_up = np.concatenate([up / self.col_scale, self.slack_up])
        return full_lo, full_up

    def column(self, j: int) -> np.ndarray:
        if j < self.n:
            return self.A[:, j]
        col = np.zeros(self.m)
        col[j - self.n] = 1.0
        return col

    def solve(self, lo: np.ndarray | None = None, up: np.ndarray | None = None,
              warm: tuple[np.ndarray, np.ndarray] | None = None,
              maxiter: int | None = None) -> SimplexResult:
        try:
            return _simplex(self, lo, up, warm, maxiter)
        except NumericalTrouble:
            if warm is None:
                raise
            # a stale warm basis can be numerically hopeless; restart cold
            return _simplex(self, lo, up, None, maxiter)


def _simplex(sf: StandardForm, lo_over, up_over, warm, maxiter) -> SimplexResult:
    m, n = sf.m, sf.n
    total = n + m
    lo, up = sf.scaled_bounds(lo_over, up_over)
    if np.any(lo > up + 1e-12):
        return SimplexResult(INFEASIBLE, None, None, 0)
    c_full = np.concatenate([sf.c, np.zeros(m)])
    if maxiter is None:
        maxiter = 200 * (m + n) + 20000

    basis = None
    vstat = None
    warm_binv = None
    if warm is not None:
        wb, wv = warm[0], warm[1]
        if wb is not None and len(wb) == m and len(wv) == total:
            basis = np.array(wb, dtype=np.int64)
            vstat = np.array(wv, dtype=np.int8)
            if len(warm) > 2 and warm[2] is not None:
                warm_binv = warm[2]
    if basis is None:
        basis = sf._crash[0].copy()
        vstat = sf._crash[1].copy()

    lo_fin = np.isfinite(lo)
    up_fin = np.isfinite(up)
    eta_work = np.empty((m, m))

    def normalize_nonbasic() -> np.ndarray:
        """Snap nonbasic statuses onto representable bounds; return values."""
        nonbasic = vstat != _BASIC
        to_lo = nonbasic & (vstat == _AT_UP) & ~up_fin
        vstat[to_lo] = _AT_LO
        to_up = nonbasic & (vstat == _AT_LO) & ~lo_fin & up_fin
        vstat[to_up] = _AT_UP
        x = np.zeros(total)
        sel_lo = nonbasic & (vstat == _AT_LO) & lo_fin
        sel_up = nonbasic & (vstat == _AT_UP) & up_fin
        x[sel_lo] = lo[sel_lo]
        x[sel_up] = up[sel_up]
        return x

    def values_for(binv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = normalize_nonbasic()
        rhs = sf.b - sf.A @ x[:n] - x[n:]
        return x, binv @ rhs

    def refactor() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        B = np.zeros((m, m))
        struct = basis < n
        B[:, struct] = sf.A[:, basis[struct]]
        slack_pos = np.flatnonzero(~struct)
        B[basis[slack_pos] - n, slack_pos] = 1.0
        try:
            binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise NumericalTrouble("singular basis") from None
        if not np.isfinite(binv).all():
            raise NumericalTrouble("singular basis")
        x, xb = values_for(binv)
        return binv, x, xb

    try:
        if warm_binv is not None:
            binv = warm_binv.copy()
            x, xb = values_for(binv)
            if not np.isfinite(xb).all():
                raise NumericalTrouble("bad warm inverse")
        else:
            binv, x, xb = refactor()
    except NumericalTrouble:
        basis = np.arange(n, n + m, dtype=np.int64)
        vstat = np.full(total, _AT_LO, dtype=np.int8)
        vstat[basis] = _BASIC
        binv, x, xb = refactor()

    iterations = 0
    pivots_since_refactor = 0
    stall = 0
    bland = False
    phase = 1

    while True:
        iterations += 1
        if iterations > maxiter:
            raise NumericalTrouble("simplex iteration limit exceeded")
        if pivots_since_refactor >= _REFACTOR_EVERY:
            binv, x, xb = refactor()
            pivots_since_refactor = 0

        lo_b = lo[basis]
        up_b = up[basis]
        tol_b = _FEAS_ABS + _FEAS_REL * np.abs(xb)
        below = lo_b - xb > tol_b
        above = xb - up_b > tol_b
        if phase == 1:
            if not below.any() and not above.any():
                phase = 2
                if pivots_since_refactor > 0:
                    binv, x, xb = refactor()
                    pivots_since_refactor = 0
                continue
            cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
        else:
            cb = c_full[basis]

        y = cb @ binv
        r = np.empty(total)
        if phase == 1:
            r[:n] = -(y @ sf.A)
            r[n:] = -y
        else:
            r[:n] = c_full[:n] - y @ sf.A
            r[n:] = -y

        movable = (up - lo) > 1e-14
        viol = np.zeros(total)
        sel = (vstat == _AT_LO) & movable
        viol[sel] = -r[sel]
        sel = (vstat == _AT_UP) & movable
        viol[sel] = r[sel]
        eligible = viol > _DUAL_TOL
        if not eligible.any():
            if phase == 1:
                rel = np.maximum(lo_b - xb, xb - up_b) / (1.0 + np.abs(xb))
                if float(rel.max(initial=0.0)) <= _FEAS_GIVEUP:
                    # numerically stalled at a near-feasible point
                    phase = 2
                    binv, x, xb = refactor()
                    pivots_since_refactor = 0
                    continue
                return SimplexResult(INFEASIBLE, None, None, iterations)
            x_full = x.copy()
            x_full[basis] = xb
            resid = sf.b - sf.A @ x_full[:n] - x_full[n:]
            x_full[basis] += binv @ resid
            xs = x_full[:n] * sf.col_scale
            obj = float((sf.c * x_full[:n]).sum())
            return SimplexResult(OPTIMAL, obj, xs, iterations,
                                 basis.copy(), vstat.copy(), binv.copy())

        if bland:
            j_in = int(np.flatnonzero(eligible)[0])
        else:
            j_in = int(np.argmax(viol))
        sigma = 1.0 if vstat[j_in] == _AT_LO else -1.0
        col = sf.column(j_in)
        w = binv @ col
        delta = -sigma * w  # basic value change per unit of entering increase

        # ratio test: first breakpoint along the direction per basic variable
        cand = np.abs(delta) > _PIVOT_TOL
        idx = np.flatnonzero(cand)
        if idx.size:
            d = delta[idx]
            if phase == 1:
                tgt = np.where(
                    below[idx],
                    np.where(d > 0, lo_b[idx], -np.inf),
                    np.where(
                        above[idx],
                        np.where(d < 0, up_b[idx], np.inf),
                        np.where(d > 0, up_b[idx], lo_b[idx]),
                    ),
                )
            else:
                tgt = np.where(d > 0, up_b[idx], lo_b[idx])
            with np.errstate(invalid="ignore"):
                ts = np.where(np.isfinite(tgt),
                              np.maximum(0.0, (tgt - xb[idx]) / d), np.inf)
        else:
            ts = np.empty(0)
            tgt = np.empty(0)

        flip_range = up[j_in] - lo[j_in]
        t_best = flip_range if np.isfinite(flip_range) else np.inf
        leave_pos = -1
        leave_to = 0.0
        if ts.size:
            t_block = float(ts.min())
            if t_block < t_best:
                near = np.flatnonzero(ts <= t_block + 1e-12)
                if bland:
                    pick = near[int(np.argmin(basis[idx[near]]))]
                else:
                    pick = near[int(np.argmax(np.abs(delta[idx[near]])))]
                t_best = float(ts[pick])
                leave_pos = int(idx[pick])
                leave_to = float(tgt[pick])

        if not np.isfinite(t_best):
            if phase == 1:
                raise NumericalTrouble("unbounded phase-1 ray")
            return SimplexResult(UNBOUNDED, None, None, iterations)

        if t_best <= 1e-12:
            stall += 1
            if stall > _STALL_LIMIT:
                bland = True
        else:
            stall = 0
            bland = False

        xb += delta * t_best
        if leave_pos < 0:
            vstat[j_in] = _AT_UP if sigma > 0 else _AT_LO
            x[j_in] = up[j_in] if vstat[j_in] == _AT_UP else lo[j_in]
        else:
            j_out = int(basis[leave_pos])
            entering_value = x[j_in] + sigma * t_best
            basis[leave_pos] = j_in
            xb[leave_pos] = entering_value
            vstat[j_in] = _BASIC
            x[j_in] = 0.0
            if up_fin[j_out] and leave_to == up[j_out]:
                vstat[j_out] = _AT_UP
                x[j_out] = up[j_out]
            else:
                vstat[j_out] = _AT_LO
                x[j_out] = lo[j_out] if lo_fin[j_out] else up[j_out]
                if not lo_fin[j_out]:
                    vstat[j_out] = _AT_UP
            piv = w[leave_pos]
            if abs(piv) < _PIVOT_TOL:
                binv, x, xb = refactor()
                pivots_since_refactor = 0
            else:
                row = binv[leave_pos, :] / piv
                np.multiply(w[:, None], row[None, :], out=eta_work)
                np.subtract(binv, eta_work, out=binv)
                binv[leave_pos, :] = row
                pivots_since_refactor += 1


def simplex_lp(model: LinearModel,
               lo: np.ndarray | None = None,
               up: np.ndarray | None = None,
               warm: tuple[np.ndarray, np.ndarray] | None = None) -> SimplexResult:
    """Solve the LP relaxation of a model (integrality ignored)."""
    return StandardForm(model).solve(lo=lo, up=up, warm=warm)
