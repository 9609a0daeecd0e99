"""Branch-and-bound over the dense simplex LP relaxation.

Best-bound node selection, most-fractional branching with lowest-index tie
breaks, child LPs warm started from the parent basis.  When an LP relaxation
comes out integral within tolerance, the incumbent is re-solved once with
the integer variables pinned to their rounded values so that the reported
solution carries exactly integral entries and rows satisfied at LP
precision.  Deterministic: identical model and config give an identical
search and result.
"""

from __future__ import annotations

import heapq
import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..mipbuild import LinearModel
from .simplex import (
    INFEASIBLE, OPTIMAL, UNBOUNDED, NumericalTrouble, SimplexResult, StandardForm,
)

STATUS_OPTIMAL = "optimal"
STATUS_FEASIBLE_GAP = "feasible-gap"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_TIME_LIMIT = "time-limit"


@dataclass
class SolverConfig:
    """Knobs for the built-in solver and the external adapter."""

    gap: float = 1e-3
    time_limit: float = 7200.0
    int_tol: float = 1e-6
    backend: str = "builtin"              # "builtin" | "external"
    external_command: str | None = None   # template with {in} and {out}
    external_dialect: str = "plain"       # "plain" | "plain-sparse"
    node_selection: str = "best-bound"
    branching: str = "most-fractional"

    def validate(self) -> None:
        if self.gap <= 0 or self.int_tol <= 0 or self.time_limit <= 0:
            raise ValueError("tolerances and the time limit must be > 0")
        if self.node_selection != "best-bound":
            raise ValueError(f"unsupported node selection {self.node_selection!r}")
        if self.branching != "most-fractional":
            raise ValueError(f"unsupported branching rule {self.branching!r}")
        if self.backend not in ("builtin", "external"):
            raise ValueError(f"unsupported backend {self.backend!r}")
        if self.backend == "external" and not self.external_command:
            raise ValueError("external backend requires a command template")


@dataclass
class SolveResult:
    status: str
    objective: float | None
    best_bound: float | None
    gap: float | None
    values: list[float] | None
    stats: dict = field(default_factory=dict)


def _relative_gap(incumbent: float, bound: float) -> float:
    return abs(incumbent - bound) / max(1e-10, abs(incumbent))


@dataclass(order=True)
class _Node:
    bound: float
    neg_seq: int   # newest-first among equal bounds: dives through the
    #                degenerate equal-bound chains instead of fanning out
    lo: np.ndarray = field(compare=False)
    up: np.ndarray = field(compare=False)
    warm: list | None = field(compare=False, default=None)


# cap on memory spent caching basis inverses for warm starts
_BINV_CACHE_BYTES = 256 * 1024 * 1024


def solve_branch_and_bound(model: LinearModel,
                           cfg: SolverConfig | None = None) -> SolveResult:
    cfg = cfg or SolverConfig()
    cfg.validate()
    t0 = time.perf_counter()
    sf = StandardForm(model)
    int_idx = np.array(
        [i for i, v in enumerate(model.variables) if v.is_integer], dtype=np.int64
    )
    stats = {"simplex_iterations": 0, "bb_nodes": 0, "wall_time": 0.0}

    def lp(lo, up, warm):
        try:
            res = sf.solve(lo=lo, up=up, warm=warm)
        except NumericalTrouble:
            res = sf.solve(lo=lo, up=up, warm=None)
        stats["simplex_iterations"] += res.iterations
        return res

    def finish(status, objective, bound, values):
        stats["wall_time"] = time.perf_counter() - t0
        gap = None
        if objective is not None and bound is not None:
            gap = _relative_gap(objective, bound)
        return SolveResult(status, objective, bound, gap,
                           None if values is None else [float(v) for v in values],
                           stats)

    def fractional(x: np.ndarray) -> int:
        """Most fractional integer variable (ties to the lowest index), or -1
        when every integer variable is integral within tolerance."""
        if int_idx.size == 0:
            return -1
        frac = np.abs(x[int_idx] - np.round(x[int_idx]))
        worst = int(np.argmax(frac))
        if float(frac[worst]) <= cfg.int_tol:
            return -1
        return int(int_idx[worst])

    def polish_incumbent(node_lo, node_up, x, warm):
        """Re-solve with integers pinned to their rounded values."""
        lo2 = node_lo.copy()
        up2 = node_up.copy()
        for i in int_idx:
            v = float(np.round(x[i]))
            lo2[i] = v
            up2[i] = v
        res = lp(lo2, up2, warm)
        if res.status != OPTIMAL:
            return None
        return res

    def dive(node_lo, node_up, start):
        """Depth plunge toward an integral point, pinning the LEAST
        fractional integer first (confident decisions lock in before the
        ambiguous ones, which get resolved by propagation).  When both pin
        values fail, falls back to one-sided bound restriction.  Pure primal
        heuristic: used only to seed the incumbent, never to prune."""
        lo2, up2 = node_lo.copy(), node_up.copy()
        res = start
        attempts = 6 * int_idx.size + 24
        while attempts > 0:
            frac = np.abs(res.x[int_idx] - np.round(res.x[int_idx]))
            open_pos = np.flatnonzero(frac > cfg.int_tol)
            if open_pos.size == 0:
                pol = polish_incumbent(lo2, up2, res.x, res.warm_start())
                return pol if pol is not None else res
            bv = int(int_idx[open_pos[int(np.argmin(frac[open_pos]))]])
            v = res.x[bv]
            nearest = min(max(float(np.round(v)), lo2[bv]), up2[bv])
            other = math.floor(v) if nearest > v else math.ceil(v)
            other = min(max(float(other), lo2[bv]), up2[bv])
            moves = [(val, val) for val in
                     ([nearest] if other == nearest else [nearest, other])]
            moves += [(lo2[bv], float(math.floor(v))),
                      (float(math.ceil(v)), up2[bv])]
            advanced = False
            for new_lo, new_up in moves:
                if new_lo > new_up or new_lo < lo2[bv] or new_up > up2[bv]:
                    continue
                attempts -= 1
                trial_lo, trial_up = lo2.copy(), up2.copy()
                trial_lo[bv] = new_lo
                trial_up[bv] = new_up
                trial = lp(trial_lo, trial_up, res.warm_start())
                if trial.status == OPTIMAL:
                    lo2, up2, res = trial_lo, trial_up, trial
                    advanced = True
                    break
                if attempts <= 0:
                    break
            if not advanced:
                return None
        return None

    base_lo = sf.base_lo.copy()
    base_up = sf.base_up.copy()
    root = lp(base_lo, base_up, None)
    if root.status == INFEASIBLE:
        return finish(STATUS_INFEASIBLE, None, None, None)
    if root.status == UNBOUNDED:
        return finish(STATUS_UNBOUNDED, None, None, None)

    incumbent_obj: float | None = None
    incumbent_x: np.ndarray | None = None
    heap: list[_Node] = []
    seq = 0
    binv_holders: deque[_Node] = deque()
    cache_nodes = max(8, int(_BINV_CACHE_BYTES / (8 * sf.m * sf.m + 1)))

    def push(bound: float, lo2: np.ndarray, up2: np.ndarray, res) -> None:
        nonlocal seq
        seq += 1
        node = _Node(bound, -seq, lo2, up2,
                     [res.basis, res.vstat, res.binv])
        if res.binv is not None:
            binv_holders.append(node)
            while len(binv_holders) > cache_nodes:
                binv_holders.popleft().warm[2] = None
        heapq.heappush(heap, node)

    push(root.objective, base_lo, base_up, root)
    if fractional(root.x) >= 0:
        seed = dive(base_lo, base_up, root)
        if seed is not None:
            incumbent_obj = seed.objective
            incumbent_x = seed.x

    def current_bound() -> float | None:
        bounds = [nd.bound for nd in heap]
        if incumbent_obj is not None:
            bounds.append(incumbent_obj)
        return min(bounds) if bounds else None

    while heap:
        if time.perf_counter() - t0 > cfg.time_limit:
            return finish(STATUS_TIME_LIMIT, incumbent_obj, current_bound(),
                          incumbent_x)
        if incumbent_obj is not None:
            lb = min(heap[0].bound, incumbent_obj)
            if _relative_gap(incumbent_obj, lb) <= cfg.gap:
                # every open node is within gap of the incumbent
                break
        node = heapq.heappop(heap)
        if incumbent_obj is not None and node.bound >= incumbent_obj - 1e-9:
            continue
        stats["bb_nodes"] += 1
        res = lp(node.lo, node.up, node.warm)
        if res.status == INFEASIBLE:
            continue
        if res.status == UNBOUNDED:
            return finish(STATUS_UNBOUNDED, None, None, None)
        if incumbent_obj is not None and res.objective >= incumbent_obj - 1e-9:
            continue
        if incumbent_obj is None and stats["bb_nodes"] % 256 == 0:
            seed = dive(node.lo, node.up, res)
            if seed is not None:
                incumbent_obj = seed.objective
                incumbent_x = seed.x
        branch_var = fractional(res.x)
        if branch_var < 0:
            polished = polish_incumbent(node.lo, node.up, res.x,
                                        res.warm_start())
            if polished is None:
                # pinning failed numerically; keep the raw LP point
                polished = res
            if incumbent_obj is None or polished.objective < incumbent_obj - 1e-12:
                incumbent_obj = polished.objective
                incumbent_x = polished.x
            continue
        v = res.x[branch_var]
        floor_v = math.floor(v + cfg.int_tol)
        lo_dn, up_dn = node.lo.copy(), node.up.copy()
        up_dn[branch_var] = floor_v
        lo_up_, up_up_ = node.lo.copy(), node.up.copy()
        lo_up_[branch_var] = floor_v + 1
        for lo2, up2 in ((lo_dn, up_dn), (lo_up_, up_up_)):
            if lo2[branch_var] > up2[branch_var]:
                continue
            push(res.objective, lo2, up2, res)

    bound = current_bound()
    if incumbent_obj is None:
        return finish(STATUS_INFEASIBLE, None, None, None)
    gap = _relative_gap(incumbent_obj, bound)
    status = STATUS_OPTIMAL if gap <= cfg.gap else STATUS_FEASIBLE_GAP
    return finish(status, incumbent_obj, bound, incumbent_x)
