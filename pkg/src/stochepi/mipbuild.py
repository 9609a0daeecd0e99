"""Deterministic-equivalent mixed-integer linear program construction.

Two formulations of the same stochastic program:

  node-compact   one set of variables per scenario-tree node; scenarios that
                 share history share variables, so non-anticipativity is
                 implicit and the model is as small as possible.
  scenario-split one set of variables per (scenario, stage) plus explicit
                 equality rows tying the copies of decision quantities
                 (facility openings, admissions, capacity) across scenarios
                 that pass through the same node.

The objective minimizes the expected per-period infected increments plus
period-end unburied dead.  Constraint families: initial conditions, the six
compartment balance rows per period (with migration substituted in), bed
capacity accumulation, a per-scenario budget row, an exact linearization of
"admissions = min(infected load, free beds)" using one binary plus two
auxiliary continuous variables per period and region, integrality and the
"no facility without at least one infected person" coupling, and optional
equity constraint families (infection / capacity / prevalence share).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Iterable, Mapping, Sequence

from .epidata import Instance
from .scentree import ScenarioTree, scenario_paths

SENSE_LE = "<="
SENSE_EQ = "="
SENSE_GE = ">="

STATE_SYMBOLS = ("S", "I", "T", "R", "F", "B")
ALL_SYMBOLS = STATE_SYMBOLS + ("C", "Ibar", "y", "z", "U", "W")


@dataclass
class Variable:
    name: str
    lb: float
    ub: float
    is_integer: bool = False


@dataclass
class Constraint:
    name: str
    coeffs: dict[int, float]
    sense: str
    rhs: float


@dataclass
class LinearModel:
    """Solver-agnostic MIP: variables with bounds/integrality, sparse rows,
    and a sparse minimization objective."""

    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def add_variable(self, name: str, lb: float, ub: float,
                     is_integer: bool = False) -> int:
        if lb > ub:
            raise ValueError(f"variable {name}: lb {lb} > ub {ub}")
        self.variables.append(Variable(name, lb, ub, is_integer))
        return len(self.variables) - 1

    def add_constraint(self, name: str, coeffs: Mapping[int, float],
                       sense: str, rhs: float) -> int:
        if sense not in (SENSE_LE, SENSE_EQ, SENSE_GE):
            raise ValueError(f"bad sense {sense!r}")
        if not math.isfinite(rhs):
            raise ValueError(f"row {name}: rhs must be finite, got {rhs}")
        clean = {i: float(c) for i, c in coeffs.items() if c != 0.0}
        self.constraints.append(Constraint(name, clean, sense, float(rhs)))
        return len(self.constraints) - 1

    def objective_value(self, values: Sequence[float]) -> float:
        return sum(c * values[i] for i, c in self.objective.items())

    def validate(self) -> list[str]:
        problems = []
        n = len(self.variables)
        for v in self.variables:
            if v.lb > v.ub:
                problems.append(f"variable {v.name}: lb > ub")
        for row in self.constraints:
            for i in row.coeffs:
                if not (0 <= i < n):
                    problems.append(f"row {row.name}: unknown variable index {i}")
            if not math.isfinite(row.rhs):
                problems.append(f"row {row.name}: non-finite rhs")
        for i in self.objective:
            if not (0 <= i < n):
                problems.append(f"objective references unknown variable index {i}")
        return problems


@dataclass(frozen=True)
class VarKey:
    """Structured identity of a model variable.

    Node-compact variables carry ``node``; scenario-split variables carry
    ``scen`` and ``stage``.  ``etype`` is used by facility-count variables.
    """

    symbol: str
    node: int | None = None
    scen: int | None = None
    stage: int | None = None
    region: str | None = None
    etype: int | None = None


class ModelMap:
    """Bijective lookup between structured variable keys and column indices,
    plus the probability weights needed to read expectations off a solution."""

    def __init__(self, formulation: str, region_ids: Sequence[str],
                 populations: Mapping[str, float], tree_stages: int):
        self.formulation = formulation
        self.region_ids = tuple(region_ids)
        self.populations = dict(populations)
        self.tree_stages = tree_stages
        self.node_stage: dict[int, int] = {}
        self.node_prob: dict[int, float] = {}
        self.scen_prob: dict[int, float] = {}
        self._by_key: dict[VarKey, int] = {}
        self._by_index: dict[int, VarKey] = {}

    def add(self, key: VarKey, index: int) -> None:
        if key in self._by_key:
            raise ValueError(f"duplicate key {key}")
        if index in self._by_index:
            raise ValueError(f"duplicate index {index}")
        self._by_key[key] = index
        self._by_index[index] = key

    def index_of(self, key: VarKey) -> int:
        return self._by_key[key]

    def get(self, key: VarKey) -> int | None:
        return self._by_key.get(key)

    def key_of(self, index: int) -> VarKey:
        return self._by_index[index]

    def __contains__(self, key: VarKey) -> bool:
        return key in self._by_key

    def __len__(self) -> int:
        return len(self._by_key)

    def keys(self) -> Iterable[VarKey]:
        return self._by_key.keys()

    def value(self, values: Sequence[float], **parts) -> float:
        return values[self.index_of(VarKey(**parts))]

    def state_weights(self, symbol: str) -> dict[str, list[tuple[int, float]]]:
        """Per region: (column, probability-weight) pairs whose weighted sum
        is the expected total of ``symbol`` over all stages and scenarios."""
        out: dict[str, list[tuple[int, float]]] = {r: [] for r in self.region_ids}
        for key, idx in self._by_key.items():
            if key.symbol != symbol:
                continue
            if self.formulation == "node-compact":
                w = self.node_prob[key.node]
            else:
                w = self.scen_prob[key.scen]
            out[key.region].append((idx, w))
        return out

    def expected_by_region(self, values: Sequence[float], symbol: str) -> dict[str, float]:
        return {
            r: sum(values[i] * w for i, w in pairs)
            for r, pairs in self.state_weights(symbol).items()
        }

    def to_json(self) -> str:
        entries = []
        for key, idx in sorted(self._by_key.items(), key=lambda kv: kv[1]):
            d = {k: v for k, v in asdict(key).items() if v is not None}
            d["index"] = idx
            entries.append(d)
        return json.dumps({
            "formulation": self.formulation,
            "region_ids": list(self.region_ids),
            "populations": self.populations,
            "tree_stages": self.tree_stages,
            "node_stage": self.node_stage,
            "node_prob": self.node_prob,
            "scen_prob": self.scen_prob,
            "variables": entries,
        }, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ModelMap":
        data = json.loads(text)
        mmap = ModelMap(data["formulation"], data["region_ids"],
                        data["populations"], data["tree_stages"])
        mmap.node_stage = {int(k): v for k, v in data["node_stage"].items()}
        mmap.node_prob = {int(k): v for k, v in data["node_prob"].items()}
        mmap.scen_prob = {int(k): v for k, v in data["scen_prob"].items()}
        for e in data["variables"]:
            idx = e.pop("index")
            mmap.add(VarKey(**e), idx)
        return mmap


@dataclass(frozen=True)
class EquitySpec:
    kind: str  # infection | capacity | prevalence
    k: float


@dataclass(frozen=True)
class Bounds:
    """Static bounds for the admissions linearization: h_* bound free beds
    (capacity minus treated), i_* bound the post-migration infected load."""

    h_lb: float
    h_ub: float
    i_lb: float
    i_ub: float

    def check(self) -> None:
        if not (self.h_lb <= self.h_ub and self.i_lb <= self.i_ub):
            raise ValueError(f"inconsistent linearization bounds {self}")


@dataclass(frozen=True)
class BuildOptions:
    formulation: str = "node-compact"  # | "scenario-split"
    equity: EquitySpec | None = None
    fixed: tuple[tuple[VarKey, float], ...] = ()
    h_lb: float | None = None
    h_ub: float | None = None
    i_lb: float | None = None
    i_ub: float | None = None


def _max_buildout_beds(inst: Instance, stages: int, i_ub: float) -> float:
    budget = inst.costs.budget
    buildout = 0.0
    for etc in inst.etc_types:
        if etc.fixed_cost > 0:
            buildout = max(buildout, etc.capacity_beds * (budget / etc.fixed_cost))
        else:
            # free facilities are only limited by the infected-count coupling
            buildout += etc.capacity_beds * math.ceil(i_ub) * max(1, stages)
    return max(inst.initial.C0, default=0.0) + math.ceil(buildout) + 1.0


@dataclass(frozen=True)
class _NodeCaps:
    """Per-node worst-case upper bounds used to size big-M constants."""

    infected: tuple[float, ...]   # I at the node, per region
    load: tuple[float, ...]       # post-migration infected load, per region


def _worst_case_node_caps(inst: Instance, tree: ScenarioTree,
                          bed_cap: float) -> dict[int, _NodeCaps]:
    """Upper bounds on the infected count and post-migration load at every
    node, by a monotone worst-case recursion along each node's own rate path
    (no admissions removed from I, treated census capped by the largest
    affordable bed stock).  Valid for every feasible plan, and much tighter
    early in the horizon where the epidemic has not yet compounded."""
    n = inst.n_regions
    mig = inst.migration.rates
    out = [inst.migration.out_rate(i) for i in range(n)]
    p_total = inst.initial.total_population()

    def load_of(I: list[float]) -> tuple[float, ...]:
        return tuple(
            min(p_total, I[r] * (1.0 - out[r])
                + sum(mig[l][r] * I[l] for l in range(n) if l != r))
            for r in range(n)
        )

    caps: dict[int, _NodeCaps] = {}
    state: dict[int, tuple[list[float], list[float], list[float]]] = {}
    root = tree.nodes[0]
    state[root.id] = (list(inst.initial.I0), list(inst.initial.F0),
                      list(inst.initial.T0))
    caps[root.id] = _NodeCaps(tuple(min(p_total, v) for v in inst.initial.I0),
                              load_of(list(inst.initial.I0)))
    for node in tree.nodes:
        if node.parent is None:
            continue
        I, F, T = state[node.parent]
        I2, F2, T2 = [], [], []
        for r, reg in enumerate(inst.regions):
            grow = max(0.0, 1.0 + node.rate[r] - reg.lambda1 - reg.lambda3 - out[r])
            inflow = sum(mig[l][r] * I[l] for l in range(n) if l != r)
            I2.append(min(p_total, grow * I[r] + inflow + reg.chi2 * F[r]))
            F2.append(min(p_total, (1.0 - reg.lambda5) * F[r]
                          + reg.lambda1 * I[r] + reg.lambda2 * T[r]))
            T2.append(min(bed_cap,
                          (1.0 - reg.lambda2 - reg.lambda4) * T[r] + bed_cap))
        state[node.id] = (I2, F2, T2)
        caps[node.id] = _NodeCaps(tuple(I2), load_of(I2))
    return caps


def default_bounds(inst: Instance, tree: ScenarioTree) -> Bounds:
    """Tightest valid static bounds derivable from instance and tree."""
    p_total = inst.initial.total_population()
    h_ub = _max_buildout_beds(inst, tree.stages, p_total + 1.0)
    caps = _worst_case_node_caps(inst, tree, h_ub)
    i_ub = 1.0 + max(
        max(max(c.infected, default=0.0), max(c.load, default=0.0))
        for c in caps.values()
    )
    return Bounds(h_lb=0.0, h_ub=h_ub, i_lb=0.0, i_ub=min(i_ub, p_total + 1.0))


def _y_upper_bound(inst: Instance, etc_index: int, i_ub: float) -> float:
    etc = inst.etc_types[etc_index]
    if etc.fixed_cost > 0:
        return math.floor(inst.costs.budget / etc.fixed_cost)
    return math.ceil(i_ub)


def add_capacity_linearization(
    model: LinearModel,
    mmap: ModelMap,
    node,
    region: str,
    bounds: Bounds,
    infected_expr: Mapping[int, float] | None = None,
) -> None:
    """Rows forcing admissions = min(infected load, capacity - treated).

    A binary z selects which side binds: the auxiliary U carries the
    bed-limited branch (U = (C - T) when z = 1, else 0) and W carries the
    infection-limited branch (W = load when z = 0, else 0); admissions are
    U + W and are separately capped by both sides.  ``infected_expr`` gives
    the infected-load expression as a column->coefficient mapping; by
    default it is the plain infected count of the location.

    ``node`` is a node id for node-compact maps or a (scenario, stage) pair
    for scenario-split maps.
    """
    bounds.check()
    if isinstance(node, tuple):
        scen, stage = node
        at = dict(scen=scen, stage=stage, region=region)
        tag = f"w{scen},t{stage},{region}"
    else:
        at = dict(node=node, region=region)
        tag = f"n{node},{region}"
    i_ibar = mmap.index_of(VarKey("Ibar", **at))
    i_z = mmap.index_of(VarKey("z", **at))
    i_u = mmap.index_of(VarKey("U", **at))
    i_w = mmap.index_of(VarKey("W", **at))
    i_c = mmap.index_of(VarKey("C", **at))
    i_t = mmap.index_of(VarKey("T", **at))
    e_i = dict(infected_expr) if infected_expr is not None \
        else {mmap.index_of(VarKey("I", **at)): 1.0}
    h_lb, h_ub, i_lb, i_ub = bounds.h_lb, bounds.h_ub, bounds.i_lb, bounds.i_ub

    def minus(expr: Mapping[int, float], base: Mapping[int, float]) -> dict[int, float]:
        out = dict(base)
        for i, c in expr.items():
            out[i] = out.get(i, 0.0) - c
        return out

    add = model.add_constraint
    add(f"hosp_le_beds[{tag}]", {i_ibar: 1.0, i_c: -1.0, i_t: 1.0}, SENSE_LE, 0.0)
    add(f"hosp_le_load[{tag}]", minus(e_i, {i_ibar: 1.0}), SENSE_LE, 0.0)
    add(f"hosp_sum[{tag}]", {i_ibar: 1.0, i_u: -1.0, i_w: -1.0}, SENSE_EQ, 0.0)
    add(f"u_cap[{tag}]", {i_u: 1.0, i_z: -h_ub}, SENSE_LE, 0.0)
    add(f"u_floor[{tag}]", {i_u: 1.0, i_z: -h_lb}, SENSE_GE, 0.0)
    add(f"u_track_hi[{tag}]", {i_u: 1.0, i_c: -1.0, i_t: 1.0, i_z: -h_lb},
        SENSE_LE, -h_lb)
    add(f"u_track_lo[{tag}]", {i_u: 1.0, i_c: -1.0, i_t: 1.0, i_z: -h_ub},
        SENSE_GE, -h_ub)
    add(f"w_cap[{tag}]", {i_w: 1.0, i_z: i_ub}, SENSE_LE, i_ub)
    add(f"w_floor[{tag}]", {i_w: 1.0, i_z: i_lb}, SENSE_GE, i_lb)
    add(f"w_track_hi[{tag}]", minus(e_i, {i_w: 1.0, i_z: i_lb}), SENSE_LE, 0.0)
    add(f"w_track_lo[{tag}]", minus(e_i, {i_w: 1.0, i_z: i_ub}), SENSE_GE, 0.0)


def _equity_rows(model: LinearModel, mmap: ModelMap, k: float, symbol: str,
                 label: str) -> None:
    if k < 0:
        raise ValueError(f"equity tolerance must be >= 0, got {k}")
    weights = mmap.state_weights(symbol)
    u = mmap.populations
    u_total = sum(u.values())
    for region in mmap.region_ids:
        lo: dict[int, float] = {}
        hi: dict[int, float] = {}
        for other in mmap.region_ids:
            for idx, w in weights[other]:
                share = u_total if other == region else 0.0
                base = w * (share - u[region])
                hi[idx] = hi.get(idx, 0.0) + base - k * u_total * w
                lo[idx] = lo.get(idx, 0.0) + base + k * u_total * w
        model.add_constraint(f"{label}_hi[{region}]", hi, SENSE_LE, 0.0)
        model.add_constraint(f"{label}_lo[{region}]", lo, SENSE_GE, 0.0)


def add_infection_equity(model: LinearModel, mmap: ModelMap, k: float) -> None:
    """Bound each region's share of expected infections (summed over stages
    and scenarios) to within k of its population share, denominators
    cleared so the rows are linear."""
    _equity_rows(model, mmap, k, "I", "inf_equity")


def add_capacity_equity(model: LinearModel, mmap: ModelMap, k: float) -> None:
    """Same as infection equity with expected bed capacity in place of
    expected infections."""
    _equity_rows(model, mmap, k, "C", "cap_equity")


def add_prevalence_equity(model: LinearModel, mmap: ModelMap, k: float) -> None:
    """Bound the gap between regional prevalence (expected infections per
    capita) and system prevalence by k, denominators cleared."""
    if k < 0:
        raise ValueError(f"equity tolerance must be >= 0, got {k}")
    weights = mmap.state_weights("I")
    u = mmap.populations
    u_total = sum(u.values())
    for region in mmap.region_ids:
        coeffs: dict[int, float] = {}
        for other in mmap.region_ids:
            for idx, w in weights[other]:
                share = u_total if other == region else 0.0
                coeffs[idx] = coeffs.get(idx, 0.0) + w * (share - u[region])
        rhs = k * u[region] * u_total
        model.add_constraint(f"prev_equity_hi[{region}]", coeffs, SENSE_LE, rhs)
        model.add_constraint(f"prev_equity_lo[{region}]", coeffs, SENSE_GE, -rhs)


def fix_variables(model: LinearModel, mmap: ModelMap,
                  assignments: Iterable[tuple[VarKey, float]]) -> None:
    """Pin variables to values by collapsing their bounds; values must lie
    within the current bounds."""
    for key, value in assignments:
        idx = mmap.index_of(key)
        var = model.variables[idx]
        if not (var.lb - 1e-9 <= value <= var.ub + 1e-9):
            raise ValueError(
                f"cannot fix {var.name} to {value}: outside [{var.lb}, {var.ub}]"
            )
        var.lb = value
        var.ub = value


def _state_upper_bounds(inst: Instance, bounds: Bounds) -> dict[str, float]:
    pop_ub = inst.initial.total_population() + 1.0
    return {
        "S": pop_ub,
        "I": bounds.i_ub,
        "T": min(bounds.h_ub, pop_ub),
        "R": pop_ub,
        "F": pop_ub,
        "B": pop_ub,
    }


def _check_consistency(inst: Instance, tree: ScenarioTree,
                       opts: BuildOptions) -> None:
    if tuple(tree.region_ids) != inst.region_ids:
        raise ValueError(
            "instance and tree disagree on regions: "
            f"{inst.region_ids} vs {tree.region_ids}"
        )
    if opts.equity is not None:
        if opts.equity.kind not in ("infection", "capacity", "prevalence"):
            raise ValueError(f"unknown equity kind {opts.equity.kind!r}")
        if opts.equity.k < 0:
            raise ValueError(f"equity k must be >= 0, got {opts.equity.k}")
    if opts.formulation not in ("node-compact", "scenario-split"):
        raise ValueError(f"unknown formulation {opts.formulation!r}")


def _resolve_bounds(inst: Instance, tree: ScenarioTree, opts: BuildOptions) -> Bounds:
    base = default_bounds(inst, tree)
    b = Bounds(
        h_lb=base.h_lb if opts.h_lb is None else opts.h_lb,
        h_ub=base.h_ub if opts.h_ub is None else opts.h_ub,
        i_lb=base.i_lb if opts.i_lb is None else opts.i_lb,
        i_ub=base.i_ub if opts.i_ub is None else opts.i_ub,
    )
    b.check()
    return b


def build_deterministic_equivalent(
    inst: Instance,
    tree: ScenarioTree,
    opts: BuildOptions = BuildOptions(),
) -> tuple[LinearModel, ModelMap]:
    """Assemble the full multi-stage stochastic MIP over the given tree."""
    _check_consistency(inst, tree, opts)
    bounds = _resolve_bounds(inst, tree, opts)
    caps = None
    if opts.i_ub is None:
        caps = _worst_case_node_caps(inst, tree, bounds.h_ub)
    if opts.formulation == "node-compact":
        model, mmap = _build_node_compact(inst, tree, opts, bounds, caps)
    else:
        model, mmap = _build_scenario_split(inst, tree, opts, bounds, caps)
    if opts.equity is not None:
        adder = {
            "infection": add_infection_equity,
            "capacity": add_capacity_equity,
            "prevalence": add_prevalence_equity,
        }[opts.equity.kind]
        adder(model, mmap, opts.equity.k)
    if opts.fixed:
        fix_variables(model, mmap, opts.fixed)
    return model, mmap


def _infected_load_expr(mmap: ModelMap, inst: Instance, at_region: dict,
                        region_index: int) -> dict[int, float]:
    """Post-migration infected count as a linear expression: the location's
    own infected net of emigration plus immigration from neighbors."""
    mig = inst.migration.rates
    n = inst.n_regions
    expr: dict[int, float] = {}
    for l in range(n):
        other = dict(at_region)
        other["region"] = inst.region_ids[l]
        idx = mmap.index_of(VarKey("I", **other))
        if l == region_index:
            expr[idx] = expr.get(idx, 0.0) + 1.0 - inst.migration.out_rate(l)
        else:
            c = mig[l][region_index]
            if c:
                expr[idx] = expr.get(idx, 0.0) + c
    return expr


def _add_balance_rows(model: LinearModel, inst: Instance, tag: str,
                      prev: Mapping[tuple[str, str], int],
                      cur: Mapping[tuple[str, str], int],
                      ibar_prev: Mapping[str, int],
                      rates: Sequence[float]) -> None:
    """Six compartment balance rows advancing one period.

    ``prev``/``cur`` map (symbol, region_id) to column indices; ``ibar_prev``
    maps region id to the admissions column of the earlier stage; ``rates``
    are the community transmission rates realized for this period.
    """
    mig = inst.migration.rates
    n = inst.n_regions
    out_rate = [inst.migration.out_rate(i) for i in range(n)]
    for r, reg in enumerate(inst.regions):
        rid = reg.id
        chi1 = rates[r]
        row_s: dict[int, float] = {cur[("S", rid)]: 1.0}
        row_s[prev[("S", rid)]] = row_s.get(prev[("S", rid)], 0.0) - (1.0 - out_rate[r])
        for l in range(n):
            if l != r and mig[l][r]:
                k = prev[("S", inst.region_ids[l])]
                row_s[k] = row_s.get(k, 0.0) - mig[l][r]
        row_s[prev[("I", rid)]] = row_s.get(prev[("I", rid)], 0.0) + chi1
        row_s[prev[("F", rid)]] = row_s.get(prev[("F", rid)], 0.0) + reg.chi2
        model.add_constraint(f"bal_S[{tag},{rid}]", row_s, SENSE_EQ, 0.0)

        row_i: dict[int, float] = {cur[("I", rid)]: 1.0}
        row_i[prev[("I", rid)]] = row_i.get(prev[("I", rid)], 0.0) - (
            1.0 + chi1 - reg.lambda1 - reg.lambda3 - out_rate[r]
        )
        for l in range(n):
            if l != r and mig[l][r]:
                k = prev[("I", inst.region_ids[l])]
                row_i[k] = row_i.get(k, 0.0) - mig[l][r]
        row_i[prev[("F", rid)]] = row_i.get(prev[("F", rid)], 0.0) - reg.chi2
        row_i[ibar_prev[rid]] = row_i.get(ibar_prev[rid], 0.0) + 1.0
        model.add_constraint(f"bal_I[{tag},{rid}]", row_i, SENSE_EQ, 0.0)

        model.add_constraint(f"bal_T[{tag},{rid}]", {
            cur[("T", rid)]: 1.0,
            prev[("T", rid)]: -(1.0 - reg.lambda2 - reg.lambda4),
            ibar_prev[rid]: -1.0,
        }, SENSE_EQ, 0.0)
        model.add_constraint(f"bal_R[{tag},{rid}]", {
            cur[("R", rid)]: 1.0,
            prev[("R", rid)]: -1.0,
            prev[("T", rid)]: -reg.lambda4,
            prev[("I", rid)]: -reg.lambda3,
        }, SENSE_EQ, 0.0)
        model.add_constraint(f"bal_F[{tag},{rid}]", {
            cur[("F", rid)]: 1.0,
            prev[("F", rid)]: -(1.0 - reg.lambda5),
            prev[("I", rid)]: -reg.lambda1,
            prev[("T", rid)]: -reg.lambda2,
        }, SENSE_EQ, 0.0)
        model.add_constraint(f"bal_B[{tag},{rid}]", {
            cur[("B", rid)]: 1.0,
            prev[("B", rid)]: -1.0,
            prev[("F", rid)]: -reg.lambda5,
        }, SENSE_EQ, 0.0)


def _build_node_compact(inst: Instance, tree: ScenarioTree, opts: BuildOptions,
                        bounds: Bounds, caps: dict[int, _NodeCaps] | None,
                        ) -> tuple[LinearModel, ModelMap]:
    model = LinearModel()
    mmap = ModelMap("node-compact", inst.region_ids,
                    {r.id: r.population for r in inst.regions}, tree.stages)
    init = inst.initial
    state_ub = _state_upper_bounds(inst, bounds)

    def i_cap(nid: int, r: int) -> float:
        if caps is None:
            return bounds.i_ub
        return min(bounds.i_ub, caps[nid].infected[r] + 1.0)

    def load_cap(nid: int, r: int) -> float:
        if caps is None:
            return bounds.i_ub
        return min(bounds.i_ub, caps[nid].load[r] + 1.0)

    for node in tree.nodes:
        mmap.node_stage[node.id] = node.stage
        mmap.node_prob[node.id] = tree.path_prob(node.id)

    # variables
    for node in tree.nodes:
        leaf = node.stage == tree.stages
        for r, rid in enumerate(inst.region_ids):
            for sym in STATE_SYMBOLS:
                ub = i_cap(node.id, r) if sym == "I" else state_ub[sym]
                idx = model.add_variable(f"{sym}[n{node.id},{rid}]", 0.0, ub)
                mmap.add(VarKey(sym, node=node.id, region=rid), idx)
            idx = model.add_variable(f"C[n{node.id},{rid}]", 0.0, bounds.h_ub)
            mmap.add(VarKey("C", node=node.id, region=rid), idx)
            if not leaf:
                idx = model.add_variable(f"Ibar[n{node.id},{rid}]", 0.0,
                                         min(bounds.h_ub, load_cap(node.id, r)))
                mmap.add(VarKey("Ibar", node=node.id, region=rid), idx)
                idx = model.add_variable(f"z[n{node.id},{rid}]", 0.0, 1.0,
                                         is_integer=True)
                mmap.add(VarKey("z", node=node.id, region=rid), idx)
                idx = model.add_variable(f"U[n{node.id},{rid}]", 0.0, bounds.h_ub)
                mmap.add(VarKey("U", node=node.id, region=rid), idx)
                idx = model.add_variable(f"W[n{node.id},{rid}]", 0.0,
                                         load_cap(node.id, r))
                mmap.add(VarKey("W", node=node.id, region=rid), idx)
                for a in range(len(inst.etc_types)):
                    idx = model.add_variable(
                        f"y[a{a},n{node.id},{rid}]", 0.0,
                        _y_upper_bound(inst, a, bounds.i_ub), is_integer=True,
                    )
                    mmap.add(VarKey("y", node=node.id, region=rid, etype=a), idx)

    def col(sym: str, node_id: int, rid: str, etype: int | None = None) -> int:
        return mmap.index_of(VarKey(sym, node=node_id, region=rid, etype=etype))

    # initial conditions: root states pinned by bounds, root capacity by row
    root = tree.nodes[0]
    for r, rid in enumerate(inst.region_ids):
        for sym, vals in zip(STATE_SYMBOLS,
                             (init.S0, init.I0, init.T0, init.R0, init.F0, init.B0)):
            var = model.variables[col(sym, root.id, rid)]
            var.lb = var.ub = vals[r]
        row = {col("C", root.id, rid): 1.0}
        for a, etc in enumerate(inst.etc_types):
            row[col("y", root.id, rid, a)] = -float(etc.capacity_beds)
        model.add_constraint(f"cap_init[{rid}]", row, SENSE_EQ, init.C0[r])

    # dynamics between parent and child, capacity accumulation, admissions
    for node in tree.nodes:
        if node.parent is None:
            continue
        parent = tree.nodes[node.parent]
        prev = {(s, rid): col(s, parent.id, rid)
                for s in STATE_SYMBOLS for rid in inst.region_ids}
        cur = {(s, rid): col(s, node.id, rid)
               for s in STATE_SYMBOLS for rid in inst.region_ids}
        ibar_prev = {rid: col("Ibar", parent.id, rid) for rid in inst.region_ids}
        _add_balance_rows(model, inst, f"n{node.id}", prev, cur, ibar_prev,
                          node.rate)
        for r, rid in enumerate(inst.region_ids):
            if node.stage == tree.stages:
                model.add_constraint(f"cap_carry[n{node.id},{rid}]", {
                    col("C", node.id, rid): 1.0,
                    col("C", parent.id, rid): -1.0,
                }, SENSE_EQ, 0.0)
            else:
                row = {col("C", node.id, rid): 1.0,
                       col("C", parent.id, rid): -1.0}
                for a, etc in enumerate(inst.etc_types):
                    row[col("y", node.id, rid, a)] = -float(etc.capacity_beds)
                model.add_constraint(f"cap_accum[n{node.id},{rid}]", row,
                                     SENSE_EQ, 0.0)

    for node in tree.nonleaf_nodes():
        for r, rid in enumerate(inst.region_ids):
            expr = _infected_load_expr(mmap, inst, dict(node=node.id), r)
            nb = Bounds(bounds.h_lb, bounds.h_ub, bounds.i_lb,
                        load_cap(node.id, r))
            add_capacity_linearization(model, mmap, node.id, rid, nb, expr)
            for a in range(len(inst.etc_types)):
                model.add_constraint(f"y_needs_I[a{a},n{node.id},{rid}]", {
                    col("y", node.id, rid, a): 1.0,
                    col("I", node.id, rid): -1.0,
                }, SENSE_LE, 0.0)

    # one budget row per scenario
    b1 = inst.costs.treatment_cost_per_person
    for path in scenario_paths(tree):
        row: dict[int, float] = {}
        for depth, nid in enumerate(path.nodes):
            for rid in inst.region_ids:
                idx = col("T", nid, rid)
                row[idx] = row.get(idx, 0.0) + b1
                if depth < len(path.nodes) - 1:
                    for a, etc in enumerate(inst.etc_types):
                        yidx = col("y", nid, rid, a)
                        row[yidx] = row.get(yidx, 0.0) + etc.fixed_cost
        model.add_constraint(f"budget[w{path.leaf}]", row, SENSE_LE,
                             inst.costs.budget)

    # objective: expected infected increments plus period-end unburied dead
    obj: dict[int, float] = {}
    for node in tree.nodes:
        if node.parent is None:
            continue
        p = mmap.node_prob[node.id]
        for rid in inst.region_ids:
            i_cur = col("I", node.id, rid)
            i_prev = col("I", node.parent, rid)
            f_cur = col("F", node.id, rid)
            obj[i_cur] = obj.get(i_cur, 0.0) + p
            obj[i_prev] = obj.get(i_prev, 0.0) - p
            obj[f_cur] = obj.get(f_cur, 0.0) + p
    model.objective = {i: c for i, c in obj.items() if c != 0.0}
    return model, mmap


def _build_scenario_split(inst: Instance, tree: ScenarioTree, opts: BuildOptions,
                          bounds: Bounds, caps: dict[int, _NodeCaps] | None,
                          ) -> tuple[LinearModel, ModelMap]:
    model = LinearModel()
    mmap = ModelMap("scenario-split", inst.region_ids,
                    {r.id: r.population for r in inst.regions}, tree.stages)
    paths = scenario_paths(tree)
    stages = tree.stages
    init = inst.initial
    state_ub = _state_upper_bounds(inst, bounds)

    def i_cap(nid: int, r: int) -> float:
        if caps is None:
            return bounds.i_ub
        return min(bounds.i_ub, caps[nid].infected[r] + 1.0)

    def load_cap(nid: int, r: int) -> float:
        if caps is None:
            return bounds.i_ub
        return min(bounds.i_ub, caps[nid].load[r] + 1.0)

    for node in tree.nodes:
        mmap.node_stage[node.id] = node.stage
        mmap.node_prob[node.id] = tree.path_prob(node.id)
    for w, path in enumerate(paths):
        mmap.scen_prob[w] = path.probability

    for w, path in enumerate(paths):
        for j in range(stages + 1):
            nid = path.nodes[j]
            for r, rid in enumerate(inst.region_ids):
                for sym in STATE_SYMBOLS:
                    ub = i_cap(nid, r) if sym == "I" else state_ub[sym]
                    idx = model.add_variable(f"{sym}[w{w},t{j},{rid}]", 0.0, ub)
                    mmap.add(VarKey(sym, scen=w, stage=j, region=rid), idx)
                idx = model.add_variable(f"C[w{w},t{j},{rid}]", 0.0, bounds.h_ub)
                mmap.add(VarKey("C", scen=w, stage=j, region=rid), idx)
                if j < stages:
                    idx = model.add_variable(f"Ibar[w{w},t{j},{rid}]", 0.0,
                                             min(bounds.h_ub, load_cap(nid, r)))
                    mmap.add(VarKey("Ibar", scen=w, stage=j, region=rid), idx)
                    idx = model.add_variable(f"z[w{w},t{j},{rid}]", 0.0, 1.0,
                                             is_integer=True)
                    mmap.add(VarKey("z", scen=w, stage=j, region=rid), idx)
                    idx = model.add_variable(f"U[w{w},t{j},{rid}]", 0.0, bounds.h_ub)
                    mmap.add(VarKey("U", scen=w, stage=j, region=rid), idx)
                    idx = model.add_variable(f"W[w{w},t{j},{rid}]", 0.0,
                                             load_cap(nid, r))
                    mmap.add(VarKey("W", scen=w, stage=j, region=rid), idx)
                    for a in range(len(inst.etc_types)):
                        idx = model.add_variable(
                            f"y[a{a},w{w},t{j},{rid}]", 0.0,
                            _y_upper_bound(inst, a, bounds.i_ub), is_integer=True,
                        )
                        mmap.add(VarKey("y", scen=w, stage=j, region=rid, etype=a), idx)

    def col(sym: str, w: int, j: int, rid: str, etype: int | None = None) -> int:
        return mmap.index_of(VarKey(sym, scen=w, stage=j, region=rid, etype=etype))

    b1 = inst.costs.treatment_cost_per_person
    obj: dict[int, float] = {}
    for w, path in enumerate(paths):
        for r, rid in enumerate(inst.region_ids):
            for sym, vals in zip(STATE_SYMBOLS, (init.S0, init.I0, init.T0,
                                                 init.R0, init.F0, init.B0)):
                var = model.variables[col(sym, w, 0, rid)]
                var.lb = var.ub = vals[r]
            row = {col("C", w, 0, rid): 1.0}
            for a, etc in enumerate(inst.etc_types):
                row[col("y", w, 0, rid, a)] = -float(etc.capacity_beds)
            model.add_constraint(f"cap_init[w{w},{rid}]", row, SENSE_EQ, init.C0[r])

        for j in range(stages):
            prev = {(s, rid): col(s, w, j, rid)
                    for s in STATE_SYMBOLS for rid in inst.region_ids}
            cur = {(s, rid): col(s, w, j + 1, rid)
                   for s in STATE_SYMBOLS for rid in inst.region_ids}
            ibar_prev = {rid: col("Ibar", w, j, rid) for rid in inst.region_ids}
            _add_balance_rows(model, inst, f"w{w},t{j + 1}", prev, cur, ibar_prev,
                              path.rates[j + 1])
            for rid in inst.region_ids:
                if j + 1 < stages:
                    row = {col("C", w, j + 1, rid): 1.0,
                           col("C", w, j, rid): -1.0}
                    for a, etc in enumerate(inst.etc_types):
                        row[col("y", w, j + 1, rid, a)] = -float(etc.capacity_beds)
                    model.add_constraint(f"cap_accum[w{w},t{j + 1},{rid}]", row,
                                         SENSE_EQ, 0.0)
                else:
                    model.add_constraint(f"cap_carry[w{w},t{j + 1},{rid}]", {
                        col("C", w, j + 1, rid): 1.0,
                        col("C", w, j, rid): -1.0,
                    }, SENSE_EQ, 0.0)

        for j in range(stages):
            for r, rid in enumerate(inst.region_ids):
                expr = _infected_load_expr(mmap, inst, dict(scen=w, stage=j), r)
                nb = Bounds(bounds.h_lb, bounds.h_ub, bounds.i_lb,
                            load_cap(path.nodes[j], r))
                add_capacity_linearization(model, mmap, (w, j), rid, nb, expr)
                for a in range(len(inst.etc_types)):
                    model.add_constraint(f"y_needs_I[a{a},w{w},t{j},{rid}]", {
                        col("y", w, j, rid, a): 1.0,
                        col("I", w, j, rid): -1.0,
                    }, SENSE_LE, 0.0)

        row = {}
        for j in range(stages + 1):
            for rid in inst.region_ids:
                idx = col("T", w, j, rid)
                row[idx] = row.get(idx, 0.0) + b1
                if j < stages:
                    for a, etc in enumerate(inst.etc_types):
                        yidx = col("y", w, j, rid, a)
                        row[yidx] = row.get(yidx, 0.0) + etc.fixed_cost
        model.add_constraint(f"budget[w{w}]", row, SENSE_LE, inst.costs.budget)

        p = path.probability
        for j in range(stages):
            for rid in inst.region_ids:
                i_cur = col("I", w, j + 1, rid)
                i_prev = col("I", w, j, rid)
                f_cur = col("F", w, j + 1, rid)
                obj[i_cur] = obj.get(i_cur, 0.0) + p
                obj[i_prev] = obj.get(i_prev, 0.0) - p
                obj[f_cur] = obj.get(f_cur, 0.0) + p

    # explicit non-anticipativity: scenarios through the same node carry
    # identical openings, admissions, and capacity at that node's stage
    scen_of_leaf = {path.leaf: w for w, path in enumerate(paths)}

    def scens_through(node_id: int) -> list[int]:
        out = []
        stack = [node_id]
        while stack:
            nid = stack.pop()
            node = tree.nodes[nid]
            if node.stage == stages:
                out.append(scen_of_leaf[nid])
            else:
                stack.extend(c.id for c in tree.children(nid))
        return sorted(out)

    for node in tree.nodes:
        group = scens_through(node.id)
        if len(group) < 2:
            continue
        ref = group[0]
        j = node.stage
        for w in group[1:]:
            for rid in inst.region_ids:
                model.add_constraint(f"na_C[n{node.id},w{w},{rid}]", {
                    col("C", w, j, rid): 1.0, col("C", ref, j, rid): -1.0,
                }, SENSE_EQ, 0.0)
                if j < stages:
                    model.add_constraint(f"na_Ibar[n{node.id},w{w},{rid}]", {
                        col("Ibar", w, j, rid): 1.0,
                        col("Ibar", ref, j, rid): -1.0,
                    }, SENSE_EQ, 0.0)
                    for a in range(len(inst.etc_types)):
                        model.add_constraint(f"na_y[a{a},n{node.id},w{w},{rid}]", {
                            col("y", w, j, rid, a): 1.0,
                            col("y", ref, j, rid, a): -1.0,
                        }, SENSE_EQ, 0.0)

    model.objective = {i: c for i, c in obj.items() if c != 0.0}
    return model, mmap


# ---------------------------------------------------------------------------
# Reading solutions back

def extract_node_plan(mmap: ModelMap, values: Sequence[float],
                      n_etc_types: int) -> dict[int, dict[tuple[int, int], int]]:
    """Per-node facility openings from a node-compact solution:
    {node_id: {(etc_type, region_index): count}}."""
    if mmap.formulation != "node-compact":
        raise ValueError("extract_node_plan requires a node-compact map")
    plan: dict[int, dict[tuple[int, int], int]] = {}
    ridx = {rid: i for i, rid in enumerate(mmap.region_ids)}
    for key in mmap.keys():
        if key.symbol != "y":
            continue
        cnt = int(round(values[mmap.index_of(key)]))
        plan.setdefault(key.node, {})[(key.etype, ridx[key.region])] = cnt
    return plan


def extract_stage_plan(mmap: ModelMap, values: Sequence[float],
                       n_etc_types: int) -> dict[int, dict[tuple[int, int], int]]:
    """Per-stage openings from a single-scenario (chain) solution:
    {stage: {(etc_type, region_index): count}}."""
    plan: dict[int, dict[tuple[int, int], int]] = {}
    ridx = {rid: i for i, rid in enumerate(mmap.region_ids)}
    for key in mmap.keys():
        if key.symbol != "y":
            continue
        stage = key.stage if key.stage is not None else mmap.node_stage[key.node]
        cnt = int(round(values[mmap.index_of(key)]))
        cell = plan.setdefault(stage, {})
        cell[(key.etype, ridx[key.region])] = \
            cell.get((key.etype, ridx[key.region]), 0) + cnt
    return plan
