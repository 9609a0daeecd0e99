"""Discrete-time roll-forward of the six-compartment disease dynamics.

Per region the state holds susceptible (S), infected (I), treated (T),
recovered (R), unburied dead (F), buried (B) populations plus cumulative bed
capacity C.  One step advances a period in this fixed order:

  1. beds opened this stage are added to capacity,
  2. susceptible/infected migration flows between regions are computed,
  3. new infections nu = chi1 * I + chi2 * F,
  4. hospital admissions are capped by free beds, evaluated on the
     post-migration, pre-transition infected count (so the admission level
     is known before the period's epidemiological transitions resolve),
  5. the six balance equations produce the next state.

Compartments are continuous; only facility counts are integer.  Extreme
rates can push a compartment slightly negative in a discrete update; values
are clamped at zero and every clamp is counted, since a plan that needs
clamping is infeasible for the optimization model and callers must be able
to mirror that.

Everything here is purely functional over immutable inputs, so paths can be
simulated concurrently.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

from .epidata import Instance
from .scentree import ScenarioPath, ScenarioTree


@dataclass(frozen=True)
class CompartmentState:
    """Per-region compartment populations and cumulative bed capacity."""

    S: tuple[float, ...]
    I: tuple[float, ...]
    T: tuple[float, ...]
    R: tuple[float, ...]
    F: tuple[float, ...]
    B: tuple[float, ...]
    C: tuple[float, ...]

    @property
    def n_regions(self) -> int:
        return len(self.S)

    def total_population(self) -> float:
        return sum(map(sum, (self.S, self.I, self.T, self.R, self.F, self.B)))

    @staticmethod
    def from_instance(inst: Instance) -> "CompartmentState":
        init = inst.initial
        return CompartmentState(S=init.S0, I=init.I0, T=init.T0,
                                R=init.R0, F=init.F0, B=init.B0, C=init.C0)


@dataclass(frozen=True)
class CapacityPlan:
    """Facility-opening counts ``opens[a][j][r]``: type-a centers opened in
    region r at stage j (nonnegative integers)."""

    opens: tuple[tuple[tuple[int, ...], ...], ...]

    @property
    def n_types(self) -> int:
        return len(self.opens)

    @property
    def stages(self) -> int:
        return len(self.opens[0]) if self.opens else 0

    def count(self, a: int, j: int, r: int) -> int:
        return self.opens[a][j][r]

    def opens_at(self, j: int) -> list[tuple[int, ...]]:
        """Per-type region counts opened at stage j (all zero past the plan)."""
        if j >= self.stages:
            n_r = len(self.opens[0][0]) if self.stages else 0
            return [tuple(0 for _ in range(n_r)) for _ in range(self.n_types)]
        return [self.opens[a][j] for a in range(self.n_types)]

    @staticmethod
    def zeros(n_types: int, stages: int, n_regions: int) -> "CapacityPlan":
        return CapacityPlan(tuple(
            tuple(tuple(0 for _ in range(n_regions)) for _ in range(stages))
            for _ in range(n_types)
        ))

    @staticmethod
    def from_cells(n_types: int, stages: int, n_regions: int,
                   cells: dict[tuple[int, int, int], int]) -> "CapacityPlan":
        """Build from a sparse {(a, j, r): count} mapping."""
        return CapacityPlan(tuple(
            tuple(tuple(int(cells.get((a, j, r), 0)) for r in range(n_regions))
                  for j in range(stages))
            for a in range(n_types)
        ))

    def fixed_cost(self, inst: Instance) -> float:
        total = 0.0
        for a, etc in enumerate(inst.etc_types):
            if a >= self.n_types:
                break
            for stage in self.opens[a]:
                total += etc.fixed_cost * sum(stage)
        return total


@dataclass(frozen=True)
class StepInfo:
    """Period flows produced alongside a step."""

    new_infections: tuple[float, ...]
    hospitalized: tuple[float, ...]
    clamped: int


@dataclass(frozen=True)
class Trajectory:
    """Simulated evolution along one scenario.

    ``states[j]`` is the start of period j with that period's facility
    openings already counted in C, so C always reads "beds available during
    the period starting here"; the final state keeps the last period's
    capacity.
    """

    states: tuple[CompartmentState, ...]
    new_infections: tuple[tuple[float, ...], ...]
    hospitalized: tuple[tuple[float, ...], ...]
    spend: float
    objective_value: float
    within_budget: bool
    clamp_count: int

    @property
    def stages(self) -> int:
        return len(self.states) - 1


def hospitalization(infected: float, capacity: float, treated: float) -> float:
    """New admissions: the infected load or the free beds, whichever is
    smaller, never negative."""
    return max(0.0, min(infected, capacity - treated))


def _validate_rates(rates: Sequence[float], inst: Instance) -> None:
    if len(rates) != inst.n_regions:
        raise ValueError(
            f"expected {inst.n_regions} rates, got {len(rates)}"
        )
    for rid, x in zip(inst.region_ids, rates):
        if math.isnan(x) or x < 0:
            raise ValueError(f"transmission rate for region {rid} is invalid: {x!r}")


def step_full(
    state: CompartmentState,
    rates: Sequence[float],
    inst: Instance,
    opens_now: Sequence[Sequence[int]] | None = None,
) -> tuple[CompartmentState, StepInfo]:
    """Advance one period; returns the next state plus the period flows."""
    _validate_rates(rates, inst)
    n = inst.n_regions
    mig = inst.migration.rates
    out_rate = [inst.migration.out_rate(i) for i in range(n)]

    if opens_now is None:
        c_avail = list(state.C)
    else:
        c_avail = list(state.C)
        for a, etc in enumerate(inst.etc_types):
            row = opens_now[a] if a < len(opens_now) else ()
            for r, cnt in enumerate(row):
                if cnt < 0:
                    raise ValueError("facility openings must be nonnegative")
                c_avail[r] += etc.capacity_beds * cnt

    s_in = [sum(mig[l][r] * state.S[l] for l in range(n)) for r in range(n)]
    s_out = [out_rate[r] * state.S[r] for r in range(n)]
    i_in = [sum(mig[l][r] * state.I[l] for l in range(n)) for r in range(n)]
    i_out = [out_rate[r] * state.I[r] for r in range(n)]

    clamped = 0

    def clamp(x: float) -> float:
        nonlocal clamped
        if x < 0.0:
            clamped += 1
            return 0.0
        return x

    S2, I2, T2, R2, F2, B2 = [], [], [], [], [], []
    nu_out, hosp_out = [], []
    for r, reg in enumerate(inst.regions):
        S, I, T, R, F, B = (state.S[r], state.I[r], state.T[r],
                            state.R[r], state.F[r], state.B[r])
        nu = rates[r] * I + reg.chi2 * F
        i_mig = I + i_in[r] - i_out[r]
        hosp = hospitalization(i_mig, c_avail[r], T)
        S2.append(clamp(S + s_in[r] - s_out[r] - nu))
        I2.append(clamp(i_mig + nu - (reg.lambda1 + reg.lambda3) * I - hosp))
        T2.append(clamp(T + hosp - (reg.lambda2 + reg.lambda4) * T))
        R2.append(R + reg.lambda4 * T + reg.lambda3 * I)
        F2.append(clamp(F + reg.lambda1 * I + reg.lambda2 * T - reg.lambda5 * F))
        B2.append(B + reg.lambda5 * F)
        nu_out.append(nu)
        hosp_out.append(hosp)

    next_state = CompartmentState(
        S=tuple(S2), I=tuple(I2), T=tuple(T2), R=tuple(R2),
        F=tuple(F2), B=tuple(B2), C=tuple(c_avail),
    )
    return next_state, StepInfo(tuple(nu_out), tuple(hosp_out), clamped)


def step(
    state: CompartmentState,
    rates: Sequence[float],
    inst: Instance,
    opens_now: Sequence[Sequence[int]] | None = None,
) -> CompartmentState:
    return step_full(state, rates, inst, opens_now)[0]


def simulate_path(
    inst: Instance,
    plan: CapacityPlan,
    path: ScenarioPath,
    initial: CompartmentState | None = None,
) -> Trajectory:
    """Roll the dynamics forward along one scenario under a capacity plan.

    The objective contribution is the per-period infected increment plus the
    period-end unburied dead, summed over periods and regions.  Spend covers
    facility fixed costs plus the per-period treatment cost of every treated
    person over the whole horizon; exceeding the budget sets a flag rather
    than raising, because infeasible plans still need evaluating.
    """
    stages = len(path.nodes) - 1
    if plan.stages > stages:
        raise ValueError(
            f"plan covers {plan.stages} stages but the scenario has {stages}"
        )
    state = initial if initial is not None else CompartmentState.from_instance(inst)
    states: list[CompartmentState] = []
    nus, hosps = [], []
    objective = 0.0
    clamps = 0
    treated_person_periods = sum(state.T)
    for j in range(stages):
        nxt, info = step_full(state, path.rates[j + 1], inst, plan.opens_at(j))
        # record the start-of-period state carrying the period's capacity
        states.append(dataclasses.replace(state, C=nxt.C))
        objective += sum(
            (nxt.I[r] - state.I[r]) + nxt.F[r] for r in range(inst.n_regions)
        )
        treated_person_periods += sum(nxt.T)
        nus.append(info.new_infections)
        hosps.append(info.hospitalized)
        clamps += info.clamped
        state = nxt
    states.append(state)
    spend = plan.fixed_cost(inst) + \
        inst.costs.treatment_cost_per_person * treated_person_periods
    return Trajectory(
        states=tuple(states),
        new_infections=tuple(nus),
        hospitalized=tuple(hosps),
        spend=spend,
        objective_value=objective,
        within_budget=spend <= inst.costs.budget + 1e-6,
        clamp_count=clamps,
    )


def plan_for_path(
    tree: ScenarioTree,
    node_plan: dict[int, dict[tuple[int, int], int]],
    path: ScenarioPath,
    n_types: int,
    n_regions: int,
) -> CapacityPlan:
    """Stage plan seen along one scenario, read off a per-node decision map
    ``node_plan[node_id][(etc_type, region)] = count``."""
    stages = len(path.nodes) - 1
    cells: dict[tuple[int, int, int], int] = {}
    for j in range(stages):
        decisions = node_plan.get(path.nodes[j], {})
        for (a, r), cnt in decisions.items():
            cells[(a, j, r)] = cnt
    return CapacityPlan.from_cells(n_types, stages, n_regions, cells)


def evaluate_policy(
    inst: Instance,
    tree: ScenarioTree,
    node_plan: dict[int, dict[tuple[int, int], int]],
) -> float:
    """Probability-weighted objective of a per-node opening policy.

    The policy must assign decisions on tree nodes, so it is non-anticipative
    by construction; every scenario is simulated with the plan its own path
    induces.
    """
    from .scentree import scenario_paths

    missing = [n.id for n in tree.nonleaf_nodes() if n.id not in node_plan]
    if missing:
        raise ValueError(f"node_plan missing decisions for nodes {missing}")
    total = 0.0
    n_types = len(inst.etc_types)
    for path in scenario_paths(tree):
        plan = plan_for_path(tree, node_plan, path, n_types, inst.n_regions)
        total += path.probability * simulate_path(inst, plan, path).objective_value
    return total
