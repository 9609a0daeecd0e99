"""Problem-instance data model, validation, file I/O, and the built-in case study.

An instance bundles everything a planning run needs: per-region epidemiology,
the migration matrix, treatment-center types, cost/budget data, initial
compartment populations, and the branching scheme for the scenario tree.
All rates are per planning period (two weeks).

Instance files are TOML with the following sections (see README for the full
schema):

    [instance]        horizon, branch_probs, branch_quantiles
    [costs]           treatment_cost_per_person, burial_cost_per_body, budget
    [[etc_types]]     id, capacity_beds, fixed_cost
    [[regions]]       id, name, country, population, lambda1..lambda5,
                      chi2, chi1_low, chi1_high, chi1_mean, chi1_sigma
    [initial.<id>]    S0, I0, T0, R0, F0, B0, C0
    [migration]       rates = [{from, to, rate}, ...]  or  csv = "file.csv"

Unknown keys anywhere in the file are rejected.  ``save_instance`` emits a
canonical form of the same format so that save -> load -> save is
byte-identical.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class InstanceError(Exception):
    """Base class for instance loading/validation failures."""


class InstanceParseError(InstanceError):
    """File is not well-formed (syntax, missing/unknown keys, bad types)."""


class InstanceValidationError(InstanceError):
    """Instance parsed but violates data invariants."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__(
            "instance validation failed:\n  - " + "\n  - ".join(self.violations)
        )


@dataclass(frozen=True)
class RegionParams:
    """Epidemiological parameters of one region.

    The five lambdas are per-period transition fractions: fatality without
    treatment, fatality under treatment, recovery without treatment,
    recovery under treatment, and safe burial of unburied dead.  chi2 is the
    funeral-contact transmission rate.  The uncertain community transmission
    rate is described twice, because the source literature reports it two
    ways: chi1_low/chi1_high are the published low/high realization pair,
    while chi1_mean/chi1_sigma parameterize the normal distribution that the
    scenario tree samples by default.  The two pairs need not nest.
    """

    id: str
    name: str
    population: float
    lambda1: float
    lambda2: float
    lambda3: float
    lambda4: float
    lambda5: float
    chi2: float
    chi1_low: float
    chi1_high: float
    chi1_mean: float
    chi1_sigma: float
    country: str = ""

    def country_or_self(self) -> str:
        return self.country if self.country else self.id


@dataclass(frozen=True)
class MigrationMatrix:
    """Per-period migration fractions between regions.

    ``rates[i][j]`` is the fraction of region i's susceptible and infected
    populations that moves to region j in one period.  The same table is
    used as out-rate from i and in-rate into j, so total population flow
    balances globally.
    """

    ids: tuple[str, ...]
    rates: tuple[tuple[float, ...], ...]

    def rate(self, frm: str, to: str) -> float:
        return self.rates[self.ids.index(frm)][self.ids.index(to)]

    def out_rate(self, i: int) -> float:
        return sum(self.rates[i])

    @staticmethod
    def zero(ids: tuple[str, ...]) -> "MigrationMatrix":
        n = len(ids)
        return MigrationMatrix(ids, tuple(tuple(0.0 for _ in range(n)) for _ in range(n)))


@dataclass(frozen=True)
class EtcType:
    """One treatment-center size class: bed capacity and one-time fixed cost."""

    id: int
    capacity_beds: int
    fixed_cost: float


@dataclass(frozen=True)
class CostTable:
    """Per-period unit costs and the total treatment budget."""

    treatment_cost_per_person: float
    burial_cost_per_body: float
    budget: float


@dataclass(frozen=True)
class InitialState:
    """Initial compartment populations and bed capacity, aligned with
    ``Instance.regions`` order."""

    S0: tuple[float, ...]
    I0: tuple[float, ...]
    T0: tuple[float, ...]
    R0: tuple[float, ...]
    F0: tuple[float, ...]
    B0: tuple[float, ...]
    C0: tuple[float, ...]

    def total_population(self) -> float:
        return sum(
            sum(getattr(self, f)) for f in ("S0", "I0", "T0", "R0", "F0", "B0")
        )


@dataclass(frozen=True)
class Instance:
    regions: tuple[RegionParams, ...]
    migration: MigrationMatrix
    etc_types: tuple[EtcType, ...]
    costs: CostTable
    initial: InitialState
    horizon: int
    branch_probs: tuple[float, ...]
    branch_quantiles: tuple[float, ...]

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    @property
    def region_ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.regions)

    def region_index(self, region_id: str) -> int:
        return self.region_ids.index(region_id)

    def countries(self) -> tuple[str, ...]:
        seen: list[str] = []
        for r in self.regions:
            c = r.country_or_self()
            if c not in seen:
                seen.append(c)
        return tuple(seen)


# ---------------------------------------------------------------------------
# Validation

def _check_finite(violations: list[str], label: str, value: float) -> None:
    if not math.isfinite(value):
        violations.append(f"{label} must be finite, got {value!r}")


def validate_instance(inst: Instance) -> list[str]:
    """Return a description of every violated invariant (empty list if valid)."""
    v: list[str] = []
    if len(inst.regions) < 1:
        v.append("instance must have at least one region")
    if inst.horizon < 1:
        v.append(f"horizon must be >= 1, got {inst.horizon}")

    ids = [r.id for r in inst.regions]
    if len(set(ids)) != len(ids):
        v.append("region ids must be unique")

    for r in inst.regions:
        _check_finite(v, f"region {r.id}: population", r.population)
        if r.population <= 0:
            v.append(f"region {r.id}: population must be > 0, got {r.population}")
        for k in ("lambda1", "lambda2", "lambda3", "lambda4", "lambda5"):
            val = getattr(r, k)
            if not (0.0 <= val <= 1.0):
                v.append(f"region {r.id}: {k} must be in [0, 1], got {val}")
        if r.lambda1 + r.lambda3 > 1.0:
            v.append(
                f"region {r.id}: lambda1 + lambda3 must be <= 1, "
                f"got {r.lambda1 + r.lambda3}"
            )
        if r.lambda2 + r.lambda4 > 1.0:
            v.append(
                f"region {r.id}: lambda2 + lambda4 must be <= 1, "
                f"got {r.lambda2 + r.lambda4}"
            )
        if r.chi2 < 0:
            v.append(f"region {r.id}: chi2 must be >= 0, got {r.chi2}")
        if not (0.0 <= r.chi1_low <= r.chi1_high):
            v.append(
                f"region {r.id}: need 0 <= chi1_low <= chi1_high, "
                f"got ({r.chi1_low}, {r.chi1_high})"
            )
        if r.chi1_mean <= 0:
            v.append(f"region {r.id}: chi1_mean must be > 0, got {r.chi1_mean}")
        if r.chi1_sigma <= 0:
            v.append(f"region {r.id}: chi1_sigma must be > 0, got {r.chi1_sigma}")

    m = inst.migration
    if m.ids != inst.region_ids:
        v.append("migration matrix region ids must match instance regions in order")
    else:
        n = len(m.ids)
        for i in range(n):
            if len(m.rates[i]) != n:
                v.append(f"migration row {m.ids[i]} must have {n} entries")
                continue
            if m.rates[i][i] != 0.0:
                v.append(f"migration rate {m.ids[i]} -> itself must be 0")
            for j in range(n):
                if not (0.0 <= m.rates[i][j] < 1.0):
                    v.append(
                        f"migration rate {m.ids[i]} -> {m.ids[j]} must be in "
                        f"[0, 1), got {m.rates[i][j]}"
                    )
            if m.out_rate(i) >= 1.0:
                v.append(
                    f"migration row {m.ids[i]} sums to {m.out_rate(i)}, must be < 1"
                )

    etc_ids = [e.id for e in inst.etc_types]
    if len(set(etc_ids)) != len(etc_ids):
        v.append("etc_types ids must be unique")
    for e in inst.etc_types:
        if e.capacity_beds <= 0:
            v.append(f"etc type {e.id}: capacity_beds must be > 0, got {e.capacity_beds}")
        if e.fixed_cost < 0:
            v.append(f"etc type {e.id}: fixed_cost must be >= 0, got {e.fixed_cost}")

    c = inst.costs
    for k in ("treatment_cost_per_person", "burial_cost_per_body", "budget"):
        val = getattr(c, k)
        _check_finite(v, f"costs.{k}", val)
        if val < 0:
            v.append(f"costs.{k} must be >= 0, got {val}")

    init = inst.initial
    n = inst.n_regions
    for f in fields(init):
        arr = getattr(init, f.name)
        if len(arr) != n:
            v.append(f"initial.{f.name} must have {n} entries, got {len(arr)}")
            continue
        for rid, val in zip(inst.region_ids, arr):
            if val < 0:
                v.append(f"initial {f.name} for region {rid} must be >= 0, got {val}")
    if len(init.T0) == n and len(init.C0) == n:
        for rid, t0, c0 in zip(inst.region_ids, init.T0, init.C0):
            if t0 > c0:
                v.append(
                    f"initial treated T0 ({t0}) exceeds bed capacity C0 ({c0}) "
                    f"in region {rid}"
                )

    if abs(sum(inst.branch_probs) - 1.0) > 1e-9:
        v.append(
            f"branch probabilities must sum to 1, got {sum(inst.branch_probs)}"
        )
    if any(p <= 0 for p in inst.branch_probs):
        v.append("branch probabilities must be positive")
    if len(inst.branch_probs) != len(inst.branch_quantiles):
        v.append("branch_probs and branch_quantiles must have the same length")
    if any(not (0.0 < q < 1.0) for q in inst.branch_quantiles):
        v.append("branch quantiles must lie strictly inside (0, 1)")
    if list(inst.branch_quantiles) != sorted(inst.branch_quantiles):
        v.append("branch quantiles must be nondecreasing")
    return v


def ensure_valid(inst: Instance) -> Instance:
    violations = validate_instance(inst)
    if violations:
        raise InstanceValidationError(violations)
    return inst


# ---------------------------------------------------------------------------
# TOML loading (strict: unknown keys rejected)

_REGION_KEYS = {
    "id", "name", "country", "population",
    "lambda1", "lambda2", "lambda3", "lambda4", "lambda5",
    "chi2", "chi1_low", "chi1_high", "chi1_mean", "chi1_sigma",
}
_INITIAL_KEYS = {"S0", "I0", "T0", "R0", "F0", "B0", "C0"}


def _reject_unknown(section: str, data: dict, allowed: set[str]) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise InstanceParseError(
            f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}"
        )


def _get(section: str, data: dict, key: str, kind, required: bool = True, default=None):
    if key not in data:
        if required:
            raise InstanceParseError(f"missing key '{key}' in [{section}]")
        return default
    val = data[key]
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise InstanceParseError(f"[{section}].{key} must be a number, got {val!r}")
        return float(val)
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise InstanceParseError(f"[{section}].{key} must be an integer, got {val!r}")
        return val
    if kind is str:
        if not isinstance(val, str):
            raise InstanceParseError(f"[{section}].{key} must be a string, got {val!r}")
        return val
    if kind is list:
        if not isinstance(val, list):
            raise InstanceParseError(f"[{section}].{key} must be an array, got {val!r}")
        return val
    raise AssertionError(kind)


def _float_list(section: str, key: str, val: list) -> tuple[float, ...]:
    out = []
    for x in val:
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise InstanceParseError(f"[{section}].{key} entries must be numbers")
        out.append(float(x))
    return tuple(out)


def _parse_migration_csv(text: str, source: str) -> list[dict]:
    rows = []
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["from", "to", "rate"]:
        raise InstanceParseError(
            f"{source}: migration CSV must have header 'from,to,rate'"
        )
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise InstanceParseError(f"{source}, line {lineno}: expected 3 fields")
        try:
            rate = float(row[2])
        except ValueError:
            raise InstanceParseError(
                f"{source}, line {lineno}: rate {row[2]!r} is not a number"
            ) from None
        rows.append({"from": row[0].strip(), "to": row[1].strip(), "rate": rate})
    return rows


def _instance_from_dict(data: dict, base_dir: Path | None) -> Instance:
    _reject_unknown(
        "<top level>", data,
        {"instance", "costs", "etc_types", "regions", "initial", "migration"},
    )

    top = data.get("instance")
    if not isinstance(top, dict):
        raise InstanceParseError("missing [instance] section")
    _reject_unknown("instance", top, {"horizon", "branch_probs", "branch_quantiles"})
    horizon = _get("instance", top, "horizon", int)
    probs = _float_list("instance", "branch_probs",
                        _get("instance", top, "branch_probs", list))
    quants = _float_list("instance", "branch_quantiles",
                         _get("instance", top, "branch_quantiles", list))

    cs = data.get("costs")
    if not isinstance(cs, dict):
        raise InstanceParseError("missing [costs] section")
    _reject_unknown(
        "costs", cs,
        {"treatment_cost_per_person", "burial_cost_per_body", "budget"},
    )
    costs = CostTable(
        treatment_cost_per_person=_get("costs", cs, "treatment_cost_per_person", float),
        burial_cost_per_body=_get("costs", cs, "burial_cost_per_body", float),
        budget=_get("costs", cs, "budget", float),
    )

    raw_etcs = data.get("etc_types")
    if not isinstance(raw_etcs, list) or not raw_etcs:
        raise InstanceParseError("at least one [[etc_types]] entry is required")
    etcs = []
    for i, e in enumerate(raw_etcs):
        sec = f"etc_types[{i}]"
        _reject_unknown(sec, e, {"id", "capacity_beds", "fixed_cost"})
        etcs.append(EtcType(
            id=_get(sec, e, "id", int),
            capacity_beds=_get(sec, e, "capacity_beds", int),
            fixed_cost=_get(sec, e, "fixed_cost", float),
        ))

    raw_regions = data.get("regions")
    if not isinstance(raw_regions, list) or not raw_regions:
        raise InstanceParseError("at least one [[regions]] entry is required")
    regions = []
    for i, r in enumerate(raw_regions):
        sec = f"regions[{i}]"
        _reject_unknown(sec, r, _REGION_KEYS)
        regions.append(RegionParams(
            id=_get(sec, r, "id", str),
            name=_get(sec, r, "name", str, required=False, default=""),
            country=_get(sec, r, "country", str, required=False, default=""),
            population=_get(sec, r, "population", float),
            lambda1=_get(sec, r, "lambda1", float),
            lambda2=_get(sec, r, "lambda2", float),
            lambda3=_get(sec, r, "lambda3", float),
            lambda4=_get(sec, r, "lambda4", float),
            lambda5=_get(sec, r, "lambda5", float),
            chi2=_get(sec, r, "chi2", float),
            chi1_low=_get(sec, r, "chi1_low", float),
            chi1_high=_get(sec, r, "chi1_high", float),
            chi1_mean=_get(sec, r, "chi1_mean", float),
            chi1_sigma=_get(sec, r, "chi1_sigma", float),
        ))
    region_ids = tuple(r.id for r in regions)

    raw_init = data.get("initial")
    if not isinstance(raw_init, dict):
        raise InstanceParseError("missing [initial.<region>] sections")
    _reject_unknown("initial", raw_init, set(region_ids))
    cols: dict[str, list[float]] = {k: [] for k in _INITIAL_KEYS}
    for rid in region_ids:
        sec = f"initial.{rid}"
        entry = raw_init.get(rid)
        if not isinstance(entry, dict):
            raise InstanceParseError(f"missing [{sec}] section")
        _reject_unknown(sec, entry, _INITIAL_KEYS)
        for k in _INITIAL_KEYS:
            cols[k].append(_get(sec, entry, k, float))
    initial = InitialState(**{k: tuple(cols[k]) for k in
                              ("S0", "I0", "T0", "R0", "F0", "B0", "C0")})

    raw_mig = data.get("migration", {})
    if not isinstance(raw_mig, dict):
        raise InstanceParseError("[migration] must be a table")
    _reject_unknown("migration", raw_mig, {"rates", "csv"})
    if "rates" in raw_mig and "csv" in raw_mig:
        raise InstanceParseError("[migration] must give either 'rates' or 'csv', not both")
    entries: list[dict]
    if "csv" in raw_mig:
        rel = _get("migration", raw_mig, "csv", str)
        csv_path = (base_dir / rel) if base_dir is not None else Path(rel)
        try:
            text = csv_path.read_text()
        except OSError as exc:
            raise InstanceParseError(f"cannot read migration CSV {csv_path}: {exc}")
        entries = _parse_migration_csv(text, str(csv_path))
    else:
        entries = []
        for i, e in enumerate(_get("migration", raw_mig, "rates", list,
                                   required=False, default=[])):
            sec = f"migration.rates[{i}]"
            if not isinstance(e, dict):
                raise InstanceParseError(f"{sec} must be a table {{from, to, rate}}")
            _reject_unknown(sec, e, {"from", "to", "rate"})
            entries.append({
                "from": _get(sec, e, "from", str),
                "to": _get(sec, e, "to", str),
                "rate": _get(sec, e, "rate", float),
            })

    n = len(region_ids)
    mat = [[0.0] * n for _ in range(n)]
    for e in entries:
        if e["from"] not in region_ids:
            raise InstanceParseError(f"migration references unknown region {e['from']!r}")
        if e["to"] not in region_ids:
            raise InstanceParseError(f"migration references unknown region {e['to']!r}")
        mat[region_ids.index(e["from"])][region_ids.index(e["to"])] = e["rate"]
    migration = MigrationMatrix(region_ids, tuple(tuple(row) for row in mat))

    return Instance(
        regions=tuple(regions),
        migration=migration,
        etc_types=tuple(etcs),
        costs=costs,
        initial=initial,
        horizon=horizon,
        branch_probs=probs,
        branch_quantiles=quants,
    )


def loads_instance(text: str, base_dir: Path | None = None) -> Instance:
    """Parse and validate an instance from TOML text."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise InstanceParseError(f"TOML parse error: {exc}") from None
    inst = _instance_from_dict(data, base_dir)
    return ensure_valid(inst)


def load_instance(path: str | Path) -> Instance:
    """Load and validate an instance file; see the module docstring for the schema."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InstanceParseError(f"cannot read {p}: {exc}")
    return loads_instance(text, base_dir=p.parent)


# ---------------------------------------------------------------------------
# Canonical serialization

_BARE_KEY = re.compile(r"^[A-Za-z0-9_-]+$")


def _key(k: str) -> str:
    return k if _BARE_KEY.match(k) else '"' + k.replace('"', '\\"') + '"'


def _num(x) -> str:
    if isinstance(x, bool):
        raise AssertionError("booleans are not part of the schema")
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def _str(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def dumps_instance(inst: Instance) -> str:
    """Serialize to the canonical TOML form (stable byte-for-byte)."""
    out: list[str] = []
    w = out.append
    w("[instance]\n")
    w(f"horizon = {inst.horizon}\n")
    w(f"branch_probs = [{', '.join(_num(p) for p in inst.branch_probs)}]\n")
    w(f"branch_quantiles = [{', '.join(_num(q) for q in inst.branch_quantiles)}]\n")
    w("\n[costs]\n")
    w(f"treatment_cost_per_person = {_num(inst.costs.treatment_cost_per_person)}\n")
    w(f"burial_cost_per_body = {_num(inst.costs.burial_cost_per_body)}\n")
    w(f"budget = {_num(inst.costs.budget)}\n")
    for e in inst.etc_types:
        w("\n[[etc_types]]\n")
        w(f"id = {e.id}\n")
        w(f"capacity_beds = {e.capacity_beds}\n")
        w(f"fixed_cost = {_num(e.fixed_cost)}\n")
    for r in inst.regions:
        w("\n[[regions]]\n")
        w(f"id = {_str(r.id)}\n")
        w(f"name = {_str(r.name)}\n")
        w(f"country = {_str(r.country)}\n")
        w(f"population = {_num(r.population)}\n")
        for k in ("lambda1", "lambda2", "lambda3", "lambda4", "lambda5",
                  "chi2", "chi1_low", "chi1_high", "chi1_mean", "chi1_sigma"):
            w(f"{k} = {_num(getattr(r, k))}\n")
    for i, rid in enumerate(inst.region_ids):
        w(f"\n[initial.{_key(rid)}]\n")
        for k in ("S0", "I0", "T0", "R0", "F0", "B0", "C0"):
            w(f"{k} = {_num(getattr(inst.initial, k)[i])}\n")
    w("\n[migration]\n")
    w("rates = [\n")
    for i, frm in enumerate(inst.region_ids):
        for j, to in enumerate(inst.region_ids):
            rate = inst.migration.rates[i][j]
            if rate != 0.0:
                w(f'    {{ from = {_str(frm)}, to = {_str(to)}, rate = {_num(rate)} }},\n')
    w("]\n")
    return "".join(out)


def save_instance(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps_instance(inst))


# ---------------------------------------------------------------------------
# Built-in West Africa case study

def builtin_west_africa() -> Instance:
    """Six-region West Africa instance (three Guinea regions, Sierra Leone,
    two Liberia regions) with per-period rates, migration, costs, and initial
    conditions from the 2014 outbreak literature.

    Initial country-level infection counts are split across each country's
    regions proportionally to regional population share; initial susceptibles
    are the regional population minus the initial infected.
    """
    # (id, name, country, population, share of country's initial infections)
    geography = [
        ("UG", "Upper Guinea", "Guinea", 4_300_000.0, 0.41),
        ("MG", "Middle Guinea", "Guinea", 2_700_000.0, 0.25),
        ("LG", "Lower Guinea", "Guinea", 3_700_000.0, 0.34),
        ("NL", "Northern Liberia", "Liberia", 2_200_000.0, 0.64),
        ("SL", "Southern Liberia", "Liberia", 1_200_000.0, 0.36),
        ("S", "Sierra Leone", "Sierra Leone", 4_900_000.0, 1.00),
    ]
    initial_infected_by_country = {
        "Guinea": 218.0,
        "Sierra Leone": 604.0,
        "Liberia": 685.0,
    }
    # lambda1..lambda5, chi2, chi1 low/high, chi1 mean/sigma per country
    epi = {
        "Guinea": (0.428, 0.350, 0.240, 0.416, 0.730, 1.460, 0.660, 0.990, 0.54, 0.10),
        "Sierra Leone": (0.124, 0.096, 0.242, 0.327, 0.710, 1.420, 0.632, 0.940, 0.66, 0.07),
        "Liberia": (0.176, 0.128, 0.232, 0.312, 0.740, 1.480, 0.560, 0.840, 0.44, 0.07),
    }

    regions = []
    I0 = []
    for rid, name, country, pop, share in geography:
        l1, l2, l3, l4, l5, chi2, lo, hi, mu, sig = epi[country]
        regions.append(RegionParams(
            id=rid, name=name, country=country, population=pop,
            lambda1=l1, lambda2=l2, lambda3=l3, lambda4=l4, lambda5=l5,
            chi2=chi2, chi1_low=lo, chi1_high=hi, chi1_mean=mu, chi1_sigma=sig,
        ))
        I0.append(initial_infected_by_country[country] * share)

    ids = tuple(r.id for r in regions)
    # bi-weekly migration fractions, within-country only
    flows = [
        ("UG", "MG", 0.0032), ("UG", "LG", 0.0010),
        ("MG", "UG", 0.0052), ("MG", "LG", 0.0025),
        ("LG", "UG", 0.0012), ("LG", "MG", 0.0018),
        ("NL", "SL", 0.0007),
        ("SL", "NL", 0.0011),
    ]
    n = len(ids)
    mat = [[0.0] * n for _ in range(n)]
    for frm, to, rate in flows:
        mat[ids.index(frm)][ids.index(to)] = rate

    inst = Instance(
        regions=tuple(regions),
        migration=MigrationMatrix(ids, tuple(tuple(row) for row in mat)),
        etc_types=(
            EtcType(id=0, capacity_beds=50, fixed_cost=598_500.0),
            EtcType(id=1, capacity_beds=100, fixed_cost=1_077_300.0),
        ),
        costs=CostTable(
            treatment_cost_per_person=13_860.0,
            burial_cost_per_body=1_127.0,
            budget=24_000_000.0,
        ),
        initial=InitialState(
            S0=tuple(r.population - i0 for r, i0 in zip(regions, I0)),
            I0=tuple(I0),
            T0=tuple(0.0 for _ in regions),
            R0=tuple(0.0 for _ in regions),
            F0=tuple(0.0 for _ in regions),
            B0=tuple(0.0 for _ in regions),
            C0=tuple(0.0 for _ in regions),
        ),
        horizon=8,
        branch_probs=(0.3, 0.4, 0.3),
        branch_quantiles=(0.15, 0.50, 0.85),
    )
    return ensure_valid(inst)
