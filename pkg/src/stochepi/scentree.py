"""Scenario trees of uncertain community transmission rates.

The uncertain per-period community transmission rate of each region follows a
normal distribution.  Each tree node branches into one child per configured
quantile (default 0.15 / 0.50 / 0.85 with probabilities 0.3 / 0.4 / 0.3); a
child's realized rate is the parent distribution evaluated at the child's
quantile, and that realization becomes the mean of the child's own
distribution.  A scenario is one root-to-leaf path; its probability is the
product of branch probabilities along the path.

Timing convention: the rate realized at a stage-(j+1) node governs the
disease dynamics of period j -> j+1.  Decisions taken at a stage-j node may
therefore depend on realizations up to stage j but not later, which is what
the non-anticipativity constraints downstream enforce.  The root carries the
initial mean as its "rate" for reference; it drives no period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .epidata import Instance

# Acklam's rational approximation of the standard normal quantile.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def inverse_normal_cdf(p: float) -> float:
    """Standard normal quantile, accurate to well below 1e-9.

    Rational approximation (absolute error < 1.2e-9) followed by one Newton
    step against the exact CDF computed from erfc.
    """
    if not (0.0 < p < 1.0) or math.isnan(p):
        raise ValueError(f"p must lie strictly inside (0, 1), got {p!r}")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
              / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    # Newton refinement: Phi(x) via erfc is exact to machine precision.
    err = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    x -= err * _SQRT_2PI * math.exp(0.5 * x * x)
    return x


def node_realizations(
    mean: float,
    sigma: float,
    quantiles: Sequence[float],
    floor: float = 1e-6,
) -> list[float]:
    """Realized rates mean + sigma * Phi^-1(q) for each quantile, clamped
    below at ``floor`` so downstream dynamics stay well-posed."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if floor <= 0:
        raise ValueError(f"floor must be > 0, got {floor}")
    return [max(floor, mean + sigma * inverse_normal_cdf(q)) for q in quantiles]


@dataclass(frozen=True)
class ScenarioNode:
    id: int
    stage: int
    parent: int | None
    branch_label: str
    branch_prob: float
    mean: tuple[float, ...]
    sigma: tuple[float, ...]
    rate: tuple[float, ...]


@dataclass(frozen=True)
class ScenarioPath:
    """One scenario: the node sequence from root to a leaf.

    ``rates[t][r]`` is the realized rate at the stage-t node of the path;
    the rate governing period j -> j+1 is ``rates[j+1]``.
    """

    leaf: int
    nodes: tuple[int, ...]
    probability: float
    rates: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class ScenarioTree:
    nodes: tuple[ScenarioNode, ...]
    stages: int
    quantiles: tuple[float, ...]
    probs: tuple[float, ...]
    region_ids: tuple[str, ...]

    @property
    def branching(self) -> int:
        return len(self.probs)

    def node(self, node_id: int) -> ScenarioNode:
        return self.nodes[node_id]

    def children(self, node_id: int) -> list[ScenarioNode]:
        b = self.branching
        first = node_id * b + 1
        return [n for n in self.nodes[first:first + b] if n.parent == node_id]

    def stage_nodes(self, stage: int) -> list[ScenarioNode]:
        return [n for n in self.nodes if n.stage == stage]

    def leaves(self) -> list[ScenarioNode]:
        return self.stage_nodes(self.stages)

    def nonleaf_nodes(self) -> list[ScenarioNode]:
        return [n for n in self.nodes if n.stage < self.stages]

    def path_prob(self, node_id: int) -> float:
        """Probability of reaching a node (product of branch probabilities)."""
        p = 1.0
        nid: int | None = node_id
        while nid is not None:
            node = self.nodes[nid]
            p *= node.branch_prob
            nid = node.parent
        return p

    def path_to(self, node_id: int) -> list[int]:
        out: list[int] = []
        nid: int | None = node_id
        while nid is not None:
            out.append(nid)
            nid = self.nodes[nid].parent
        out.reverse()
        return out


def _branch_labels(k: int) -> list[str]:
    if k == 3:
        return ["low", "medium", "high"]
    return [f"b{i}" for i in range(k)]


def _resolve_sigmas(
    base: Sequence[float],
    stage: int,
    sigma_rule,
) -> tuple[float, ...]:
    if sigma_rule == "constant":
        return tuple(base)
    # sequence of per-stage scale factors applied to each region's base sigma;
    # stages beyond the sequence reuse the last factor
    factors = list(sigma_rule)
    f = factors[min(stage - 1, len(factors) - 1)] if stage >= 1 else 1.0
    if f <= 0:
        raise ValueError("sigma scale factors must be > 0")
    return tuple(s * f for s in base)


def build_tree(
    inst: Instance,
    stages: int,
    quantiles: Sequence[float] | None = None,
    probs: Sequence[float] | None = None,
    sigma_rule="constant",
    rate_floor: float = 1e-6,
) -> ScenarioTree:
    """Build the complete branching tree of transmission-rate realizations.

    ``sigma_rule`` is either "constant" (every node keeps its region's base
    standard deviation) or a sequence of per-stage multipliers on the base
    standard deviation.
    """
    if stages < 1:
        raise ValueError(f"stages must be >= 1, got {stages}")
    qs = tuple(quantiles if quantiles is not None else inst.branch_quantiles)
    ps = tuple(probs if probs is not None else inst.branch_probs)
    if len(qs) != len(ps):
        raise ValueError("quantiles and probs must have the same length")
    if abs(sum(ps) - 1.0) > 1e-9:
        raise ValueError(f"branch probabilities must sum to 1, got {sum(ps)}")
    labels = _branch_labels(len(qs))

    base_sigma = tuple(r.chi1_sigma for r in inst.regions)
    root_mean = tuple(r.chi1_mean for r in inst.regions)
    nodes: list[ScenarioNode] = [ScenarioNode(
        id=0, stage=0, parent=None, branch_label="root", branch_prob=1.0,
        mean=root_mean, sigma=base_sigma,
        rate=tuple(max(rate_floor, m) for m in root_mean),
    )]
    frontier = [nodes[0]]
    next_id = 1
    for stage in range(1, stages + 1):
        sigmas = _resolve_sigmas(base_sigma, stage, sigma_rule)
        new_frontier: list[ScenarioNode] = []
        for parent in frontier:
            per_region = [
                node_realizations(parent.mean[r], parent.sigma[r], qs, rate_floor)
                for r in range(len(root_mean))
            ]
            for b, (q, p) in enumerate(zip(qs, ps)):
                mean = tuple(per_region[r][b] for r in range(len(root_mean)))
                child = ScenarioNode(
                    id=next_id, stage=stage, parent=parent.id,
                    branch_label=labels[b], branch_prob=p,
                    mean=mean, sigma=sigmas, rate=mean,
                )
                nodes.append(child)
                new_frontier.append(child)
                next_id += 1
        frontier = new_frontier
    return ScenarioTree(
        nodes=tuple(nodes), stages=stages, quantiles=qs, probs=ps,
        region_ids=inst.region_ids,
    )


def chain_tree(
    region_ids: Iterable[str],
    rates: Sequence[Sequence[float]],
    sigma: float = 1.0,
) -> ScenarioTree:
    """Degenerate single-scenario tree from an explicit per-stage rate table.

    ``rates[t][r]`` plays the stage-t node's realization, t = 0..stages.
    Used to pose clairvoyant (single-scenario) and expected-value problems
    with the same model-building machinery as the full tree.
    """
    rids = tuple(region_ids)
    if not rates:
        raise ValueError("rates must cover at least the root stage")
    nodes = []
    for t, row in enumerate(rates):
        if len(row) != len(rids):
            raise ValueError("each rate row must cover every region")
        nodes.append(ScenarioNode(
            id=t, stage=t, parent=None if t == 0 else t - 1,
            branch_label="root" if t == 0 else "only",
            branch_prob=1.0,
            mean=tuple(row), sigma=tuple(sigma for _ in rids), rate=tuple(row),
        ))
    return ScenarioTree(
        nodes=tuple(nodes), stages=len(rates) - 1, quantiles=(0.5,), probs=(1.0,),
        region_ids=rids,
    )


def scenario_paths(tree: ScenarioTree) -> list[ScenarioPath]:
    """One path per leaf, ordered by leaf id; probabilities multiply along
    the path and sum to one across scenarios."""
    paths = []
    for leaf in tree.leaves():
        node_ids = tree.path_to(leaf.id)
        prob = 1.0
        for nid in node_ids:
            prob *= tree.nodes[nid].branch_prob
        paths.append(ScenarioPath(
            leaf=leaf.id,
            nodes=tuple(node_ids),
            probability=prob,
            rates=tuple(tree.nodes[nid].rate for nid in node_ids),
        ))
    return paths


def path_for_labels(tree: ScenarioTree, labels: Sequence[str]) -> ScenarioPath:
    """The scenario following the given branch labels from the root, e.g.
    ("low", "high"). Fewer labels than stages repeats the last label."""
    if tree.stages >= 1 and not labels:
        raise ValueError("at least one branch label is required")
    node = tree.nodes[0]
    node_ids = [0]
    for stage in range(1, tree.stages + 1):
        want = labels[min(stage - 1, len(labels) - 1)]
        nxt = [c for c in tree.children(node.id) if c.branch_label == want]
        if not nxt:
            raise ValueError(f"no branch labelled {want!r} at stage {stage}")
        node = nxt[0]
        node_ids.append(node.id)
    prob = 1.0
    for nid in node_ids:
        prob *= tree.nodes[nid].branch_prob
    return ScenarioPath(
        leaf=node_ids[-1], nodes=tuple(node_ids), probability=prob,
        rates=tuple(tree.nodes[nid].rate for nid in node_ids),
    )


def expected_value_path(tree: ScenarioTree) -> list[tuple[float, ...]]:
    """Per-stage expected realization: at stage t, the probability-weighted
    average rate over all stage-t nodes, per region."""
    n_regions = len(tree.region_ids)
    out = []
    for t in range(tree.stages + 1):
        acc = [0.0] * n_regions
        for node in tree.stage_nodes(t):
            p = tree.path_prob(node.id)
            for r in range(n_regions):
                acc[r] += p * node.rate[r]
        out.append(tuple(acc))
    return out
