"""Abstract execution-cost estimation for union trees.

A leaf costs the work of running its assertions (one pass per row, build
plus probe for joins); an internal union costs linear time, or N log N
when it removes duplicates.  Costs can also come from recorded wall times
of a previous run, in which case missing measurements are an error rather
than a guess.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .bushy_planner import BushyTree, Leaf, Node, UnionOp, fold_tree
from .partitioner import AssertionGroup, PartitionSet
from .rml_model import AssertionKind, DataIntegrationSystem


class CostModelError(Exception):
    pass


class CostMode(enum.Enum):
    ABSTRACT_OPS = "AbstractOps"
    MEASURED_SECONDS = "MeasuredSeconds"


@dataclass(frozen=True)
class SourceStats:
    rows: int
    duplicate_rate: float | None = None


@dataclass(frozen=True)
class LeafCostModel:
    mode: CostMode = CostMode.ABSTRACT_OPS
    unit_row_cost: float = 1.0
    join_cost_factor: float = 1.0
    dedup_cost_factor: float = 1.0
    union_cost_factor: float = 1.0
    measured_seconds: dict[str, float] | None = None

    def __post_init__(self) -> None:
        for name in ("unit_row_cost", "join_cost_factor", "dedup_cost_factor", "union_cost_factor"):
            if getattr(self, name) < 0:
                raise CostModelError(f"{name} must be nonnegative")


@dataclass
class CostEstimate:
    value: float
    breakdown: dict[str, float] = field(default_factory=dict)


def delta(
    group: AssertionGroup,
    dis: DataIntegrationSystem,
    stats: dict[str, SourceStats],
    model: LeafCostModel = LeafCostModel(),
) -> float:
    """Execution cost of one group.

    Abstract mode sums per executed assertion: one row pass for concepts,
    attributes and single-source roles; an index lookup pass for
    referenced-source roles; build plus probe for joins.  Measured mode
    returns the recorded wall time.
    """
    if model.mode is CostMode.MEASURED_SECONDS:
        if model.measured_seconds is None or group.id not in model.measured_seconds:
            raise CostModelError(f"no recorded wall time for group {group.id}")
        return model.measured_seconds[group.id]

    for src in group.source_footprint:
        if src not in stats:
            raise CostModelError(f"missing stats for source {src}")

    total = 0.0
    for aid in sorted(group.executed_ids):
        a = dis.assertions[aid]
        if a.kind is AssertionKind.MULTI_SOURCE_ROLE:
            child, parent = a.sources
            if parent not in stats:
                raise CostModelError(f"missing stats for source {parent}")
            total += model.join_cost_factor * (stats[child].rows + stats[parent].rows)
        elif a.kind is AssertionKind.REFERENCED_SOURCE_ROLE:
            total += model.join_cost_factor * stats[a.sources[0]].rows
        else:
            total += model.unit_row_cost * stats[a.sources[0]].rows
    return total


def phi(op: UnionOp, left_cardinality: float, right_cardinality: float,
        model: LeafCostModel = LeafCostModel()) -> float:
    """Union cost over the two input sizes: N log N with dedup, N without."""
    n = left_cardinality + right_cardinality
    if n < 0:
        raise CostModelError("negative cardinality")
    if op is UnionOp.DR:
        if n == 0:
            return 0.0
        return model.dedup_cost_factor * n * math.log2(max(n, 2))
    return model.union_cost_factor * n


def estimated_leaf_cardinality(
    group: AssertionGroup, dis: DataIntegrationSystem, stats: dict[str, SourceStats]
) -> float:
    """Triples a leaf can produce: one per row per executed assertion."""
    total = 0.0
    for aid in group.executed_ids:
        a = dis.assertions[aid]
        src = a.sources[0]
        if src not in stats:
            raise CostModelError(f"missing stats for source {src}")
        total += stats[src].rows
    return total


def _mean_duplicate_rate(footprint: frozenset[str], stats: dict[str, SourceStats]) -> float:
    rates = [stats[s].duplicate_rate or 0.0 for s in sorted(footprint) if s in stats]
    if not rates:
        return 0.0
    return sum(rates) / len(rates)


def fu(
    tree: BushyTree,
    partition: PartitionSet,
    dis: DataIntegrationSystem,
    stats: dict[str, SourceStats],
    model: LeafCostModel = LeafCostModel(),
) -> CostEstimate:
    """Total plan cost: leaf costs plus one union cost per internal node.

    Cardinality flowing out of a DR node is discounted by the mean source
    duplicate rate of its subtree when the stats carry one.
    """
    breakdown: dict[str, float] = {}

    def leaf_value(node: Leaf) -> tuple[float, float, frozenset[str], frozenset[str]]:
        # (cost, estimated output cardinality, footprint, covered group ids)
        group = partition.by_id(node.group)
        cost = delta(group, dis, stats, model)
        breakdown[node.group] = cost
        card = (
            estimated_leaf_cardinality(group, dis, stats)
            if model.mode is CostMode.ABSTRACT_OPS
            else 0.0
        )
        return cost, card, group.source_footprint, frozenset({node.group})

    def node_value(node: Node, left, right):
        lc, lcard, lfoot, lgroups = left
        rc, rcard, rfoot, rgroups = right
        op_cost = phi(node.op, lcard, rcard, model)
        footprint = lfoot | rfoot
        covered = lgroups | rgroups
        breakdown[f"{node.op.value}[{'+'.join(sorted(covered))}]"] = op_cost
        card = lcard + rcard
        if node.op is UnionOp.DR:
            card *= 1.0 - _mean_duplicate_rate(footprint, stats)
        return lc + rc + op_cost, card, footprint, covered

    total, _, _, _ = fold_tree(tree, leaf_value, node_value)
    return CostEstimate(value=total, breakdown=breakdown)


def stats_from_counts(rows: dict[str, int],
                      duplicate_rates: dict[str, float] | None = None) -> dict[str, SourceStats]:
    dup = duplicate_rates or {}
    return {src: SourceStats(rows=n, duplicate_rate=dup.get(src)) for src, n in rows.items()}


__all__ = [
    "CostEstimate",
    "CostMode",
    "CostModelError",
    "LeafCostModel",
    "SourceStats",
    "delta",
    "estimated_leaf_cardinality",
    "fu",
    "phi",
    "stats_from_counts",
]
