"""Brute-force verification of the planner.

Everything here is deliberately exhaustive: enumerate the whole ordered
tree space over the groups, execute every plan, compare costs against the
true minimum.  The enumeration size is (2n-2)!/(n-1)!, so a guard refuses
group counts past a configurable limit.

A seeded generator produces small synthetic integration systems, with an
optional restricted mode that satisfies the greedy planner's optimality
preconditions (single-child-source parent references, no unit defined
twice, uniform group weights).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .bushy_planner import BushyTree, Leaf, Node, UnionOp, generate_bushy_tree
from .cost_model import LeafCostModel, SourceStats, fu
from .materializer import (
    ExecutionOptions,
    TripleSet,
    execute_tree,
    materialize_group,
    unpartitioned_group,
)
from .partitioner import (
    PartitionSet,
    Unit,
    build_partitions,
    theorem1_conditions,
)
from .plan_graph import build_plan_graph
from .rml_model import (
    AssertionKind,
    DataIntegrationSystem,
    JoinCondition,
    LogicalSource,
    MappingAssertion,
    TemplateFunction,
)

DEFAULT_ENUMERATION_LIMIT = 7


class PlanSpaceTooLarge(Exception):
    pass


def tree_count(n: int) -> int:
    """Closed form for the number of ordered bushy trees over n leaves."""
    if n < 1:
        raise ValueError("need at least one group")
    return math.factorial(2 * n - 2) // math.factorial(n - 1)


@dataclass
class PlanSpace:
    groups: list[str]
    units_of: dict[str, frozenset[Unit]]
    count: int

    def __iter__(self):
        yield from _ordered_trees(tuple(sorted(self.groups)), self.units_of)


def enumerate_trees(
    groups: list[str],
    units_of: dict[str, frozenset[Unit]],
    max_n: int = DEFAULT_ENUMERATION_LIMIT,
) -> PlanSpace:
    """Lazy space of every ordered full binary tree over the group set."""
    n = len(groups)
    if n < 1:
        raise ValueError("need at least one group")
    if n > max_n:
        raise PlanSpaceTooLarge(
            f"{n} groups would enumerate {tree_count(n)} trees; limit is {max_n}"
        )
    return PlanSpace(groups=list(groups), units_of=dict(units_of), count=tree_count(n))


def _ordered_trees(leaf_ids: tuple[str, ...], units_of: dict[str, frozenset[Unit]]):
    """Yield (tree, producible units) for every ordered shape."""
    if len(leaf_ids) == 1:
        gid = leaf_ids[0]
        yield Leaf(gid), units_of[gid]
        return
    n = len(leaf_ids)
    for mask in range(1, (1 << n) - 1):
        left_ids = tuple(leaf_ids[i] for i in range(n) if mask >> i & 1)
        right_ids = tuple(leaf_ids[i] for i in range(n) if not (mask >> i & 1))
        for left_tree, left_units in _ordered_trees(left_ids, units_of):
            for right_tree, right_units in _ordered_trees(right_ids, units_of):
                op = UnionOp.DR if left_units & right_units else UnionOp.NDR
                yield Node(op, left_tree, right_tree), left_units | right_units


def annotate_shape(shape: BushyTree, units_of: dict[str, frozenset[Unit]]) -> BushyTree:
    """Re-annotate an arbitrary tree shape with the DR/NDR overlap rule."""
    if isinstance(shape, Leaf):
        return shape

    def walk(node: BushyTree) -> tuple[BushyTree, frozenset[Unit]]:
        if isinstance(node, Leaf):
            return node, units_of[node.group]
        left, lu = walk(node.left)
        right, ru = walk(node.right)
        op = UnionOp.DR if lu & ru else UnionOp.NDR
        return Node(op, left, right), lu | ru

    tree, _ = walk(shape)
    return tree


def optimal_plan(
    space: PlanSpace,
    partition: PartitionSet,
    dis: DataIntegrationSystem,
    stats: dict[str, SourceStats],
    model: LeafCostModel = LeafCostModel(),
) -> tuple[BushyTree, float]:
    """Exhaustive minimum of the cost function; first minimizer wins ties."""
    best_tree: BushyTree | None = None
    best_cost = math.inf
    for tree, _ in space:
        cost = fu(tree, partition, dis, stats, model).value
        if cost < best_cost:
            best_cost = cost
            best_tree = tree
    assert best_tree is not None
    return best_tree, best_cost


def canonical_lines(ts: TripleSet) -> tuple[str, ...]:
    return tuple(ts.iter_lines())


@dataclass
class EquivalenceReport:
    n: int
    tree_count: int
    equivalent: bool
    baseline_cardinality: int
    failures: list[str] = field(default_factory=list)


def check_equivalence(
    space: PlanSpace,
    dis: DataIntegrationSystem,
    partition: PartitionSet,
    run_dir: Path,
) -> EquivalenceReport:
    """Execute every tree in the space; all canonical outputs must agree
    with the single-group whole-mapping execution."""
    baseline_set = materialize_group(unpartitioned_group(dis), dis, run_dir=run_dir)
    baseline = canonical_lines(baseline_set)

    failures: list[str] = []
    checked = 0
    for i, (tree, _) in enumerate(space):
        options = ExecutionOptions(run_dir=run_dir, parallelism=1)
        try:
            result = execute_tree(tree, dis, partition, options)
        except Exception as exc:  # noqa: BLE001 - attributed to the plan in the report
            failures.append(f"tree {i}: execution error: {exc}")
            break
        got = canonical_lines(result.triples)
        if got != baseline:
            diff = _first_difference(baseline, got)
            failures.append(f"tree {i}: output diverges from baseline at {diff}")
            break
        checked += 1

    return EquivalenceReport(
        n=len(space.groups),
        tree_count=space.count,
        equivalent=checked == space.count and not failures,
        baseline_cardinality=len(baseline),
        failures=failures,
    )


def _first_difference(a: tuple[str, ...], b: tuple[str, ...]) -> str:
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return f"line {i}: {x!r} != {y!r}"
    return f"cardinality {len(a)} != {len(b)}"


@dataclass
class VerificationReport:
    n: int
    tree_count: int
    equivalent: bool
    greedy_cost: float
    optimal_cost: float
    gap: float
    theorem1_conditions_met: bool
    failures: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "tree_count": self.tree_count,
            "equivalent": self.equivalent,
            "greedy_cost": self.greedy_cost,
            "optimal_cost": self.optimal_cost,
            "gap": self.gap,
            "theorem1_conditions_met": self.theorem1_conditions_met,
            "failures": self.failures,
        }


def verify_system(
    dis: DataIntegrationSystem,
    run_dir: Path,
    stats: dict[str, SourceStats],
    max_n: int = DEFAULT_ENUMERATION_LIMIT,
    execute: bool = True,
) -> VerificationReport:
    """Full verification bundle used by the command line ``verify``."""
    partition = build_partitions(dis)
    graph = build_plan_graph(partition)
    greedy = generate_bushy_tree(graph)
    space = enumerate_trees(graph.nodes, graph.units_of, max_n=max_n)

    model = LeafCostModel()
    greedy_cost = fu(greedy, partition, dis, stats, model).value
    _, optimal_cost = optimal_plan(space, partition, dis, stats, model)

    if execute:
        equiv = check_equivalence(space, dis, partition, run_dir)
        equivalent, failures = equiv.equivalent, equiv.failures
    else:
        equivalent, failures = True, []

    cond1, cond2 = theorem1_conditions(dis)
    return VerificationReport(
        n=len(graph.nodes),
        tree_count=space.count,
        equivalent=equivalent,
        greedy_cost=greedy_cost,
        optimal_cost=optimal_cost,
        gap=greedy_cost - optimal_cost,
        theorem1_conditions_met=cond1 and cond2,
        failures=failures,
    )


# --------------------------------------------------------------------------
# seeded synthetic data integration systems


_EX = "http://example.org/"


def _template(src_tag: str, column: str = "id") -> TemplateFunction:
    return TemplateFunction.from_template(f"{_EX}{src_tag}/{{{column}}}")


def _write_csv(path: Path, header: list[str], rows: list[tuple[str, ...]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


@dataclass
class SyntheticSystem:
    dis: DataIntegrationSystem
    stats: dict[str, SourceStats]


def random_dis(seed: int, out_dir: Path, *, max_rows: int = 100,
               theorem1: bool = False) -> SyntheticSystem:
    """Seeded random system with CSV data written under ``out_dir``.

    The unrestricted mode draws 2..6 sources, 1..5 assertions each, adds a
    cross-source role with probability 0.3 per source and reuses a shared
    predicate with probability 0.2 per extra assertion.  The restricted
    mode keeps every optimality precondition satisfied and every group at
    the same weight, alternating between a no-join form and a two-source
    join form.
    """
    rng = random.Random(seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    if theorem1:
        return _theorem1_system(rng, out_dir)
    return _general_system(rng, out_dir, max_rows)


def _source_rows(rng: random.Random, n_rows: int, extra_cols: int,
                 key_pool: list[str], exact: bool = False) -> tuple[list[str], list[tuple[str, ...]]]:
    header = ["id", "k"] + [f"v{i}" for i in range(extra_cols)]
    rows = []
    for i in range(n_rows):
        values = [f"r{i}", rng.choice(key_pool)]
        for _ in range(extra_cols):
            cell = rng.choice(["alpha", "beta", "gamma", "delta", ""])
            values.append(cell)
        rows.append(tuple(values))
    if not exact:
        # occasional exact duplicate rows exercise the per-leaf dedup
        for _ in range(rng.randint(0, max(1, n_rows // 10))):
            rows.append(rng.choice(rows))
    return header, rows


def _general_system(rng: random.Random, out_dir: Path, max_rows: int) -> SyntheticSystem:
    n_sources = rng.randint(2, 6)
    shared_pool = [f"{_EX}shared{i}" for i in range(3)]
    sources: dict[str, LogicalSource] = {}
    assertions: dict[str, MappingAssertion] = {}
    stats: dict[str, SourceStats] = {}
    predicates: set[str] = set()

    names = [f"src{i}" for i in range(n_sources)]
    for name in names:
        rows = rng.randint(2, max_rows)
        header, data = _source_rows(rng, rows, extra_cols=2, key_pool=[str(k) for k in range(5)])
        path = out_dir / f"{name}.csv"
        _write_csv(path, header, data)
        sid = f"{name}.csv"
        sources[sid] = LogicalSource(id=sid, path=str(path))
        stats[sid] = SourceStats(rows=len(data))

        map_id = f"Map_{name}"
        subject = _template(name)
        cls = f"{_EX}Class_{name}"
        assertions[f"{map_id}/c0"] = MappingAssertion(
            id=f"{map_id}/c0", kind=AssertionKind.CONCEPT, subject=subject,
            predicate="http://www.w3.org/1999/02/22-rdf-syntax-ns#type",
            object=cls, sources=(sid,), triples_map=map_id,
        )
        predicates.add(cls)

        extra = rng.randint(1, 4)
        for j in range(extra):
            if rng.random() < 0.2:
                pred = rng.choice(shared_pool)
            else:
                pred = f"{_EX}{name}_p{j}"
            predicates.add(pred)
            aid = f"{map_id}/p{j}"
            if rng.random() < 0.5:
                obj = TemplateFunction.from_reference(rng.choice(["v0", "v1"]))
                kind = AssertionKind.ATTRIBUTE
            else:
                obj = _template(f"{name}_obj", column=rng.choice(["id", "v0"]))
                kind = AssertionKind.SINGLE_SOURCE_ROLE
            assertions[aid] = MappingAssertion(
                id=aid, kind=kind, subject=subject, predicate=pred,
                object=obj, sources=(sid,), triples_map=map_id,
            )

    # cross-source roles
    pom_counter = 100
    for name in names:
        if rng.random() >= 0.3:
            continue
        parent_name = rng.choice([n for n in names if n != name])
        child_sid, parent_sid = f"{name}.csv", f"{parent_name}.csv"
        pred = f"{_EX}{name}_to_{parent_name}"
        predicates.add(pred)
        aid = f"Map_{name}/p{pom_counter}"
        pom_counter += 1
        assertions[aid] = MappingAssertion(
            id=aid, kind=AssertionKind.MULTI_SOURCE_ROLE,
            subject=_template(name), predicate=pred,
            object=f"Map_{parent_name}/c0", sources=(child_sid, parent_sid),
            join=JoinCondition("k", "k"),
            referenced_assertion=f"Map_{parent_name}/c0",
            triples_map=f"Map_{name}", referenced_map=f"Map_{parent_name}",
        )

    dis = DataIntegrationSystem(
        ontology_predicates=frozenset(predicates),
        sources=sources,
        assertions=assertions,
    )
    return SyntheticSystem(dis=dis, stats=stats)


def _theorem1_system(rng: random.Random, out_dir: Path) -> SyntheticSystem:
    sources: dict[str, LogicalSource] = {}
    assertions: dict[str, MappingAssertion] = {}
    stats: dict[str, SourceStats] = {}
    predicates: set[str] = set()
    rows = rng.randint(5, 60)

    def add_source(name: str) -> str:
        # uniform row counts keep all group weights equal, the regime in
        # which the weight-blind greedy tie-breaks are provably harmless
        header, data = _source_rows(rng, rows, extra_cols=2,
                                    key_pool=[str(k) for k in range(3)], exact=True)
        path = out_dir / f"{name}.csv"
        _write_csv(path, header, data)
        sid = f"{name}.csv"
        sources[sid] = LogicalSource(id=sid, path=str(path))
        stats[sid] = SourceStats(rows=len(data))
        return sid

    def add_intra(name: str, sid: str, weight: int) -> None:
        map_id = f"Map_{name}"
        subject = _template(name)
        cls = f"{_EX}Class_{name}"
        predicates.add(cls)
        assertions[f"{map_id}/c0"] = MappingAssertion(
            id=f"{map_id}/c0", kind=AssertionKind.CONCEPT, subject=subject,
            predicate="http://www.w3.org/1999/02/22-rdf-syntax-ns#type",
            object=cls, sources=(sid,), triples_map=map_id,
        )
        for j in range(weight - 1):
            pred = f"{_EX}{name}_p{j}"
            predicates.add(pred)
            assertions[f"{map_id}/p{j}"] = MappingAssertion(
                id=f"{map_id}/p{j}", kind=AssertionKind.ATTRIBUTE, subject=subject,
                predicate=pred, object=TemplateFunction.from_reference("v0"),
                sources=(sid,), triples_map=map_id,
            )

    if rng.random() < 0.5:
        # several unconnected sources, one uniform assertion weight
        n_sources = rng.choice([2, 4, 6])
        weight = rng.randint(2, 4)
        for i in range(n_sources):
            sid = add_source(f"t{i}")
            add_intra(f"t{i}", sid, weight)
    else:
        # one cross-source role bundle: every reference from a single child
        child_sid = add_source("child")
        parent_sid = add_source("parent")
        add_intra("child", child_sid, rng.randint(1, 3))
        add_intra("parent", parent_sid, rng.randint(1, 3))
        for j in range(rng.randint(1, 3)):
            pred = f"{_EX}join_p{j}"
            predicates.add(pred)
            aid = f"Map_child/j{j}"
            assertions[aid] = MappingAssertion(
                id=aid, kind=AssertionKind.MULTI_SOURCE_ROLE,
                subject=_template("child"), predicate=pred,
                object="Map_parent/c0", sources=(child_sid, parent_sid),
                join=JoinCondition("k", "k"),
                referenced_assertion="Map_parent/c0",
                triples_map="Map_child", referenced_map="Map_parent",
            )

    dis = DataIntegrationSystem(
        ontology_predicates=frozenset(predicates),
        sources=sources,
        assertions=assertions,
    )
    return SyntheticSystem(dis=dis, stats=stats)


def random_dis_with_group_limit(
    seed: int, out_dir: Path, limit: int = 4, max_rows: int = 100
) -> tuple[SyntheticSystem, PartitionSet]:
    """First seeded draw whose fixed-point partition has at most ``limit`` groups."""
    for attempt in range(64):
        sub_dir = out_dir / f"s{seed}_{attempt}"
        system = random_dis(seed * 1000 + attempt, sub_dir, max_rows=max_rows)
        partition = build_partitions(system.dis)
        if len(partition.groups) <= limit:
            return system, partition
    raise RuntimeError(f"no draw within {limit} groups for seed {seed}")


__all__ = [
    "DEFAULT_ENUMERATION_LIMIT",
    "EquivalenceReport",
    "PlanSpace",
    "PlanSpaceTooLarge",
    "SyntheticSystem",
    "VerificationReport",
    "annotate_shape",
    "canonical_lines",
    "check_equivalence",
    "enumerate_trees",
    "optimal_plan",
    "random_dis",
    "random_dis_with_group_limit",
    "tree_count",
    "verify_system",
]
