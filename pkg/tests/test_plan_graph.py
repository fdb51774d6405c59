from __future__ import annotations

from kgplan.partitioner import AssertionGroup, GroupKind, PartitionSet, build_partitions
from kgplan.plan_graph import build_plan_graph, to_dot


def group(gid: str, units: set[tuple[str, str]], copies: set[tuple[str, str]] = frozenset()):
    return AssertionGroup(
        id=gid,
        kind=GroupKind.INTRA,
        members=frozenset({f"{gid}/a"}),
        source_footprint=frozenset({gid}),
        defined_predicates=frozenset(units),
        copied_units=frozenset(copies),
    )


def partition(*groups: AssertionGroup) -> PartitionSet:
    return PartitionSet(groups={g.id: g for g in groups})


def test_four_group_example_graph(four_group_example):
    p = build_partitions(four_group_example)
    g = build_plan_graph(p)
    assert len(g.nodes) == 4
    assert len(g.labels) == 1
    ((pair, label),) = g.labels.items()
    assert label == {("property", "http://example.org/ns#p3")}
    assert set(pair) == {"J:S1.csv->S4.csv+S:S4.csv", "S:S1.csv"}


def test_disjoint_groups_edgeless():
    g = build_plan_graph(partition(
        group("a", {("property", "p")}),
        group("b", {("property", "q")}),
        group("c", {("class", "C")}),
    ))
    assert g.labels == {}


def test_three_groups_sharing_triangle():
    shared = ("property", "q")
    g = build_plan_graph(partition(
        group("a", {shared, ("property", "pa")}),
        group("b", {shared}),
        group("c", {shared, ("class", "C")}),
    ))
    assert set(g.labels) == {("a", "b"), ("a", "c"), ("b", "c")}
    assert all(label == {shared} for label in g.labels.values())


def test_class_pair_creates_edge():
    g = build_plan_graph(partition(
        group("owner", {("class", "C1")}),
        group("holder", {("property", "p")}, copies={("class", "C1")}),
    ))
    assert g.label("owner", "holder") == {("class", "C1")}


def test_symmetry_and_no_self_loops():
    g = build_plan_graph(partition(
        group("a", {("property", "q")}),
        group("b", {("property", "q")}),
    ))
    assert g.label("a", "b") == g.label("b", "a")
    assert all(x != y for x, y in g.labels)
    n = len(g.nodes)
    assert len(g.labels) <= n * (n - 1) // 2


def test_dot_output_contains_local_names(four_group_example):
    p = build_partitions(four_group_example)
    dot = to_dot(build_plan_graph(p))
    assert dot.startswith("graph plan {")
    assert 'label="p3"' in dot
