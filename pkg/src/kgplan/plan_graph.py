"""Undirected labeled graph over partition groups.

Two groups are connected exactly when executing both can produce instances
of a common ontology unit; the edge label is that shared unit set.  Class
instantiations count as (rdf:type, class) pairs so that concept overlap,
including overlap caused by copied parent concepts, forces a
duplicate-removing union above the pair.

Edges are found through an inverted unit index rather than pairwise
intersection, which keeps construction near-linear on sparse inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ntriples import local_name
from .partitioner import AssertionGroup, PartitionSet, Unit

Edge = tuple[str, str]


@dataclass
class PlanGraph:
    nodes: list[str]
    labels: dict[Edge, frozenset[Unit]]
    units_of: dict[str, frozenset[Unit]]

    def edge_key(self, a: str, b: str) -> Edge:
        return (a, b) if a <= b else (b, a)

    def label(self, a: str, b: str) -> frozenset[Unit]:
        return self.labels.get(self.edge_key(a, b), frozenset())

    def neighbors(self, node: str) -> list[str]:
        out = []
        for a, b in self.labels:
            if a == node:
                out.append(b)
            elif b == node:
                out.append(a)
        return sorted(out)

    def degree(self, node: str) -> int:
        return len(self.neighbors(node))

    def shared_count(self, node: str) -> int:
        return sum(len(lbl) for e, lbl in self.labels.items() if node in e)


def build_plan_graph(p: PartitionSet) -> PlanGraph:
    """Graph over ``p``'s groups, one edge per unit-sharing pair."""
    groups: list[AssertionGroup] = p.sorted_groups()
    units_of = {g.id: g.effective_units for g in groups}

    by_unit: dict[Unit, list[str]] = {}
    for g in groups:
        for unit in g.effective_units:
            by_unit.setdefault(unit, []).append(g.id)

    labels: dict[Edge, set[Unit]] = {}
    for unit, holders in by_unit.items():
        if len(holders) < 2:
            continue
        for i, a in enumerate(holders):
            for b in holders[i + 1:]:
                key = (a, b) if a <= b else (b, a)
                labels.setdefault(key, set()).add(unit)

    return PlanGraph(
        nodes=[g.id for g in groups],
        labels={e: frozenset(u) for e, u in sorted(labels.items())},
        units_of=units_of,
    )


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def to_dot(graph: PlanGraph) -> str:
    """Render for ``explain --graph``; edge labels use predicate local names."""
    lines = ["graph plan {"]
    for node in graph.nodes:
        lines.append(f'  "{_dot_escape(node)}";')
    for (a, b), label in sorted(graph.labels.items()):
        names = sorted(
            f"a {local_name(u[1])}" if u[0] == "class" else local_name(u[1])
            for u in label
        )
        lines.append(
            f'  "{_dot_escape(a)}" -- "{_dot_escape(b)}" [label="{_dot_escape(", ".join(names))}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


__all__ = ["Edge", "PlanGraph", "build_plan_graph", "to_dot"]
