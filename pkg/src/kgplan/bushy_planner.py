"""Greedy construction of a union tree over partition groups.

One hyper-node starts per group, ordered by how entangled the group is
with the rest of the graph (connection degree, then total shared-unit
count).  The head of the list repeatedly merges with the neighbor it
shares the most units with; the merged node is annotated DR when the two
sides overlap and NDR otherwise, and is appended at the tail without
re-sorting.  Nodes with no neighbor fall back to the most-connected
remaining node under NDR.

The fallback lookup goes through a lazy max-heap so planning stays near
O(n log n) on sparse graphs.
"""

from __future__ import annotations

import enum
import heapq
from collections import deque
from dataclasses import dataclass

from .partitioner import Unit
from .plan_graph import PlanGraph


class UnionOp(enum.Enum):
    DR = "DR"
    NDR = "NDR"


@dataclass(frozen=True)
class Leaf:
    group: str


@dataclass(frozen=True)
class Node:
    op: UnionOp
    left: "BushyTree"
    right: "BushyTree"


BushyTree = Leaf | Node


def iter_postorder(tree: BushyTree):
    """Post-order walk without recursion; planner trees can run deep."""
    stack: list[tuple[BushyTree, bool]] = [(tree, False)]
    while stack:
        node, expanded = stack.pop()
        if isinstance(node, Leaf) or expanded:
            yield node
        else:
            stack.append((node, True))
            stack.append((node.right, False))
            stack.append((node.left, False))


def fold_tree(tree: BushyTree, leaf_fn, node_fn):
    """Iterative post-order reduction: node_fn(node, left_value, right_value)."""
    values: dict[int, object] = {}
    for node in iter_postorder(tree):
        if isinstance(node, Leaf):
            values[id(node)] = leaf_fn(node)
        else:
            values[id(node)] = node_fn(
                node, values.pop(id(node.left)), values.pop(id(node.right))
            )
    return values[id(tree)]


def leaves(tree: BushyTree) -> list[str]:
    return [n.group for n in iter_postorder(tree) if isinstance(n, Leaf)]


def count_ops(tree: BushyTree) -> dict[UnionOp, int]:
    counts = {UnionOp.DR: 0, UnionOp.NDR: 0}
    for node in iter_postorder(tree):
        if isinstance(node, Node):
            counts[node.op] += 1
    return counts


def producible_predicates(
    tree: BushyTree, units_of: dict[str, frozenset[Unit]]
) -> frozenset[Unit]:
    """Units the subtree can emit: the union over its leaf groups."""
    out: set[Unit] = set()
    for gid in leaves(tree):
        out |= units_of[gid]
    return frozenset(out)


class HyperNode:
    """Working node of the agglomeration: a subtree plus contracted-graph state."""

    __slots__ = ("tree", "covered", "min_id", "adjacency", "alive", "version", "seq")

    def __init__(self, tree: BushyTree, covered: frozenset[str], seq: int) -> None:
        self.tree = tree
        self.covered = covered
        self.min_id = min(covered)
        self.adjacency: dict[int, frozenset[Unit]] = {}
        self.alive = True
        self.version = 0
        self.seq = seq

    @property
    def degree(self) -> int:
        return len(self.adjacency)

    @property
    def shared_count(self) -> int:
        return sum(len(lbl) for lbl in self.adjacency.values())


@dataclass
class MergeStep:
    head: frozenset[str]
    partner: frozenset[str]
    op: UnionOp


@dataclass
class PlanTrace:
    tree: BushyTree
    steps: list[MergeStep]

    @property
    def hyper_nodes_created(self) -> int:
        return len(leaves(self.tree)) + len(self.steps)


def generate_bushy_tree(graph: PlanGraph) -> BushyTree:
    return plan_with_trace(graph).tree


def plan_with_trace(graph: PlanGraph) -> PlanTrace:
    """Run the agglomeration and keep the merge history for inspection.

    On a completely edgeless graph the no-neighbor fallback pairs nodes in
    list order (a tournament over the sorted ids); otherwise it takes the
    most-connected remaining node, ties to the smallest covered id, which
    chains the leftovers onto the duplicate-removal core.
    """
    if not graph.nodes:
        raise ValueError("plan graph has no nodes")
    edgeless = not graph.labels

    nodes: dict[int, HyperNode] = {}
    index_of: dict[str, int] = {}
    for i, gid in enumerate(sorted(graph.nodes)):
        nodes[i] = HyperNode(Leaf(gid), frozenset({gid}), seq=i)
        index_of[gid] = i
    for (a, b), label in graph.labels.items():
        ia, ib = index_of[a], index_of[b]
        nodes[ia].adjacency[ib] = label
        nodes[ib].adjacency[ia] = label

    order = sorted(
        nodes.values(),
        key=lambda n: (-n.degree, -n.shared_count, n.min_id),
    )
    ol: deque[HyperNode] = deque(order)

    # fallback lookup: most-connected node, ties by smallest covered id
    heap: list[tuple[int, str, int, int]] = []

    def push(node: HyperNode) -> None:
        heapq.heappush(heap, (-node.degree, node.min_id, node.version, node.seq))

    by_seq: dict[int, HyperNode] = {n.seq: n for n in nodes.values()}
    for n in nodes.values():
        push(n)

    def pop_most_connected(exclude: HyperNode) -> HyperNode | None:
        stash: list[tuple[int, str, int, int]] = []
        found: HyperNode | None = None
        while heap:
            neg_deg, min_id, version, seq = heapq.heappop(heap)
            node = by_seq.get(seq)
            if node is None or not node.alive or node.version != version:
                continue
            if node is exclude:
                continue  # the head dies in this merge; no need to restore
            found = node
            stash.append((neg_deg, min_id, version, seq))
            break
        for entry in stash:
            heapq.heappush(heap, entry)
        return found

    seq_counter = len(nodes)
    alive = len(nodes)
    steps: list[MergeStep] = []

    while alive > 1:
        head = ol.popleft()
        while not head.alive:
            head = ol.popleft()

        partner: HyperNode | None = None
        if head.adjacency:
            best_key = None
            for other_seq, label in head.adjacency.items():
                other = by_seq[other_seq]
                key = (-len(label), other.min_id)
                if best_key is None or key < best_key:
                    best_key = key
                    partner = other
        elif edgeless:
            partner = ol.popleft()
            while not partner.alive:
                partner = ol.popleft()
            ol.appendleft(partner)  # consumed below through the merge
        if partner is None:
            partner = pop_most_connected(exclude=head)
        assert partner is not None

        shared = head.adjacency.get(partner.seq, frozenset())
        op = UnionOp.DR if shared else UnionOp.NDR

        merged = HyperNode(
            Node(op, head.tree, partner.tree),
            head.covered | partner.covered,
            seq=seq_counter,
        )
        seq_counter += 1

        for half in (head, partner):
            for other_seq, label in half.adjacency.items():
                if other_seq in (head.seq, partner.seq):
                    continue
                existing = merged.adjacency.get(other_seq, frozenset())
                merged.adjacency[other_seq] = existing | label

        head.alive = False
        partner.alive = False
        for other_seq in merged.adjacency:
            other = by_seq[other_seq]
            other.adjacency.pop(head.seq, None)
            other.adjacency.pop(partner.seq, None)
            other.adjacency[merged.seq] = merged.adjacency[other_seq]
            other.version += 1
            push(other)

        by_seq[merged.seq] = merged
        push(merged)
        ol.append(merged)
        alive -= 1
        steps.append(MergeStep(head.covered, partner.covered, op))

    result = ol.pop()
    while not result.alive:
        result = ol.pop()
    return PlanTrace(tree=result.tree, steps=steps)


def render_tree(tree: BushyTree) -> str:
    """Indented text rendering for ``explain --tree``."""
    out: list[str] = []
    stack: list[tuple[BushyTree, str]] = [(tree, "")]
    while stack:
        node, indent = stack.pop()
        if isinstance(node, Leaf):
            out.append(f"{indent}{node.group}\n")
        else:
            out.append(f"{indent}{node.op.value}\n")
            stack.append((node.right, indent + "  "))
            stack.append((node.left, indent + "  "))
    return "".join(out)


def tree_to_dot(tree: BushyTree) -> str:
    lines = ["digraph bushy {"]
    names: dict[int, str] = {}
    counter = 0
    stack: list[BushyTree] = [tree]
    while stack:  # pre-order numbering matches reading order in the output
        node = stack.pop()
        names[id(node)] = f"n{counter}"
        counter += 1
        if isinstance(node, Leaf):
            lines.append(f'  {names[id(node)]} [shape=box, label="{node.group}"];')
        else:
            lines.append(f'  {names[id(node)]} [label="{node.op.value}"];')
            stack.append(node.right)
            stack.append(node.left)
    for node in iter_postorder(tree):
        if isinstance(node, Node):
            lines.append(f"  {names[id(node)]} -> {names[id(node.left)]};")
            lines.append(f"  {names[id(node)]} -> {names[id(node.right)]};")
    lines.append("}")
    return "\n".join(lines) + "\n"


__all__ = [
    "BushyTree",
    "HyperNode",
    "Leaf",
    "MergeStep",
    "Node",
    "PlanTrace",
    "UnionOp",
    "count_ops",
    "fold_tree",
    "generate_bushy_tree",
    "iter_postorder",
    "leaves",
    "plan_with_trace",
    "producible_predicates",
    "render_tree",
    "tree_to_dot",
]
