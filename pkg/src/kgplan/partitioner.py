"""Grouping of mapping assertions into intra- and inter-source partitions.

The initial partitions put every single-source assertion into the group of
its source and every cross-source role into the group of its (child,
parent) source pair, together with the concept assertions of the parent
map.  Two merge rules are then applied to a fixed point: joining
independent intra groups, and letting an inter group absorb the intra
group of its referenced source.

Ownership discipline: each assertion belongs to exactly one group (that is
the partition law), but a group may additionally carry *copies* of parent
concept assertions it needs.  Copies are executed by the holding group,
which can duplicate class instances across groups; the plan graph records
the overlap so a duplicate-removing union is scheduled above them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .rml_model import AssertionKind, DataIntegrationSystem, MappingAssertion

Unit = tuple[str, str]


class GroupKind(enum.Enum):
    INTRA = "Intra"
    INTER = "Inter"
    MERGED = "Merged"


@dataclass(frozen=True)
class AssertionGroup:
    """A partition element: the leaf unit of planning and execution."""

    id: str
    kind: GroupKind
    members: frozenset[str]
    source_footprint: frozenset[str]
    defined_predicates: frozenset[Unit]
    copied_concepts: frozenset[str] = frozenset()
    copied_units: frozenset[Unit] = frozenset()
    inter_pairs: frozenset[tuple[str, str]] = frozenset()

    @property
    def effective_units(self) -> frozenset[Unit]:
        """What execution of this group actually produces, copies included."""
        return self.defined_predicates | self.copied_units

    @property
    def executed_ids(self) -> frozenset[str]:
        return self.members | self.copied_concepts


@dataclass
class PartitionSet:
    groups: dict[str, AssertionGroup]
    notes: tuple[str, ...] = ()
    theorem1_violations: tuple[str, ...] = ()

    def sorted_groups(self) -> list[AssertionGroup]:
        return sorted(self.groups.values(), key=lambda g: g.id)

    def by_id(self, gid: str) -> AssertionGroup:
        return self.groups[gid]


def _units(dis: DataIntegrationSystem, ids: frozenset[str] | set[str]) -> frozenset[Unit]:
    return frozenset(dis.assertions[a].defined_unit for a in ids)


def check_partition_laws(p: PartitionSet, dis: DataIntegrationSystem) -> list[str]:
    """Union of members equals the assertion set; members pairwise disjoint."""
    problems: list[str] = []
    seen: dict[str, str] = {}
    for g in p.sorted_groups():
        for a in g.members:
            if a in seen:
                problems.append(f"assertion {a} owned by both {seen[a]} and {g.id}")
            seen[a] = g.id
    missing = set(dis.assertions) - set(seen)
    if missing:
        problems.append(f"assertions not covered by any group: {sorted(missing)}")
    for g in p.sorted_groups():
        if g.kind is GroupKind.INTRA and len(g.source_footprint) != 1:
            problems.append(f"{g.id}: intra group with footprint {sorted(g.source_footprint)}")
        if g.kind is GroupKind.INTER and len(g.source_footprint) > 2:
            problems.append(f"{g.id}: inter group with footprint {sorted(g.source_footprint)}")
    return problems


def initial_partitions(dis: DataIntegrationSystem) -> PartitionSet:
    """Build the intra/inter partition of the assertion set.

    Parent concept assertions are owned by the lexicographically first
    inter group that references their triples map; the parent's intra group
    and any further referencing inter groups keep re-execution copies.
    """
    single_source: dict[str, list[MappingAssertion]] = {}
    multi: dict[tuple[str, str], list[MappingAssertion]] = {}
    for a in dis.sorted_assertions():
        if a.kind is AssertionKind.MULTI_SOURCE_ROLE:
            multi.setdefault((a.sources[0], a.sources[1]), []).append(a)
        else:
            single_source.setdefault(a.sources[0], []).append(a)

    # decide ownership of referenced parent concepts: per referenced map,
    # the smallest (child, parent) pair that references it
    owner_pair_of_map: dict[str, tuple[str, str]] = {}
    referencing_children: dict[str, set[str]] = {}
    for pair in sorted(multi):
        for a in multi[pair]:
            assert a.referenced_map is not None
            owner_pair_of_map.setdefault(a.referenced_map, pair)
            referencing_children.setdefault(a.referenced_map, set()).add(pair[0])

    theorem1_violations = tuple(
        f"concept assertions of map {m} are referenced from multiple child sources: "
        f"{sorted(children)}"
        for m, children in sorted(referencing_children.items())
        if len(children) > 1
    )

    claimed: dict[str, str] = {}  # concept assertion id -> owning inter group id
    groups: dict[str, AssertionGroup] = {}

    for pair in sorted(multi):
        child_src, parent_src = pair
        gid = f"J:{child_src}->{parent_src}"
        members: set[str] = {a.id for a in multi[pair]}
        copies: set[str] = set()
        for a in multi[pair]:
            assert a.referenced_map is not None
            for concept in dis.concept_assertions_of_map(a.referenced_map):
                if owner_pair_of_map[a.referenced_map] == pair:
                    members.add(concept.id)
                    claimed[concept.id] = gid
                else:
                    copies.add(concept.id)
        copies -= members
        groups[gid] = AssertionGroup(
            id=gid,
            kind=GroupKind.INTER,
            members=frozenset(members),
            source_footprint=frozenset(pair),
            defined_predicates=_units(dis, members),
            copied_concepts=frozenset(copies),
            copied_units=_units(dis, copies),
            inter_pairs=frozenset({pair}),
        )

    for src in sorted(single_source):
        owned = {a.id for a in single_source[src] if a.id not in claimed}
        copies = {a.id for a in single_source[src] if a.id in claimed}
        if not owned:
            continue  # nothing left to execute here; the claiming group covers it
        gid = f"S:{src}"
        groups[gid] = AssertionGroup(
            id=gid,
            kind=GroupKind.INTRA,
            members=frozenset(owned),
            source_footprint=frozenset({src}),
            defined_predicates=_units(dis, owned),
            copied_concepts=frozenset(copies),
            copied_units=_units(dis, copies),
        )

    notes = tuple(
        f"outside Theorem 1 optimality conditions: {v}" for v in theorem1_violations
    )
    return PartitionSet(groups=groups, notes=notes, theorem1_violations=theorem1_violations)


def _merge(dis: DataIntegrationSystem, a: AssertionGroup, b: AssertionGroup) -> AssertionGroup:
    members = a.members | b.members
    copies = (a.copied_concepts | b.copied_concepts) - members
    return AssertionGroup(
        id="+".join(sorted((a.id, b.id))),
        kind=GroupKind.MERGED,
        members=members,
        source_footprint=a.source_footprint | b.source_footprint,
        defined_predicates=_units(dis, members),
        copied_concepts=copies,
        copied_units=_units(dis, copies),
        inter_pairs=a.inter_pairs | b.inter_pairs,
    )


def merge_to_fixed_point(
    p: PartitionSet,
    dis: DataIntegrationSystem,
    step_hook=None,
) -> PartitionSet:
    """Apply the two merge rules until neither fires.

    Inter groups absorb the pure intra group of their referenced source
    first (when several compete for one source, the smallest (child,
    parent) pair wins); remaining pure intra groups are then paired in
    ascending id order while the combined footprint stays within two
    sources and no inter partition links the pair.  ``step_hook`` is called
    with the working group dict after every individual merge.
    """
    groups = dict(p.groups)

    def emit_step() -> None:
        if step_hook is not None:
            step_hook(PartitionSet(dict(groups), p.notes, p.theorem1_violations))

    changed = True
    while changed:
        changed = False

        # inter absorbs the intra group of its referenced source; competing
        # inter groups are ranked by their (child, parent) source pair
        while True:
            candidates: list[tuple[str, tuple[str, str], str, str]] = []
            for g in sorted(groups.values(), key=lambda g: g.id):
                for pair in sorted(g.inter_pairs):
                    parent_src = pair[1]
                    intra = groups.get(f"S:{parent_src}")
                    if intra is None or intra.kind is not GroupKind.INTRA:
                        continue
                    if len(g.source_footprint | intra.source_footprint) > 2:
                        continue
                    candidates.append((parent_src, pair, g.id, intra.id))
            if not candidates:
                break
            chosen: dict[str, tuple[str, str]] = {}
            for parent_src, _pair, inter_gid, intra_gid in sorted(candidates):
                chosen.setdefault(parent_src, (inter_gid, intra_gid))
            for parent_src in sorted(chosen):
                inter_gid, intra_gid = chosen[parent_src]
                if inter_gid not in groups or intra_gid not in groups:
                    continue
                merged = _merge(dis, groups[inter_gid], groups[intra_gid])
                del groups[inter_gid]
                del groups[intra_gid]
                groups[merged.id] = merged
                changed = True
                emit_step()

        # pair independent pure intra groups
        inter_sources: set[str] = set()
        blocked_pairs: set[frozenset[str]] = set()
        for g in groups.values():
            for child_src, parent_src in g.inter_pairs:
                inter_sources.update((child_src, parent_src))
                blocked_pairs.add(frozenset({child_src, parent_src}))
        intras = [g for g in sorted(groups.values(), key=lambda g: g.id) if g.kind is GroupKind.INTRA]
        used = [False] * len(intras)
        for i, g in enumerate(intras):
            if used[i]:
                continue
            for j in range(i + 1, len(intras)):
                if used[j]:
                    continue
                other = intras[j]
                footprint = g.source_footprint | other.source_footprint
                if len(footprint) > 2:
                    continue
                if any(
                    frozenset({si, sj}) in blocked_pairs
                    for si in footprint
                    for sj in footprint
                    if si != sj
                ):
                    continue
                merged = _merge(dis, g, other)
                del groups[g.id]
                del groups[other.id]
                groups[merged.id] = merged
                used[i] = used[j] = True
                changed = True
                emit_step()
                break

    return PartitionSet(groups=groups, notes=p.notes, theorem1_violations=p.theorem1_violations)


def build_partitions(dis: DataIntegrationSystem) -> PartitionSet:
    """Initial partitions merged to the fixed point."""
    return merge_to_fixed_point(initial_partitions(dis), dis)


def theorem1_conditions(dis: DataIntegrationSystem) -> tuple[bool, bool]:
    """Check the two optimality preconditions of the greedy planner.

    First: every referenced parent map is referenced from one child source
    only.  Second: every ontology unit (property, or class instantiation)
    is defined by at most one assertion.
    """
    children: dict[str, set[str]] = {}
    for a in dis.assertions.values():
        if a.kind is AssertionKind.MULTI_SOURCE_ROLE and a.referenced_map:
            children.setdefault(a.referenced_map, set()).add(a.sources[0])
    cond1 = all(len(c) == 1 for c in children.values())

    unit_count: dict[Unit, int] = {}
    for a in dis.assertions.values():
        unit = a.defined_unit
        unit_count[unit] = unit_count.get(unit, 0) + 1
    cond2 = all(n == 1 for n in unit_count.values())
    return cond1, cond2


def describe_groups(p: PartitionSet) -> list[str]:
    """One line per group for ``explain --partitions``."""
    lines = []
    for g in p.sorted_groups():
        preds = ", ".join(
            f"a {u[1]}" if u[0] == "class" else u[1] for u in sorted(g.effective_units)
        )
        copies = f" copies=[{', '.join(sorted(g.copied_concepts))}]" if g.copied_concepts else ""
        lines.append(
            f"{g.id} kind={g.kind.value} sources=[{', '.join(sorted(g.source_footprint))}] "
            f"members=[{', '.join(sorted(g.members))}]{copies} defines=[{preds}]"
        )
    return lines


__all__ = [
    "AssertionGroup",
    "GroupKind",
    "PartitionSet",
    "build_partitions",
    "check_partition_laws",
    "describe_groups",
    "initial_partitions",
    "merge_to_fixed_point",
    "theorem1_conditions",
]
