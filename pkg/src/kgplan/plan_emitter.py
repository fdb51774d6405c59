"""Lowering a union tree to an operating-system command script.

Each leaf group is serialized back into a standalone mapping document and
handed to an external [R2]RML engine invocation; union nodes become
``sort -u`` (with dedup) or ``cat`` (without) over the intermediate files.
The script runs all engine calls in the background, with one ``wait``
barrier per tree level so every union only reads finished inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .bushy_planner import BushyTree, Leaf, Node, UnionOp, iter_postorder, leaves
from .ntriples import escape_literal
from .partitioner import AssertionGroup, PartitionSet
from .rml_model import (
    AssertionKind,
    DataIntegrationSystem,
    MappingAssertion,
    TemplateKind,
)


class EmitError(Exception):
    pass


@dataclass(frozen=True)
class EngineProfile:
    """External engine invocation recipe."""

    name: str
    command_template: str
    timeout_seconds: int = 18000
    config_file: str = ""

    def __post_init__(self) -> None:
        for placeholder in ("{mapping_file}", "{output_file}"):
            if placeholder not in self.command_template:
                raise EmitError(
                    f"engine profile {self.name!r} must use {placeholder} in its command template"
                )
        if self.timeout_seconds <= 0:
            raise EmitError("engine timeout must be positive")


@dataclass
class PhysicalPlan:
    script: str
    group_mapping_files: dict[str, str]
    final_output: str
    engine_calls: int = 0
    sort_nodes: int = 0
    cat_nodes: int = 0


def _safe_name(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "._-" else "_" for ch in name)


def _quote(value: str) -> str:
    return '"' + escape_literal(value) + '"'


def _emit_term_map(a: MappingAssertion) -> str:
    fn = a.object
    if a.kind is AssertionKind.ATTRIBUTE:
        if fn.kind is TemplateKind.CONSTANT:
            return f"rr:constant {_quote(fn.parts[0].text)}"
        return f"rml:reference {_quote(fn.references[0])}"
    if fn.kind is TemplateKind.CONSTANT:
        return f"rr:constant <{fn.parts[0].text}>"
    if fn.kind is TemplateKind.REFERENCE:
        return f"rml:reference {_quote(fn.references[0])}"
    return f"rr:template {_quote(fn.template_text())}"


def _subject_map_lines(subject, classes: list[str]) -> list[str]:
    if subject.kind is TemplateKind.IRI_TEMPLATE:
        term = f"rr:template {_quote(subject.template_text())}"
    elif subject.kind is TemplateKind.REFERENCE:
        term = f"rml:reference {_quote(subject.references[0])}"
    else:
        term = f"rr:constant <{subject.parts[0].text}>"
    lines = [f"    rr:subjectMap [ {term}"]
    for cls in classes:
        lines.append(f"        ; rr:class <{cls}>")
    lines.append("    ]")
    return lines


def serialize_group(group: AssertionGroup, dis: DataIntegrationSystem) -> str:
    """One standalone mapping document holding exactly this group's work.

    Parent triples maps are inlined so every reference resolves; their
    classes are emitted only when the concept assertion travels with the
    group, which keeps re-extraction aligned with what the group executes.
    """
    executed = [dis.assertions[aid] for aid in sorted(group.executed_ids)]
    map_ids = {a.triples_map for a in executed}
    map_ids |= {a.referenced_map for a in executed if a.referenced_map}

    subject_of: dict[str, MappingAssertion] = {}
    for a in sorted(dis.assertions.values(), key=lambda a: a.id):
        subject_of.setdefault(a.triples_map, a)

    out = [
        "@prefix rr: <http://www.w3.org/ns/r2rml#> .",
        "@prefix rml: <http://semweb.mmlab.be/ns/rml#> .",
        "@prefix ql: <http://semweb.mmlab.be/ns/ql#> .",
        "",
    ]
    for map_id in sorted(map_ids):
        rep = subject_of.get(map_id)
        if rep is None:
            raise EmitError(f"no assertion carries triples map {map_id}")
        source = dis.sources[rep.sources[0]]
        classes = [
            str(a.object)
            for a in executed
            if a.kind is AssertionKind.CONCEPT and a.triples_map == map_id
        ]
        out.append(f"<#{map_id}>")
        out.append(
            f"    rml:logicalSource [ rml:source {_quote(source.path)} ;"
            f" rml:referenceFormulation ql:CSV ] ;"
        )
        out.extend(_subject_map_lines(rep.subject, classes))
        for a in executed:
            if a.triples_map != map_id or a.kind is AssertionKind.CONCEPT:
                continue
            out.append("    ; rr:predicateObjectMap [")
            out.append(f"        rr:predicate <{a.predicate}> ;")
            if a.kind in (AssertionKind.REFERENCED_SOURCE_ROLE, AssertionKind.MULTI_SOURCE_ROLE):
                inner = [f"rr:parentTriplesMap <#{a.referenced_map}>"]
                if a.join is not None:
                    inner.append(
                        f"rr:joinCondition [ rr:child {_quote(a.join.child_attribute)} ;"
                        f" rr:parent {_quote(a.join.parent_attribute)} ]"
                    )
                out.append(f"        rr:objectMap [ {' ; '.join(inner)} ]")
            else:
                out.append(f"        rr:objectMap [ {_emit_term_map(a)} ]")
            out.append("    ]")
        out.append("    .")
        out.append("")
    return "\n".join(out)


def split_mappings(p: PartitionSet, dis: DataIntegrationSystem) -> dict[str, str]:
    """Standalone mapping document text per group id."""
    return {g.id: serialize_group(g, dis) for g in p.sorted_groups()}


def _levels(tree: BushyTree) -> dict[int, list[Node]]:
    """Internal nodes grouped by height; height 1 sits just above the leaves."""
    by_height: dict[int, list[Node]] = {}
    heights: dict[int, int] = {}
    for node in iter_postorder(tree):
        if isinstance(node, Leaf):
            heights[id(node)] = 0
        else:
            h = max(heights.pop(id(node.left)), heights.pop(id(node.right))) + 1
            heights[id(node)] = h
            by_height.setdefault(h, []).append(node)
    return by_height


def gamma(
    tree: BushyTree,
    profile: EngineProfile,
    mapping_files: dict[str, str],
    run_dir: str | Path = "runs",
    final_output: str | Path = "kg.nt",
) -> PhysicalPlan:
    """Translate the tree into a shell script over engine calls and unions."""
    run_dir = str(run_dir)
    final_output = str(final_output)
    leaf_ids = leaves(tree)
    for gid in leaf_ids:
        if gid not in mapping_files:
            raise EmitError(f"no mapping file for group {gid}")

    out_file: dict[int, str] = {}

    def leaf_file(gid: str) -> str:
        return f"{run_dir}/{_safe_name(gid)}.nt"

    lines = ["#!/bin/sh"]
    for gid in leaf_ids:
        call = profile.command_template.format(
            mapping_file=mapping_files[gid],
            output_file=leaf_file(gid),
            config_file=profile.config_file,
        )
        lines.append(f"timeout {profile.timeout_seconds} {call} &")
    lines.append("wait")

    by_height = _levels(tree)
    counter = 0
    for height in sorted(by_height):
        for node in by_height[height]:
            name = f"{run_dir}/u{counter}.nt"
            counter += 1
            out_file[id(node)] = name
            left = out_file[id(node.left)] if isinstance(node.left, Node) else leaf_file(node.left.group)
            right = out_file[id(node.right)] if isinstance(node.right, Node) else leaf_file(node.right.group)
            command = "sort -u" if node.op is UnionOp.DR else "cat"
            lines.append(f"{command} {left} {right} > {name}")
        lines.append("wait")

    root_file = out_file[id(tree)] if isinstance(tree, Node) else leaf_file(tree.group)
    lines.append(f"mv {root_file} {final_output}")

    script = "\n".join(lines) + "\n"
    ops = [n.op for nodes in by_height.values() for n in nodes]
    return PhysicalPlan(
        script=script,
        group_mapping_files={gid: mapping_files[gid] for gid in leaf_ids},
        final_output=final_output,
        engine_calls=len(leaf_ids),
        sort_nodes=sum(1 for op in ops if op is UnionOp.DR),
        cat_nodes=sum(1 for op in ops if op is UnionOp.NDR),
    )


__all__ = [
    "EmitError",
    "EngineProfile",
    "PhysicalPlan",
    "gamma",
    "serialize_group",
    "split_mappings",
]
