"""Mapping documents and their classification into assertion kinds.

A mapping document (Turtle, restricted [R2]RML vocabulary) is first parsed
into per-triples-map records, then each record is broken down into mapping
assertions: concept assertions for ``rr:class`` declarations, and one
role/attribute assertion per predicate-object map.  CSV is the only
accepted reference formulation.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path

from .ntriples import RDF_TYPE
from .turtle_parser import (
    Iri,
    Literal,
    Term,
    TurtleDocument,
    TurtleSyntaxError,
    parse_turtle,
)

RR = "http://www.w3.org/ns/r2rml#"
RML = "http://semweb.mmlab.be/ns/rml#"
QL = "http://semweb.mmlab.be/ns/ql#"

ACCEPTED_PREDICATES = {
    RML + "logicalSource",
    RML + "source",
    RML + "referenceFormulation",
    RML + "reference",
    RR + "subjectMap",
    RR + "template",
    RR + "constant",
    RR + "predicateObjectMap",
    RR + "predicate",
    RR + "objectMap",
    RR + "parentTriplesMap",
    RR + "joinCondition",
    RR + "child",
    RR + "parent",
    RR + "class",
    RDF_TYPE,
}


class MappingError(Exception):
    """Structural problem in an otherwise well-formed mapping document."""


class UnknownVocabularyError(MappingError):
    def __init__(self, iri: str) -> None:
        super().__init__(f"IRI outside the accepted mapping vocabulary: <{iri}>")
        self.iri = iri


class AssertionKind(enum.Enum):
    CONCEPT = "Concept"
    ATTRIBUTE = "Attribute"
    SINGLE_SOURCE_ROLE = "SingleSourceRole"
    REFERENCED_SOURCE_ROLE = "ReferencedSourceRole"
    MULTI_SOURCE_ROLE = "MultiSourceRole"


class TemplateKind(enum.Enum):
    IRI_TEMPLATE = "iri-template"
    REFERENCE = "reference"
    CONSTANT = "constant"


@dataclass(frozen=True)
class TemplatePart:
    """One segment of a template: fixed text or a column reference."""

    text: str
    is_reference: bool


_TEMPLATE_REF = re.compile(r"\{([^{}]*)\}")


@dataclass(frozen=True)
class TemplateFunction:
    """Term constructor: IRI template, plain column reference, or constant."""

    parts: tuple[TemplatePart, ...]
    kind: TemplateKind

    @staticmethod
    def from_template(template: str) -> "TemplateFunction":
        parts: list[TemplatePart] = []
        pos = 0
        for m in _TEMPLATE_REF.finditer(template):
            if m.start() > pos:
                parts.append(TemplatePart(template[pos:m.start()], False))
            if not m.group(1):
                raise MappingError(f"empty column reference in template {template!r}")
            parts.append(TemplatePart(m.group(1), True))
            pos = m.end()
        if pos < len(template):
            parts.append(TemplatePart(template[pos:], False))
        if not parts:
            raise MappingError("empty rr:template")
        # literal braces have no escaping rule; a leftover brace is an error
        if any("{" in p.text or "}" in p.text for p in parts if not p.is_reference):
            raise MappingError(f"unbalanced braces in template {template!r}")
        return TemplateFunction(tuple(parts), TemplateKind.IRI_TEMPLATE)

    @staticmethod
    def from_reference(column: str) -> "TemplateFunction":
        return TemplateFunction((TemplatePart(column, True),), TemplateKind.REFERENCE)

    @staticmethod
    def from_constant(value: str) -> "TemplateFunction":
        return TemplateFunction((TemplatePart(value, False),), TemplateKind.CONSTANT)

    @property
    def references(self) -> tuple[str, ...]:
        return tuple(p.text for p in self.parts if p.is_reference)

    def template_text(self) -> str:
        """Round-trippable ``rr:template`` form (only for IRI templates)."""
        return "".join(
            "{" + p.text + "}" if p.is_reference else p.text for p in self.parts
        )


@dataclass(frozen=True)
class JoinCondition:
    child_attribute: str
    parent_attribute: str


@dataclass(frozen=True)
class LogicalSource:
    id: str
    path: str
    format: str = "CSV"
    attributes: tuple[str, ...] = ()


@dataclass(frozen=True)
class MappingAssertion:
    id: str
    kind: AssertionKind
    subject: TemplateFunction
    predicate: str
    object: TemplateFunction | str
    sources: tuple[str, ...]
    join: JoinCondition | None = None
    referenced_assertion: str | None = None
    triples_map: str = ""
    referenced_map: str | None = None

    @property
    def defined_unit(self) -> tuple[str, str]:
        """Plan-graph sharing unit: classes count as (rdf:type, class) pairs."""
        if self.kind is AssertionKind.CONCEPT:
            return ("class", str(self.object))
        return ("property", self.predicate)

    def signature(self) -> tuple:
        """Identity up to assigned ids, used for round-trip comparisons."""

        def flat(fn: TemplateFunction) -> tuple:
            return tuple((p.text, p.is_reference) for p in fn.parts)

        if self.kind is AssertionKind.CONCEPT:
            obj: tuple | str = str(self.object)
        elif isinstance(self.object, TemplateFunction):
            obj = flat(self.object)
        else:
            # role targets compare by the referenced map, whose id survives
            # document splitting
            obj = ("ref", self.referenced_map or "")
        join = (self.join.child_attribute, self.join.parent_attribute) if self.join else ()
        return (self.kind.value, flat(self.subject), self.predicate, obj, self.sources, join)


@dataclass
class DataIntegrationSystem:
    ontology_predicates: frozenset[str]
    sources: dict[str, LogicalSource]
    assertions: dict[str, MappingAssertion]
    warnings: tuple[str, ...] = ()
    base_dir: Path | None = None

    def concept_assertions_of_map(self, map_id: str) -> list[MappingAssertion]:
        return [
            a
            for a in self.assertions.values()
            if a.kind is AssertionKind.CONCEPT and a.triples_map == map_id
        ]

    def sorted_assertions(self) -> list[MappingAssertion]:
        return sorted(self.assertions.values(), key=lambda a: a.id)


@dataclass
class PredicateObjectMap:
    predicate: str
    object_template: TemplateFunction | None = None
    parent_map: str | None = None
    join: JoinCondition | None = None
    constant_is_iri: bool = False


@dataclass
class TriplesMapRecord:
    """One triples map as written, before classification."""

    id: str
    source_path: str
    subject: TemplateFunction
    classes: list[str] = field(default_factory=list)
    poms: list[PredicateObjectMap] = field(default_factory=list)


def _require_single(doc: TurtleDocument, node: Term, predicate: str, what: str) -> Term:
    values = doc.objects(node, predicate)
    if not values:
        raise MappingError(f"missing {what}")
    if len(values) > 1:
        raise MappingError(f"more than one {what}")
    return values[0]


def _term_function(doc: TurtleDocument, node: Term, context: str) -> tuple[TemplateFunction, bool]:
    """Read a term map from ``node``; returns (function, constant-was-iri)."""
    templates = doc.objects(node, RR + "template")
    references = doc.objects(node, RML + "reference")
    constants = doc.objects(node, RR + "constant")
    given = [v for v in (templates, references, constants) if v]
    if len(given) > 1 or any(len(v) > 1 for v in given):
        raise MappingError(f"conflicting term map forms in {context}")
    if templates:
        if not isinstance(templates[0], Literal):
            raise MappingError(f"rr:template must be a string in {context}")
        return TemplateFunction.from_template(templates[0].value), False
    if references:
        if not isinstance(references[0], Literal):
            raise MappingError(f"rml:reference must be a string in {context}")
        return TemplateFunction.from_reference(references[0].value), False
    if constants:
        const = constants[0]
        if isinstance(const, Iri):
            return TemplateFunction.from_constant(const.value), True
        if isinstance(const, Literal):
            return TemplateFunction.from_constant(const.value), False
    raise MappingError(f"vacuous term map in {context}: needs template, reference, constant, or parentTriplesMap")


def parse_mappings(document: str) -> list[TriplesMapRecord]:
    """Parse one mapping document into triples-map records in document order.

    Raises :class:`~kgplan.turtle_parser.TurtleSyntaxError` on bad syntax,
    :class:`UnknownVocabularyError` for predicates outside the accepted set,
    and :class:`MappingError` for structural defects.
    """
    doc = parse_turtle(document)

    for _, predicate, _ in doc.triples:
        if predicate not in ACCEPTED_PREDICATES:
            raise UnknownVocabularyError(predicate)

    records: list[TriplesMapRecord] = []
    for subject in doc.subjects():
        if not isinstance(subject, Iri):
            continue
        has_source = doc.objects(subject, RML + "logicalSource")
        has_subject_map = doc.objects(subject, RR + "subjectMap")
        has_poms = doc.objects(subject, RR + "predicateObjectMap")
        if not (has_source or has_subject_map or has_poms):
            continue  # e.g. stray "a rr:TriplesMap" declarations already covered below
        map_id = subject.value.lstrip("#")

        if not has_source:
            raise MappingError(f"triples map <{subject.value}> has no rml:logicalSource")
        if len(has_source) > 1:
            raise MappingError(f"triples map <{subject.value}> has more than one logical source")
        ls = has_source[0]
        source_term = _require_single(doc, ls, RML + "source", f"rml:source in <{subject.value}>")
        if not isinstance(source_term, Literal):
            raise MappingError(f"rml:source must be a file path string in <{subject.value}>")
        formulations = doc.objects(ls, RML + "referenceFormulation")
        for f in formulations:
            if not (isinstance(f, Iri) and f.value == QL + "CSV"):
                shown = f.value if isinstance(f, (Iri, Literal)) else "?"
                raise MappingError(f"unsupported reference formulation {shown!r}; only CSV is accepted")

        subject_map = _require_single(doc, subject, RR + "subjectMap", f"rr:subjectMap in <{subject.value}>")
        subject_fn, _ = _term_function(doc, subject_map, f"subject map of <{subject.value}>")

        record = TriplesMapRecord(id=map_id, source_path=source_term.value, subject=subject_fn)
        for cls in doc.objects(subject_map, RR + "class"):
            if not isinstance(cls, Iri):
                raise MappingError(f"rr:class must be an IRI in <{subject.value}>")
            record.classes.append(cls.value)

        for pom in doc.objects(subject, RR + "predicateObjectMap"):
            pred_term = _require_single(doc, pom, RR + "predicate", f"rr:predicate in <{subject.value}>")
            if not isinstance(pred_term, Iri):
                raise MappingError(f"rr:predicate must be an IRI in <{subject.value}>")
            om = _require_single(doc, pom, RR + "objectMap", f"rr:objectMap for <{pred_term.value}>")
            parents = doc.objects(om, RR + "parentTriplesMap")
            entry = PredicateObjectMap(predicate=pred_term.value)
            if parents:
                if len(parents) > 1:
                    raise MappingError(f"more than one rr:parentTriplesMap for <{pred_term.value}>")
                parent = parents[0]
                if not isinstance(parent, Iri):
                    raise MappingError(f"rr:parentTriplesMap must be an IRI for <{pred_term.value}>")
                entry.parent_map = parent.value.lstrip("#")
                joins = doc.objects(om, RR + "joinCondition")
                if len(joins) > 1:
                    raise MappingError(f"more than one rr:joinCondition for <{pred_term.value}>")
                if joins:
                    child = _require_single(doc, joins[0], RR + "child", "rr:child")
                    par = _require_single(doc, joins[0], RR + "parent", "rr:parent")
                    if not (isinstance(child, Literal) and isinstance(par, Literal)):
                        raise MappingError("rr:child and rr:parent must be column name strings")
                    entry.join = JoinCondition(child.value, par.value)
            else:
                entry.object_template, entry.constant_is_iri = _term_function(
                    doc, om, f"object map of <{pred_term.value}>"
                )
            record.poms.append(entry)

        records.append(record)
    return records


def _source_id(path: str) -> str:
    return Path(path).name


def extract_assertions(
    records: list[TriplesMapRecord], base_dir: Path | None = None
) -> DataIntegrationSystem:
    """Classify every record into mapping assertions and assemble the system.

    Classification per predicate-object map: column reference or literal
    constant gives an attribute; template or IRI constant a single-source
    role; a parent reference without a join on the same source a
    referenced-source role; a parent reference with a join a multi-source
    role (same-source joins included, they cost like the cross-source case).
    """
    by_id = {r.id: r for r in records}
    sources: dict[str, LogicalSource] = {}
    assertions: dict[str, MappingAssertion] = {}
    warnings: list[str] = []
    used_predicates: set[str] = set()

    def source_for(record: TriplesMapRecord) -> str:
        sid = _source_id(record.source_path)
        if sid not in sources:
            sources[sid] = LogicalSource(id=sid, path=record.source_path)
        return sid

    concept_ids: dict[str, list[str]] = {}
    for record in records:
        sid = source_for(record)
        concept_ids[record.id] = []
        for i, cls in enumerate(record.classes):
            aid = f"{record.id}/c{i}"
            assertions[aid] = MappingAssertion(
                id=aid,
                kind=AssertionKind.CONCEPT,
                subject=record.subject,
                predicate=RDF_TYPE,
                object=cls,
                sources=(sid,),
                triples_map=record.id,
            )
            concept_ids[record.id].append(aid)
            used_predicates.add(RDF_TYPE)
            used_predicates.add(cls)
        if len(record.classes) > 1:
            warnings.append(
                f"triples map {record.id} declares {len(record.classes)} classes; "
                f"one concept assertion emitted per class"
            )

    for record in records:
        sid = source_for(record)
        for i, pom in enumerate(record.poms):
            aid = f"{record.id}/p{i}"
            used_predicates.add(pom.predicate)
            if pom.parent_map is not None:
                parent = by_id.get(pom.parent_map)
                if parent is None:
                    raise MappingError(
                        f"dangling rr:parentTriplesMap <{pom.parent_map}> in {record.id}"
                    )
                parent_sid = source_for(parent)
                if not concept_ids[parent.id]:
                    raise MappingError(
                        f"parent triples map {parent.id} defines no rr:class; "
                        f"referenced from {record.id}"
                    )
                referenced = concept_ids[parent.id][0]
                if pom.join is None:
                    if parent_sid != sid:
                        raise MappingError(
                            f"parent triples map {parent.id} uses a different source "
                            f"than {record.id}; a join condition is required"
                        )
                    assertions[aid] = MappingAssertion(
                        id=aid,
                        kind=AssertionKind.REFERENCED_SOURCE_ROLE,
                        subject=record.subject,
                        predicate=pom.predicate,
                        object=referenced,
                        sources=(sid,),
                        referenced_assertion=referenced,
                        triples_map=record.id,
                        referenced_map=parent.id,
                    )
                else:
                    assertions[aid] = MappingAssertion(
                        id=aid,
                        kind=AssertionKind.MULTI_SOURCE_ROLE,
                        subject=record.subject,
                        predicate=pom.predicate,
                        object=referenced,
                        sources=(sid, parent_sid),
                        join=pom.join,
                        referenced_assertion=referenced,
                        triples_map=record.id,
                        referenced_map=parent.id,
                    )
            else:
                fn = pom.object_template
                assert fn is not None
                if fn.kind is TemplateKind.IRI_TEMPLATE or (
                    fn.kind is TemplateKind.CONSTANT and pom.constant_is_iri
                ):
                    kind = AssertionKind.SINGLE_SOURCE_ROLE
                else:
                    kind = AssertionKind.ATTRIBUTE
                assertions[aid] = MappingAssertion(
                    id=aid,
                    kind=kind,
                    subject=record.subject,
                    predicate=pom.predicate,
                    object=fn,
                    sources=(sid,),
                    triples_map=record.id,
                )

    return DataIntegrationSystem(
        ontology_predicates=frozenset(used_predicates),
        sources=sources,
        assertions=assertions,
        warnings=tuple(warnings),
        base_dir=base_dir,
    )


def load_mapping_files(paths: list[Path]) -> DataIntegrationSystem:
    """Parse and extract one or more mapping files into a single system.

    Logical source paths resolve relative to the directory of the mapping
    file that declares them.
    """
    records: list[TriplesMapRecord] = []
    base: Path | None = None
    for path in paths:
        path = Path(path)
        base = base or path.parent
        file_records = parse_mappings(path.read_text(encoding="utf-8"))
        for r in file_records:
            if not Path(r.source_path).is_absolute():
                r.source_path = str((path.parent / r.source_path).resolve())
        records.extend(file_records)
    return extract_assertions(records, base_dir=base)


def validate_dis(dis: DataIntegrationSystem) -> list[str]:
    """Scan-check the structural invariants; returns human-readable violations."""
    problems: list[str] = []
    for a in dis.assertions.values():
        if (a.kind is AssertionKind.MULTI_SOURCE_ROLE) != (a.join is not None):
            problems.append(f"{a.id}: multi-source kind and join presence disagree")
        if (a.kind is AssertionKind.MULTI_SOURCE_ROLE) != (len(a.sources) == 2):
            problems.append(f"{a.id}: multi-source kind and source count disagree")
        for sid in a.sources:
            if sid not in dis.sources:
                problems.append(f"{a.id}: unknown source {sid}")
        if a.referenced_assertion is not None:
            target = dis.assertions.get(a.referenced_assertion)
            if target is None or target.kind is not AssertionKind.CONCEPT:
                problems.append(f"{a.id}: referenced assertion is not a concept assertion")
            elif a.kind is AssertionKind.REFERENCED_SOURCE_ROLE and target.sources != a.sources:
                problems.append(f"{a.id}: referenced-source role crosses sources")
    return problems


__all__ = [
    "AssertionKind",
    "DataIntegrationSystem",
    "JoinCondition",
    "LogicalSource",
    "MappingAssertion",
    "MappingError",
    "PredicateObjectMap",
    "TemplateFunction",
    "TemplateKind",
    "TriplesMapRecord",
    "TurtleSyntaxError",
    "UnknownVocabularyError",
    "extract_assertions",
    "load_mapping_files",
    "parse_mappings",
    "validate_dis",
]
