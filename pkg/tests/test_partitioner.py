from __future__ import annotations

import pytest

from kgplan.partitioner import (
    GroupKind,
    build_partitions,
    check_partition_laws,
    describe_groups,
    initial_partitions,
    merge_to_fixed_point,
    theorem1_conditions,
)
from kgplan.rml_model import extract_assertions, parse_mappings

PREFIXES = """\
@prefix rr: <http://www.w3.org/ns/r2rml#> .
@prefix rml: <http://semweb.mmlab.be/ns/rml#> .
@prefix ql: <http://semweb.mmlab.be/ns/ql#> .
@prefix ex: <http://example.org/ns#> .
"""


def _dis(body: str):
    return extract_assertions(parse_mappings(PREFIXES + body))


def _member_locals(dis, group) -> set[str]:
    out = set()
    for aid in group.members:
        a = dis.assertions[aid]
        if a.kind.value == "Concept":
            out.add("type:" + str(a.object).rsplit("#")[-1])
        else:
            out.add(a.predicate.rsplit("#")[-1])
    return out


class TestInitialPartitions:
    def test_running_example_three_partitions(self, running_example):
        p = initial_partitions(running_example)
        assert len(p.groups) == 3
        intra_s1 = p.by_id("S:S1.csv")
        inter = p.by_id("J:S1.csv->S3.csv")
        intra_s3 = p.by_id("S:S3.csv")

        assert _member_locals(running_example, intra_s1) == {
            "type:C1", "type:C2", "p1", "p3", "p5"
        }
        assert _member_locals(running_example, inter) == {"p4", "type:C3"}
        assert _member_locals(running_example, intra_s3) == {"p6"}
        # the parent concept travels as an executed copy, not an owned member
        assert intra_s3.copied_concepts == {"TriplesMap3/c0"}
        assert check_partition_laws(p, running_example) == []

    def test_single_source_single_intra(self):
        dis = _dis("""
<#M> rml:logicalSource [ rml:source "a.csv" ; rml:referenceFormulation ql:CSV ] ;
    rr:subjectMap [ rr:template "http://x/{id}" ; rr:class ex:C ] ;
    rr:predicateObjectMap [ rr:predicate ex:p ; rr:objectMap [ rml:reference "v" ] ] .
""")
        p = initial_partitions(dis)
        assert len(p.groups) == 1
        (g,) = p.groups.values()
        assert g.kind is GroupKind.INTRA

    def test_two_way_joins_two_oriented_inters(self):
        dis = _dis("""
<#A> rml:logicalSource [ rml:source "a.csv" ; rml:referenceFormulation ql:CSV ] ;
    rr:subjectMap [ rr:template "http://x/a/{id}" ; rr:class ex:A ] ;
    rr:predicateObjectMap [ rr:predicate ex:toB ; rr:objectMap [
        rr:parentTriplesMap <#B> ; rr:joinCondition [ rr:child "k" ; rr:parent "k" ] ] ] .
<#B> rml:logicalSource [ rml:source "b.csv" ; rml:referenceFormulation ql:CSV ] ;
    rr:subjectMap [ rr:template "http://x/b/{id}" ; rr:class ex:B ] ;
    rr:predicateObjectMap [ rr:predicate ex:toA ; rr:objectMap [
        rr:parentTriplesMap <#A> ; rr:joinCondition [ rr:child "k" ; rr:parent "k" ] ] ] .
""")
        p = initial_partitions(dis)
        inter_ids = {g.id for g in p.groups.values() if g.kind is GroupKind.INTER}
        assert inter_ids == {"J:a.csv->b.csv", "J:b.csv->a.csv"}
        assert check_partition_laws(p, dis) == []


class TestMergeToFixedPoint:
    def test_running_example_merges_to_two_groups(self, running_example):
        p = merge_to_fixed_point(initial_partitions(running_example), running_example)
        assert len(p.groups) == 2
        merged = [g for g in p.groups.values() if g.kind is GroupKind.MERGED]
        assert len(merged) == 1
        assert _member_locals(running_example, merged[0]) == {"p4", "type:C3", "p6"}
        assert merged[0].copied_concepts == frozenset()
        assert check_partition_laws(p, running_example) == []

    def test_four_group_example_four_groups(self, four_group_example):
        p = build_partitions(four_group_example)
        assert len(p.groups) == 4
        assert check_partition_laws(p, four_group_example) == []
        footprints = sorted(tuple(sorted(g.source_footprint)) for g in p.groups.values())
        assert footprints == [
            ("S1.csv",),
            ("S1.csv", "S3.csv"),
            ("S1.csv", "S4.csv"),
            ("S1.csv", "S5.csv"),
        ]

    def test_single_group_fixed_point_immediately(self):
        dis = _dis("""
<#M> rml:logicalSource [ rml:source "a.csv" ; rml:referenceFormulation ql:CSV ] ;
    rr:subjectMap [ rr:template "http://x/{id}" ; rr:class ex:C ] .
""")
        p = initial_partitions(dis)
        merged = merge_to_fixed_point(p, dis)
        assert merged.groups.keys() == p.groups.keys()

    def test_competing_inters_one_absorbs(self):
        # two inter groups reference the same parent source; the smaller
        # (child, parent) pair absorbs the intra, the other keeps a copy
        dis = _dis("""
<#A> rml:logicalSource [ rml:source "s1.csv" ; rml:referenceFormulation ql:CSV ] ;
    rr:subjectMap [ rr:template "http://x/a/{id}" ; rr:class ex:A ] ;
    rr:predicateObjectMap [ rr:predicate ex:pa ; rr:objectMap [
        rr:parentTriplesMap <#C> ; rr:joinCondition [ rr:child "k" ; rr:parent "k" ] ] ] .
<#B> rml:logicalSource [ rml:source "s3.csv" ; rml:referenceFormulation ql:CSV ] ;
    rr:subjectMap [ rr:template "http://x/b/{id}" ; rr:class ex:B ] ;
    rr:predicateObjectMap [ rr:predicate ex:pb ; rr:objectMap [
        rr:parentTriplesMap <#C> ; rr:joinCondition [ rr:child "k" ; rr:parent "k" ] ] ] .
<#C> rml:logicalSource [ rml:source "s2.csv" ; rml:referenceFormulation ql:CSV ] ;
    rr:subjectMap [ rr:template "http://x/c/{id}" ; rr:class ex:C ] ;
    rr:predicateObjectMap [ rr:predicate ex:pc ; rr:objectMap [ rml:reference "v" ] ] .
""")
        p = merge_to_fixed_point(initial_partitions(dis), dis)
        absorbing = [g for g in p.groups.values()
                     if g.kind is GroupKind.MERGED and g.inter_pairs]
        assert len(absorbing) == 1
        assert absorbing[0].inter_pairs == {("s1.csv", "s2.csv")}
        leftover = p.by_id("J:s3.csv->s2.csv")
        assert leftover.copied_concepts == {"C/c0"}
        # the copy keeps the class unit on the non-absorbing group
        assert ("class", "http://example.org/ns#C") in leftover.effective_units
        assert p.theorem1_violations  # referenced from two child sources
        assert check_partition_laws(p, dis) == []

    def test_partition_laws_hold_after_every_step(self, four_group_example):
        states = []
        merge_to_fixed_point(
            initial_partitions(four_group_example), four_group_example,
            step_hook=states.append,
        )
        assert states
        for state in states:
            assert check_partition_laws(state, four_group_example) == []

    def test_idempotent(self, four_group_example):
        once = merge_to_fixed_point(initial_partitions(four_group_example), four_group_example)
        twice = merge_to_fixed_point(once, four_group_example)
        assert sorted(once.groups) == sorted(twice.groups)

    def test_deterministic(self, tmp_path):
        from fixtures import write_four_group_example
        from kgplan.rml_model import load_mapping_files

        p1 = build_partitions(load_mapping_files([write_four_group_example(tmp_path / "a")]))
        p2 = build_partitions(load_mapping_files([write_four_group_example(tmp_path / "b")]))
        assert sorted(p1.groups) == sorted(p2.groups)
        for gid in p1.groups:
            assert p1.by_id(gid).members == p2.by_id(gid).members

    def test_gtfs_like_ten_groups(self, gtfs_like):
        p = build_partitions(gtfs_like)
        assert len(p.groups) == 10
        assert check_partition_laws(p, gtfs_like) == []
        # the self-join group absorbed the shapes attributes
        shapes = [g for g in p.groups.values()
                  if ("shapes.csv", "shapes.csv") in g.inter_pairs]
        assert len(shapes) == 1
        assert any("shapes.csv" == s for s in shapes[0].source_footprint)

    def test_groups_never_exceed_two_sources(self, gtfs_like, four_group_example):
        for dis in (gtfs_like, four_group_example):
            p = build_partitions(dis)
            assert all(len(g.source_footprint) <= 2 for g in p.groups.values())


class TestTheorem1Conditions:
    def test_running_example_meets_conditions(self, running_example):
        assert theorem1_conditions(running_example) == (True, True)

    def test_four_group_example_violates_property_condition(self, four_group_example):
        cond1, cond2 = theorem1_conditions(four_group_example)
        assert cond1 is True
        assert cond2 is False  # p3 is defined twice

    def test_gtfs_like_violates_reference_condition(self, gtfs_like):
        cond1, _ = theorem1_conditions(gtfs_like)
        assert cond1 is False  # trips referenced from two child sources


def test_describe_groups_mentions_copies(running_example):
    p = initial_partitions(running_example)
    lines = describe_groups(p)
    assert len(lines) == 3
    assert any("copies=" in line for line in lines)
