"""Shared fixture builders: mapping documents and CSV data at chosen scales."""

from __future__ import annotations

import random
from pathlib import Path

EX = "http://example.org/ns#"

RUNNING_EXAMPLE_TTL = """\
@prefix rr: <http://www.w3.org/ns/r2rml#> .
@prefix rml: <http://semweb.mmlab.be/ns/rml#> .
@prefix ql: <http://semweb.mmlab.be/ns/ql#> .
@prefix ex: <http://example.org/ns#> .

<#TriplesMap1>
    rml:logicalSource [ rml:source "S1.csv" ; rml:referenceFormulation ql:CSV ] ;
    rr:subjectMap [ rr:template "http://example.org/person/{id}" ; rr:class ex:C1 ] ;
    rr:predicateObjectMap [
        rr:predicate ex:p1 ;
        rr:objectMap [ rml:reference "name" ]
    ] ;
    rr:predicateObjectMap [
        rr:predicate ex:p3 ;
        rr:objectMap [ rr:parentTriplesMap <#TriplesMap2> ]
    ] .

<#TriplesMap2>
    rml:logicalSource [ rml:source "S1.csv" ; rml:referenceFormulation ql:CSV ] ;
    rr:subjectMap [ rr:template "http://example.org/record/{id}" ; rr:class ex:C2 ] ;
    rr:predicateObjectMap [
        rr:predicate ex:p5 ;
        rr:objectMap [ rr:template "http://example.org/thing/{attribute}" ]
    ] ;
    rr:predicateObjectMap [
        rr:predicate ex:p4 ;
        rr:objectMap [
            rr:parentTriplesMap <#TriplesMap3> ;
            rr:joinCondition [ rr:child "attribute" ; rr:parent "DrugName" ]
        ]
    ] .

<#TriplesMap3>
    rml:logicalSource [ rml:source "S3.csv" ; rml:referenceFormulation ql:CSV ] ;
    rr:subjectMap [ rr:template "http://example.org/drug/{DrugName}" ; rr:class ex:C3 ] ;
    rr:predicateObjectMap [
        rr:predicate ex:p6 ;
        rr:objectMap [ rml:reference "label" ]
    ] .
"""

S1_CSV = """\
id,name,attribute
1,ann,a
2,bob,a
3,cid,b
"""

S3_CSV = """\
DrugName,label
a,aspirin
c,codeine
"""


def write_running_example(root: Path) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    mapping = root / "running_example.ttl"
    mapping.write_text(RUNNING_EXAMPLE_TTL)
    (root / "S1.csv").write_text(S1_CSV)
    (root / "S3.csv").write_text(S3_CSV)
    return mapping


def four_group_example_ttl() -> str:
    """Four sources, five classes; one property defined twice (p3).

    The duplicated property sits in the intra group of the first source
    (a referenced-source role) and in the group formed around the fourth
    source (a plain role), so exactly one pair of final groups overlaps.
    """
    return """\
@prefix rr: <http://www.w3.org/ns/r2rml#> .
@prefix rml: <http://semweb.mmlab.be/ns/rml#> .
@prefix ql: <http://semweb.mmlab.be/ns/ql#> .
@prefix ex: <http://example.org/ns#> .

<#MapC1>
    rml:logicalSource [ rml:source "S1.csv" ; rml:referenceFormulation ql:CSV ] ;
    rr:subjectMap [ rr:template "http://example.org/c1/{id}" ; rr:class ex:C1 ] ;
    rr:predicateObjectMap [
        rr:predicate ex:p1 ;
        rr:objectMap [ rml:reference "name" ]
    ] ;
    rr:predicateObjectMap [
        rr:predicate ex:p3 ;
        rr:objectMap [ rr:parentTriplesMap <#MapC2> ]
    ] ;
    rr:predicateObjectMap [
        rr:predicate ex:p7 ;
        rr:objectMap [
            rr:parentTriplesMap <#MapC3> ;
            rr:joinCondition [ rr:child "k3" ; rr:parent "key" ]
        ]
    ] ;
    rr:predicateObjectMap [
        rr:predicate ex:p8 ;
        rr:objectMap [
            rr:parentTriplesMap <#MapC4> ;
            rr:joinCondition [ rr:child "k4" ; rr:parent "key" ]
        ]
    ] ;
    rr:predicateObjectMap [
        rr:predicate ex:p9 ;
        rr:objectMap [
            rr:parentTriplesMap <#MapC5> ;
            rr:joinCondition [ rr:child "k5" ; rr:parent "key" ]
        ]
    ] .

<#MapC2>
    rml:logicalSource [ rml:source "S1.csv" ; rml:referenceFormulation ql:CSV ] ;
    rr:subjectMap [ rr:template "http://example.org/c2/{id}" ; rr:class ex:C2 ] ;
    rr:predicateObjectMap [
        rr:predicate ex:p2 ;
        rr:objectMap [ rml:reference "name" ]
    ] .

<#MapC3>
    rml:logicalSource [ rml:source "S3.csv" ; rml:referenceFormulation ql:CSV ] ;
    rr:subjectMap [ rr:template "http://example.org/c3/{key}" ; rr:class ex:C3 ] ;
    rr:predicateObjectMap [
        rr:predicate ex:p6 ;
        rr:objectMap [ rml:reference "label" ]
    ] .

<#MapC4>
    rml:logicalSource [ rml:source "S4.csv" ; rml:referenceFormulation ql:CSV ] ;
    rr:subjectMap [ rr:template "http://example.org/c4/{key}" ; rr:class ex:C4 ] ;
    rr:predicateObjectMap [
        rr:predicate ex:p3 ;
        rr:objectMap [ rr:template "http://example.org/thing/{label}" ]
    ] ;
    rr:predicateObjectMap [
        rr:predicate ex:p10 ;
        rr:objectMap [ rml:reference "label" ]
    ] .

<#MapC5>
    rml:logicalSource [ rml:source "S5.csv" ; rml:referenceFormulation ql:CSV ] ;
    rr:subjectMap [ rr:template "http://example.org/c5/{key}" ; rr:class ex:C5 ] ;
    rr:predicateObjectMap [
        rr:predicate ex:p11 ;
        rr:objectMap [ rml:reference "label" ]
    ] .
"""


def write_four_group_example(
    root: Path,
    rows_per_source: int = 3,
    duplicate_rate: float = 0.0,
    seed: int = 7,
) -> Path:
    """Four-group-example mapping plus CSVs at the requested scale.

    ``duplicate_rate`` is the fraction of rows drawn from a small pool of
    records that each repeat about twenty times.
    """
    root.mkdir(parents=True, exist_ok=True)
    mapping = root / "four_group_example.ttl"
    mapping.write_text(four_group_example_ttl())

    rng = random.Random(seed)

    def rows_with_duplicates(n: int, make_row) -> list[str]:
        n_dup = int(n * duplicate_rate)
        n_unique = n - n_dup
        rows = [make_row(i) for i in range(n_unique)]
        if n_dup:
            pool_size = max(1, n_dup // 20)
            pool = [make_row(n_unique + j) for j in range(pool_size)]
            rows.extend(rng.choice(pool) for _ in range(n_dup))
        rng.shuffle(rows)
        return rows

    keys = [f"k{i}" for i in range(max(2, min(50, rows_per_source // 2 or 2)))]

    def s1_row(i: int) -> str:
        return f"{i},n{i % 97},{rng.choice(keys)},{rng.choice(keys)},{rng.choice(keys)}"

    (root / "S1.csv").write_text(
        "id,name,k3,k4,k5\n" + "\n".join(rows_with_duplicates(rows_per_source, s1_row)) + "\n"
    )
    for name in ("S3", "S4", "S5"):
        def other_row(i: int) -> str:
            return f"{rng.choice(keys)},lbl{i % 89}"

        (root / f"{name}.csv").write_text(
            "key,label\n" + "\n".join(rows_with_duplicates(rows_per_source, other_row)) + "\n"
        )
    return mapping


# ---------------------------------------------------------------------------
# transit-feed style suite: 13 concept / 55 attribute / 73 single-source
# role / 12 multi-source role assertions over ten sources


def _gtfs_map(map_id: str, source: str, cls: str, attrs: int, ssrs: int,
              poms: list[str]) -> str:
    lines = [
        f"<#{map_id}>",
        f'    rml:logicalSource [ rml:source "{source}" ; rml:referenceFormulation ql:CSV ] ;',
        f'    rr:subjectMap [ rr:template "http://transit.example/{map_id.lower()}/{{id}}" ; '
        f"rr:class gtfs:{cls} ] ;",
    ]
    body: list[str] = []
    for i in range(attrs):
        body.append(
            "    rr:predicateObjectMap [\n"
            f"        rr:predicate gtfs:{map_id.lower()}Attr{i} ;\n"
            f'        rr:objectMap [ rml:reference "col{i}" ]\n'
            "    ]"
        )
    for i in range(ssrs):
        body.append(
            "    rr:predicateObjectMap [\n"
            f"        rr:predicate gtfs:{map_id.lower()}Ref{i} ;\n"
            f'        rr:objectMap [ rr:template "http://transit.example/x/{{col{i % 4}}}" ]\n'
            "    ]"
        )
    body.extend(poms)
    return "\n".join(lines) + "\n" + " ;\n".join(body) + " .\n"


def _join_pom(pred: str, parent: str, child_col: str = "id", parent_col: str = "id") -> str:
    return (
        "    rr:predicateObjectMap [\n"
        f"        rr:predicate gtfs:{pred} ;\n"
        "        rr:objectMap [\n"
        f"            rr:parentTriplesMap <#{parent}> ;\n"
        f'            rr:joinCondition [ rr:child "{child_col}" ; rr:parent "{parent_col}" ]\n'
        "        ]\n"
        "    ]"
    )


def gtfs_like_ttl() -> str:
    """Thirteen maps over ten transit-feed sources.

    Attribute and single-source role counts are spread so the totals hit
    55 and 73; the twelve joins include two same-source self joins, the
    kind that makes a shapes table expensive to process.
    """
    prefix = (
        "@prefix rr: <http://www.w3.org/ns/r2rml#> .\n"
        "@prefix rml: <http://semweb.mmlab.be/ns/rml#> .\n"
        "@prefix ql: <http://semweb.mmlab.be/ns/ql#> .\n"
        "@prefix gtfs: <http://transit.example/ns#> .\n\n"
    )
    maps = [
        # (map, source, class, attrs, ssrs, join poms)
        ("AgencyMap", "agency.csv", "Agency", 4, 6, []),
        ("CalendarMap", "calendar.csv", "CalendarRule", 4, 6, []),
        ("ServiceMap", "calendar.csv", "Service", 4, 5, []),
        ("CalendarDatesMap", "calendar_dates.csv", "CalendarDateRule", 4, 6, []),
        ("FeedInfoMap", "feed_info.csv", "Feed", 5, 6, []),
        ("FrequenciesMap", "frequencies.csv", "Frequency", 4, 5,
         [_join_pom("trip", "TripsMap")]),
        ("RoutesMap", "routes.csv", "Route", 5, 6,
         [_join_pom("agency", "AgencyMap")]),
        ("ShapesMap", "shapes.csv", "Shape", 2, 5, []),
        ("ShapePointMap", "shapes.csv", "ShapePoint", 2, 5,
         [_join_pom("nextShapePoint", "ShapePointMap"),
          _join_pom("previousShapePoint", "ShapePointMap")]),
        ("StopsMap", "stops.csv", "Stop", 5, 6, []),
        ("StationMap", "stops.csv", "Station", 4, 5, []),
        ("StopTimesMap", "stop_times.csv", "StopTime", 6, 6,
         [_join_pom("trip", "TripsMap"),
          _join_pom("previousTrip", "TripsMap"),
          _join_pom("stop", "StopsMap"),
          _join_pom("destinationStop", "StationMap")]),
        ("TripsMap", "trips.csv", "Trip", 6, 6,
         [_join_pom("route", "RoutesMap"),
          _join_pom("alternateRoute", "RoutesMap"),
          _join_pom("service", "ServiceMap"),
          _join_pom("shape", "ShapesMap")]),
    ]
    return prefix + "\n".join(_gtfs_map(*m) for m in maps)


def write_gtfs_like(root: Path) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    mapping = root / "gtfs_like.ttl"
    mapping.write_text(gtfs_like_ttl())
    return mapping


def write_duplicate_rate_source(
    path: Path, n_rows: int, duplicate_rate: float, copies: int = 20, seed: int = 3
) -> None:
    """Table whose duplicated records each repeat exactly ``copies`` times."""
    rng = random.Random(seed)
    n_dup = int(n_rows * duplicate_rate)
    n_unique = n_rows - n_dup
    pool = [f"dup{j}" for j in range(n_dup // copies)]
    rows = [f"u{i}" for i in range(n_unique)]
    for value in pool:
        rows.extend([value] * copies)
    rng.shuffle(rows)
    path.write_text("rid\n" + "\n".join(rows) + "\n")


def write_perf_suite(root: Path, rows_per_source: int = 100_000,
                     duplicate_rate: float = 0.25, seed: int = 5) -> Path:
    """Eight equal-weight sources that merge into four two-source groups.

    One attribute predicate repeats across two different groups, so the
    planner schedules exactly one dedup union.  The duplicate fraction of
    each row set consists of records repeated about twenty times each.
    """
    root.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    maps = []
    for i in range(1, 9):
        name = f"s{i}"
        n_dup = int(rows_per_source * duplicate_rate)
        n_unique = rows_per_source - n_dup
        pool = [f"{name}_d{j}" for j in range(max(1, n_dup // 20))]
        ids = [f"{name}_u{j}" for j in range(n_unique)]
        ids.extend(rng.choice(pool) for _ in range(n_dup))
        rng.shuffle(ids)
        lines = [f"{rid},val{hash(rid) % 997}" for rid in ids]
        (root / f"{name}.csv").write_text("id,v\n" + "\n".join(lines) + "\n")
        pred = "ex:shared" if i in (1, 3) else f"ex:attr{i}"
        maps.append(f"""\
<#Map{i}>
    rml:logicalSource [ rml:source "{name}.csv" ; rml:referenceFormulation ql:CSV ] ;
    rr:subjectMap [ rr:template "http://example.org/{name}/{{id}}" ; rr:class ex:K{i} ] ;
    rr:predicateObjectMap [
        rr:predicate {pred} ;
        rr:objectMap [ rml:reference "v" ]
    ] .
""")
    mapping = root / "perf_suite.ttl"
    mapping.write_text(
        "@prefix rr: <http://www.w3.org/ns/r2rml#> .\n"
        "@prefix rml: <http://semweb.mmlab.be/ns/rml#> .\n"
        "@prefix ql: <http://semweb.mmlab.be/ns/ql#> .\n"
        "@prefix ex: <http://example.org/ns#> .\n\n" + "\n".join(maps)
    )
    return mapping


def synthetic_planning_dis(n_groups: int, shared_every: int = 100):
    """In-memory system whose fixed-point partition has ``n_groups`` groups.

    Two single-assertion sources pair into each group; a sparse set of
    cross-pair shared predicates gives the plan graph a few edges.  No CSV
    files exist; the fixture is for timing the planning path only.
    """
    from kgplan.rml_model import (
        AssertionKind,
        DataIntegrationSystem,
        LogicalSource,
        MappingAssertion,
        TemplateFunction,
    )

    n_sources = 2 * n_groups
    half = n_sources // 2
    sources = {}
    assertions = {}
    predicates = set()
    for i in range(n_sources):
        sid = f"src{i:05d}.csv"
        sources[sid] = LogicalSource(id=sid, path=sid)
        map_id = f"Map{i:05d}"
        subject = TemplateFunction.from_template(f"{EX}e{i}/{{id}}")
        cls = f"{EX}Class{i}"
        predicates.add(cls)
        assertions[f"{map_id}/c0"] = MappingAssertion(
            id=f"{map_id}/c0", kind=AssertionKind.CONCEPT, subject=subject,
            predicate="http://www.w3.org/1999/02/22-rdf-syntax-ns#type",
            object=cls, sources=(sid,), triples_map=map_id,
        )
        if i % shared_every == 0 and i + half < n_sources:
            pred = f"{EX}shared{i}"
        elif i >= half and (i - half) % shared_every == 0:
            pred = f"{EX}shared{i - half}"
        else:
            pred = f"{EX}p{i}"
        predicates.add(pred)
        assertions[f"{map_id}/p0"] = MappingAssertion(
            id=f"{map_id}/p0", kind=AssertionKind.ATTRIBUTE, subject=subject,
            predicate=pred, object=TemplateFunction.from_reference("v"),
            sources=(sid,), triples_map=map_id,
        )
    return DataIntegrationSystem(
        ontology_predicates=frozenset(predicates),
        sources=sources,
        assertions=assertions,
    )
