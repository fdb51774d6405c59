"""Built-in execution engine: CSV sources to canonical N-Triples.

Every leaf group materializes to one or more sorted, duplicate-free runs
(spilling to disk past a memory threshold, so large inputs degrade into an
external merge sort).  A duplicate-removing union merges runs into one; a
plain union just concatenates run lists, with an optional streaming scan
that proves the two sides really were disjoint.  Leaves can execute in
parallel worker processes; each leaf enforces its own deadline
cooperatively.

Intermediate triples can optionally be stored dictionary-compressed: each
resource is swapped for a Base36-encoded integer id, shrinking run files
and dedup sets.  Compression never changes the final output.
"""

from __future__ import annotations

import csv
import heapq
import itertools
import threading
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .bushy_planner import BushyTree, Leaf, UnionOp, fold_tree, iter_postorder, leaves
from .ntriples import RDF_TYPE, encode_iri_part, literal_term, triple_line
from .partitioner import AssertionGroup, PartitionSet
from .rml_model import (
    AssertionKind,
    DataIntegrationSystem,
    MappingAssertion,
    TemplateFunction,
    TemplateKind,
)

BASE36_ALPHABET = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"


class MaterializeError(Exception):
    pass


class MissingColumnError(MaterializeError):
    pass


class PlanSoundnessError(MaterializeError):
    """A no-dedup union received overlapping inputs; names the triple."""


class LeafTimeout(MaterializeError):
    pass


def encode_base36(n: int) -> str:
    """Canonical Base36 text of a nonnegative integer, digits 0-9 then A-Z."""
    if n < 0:
        raise ValueError("Base36 encoding is defined for nonnegative integers")
    if n == 0:
        return "0"
    digits: list[str] = []
    while n:
        n, rem = divmod(n, 36)
        digits.append(BASE36_ALPHABET[rem])
    return "".join(reversed(digits))


def decode_base36(text: str) -> int:
    if not text:
        raise ValueError("empty Base36 string")
    value = 0
    for ch in text:
        idx = BASE36_ALPHABET.find(ch)
        if idx < 0:
            raise ValueError(f"invalid Base36 digit {ch!r}")
        value = value * 36 + idx
    return value


class ResourceDictionary:
    """Append-only resource-to-id map; single writer behind a lock."""

    def __init__(self) -> None:
        self._ids: dict[str, int] = {}
        self._terms: list[str] = []
        self._lock = threading.Lock()

    def encode(self, term: str) -> str:
        with self._lock:
            idx = self._ids.get(term)
            if idx is None:
                idx = len(self._terms)
                self._ids[term] = idx
                self._terms.append(term)
        return encode_base36(idx)

    def decode(self, encoded: str) -> str:
        return self._terms[decode_base36(encoded)]

    def __len__(self) -> int:
        return len(self._terms)


# --------------------------------------------------------------------------
# triple sets as collections of sorted duplicate-free runs

Run = tuple[str, ...]


@dataclass
class TripleSet:
    """Triples as sorted runs; a single run means globally sorted and unique."""

    memory_runs: list[Run] = field(default_factory=list)
    file_runs: list[Path] = field(default_factory=list)
    cardinality: int = 0
    encoded: bool = False

    @property
    def sorted(self) -> bool:
        return (len(self.memory_runs) + len(self.file_runs)) <= 1

    def run_iterables(self) -> list:
        out: list = list(self.memory_runs)
        out.extend(_file_lines(p) for p in self.file_runs)
        return out

    def run_sequences(self) -> list:
        """Each run as an in-memory sequence; bulk-loads file runs."""
        out: list = list(self.memory_runs)
        for path in self.file_runs:
            text = path.read_text(encoding="utf-8")
            out.append(text.splitlines())
        return out

    def iter_lines(self):
        if self.sorted:
            for run in self.run_iterables():
                yield from run
        else:
            yield from _merge_runs(self.run_iterables())


def _file_lines(path: Path):
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            yield line.rstrip("\n")


def _merge_runs(runs: list):
    """K-way merge with duplicate elimination; runs must be sorted."""
    prev = None
    for line in heapq.merge(*runs):
        if line != prev:
            yield line
            prev = line


def _write_run(lines, path: Path) -> int:
    count = 0
    chunk: list[str] = []
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            chunk.append(line)
            count += 1
            if len(chunk) >= 65536:
                fh.write("\n".join(chunk))
                fh.write("\n")
                chunk.clear()
        if chunk:
            fh.write("\n".join(chunk))
            fh.write("\n")
    return count


def empty_set() -> TripleSet:
    return TripleSet()


def set_from_lines(lines, run_dir: Path | None, name: str,
                   memory_threshold: int = 1_000_000, encoded: bool = False) -> TripleSet:
    """Dedup ``lines`` into a TripleSet, spilling sorted runs past the threshold."""
    pending: set[str] = set()
    spills: list[Path] = []
    spill_counter = itertools.count()

    for line in lines:
        pending.add(line)
        if len(pending) >= memory_threshold:
            if run_dir is None:
                raise MaterializeError("memory threshold hit without a run directory")
            spill = run_dir / f"{name}.spill{next(spill_counter)}.nt"
            _write_run(sorted(pending), spill)
            spills.append(spill)
            pending.clear()

    if not spills:
        run = tuple(sorted(pending))
        return TripleSet(memory_runs=[run] if run else [],
                         cardinality=len(run), encoded=encoded)

    if pending:
        spill = run_dir / f"{name}.spill{next(spill_counter)}.nt"
        _write_run(sorted(pending), spill)
        spills.append(spill)
    out = run_dir / f"{name}.nt"
    count = _write_run(_merge_runs([_file_lines(p) for p in spills]), out)
    for p in spills:
        p.unlink()
    return TripleSet(file_runs=[out], cardinality=count, encoded=encoded)


def union_triples(op: UnionOp, left: TripleSet, right: TripleSet,
                  run_dir: Path | None = None, name: str = "union",
                  memory_threshold: int = 1_000_000,
                  verify_ndr: bool = True) -> TripleSet:
    """Combine two sets: sorted dedup merge under DR, concatenation under NDR.

    NDR inputs are planner-asserted disjoint; with ``verify_ndr`` a merge
    scan proves it and raises :class:`PlanSoundnessError` naming the first
    offending triple.
    """
    if left.encoded != right.encoded and (left.cardinality and right.cardinality):
        raise MaterializeError("cannot union encoded with unencoded triples")
    encoded = left.encoded or right.encoded
    if op is UnionOp.DR:
        total_in = left.cardinality + right.cardinality
        if run_dir is not None and total_in > memory_threshold:
            runs = left.run_iterables() + right.run_iterables()
            out = run_dir / f"{name}.nt"
            count = _write_run(_merge_runs(runs), out)
            return TripleSet(file_runs=[out], cardinality=count, encoded=encoded)
        sequences = left.run_sequences() + right.run_sequences()
        # sorting the concatenation lets timsort gallop through the sorted
        # runs; first-occurrence dedup then preserves the order
        ordered = sorted(itertools.chain.from_iterable(sequences))
        merged = tuple(dict.fromkeys(ordered))
        return TripleSet(memory_runs=[merged] if merged else [],
                         cardinality=len(merged), encoded=encoded)

    if verify_ndr:
        _check_disjoint(left, right, memory_threshold)
    return TripleSet(
        memory_runs=left.memory_runs + right.memory_runs,
        file_runs=left.file_runs + right.file_runs,
        cardinality=left.cardinality + right.cardinality,
        encoded=encoded,
    )


def _check_disjoint(left: TripleSet, right: TripleSet,
                    memory_threshold: int = 1_000_000) -> None:
    smaller, larger = (left, right) if left.cardinality <= right.cardinality else (right, left)
    if smaller.cardinality <= memory_threshold:
        probe = set()
        for run in smaller.run_sequences():
            probe.update(run)
        for run in larger.run_sequences():
            hits = probe.intersection(run)
            if hits:
                raise PlanSoundnessError(
                    "no-dedup union received overlapping inputs; "
                    f"offending triple: {min(hits)}"
                )
        return
    # both sides huge: streaming merge over the sorted runs instead
    tagged = [((line, 0) for line in run) for run in left.run_iterables()]
    tagged += [((line, 1) for line in run) for run in right.run_iterables()]
    prev_line: str | None = None
    prev_sides = 0
    for line, side in heapq.merge(*tagged, key=lambda t: t[0]):
        if line == prev_line:
            if (prev_sides | (1 << side)) == 0b11:
                raise PlanSoundnessError(
                    f"no-dedup union received overlapping inputs; offending triple: {line}"
                )
            prev_sides |= 1 << side
        else:
            prev_line = line
            prev_sides = 1 << side


# --------------------------------------------------------------------------
# CSV sources and assertion execution


# worker processes keep a few parsed tables across consecutive leaf tasks;
# keyed by resolved path with mtime/size so stale entries self-invalidate
_PROCESS_TABLE_CACHE: dict[str, tuple[tuple, list[str], list[tuple[str, ...]]]] = {}
_PROCESS_TABLE_CACHE_LIMIT = 6


class SourceCatalog:
    """Cached CSV tables: header list plus rows as tuples."""

    def __init__(self, dis: DataIntegrationSystem) -> None:
        self._dis = dis
        self._tables: dict[str, tuple[list[str], list[tuple[str, ...]]]] = {}

    def table(self, source_id: str) -> tuple[list[str], list[tuple[str, ...]]]:
        if source_id not in self._tables:
            source = self._dis.sources[source_id]
            path = Path(source.path)
            if not path.is_absolute() and self._dis.base_dir is not None:
                path = self._dis.base_dir / path
            try:
                stat = path.stat()
                stamp = (stat.st_mtime_ns, stat.st_size)
                cached = _PROCESS_TABLE_CACHE.get(str(path))
                if cached is not None and cached[0] == stamp:
                    self._tables[source_id] = (cached[1], cached[2])
                    return self._tables[source_id]
                with open(path, "r", encoding="utf-8", newline="") as fh:
                    reader = csv.reader(fh)
                    try:
                        header = next(reader)
                    except StopIteration:
                        raise MaterializeError(f"source {source_id} has no header row")
                    width = len(header)
                    rows = []
                    for row in reader:
                        if not row:
                            continue  # blank line
                        if len(row) < width:
                            row = row + [""] * (width - len(row))
                        rows.append(tuple(row))
            except OSError as exc:
                raise MaterializeError(f"cannot read source {source_id}: {exc}") from exc
            if len(_PROCESS_TABLE_CACHE) >= _PROCESS_TABLE_CACHE_LIMIT:
                _PROCESS_TABLE_CACHE.pop(next(iter(_PROCESS_TABLE_CACHE)))
            _PROCESS_TABLE_CACHE[str(path)] = (stamp, header, rows)
            self._tables[source_id] = (header, rows)
        return self._tables[source_id]

    def column_index(self, source_id: str, column: str, context: str) -> int:
        header, _ = self.table(source_id)
        try:
            return header.index(column)
        except ValueError:
            raise MissingColumnError(
                f"column {column!r} not in header of {source_id} ({context})"
            ) from None


class _Deadline:
    def __init__(self, seconds: float | None) -> None:
        self.expires = time.monotonic() + seconds if seconds else None

    def check(self) -> None:
        if self.expires is not None and time.monotonic() > self.expires:
            raise LeafTimeout("leaf execution exceeded its timeout")

    def sleep(self, seconds: float) -> None:
        end = time.monotonic() + seconds
        while time.monotonic() < end:
            self.check()
            time.sleep(min(0.05, max(0.0, end - time.monotonic())))


def _compile_iri(fn: TemplateFunction, catalog: SourceCatalog, src: str, context: str):
    """Row function producing an IRI string, or None on an empty cell."""
    if fn.kind is TemplateKind.CONSTANT:
        value = fn.parts[0].text
        return lambda row: value
    steps = [
        (True, catalog.column_index(src, p.text, context)) if p.is_reference else (False, p.text)
        for p in fn.parts
    ]

    def build(row: tuple[str, ...]) -> str | None:
        out: list[str] = []
        for is_ref, payload in steps:
            if is_ref:
                cell = row[payload]
                if cell == "":
                    return None
                out.append(encode_iri_part(cell))
            else:
                out.append(payload)
        return "".join(out)

    return build


def _generate_assertion(a: MappingAssertion, dis: DataIntegrationSystem,
                        catalog: SourceCatalog, deadline: _Deadline):
    """Yield canonical triple lines for one assertion."""
    src = a.sources[0]
    _, rows = catalog.table(src)
    subject_of = _compile_iri(a.subject, catalog, src, f"subject of {a.id}")

    if a.kind is AssertionKind.CONCEPT:
        class_term = f"<{a.object}>"
        for i, row in enumerate(rows):
            if i % 4096 == 0:
                deadline.check()
            s = subject_of(row)
            if s is not None:
                yield triple_line(s, RDF_TYPE, class_term)
        return

    if a.kind is AssertionKind.ATTRIBUTE:
        fn = a.object
        assert isinstance(fn, TemplateFunction)
        if fn.kind is TemplateKind.CONSTANT:
            const = literal_term(fn.parts[0].text)
            for i, row in enumerate(rows):
                if i % 4096 == 0:
                    deadline.check()
                s = subject_of(row)
                if s is not None:
                    yield triple_line(s, a.predicate, const)
            return
        col = catalog.column_index(src, fn.references[0], f"object of {a.id}")
        for i, row in enumerate(rows):
            if i % 4096 == 0:
                deadline.check()
            s = subject_of(row)
            cell = row[col]
            if s is not None and cell != "":
                yield triple_line(s, a.predicate, literal_term(cell))
        return

    if a.kind is AssertionKind.SINGLE_SOURCE_ROLE:
        fn = a.object
        assert isinstance(fn, TemplateFunction)
        object_of = _compile_iri(fn, catalog, src, f"object of {a.id}")
        for i, row in enumerate(rows):
            if i % 4096 == 0:
                deadline.check()
            s = subject_of(row)
            o = object_of(row)
            if s is not None and o is not None:
                yield triple_line(s, a.predicate, f"<{o}>")
        return

    if a.kind is AssertionKind.REFERENCED_SOURCE_ROLE:
        parent = dis.assertions[a.referenced_assertion]
        object_of = _compile_iri(parent.subject, catalog, src, f"parent subject via {a.id}")
        for i, row in enumerate(rows):
            if i % 4096 == 0:
                deadline.check()
            s = subject_of(row)
            o = object_of(row)
            if s is not None and o is not None:
                yield triple_line(s, a.predicate, f"<{o}>")
        return

    # multi-source role: hash join, build on the parent, probe with the child
    parent = dis.assertions[a.referenced_assertion]
    parent_src = a.sources[1]
    _, parent_rows = catalog.table(parent_src)
    parent_subject_of = _compile_iri(parent.subject, catalog, parent_src,
                                     f"parent subject via {a.id}")
    join = a.join
    assert join is not None
    parent_col = catalog.column_index(parent_src, join.parent_attribute, f"join of {a.id}")
    child_col = catalog.column_index(src, join.child_attribute, f"join of {a.id}")

    table: dict[str, list[str]] = {}
    for i, row in enumerate(parent_rows):
        if i % 4096 == 0:
            deadline.check()
        key = row[parent_col]
        if key == "":
            continue
        o = parent_subject_of(row)
        if o is None:
            continue
        bucket = table.setdefault(key, [])
        if o not in bucket:
            bucket.append(o)
    for i, row in enumerate(rows):
        if i % 4096 == 0:
            deadline.check()
        key = row[child_col]
        if key == "":
            continue
        matches = table.get(key)
        if not matches:
            continue
        s = subject_of(row)
        if s is None:
            continue
        for o in matches:
            yield triple_line(s, a.predicate, f"<{o}>")


def nested_loop_join_lines(a: MappingAssertion, dis: DataIntegrationSystem,
                           catalog: SourceCatalog) -> list[str]:
    """Independent join oracle: compare every child row with every parent row."""
    if a.kind is not AssertionKind.MULTI_SOURCE_ROLE:
        raise ValueError("nested-loop oracle applies to multi-source roles only")
    parent = dis.assertions[a.referenced_assertion]
    child_src, parent_src = a.sources
    _, child_rows = catalog.table(child_src)
    _, parent_rows = catalog.table(parent_src)
    subject_of = _compile_iri(a.subject, catalog, child_src, a.id)
    parent_subject_of = _compile_iri(parent.subject, catalog, parent_src, a.id)
    ccol = catalog.column_index(child_src, a.join.child_attribute, a.id)
    pcol = catalog.column_index(parent_src, a.join.parent_attribute, a.id)
    out = []
    for crow in child_rows:
        for prow in parent_rows:
            if crow[ccol] == "" or crow[ccol] != prow[pcol]:
                continue
            s = subject_of(crow)
            o = parent_subject_of(prow)
            if s is not None and o is not None:
                out.append(triple_line(s, a.predicate, f"<{o}>"))
    return sorted(set(out))


def materialize_group(
    group: AssertionGroup,
    dis: DataIntegrationSystem,
    catalog: SourceCatalog | None = None,
    run_dir: Path | None = None,
    memory_threshold: int = 1_000_000,
    timeout_seconds: float | None = None,
    delay_seconds: float = 0.0,
    dictionary: ResourceDictionary | None = None,
) -> TripleSet:
    """Execute one group (owned members plus concept copies), deduplicated."""
    catalog = catalog or SourceCatalog(dis)
    deadline = _Deadline(timeout_seconds)
    if delay_seconds:
        deadline.sleep(delay_seconds)

    def lines():
        for aid in sorted(group.executed_ids):
            deadline.check()
            for line in _generate_assertion(dis.assertions[aid], dis, catalog, deadline):
                if dictionary is not None:
                    s, p, o = _split_line(line)
                    yield " ".join(
                        (dictionary.encode(s), dictionary.encode(p), dictionary.encode(o))
                    )
                else:
                    yield line

    return set_from_lines(
        lines(), run_dir, _safe_name(group.id),
        memory_threshold=memory_threshold, encoded=dictionary is not None,
    )


def _split_line(line: str) -> tuple[str, str, str]:
    # canonical lines: "<s> <p> <o|literal> ." with no spaces inside IRIs;
    # literals may contain spaces, so split from the left only
    body = line[:-2]
    s, p, o = body.split(" ", 2)
    return s, p, o


def _safe_name(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "._-" else "_" for ch in name)


# --------------------------------------------------------------------------
# tree execution


@dataclass
class ExecutionOptions:
    run_dir: Path
    parallelism: int | None = None  # None: min(#leaves, logical CPUs)
    timeout_seconds: float | None = None
    memory_threshold: int = 1_000_000
    verify_ndr: bool = True
    compress: bool = False
    leaf_delays: dict[str, float] = field(default_factory=dict)

    def resolved_parallelism(self, n_leaves: int) -> int:
        import os

        wanted = self.parallelism or os.cpu_count() or 1
        return max(1, min(wanted, n_leaves))


@dataclass
class ExecutionReport:
    leaf_seconds: dict[str, float] = field(default_factory=dict)
    leaf_status: dict[str, str] = field(default_factory=dict)
    leaf_triples: dict[str, int] = field(default_factory=dict)
    union_seconds: list[tuple[str, str, float]] = field(default_factory=list)
    peak_parallelism: int = 1
    completion_pct: float = 100.0
    total_seconds: float = 0.0

    @property
    def union_phase_seconds(self) -> float:
        return sum(seconds for _, _, seconds in self.union_seconds)

    def to_json_dict(self) -> dict:
        return {
            "leaf_seconds": dict(sorted(self.leaf_seconds.items())),
            "leaf_status": dict(sorted(self.leaf_status.items())),
            "leaf_triples": dict(sorted(self.leaf_triples.items())),
            "union_seconds": [
                {"node": n, "op": op, "seconds": s} for n, op, s in self.union_seconds
            ],
            "union_phase_seconds": self.union_phase_seconds,
            "peak_parallelism": self.peak_parallelism,
            "completion_pct": self.completion_pct,
            "total_seconds": self.total_seconds,
        }


@dataclass
class ExecutionResult:
    triples: TripleSet
    report: ExecutionReport


def _leaf_task(dis: DataIntegrationSystem, group: AssertionGroup, run_dir: str,
               memory_threshold: int, timeout_seconds: float | None,
               delay_seconds: float) -> tuple[str, str, list[str], int, float, float]:
    """Worker-process entry: (gid, status, run files, count, start, end).

    Timestamps are CLOCK_MONOTONIC, comparable across local processes.
    """
    started = time.monotonic()
    try:
        result = materialize_group(
            group, dis,
            run_dir=Path(run_dir),
            memory_threshold=memory_threshold,
            timeout_seconds=timeout_seconds,
            delay_seconds=delay_seconds,
        )
    except LeafTimeout:
        return group.id, "timeout", [], 0, started, time.monotonic()
    if result.memory_runs:
        # cross-process handoff goes through files
        path = Path(run_dir) / f"{_safe_name(group.id)}.nt"
        count = _write_run(result.iter_lines(), path)
        return group.id, "ok", [str(path)], count, started, time.monotonic()
    return group.id, "ok", [str(p) for p in result.file_runs],\
        result.cardinality, started, time.monotonic()


def execute_tree(
    tree: BushyTree,
    dis: DataIntegrationSystem,
    partition: PartitionSet,
    options: ExecutionOptions,
) -> ExecutionResult:
    """Run leaves concurrently, then fold unions bottom-up.

    A leaf that exceeds its deadline contributes nothing; the rest of the
    tree still executes, so the output is the union of the surviving
    subtrees and the report carries the completion percentage.
    """
    options.run_dir.mkdir(parents=True, exist_ok=True)
    report = ExecutionReport()
    started = time.monotonic()
    leaf_ids = leaves(tree)
    results: dict[str, TripleSet] = {}
    spans: list[tuple[float, float]] = []

    workers = options.resolved_parallelism(len(leaf_ids))
    dictionary = ResourceDictionary() if options.compress else None

    if workers == 1 or options.compress:
        # compressed runs share one dictionary, so leaves stay in-process
        for gid in leaf_ids:
            t0 = time.monotonic()
            try:
                ts = materialize_group(
                    partition.by_id(gid), dis,
                    run_dir=options.run_dir,
                    memory_threshold=options.memory_threshold,
                    timeout_seconds=options.timeout_seconds,
                    delay_seconds=options.leaf_delays.get(gid, 0.0),
                    dictionary=dictionary,
                )
                results[gid] = ts
                report.leaf_status[gid] = "ok"
                report.leaf_triples[gid] = ts.cardinality
            except LeafTimeout:
                results[gid] = empty_set()
                report.leaf_status[gid] = "timeout"
                report.leaf_triples[gid] = 0
            report.leaf_seconds[gid] = time.monotonic() - t0
            spans.append((t0, time.monotonic()))
    else:
        results.update(_run_leaves_pipelined(tree, dis, partition, options,
                                             workers, report, spans))

    ok = sum(1 for s in report.leaf_status.values() if s == "ok")
    report.completion_pct = 100.0 * ok / len(leaf_ids)
    report.peak_parallelism = _peak_overlap(spans)

    node_counter = itertools.count()

    def union_value(node, left: TripleSet, right: TripleSet) -> TripleSet:
        node_id = f"n{next(node_counter)}"
        t0 = time.monotonic()
        out = union_triples(
            node.op, left, right,
            run_dir=options.run_dir, name=node_id,
            memory_threshold=options.memory_threshold,
            verify_ndr=options.verify_ndr,
        )
        report.union_seconds.append((node_id, node.op.value, time.monotonic() - t0))
        return out

    if "__root__" in results:
        final = results["__root__"]
    else:
        final = fold_tree(tree, lambda leaf: results[leaf.group], union_value)
    if dictionary is not None:
        final = _decode_set(final, dictionary, options.run_dir)
    report.total_seconds = time.monotonic() - started
    return ExecutionResult(triples=final, report=report)


def _run_leaves_pipelined(tree, dis, partition, options: ExecutionOptions,
                          workers: int, report: ExecutionReport,
                          spans: list) -> dict[str, TripleSet]:
    """Worker-pool leaves with unions folded as soon as both inputs exist.

    Union node ids follow post-order positions, so reports stay stable no
    matter which leaf finishes first.  Returns leaf results plus the final
    set under the ``__root__`` key.
    """
    from concurrent.futures import FIRST_COMPLETED, wait

    # longest-leaf-first keeps the makespan low when leaves outnumber
    # workers; source byte size stands in for the leaf's work
    def size_estimate(gid: str) -> int:
        total = 0
        for aid in partition.by_id(gid).executed_ids:
            for sid in dis.assertions[aid].sources:
                path = Path(dis.sources[sid].path)
                if not path.is_absolute() and dis.base_dir is not None:
                    path = dis.base_dir / path
                try:
                    total += path.stat().st_size
                except OSError:
                    pass
        return total

    order = list(iter_postorder(tree))
    union_ids = {id(n): f"n{i}" for i, n in
                 enumerate(n for n in order if not isinstance(n, Leaf))}
    parents: dict[int, object] = {}
    for node in order:
        if not isinstance(node, Leaf):
            parents[id(node.left)] = node
            parents[id(node.right)] = node
    values: dict[int, TripleSet] = {}
    results: dict[str, TripleSet] = {}
    leaf_nodes = {n.group: n for n in order if isinstance(n, Leaf)}

    def bubble(node) -> None:
        while True:
            parent = parents.get(id(node))
            if parent is None:
                return
            left, right = values.get(id(parent.left)), values.get(id(parent.right))
            if left is None or right is None:
                return
            node_id = union_ids[id(parent)]
            t0 = time.monotonic()
            out = union_triples(
                parent.op, left, right,
                run_dir=options.run_dir, name=node_id,
                memory_threshold=options.memory_threshold,
                verify_ndr=options.verify_ndr,
            )
            report.union_seconds.append((node_id, parent.op.value, time.monotonic() - t0))
            values[id(parent)] = out
            values.pop(id(parent.left), None)
            values.pop(id(parent.right), None)
            node = parent

    ordered = sorted(leaf_nodes, key=lambda gid: (-size_estimate(gid), gid))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {
            pool.submit(
                _leaf_task, dis, partition.by_id(gid), str(options.run_dir),
                options.memory_threshold, options.timeout_seconds,
                options.leaf_delays.get(gid, 0.0),
            )
            for gid in ordered
        }
        while futures:
            done, futures = wait(futures, return_when=FIRST_COMPLETED)
            for fut in done:
                rid, status, files, count, t0, t1 = fut.result()
                report.leaf_status[rid] = status
                report.leaf_seconds[rid] = t1 - t0
                report.leaf_triples[rid] = count
                ts = TripleSet(
                    file_runs=[Path(f) for f in files], cardinality=count
                ) if status == "ok" else empty_set()
                results[rid] = ts
                spans.append((t0, t1))
                leaf_node = leaf_nodes[rid]
                values[id(leaf_node)] = ts
                bubble(leaf_node)

    report.union_seconds.sort(key=lambda entry: entry[0])
    results["__root__"] = values[id(tree)]
    return results


def _decode_set(ts: TripleSet, dictionary: ResourceDictionary, run_dir: Path) -> TripleSet:
    decoded = []
    for line in ts.iter_lines():
        s, p, o = line.split(" ", 2)
        decoded.append(f"{dictionary.decode(s)} {dictionary.decode(p)} {dictionary.decode(o)} .")
    return set_from_lines(decoded, run_dir, "decoded")


def _peak_overlap(spans: list[tuple[float, float]]) -> int:
    events: list[tuple[float, int]] = []
    for start, end in spans:
        events.append((start, 1))
        events.append((end, -1))
    peak = current = 0
    for _, delta in sorted(events, key=lambda e: (e[0], e[1])):
        current += delta
        peak = max(peak, current)
    return max(peak, 1)


def write_canonical(ts: TripleSet, path: Path) -> int:
    """Write the sorted duplicate-free form; the plan-equivalence artifact."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if ts.encoded:
        raise MaterializeError("decode before writing canonical output")
    return _write_run(_merge_runs(ts.run_iterables()), path)


def unpartitioned_group(dis: DataIntegrationSystem) -> AssertionGroup:
    """Single group over all assertions: the no-partition baseline."""
    from .partitioner import GroupKind, _units

    members = frozenset(dis.assertions)
    footprint = frozenset(s for a in dis.assertions.values() for s in a.sources)
    return AssertionGroup(
        id="ALL",
        kind=GroupKind.MERGED,
        members=members,
        source_footprint=footprint,
        defined_predicates=_units(dis, members),
    )


__all__ = [
    "BASE36_ALPHABET",
    "ExecutionOptions",
    "ExecutionReport",
    "ExecutionResult",
    "LeafTimeout",
    "MaterializeError",
    "MissingColumnError",
    "PlanSoundnessError",
    "ResourceDictionary",
    "SourceCatalog",
    "TripleSet",
    "decode_base36",
    "encode_base36",
    "execute_tree",
    "materialize_group",
    "nested_loop_join_lines",
    "set_from_lines",
    "union_triples",
    "unpartitioned_group",
    "write_canonical",
]
