"""Command line entry point: plan, emit, run, verify, explain.

Exit codes: 0 success, 1 usage, 2 input error, 3 execution error,
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import bushy_planner, materializer, oracle, plan_emitter, plan_graph, partitioner
from .bushy_planner import BushyTree, Leaf, Node, UnionOp
from .cost_model import CostMode, LeafCostModel, SourceStats, fu
from .materializer import ExecutionOptions, execute_tree, unpartitioned_group, write_canonical
from .partitioner import AssertionGroup, GroupKind, PartitionSet
from .plan_emitter import EmitError, EngineProfile
from .rml_model import (
    DataIntegrationSystem,
    MappingError,
    TurtleSyntaxError,
    load_mapping_files,
    validate_dis,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_EXECUTION = 3
EXIT_VERIFICATION = 4


@dataclass
class RunConfig:
    mapping_paths: list[Path] = field(default_factory=list)
    source_root: Path | None = None
    engine: str = "internal"
    output: Path = Path("kg.nt")
    run_dir: Path = Path("runs")
    timeout_seconds: int = 18000
    parallelism: int | None = None  # None: min(#leaves, logical CPUs)
    compress: bool = False
    cost_mode: CostMode = CostMode.ABSTRACT_OPS
    seed: int = 0
    no_partition: bool = False
    engines: dict[str, EngineProfile] = field(default_factory=dict)
    leaf_delays: dict[str, float] = field(default_factory=dict)

    def validate(self) -> None:
        if self.timeout_seconds <= 0:
            raise ValueError("timeout_seconds must be positive")
        if self.parallelism is not None and self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")


def load_config(path: Path | None) -> RunConfig:
    config = RunConfig()
    if path is None:
        return config
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    run = data.get("run", {})
    if "source_root" in run:
        config.source_root = Path(run["source_root"])
    if "output" in run:
        config.output = Path(run["output"])
    if "run_dir" in run:
        config.run_dir = Path(run["run_dir"])
    config.timeout_seconds = int(run.get("timeout_seconds", config.timeout_seconds))
    if "parallelism" in run:
        config.parallelism = int(run["parallelism"])
    config.compress = bool(run.get("compress", config.compress))
    config.seed = int(run.get("seed", config.seed))
    if "cost_mode" in run:
        config.cost_mode = CostMode(run["cost_mode"])
    for name, section in data.get("engine", {}).items():
        config.engines[name] = EngineProfile(
            name=name,
            command_template=section["command_template"],
            timeout_seconds=int(section.get("timeout_seconds", config.timeout_seconds)),
            config_file=section.get("config_file", ""),
        )
    return config


# --------------------------------------------------------------------------
# plan artifact (de)serialization so emit/run can reuse a stored plan


def tree_to_json(tree: BushyTree) -> dict:
    return bushy_planner.fold_tree(
        tree,
        lambda leaf: {"leaf": leaf.group},
        lambda node, left, right: {"op": node.op.value, "left": left, "right": right},
    )


def tree_from_json(data: dict) -> BushyTree:
    # iterative rebuild; stored plans can be arbitrarily deep chains
    done: dict[int, BushyTree] = {}
    stack: list[tuple[dict, bool]] = [(data, False)]
    while stack:
        entry, expanded = stack.pop()
        if "leaf" in entry:
            done[id(entry)] = Leaf(entry["leaf"])
        elif not expanded:
            stack.append((entry, True))
            stack.append((entry["right"], False))
            stack.append((entry["left"], False))
        else:
            done[id(entry)] = Node(
                UnionOp(entry["op"]),
                done.pop(id(entry["left"])),
                done.pop(id(entry["right"])),
            )
    return done[id(data)]


def groups_to_json(p: PartitionSet) -> dict:
    return {
        "groups": [
            {
                "id": g.id,
                "kind": g.kind.value,
                "members": sorted(g.members),
                "copied_concepts": sorted(g.copied_concepts),
                "source_footprint": sorted(g.source_footprint),
                "defined_predicates": sorted(map(list, g.defined_predicates)),
                "copied_units": sorted(map(list, g.copied_units)),
                "inter_pairs": sorted(map(list, g.inter_pairs)),
            }
            for g in p.sorted_groups()
        ],
        "notes": list(p.notes),
        "theorem1_violations": list(p.theorem1_violations),
    }


def groups_from_json(data: dict) -> PartitionSet:
    groups = {}
    for entry in data["groups"]:
        g = AssertionGroup(
            id=entry["id"],
            kind=GroupKind(entry["kind"]),
            members=frozenset(entry["members"]),
            source_footprint=frozenset(entry["source_footprint"]),
            defined_predicates=frozenset(tuple(u) for u in entry["defined_predicates"]),
            copied_concepts=frozenset(entry["copied_concepts"]),
            copied_units=frozenset(tuple(u) for u in entry["copied_units"]),
            inter_pairs=frozenset(tuple(p) for p in entry["inter_pairs"]),
        )
        groups[g.id] = g
    return PartitionSet(
        groups=groups,
        notes=tuple(data.get("notes", ())),
        theorem1_violations=tuple(data.get("theorem1_violations", ())),
    )


# --------------------------------------------------------------------------
# shared pipeline helpers


def _load_system(config: RunConfig) -> DataIntegrationSystem:
    if not config.mapping_paths:
        raise MappingError("no mapping files given")
    dis = load_mapping_files(config.mapping_paths)
    if config.source_root is not None:
        resolved = {}
        for sid, src in dis.sources.items():
            resolved[sid] = type(src)(
                id=src.id, path=str(config.source_root / Path(src.path).name),
                format=src.format, attributes=src.attributes,
            )
        dis.sources = resolved
    problems = validate_dis(dis)
    if problems:
        raise MappingError("; ".join(problems))
    return dis


def _plan(dis: DataIntegrationSystem, config: RunConfig):
    if config.no_partition:
        group = unpartitioned_group(dis)
        partition = PartitionSet(groups={group.id: group})
    else:
        partition = partitioner.build_partitions(dis)
    graph = plan_graph.build_plan_graph(partition)
    tree = bushy_planner.generate_bushy_tree(graph)
    return partition, graph, tree


def _source_stats(dis: DataIntegrationSystem) -> dict[str, SourceStats] | None:
    stats: dict[str, SourceStats] = {}
    for sid, src in dis.sources.items():
        path = Path(src.path)
        if not path.is_absolute() and dis.base_dir is not None:
            path = dis.base_dir / path
        try:
            with open(path, "r", encoding="utf-8", newline="") as fh:
                rows = sum(1 for _ in csv.reader(fh)) - 1
        except OSError:
            return None
        stats[sid] = SourceStats(rows=max(rows, 0))
    return stats


def _write_plan_artifacts(config: RunConfig, partition, graph, tree,
                          dis: DataIntegrationSystem) -> dict:
    run_dir = config.run_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "partitions.json").write_text(
        json.dumps(groups_to_json(partition), indent=2, sort_keys=True) + "\n"
    )
    (run_dir / "graph.dot").write_text(plan_graph.to_dot(graph))
    (run_dir / "tree.dot").write_text(bushy_planner.tree_to_dot(tree))
    (run_dir / "tree.json").write_text(
        json.dumps(tree_to_json(tree), indent=2, sort_keys=True) + "\n"
    )

    stats = _source_stats(dis)
    if stats is not None:
        estimate = fu(tree, partition, dis, stats, LeafCostModel(mode=config.cost_mode))
        cost_payload = {
            "available": True,
            "total": estimate.value,
            "breakdown": dict(sorted(estimate.breakdown.items())),
        }
    else:
        cost_payload = {"available": False, "reason": "source files not readable"}
    (run_dir / "cost.json").write_text(
        json.dumps(cost_payload, indent=2, sort_keys=True) + "\n"
    )
    return cost_payload


# --------------------------------------------------------------------------
# subcommands


def cmd_plan(config: RunConfig, show_cost: bool = False) -> int:
    dis = _load_system(config)
    partition, graph, tree = _plan(dis, config)
    cost_payload = _write_plan_artifacts(config, partition, graph, tree, dis)

    print(f"groups: {len(partition.groups)}")
    for line in partitioner.describe_groups(partition):
        print("  " + line)
    for note in partition.notes:
        print(f"note: {note}")
    counts = bushy_planner.count_ops(tree)
    print(f"tree: {counts[UnionOp.DR]} DR, {counts[UnionOp.NDR]} NDR")
    print(bushy_planner.render_tree(tree), end="")
    if show_cost:
        if not cost_payload.get("available"):
            print("cost: unavailable (source files not readable)")
        else:
            print(f"{'node':50} {'cost':>14}")
            for node_id, value in sorted(cost_payload["breakdown"].items()):
                print(f"{node_id:50} {value:14.2f}")
            print(f"{'total':50} {cost_payload['total']:14.2f}")
    print(f"artifacts: {config.run_dir}")
    return EXIT_OK


def cmd_emit(config: RunConfig) -> int:
    if config.engine == "internal":
        print("emit targets an external engine; use `run` for internal execution",
              file=sys.stderr)
        return EXIT_USAGE
    profile = config.engines.get(config.engine)
    if profile is None:
        print(f"unknown engine profile {config.engine!r}", file=sys.stderr)
        return EXIT_INPUT

    dis = _load_system(config)
    partition, graph, tree = _plan(dis, config)
    _write_plan_artifacts(config, partition, graph, tree, dis)

    maps_dir = config.run_dir / "maps"
    maps_dir.mkdir(parents=True, exist_ok=True)
    documents = plan_emitter.split_mappings(partition, dis)
    mapping_files = {}
    for gid, text in sorted(documents.items()):
        path = maps_dir / f"{plan_emitter._safe_name(gid)}.ttl"
        path.write_text(text)
        mapping_files[gid] = str(path)

    plan = plan_emitter.gamma(
        tree, profile, mapping_files,
        run_dir=config.run_dir / "intermediate",
        final_output=config.output,
    )
    script_path = config.run_dir / "plan.sh"
    script_path.write_text(plan.script)
    script_path.chmod(0o755)
    print(f"script: {script_path}")
    print(f"engine calls: {plan.engine_calls}, sort -u: {plan.sort_nodes}, cat: {plan.cat_nodes}")
    return EXIT_OK


def cmd_run(config: RunConfig) -> int:
    if config.engine != "internal":
        print("run uses the internal engine; use `emit` for external engines",
              file=sys.stderr)
        return EXIT_USAGE
    dis = _load_system(config)
    partition, graph, tree = _plan(dis, config)
    _write_plan_artifacts(config, partition, graph, tree, dis)

    options = ExecutionOptions(
        run_dir=config.run_dir / "intermediate",
        parallelism=config.parallelism,
        timeout_seconds=config.timeout_seconds,
        compress=config.compress,
        leaf_delays=config.leaf_delays,
    )
    try:
        result = execute_tree(tree, dis, partition, options)
    except materializer.MaterializeError as exc:
        print(f"execution failed: {exc}", file=sys.stderr)
        return EXIT_EXECUTION

    count = write_canonical(result.triples, config.output)
    payload = result.report.to_json_dict()
    payload["triples_written"] = count
    payload["output"] = str(config.output)
    (config.run_dir / "report.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )
    print(f"kg: {config.output} ({count} triples)")
    print(f"completion: {result.report.completion_pct:.1f}%")
    if result.report.completion_pct == 0.0:
        return EXIT_EXECUTION
    return EXIT_OK


def cmd_verify(config: RunConfig, max_groups: int, execute: bool) -> int:
    dis = _load_system(config)
    stats = _source_stats(dis)
    if stats is None:
        print("verification needs readable source files", file=sys.stderr)
        return EXIT_INPUT
    config.run_dir.mkdir(parents=True, exist_ok=True)
    try:
        report = oracle.verify_system(
            dis, config.run_dir / "verify", stats, max_n=max_groups, execute=execute
        )
    except oracle.PlanSpaceTooLarge as exc:
        print(f"verification refused: {exc}", file=sys.stderr)
        return EXIT_INPUT
    payload = report.to_json_dict()
    (config.run_dir / "verify.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )
    print(json.dumps(payload, indent=2, sort_keys=True))
    failed = not report.equivalent or (report.theorem1_conditions_met and report.gap != 0.0)
    return EXIT_VERIFICATION if failed else EXIT_OK


def cmd_explain(config: RunConfig, what: str) -> int:
    dis = _load_system(config)
    partition, graph, tree = _plan(dis, config)
    if what == "partitions":
        for line in partitioner.describe_groups(partition):
            print(line)
        for note in partition.notes:
            print(f"note: {note}")
    elif what == "graph":
        print(plan_graph.to_dot(graph), end="")
    else:
        print(bushy_planner.render_tree(tree), end="")
        print(bushy_planner.tree_to_dot(tree), end="")
    return EXIT_OK


# --------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgplan",
        description="Plan and execute declarative knowledge-graph creation over CSV sources.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--mapping", action="append", default=[], type=Path,
                       help="mapping document (.ttl); repeatable")
        p.add_argument("--config", type=Path, help="TOML config file")
        p.add_argument("--source-root", type=Path, help="directory overriding source paths")
        p.add_argument("--run-dir", type=Path, help="artifact directory")
        p.add_argument("--no-partition", action="store_true",
                       help="run every assertion as one group (baseline)")

    p_plan = sub.add_parser("plan", help="partition, build the graph and the union tree")
    common(p_plan)
    p_plan.add_argument("--cost", action="store_true", help="print the cost breakdown")

    p_emit = sub.add_parser("emit", help="emit an external-engine command script")
    common(p_emit)
    p_emit.add_argument("--engine", required=True, help="engine profile name from the config")
    p_emit.add_argument("--output", type=Path, help="final knowledge-graph file")

    p_run = sub.add_parser("run", help="execute the plan with the internal engine")
    common(p_run)
    p_run.add_argument("--output", type=Path, help="final knowledge-graph file")
    p_run.add_argument("--parallelism", type=int)
    p_run.add_argument("--timeout", type=int, help="per-leaf timeout in seconds")
    p_run.add_argument("--compress", action="store_true",
                       help="dictionary-compress intermediate triples")
    p_run.add_argument("--inject-delay", action="append", default=[],
                       metavar="GROUP=SECONDS", help="testing aid: delay one leaf")

    p_verify = sub.add_parser("verify", help="exhaustive plan-space verification")
    common(p_verify)
    p_verify.add_argument("--max-groups", type=int, default=oracle.DEFAULT_ENUMERATION_LIMIT)
    p_verify.add_argument("--no-execute", action="store_true",
                          help="skip plan executions, check costs only")

    p_explain = sub.add_parser("explain", help="print planning artifacts")
    common(p_explain)
    view = p_explain.add_mutually_exclusive_group(required=True)
    view.add_argument("--partitions", action="store_const", const="partitions", dest="what")
    view.add_argument("--graph", action="store_const", const="graph", dest="what")
    view.add_argument("--tree", action="store_const", const="tree", dest="what")

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config)
    config.mapping_paths = list(args.mapping)
    if args.source_root is not None:
        config.source_root = args.source_root
    if args.run_dir is not None:
        config.run_dir = args.run_dir
    config.no_partition = bool(args.no_partition)
    if getattr(args, "engine", None):
        config.engine = args.engine
    if getattr(args, "output", None):
        config.output = args.output
    if getattr(args, "parallelism", None):
        config.parallelism = args.parallelism
    if getattr(args, "timeout", None):
        config.timeout_seconds = args.timeout
    if getattr(args, "compress", False):
        config.compress = True
    for item in getattr(args, "inject_delay", []):
        group, _, seconds = item.partition("=")
        if not seconds:
            raise ValueError(f"bad --inject-delay {item!r}; expected GROUP=SECONDS")
        config.leaf_delays[group] = float(seconds)
    config.validate()
    return config


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK

    try:
        config = _config_from_args(args)
    except (ValueError, KeyError, OSError, EmitError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "plan":
            return cmd_plan(config, show_cost=args.cost)
        if args.command == "emit":
            return cmd_emit(config)
        if args.command == "run":
            return cmd_run(config)
        if args.command == "verify":
            return cmd_verify(config, max_groups=args.max_groups, execute=not args.no_execute)
        if args.command == "explain":
            return cmd_explain(config, what=args.what)
    except (TurtleSyntaxError, MappingError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except materializer.MaterializeError as exc:
        print(f"execution error: {exc}", file=sys.stderr)
        return EXIT_EXECUTION
    parser.error(f"unknown command {args.command}")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
