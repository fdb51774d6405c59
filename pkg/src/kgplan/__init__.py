"""kgplan: planning and execution for declarative knowledge-graph creation.

Pipeline: parse mapping documents, partition the assertions by source,
connect groups that can emit the same predicates, schedule them as a
union tree with duplicate removal pushed down, then either emit a command
script for an external engine or materialize the graph internally.
"""

from .bushy_planner import BushyTree, Leaf, Node, UnionOp, generate_bushy_tree
from .cost_model import CostMode, LeafCostModel, SourceStats, delta, fu, phi
from .materializer import (
    ExecutionOptions,
    decode_base36,
    encode_base36,
    execute_tree,
    materialize_group,
    union_triples,
    write_canonical,
)
from .oracle import check_equivalence, enumerate_trees, optimal_plan, tree_count
from .partitioner import (
    AssertionGroup,
    GroupKind,
    PartitionSet,
    build_partitions,
    initial_partitions,
    merge_to_fixed_point,
)
from .plan_emitter import EngineProfile, PhysicalPlan, gamma, split_mappings
from .plan_graph import PlanGraph, build_plan_graph
from .rml_model import (
    AssertionKind,
    DataIntegrationSystem,
    MappingAssertion,
    extract_assertions,
    load_mapping_files,
    parse_mappings,
)

__version__ = "0.1.0"
