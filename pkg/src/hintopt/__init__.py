"""Query plan hinting toolkit.

Models simplified plan trees, converts them to and from optimizer hint
text, enumerates and counts plan spaces, summarizes catalog statistics,
searches candidate plans with planner knobs or a generation backend,
labels candidates by measured latency, compiles fine-tuning datasets, and
selects plans through pluggable strategies.
"""

from __future__ import annotations

from .backends import GenerationClient, HttpGenerationClient, MockGenerationClient
from .candidate_search import (
    ARM_COUNT,
    BaoArm,
    CandidateEntry,
    CandidateSet,
    Provenance,
    ProvenanceKind,
    SamplingPolicy,
    all_bao_arms,
    default_arm_subset,
    generate_by_llm,
    search_by_arms,
)
from .catalog_stats import (
    CatalogSnapshot,
    ColumnStats,
    QueryStats,
    TableStats,
    export_snapshot,
    ingest_snapshot,
    obtain_statistics,
    render_stats,
    validate_snapshot,
)
from .config import RunConfig, load_config
from .dataset_builder import (
    DatasetRecord,
    QueryTemplate,
    RecordKind,
    build_generative_record,
    build_selective_record,
    extend_query,
    fill_template,
    read_records,
    split_query_ids,
    split_records,
    sql_literal,
    write_records,
)
from .dbms import (
    ExecutionLogEntry,
    ExecutionResult,
    FixtureClient,
    FixtureStore,
    KnobVector,
    LivePostgresClient,
    fixture_key,
    normalize_sql,
    parse_explain_json,
)
from .errors import (
    AllCandidatesTimedOutError,
    CapExceededError,
    ConfigError,
    ExecutionError,
    FixtureMissError,
    GenerationBackendError,
    HintOptError,
    HintParseError,
    InconsistentHintsError,
    InvalidExtensionError,
    LengthMismatchError,
    MalformedPlanError,
    MissingScanNodeError,
    MissingTableError,
    NoFillValuesError,
    PlannerError,
    SnapshotParseError,
    SqlParseError,
    UnknownOperatorError,
)
from .hint_codec import HintSet, hints_to_plan, parse_hints, render_hints, transform_plan
from .label_harness import (
    DEFAULT_GLOBAL_TIMEOUT_MS,
    CandidateSummary,
    LabeledQuery,
    append_labels,
    collect_labels,
    read_labels,
    summarize_candidates,
)
from .plan_model import (
    JoinNode,
    JoinType,
    PlanNode,
    PlanTree,
    ScanNode,
    ScanType,
    SimplifiedPlan,
    simplify,
)
from .plan_space import (
    ShapePolicy,
    SpaceSpec,
    brute_force_optimal,
    count_plans,
    count_tree_shapes,
    count_unordered_shapes,
    enumerate_plans,
)
from .prompts import (
    PromptTemplates,
    build_extension_prompt,
    build_generative_prompt,
    build_selective_prompt,
    number_candidates,
    render_schema,
)
from .selector import (
    PipelineResult,
    SelectionOutcome,
    SelectionStrategy,
    latency_cost_fn,
    planner_cost_fn,
    run_combined_pipeline,
    run_generative_pipeline,
    run_selective_pipeline,
    select_by_cost,
    select_listwise_llm,
    select_majority,
    select_oracle,
    selection_accuracy,
)
from .sqlutil import TableRef, column_refs, replace_where, table_refs, where_conjuncts

__version__ = "0.1.0"

__all__ = [
    "ARM_COUNT",
    "AllCandidatesTimedOutError",
    "BaoArm",
    "CandidateEntry",
    "CandidateSet",
    "CandidateSummary",
    "CapExceededError",
    "CatalogSnapshot",
    "ColumnStats",
    "ConfigError",
    "DEFAULT_GLOBAL_TIMEOUT_MS",
    "DatasetRecord",
    "ExecutionError",
    "ExecutionLogEntry",
    "ExecutionResult",
    "FixtureClient",
    "FixtureMissError",
    "FixtureStore",
    "GenerationBackendError",
    "GenerationClient",
    "HintOptError",
    "HintParseError",
    "HintSet",
    "HttpGenerationClient",
    "InconsistentHintsError",
    "InvalidExtensionError",
    "JoinNode",
    "JoinType",
    "KnobVector",
    "LabeledQuery",
    "LengthMismatchError",
    "LivePostgresClient",
    "MalformedPlanError",
    "MissingScanNodeError",
    "MissingTableError",
    "MockGenerationClient",
    "NoFillValuesError",
    "PipelineResult",
    "PlanNode",
    "PlanTree",
    "PlannerError",
    "PromptTemplates",
    "Provenance",
    "ProvenanceKind",
    "QueryStats",
    "QueryTemplate",
    "RecordKind",
    "RunConfig",
    "SamplingPolicy",
    "ScanNode",
    "ScanType",
    "SelectionOutcome",
    "SelectionStrategy",
    "ShapePolicy",
    "SimplifiedPlan",
    "SnapshotParseError",
    "SpaceSpec",
    "SqlParseError",
    "TableRef",
    "TableStats",
    "UnknownOperatorError",
    "all_bao_arms",
    "append_labels",
    "brute_force_optimal",
    "build_extension_prompt",
    "build_generative_prompt",
    "build_generative_record",
    "build_selective_prompt",
    "build_selective_record",
    "collect_labels",
    "column_refs",
    "count_plans",
    "count_tree_shapes",
    "count_unordered_shapes",
    "default_arm_subset",
    "enumerate_plans",
    "export_snapshot",
    "extend_query",
    "fill_template",
    "fixture_key",
    "generate_by_llm",
    "hints_to_plan",
    "ingest_snapshot",
    "latency_cost_fn",
    "load_config",
    "normalize_sql",
    "number_candidates",
    "obtain_statistics",
    "parse_explain_json",
    "parse_hints",
    "planner_cost_fn",
    "read_labels",
    "read_records",
    "render_hints",
    "render_schema",
    "render_stats",
    "replace_where",
    "run_combined_pipeline",
    "run_generative_pipeline",
    "run_selective_pipeline",
    "search_by_arms",
    "select_by_cost",
    "select_listwise_llm",
    "select_majority",
    "select_oracle",
    "selection_accuracy",
    "simplify",
    "split_query_ids",
    "split_records",
    "sql_literal",
    "summarize_candidates",
    "table_refs",
    "transform_plan",
    "where_conjuncts",
    "write_records",
]
