"""Plan selection strategies and end-to-end optimization pipelines.

Selection picks one entry from a candidate set. The strategies are
pluggable: a listwise model call, any cost function over simplified plans
(planner estimates and a true-latency oracle ship as factories), majority
vote over rendered hint text, and the oracle itself for upper bounds.

The pipelines wire the pieces together for one query: collect statistics,
produce candidates (knob arms or sampled generation), select, and report
per-phase wall-clock timings so end-to-end overhead can be itemized.
"""

from __future__ import annotations

import enum
import math
import re
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

from .backends import GenerationClient
from .candidate_search import (
    BaoArm,
    CandidateSet,
    ProvenanceKind,
    SamplingPolicy,
    default_arm_subset,
    generate_by_llm,
    search_by_arms,
)
from .catalog_stats import CatalogSnapshot, QueryStats, obtain_statistics, render_stats
from .dbms import DbClient
from .errors import LengthMismatchError
from .hint_codec import HintSet, hints_to_plan, render_hints, transform_plan
from .label_harness import LabeledQuery
from .plan_model import SimplifiedPlan, simplify
from .prompts import PromptTemplates, build_selective_prompt

CostFn = Callable[[SimplifiedPlan], float]

_INT_RE = re.compile(r"-?\d+")


class SelectionStrategy(enum.Enum):
    LISTWISE_LLM = "listwise_llm"
    COST_ESTIMATE = "cost_estimate"
    MAJORITY_VOTE = "majority_vote"
    ORACLE = "oracle"


@dataclass(frozen=True)
class SelectionOutcome:
    """The choice a strategy made for one candidate set.

    ``fallback_used`` marks a listwise reply that was unusable (no integer,
    or out of range), in which case the default candidate was chosen.
    """

    strategy: SelectionStrategy
    chosen_index: int
    chosen_hints: HintSet
    fallback_used: bool = False
    raw_output: str | None = None


def _fallback_index(candidates: CandidateSet) -> int:
    """The default candidate: a fallback entry or the all-enabled arm."""
    for index, entry in enumerate(candidates.entries):
        if entry.provenance.kind is ProvenanceKind.DEFAULT:
            return index
        if entry.provenance.kind is ProvenanceKind.ARM and entry.provenance.index == 0:
            return index
    return 0


def select_listwise_llm(
    sql: str,
    stats: QueryStats | str,
    candidates: CandidateSet,
    gen_client: GenerationClient,
    *,
    templates: PromptTemplates | None = None,
) -> SelectionOutcome:
    """Ask the backend to pick a candidate by number.

    The request is greedy (temperature 0, one sample) and the reply is
    read as a single decimal index. A single-candidate set short-circuits
    without calling the backend. Replies that are not a valid in-range
    index fall back to the default candidate with ``fallback_used=True``.
    """
    if len(candidates.entries) == 1:
        return SelectionOutcome(
            strategy=SelectionStrategy.LISTWISE_LLM,
            chosen_index=0,
            chosen_hints=candidates.entries[0].hints,
        )
    stats_text = stats if isinstance(stats, str) else render_stats(stats)
    prompt = build_selective_prompt(
        sql, stats_text, candidates.hint_texts(), templates
    )
    raw = gen_client.generate(prompt, n=1, temperature=0.0, max_tokens=8)[0]
    match = _INT_RE.search(raw)
    index = int(match.group(0)) if match else -1
    if 0 <= index < len(candidates.entries):
        return SelectionOutcome(
            strategy=SelectionStrategy.LISTWISE_LLM,
            chosen_index=index,
            chosen_hints=candidates.entries[index].hints,
            raw_output=raw,
        )
    fallback = _fallback_index(candidates)
    return SelectionOutcome(
        strategy=SelectionStrategy.LISTWISE_LLM,
        chosen_index=fallback,
        chosen_hints=candidates.entries[fallback].hints,
        fallback_used=True,
        raw_output=raw,
    )


def select_by_cost(candidates: CandidateSet, cost_fn: CostFn) -> SelectionOutcome:
    """Pick the candidate whose plan minimizes ``cost_fn``.

    ``cost_fn`` must be total over the candidate plans. Textually equal
    candidates are costed once; ties break toward the earlier entry.
    """
    cached: dict[str, float] = {}
    best_index = 0
    best_cost = math.inf
    for index, entry in enumerate(candidates.entries):
        text = render_hints(entry.hints)
        if text not in cached:
            cached[text] = float(cost_fn(hints_to_plan(entry.hints)))
        cost = cached[text]
        if cost < best_cost:
            best_cost = cost
            best_index = index
    return SelectionOutcome(
        strategy=SelectionStrategy.COST_ESTIMATE,
        chosen_index=best_index,
        chosen_hints=candidates.entries[best_index].hints,
    )


def select_majority(candidates: CandidateSet) -> SelectionOutcome:
    """Pick the most frequent candidate by rendered hint text.

    Frequency ties break toward the text whose first occurrence is
    earliest; the chosen index is that first occurrence.
    """
    counts: dict[str, int] = {}
    first_seen: dict[str, int] = {}
    for index, entry in enumerate(candidates.entries):
        text = render_hints(entry.hints)
        counts[text] = counts.get(text, 0) + 1
        first_seen.setdefault(text, index)
    winner = min(counts, key=lambda text: (-counts[text], first_seen[text]))
    index = first_seen[winner]
    return SelectionOutcome(
        strategy=SelectionStrategy.MAJORITY_VOTE,
        chosen_index=index,
        chosen_hints=candidates.entries[index].hints,
    )


def select_oracle(labeled: LabeledQuery) -> SelectionOutcome:
    """Pick the measured optimum; the upper bound for every other strategy."""
    return SelectionOutcome(
        strategy=SelectionStrategy.ORACLE,
        chosen_index=labeled.optimal_index,
        chosen_hints=labeled.optimal_hints,
    )


# -- shipped cost functions --------------------------------------------------


def planner_cost_fn(client: DbClient, sql: str) -> CostFn:
    """Cost a plan by the planner's own estimate for the hinted query."""

    def cost(plan: SimplifiedPlan) -> float:
        hints = render_hints(transform_plan(plan))
        return client.explain(sql, hints=hints).root.est_cost

    return cost


def latency_cost_fn(labeled: LabeledQuery) -> CostFn:
    """Cost a plan by its measured latency from a labeled query."""
    by_text = {}
    for entry, result in zip(labeled.candidates.entries, labeled.results):
        by_text.setdefault(render_hints(entry.hints), result.latency_ms)

    def cost(plan: SimplifiedPlan) -> float:
        return by_text[render_hints(transform_plan(plan))]

    return cost


def selection_accuracy(
    outcomes: Sequence[SelectionOutcome], labels: Sequence[LabeledQuery]
) -> float:
    """Percentage of queries whose chosen candidate matches the optimum.

    A choice counts as correct when its measured latency equals the
    optimal latency, so picking either of two tied candidates is correct.
    """
    if len(outcomes) != len(labels):
        raise LengthMismatchError(
            f"{len(outcomes)} outcomes vs {len(labels)} labels"
        )
    if not outcomes:
        return 0.0
    correct = 0
    for outcome, labeled in zip(outcomes, labels):
        chosen = labeled.results[outcome.chosen_index]
        optimal = labeled.results[labeled.optimal_index]
        if not chosen.timed_out and chosen.latency_ms == optimal.latency_ms:
            correct += 1
    return 100.0 * correct / len(outcomes)


# --------------------------------------------------------------------------
# Pipelines
# --------------------------------------------------------------------------


@dataclass
class PipelineResult:
    """Everything one pipeline run produced, including phase timings.

    ``timings_ms`` itemizes wall-clock time by phase: ``statistics``
    (snapshot slice assembly), ``planning`` (planner calls), ``inference``
    (generation backend calls), ``selection`` (strategy work; includes
    planner calls when the cost function queries the planner).
    """

    query: str
    outcome: SelectionOutcome
    candidates: CandidateSet
    stats: QueryStats
    timings_ms: dict[str, float] = field(default_factory=dict)

    @property
    def chosen_hint_text(self) -> str:
        return render_hints(self.outcome.chosen_hints)


class _PhaseTimer:
    def __init__(self) -> None:
        self.timings_ms: dict[str, float] = {
            "statistics": 0.0,
            "planning": 0.0,
            "inference": 0.0,
            "selection": 0.0,
        }

    def add(self, phase: str, started: float) -> None:
        self.timings_ms[phase] += (time.perf_counter() - started) * 1000.0


def _default_plan_and_stats(
    sql: str, snapshot: CatalogSnapshot, db: DbClient, timer: _PhaseTimer
):
    started = time.perf_counter()
    default_plan = db.explain(sql)
    timer.add("planning", started)

    started = time.perf_counter()
    stats = obtain_statistics(sql, snapshot, default_plan)
    timer.add("statistics", started)
    return default_plan, stats


def run_generative_pipeline(
    sql: str,
    snapshot: CatalogSnapshot,
    db: DbClient,
    gen_client: GenerationClient,
    *,
    policy: SamplingPolicy | None = None,
    cost_fn: CostFn | None = None,
    templates: PromptTemplates | None = None,
) -> PipelineResult:
    """Sample hint candidates from the backend and pick one by cost.

    The default cost function is the planner's estimate for the hinted
    query; pass any other :data:`CostFn` to swap the selection model.
    """
    timer = _PhaseTimer()
    default_plan, stats = _default_plan_and_stats(sql, snapshot, db, timer)
    default_hints = transform_plan(simplify(default_plan))

    started = time.perf_counter()
    candidates = generate_by_llm(
        sql, stats, gen_client, policy, default_hints=default_hints, templates=templates
    )
    timer.add("inference", started)

    started = time.perf_counter()
    outcome = select_by_cost(candidates, cost_fn or planner_cost_fn(db, sql))
    timer.add("selection", started)

    return PipelineResult(
        query=sql,
        outcome=outcome,
        candidates=candidates,
        stats=stats,
        timings_ms=timer.timings_ms,
    )


def run_selective_pipeline(
    sql: str,
    snapshot: CatalogSnapshot,
    db: DbClient,
    gen_client: GenerationClient,
    *,
    arms: Sequence[BaoArm] | None = None,
    templates: PromptTemplates | None = None,
    max_workers: int = 1,
) -> PipelineResult:
    """Plan under knob arms and ask the backend to pick by number."""
    timer = _PhaseTimer()
    _, stats = _default_plan_and_stats(sql, snapshot, db, timer)

    started = time.perf_counter()
    candidates = search_by_arms(
        sql, tuple(arms or default_arm_subset()), db, max_workers=max_workers
    )
    timer.add("planning", started)

    started = time.perf_counter()
    outcome = select_listwise_llm(sql, stats, candidates, gen_client, templates=templates)
    timer.add("inference", started)

    return PipelineResult(
        query=sql,
        outcome=outcome,
        candidates=candidates,
        stats=stats,
        timings_ms=timer.timings_ms,
    )


def run_combined_pipeline(
    sql: str,
    snapshot: CatalogSnapshot,
    db: DbClient,
    gen_client: GenerationClient,
    *,
    policy: SamplingPolicy | None = None,
    templates: PromptTemplates | None = None,
) -> PipelineResult:
    """Sample hint candidates, then ask the backend to pick by number."""
    timer = _PhaseTimer()
    default_plan, stats = _default_plan_and_stats(sql, snapshot, db, timer)
    default_hints = transform_plan(simplify(default_plan))

    started = time.perf_counter()
    candidates = generate_by_llm(
        sql, stats, gen_client, policy, default_hints=default_hints, templates=templates
    )
    timer.add("inference", started)

    started = time.perf_counter()
    outcome = select_listwise_llm(sql, stats, candidates, gen_client, templates=templates)
    timer.add("inference", started)

    return PipelineResult(
        query=sql,
        outcome=outcome,
        candidates=candidates,
        stats=stats,
        timings_ms=timer.timings_ms,
    )
