"""Candidate plan search: knob-restricted planning and sampled generation.

Two routes produce candidate hint sets for a query. The arm route plans the
query under restricted knob vectors and keeps whatever the planner picks.
The generation route samples a text model at high temperature and parses
each sample; samples that fail to parse fall back to the default plan's
hints so the candidate count stays fixed.

Candidates keep their provenance (which arm, which sample, or the default
fallback) and duplicates are flagged rather than dropped, so downstream
consumers can both deduplicate work and preserve positional indexing.
"""

from __future__ import annotations

import enum
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .backends import GenerationClient
from .catalog_stats import QueryStats, render_stats
from .dbms import KNOB_FIELDS, DbClient, KnobVector
from .errors import (
    FixtureMissError,
    HintParseError,
    InconsistentHintsError,
    PlannerError,
)
from .hint_codec import HintSet, parse_hints, render_hints, transform_plan
from .plan_model import simplify
from .prompts import PromptTemplates, build_generative_prompt

log = logging.getLogger(__name__)

ARM_COUNT = 48

# The knob-validity rule leaves 49 plannable vectors (at least one join knob
# and one scan knob enabled). The advertised arm space holds 48, so the
# single most restrictive vector is dropped: nested-loop-only joins with
# index-only-only scans, which degenerates to its seq-scan sibling whenever
# a table lacks a covering index.
_EXCLUDED_VECTOR = (False, False, True, False, False, True)


class ProvenanceKind(enum.Enum):
    ARM = "arm"
    SAMPLE = "sample"
    DEFAULT = "default"


@dataclass(frozen=True)
class Provenance:
    """Where a candidate came from: an arm id, a sample index, or fallback."""

    kind: ProvenanceKind
    index: int | None = None

    @classmethod
    def arm(cls, arm_id: int) -> Provenance:
        return cls(ProvenanceKind.ARM, arm_id)

    @classmethod
    def sample(cls, sample_index: int) -> Provenance:
        return cls(ProvenanceKind.SAMPLE, sample_index)

    @classmethod
    def default(cls) -> Provenance:
        return cls(ProvenanceKind.DEFAULT, None)

    def render(self) -> str:
        if self.kind is ProvenanceKind.DEFAULT:
            return "default"
        return f"{self.kind.value}:{self.index}"

    @classmethod
    def parse(cls, text: str) -> Provenance:
        if text == "default":
            return cls.default()
        kind, _, index = text.partition(":")
        return cls(ProvenanceKind(kind), int(index))


@dataclass(frozen=True)
class BaoArm:
    """One restricted planning configuration in the canonical arm order."""

    arm_id: int
    knobs: KnobVector


@dataclass(frozen=True)
class CandidateEntry:
    """One candidate. ``duplicate_of`` points at the first entry with the
    same rendered hint text, or is None for first occurrences."""

    hints: HintSet
    provenance: Provenance
    duplicate_of: int | None = None


@dataclass(frozen=True)
class CandidateSet:
    """Ordered candidates for one query.

    ``skipped`` records arms the planner rejected, ``invalid_rate`` is the
    share of generation samples that failed to parse (0.0 for arm search).
    """

    query: str
    entries: tuple[CandidateEntry, ...]
    skipped: tuple[tuple[int, str], ...] = ()
    invalid_rate: float = 0.0

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("a candidate set cannot be empty")

    def hint_texts(self) -> list[str]:
        return [render_hints(entry.hints) for entry in self.entries]


@dataclass(frozen=True)
class SamplingPolicy:
    """How the generation route samples the model."""

    samples: int = 16
    temperature: float = 1.0
    max_output_tokens: int = 256

    def __post_init__(self) -> None:
        if self.samples < 1:
            raise ValueError(f"samples must be >= 1, got {self.samples}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")


def _flag_duplicates(
    pairs: list[tuple[HintSet, Provenance]]
) -> tuple[CandidateEntry, ...]:
    first_seen: dict[str, int] = {}
    entries: list[CandidateEntry] = []
    for index, (hints, provenance) in enumerate(pairs):
        text = render_hints(hints)
        duplicate_of = first_seen.get(text)
        if duplicate_of is None:
            first_seen[text] = index
        entries.append(CandidateEntry(hints, provenance, duplicate_of))
    return tuple(entries)


def all_bao_arms() -> tuple[BaoArm, ...]:
    """The 48 arms, in canonical order.

    Canonical order sorts by how many knobs are disabled, then by the
    knob vector itself, so arm 0 is always the all-enabled vector (the
    planner's default behavior) and arms 1-6 disable exactly one knob
    each, in field declaration order.
    """
    vectors = []
    for bits in itertools.product((True, False), repeat=len(KNOB_FIELDS)):
        if not any(bits[:3]) or not any(bits[3:]):
            continue  # cannot plan: a whole knob group is disabled
        if bits == _EXCLUDED_VECTOR:
            continue
        vectors.append(bits)
    vectors.sort(key=lambda bits: (bits.count(False), bits))
    arms = tuple(
        BaoArm(arm_id=i, knobs=KnobVector.from_tuple(bits))
        for i, bits in enumerate(vectors)
    )
    assert len(arms) == ARM_COUNT
    return arms


def default_arm_subset() -> tuple[BaoArm, ...]:
    """The shipped five-arm subset (a configuration default).

    Arm 0 (all knobs enabled) plus the four single-knob restrictions that
    disable one join method or sequential scans. Other subsets can be
    selected by id from :func:`all_bao_arms`.
    """
    arms = all_bao_arms()
    return arms[:5]


def search_by_arms(
    sql: str,
    arms: tuple[BaoArm, ...] | list[BaoArm],
    client: DbClient,
    *,
    max_workers: int = 1,
) -> CandidateSet:
    """Plan the query under each arm and collect the resulting hint sets.

    An arm the planner rejects is skipped with a warning and recorded in
    ``skipped``; entry order follows arm order for the arms that survive.

    Raises:
        PlannerError: only when every arm fails.
    """

    def plan_one(arm: BaoArm):
        try:
            plan = client.explain(sql, knobs=arm.knobs)
            return arm, transform_plan(simplify(plan)), None
        except (PlannerError, FixtureMissError) as exc:
            # a fixture miss is the replay-mode analogue of a rejected arm
            return arm, None, str(exc)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(plan_one, arms))
    else:
        results = [plan_one(arm) for arm in arms]

    pairs: list[tuple[HintSet, Provenance]] = []
    skipped: list[tuple[int, str]] = []
    for arm, hints, error in results:
        if hints is None:
            log.warning("arm %d failed for %r: %s", arm.arm_id, sql, error)
            skipped.append((arm.arm_id, error))
        else:
            pairs.append((hints, Provenance.arm(arm.arm_id)))

    if not pairs:
        raise PlannerError(
            f"every arm failed for {sql!r}: {[msg for _, msg in skipped]!r}"
        )
    return CandidateSet(
        query=sql, entries=_flag_duplicates(pairs), skipped=tuple(skipped)
    )


def generate_by_llm(
    sql: str,
    stats: QueryStats | str,
    gen_client: GenerationClient,
    policy: SamplingPolicy | None = None,
    *,
    default_hints: HintSet,
    templates: PromptTemplates | None = None,
) -> CandidateSet:
    """Sample candidate hint sets from the generation backend.

    Each sample is parsed and validated; an invalid sample is replaced by
    the query's default-plan hints (provenance ``default``), so the set
    always holds exactly ``policy.samples`` entries. The share of invalid
    samples is reported as ``invalid_rate``.
    """
    policy = policy or SamplingPolicy()
    stats_text = stats if isinstance(stats, str) else render_stats(stats)
    prompt = build_generative_prompt(sql, stats_text, templates)
    outputs = gen_client.generate(
        prompt,
        n=policy.samples,
        temperature=policy.temperature,
        max_tokens=policy.max_output_tokens,
    )

    pairs: list[tuple[HintSet, Provenance]] = []
    invalid = 0
    for index, text in enumerate(outputs):
        try:
            pairs.append((parse_hints(text), Provenance.sample(index)))
        except (HintParseError, InconsistentHintsError) as exc:
            log.debug("sample %d is invalid (%s); using default hints", index, exc)
            invalid += 1
            pairs.append((default_hints, Provenance.default()))

    return CandidateSet(
        query=sql,
        entries=_flag_duplicates(pairs),
        invalid_rate=invalid / policy.samples,
    )
