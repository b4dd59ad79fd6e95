"""Label harvesting: execute candidates, find the fastest, keep the trace.

Collection runs every candidate of a query and labels the query with the
index of the fastest one. Two cost controls keep collection affordable: an
adaptive cutoff (no candidate is given more time than the best latency seen
so far, on the grounds that anything slower can never win) and duplicate
sharing (textually identical candidates are executed once).

The adaptive cutoff belongs to collection only. Evaluation passes that need
complete latencies for every candidate should disable it and rely on the
global timeout alone.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

from .candidate_search import CandidateEntry, CandidateSet, Provenance
from .dbms import DbClient, ExecutionResult
from .errors import AllCandidatesTimedOutError, SnapshotParseError
from .hint_codec import HintSet, parse_hints, render_hints

DEFAULT_GLOBAL_TIMEOUT_MS = 180_000.0  # three minutes
LABEL_STORE_VERSION = 1


@dataclass(frozen=True)
class LabeledQuery:
    """One query with measured candidates and the winning index.

    ``timeouts_ms`` records the limit each candidate ran under, in entry
    order; shared duplicates repeat the original's limit and result.
    """

    query: str
    candidates: CandidateSet
    results: tuple[ExecutionResult, ...]
    timeouts_ms: tuple[float, ...]
    optimal_index: int

    @property
    def optimal_hints(self) -> HintSet:
        return self.candidates.entries[self.optimal_index].hints

    @property
    def latencies_ms(self) -> tuple[float, ...]:
        return tuple(result.latency_ms for result in self.results)


def collect_labels(
    sql: str,
    candidates: CandidateSet,
    client: DbClient,
    *,
    global_timeout_ms: float = DEFAULT_GLOBAL_TIMEOUT_MS,
    warmups: int | None = None,
    adaptive: bool = True,
    share_duplicates: bool = True,
) -> LabeledQuery:
    """Execute every candidate and label the query with the fastest one.

    With ``adaptive`` on, each execution's limit is the smaller of the
    global timeout and the best completed latency so far, so hopeless
    candidates are cut short. Ties break toward the earlier entry.

    Raises:
        AllCandidatesTimedOutError: no candidate finished inside its limit;
            the query produces no label and should be discarded.
    """
    results: list[ExecutionResult] = []
    timeouts: list[float] = []
    by_text: dict[str, int] = {}
    best_ms = math.inf

    for index, entry in enumerate(candidates.entries):
        hint_text = render_hints(entry.hints)
        if share_duplicates and hint_text in by_text:
            original = by_text[hint_text]
            results.append(results[original])
            timeouts.append(timeouts[original])
            continue
        limit = global_timeout_ms
        if adaptive and best_ms < limit:
            limit = best_ms
        result = client.execute(
            sql, hints=hint_text, timeout_ms=limit, warmups=warmups
        )
        results.append(result)
        timeouts.append(limit)
        by_text[hint_text] = index
        if not result.timed_out and result.latency_ms < best_ms:
            best_ms = result.latency_ms

    optimal_index = -1
    optimal_ms = math.inf
    for index, result in enumerate(results):
        if not result.timed_out and result.latency_ms < optimal_ms:
            optimal_index = index
            optimal_ms = result.latency_ms
    if optimal_index < 0:
        raise AllCandidatesTimedOutError(
            f"every candidate timed out for {sql!r}; no label"
        )

    return LabeledQuery(
        query=sql,
        candidates=candidates,
        results=tuple(results),
        timeouts_ms=tuple(timeouts),
        optimal_index=optimal_index,
    )


class CandidateSummary(NamedTuple):
    """Per-query minimum, mean, and population standard deviation of the
    candidate latencies, each summed across the batch."""

    min_sum: float
    avg_sum: float
    std_sum: float


def summarize_candidates(batch: list[LabeledQuery]) -> CandidateSummary:
    """Aggregate candidate quality over a batch of labeled queries.

    Expects complete latencies (collect with ``adaptive=False``); capped
    latencies from timed-out runs are summed as recorded.
    """
    min_sum = avg_sum = std_sum = 0.0
    for labeled in batch:
        latencies = list(labeled.latencies_ms)
        min_sum += min(latencies)
        avg_sum += statistics.fmean(latencies)
        std_sum += statistics.pstdev(latencies)
    return CandidateSummary(min_sum=min_sum, avg_sum=avg_sum, std_sum=std_sum)


# --------------------------------------------------------------------------
# Label store (append-only JSON lines)
# --------------------------------------------------------------------------


def _labeled_to_record(labeled: LabeledQuery) -> dict:
    return {
        "v": LABEL_STORE_VERSION,
        "query": labeled.query,
        "entries": [
            {
                "hints": render_hints(entry.hints),
                "provenance": entry.provenance.render(),
            }
            for entry in labeled.candidates.entries
        ],
        "latencies_ms": list(labeled.latencies_ms),
        "timed_out": [result.timed_out for result in labeled.results],
        "timeouts_ms": list(labeled.timeouts_ms),
        "optimal_index": labeled.optimal_index,
    }


def _labeled_from_record(record: dict) -> LabeledQuery:
    if record.get("v") != LABEL_STORE_VERSION:
        raise SnapshotParseError(
            f"label record version {record.get('v')!r} is not supported"
        )
    pairs = [
        (parse_hints(entry["hints"]), Provenance.parse(entry["provenance"]))
        for entry in record["entries"]
    ]
    first_seen: dict[str, int] = {}
    entries = []
    for index, (hints, provenance) in enumerate(pairs):
        text = render_hints(hints)
        duplicate_of = first_seen.get(text)
        if duplicate_of is None:
            first_seen[text] = index
        entries.append(CandidateEntry(hints, provenance, duplicate_of))
    candidates = CandidateSet(query=record["query"], entries=tuple(entries))
    results = tuple(
        ExecutionResult(latency_ms=latency, timed_out=timed_out)
        for latency, timed_out in zip(record["latencies_ms"], record["timed_out"])
    )
    return LabeledQuery(
        query=record["query"],
        candidates=candidates,
        results=results,
        timeouts_ms=tuple(record["timeouts_ms"]),
        optimal_index=int(record["optimal_index"]),
    )


def append_labels(path: str | Path, batch: list[LabeledQuery]) -> None:
    with open(path, "a", encoding="utf-8") as handle:
        for labeled in batch:
            handle.write(json.dumps(_labeled_to_record(labeled)) + "\n")


def read_labels(path: str | Path) -> list[LabeledQuery]:
    labeled = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                labeled.append(_labeled_from_record(json.loads(line)))
    return labeled
