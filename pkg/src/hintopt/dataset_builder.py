"""Fine-tuning dataset construction and workload synthesis.

Two record kinds are built from labeled queries. A generative record maps
(query + statistics) to the optimal candidate's hint text, teaching a model
to propose hints directly. A selective record maps (query + statistics +
numbered candidates) to the optimal candidate's zero-based index, teaching
a model to pick from a list with a single-token answer.

Workload synthesis grows new queries from existing ones: the backend
proposes a one-table extension with a ``%s`` placeholder predicate, the
proposal is checked against the schema, and the placeholder is filled with
real values pulled from the database.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, NamedTuple

from .backends import GenerationClient
from .catalog_stats import QueryStats, render_stats
from .dbms import DbClient
from .errors import InvalidExtensionError, NoFillValuesError, SqlParseError
from .hint_codec import render_hints
from .label_harness import LabeledQuery
from .prompts import PromptTemplates, build_extension_prompt, build_generative_prompt, build_selective_prompt
from .sqlutil import column_refs, table_refs, where_conjuncts

DATASET_VERSION = 1


class RecordKind(enum.Enum):
    GENERATIVE = "generative"
    SELECTIVE = "selective"


@dataclass(frozen=True)
class DatasetRecord:
    """One fine-tuning example: an input prompt and its target text."""

    kind: RecordKind
    input_text: str
    output_text: str
    meta: dict = field(default_factory=dict)


def build_generative_record(
    labeled: LabeledQuery,
    stats: QueryStats,
    *,
    query_id: str,
    benchmark: str = "",
    templates: PromptTemplates | None = None,
) -> DatasetRecord:
    """Record teaching a model to emit the optimal hints for a query.

    The target is the optimal candidate's rendered hint text, without the
    comment wrapper; wrapping is an injection-time concern.
    """
    optimal = labeled.candidates.entries[labeled.optimal_index]
    return DatasetRecord(
        kind=RecordKind.GENERATIVE,
        input_text=build_generative_prompt(
            labeled.query, render_stats(stats), templates
        ),
        output_text=render_hints(optimal.hints),
        meta={
            "query_id": query_id,
            "benchmark": benchmark,
            "n_tables": len(optimal.hints.scan_hints),
            "provenance": optimal.provenance.render(),
        },
    )


def build_selective_record(
    labeled: LabeledQuery,
    stats: QueryStats,
    *,
    query_id: str,
    benchmark: str = "",
    templates: PromptTemplates | None = None,
) -> DatasetRecord:
    """Record teaching a model to pick the optimal candidate by index.

    The target is the zero-based decimal index of the optimal entry in the
    candidate list, exactly as numbered in the prompt.
    """
    optimal = labeled.candidates.entries[labeled.optimal_index]
    return DatasetRecord(
        kind=RecordKind.SELECTIVE,
        input_text=build_selective_prompt(
            labeled.query,
            render_stats(stats),
            labeled.candidates.hint_texts(),
            templates,
        ),
        output_text=str(labeled.optimal_index),
        meta={
            "query_id": query_id,
            "benchmark": benchmark,
            "n_tables": len(optimal.hints.scan_hints),
            "provenance": optimal.provenance.render(),
        },
    )


def write_records(path: str | Path, records: list[DatasetRecord]) -> None:
    """Write records as JSON lines, one object per record."""
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(
                json.dumps(
                    {
                        "v": DATASET_VERSION,
                        "kind": record.kind.value,
                        "input": record.input_text,
                        "output": record.output_text,
                        "meta": record.meta,
                    }
                )
                + "\n"
            )


def read_records(path: str | Path) -> list[DatasetRecord]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            records.append(
                DatasetRecord(
                    kind=RecordKind(data["kind"]),
                    input_text=data["input"],
                    output_text=data["output"],
                    meta=data.get("meta", {}),
                )
            )
    return records


class SplitIds(NamedTuple):
    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]


def split_query_ids(
    ids: list[str], *, seed: int, n_validation: int, n_test: int
) -> SplitIds:
    """Shuffle ids with the given seed and cut off validation and test sets.

    The three parts are pairwise disjoint by construction; records for one
    query id must never appear on two sides of a split.
    """
    unique = list(dict.fromkeys(ids))
    if n_validation + n_test >= len(unique):
        raise ValueError(
            f"cannot hold out {n_validation}+{n_test} ids from {len(unique)}"
        )
    rng = random.Random(seed)
    rng.shuffle(unique)
    return SplitIds(
        train=tuple(unique[n_validation + n_test :]),
        validation=tuple(unique[:n_validation]),
        test=tuple(unique[n_validation : n_validation + n_test]),
    )


def split_records(
    records: list[DatasetRecord], *, seed: int, n_validation: int, n_test: int
) -> dict[str, list[DatasetRecord]]:
    """Split records by query id into train/validation/test lists."""
    ids = [record.meta["query_id"] for record in records]
    split = split_query_ids(ids, seed=seed, n_validation=n_validation, n_test=n_test)
    side_of = {qid: "train" for qid in split.train}
    side_of.update({qid: "validation" for qid in split.validation})
    side_of.update({qid: "test" for qid in split.test})
    out: dict[str, list[DatasetRecord]] = {"train": [], "validation": [], "test": []}
    for record in records:
        out[side_of[record.meta["query_id"]]].append(record)
    return out


# --------------------------------------------------------------------------
# Workload synthesis
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QueryTemplate:
    """A one-table extension of a base query, with a value placeholder.

    ``sql`` holds exactly one ``%s``. ``fill_query`` projects the
    placeholder's column over the same joins minus the placeholder
    predicate, so executing it yields values that make ``sql`` concrete.
    """

    sql: str
    fill_query: str
    placeholder_column: str
    new_table: str
    new_alias: str


def _schema_has(schema: dict[str, tuple[str, ...]], table: str, column: str) -> bool:
    return table in schema and column in schema[table]


def extend_query(
    base_sql: str,
    schema: dict[str, tuple[str, ...]],
    gen_client: GenerationClient,
    *,
    temperature: float = 1.0,
    templates: PromptTemplates | None = None,
) -> QueryTemplate:
    """Ask the backend to extend a query by one table, then validate it.

    The proposal must keep the base FROM list and predicates, add exactly
    one schema table, and filter the new table through a single ``%s``
    placeholder predicate. Anything else raises
    :class:`InvalidExtensionError` with the reason.
    """
    prompt = build_extension_prompt(base_sql, schema, templates)
    proposal = gen_client.generate(prompt, n=1, temperature=temperature)[0].strip()
    if not proposal:
        raise InvalidExtensionError("backend returned an empty extension")

    try:
        base_refs = table_refs(base_sql)
        new_refs = table_refs(proposal)
        base_conjuncts = [" ".join(c.split()) for c in where_conjuncts(base_sql)]
        new_conjuncts = where_conjuncts(proposal)
    except SqlParseError as exc:
        raise InvalidExtensionError(f"unparseable extension {proposal!r}: {exc}") from exc

    if proposal.count("%s") != 1:
        raise InvalidExtensionError(
            f"extension must contain exactly one %s placeholder: {proposal!r}"
        )

    added = [ref for ref in new_refs if ref not in base_refs]
    if len(added) != 1 or len(new_refs) != len(base_refs) + 1:
        raise InvalidExtensionError(
            f"extension must add exactly one table to the FROM list: {proposal!r}"
        )
    new_ref = added[0]
    if new_ref.table not in schema:
        raise InvalidExtensionError(
            f"extension references unknown table {new_ref.table!r}"
        )

    missing = [
        c
        for c in base_conjuncts
        if c not in [" ".join(n.split()) for n in new_conjuncts]
    ]
    if missing:
        raise InvalidExtensionError(
            f"extension dropped base predicates {missing!r}"
        )

    alias_to_table = {ref.alias: ref.table for ref in new_refs}
    placeholder_conjuncts = [c for c in new_conjuncts if "%s" in c]
    if len(placeholder_conjuncts) != 1:
        raise InvalidExtensionError(
            "the %s placeholder must sit in exactly one predicate"
        )
    placeholder_pred = placeholder_conjuncts[0]

    added_conjuncts = [
        c for c in new_conjuncts if " ".join(c.split()) not in base_conjuncts
    ]
    for conjunct in added_conjuncts:
        refs = column_refs(conjunct)
        if not refs:
            raise InvalidExtensionError(
                f"added predicate {conjunct!r} references no column"
            )
        for alias, column in refs:
            table = alias_to_table.get(alias)
            if table is None:
                raise InvalidExtensionError(
                    f"predicate {conjunct!r} uses unknown alias {alias!r}"
                )
            if not _schema_has(schema, table, column):
                raise InvalidExtensionError(
                    f"predicate {conjunct!r} references unknown column "
                    f"{table}.{column}"
                )
        if not any(alias == new_ref.alias for alias, _ in refs):
            raise InvalidExtensionError(
                f"added predicate {conjunct!r} does not touch the new table"
            )

    ph_refs = [(a, c) for a, c in column_refs(placeholder_pred) if a == new_ref.alias]
    if not ph_refs:
        raise InvalidExtensionError(
            f"the placeholder predicate {placeholder_pred!r} must filter a "
            f"column of the new table {new_ref.alias!r}"
        )
    ph_alias, ph_column = ph_refs[0]
    placeholder_column = f"{ph_alias}.{ph_column}"

    remaining = [c for c in new_conjuncts if c is not placeholder_pred]
    from_list = ", ".join(
        ref.table if ref.table == ref.alias else f"{ref.table} {ref.alias}"
        for ref in new_refs
    )
    where = f" WHERE {' AND '.join(remaining)}" if remaining else ""
    fill_query = f"SELECT {placeholder_column} FROM {from_list}{where};"

    return QueryTemplate(
        sql=proposal if proposal.endswith(";") else f"{proposal};",
        fill_query=fill_query,
        placeholder_column=placeholder_column,
        new_table=new_ref.table,
        new_alias=new_ref.alias,
    )


def sql_literal(value: Any) -> str:
    """Quote a Python value for inclusion in SQL text."""
    if isinstance(value, bool):
        return "TRUE" if value else "FALSE"
    if isinstance(value, (int, float)):
        return str(value)
    text = str(value).replace("'", "''")
    return f"'{text}'"


def fill_template(
    template: QueryTemplate,
    client: DbClient,
    k: int = 1,
    *,
    fetch_limit: int | None = 1000,
) -> list[str]:
    """Instantiate a template with up to ``k`` distinct database values.

    Values come from executing the template's fill query; duplicates and
    NULLs are dropped before the first ``k`` survivors are substituted.

    Raises:
        NoFillValuesError: the fill query produced no usable value; the
            template should be discarded.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    values = client.fetch_values(template.fill_query, limit=fetch_limit)
    distinct = list(dict.fromkeys(v for v in values if v is not None))
    if not distinct:
        raise NoFillValuesError(
            f"fill query returned no usable values: {template.fill_query!r}"
        )
    return [
        template.sql.replace("%s", sql_literal(value), 1)
        for value in distinct[:k]
    ]
