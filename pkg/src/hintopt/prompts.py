"""Versioned prompt templates for generation and selection.

The wording is part of the trained artifact: records built for fine-tuning
and requests made at serving time must use the same template version, so
templates are frozen data, not ad-hoc strings. Custom template sets can be
passed anywhere a default is used.
"""

from __future__ import annotations

from dataclasses import dataclass

PROMPT_VERSION = "v1"

_GENERATIVE = """\
You are a query optimizer for a relational database. Given a SQL query and
statistics for the tables it references, output planner hints that minimize
execution latency: one scan-method hint per table, one join-method hint per
join, and a single Leading hint fixing the join order. Output only the hints,
one per line.

Query:
{query}

Statistics:
{stats}

Hints:
"""

_SELECTIVE = """\
You are a query optimizer for a relational database. Given a SQL query,
statistics for the tables it references, and a numbered list of candidate
hint sets, output the number of the candidate expected to run fastest.
Output only that number.

Query:
{query}

Statistics:
{stats}

Candidates:
{candidates}

Best candidate:
"""

_EXTENSION = """\
Extend the SQL query below by joining exactly one additional table from the
schema. Add one join predicate connecting the new table to a table already in
the query, and one filter predicate on a column of the new table whose value
is the placeholder %s. Keep the existing predicates. Output only the extended
SQL on a single line.

Schema:
{schema}

Query:
{query}

Extended query:
"""


@dataclass(frozen=True)
class PromptTemplates:
    """One template set. Placeholders: {query}, {stats}, {candidates},
    {schema}."""

    version: str = PROMPT_VERSION
    generative: str = _GENERATIVE
    selective: str = _SELECTIVE
    extension: str = _EXTENSION


DEFAULT_TEMPLATES = PromptTemplates()


def build_generative_prompt(
    query: str, stats_text: str, templates: PromptTemplates | None = None
) -> str:
    templates = templates or DEFAULT_TEMPLATES
    return templates.generative.format(query=query.strip(), stats=stats_text)


def number_candidates(hint_texts: list[str]) -> str:
    """Render candidates as a zero-based numbered block."""
    return "\n".join(
        f"{index}:\n{text}" for index, text in enumerate(hint_texts)
    )


def build_selective_prompt(
    query: str,
    stats_text: str,
    hint_texts: list[str],
    templates: PromptTemplates | None = None,
) -> str:
    templates = templates or DEFAULT_TEMPLATES
    return templates.selective.format(
        query=query.strip(),
        stats=stats_text,
        candidates=number_candidates(hint_texts),
    )


def render_schema(schema: dict[str, tuple[str, ...]]) -> str:
    """One ``table(col, col, ...)`` line per table, sorted by name."""
    return "\n".join(
        f"{table}({', '.join(columns)})" for table, columns in sorted(schema.items())
    )


def build_extension_prompt(
    query: str,
    schema: dict[str, tuple[str, ...]],
    templates: PromptTemplates | None = None,
) -> str:
    templates = templates or DEFAULT_TEMPLATES
    return templates.extension.format(
        query=query.strip(), schema=render_schema(schema)
    )
