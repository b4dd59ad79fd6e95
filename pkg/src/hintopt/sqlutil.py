"""Light parsing for the single-block SELECT shape this package works on.

Queries are flat conjunctive select-project-join statements: one SELECT,
a comma-separated FROM list with optional aliases, and a WHERE clause of
AND-ed predicates. Anything richer (subqueries, explicit JOIN syntax,
set operations) is rejected up front; hints cannot be applied inside
nested plans anyway.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import SqlParseError

_FROM_RE = re.compile(r"\bfrom\b", re.IGNORECASE)
_FROM_END_RE = re.compile(r"\b(where|group\s+by|order\s+by|having|limit|offset)\b", re.IGNORECASE)
_WHERE_RE = re.compile(r"\bwhere\b", re.IGNORECASE)
_WHERE_END_RE = re.compile(r"\b(group\s+by|order\s+by|having|limit|offset)\b", re.IGNORECASE)
_AND_RE = re.compile(r"\band\b", re.IGNORECASE)
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_COLUMN_REF_RE = re.compile(r"\b([A-Za-z_][A-Za-z0-9_]*)\.([A-Za-z_][A-Za-z0-9_]*)\b")

# single-quoted SQL literal, '' as the escape
_STRING_RE = re.compile(r"'(?:[^']|'')*'")
_PLACEHOLDER_RE = re.compile(r"\x00(\d+)\x00")


@dataclass(frozen=True)
class TableRef:
    """One FROM-list entry: a table plus the alias the query uses for it."""

    table: str
    alias: str


def strip_semicolon(sql: str) -> str:
    return sql.rstrip().rstrip(";").rstrip()


def _mask_strings(text: str) -> tuple[str, list[str]]:
    """Replace string literals with placeholders so keyword scans cannot
    be fooled by quoted content."""
    literals: list[str] = []

    def stash(match: re.Match) -> str:
        literals.append(match.group(0))
        return f"\x00{len(literals) - 1}\x00"

    masked = _STRING_RE.sub(stash, text)
    if "'" in masked:
        raise SqlParseError(f"unterminated string literal in {text!r}")
    return masked, literals


def _unmask(text: str, literals: list[str]) -> str:
    return _PLACEHOLDER_RE.sub(lambda m: literals[int(m.group(1))], text)


def _clause(
    masked: str, start_re: re.Pattern, end_re: re.Pattern
) -> tuple[str, int, int, int] | None:
    """(body, keyword start, body start, body end) on the masked text."""
    match = start_re.search(masked)
    if match is None:
        return None
    begin = match.end()
    end_match = end_re.search(masked, begin)
    end = end_match.start() if end_match else len(masked)
    return masked[begin:end], match.start(), begin, end


def table_refs(sql: str) -> list[TableRef]:
    """Parse the FROM list into ordered table references.

    Supports ``table``, ``table alias`` and ``table AS alias`` entries.
    Raises:
        SqlParseError: missing FROM list, subqueries or JOIN syntax in it,
            or a duplicate alias.
    """
    masked, _ = _mask_strings(strip_semicolon(sql))
    clause = _clause(masked, _FROM_RE, _FROM_END_RE)
    if clause is None:
        raise SqlParseError(f"query has no FROM clause: {sql!r}")
    body = clause[0].strip()
    if not body:
        raise SqlParseError("empty FROM clause")
    if "(" in body:
        raise SqlParseError("subqueries in FROM are not supported")
    if re.search(r"\bjoin\b", body, re.IGNORECASE):
        raise SqlParseError(
            "explicit JOIN syntax is not supported; use a comma-separated "
            "FROM list"
        )

    refs: list[TableRef] = []
    seen: set[str] = set()
    for item in body.split(","):
        words = item.split()
        if len(words) == 3 and words[1].upper() == "AS":
            words = [words[0], words[2]]
        if len(words) == 1:
            table = alias = words[0]
        elif len(words) == 2:
            table, alias = words
        else:
            raise SqlParseError(f"cannot parse FROM entry {item.strip()!r}")
        if not _NAME_RE.match(table) or not _NAME_RE.match(alias):
            raise SqlParseError(f"cannot parse FROM entry {item.strip()!r}")
        if alias in seen:
            raise SqlParseError(f"duplicate alias {alias!r} in FROM clause")
        seen.add(alias)
        refs.append(TableRef(table=table, alias=alias))
    return refs


def where_conjuncts(sql: str) -> list[str]:
    """Split the WHERE clause on top-level AND. Empty list if there is none."""
    masked, literals = _mask_strings(strip_semicolon(sql))
    clause = _clause(masked, _WHERE_RE, _WHERE_END_RE)
    if clause is None:
        return []
    body = clause[0]
    if re.search(r"\bor\b", body, re.IGNORECASE):
        raise SqlParseError("OR in WHERE is not supported; use conjunctive predicates")
    parts = [part.strip() for part in _AND_RE.split(body)]
    if any(not part for part in parts):
        raise SqlParseError(f"cannot split WHERE clause {body.strip()!r}")
    return [_unmask(part, literals) for part in parts]


def replace_where(sql: str, conjuncts: list[str]) -> str:
    """Rebuild the query with a new WHERE conjunct list (possibly empty)."""
    text = strip_semicolon(sql)
    masked, literals = _mask_strings(text)
    clause = _clause(masked, _WHERE_RE, _WHERE_END_RE)
    new_where = " AND ".join(conjuncts)
    if clause is None:
        return f"{text} WHERE {new_where}" if conjuncts else text
    _, keyword_start, _, end = clause
    head = _unmask(masked[:keyword_start].rstrip(), literals)
    tail = _unmask(masked[end:].strip(), literals)
    pieces = [head]
    if conjuncts:
        pieces.append(f"WHERE {new_where}")
    if tail:
        pieces.append(tail)
    return " ".join(pieces)


def column_refs(expr: str) -> list[tuple[str, str]]:
    """All ``alias.column`` references in an expression, in order."""
    return [(m.group(1), m.group(2)) for m in _COLUMN_REF_RE.finditer(expr)]
