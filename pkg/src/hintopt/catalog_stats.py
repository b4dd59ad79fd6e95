"""Catalog statistics: snapshots, per-query assembly, and text rendering.

A snapshot captures table-level and column-level statistics once per
database (row counts, distinct counts, most common values, numeric ranges,
equal-height histogram boundaries). For a given query, the relevant slice
is assembled into a :class:`QueryStats` and rendered as a compact text
block with five fixed sections, which downstream prompts embed verbatim.

Snapshots come either from a live server's statistics views or from a
versioned JSON file; the two routes produce identical snapshots for the
same database state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import MissingScanNodeError, MissingTableError, SnapshotParseError
from .plan_model import SCAN_OPERATORS, PlanTree
from .sqlutil import table_refs

SNAPSHOT_VERSION = 1
MAIN_VALUE_CAP = 10
HIST_BOUNDARY_CAP = 21

_NUMERIC_TYPES = {
    "smallint",
    "integer",
    "bigint",
    "int",
    "int2",
    "int4",
    "int8",
    "numeric",
    "decimal",
    "real",
    "double precision",
    "float4",
    "float8",
}


@dataclass(frozen=True)
class ColumnStats:
    """Statistics for one column.

    ``min_max`` and ``histogram`` only make sense for numeric columns and
    must be None otherwise. ``main_values`` pairs each common value with
    its relative frequency.
    """

    name: str
    numeric: bool
    ndv: int
    main_values: tuple[tuple[Any, float], ...] = ()
    min_max: tuple[float, float] | None = None
    histogram: tuple[float, ...] | None = None


@dataclass(frozen=True)
class TableStats:
    name: str
    row_count: int
    columns: tuple[ColumnStats, ...] = ()

    def column(self, name: str) -> ColumnStats | None:
        for col in self.columns:
            if col.name == name:
                return col
        return None


@dataclass(frozen=True)
class CatalogSnapshot:
    """All statistics for one database, keyed by table name."""

    tables: dict[str, TableStats] = field(default_factory=dict)

    def schema(self) -> dict[str, tuple[str, ...]]:
        """Table name to column names, for schema checks elsewhere."""
        return {
            name: tuple(col.name for col in stats.columns)
            for name, stats in self.tables.items()
        }


@dataclass(frozen=True)
class QueryStats:
    """The snapshot slice relevant to one query.

    Keys are query aliases (``card_tb``) or ``alias.column`` strings (the
    rest). Insertion order is the rendering order: aliases as listed in
    FROM, columns alphabetically within each alias.
    """

    card_tb: dict[str, tuple[int, int]]
    ndv: dict[str, int]
    main_value: dict[str, tuple[tuple[Any, float], ...]]
    min_max: dict[str, tuple[float, float]]
    hist: dict[str, tuple[float, ...]]


def _check_column(table: str, col: ColumnStats) -> None:
    where = f"column {table}.{col.name}"
    if col.ndv < 0:
        raise SnapshotParseError(f"{where}: negative distinct count {col.ndv}")
    total = 0.0
    for value, freq in col.main_values:
        if not 0.0 <= freq <= 1.0:
            raise SnapshotParseError(
                f"{where}: frequency {freq!r} for value {value!r} is outside [0, 1]"
            )
        total += freq
    if total > 1.0 + 1e-9:
        raise SnapshotParseError(
            f"{where}: main-value frequencies sum to {total}, above 1"
        )
    if not col.numeric and (col.min_max is not None or col.histogram is not None):
        raise SnapshotParseError(
            f"{where}: range statistics on a non-numeric column"
        )
    if col.min_max is not None:
        lo, hi = col.min_max
        if lo > hi:
            raise SnapshotParseError(f"{where}: min {lo!r} above max {hi!r}")
    if col.histogram is not None:
        bounds = col.histogram
        if any(a > b for a, b in zip(bounds, bounds[1:])):
            raise SnapshotParseError(
                f"{where}: histogram boundaries are not nondecreasing"
            )


def validate_snapshot(snapshot: CatalogSnapshot) -> None:
    for name, table in snapshot.tables.items():
        if table.row_count < 0:
            raise SnapshotParseError(
                f"table {name}: negative row count {table.row_count}"
            )
        for col in table.columns:
            _check_column(name, col)


def _column_from_json(table: str, data: dict) -> ColumnStats:
    try:
        col = ColumnStats(
            name=data["name"],
            numeric=bool(data["numeric"]),
            ndv=int(data["ndv"]),
            main_values=tuple(
                (value, float(freq))
                for value, freq in data.get("main_values", ())
            )[:MAIN_VALUE_CAP],
            min_max=tuple(data["min_max"]) if data.get("min_max") else None,
            histogram=(
                tuple(data["histogram"])[:HIST_BOUNDARY_CAP]
                if data.get("histogram")
                else None
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotParseError(
            f"table {table}: malformed column entry {data!r} ({exc})"
        ) from exc
    return col


def ingest_snapshot(source: str | Path | Any) -> CatalogSnapshot:
    """Build a snapshot from a file path or a live connection.

    A string or path loads the versioned JSON document written by
    :func:`export_snapshot`. Anything else is treated as a DB-API style
    connection (``cursor()`` with ``execute``/``fetchall``) and read from
    the server's statistics views.

    Raises:
        SnapshotParseError: unsupported version, malformed document, or
            statistics violating their invariants.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SnapshotParseError(f"cannot read snapshot {path}: {exc}") from exc
        snapshot = _snapshot_from_json(data)
    else:
        snapshot = _ingest_live(source)
    validate_snapshot(snapshot)
    return snapshot


def _snapshot_from_json(data: Any) -> CatalogSnapshot:
    if not isinstance(data, dict):
        raise SnapshotParseError("snapshot document must be a JSON object")
    version = data.get("version")
    if version != SNAPSHOT_VERSION:
        raise SnapshotParseError(
            f"snapshot version {version!r} is not supported "
            f"(expected {SNAPSHOT_VERSION})"
        )
    tables: dict[str, TableStats] = {}
    for name, table_data in data.get("tables", {}).items():
        try:
            row_count = int(table_data["row_count"])
            columns = tuple(
                _column_from_json(name, col) for col in table_data.get("columns", ())
            )
        except (KeyError, TypeError) as exc:
            raise SnapshotParseError(
                f"table {name}: malformed entry ({exc})"
            ) from exc
        tables[name] = TableStats(name=name, row_count=row_count, columns=columns)
    return CatalogSnapshot(tables=tables)


def export_snapshot(snapshot: CatalogSnapshot, path: str | Path) -> None:
    """Write a snapshot as the versioned JSON document ingest reads back."""
    doc = {
        "version": SNAPSHOT_VERSION,
        "tables": {
            name: {
                "row_count": table.row_count,
                "columns": [
                    {
                        "name": col.name,
                        "numeric": col.numeric,
                        "ndv": col.ndv,
                        "main_values": [[v, f] for v, f in col.main_values],
                        "min_max": list(col.min_max) if col.min_max else None,
                        "histogram": list(col.histogram) if col.histogram else None,
                    }
                    for col in table.columns
                ],
            }
            for name, table in snapshot.tables.items()
        },
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True))


# --------------------------------------------------------------------------
# Live ingestion
# --------------------------------------------------------------------------


def _parse_pg_array(value: Any) -> list:
    """Decode a ``{a,b,"c,d"}`` style array literal; pass lists through."""
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return list(value)
    text = str(value).strip()
    if text.startswith("{") and text.endswith("}"):
        text = text[1:-1]
    items: list[str] = []
    current: list[str] = []
    in_quotes = False
    i = 0
    while i < len(text):
        ch = text[i]
        if in_quotes:
            if ch == '\\' and i + 1 < len(text):
                current.append(text[i + 1])
                i += 2
                continue
            if ch == '"':
                in_quotes = False
            else:
                current.append(ch)
        elif ch == '"':
            in_quotes = True
        elif ch == ",":
            items.append("".join(current))
            current = []
        else:
            current.append(ch)
        i += 1
    if current or items:
        items.append("".join(current))
    return items


def _coerce(value: Any, numeric: bool) -> Any:
    if not numeric or value is None:
        return value
    if isinstance(value, (int, float)):
        return value
    text = str(value)
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            return value


def _ingest_live(conn: Any) -> CatalogSnapshot:
    cur = conn.cursor()
    try:
        cur.execute(
            "SELECT relname, GREATEST(reltuples, 0)::bigint FROM pg_class "
            "WHERE relkind = 'r' AND relnamespace = 'public'::regnamespace "
            "ORDER BY relname"
        )
        row_counts = {name: int(count) for name, count in cur.fetchall()}

        cur.execute(
            "SELECT table_name, column_name, data_type "
            "FROM information_schema.columns WHERE table_schema = 'public' "
            "ORDER BY table_name, ordinal_position"
        )
        column_types: dict[str, list[tuple[str, bool]]] = {}
        for table, column, data_type in cur.fetchall():
            column_types.setdefault(table, []).append(
                (column, data_type.lower() in _NUMERIC_TYPES)
            )

        cur.execute(
            "SELECT tablename, attname, n_distinct, most_common_vals, "
            "most_common_freqs, histogram_bounds FROM pg_stats "
            "WHERE schemaname = 'public'"
        )
        per_column: dict[tuple[str, str], tuple] = {
            (row[0], row[1]): row[2:] for row in cur.fetchall()
        }
    finally:
        cur.close()

    tables: dict[str, TableStats] = {}
    for table, row_count in row_counts.items():
        columns = []
        for column, numeric in column_types.get(table, ()):
            ndv_raw, mcv_raw, mcf_raw, hist_raw = per_column.get(
                (table, column), (0, None, None, None)
            )
            ndv = float(ndv_raw or 0)
            if ndv < 0:
                # Negative means a fraction of the row count.
                ndv = -ndv * row_count
            values = [_coerce(v, numeric) for v in _parse_pg_array(mcv_raw)]
            freqs = [float(f) for f in _parse_pg_array(mcf_raw)]
            main_values = tuple(zip(values, freqs))[:MAIN_VALUE_CAP]
            histogram = None
            min_max = None
            if numeric:
                bounds = [_coerce(v, True) for v in _parse_pg_array(hist_raw)]
                if bounds:
                    histogram = tuple(bounds[:HIST_BOUNDARY_CAP])
                    min_max = (bounds[0], bounds[-1])
                elif values:
                    min_max = (min(values), max(values))
            columns.append(
                ColumnStats(
                    name=column,
                    numeric=numeric,
                    ndv=int(round(ndv)),
                    main_values=main_values,
                    min_max=min_max,
                    histogram=histogram,
                )
            )
        tables[table] = TableStats(
            name=table, row_count=row_count, columns=tuple(columns)
        )
    return CatalogSnapshot(tables=tables)


# --------------------------------------------------------------------------
# Per-query assembly and rendering
# --------------------------------------------------------------------------


def obtain_statistics(
    sql: str,
    snapshot: CatalogSnapshot,
    default_plan: PlanTree,
) -> QueryStats:
    """Assemble the statistics slice for one query.

    Cardinality entries pair the default plan's scan estimate with the
    table's row count, in FROM order. Column entries follow, columns
    sorted by name within each alias.

    Raises:
        MissingTableError: the query references a table the snapshot lacks.
        MissingScanNodeError: the default plan has no scan for an alias.
    """
    refs = table_refs(sql)

    scan_rows: dict[str, int] = {}
    for node in default_plan.walk():
        if node.operator in SCAN_OPERATORS and node.relation:
            scan_rows.setdefault(node.relation, int(round(node.est_rows)))

    card_tb: dict[str, tuple[int, int]] = {}
    ndv: dict[str, int] = {}
    main_value: dict[str, tuple[tuple[Any, float], ...]] = {}
    min_max: dict[str, tuple[float, float]] = {}
    hist: dict[str, tuple[float, ...]] = {}

    for ref in refs:
        table = snapshot.tables.get(ref.table)
        if table is None:
            raise MissingTableError(
                f"table {ref.table!r} (alias {ref.alias!r}) is not in the snapshot"
            )
        if ref.alias not in scan_rows:
            raise MissingScanNodeError(
                f"default plan has no scan node for alias {ref.alias!r}"
            )
        card_tb[ref.alias] = (scan_rows[ref.alias], table.row_count)
        for col in sorted(table.columns, key=lambda c: c.name):
            key = f"{ref.alias}.{col.name}"
            ndv[key] = col.ndv
            if col.main_values:
                main_value[key] = col.main_values
            if col.min_max is not None:
                min_max[key] = col.min_max
            if col.histogram is not None:
                hist[key] = col.histogram

    return QueryStats(
        card_tb=card_tb, ndv=ndv, main_value=main_value, min_max=min_max, hist=hist
    )


_STRUCTURAL_CHARS = set("[],:()'\" \t\n")


def _render_value(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, float)):
        return repr(value)
    text = str(value)
    if not text or any(ch in _STRUCTURAL_CHARS for ch in text):
        escaped = text.replace("'", "''")
        return f"'{escaped}'"
    return text


def _render_number(value: Any) -> str:
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return repr(value) if isinstance(value, float) else str(value)


def render_stats(stats: QueryStats) -> str:
    """Render the five statistics sections as deterministic text.

    Section order is fixed (Card_Tb, NDV, Main_Value, Min_Max, Hist) and
    every header appears even when its section is empty, so the layout is
    stable across queries.
    """
    lines: list[str] = ["Card_Tb:"]
    for alias, (est_card, row_count) in stats.card_tb.items():
        lines.append(f"{alias}:{est_card}({row_count})")
    lines.append("NDV:")
    for key, value in stats.ndv.items():
        lines.append(f"{key}:{value}")
    lines.append("Main_Value:")
    for key, pairs in stats.main_value.items():
        rendered = ", ".join(
            f"[{_render_value(value)}, {_render_number(freq)}]" for value, freq in pairs
        )
        lines.append(f"{key}:{rendered}")
    lines.append("Min_Max:")
    for key, (lo, hi) in stats.min_max.items():
        lines.append(f"{key}:[{_render_number(lo)},{_render_number(hi)}]")
    lines.append("Hist:")
    for key, bounds in stats.hist.items():
        body = ",".join(_render_number(v) for v in bounds)
        lines.append(f"{key}:[{body}]")
    return "\n".join(lines)
