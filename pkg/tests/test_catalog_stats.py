"""Statistics collection, serialization formats, and snapshot IO."""

from __future__ import annotations

import json

import pytest

import toyworld
from hintopt import (
    CatalogSnapshot,
    MissingScanNodeError,
    MissingTableError,
    PlanNode,
    PlanTree,
    SnapshotParseError,
    export_snapshot,
    ingest_snapshot,
    obtain_statistics,
    render_stats,
    validate_snapshot,
)
from hintopt.catalog_stats import ColumnStats, TableStats


def tiny_snapshot() -> CatalogSnapshot:
    t = TableStats(
        name="t",
        row_count=50000,
        columns=(
            ColumnStats(
                name="id",
                numeric=True,
                ndv=50000,
                main_values=((1, 0.0001),),
                min_max=(1, 50000),
                histogram=(1, 25000, 50000),
            ),
            ColumnStats(
                name="kind",
                numeric=False,
                ndv=7,
                main_values=(("movie", 0.8), ("tv, show", 0.1)),
                min_max=None,
                histogram=None,
            ),
        ),
    )
    mk = TableStats(
        name="mk",
        row_count=900,
        columns=(
            ColumnStats(
                name="movie_id",
                numeric=True,
                ndv=450,
                main_values=(),
                min_max=(3, 880),
                histogram=None,
            ),
        ),
    )
    return CatalogSnapshot(tables={"t": t, "mk": mk})


def tiny_default_plan() -> PlanTree:
    return PlanTree(
        root=PlanNode(
            operator="Hash Join",
            relation=None,
            children=[
                PlanNode(operator="Seq Scan", relation="t", children=[], est_rows=1234, est_cost=100.0),
                PlanNode(operator="Index Scan", relation="mk", children=[], est_rows=88, est_cost=10.0),
            ],
        )
    )


TINY_SQL = "SELECT count(*) FROM t, mk WHERE t.id = mk.movie_id AND t.id > 5"


def test_golden_stats_text(golden_dir):
    stats = obtain_statistics(TINY_SQL, tiny_snapshot(), tiny_default_plan())
    golden = (golden_dir / "stats_golden.txt").read_text()
    assert render_stats(stats) + "\n" == golden


def test_card_line_format():
    stats = obtain_statistics(TINY_SQL, tiny_snapshot(), tiny_default_plan())
    text = render_stats(stats)
    assert "t:1234(50000)" in text.splitlines()
    assert "mk:88(900)" in text.splitlines()


def test_section_order_and_headers_always_present():
    stats = obtain_statistics(TINY_SQL, tiny_snapshot(), tiny_default_plan())
    lines = render_stats(stats).splitlines()
    headers = [l for l in lines if l.endswith(":") and not l[0].islower()]
    assert headers == ["Card_Tb:", "NDV:", "Main_Value:", "Min_Max:", "Hist:"]


def test_headers_present_even_when_sections_empty():
    snap = CatalogSnapshot(
        tables={
            "a": TableStats(
                name="a",
                row_count=10,
                columns=(
                    ColumnStats(
                        name="x", numeric=False, ndv=2, main_values=(),
                        min_max=None, histogram=None,
                    ),
                ),
            )
        }
    )
    plan = PlanTree(root=PlanNode(operator="Seq Scan", relation="a", children=[], est_rows=5))
    text = render_stats(obtain_statistics("SELECT * FROM a", snap, plan))
    # no numeric columns: Min_Max and Hist keep their headers, no entries
    assert text.splitlines()[-2:] == ["Min_Max:", "Hist:"]


def test_non_numeric_columns_excluded_from_ranges():
    stats = obtain_statistics(TINY_SQL, tiny_snapshot(), tiny_default_plan())
    assert "t.kind" in stats.ndv
    assert "t.kind" in stats.main_value
    assert "t.kind" not in stats.min_max
    assert "t.kind" not in stats.hist


def test_stats_filtered_to_referenced_tables():
    snap = toyworld.build_snapshot()
    sql = toyworld.make_query(("t", "mk"))
    plan_doc = toyworld.plan_to_explain_doc(toyworld.toy_plan(sql, ("t", "mk"), None))
    from hintopt import parse_explain_json

    stats = obtain_statistics(sql, snap, parse_explain_json(plan_doc))
    assert set(stats.card_tb) == {"t", "mk"}
    assert all(key.split(".")[0] in ("t", "mk") for key in stats.ndv)


def test_missing_table_raises():
    plan = tiny_default_plan()
    with pytest.raises(MissingTableError):
        obtain_statistics("SELECT * FROM t, mk, absent WHERE t.id = mk.movie_id", tiny_snapshot(), plan)


def test_missing_scan_node_raises():
    plan = PlanTree(
        root=PlanNode(operator="Seq Scan", relation="t", children=[], est_rows=10)
    )
    with pytest.raises(MissingScanNodeError):
        obtain_statistics(TINY_SQL, tiny_snapshot(), plan)


def test_render_is_deterministic():
    stats1 = obtain_statistics(TINY_SQL, tiny_snapshot(), tiny_default_plan())
    stats2 = obtain_statistics(TINY_SQL, tiny_snapshot(), tiny_default_plan())
    assert render_stats(stats1) == render_stats(stats2)


def test_structural_values_are_quoted():
    stats = obtain_statistics(TINY_SQL, tiny_snapshot(), tiny_default_plan())
    text = render_stats(stats)
    assert "['tv, show', 0.1]" in text


def test_snapshot_file_round_trip(tmp_path):
    snap = toyworld.build_snapshot()
    path = tmp_path / "snap.json"
    export_snapshot(snap, path)
    assert ingest_snapshot(path) == snap
    assert ingest_snapshot(str(path)) == snap


def test_snapshot_version_is_checked(tmp_path):
    path = tmp_path / "snap.json"
    export_snapshot(tiny_snapshot(), path)
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(SnapshotParseError):
        ingest_snapshot(path)


def test_descending_histogram_rejected(tmp_path):
    path = tmp_path / "snap.json"
    export_snapshot(tiny_snapshot(), path)
    doc = json.loads(path.read_text())
    doc["tables"]["t"]["columns"][0]["histogram"] = [5, 3, 1]
    path.write_text(json.dumps(doc))
    with pytest.raises(SnapshotParseError):
        ingest_snapshot(path)


def test_bad_frequency_rejected(tmp_path):
    path = tmp_path / "snap.json"
    export_snapshot(tiny_snapshot(), path)
    doc = json.loads(path.read_text())
    doc["tables"]["t"]["columns"][0]["main_values"] = [[1, 1.7]]
    path.write_text(json.dumps(doc))
    with pytest.raises(SnapshotParseError):
        ingest_snapshot(path)


def test_min_above_max_rejected():
    with pytest.raises(SnapshotParseError):
        validate_snapshot(
            CatalogSnapshot(
                tables={
                    "a": TableStats(
                        name="a",
                        row_count=1,
                        columns=(
                            ColumnStats(
                                name="x", numeric=True, ndv=1, main_values=(),
                                min_max=(10, 1), histogram=None,
                            ),
                        ),
                    )
                }
            )
        )


def test_caps_applied_on_ingest(tmp_path):
    path = tmp_path / "snap.json"
    export_snapshot(tiny_snapshot(), path)
    doc = json.loads(path.read_text())
    col = doc["tables"]["t"]["columns"][0]
    col["main_values"] = [[i, 0.001] for i in range(40)]
    col["histogram"] = list(range(100))
    path.write_text(json.dumps(doc))
    snap = ingest_snapshot(path)
    column = snap.tables["t"].column("id")
    assert len(column.main_values) == 10
    assert len(column.histogram) == 21


def test_live_ingestion_matches_file_round_trip(tmp_path):
    """A scripted DB-API connection and the file path must agree."""

    class FakeCursor:
        def __init__(self):
            self._rows = []

        def execute(self, query, params=None):
            q = " ".join(query.split()).lower()
            if "pg_class" in q:
                self._rows = [("t", 100.0), ("mk", 20.0)]
            elif "information_schema.columns" in q:
                self._rows = [
                    ("t", "id", "integer"),
                    ("t", "kind", "text"),
                    ("mk", "movie_id", "integer"),
                ]
            elif "pg_stats" in q:
                self._rows = [
                    ("t", "id", -1.0, None, None, "{1,50,100}"),
                    ("t", "kind", 3.0, "{movie,tv}", "{0.6,0.3}", None),
                    ("mk", "movie_id", 10.0, None, None, "{2,40,90}"),
                ]
            else:
                raise AssertionError(f"unexpected query: {q}")

        def fetchall(self):
            return self._rows

        def close(self):
            pass

    class FakeConn:
        def cursor(self):
            return FakeCursor()

    live = ingest_snapshot(FakeConn())
    assert set(live.tables) == {"t", "mk"}
    assert live.tables["t"].row_count == 100
    # negative n_distinct is a ratio of rows
    assert live.tables["t"].column("id").ndv == 100
    assert live.tables["t"].column("kind").main_values == (("movie", 0.6), ("tv", 0.3))
    assert live.tables["t"].column("id").min_max == (1, 100)
    assert live.tables["mk"].column("movie_id").histogram == (2, 40, 90)

    path = tmp_path / "live.json"
    export_snapshot(live, path)
    assert ingest_snapshot(path) == live
