"""FROM/WHERE surface parsing for the narrow SQL shape the pipeline uses."""

from __future__ import annotations

import pytest

from hintopt import SqlParseError, column_refs, replace_where, table_refs, where_conjuncts


def test_table_refs_plain_and_aliased():
    refs = table_refs("SELECT * FROM title t, movie_keyword AS mk, keyword WHERE t.id = mk.movie_id")
    assert [(r.table, r.alias) for r in refs] == [
        ("title", "t"),
        ("movie_keyword", "mk"),
        ("keyword", "keyword"),
    ]


def test_table_refs_without_where_clause():
    refs = table_refs("SELECT count(*) FROM a, b")
    assert [r.alias for r in refs] == ["a", "b"]


def test_table_refs_stops_at_clause_keywords():
    refs = table_refs("SELECT x FROM a, b GROUP BY x ORDER BY x LIMIT 5")
    assert [r.alias for r in refs] == ["a", "b"]


def test_table_refs_rejects_join_keyword():
    with pytest.raises(SqlParseError):
        table_refs("SELECT * FROM a JOIN b ON a.x = b.y")


def test_table_refs_rejects_subquery():
    with pytest.raises(SqlParseError):
        table_refs("SELECT * FROM (SELECT 1) s")


def test_table_refs_rejects_duplicate_alias():
    with pytest.raises(SqlParseError):
        table_refs("SELECT * FROM title t, top_titles t")


def test_table_refs_requires_from():
    with pytest.raises(SqlParseError):
        table_refs("SELECT 1")


def test_where_conjuncts_split_on_top_level_and():
    sql = "SELECT * FROM a, b WHERE a.x = b.y AND a.z > 5 AND b.name = 'AND'"
    assert where_conjuncts(sql) == ["a.x = b.y", "a.z > 5", "b.name = 'AND'"]


def test_where_conjuncts_empty_without_where():
    assert where_conjuncts("SELECT * FROM a") == []


def test_where_conjuncts_reject_or():
    with pytest.raises(SqlParseError):
        where_conjuncts("SELECT * FROM a WHERE a.x = 1 OR a.y = 2")


def test_where_conjuncts_stop_before_order_by():
    sql = "SELECT * FROM a WHERE a.x = 1 ORDER BY a.x"
    assert where_conjuncts(sql) == ["a.x = 1"]


def test_replace_where_swaps_predicates():
    sql = "SELECT * FROM a, b WHERE a.x = b.y AND a.z > 5"
    out = replace_where(sql, ["a.x = b.y"])
    assert out == "SELECT * FROM a, b WHERE a.x = b.y"


def test_replace_where_adds_clause_when_missing():
    out = replace_where("SELECT * FROM a", ["a.x = 1"])
    assert out == "SELECT * FROM a WHERE a.x = 1"


def test_replace_where_can_drop_the_clause():
    out = replace_where("SELECT * FROM a WHERE a.x = 1", [])
    assert out == "SELECT * FROM a"


def test_column_refs():
    refs = column_refs("a.x = b.y AND a.z > 5")
    assert set(refs) == {("a", "x"), ("b", "y"), ("a", "z")}
