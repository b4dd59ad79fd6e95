"""Hint text round-trips, the byte-exact golden example, and parse errors."""

from __future__ import annotations

import json
import random
import re

import pytest
from hypothesis import given, settings, strategies as st

import toyworld
from hintopt import (
    HintParseError,
    HintSet,
    InconsistentHintsError,
    JoinNode,
    JoinType,
    ScanNode,
    ScanType,
    SimplifiedPlan,
    hints_to_plan,
    parse_explain_json,
    parse_hints,
    render_hints,
    simplify,
    transform_plan,
)


def figure_plan() -> SimplifiedPlan:
    k = ScanNode(scan_type=ScanType.SEQ_SCAN, alias="k")
    mk = ScanNode(scan_type=ScanType.BITMAP_SCAN, alias="mk")
    t = ScanNode(scan_type=ScanType.INDEX_SCAN, alias="t")
    mi = ScanNode(scan_type=ScanType.SEQ_SCAN, alias="mi")
    j1 = JoinNode(join_type=JoinType.NEST_LOOP, left=k, right=mk)
    j2 = JoinNode(join_type=JoinType.MERGE_JOIN, left=j1, right=t)
    j3 = JoinNode(join_type=JoinType.HASH_JOIN, left=j2, right=mi)
    return SimplifiedPlan.from_root(j3)


def test_golden_four_table_example(golden_dir):
    hints = transform_plan(figure_plan())
    assert hints.leading_hint == "Leading((((k mk)t)mi))"
    assert hints.scan_hints == (
        (ScanType.SEQ_SCAN, "k"),
        (ScanType.BITMAP_SCAN, "mk"),
        (ScanType.INDEX_SCAN, "t"),
        (ScanType.SEQ_SCAN, "mi"),
    )
    assert hints.join_hints == (
        (JoinType.NEST_LOOP, ("k", "mk")),
        (JoinType.MERGE_JOIN, ("k", "mk", "t")),
        (JoinType.HASH_JOIN, ("k", "mk", "t", "mi")),
    )
    golden = (golden_dir / "hints_kmktmi.txt").read_text()
    assert render_hints(hints) + "\n" == golden


def test_golden_explain_to_hint_text(golden_dir):
    doc = json.loads((golden_dir / "explain_kmktmi.json").read_text())
    hints = transform_plan(simplify(parse_explain_json(doc)))
    golden = (golden_dir / "hints_kmktmi.txt").read_text()
    assert render_hints(hints) + "\n" == golden


def test_two_table_plan():
    a = ScanNode(scan_type=ScanType.SEQ_SCAN, alias="a")
    b = ScanNode(scan_type=ScanType.SEQ_SCAN, alias="b")
    plan = SimplifiedPlan.from_root(
        JoinNode(join_type=JoinType.HASH_JOIN, left=a, right=b)
    )
    hints = transform_plan(plan)
    assert hints.scan_hints == ((ScanType.SEQ_SCAN, "a"), (ScanType.SEQ_SCAN, "b"))
    assert hints.join_hints == ((JoinType.HASH_JOIN, ("a", "b")),)
    assert hints.leading_hint == "Leading((a b))"


def test_single_table_plan():
    plan = SimplifiedPlan.from_root(ScanNode(scan_type=ScanType.INDEX_SCAN, alias="a"))
    hints = transform_plan(plan)
    text = render_hints(hints)
    assert text == "IndexScan(a)\nLeading(a)"
    assert hints_to_plan(parse_hints(text)) == plan


def test_join_hints_concatenate_left_then_right():
    # bushy shape (a b) x (c d): top join hint lists a b c d
    a = ScanNode(scan_type=ScanType.SEQ_SCAN, alias="a")
    b = ScanNode(scan_type=ScanType.SEQ_SCAN, alias="b")
    c = ScanNode(scan_type=ScanType.SEQ_SCAN, alias="c")
    d = ScanNode(scan_type=ScanType.SEQ_SCAN, alias="d")
    left = JoinNode(join_type=JoinType.HASH_JOIN, left=a, right=b)
    right = JoinNode(join_type=JoinType.MERGE_JOIN, left=c, right=d)
    plan = SimplifiedPlan.from_root(
        JoinNode(join_type=JoinType.NEST_LOOP, left=left, right=right)
    )
    hints = transform_plan(plan)
    assert hints.join_hints[-1] == (JoinType.NEST_LOOP, ("a", "b", "c", "d"))
    assert hints.leading == "((a b)(c d))"
    assert hints_to_plan(parse_hints(render_hints(hints))) == plan


def test_round_trip_random_plans():
    rng = random.Random(99)
    for _ in range(500):
        plan = toyworld.random_simplified_plan(rng, rng.randint(1, 6))
        hints = transform_plan(plan)
        assert hints_to_plan(hints) == plan
        assert parse_hints(render_hints(hints)) == hints


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6))
def test_round_trip_property(seed, n):
    plan = toyworld.random_simplified_plan(random.Random(seed), n)
    hints = transform_plan(plan)
    assert hints_to_plan(hints) == plan
    assert parse_hints(render_hints(hints)) == hints


def test_wrapped_form_parses_to_same_hints():
    hints = transform_plan(figure_plan())
    wrapped = render_hints(hints, wrap=True)
    assert wrapped.startswith("/*+") and wrapped.endswith("*/")
    assert parse_hints(wrapped) == hints


def test_nested_loop_spelling_accepted_on_parse():
    text = "SeqScan(a)\nSeqScan(b)\nNestedLoop(a b)\nLeading((a b))"
    hints = parse_hints(text)
    assert hints.join_hints == ((JoinType.NEST_LOOP, ("a", "b")),)
    # but rendering always uses the plugin spelling
    assert "NestLoop(a b)" in render_hints(hints)


def test_spaced_leading_parses_to_canonical_form():
    text = "SeqScan(a)\nSeqScan(b)\nSeqScan(c)\nHashJoin(a b)\nHashJoin(a b c)\nLeading( ( (a b) c ) )"
    hints = parse_hints(text)
    assert hints.leading == "((a b)c)"


def test_unbalanced_leading_is_parse_error():
    with pytest.raises(HintParseError):
        parse_hints("SeqScan(a)\nSeqScan(b)\nHashJoin(a b)\nLeading((a b)")


def test_parse_error_carries_position():
    try:
        parse_hints("SeqScan(a]\nLeading(a)")
    except HintParseError as err:
        assert err.line == 1
        assert err.col == 10
        assert err.rule == "scan"
    else:
        pytest.fail("expected HintParseError")


def test_parse_error_points_at_offending_line():
    # ')' missing on line 1: the unexpected token is found on line 2
    with pytest.raises(HintParseError, match="line 2"):
        parse_hints("SeqScan(a\nLeading(a)")


def test_duplicate_leading_is_inconsistent():
    text = "SeqScan(a)\nLeading(a)\nLeading(a)"
    with pytest.raises(InconsistentHintsError):
        parse_hints(text)


def test_missing_leading_is_inconsistent():
    with pytest.raises(InconsistentHintsError):
        parse_hints("SeqScan(a)")


def test_alias_without_scan_hint_is_inconsistent():
    text = "SeqScan(a)\nHashJoin(a b)\nLeading((a b))"
    with pytest.raises(InconsistentHintsError):
        parse_hints(text)


def test_extra_scan_hint_is_inconsistent():
    text = "SeqScan(a)\nSeqScan(b)\nSeqScan(c)\nHashJoin(a b)\nLeading((a b))"
    with pytest.raises(InconsistentHintsError):
        parse_hints(text)


def test_join_hint_for_missing_join_is_inconsistent():
    # leading says ((a b)c) but the hint names (b c): no such join exists
    text = (
        "SeqScan(a)\nSeqScan(b)\nSeqScan(c)\n"
        "HashJoin(a b)\nHashJoin(b c)\nLeading(((a b)c))"
    )
    with pytest.raises(InconsistentHintsError):
        parse_hints(text)


def test_single_alias_join_hint_is_inconsistent():
    with pytest.raises(InconsistentHintsError):
        parse_hints("SeqScan(a)\nHashJoin(a)\nLeading(a)")


def test_unknown_hint_name_is_parse_error():
    with pytest.raises(HintParseError):
        parse_hints("FooScan(a)\nLeading(a)")


_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|\(|\)|\s+")


def _tokens(text: str) -> list[str]:
    out = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        assert match, f"untokenizable at {pos}: {text[pos:pos + 8]!r}"
        out.append(match.group(0))
        pos = match.end()
    return out


def test_mutation_corpus_never_parses_silently():
    """Deleting any single token from valid hint text must raise.

    This is the corruption oracle: a corrupt candidate must surface as an
    error, never as a quietly different HintSet.
    """
    rng = random.Random(2024)
    corpus = [
        render_hints(transform_plan(toyworld.random_simplified_plan(rng, n)))
        for n in (1, 2, 3, 4, 5, 6)
        for _ in range(10)
    ]
    checked = 0
    for text in corpus:
        tokens = _tokens(text)
        for i, token in enumerate(tokens):
            if token.isspace():
                continue  # whitespace is not structural everywhere; skip
            mutated = "".join(tokens[:i] + tokens[i + 1 :])
            with pytest.raises((HintParseError, InconsistentHintsError)):
                parse_hints(mutated)
            checked += 1
    assert checked > 500


def test_hints_to_plan_rejects_duplicate_scan_alias():
    bad = HintSet(
        scan_hints=((ScanType.SEQ_SCAN, "a"), (ScanType.INDEX_SCAN, "a")),
        join_hints=(),
        leading="a",
    )
    with pytest.raises(InconsistentHintsError):
        hints_to_plan(bad)


def test_hints_to_plan_rejects_duplicate_join_hint():
    bad = HintSet(
        scan_hints=((ScanType.SEQ_SCAN, "a"), (ScanType.SEQ_SCAN, "b")),
        join_hints=(
            (JoinType.HASH_JOIN, ("a", "b")),
            (JoinType.MERGE_JOIN, ("a", "b")),
        ),
        leading="(a b)",
    )
    with pytest.raises(InconsistentHintsError):
        hints_to_plan(bad)
