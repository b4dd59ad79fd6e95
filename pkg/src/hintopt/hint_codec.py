"""Serialization between simplified plans and planner hint text.

A plan's hint form has three parts: one scan hint per leaf, one join hint
per internal node, and a single Leading hint that fixes the join order as a
fully parenthesized expression. ``transform_plan`` and ``hints_to_plan``
are exact inverses on that form, so the text is a lossless encoding of the
simplified plan.

Rendered text uses one hint per line, scan hints first (preorder leaf
order), then join hints (emitted when both inputs of a join have been
visited, innermost first), then the Leading hint. The optional comment
wrapper ``/*+ ... */`` makes the block injectable into SQL.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import HintParseError, InconsistentHintsError
from .plan_model import (
    JoinNode,
    JoinType,
    ScanNode,
    ScanType,
    SimpleNode,
    SimplifiedPlan,
)

WRAPPER_OPEN = "/*+"
WRAPPER_CLOSE = "*/"

_SCAN_TOKENS = {t.token: t for t in ScanType}
_JOIN_TOKENS = {t.token: t for t in JoinType}
# Accepted on input only; rendering always emits the canonical token.
_JOIN_ALIASES = {"NestedLoop": JoinType.NEST_LOOP}

_ALIAS_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class HintSet:
    """One plan, encoded as hints.

    ``leading`` holds the parenthesized join-order expression without the
    ``Leading(...)`` wrapper: ``"(((k mk)t)mi)"`` for four tables, or a bare
    alias for a single-table plan.
    """

    scan_hints: tuple[tuple[ScanType, str], ...]
    join_hints: tuple[tuple[JoinType, tuple[str, ...]], ...]
    leading: str

    @property
    def leading_hint(self) -> str:
        return f"Leading({self.leading})"

    @property
    def aliases(self) -> tuple[str, ...]:
        return tuple(alias for _, alias in self.scan_hints)


def transform_plan(plan: SimplifiedPlan) -> HintSet:
    """Encode a simplified plan as a hint set.

    Scan hints appear in preorder leaf order. Each join hint lists the
    aliases under that join, left input's aliases before the right's, and
    join hints are ordered innermost first.
    """
    scans: list[tuple[ScanType, str]] = []
    joins: list[tuple[JoinType, tuple[str, ...]]] = []

    def visit(node: SimpleNode) -> tuple[str, ...]:
        if isinstance(node, ScanNode):
            scans.append((node.scan_type, node.alias))
            return (node.alias,)
        left = visit(node.left)
        right = visit(node.right)
        joins.append((node.join_type, left + right))
        return left + right

    visit(plan.root)
    return HintSet(
        scan_hints=tuple(scans),
        join_hints=tuple(joins),
        leading=_leading_expr(plan.root),
    )


def _leading_expr(node: SimpleNode) -> str:
    if isinstance(node, ScanNode):
        return node.alias
    left = _leading_expr(node.left)
    right = _leading_expr(node.right)
    # space only where adjacent aliases would merge: "((k mk)t)mi", not
    # "((k mk) t) mi"
    sep = "" if left.endswith(")") else " "
    return f"({left}{sep}{right})"


def render_hints(hints: HintSet, *, wrap: bool = False) -> str:
    """Render a hint set as text, one hint per line, order S then J then L.

    With ``wrap=True`` the block is enclosed in ``/*+ ... */`` so it can be
    prepended to a SQL statement.
    """
    lines = [f"{scan.token}({alias})" for scan, alias in hints.scan_hints]
    lines += [
        f"{join.token}({' '.join(aliases)})" for join, aliases in hints.join_hints
    ]
    lines.append(hints.leading_hint)
    body = "\n".join(lines)
    if wrap:
        return f"{WRAPPER_OPEN}\n{body}\n{WRAPPER_CLOSE}"
    return body


@dataclass
class _Cursor:
    """Character cursor over hint text that tracks line/column positions."""

    text: str
    pos: int = 0
    line: int = 1
    col: int = 1

    def eof(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def advance(self) -> str:
        ch = self.text[self.pos]
        self.pos += 1
        if ch == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        return ch

    def skip_ws(self) -> None:
        while not self.eof() and self.peek().isspace():
            self.advance()

    def error(self, message: str, rule: str) -> HintParseError:
        return HintParseError(message, line=self.line, col=self.col, rule=rule)

    def expect(self, ch: str, rule: str) -> None:
        if self.peek() != ch:
            got = self.peek() or "end of input"
            raise self.error(f"expected {ch!r}, got {got!r}", rule)
        self.advance()

    def name(self, rule: str) -> str:
        match = _ALIAS_RE.match(self.text, self.pos)
        if match is None or match.start() != self.pos:
            got = self.peek() or "end of input"
            raise self.error(f"expected a name, got {got!r}", rule)
        for _ in range(match.end() - match.start()):
            self.advance()
        return match.group(0)


def _strip_wrapper(text: str) -> str:
    stripped = text.strip()
    if stripped.startswith(WRAPPER_OPEN):
        if not stripped.endswith(WRAPPER_CLOSE):
            raise HintParseError(
                "comment wrapper opened but never closed",
                line=1,
                col=1,
                rule="wrapper",
            )
        stripped = stripped[len(WRAPPER_OPEN) : -len(WRAPPER_CLOSE)]
    return stripped


def _parse_leading_expr(cur: _Cursor) -> str:
    """Parse ``E := alias | "(" E " " E ")"`` and return its canonical text."""
    cur.skip_ws()
    if cur.peek() == "(":
        cur.advance()
        left = _parse_leading_expr(cur)
        cur.skip_ws()
        right = _parse_leading_expr(cur)
        cur.skip_ws()
        cur.expect(")", "leading")
        sep = "" if left.endswith(")") else " "
        return f"({left}{sep}{right})"
    return cur.name("leading")


def parse_hints(text: str) -> HintSet:
    """Parse hint text into a :class:`HintSet`.

    Accepts the comment-wrapped and unwrapped forms, arbitrary whitespace
    between tokens, and the ``NestedLoop`` spelling for nested-loop joins.
    The parsed set is validated for consistency: scan hints must cover the
    Leading aliases exactly and every join in the Leading expression must
    have exactly one matching join hint.

    Raises:
        HintParseError: grammar violation, with line/column/rule.
        InconsistentHintsError: well-formed hints that contradict each other.
    """
    cur = _Cursor(_strip_wrapper(text))
    scans: list[tuple[ScanType, str]] = []
    joins: list[tuple[JoinType, tuple[str, ...]]] = []
    leading: str | None = None

    while True:
        cur.skip_ws()
        if cur.eof():
            break
        name = cur.name("hint")
        cur.skip_ws()
        cur.expect("(", name)
        if name == "Leading":
            if leading is not None:
                raise InconsistentHintsError("more than one Leading hint")
            leading = _parse_leading_expr(cur)
            cur.skip_ws()
            cur.expect(")", "leading")
            continue
        if name in _SCAN_TOKENS:
            cur.skip_ws()
            alias = cur.name("scan")
            cur.skip_ws()
            cur.expect(")", "scan")
            scans.append((_SCAN_TOKENS[name], alias))
            continue
        join_type = _JOIN_TOKENS.get(name) or _JOIN_ALIASES.get(name)
        if join_type is not None:
            aliases: list[str] = []
            while True:
                cur.skip_ws()
                if cur.peek() == ")":
                    cur.advance()
                    break
                aliases.append(cur.name("join"))
            if len(aliases) < 2:
                raise InconsistentHintsError(
                    f"join hint {name} needs at least two aliases, "
                    f"got {aliases!r}"
                )
            joins.append((join_type, tuple(aliases)))
            continue
        raise cur.error(f"unknown hint name {name!r}", "hint")

    if leading is None:
        raise InconsistentHintsError("missing Leading hint")

    hints = HintSet(
        scan_hints=tuple(scans),
        join_hints=tuple(joins),
        leading=leading,
    )
    hints_to_plan(hints)  # consistency check; result discarded
    return hints


def _parse_shape(expr: str) -> tuple:
    """Parse a leading expression into a nested-tuple shape of aliases."""
    cur = _Cursor(expr)

    def parse() -> tuple | str:
        cur.skip_ws()
        if cur.peek() == "(":
            cur.advance()
            left = parse()
            cur.skip_ws()
            right = parse()
            cur.skip_ws()
            cur.expect(")", "leading")
            return (left, right)
        return cur.name("leading")

    shape = parse()
    cur.skip_ws()
    if not cur.eof():
        raise cur.error("trailing text after leading expression", "leading")
    return shape


def hints_to_plan(hints: HintSet) -> SimplifiedPlan:
    """Reconstruct the simplified plan a hint set pins down.

    The Leading expression fixes the tree shape, scan hints type the
    leaves, and join hints type the internal nodes (matched by the alias
    list each join covers, which is unique per join).

    Raises:
        InconsistentHintsError: aliases not covered exactly once, a join
            without a matching hint, or leftover hints matching no node.
    """
    try:
        shape = _parse_shape(hints.leading)
    except HintParseError as exc:
        raise InconsistentHintsError(f"bad leading expression: {exc}") from exc

    scan_by_alias: dict[str, ScanType] = {}
    for scan_type, alias in hints.scan_hints:
        if alias in scan_by_alias:
            raise InconsistentHintsError(f"duplicate scan hint for {alias!r}")
        scan_by_alias[alias] = scan_type

    join_by_aliases: dict[tuple[str, ...], JoinType] = {}
    for join_type, aliases in hints.join_hints:
        if aliases in join_by_aliases:
            raise InconsistentHintsError(
                f"duplicate join hint for {' '.join(aliases)!r}"
            )
        join_by_aliases[aliases] = join_type

    used_joins: set[tuple[str, ...]] = set()
    seen_aliases: set[str] = set()

    def build(node: tuple | str) -> SimpleNode:
        if isinstance(node, str):
            if node in seen_aliases:
                raise InconsistentHintsError(
                    f"alias {node!r} appears twice in the Leading expression"
                )
            seen_aliases.add(node)
            if node not in scan_by_alias:
                raise InconsistentHintsError(f"no scan hint for alias {node!r}")
            return ScanNode(scan_by_alias[node], node)
        left = build(node[0])
        right = build(node[1])
        aliases = tuple(
            leaf.alias for sub in (left, right) for leaf in _leaves(sub)
        )
        join_type = join_by_aliases.get(aliases)
        if join_type is None:
            raise InconsistentHintsError(
                f"no join hint for ({' '.join(aliases)})"
            )
        used_joins.add(aliases)
        return JoinNode(join_type, left, right)

    def _leaves(node: SimpleNode):
        if isinstance(node, ScanNode):
            yield node
        else:
            yield from _leaves(node.left)
            yield from _leaves(node.right)

    root = build(shape)

    extra_scans = set(scan_by_alias) - seen_aliases
    if extra_scans:
        raise InconsistentHintsError(
            f"scan hints for aliases outside the Leading expression: "
            f"{sorted(extra_scans)!r}"
        )
    extra_joins = set(join_by_aliases) - used_joins
    if extra_joins:
        raise InconsistentHintsError(
            f"join hints matching no join in the Leading expression: "
            f"{sorted(extra_joins)!r}"
        )
    return SimplifiedPlan.from_root(root)
