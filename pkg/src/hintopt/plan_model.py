"""Plan-tree model: raw planner trees and their simplified form.

A raw :class:`PlanTree` mirrors what the DBMS planner reports: scans at the
leaves, joins at internal nodes, and auxiliary operators (aggregation, sort,
hash build, gather, materialize, memoize) in between. Simplification strips
the auxiliary operators and keeps only the scan/join skeleton, which is the
part a hint set can pin down.

Operator names are normalized through a versioned table. Unknown names are
an error, never a silent pass-through, so a planner upgrade that introduces
a new operator fails loudly instead of corrupting downstream hint text.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import MalformedPlanError, UnknownOperatorError

OPERATOR_TABLE_VERSION = 1


class ScanType(enum.Enum):
    """Scan methods a hint can force, keyed by their hint token."""

    SEQ_SCAN = "SeqScan"
    INDEX_SCAN = "IndexScan"
    INDEX_ONLY_SCAN = "IndexOnlyScan"
    TID_SCAN = "TidScan"
    BITMAP_SCAN = "BitmapScan"

    @property
    def token(self) -> str:
        return self.value


class JoinType(enum.Enum):
    """Join methods a hint can force, keyed by their hint token."""

    NEST_LOOP = "NestLoop"
    HASH_JOIN = "HashJoin"
    MERGE_JOIN = "MergeJoin"

    @property
    def token(self) -> str:
        return self.value


class NodeKind(enum.Enum):
    SCAN = "scan"
    JOIN = "join"
    OTHER = "other"


# Version 1 of the operator normalization table. Join modifiers (semi, anti,
# outer) do not change the physical method, so they are ignored: the method
# comes from the operator name alone.
SCAN_OPERATORS: dict[str, ScanType] = {
    "Seq Scan": ScanType.SEQ_SCAN,
    "Index Scan": ScanType.INDEX_SCAN,
    "Index Only Scan": ScanType.INDEX_ONLY_SCAN,
    "Tid Scan": ScanType.TID_SCAN,
    "Bitmap Heap Scan": ScanType.BITMAP_SCAN,
}

JOIN_OPERATORS: dict[str, JoinType] = {
    "Nested Loop": JoinType.NEST_LOOP,
    "Hash Join": JoinType.HASH_JOIN,
    "Merge Join": JoinType.MERGE_JOIN,
}

# Pass-through operators: they carry no scan/join decision and are spliced
# out during simplification. Parallel operators (Gather, Gather Merge) fall
# in this bucket; parallelism does not change the join order or methods.
PASSTHROUGH_OPERATORS: frozenset[str] = frozenset(
    {
        "Aggregate",
        "GroupAggregate",
        "HashAggregate",
        "WindowAgg",
        "Group",
        "Sort",
        "Incremental Sort",
        "Hash",
        "Gather",
        "Gather Merge",
        "Materialize",
        "Memoize",
        "Limit",
        "LockRows",
        "ProjectSet",
        "Unique",
    }
)

# Bitmap index machinery below a Bitmap Heap Scan. The pair collapses into a
# single bitmap scan leaf during simplification.
BITMAP_INDEX_OPERATORS: frozenset[str] = frozenset(
    {"Bitmap Index Scan", "BitmapAnd", "BitmapOr"}
)

# Operators this model refuses outright. Hints cannot be applied inside
# nested plans, so queries that produce them are rejected, not approximated.
UNSUPPORTED_OPERATORS: frozenset[str] = frozenset(
    {
        "CTE Scan",
        "Subquery Scan",
        "SubPlan",
        "InitPlan",
        "Recursive Union",
        "WorkTable Scan",
        "Function Scan",
        "Table Function Scan",
        "Values Scan",
        "Foreign Scan",
        "Named Tuplestore Scan",
        "Append",
        "Merge Append",
        "Result",
        "SetOp",
        "ModifyTable",
    }
)


def classify_operator(operator: str) -> NodeKind:
    """Map an operator name onto its node kind.

    Raises:
        UnknownOperatorError: for names outside the normalization table,
            including the explicitly unsupported ones (nested-plan machinery,
            partitioned appends). The message distinguishes the two cases.
    """
    if operator in SCAN_OPERATORS:
        return NodeKind.SCAN
    if operator in JOIN_OPERATORS:
        return NodeKind.JOIN
    if operator in PASSTHROUGH_OPERATORS:
        return NodeKind.OTHER
    if operator in BITMAP_INDEX_OPERATORS:
        # Only meaningful underneath a Bitmap Heap Scan; simplify() absorbs
        # them there and rejects them anywhere else.
        return NodeKind.OTHER
    if operator in UNSUPPORTED_OPERATORS:
        raise UnknownOperatorError(
            f"operator {operator!r} is not supported (hints cannot be "
            f"applied to plans containing it)"
        )
    raise UnknownOperatorError(
        f"operator {operator!r} is not in the normalization table "
        f"(version {OPERATOR_TABLE_VERSION})"
    )


@dataclass
class PlanNode:
    """One node of a raw planner tree.

    ``relation`` is the table alias for scan nodes and None elsewhere.
    ``est_rows`` and ``est_cost`` carry the planner's estimates; they are
    informational and do not participate in equality-sensitive logic.
    """

    operator: str
    relation: str | None = None
    children: list[PlanNode] = field(default_factory=list)
    est_rows: float = 0.0
    est_cost: float = 0.0

    def walk(self):
        """Yield this node and all descendants, preorder."""
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class PlanTree:
    """A raw planner tree as reported by EXPLAIN."""

    root: PlanNode

    def walk(self):
        yield from self.root.walk()


@dataclass(frozen=True, slots=True)
class ScanNode:
    """Leaf of a simplified plan: one scan method applied to one alias."""

    scan_type: ScanType
    alias: str


@dataclass(frozen=True, slots=True)
class JoinNode:
    """Internal node of a simplified plan. Children are ordered: the left
    child is the outer input, the right child the inner input."""

    join_type: JoinType
    left: SimpleNode
    right: SimpleNode


SimpleNode = ScanNode | JoinNode


@dataclass(frozen=True, slots=True)
class SimplifiedPlan:
    """Scan/join skeleton of a plan.

    ``table_aliases`` lists the leaf aliases in left-to-right order; it
    always holds one more alias than the plan has joins.
    """

    root: SimpleNode
    table_aliases: tuple[str, ...]

    def __post_init__(self) -> None:
        leaves = tuple(iter_leaves(self.root))
        aliases = tuple(leaf.alias for leaf in leaves)
        if aliases != self.table_aliases:
            raise MalformedPlanError(
                f"table_aliases {self.table_aliases!r} do not match the "
                f"leaf order {aliases!r}"
            )
        if len(set(aliases)) != len(aliases):
            raise MalformedPlanError(f"duplicate alias among leaves: {aliases!r}")

    @classmethod
    def from_root(cls, root: SimpleNode) -> SimplifiedPlan:
        return cls(root=root, table_aliases=tuple(leaf.alias for leaf in iter_leaves(root)))

    def iter_leaves(self):
        return iter_leaves(self.root)

    def iter_joins(self):
        return iter_joins(self.root)

    def leaf_count(self) -> int:
        return len(self.table_aliases)

    def join_count(self) -> int:
        return len(self.table_aliases) - 1


def iter_leaves(node: SimpleNode):
    """Yield the scan leaves of a simplified subtree, left to right."""
    stack = [node]
    while stack:
        current = stack.pop()
        if isinstance(current, ScanNode):
            yield current
        else:
            stack.append(current.right)
            stack.append(current.left)


def iter_joins(node: SimpleNode):
    """Yield the join nodes of a simplified subtree, post-visit order."""
    if isinstance(node, JoinNode):
        yield from iter_joins(node.left)
        yield from iter_joins(node.right)
        yield node


def _is_bitmap_machinery(node: PlanNode) -> bool:
    if node.operator not in BITMAP_INDEX_OPERATORS:
        return False
    return all(_is_bitmap_machinery(child) for child in node.children)


def _simplify_node(node: PlanNode) -> SimpleNode:
    kind = classify_operator(node.operator)

    if kind is NodeKind.SCAN:
        if node.operator == "Bitmap Heap Scan":
            # The heap scan plus its bitmap-index descendants form one
            # logical scan; collapse them into a single leaf.
            for child in node.children:
                if not _is_bitmap_machinery(child):
                    raise MalformedPlanError(
                        f"Bitmap Heap Scan on {node.relation!r} has a "
                        f"non-bitmap child {child.operator!r}"
                    )
        elif node.children:
            raise MalformedPlanError(
                f"scan node {node.operator!r} on {node.relation!r} has "
                f"{len(node.children)} children, expected 0"
            )
        if not node.relation:
            raise MalformedPlanError(
                f"scan node {node.operator!r} lacks a relation alias"
            )
        return ScanNode(SCAN_OPERATORS[node.operator], node.relation)

    if kind is NodeKind.JOIN:
        if len(node.children) != 2:
            raise MalformedPlanError(
                f"join node {node.operator!r} has {len(node.children)} "
                f"children, expected 2"
            )
        left = _simplify_node(node.children[0])
        right = _simplify_node(node.children[1])
        return JoinNode(JOIN_OPERATORS[node.operator], left, right)

    # Pass-through node: splice it out. Bitmap machinery reaching this point
    # sits outside a Bitmap Heap Scan and is malformed.
    if node.operator in BITMAP_INDEX_OPERATORS:
        raise MalformedPlanError(
            f"{node.operator!r} outside a Bitmap Heap Scan"
        )
    if len(node.children) != 1:
        raise MalformedPlanError(
            f"pass-through node {node.operator!r} has {len(node.children)} "
            f"children, expected 1"
        )
    return _simplify_node(node.children[0])


def simplify(plan: PlanTree | PlanNode) -> SimplifiedPlan:
    """Reduce a raw plan to its scan/join skeleton.

    Pass-through operators are spliced out, a bitmap heap/index pair
    collapses to a single bitmap scan leaf, and the relative order of the
    remaining nodes is preserved.

    Raises:
        MalformedPlanError: wrong arity or a missing/duplicate alias.
        UnknownOperatorError: an operator outside the normalization table.
    """
    root = plan.root if isinstance(plan, PlanTree) else plan
    return SimplifiedPlan.from_root(_simplify_node(root))
