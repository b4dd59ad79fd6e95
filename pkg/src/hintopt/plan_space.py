"""Counting and enumeration of the plan search space.

A plan here is a simplified plan: a binary join tree over a fixed set of
table aliases, with a scan type per leaf and a join type per internal node.
Children are ordered (outer vs. inner input), so a tree and its mirror are
distinct plans; ``count_unordered_shapes`` is provided for the convention
where they are not.

Enumeration is exhaustive and duplicate-free, and is guarded by a table
cap because the count grows factorially.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass
from itertools import permutations, product

from .errors import CapExceededError
from .plan_model import JoinNode, JoinType, ScanNode, ScanType, SimpleNode, SimplifiedPlan

DEFAULT_TABLE_CAP = 6

_LEAF = None  # marker inside shape templates


class ShapePolicy(enum.Enum):
    ALL_SHAPES = "all"
    LEFT_DEEP_ONLY = "leftdeep"


@dataclass(frozen=True)
class SpaceSpec:
    """Parameters of a plan space.

    ``scan_types`` and ``join_types`` are the allowed subsets; order is
    normalized so equal subsets compare equal.
    """

    n_tables: int
    scan_types: tuple[ScanType, ...] = tuple(ScanType)
    join_types: tuple[JoinType, ...] = tuple(JoinType)
    shape_policy: ShapePolicy = ShapePolicy.ALL_SHAPES

    def __post_init__(self) -> None:
        if self.n_tables < 1:
            raise ValueError(f"n_tables must be >= 1, got {self.n_tables}")
        if not self.scan_types:
            raise ValueError("scan_types must be nonempty")
        if not self.join_types and self.n_tables > 1:
            raise ValueError("join_types must be nonempty for multi-table spaces")
        object.__setattr__(self, "scan_types", _normalize(self.scan_types, ScanType))
        object.__setattr__(self, "join_types", _normalize(self.join_types, JoinType))


def _normalize(types: Sequence, enum_cls: type) -> tuple:
    members = list(enum_cls)
    seen = set(types)
    if len(seen) != len(tuple(types)):
        raise ValueError(f"duplicate entries in {tuple(types)!r}")
    return tuple(t for t in members if t in seen)


def count_tree_shapes(n_tables: int) -> int:
    """Number of ordered binary tree shapes over ``n_tables`` leaves.

    This is the Catalan number C(n-1): one shape for one or two tables,
    fourteen for five tables, and so on.
    """
    if n_tables < 1:
        raise ValueError(f"n_tables must be >= 1, got {n_tables}")
    k = n_tables - 1
    return math.comb(2 * k, k) // (k + 1)


def count_unordered_shapes(n_tables: int) -> int:
    """Number of shapes when a join's children are an unordered pair.

    Equals the double factorial (2n-3)!! over distinct leaves; exposed for
    comparison with the ordered convention used everywhere else here.
    """
    if n_tables < 1:
        raise ValueError(f"n_tables must be >= 1, got {n_tables}")
    if n_tables == 1:
        return 1
    result = 1
    for i in range(3, 2 * n_tables - 2, 2):
        result *= i
    return result


def count_plans(spec: SpaceSpec) -> int:
    """Closed-form size of the plan space described by ``spec``.

    shapes * orderings * scan assignments * join assignments, where the
    shape factor is Catalan(n-1) for all shapes and 1 for left-deep only.
    """
    n = spec.n_tables
    shapes = 1 if spec.shape_policy is ShapePolicy.LEFT_DEEP_ONLY else count_tree_shapes(n)
    return (
        shapes
        * math.factorial(n)
        * len(spec.scan_types) ** n
        * len(spec.join_types) ** (n - 1)
    )


def _all_shapes(n: int) -> list:
    """All ordered binary tree shapes with ``n`` leaves, as nested pairs."""
    if n == 1:
        return [_LEAF]
    shapes = []
    for left_size in range(1, n):
        for left in _all_shapes(left_size):
            for right in _all_shapes(n - left_size):
                shapes.append((left, right))
    return shapes


def _left_deep_shape(n: int):
    shape = _LEAF
    for _ in range(n - 1):
        shape = (shape, _LEAF)
    return shape


def _shapes_for(spec: SpaceSpec) -> list:
    if spec.shape_policy is ShapePolicy.LEFT_DEEP_ONLY:
        return [_left_deep_shape(spec.n_tables)]
    return _all_shapes(spec.n_tables)


def _postfix(shape) -> tuple[bool, ...]:
    """Flatten a shape into postfix build instructions (False=leaf, True=join)."""
    out: list[bool] = []

    def walk(node) -> None:
        if node is _LEAF:
            out.append(False)
        else:
            walk(node[0])
            walk(node[1])
            out.append(True)

    walk(shape)
    return tuple(out)


def enumerate_plans(
    spec: SpaceSpec,
    tables: Sequence[str],
    *,
    cap: int = DEFAULT_TABLE_CAP,
) -> Iterator[SimplifiedPlan]:
    """Yield every plan in the space exactly once, deterministically.

    Iteration order is: shape, then table ordering, then scan assignment,
    then join assignment; each inner level cycles fastest. The order is
    part of the contract because ties elsewhere break toward the first
    enumerated plan.

    Raises:
        CapExceededError: if ``spec.n_tables`` exceeds ``cap``.
        ValueError: if ``tables`` does not match ``spec.n_tables`` or
            contains duplicates.
    """
    n = spec.n_tables
    if n > cap:
        raise CapExceededError(
            f"enumeration over {n} tables exceeds the cap of {cap}"
        )
    tables = tuple(tables)
    if len(tables) != n:
        raise ValueError(f"expected {n} tables, got {len(tables)}")
    if len(set(tables)) != n:
        raise ValueError(f"duplicate table aliases in {tables!r}")

    # Scan leaves are interned: every (type, alias) pair is built once.
    leaves = {
        (scan, alias): ScanNode(scan, alias)
        for scan in spec.scan_types
        for alias in tables
    }

    for shape in _shapes_for(spec):
        instructions = _postfix(shape)
        for ordering in permutations(tables):
            for scans in product(spec.scan_types, repeat=n):
                for joins in product(spec.join_types, repeat=n - 1):
                    stack: list[SimpleNode] = []
                    leaf_i = 0
                    join_i = 0
                    for is_join in instructions:
                        if is_join:
                            right = stack.pop()
                            left = stack.pop()
                            stack.append(JoinNode(joins[join_i], left, right))
                            join_i += 1
                        else:
                            stack.append(leaves[(scans[leaf_i], ordering[leaf_i])])
                            leaf_i += 1
                    # Leaves are filled left to right, so the in-order alias
                    # sequence is exactly the chosen ordering.
                    yield SimplifiedPlan(root=stack[0], table_aliases=ordering)


def brute_force_optimal(
    spec: SpaceSpec,
    tables: Sequence[str],
    cost_fn: Callable[[SimplifiedPlan], float],
    *,
    cap: int = DEFAULT_TABLE_CAP,
) -> tuple[SimplifiedPlan, float]:
    """Exhaustively minimize ``cost_fn`` over the plan space.

    Ties break toward the earlier plan in enumeration order. Returns the
    winning plan and its cost.
    """
    best_plan: SimplifiedPlan | None = None
    best_cost = math.inf
    for plan in enumerate_plans(spec, tables, cap=cap):
        cost = cost_fn(plan)
        if best_plan is None or cost < best_cost:
            best_plan = plan
            best_cost = cost
    if best_plan is None:  # unreachable: the space is never empty
        raise ValueError("empty plan space")
    return best_plan, best_cost
