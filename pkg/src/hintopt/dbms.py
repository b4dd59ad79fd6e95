"""DBMS access: planning and measured execution, live or from fixtures.

Two interchangeable clients implement the same surface. The live client
talks to a PostgreSQL server (optional dependency, imported lazily). The
fixture client replays a recorded store and is the backbone of offline
tests and benchmarks: a request with no recorded entry is a hard error,
never a silent guess.

Execution is measured: a configurable number of warm-up runs precede one
timed run, and timed runs are serialized process-wide so concurrent work
cannot distort latency.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

from .errors import (
    ExecutionError,
    FixtureMissError,
    PlannerError,
    UnknownOperatorError,
)
from .plan_model import PlanNode, PlanTree, simplify

log = logging.getLogger(__name__)

DEFAULT_WARMUPS = 2
FIXTURE_STORE_VERSION = 1

# All measured executions in the process take this lock, so latencies are
# never measured concurrently.
_MEASUREMENT_LOCK = threading.Lock()

KNOB_FIELDS = (
    "enable_hashjoin",
    "enable_mergejoin",
    "enable_nestloop",
    "enable_seqscan",
    "enable_indexscan",
    "enable_indexonlyscan",
)
_JOIN_KNOBS = KNOB_FIELDS[:3]
_SCAN_KNOBS = KNOB_FIELDS[3:]


@dataclass(frozen=True)
class KnobVector:
    """Six planner toggles: three join methods, three scan methods.

    At least one join knob and one scan knob must stay enabled; a vector
    that disables a whole group cannot plan anything and is rejected at
    construction time.
    """

    enable_hashjoin: bool = True
    enable_mergejoin: bool = True
    enable_nestloop: bool = True
    enable_seqscan: bool = True
    enable_indexscan: bool = True
    enable_indexonlyscan: bool = True

    def __post_init__(self) -> None:
        if not any(getattr(self, name) for name in _JOIN_KNOBS):
            raise PlannerError("knob vector disables every join method")
        if not any(getattr(self, name) for name in _SCAN_KNOBS):
            raise PlannerError("knob vector disables every scan method")

    def as_tuple(self) -> tuple[bool, ...]:
        return tuple(getattr(self, name) for name in KNOB_FIELDS)

    def as_settings(self) -> dict[str, bool]:
        return {name: getattr(self, name) for name in KNOB_FIELDS}

    def disabled(self) -> tuple[str, ...]:
        return tuple(name for name in KNOB_FIELDS if not getattr(self, name))

    @classmethod
    def from_tuple(cls, values) -> KnobVector:
        return cls(**dict(zip(KNOB_FIELDS, values)))


@dataclass(frozen=True)
class ExecutionResult:
    """Outcome of one measured execution.

    A timed-out run reports the timeout limit itself as its latency, which
    keeps downstream aggregation monotone. ``plan_used`` is the plan the
    server reported for the request, when available.
    """

    latency_ms: float
    timed_out: bool
    plan_used: PlanTree | None = None

    def __post_init__(self) -> None:
        if self.latency_ms < 0:
            raise ExecutionError(f"negative latency {self.latency_ms}")


@dataclass(frozen=True)
class ExecutionLogEntry:
    sql: str
    hints: str | None
    measured: bool


class DbClient(Protocol):
    """Planning and execution surface shared by live and fixture clients."""

    def explain(
        self,
        sql: str,
        *,
        knobs: KnobVector | None = None,
        hints: str | None = None,
    ) -> PlanTree: ...

    def execute(
        self,
        sql: str,
        *,
        knobs: KnobVector | None = None,
        hints: str | None = None,
        timeout_ms: float | None = None,
        warmups: int | None = None,
    ) -> ExecutionResult: ...

    def fetch_values(self, sql: str, *, limit: int | None = None) -> list[Any]: ...


def normalize_sql(sql: str) -> str:
    """Collapse runs of whitespace and strip a trailing semicolon.

    Literal content is left untouched, so two queries differing only in
    layout share one fixture entry but differing literals do not.
    """
    collapsed = " ".join(sql.split())
    return collapsed[:-1].rstrip() if collapsed.endswith(";") else collapsed


def fixture_key(
    sql: str,
    knobs: KnobVector | None = None,
    hints: str | None = None,
) -> str:
    """Stable lookup key for one (query, knobs, hints) request."""
    payload = json.dumps(
        [
            normalize_sql(sql),
            list(knobs.as_tuple()) if knobs is not None else None,
            hints if hints else None,
        ],
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# EXPLAIN document parsing
# --------------------------------------------------------------------------


def parse_explain_json(doc: Any) -> PlanTree:
    """Build a :class:`PlanTree` from a JSON-format EXPLAIN document.

    Accepts the raw JSON string, the top-level one-element list, the
    ``{"Plan": ...}`` wrapper, or a bare plan object. Nodes attached as
    InitPlan or SubPlan mark a nested query, which hints cannot reach, so
    they are rejected rather than dropped.
    """
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise PlannerError(f"EXPLAIN output is not valid JSON: {exc}") from exc
    if isinstance(doc, list):
        if not doc:
            raise PlannerError("EXPLAIN document is an empty list")
        doc = doc[0]
    if not isinstance(doc, dict):
        raise PlannerError(f"unexpected EXPLAIN document type {type(doc).__name__}")
    plan_json = doc.get("Plan", doc if "Node Type" in doc else None)
    if plan_json is None:
        raise PlannerError("EXPLAIN document has no 'Plan' object")
    return PlanTree(root=_build_node(plan_json))


def _build_node(node_json: dict) -> PlanNode:
    operator = node_json.get("Node Type")
    if not operator:
        raise PlannerError(f"plan node without 'Node Type': {node_json!r}")
    children = []
    for child in node_json.get("Plans", ()):
        relationship = child.get("Parent Relationship")
        if relationship in ("InitPlan", "SubPlan"):
            raise UnknownOperatorError(
                f"plan contains a nested subplan ({relationship} under "
                f"{operator!r}); hints cannot be applied to nested queries"
            )
        children.append(_build_node(child))
    return PlanNode(
        operator=operator,
        relation=node_json.get("Alias") or node_json.get("Relation Name"),
        children=children,
        est_rows=float(node_json.get("Plan Rows", 0)),
        est_cost=float(node_json.get("Total Cost", 0.0)),
    )


# --------------------------------------------------------------------------
# Fixture store and client
# --------------------------------------------------------------------------


@dataclass
class FixtureStore:
    """Recorded planner and execution behavior, keyed by request hash.

    The store is one versioned JSON document. Execution entries hold the
    true (untruncated) latency; the client applies timeout semantics at
    replay time, so one recording serves any timeout schedule.
    """

    explains: dict[str, dict] = field(default_factory=dict)
    executions: dict[str, dict] = field(default_factory=dict)
    fetches: dict[str, dict] = field(default_factory=dict)

    def add_explain(
        self,
        sql: str,
        explain_doc: Any,
        *,
        knobs: KnobVector | None = None,
        hints: str | None = None,
    ) -> None:
        key = fixture_key(sql, knobs, hints)
        self.explains[key] = {
            "sql": normalize_sql(sql),
            "knobs": list(knobs.as_tuple()) if knobs else None,
            "hints": hints if hints else None,
            "explain": explain_doc,
        }

    def add_execution(
        self,
        sql: str,
        latency_ms: float,
        *,
        knobs: KnobVector | None = None,
        hints: str | None = None,
        explain_doc: Any = None,
    ) -> None:
        key = fixture_key(sql, knobs, hints)
        self.executions[key] = {
            "sql": normalize_sql(sql),
            "knobs": list(knobs.as_tuple()) if knobs else None,
            "hints": hints if hints else None,
            "latency_ms": float(latency_ms),
            "explain": explain_doc,
        }

    def add_fetch(self, sql: str, values: list[Any]) -> None:
        key = fixture_key(sql)
        self.fetches[key] = {"sql": normalize_sql(sql), "values": list(values)}

    def to_dict(self) -> dict:
        return {
            "version": FIXTURE_STORE_VERSION,
            "explains": self.explains,
            "executions": self.executions,
            "fetches": self.fetches,
        }

    @classmethod
    def from_dict(cls, data: dict) -> FixtureStore:
        version = data.get("version")
        if version != FIXTURE_STORE_VERSION:
            raise ValueError(
                f"fixture store version {version!r} is not supported "
                f"(expected {FIXTURE_STORE_VERSION})"
            )
        return cls(
            explains=dict(data.get("explains", {})),
            executions=dict(data.get("executions", {})),
            fetches=dict(data.get("fetches", {})),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> FixtureStore:
        return cls.from_dict(json.loads(Path(path).read_text()))


class FixtureClient:
    """Replays a :class:`FixtureStore`.

    Warm-up runs are logged but unmeasured, matching the live client's
    shape. When an explain request carries hints, the returned plan is
    checked against them; a deviation is recorded and logged as a warning,
    never hidden.
    """

    def __init__(self, store: FixtureStore | str | Path, *, warmups: int = DEFAULT_WARMUPS):
        if not isinstance(store, FixtureStore):
            store = FixtureStore.load(store)
        self.store = store
        self.default_warmups = warmups
        self.execution_log: list[ExecutionLogEntry] = []
        self.fidelity_violations: list[dict] = []

    # -- planning -----------------------------------------------------------

    def explain(
        self,
        sql: str,
        *,
        knobs: KnobVector | None = None,
        hints: str | None = None,
    ) -> PlanTree:
        key = fixture_key(sql, knobs, hints)
        entry = self.store.explains.get(key)
        if entry is None:
            raise FixtureMissError(_miss_message("explain", sql, knobs, hints))
        plan = parse_explain_json(entry["explain"])
        if hints:
            self._check_fidelity(sql, hints, plan)
        return plan

    def _check_fidelity(self, sql: str, hints: str, plan: PlanTree) -> None:
        # Imported here to keep module dependencies one-directional.
        from .hint_codec import parse_hints, render_hints, transform_plan

        try:
            expected = render_hints(parse_hints(hints))
            actual = render_hints(transform_plan(simplify(plan)))
        except Exception as exc:  # malformed either side: report, don't mask
            expected, actual = hints, f"<uncomparable: {exc}>"
        if expected != actual:
            violation = {"sql": normalize_sql(sql), "hints": expected, "plan": actual}
            self.fidelity_violations.append(violation)
            log.warning(
                "plan deviates from hints for %r: expected %r, got %r",
                normalize_sql(sql),
                expected,
                actual,
            )

    # -- execution ----------------------------------------------------------

    def execute(
        self,
        sql: str,
        *,
        knobs: KnobVector | None = None,
        hints: str | None = None,
        timeout_ms: float | None = None,
        warmups: int | None = None,
    ) -> ExecutionResult:
        key = fixture_key(sql, knobs, hints)
        entry = self.store.executions.get(key)
        if entry is None:
            raise FixtureMissError(_miss_message("execute", sql, knobs, hints))

        n_warmups = self.default_warmups if warmups is None else warmups
        for _ in range(n_warmups):
            self.execution_log.append(ExecutionLogEntry(normalize_sql(sql), hints, False))
        with _MEASUREMENT_LOCK:
            self.execution_log.append(ExecutionLogEntry(normalize_sql(sql), hints, True))

        recorded = float(entry["latency_ms"])
        plan_doc = entry.get("explain") or _explain_doc_for(self.store, key)
        plan = parse_explain_json(plan_doc) if plan_doc is not None else None
        if timeout_ms is not None and recorded > timeout_ms:
            return ExecutionResult(latency_ms=float(timeout_ms), timed_out=True, plan_used=plan)
        return ExecutionResult(latency_ms=recorded, timed_out=False, plan_used=plan)

    # -- plain row access ----------------------------------------------------

    def fetch_values(self, sql: str, *, limit: int | None = None) -> list[Any]:
        key = fixture_key(sql)
        entry = self.store.fetches.get(key)
        if entry is None:
            raise FixtureMissError(_miss_message("fetch", sql, None, None))
        values = list(entry["values"])
        return values[:limit] if limit is not None else values


def _explain_doc_for(store: FixtureStore, key: str) -> Any:
    entry = store.explains.get(key)
    return entry["explain"] if entry else None


def _miss_message(
    kind: str, sql: str, knobs: KnobVector | None, hints: str | None
) -> str:
    parts = [f"no recorded {kind} for query {normalize_sql(sql)!r}"]
    if knobs is not None:
        parts.append(f"knobs disabling {knobs.disabled() or '()'}")
    if hints:
        parts.append(f"hints {hints!r}")
    return ", ".join(parts)


# --------------------------------------------------------------------------
# Live client (optional PostgreSQL dependency)
# --------------------------------------------------------------------------


class LivePostgresClient:
    """Thin client over a PostgreSQL connection.

    Requires the ``psycopg`` package (``pip install hintopt[postgres]``).
    Hints are injected as a leading ``/*+ ... */`` comment, which the
    server-side hinting extension picks up. Knobs map to ``SET`` commands
    and are reset after every call. A small connection pool allows
    parallel explain calls.
    """

    def __init__(
        self,
        dsn: str | None = None,
        *,
        connection_factory=None,
        warmups: int = DEFAULT_WARMUPS,
        pool_size: int = 4,
    ):
        if connection_factory is None:
            if dsn is None:
                raise ValueError("provide a dsn or a connection_factory")
            try:
                import psycopg
            except ImportError as exc:  # pragma: no cover - optional dep
                raise ExecutionError(
                    "the live client needs the 'psycopg' package; install "
                    "the [postgres] extra"
                ) from exc
            connection_factory = lambda: psycopg.connect(dsn, autocommit=True)
        self._connect = connection_factory
        self.default_warmups = warmups
        self._pool: list[Any] = []
        self._pool_lock = threading.Lock()
        self._pool_size = pool_size

    def _acquire(self):
        with self._pool_lock:
            if self._pool:
                return self._pool.pop()
        return self._connect()

    def _release(self, conn) -> None:
        with self._pool_lock:
            if len(self._pool) < self._pool_size:
                self._pool.append(conn)
                return
        close = getattr(conn, "close", None)
        if close:
            close()

    @staticmethod
    def _hinted(sql: str, hints: str | None) -> str:
        if not hints:
            return sql
        text = hints.strip()
        if not text.startswith("/*+"):
            text = f"/*+\n{text}\n*/"
        return f"{text}\n{sql}"

    @staticmethod
    def _apply_knobs(cur, knobs: KnobVector | None) -> None:
        if knobs is None:
            return
        for name, value in knobs.as_settings().items():
            cur.execute(f"SET {name} = {'on' if value else 'off'}")

    def explain(
        self,
        sql: str,
        *,
        knobs: KnobVector | None = None,
        hints: str | None = None,
    ) -> PlanTree:
        conn = self._acquire()
        try:
            cur = conn.cursor()
            try:
                self._apply_knobs(cur, knobs)
                cur.execute(self._hinted(f"EXPLAIN (FORMAT JSON) {sql}", hints))
                row = cur.fetchone()
            finally:
                cur.execute("RESET ALL")
                cur.close()
        except (PlannerError, UnknownOperatorError):
            raise
        except Exception as exc:
            raise PlannerError(f"EXPLAIN failed: {exc}") from exc
        finally:
            self._release(conn)
        if not row:
            raise PlannerError("EXPLAIN returned no rows")
        doc = row[0]
        return parse_explain_json(doc)

    def execute(
        self,
        sql: str,
        *,
        knobs: KnobVector | None = None,
        hints: str | None = None,
        timeout_ms: float | None = None,
        warmups: int | None = None,
    ) -> ExecutionResult:
        plan = self.explain(sql, knobs=knobs, hints=hints)
        n_warmups = self.default_warmups if warmups is None else warmups
        statement = self._hinted(sql, hints)
        conn = self._acquire()
        try:
            cur = conn.cursor()
            try:
                self._apply_knobs(cur, knobs)
                if timeout_ms is not None:
                    cur.execute(f"SET statement_timeout = {int(timeout_ms)}")
                for _ in range(n_warmups):
                    try:
                        cur.execute(statement)
                        cur.fetchall()
                    except Exception as exc:
                        if timeout_ms is not None and _is_timeout(exc):
                            # A warm-up that cannot finish inside the limit
                            # already decides the measured outcome.
                            return ExecutionResult(
                                latency_ms=float(timeout_ms),
                                timed_out=True,
                                plan_used=plan,
                            )
                        raise ExecutionError(f"warm-up failed: {exc}") from exc
                with _MEASUREMENT_LOCK:
                    started = time.perf_counter()
                    try:
                        cur.execute(statement)
                        cur.fetchall()
                    except Exception as exc:
                        if timeout_ms is not None and _is_timeout(exc):
                            return ExecutionResult(
                                latency_ms=float(timeout_ms),
                                timed_out=True,
                                plan_used=plan,
                            )
                        raise ExecutionError(f"execution failed: {exc}") from exc
                    elapsed_ms = (time.perf_counter() - started) * 1000.0
            finally:
                cur.execute("RESET ALL")
                cur.close()
        finally:
            self._release(conn)
        return ExecutionResult(latency_ms=elapsed_ms, timed_out=False, plan_used=plan)

    def fetch_values(self, sql: str, *, limit: int | None = None) -> list[Any]:
        conn = self._acquire()
        try:
            cur = conn.cursor()
            try:
                cur.execute(sql)
                rows = cur.fetchmany(limit) if limit is not None else cur.fetchall()
            finally:
                cur.close()
        except Exception as exc:
            raise ExecutionError(f"fetch failed: {exc}") from exc
        finally:
            self._release(conn)
        return [row[0] for row in rows]


def _is_timeout(exc: Exception) -> bool:
    name = type(exc).__name__
    return name in ("QueryCanceled", "CancelledError") or "timeout" in str(exc).lower()
