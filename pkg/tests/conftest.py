from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import toyworld
from hintopt import CatalogSnapshot, FixtureClient, FixtureStore, default_arm_subset

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return GOLDEN


@pytest.fixture(scope="session")
def arms5():
    return default_arm_subset()


@pytest.fixture(scope="session")
def snapshot() -> CatalogSnapshot:
    return toyworld.build_snapshot()


@pytest.fixture(scope="session")
def small_queries() -> list[tuple[str, tuple[str, ...]]]:
    """Five queries over 2-4 tables, enough for most fixture tests."""
    return toyworld.corpus_queries(5)


@pytest.fixture(scope="session")
def world_store(small_queries, arms5) -> FixtureStore:
    store = FixtureStore()
    for sql, aliases in small_queries:
        toyworld.record_query(store, sql, aliases, arms5)
    return store


@pytest.fixture()
def world_client(world_store) -> FixtureClient:
    return FixtureClient(world_store)
