"""Run configuration: one JSON file, a few environment overrides.

The file selects the DBMS mode (fixture store or live server), the
generation backend (HTTP endpoint or scripted mock), sampling and
collection parameters, the arm subset, and the seed every shuffle in a run
draws from. Endpoint and credential fields can be overridden through
``HINTOPT_BACKEND_ENDPOINT``, ``HINTOPT_BACKEND_MODEL``,
``HINTOPT_BACKEND_API_KEY`` and ``HINTOPT_DSN`` so secrets stay out of
files.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .backends import HttpGenerationClient, MockGenerationClient
from .candidate_search import BaoArm, SamplingPolicy, all_bao_arms
from .dbms import DEFAULT_WARMUPS, FixtureClient, LivePostgresClient
from .errors import ConfigError
from .label_harness import DEFAULT_GLOBAL_TIMEOUT_MS

DEFAULT_ARM_IDS = (0, 1, 2, 3, 4)


@dataclass
class RunConfig:
    mode: str = "fixture"
    fixture_path: str | None = None
    dsn: str | None = None
    backend_endpoint: str | None = None
    backend_model: str | None = None
    backend_api_key: str | None = None
    mock_outputs: list[str] = field(default_factory=list)
    samples: int = 16
    temperature: float = 1.0
    max_output_tokens: int = 256
    global_timeout_ms: float = DEFAULT_GLOBAL_TIMEOUT_MS
    warmups: int = DEFAULT_WARMUPS
    arm_ids: tuple[int, ...] = DEFAULT_ARM_IDS
    seed: int = 0

    def sampling_policy(self) -> SamplingPolicy:
        return SamplingPolicy(
            samples=self.samples,
            temperature=self.temperature,
            max_output_tokens=self.max_output_tokens,
        )

    def arms(self) -> tuple[BaoArm, ...]:
        arms = all_bao_arms()
        try:
            return tuple(arms[i] for i in self.arm_ids)
        except IndexError as exc:
            raise ConfigError(
                f"arm ids must be within 0..{len(arms) - 1}, got {self.arm_ids!r}"
            ) from exc

    def make_db_client(self):
        if self.mode == "fixture":
            if not self.fixture_path:
                raise ConfigError("fixture mode needs a 'fixture_path'")
            path = Path(self.fixture_path)
            if not path.exists():
                raise ConfigError(f"fixture store {path} does not exist")
            return FixtureClient(path, warmups=self.warmups)
        if not self.dsn:
            raise ConfigError("live mode needs a 'dsn' (or HINTOPT_DSN)")
        return LivePostgresClient(self.dsn, warmups=self.warmups)

    def make_gen_client(self):
        if self.mock_outputs:
            return MockGenerationClient(self.mock_outputs)
        if not self.backend_endpoint or not self.backend_model:
            raise ConfigError(
                "the generation backend needs 'endpoint' and 'model' "
                "(or backend.mock_outputs for offline runs)"
            )
        return HttpGenerationClient(
            self.backend_endpoint,
            self.backend_model,
            api_key=self.backend_api_key,
        )


def load_config(path: str | Path) -> RunConfig:
    """Load and validate a run configuration file.

    Raises:
        ConfigError: unreadable file, unknown keys, or invalid values,
            with a message naming the offending field.
    """
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")

    known = {"mode", "fixture_path", "dsn", "backend", "sampling", "collection", "arms", "seed"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)!r}")

    backend = data.get("backend", {})
    sampling = data.get("sampling", {})
    collection = data.get("collection", {})
    for name, section in (("backend", backend), ("sampling", sampling), ("collection", collection)):
        if not isinstance(section, dict):
            raise ConfigError(f"config section {name!r} must be an object")

    config = RunConfig(
        mode=data.get("mode", "fixture"),
        fixture_path=data.get("fixture_path"),
        dsn=os.environ.get("HINTOPT_DSN", data.get("dsn")),
        backend_endpoint=os.environ.get(
            "HINTOPT_BACKEND_ENDPOINT", backend.get("endpoint")
        ),
        backend_model=os.environ.get("HINTOPT_BACKEND_MODEL", backend.get("model")),
        backend_api_key=os.environ.get(
            "HINTOPT_BACKEND_API_KEY", backend.get("api_key")
        ),
        mock_outputs=list(backend.get("mock_outputs", [])),
        samples=int(sampling.get("samples", 16)),
        temperature=float(sampling.get("temperature", 1.0)),
        max_output_tokens=int(sampling.get("max_output_tokens", 256)),
        global_timeout_ms=float(
            collection.get("global_timeout_ms", DEFAULT_GLOBAL_TIMEOUT_MS)
        ),
        warmups=int(collection.get("warmups", DEFAULT_WARMUPS)),
        arm_ids=tuple(data.get("arms", DEFAULT_ARM_IDS)),
        seed=int(data.get("seed", 0)),
    )

    if config.mode not in ("fixture", "live"):
        raise ConfigError(f"mode must be 'fixture' or 'live', got {config.mode!r}")
    if config.samples < 1:
        raise ConfigError(f"sampling.samples must be >= 1, got {config.samples}")
    if config.temperature < 0:
        raise ConfigError(
            f"sampling.temperature must be >= 0, got {config.temperature}"
        )
    if config.global_timeout_ms <= 0:
        raise ConfigError(
            f"collection.global_timeout_ms must be > 0, got {config.global_timeout_ms}"
        )
    if config.warmups < 0:
        raise ConfigError(f"collection.warmups must be >= 0, got {config.warmups}")
    if not config.arm_ids:
        raise ConfigError("arms must list at least one arm id")
    return config
