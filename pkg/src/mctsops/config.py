"""Settings file (JSON) with sections gateway, sandbox, search, refine, bench."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .gateway import Backend, HttpBackend, RecordingBackend, ReplayBackend
from .refine import RefineConfig
from .sandbox import SandboxConfig
from .tree import SearchConfig


@dataclass
class GatewaySettings:
    backend: str = "synthetic"  # http | replay | synthetic
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4"
    api_key_env: str = "LLM_API_KEY"
    max_in_flight: int = 4
    temperature: float = 0.7
    fixture: Optional[str] = None
    record: Optional[str] = None
    seed: int = 0
    error_scale: float = 1.0


@dataclass
class SandboxSettings:
    interpreter_cmd: Optional[str] = None
    timeout_s: float = 30.0
    capture_bytes: int = 64 * 1024
    max_concurrent: int = 8
    cache: bool = False


@dataclass
class SearchSettings:
    exploration_c: float = math.sqrt(2)
    simulations: int = 20
    max_children: int = 3
    max_depth: int = 8
    rng_seed: int = 0
    redecompose: bool = False


@dataclass
class RefineSettings:
    enabled: bool = True
    tau: float = 7.0
    max_retries: int = 3


@dataclass
class BenchSettings:
    grading: str = "oracle"  # oracle | llm
    n_users: int = 2


@dataclass
class Settings:
    gateway: GatewaySettings = field(default_factory=GatewaySettings)
    sandbox: SandboxSettings = field(default_factory=SandboxSettings)
    search: SearchSettings = field(default_factory=SearchSettings)
    refine: RefineSettings = field(default_factory=RefineSettings)
    bench: BenchSettings = field(default_factory=BenchSettings)

    @classmethod
    def from_dict(cls, data: dict) -> "Settings":
        out = cls()
        for section, value in data.items():
            target = getattr(out, section, None)
            if target is None:
                raise ValueError(f"unknown config section {section!r}")
            known = {f.name for f in fields(target)}
            for key, v in value.items():
                if key not in known:
                    raise ValueError(f"unknown config key {section}.{key}")
                setattr(target, key, v)
        return out

    @classmethod
    def load(cls, path: Optional[str]) -> "Settings":
        if not path:
            return cls()
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))

    def to_dict(self) -> dict:
        return asdict(self)

    # ------------------------------------------------------------ builders

    def search_config(self) -> SearchConfig:
        s = self.search
        return SearchConfig(s.exploration_c, s.simulations, s.max_children, s.max_depth, s.rng_seed)

    def refine_config(self) -> RefineConfig:
        return RefineConfig(self.refine.max_retries, self.refine.tau, self.refine.enabled)

    def sandbox_config(self) -> SandboxConfig:
        s = self.sandbox
        kwargs = dict(timeout_s=s.timeout_s, capture_bytes=s.capture_bytes, max_concurrent=s.max_concurrent)
        if s.interpreter_cmd:
            kwargs["interpreter_cmd"] = s.interpreter_cmd
        return SandboxConfig(**kwargs)

    def backend(self) -> Backend:
        g = self.gateway
        if g.backend == "http":
            inner: Backend = HttpBackend(g.base_url, g.model, g.api_key_env, max_in_flight=g.max_in_flight)
        elif g.backend == "replay":
            if not g.fixture:
                raise ValueError("replay backend needs gateway.fixture")
            inner = ReplayBackend(g.fixture)
        elif g.backend == "synthetic":
            from .synthetic import SyntheticBackend

            inner = SyntheticBackend(seed=g.seed, error_scale=g.error_scale)
        else:
            raise ValueError(f"unknown backend {g.backend!r}")
        if g.record:
            return RecordingBackend(inner, g.record)
        return inner
