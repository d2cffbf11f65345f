"""Pipeline configuration: defaults, file loading, validation, snapshots."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .corpus import PartitionConfig
from .errors import ConfigError
from .extraction import WindowConfig
from .providers import HttpProvider, MockProvider, Provider
from .retrieval import RetrievalConfig
from .ssc import SSCConfig


@dataclass(frozen=True)
class ProviderSettings:
    kind: str = "mock"  # "mock" or "http"
    base_url: str = ""
    chat_model: str = ""
    embed_model: str = ""
    api_key: str = ""
    api_key_env: str = "HYPERGRAIN_API_KEY"
    mock_dimension: int = 64
    mock_seed: int = 0
    max_retries: int = 3
    max_concurrency: int = 4
    generation_temperature: float = 0.0


@dataclass(frozen=True)
class PipelineConfig:
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    tau_s: int = 9
    tau_e: int = 3
    summary_token_cap: int = 2000
    edge_prompt_token_cap: int = 2000
    ssc: SSCConfig = field(default_factory=SSCConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    workers: int = 1
    sliding_window: bool = True
    enable_ssc: bool = True
    prompt_dir: str | None = None

    def __post_init__(self):
        if self.tau_s < 0 or self.tau_e < 0:
            raise ConfigError("tau_s and tau_e must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def effective_window(self) -> WindowConfig:
        """Window schedule actually used; no sliding window means no prefix."""
        return self.window if self.sliding_window else WindowConfig(g_max=1, g_overlap=0)

    def snapshot(self) -> dict:
        """Flat, JSON-stable view of everything that affects build outputs."""
        return {
            "ct_min": self.partition.ct_min,
            "ct_max": self.partition.ct_max,
            "g_max": self.window.g_max,
            "g_overlap": self.window.g_overlap,
            "tau_s": self.tau_s,
            "tau_e": self.tau_e,
            "summary_token_cap": self.summary_token_cap,
            "edge_prompt_token_cap": self.edge_prompt_token_cap,
            "alpha": self.ssc.alpha,
            "min_cluster_size": self.ssc.min_cluster_size,
            "min_samples": self.ssc.min_samples,
            "allow_single_cluster": self.ssc.allow_single_cluster,
            "normalize_positions": self.ssc.normalize_positions,
            "ch_text_token_cap": self.ssc.ch_text_token_cap,
            "n_hyperedges": self.retrieval.n_hyperedges,
            "n_edges": self.retrieval.n_edges,
            "tau_hyperedges": self.retrieval.tau_hyperedges,
            "tau_edges": self.retrieval.tau_edges,
            "mode": self.retrieval.mode,
            "evidence_token_budget": self.retrieval.evidence_token_budget,
            "provider_kind": self.provider.kind,
            "mock_dimension": self.provider.mock_dimension,
            "mock_seed": self.provider.mock_seed,
            "sliding_window": self.sliding_window,
            "ssc": self.enable_ssc,
        }


def _section(data: dict, name: str) -> dict:
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"config section {name!r} must be a mapping")
    return value


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Build a PipelineConfig from a YAML or JSON file plus overrides.

    Missing keys fall back to the package defaults. Validation errors from
    the section dataclasses surface as ConfigError with the offending value.
    """
    data: dict = {}
    if path is not None:
        raw = Path(path).read_text(encoding="utf-8")
        try:
            data = yaml.safe_load(raw) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path} must hold a mapping at the top level")
    if overrides:
        data = {**data, **overrides}
    try:
        return PipelineConfig(
            partition=PartitionConfig(**_section(data, "partition")),
            window=WindowConfig(**_section(data, "window")),
            tau_s=int(data.get("tau_s", 9)),
            tau_e=int(data.get("tau_e", 3)),
            summary_token_cap=int(data.get("summary_token_cap", 2000)),
            edge_prompt_token_cap=int(data.get("edge_prompt_token_cap", 2000)),
            ssc=SSCConfig(**_section(data, "ssc")),
            retrieval=RetrievalConfig(**_section(data, "retrieval")),
            provider=ProviderSettings(**_section(data, "provider")),
            workers=int(data.get("workers", 1)),
            sliding_window=bool(data.get("sliding_window", True)),
            enable_ssc=bool(data.get("enable_ssc", True)),
            prompt_dir=data.get("prompt_dir"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def make_provider(settings: ProviderSettings) -> Provider:
    if settings.kind == "mock":
        return MockProvider(dimension=settings.mock_dimension, seed=settings.mock_seed)
    if settings.kind == "http":
        if not settings.base_url:
            raise ConfigError("http provider requires base_url")
        api_key = os.environ.get(settings.api_key_env, "") or settings.api_key
        return HttpProvider(
            base_url=settings.base_url,
            chat_model=settings.chat_model,
            embed_model=settings.embed_model,
            api_key=api_key,
            max_retries=settings.max_retries,
            max_concurrency=settings.max_concurrency,
        )
    raise ConfigError(f"unknown provider kind {settings.kind!r}")


def dump_config(config: PipelineConfig) -> str:
    return json.dumps(config.snapshot(), sort_keys=True, indent=2)
