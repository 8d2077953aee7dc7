"""Run configuration: JSON config file, flag overrides, component builders.

Secrets never live in the config file: the chat API key comes from
CHAT_API_KEY and the forge token from FORGE_API_TOKEN. Mock mode requires
no network configuration at all.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .contexts import DEFAULT_TAXONOMY, SummaryConfig
from .corpus import CorpusIndex, load_index
from .embedding import EmbedClient, HashEmbedClient, HttpEmbedClient
from .errors import ConfigError
from .evaluate import Evaluator, EvaluatorWeights
from .forge import ForgeConfig
from .gateway import API_KEY_ENV, ChatGateway, HttpChatGateway, MockChatGateway
from .optimize import OptimizerConfig


@dataclass
class RunConfig:
    chat_endpoint: str | None = None
    chat_model: str = "default"
    embed_endpoint: str | None = None
    forge_base_url: str | None = None
    corpus_path: str | None = None
    weights_path: str | None = None
    equation: str = "correlation"
    k: int = 10
    p: float = 5.0
    step_limit: int = 50
    base_temperature: float = 0.0
    escalated_temperature: float = 1.0
    max_output_tokens: int = 512
    mock: bool = False
    mock_fixtures_dir: str | None = None
    mock_embed_dim: int = 64
    taxonomy: tuple[str, ...] = DEFAULT_TAXONOMY
    summary_max_input_tokens: int = 3000
    summary_max_tokens: int = 120
    trace_out: str | None = None

    @classmethod
    def load(cls, path: str | Path | None, overrides: dict | None = None) -> "RunConfig":
        """Config file values, then non-None overrides (CLI flags) on top."""
        values: dict = {}
        if path is not None:
            try:
                values.update(json.loads(Path(path).read_text(encoding="utf-8")))
            except (OSError, ValueError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key, value in (overrides or {}).items():
            if value is not None:
                values[key] = value
        if "taxonomy" in values:
            values["taxonomy"] = tuple(values["taxonomy"])
        return cls(**values)

    def validate(self) -> None:
        if self.equation not in ("even", "correlation"):
            raise ConfigError(f"unknown equation {self.equation!r}")
        if self.mock:
            return
        if not self.chat_endpoint:
            raise ConfigError("live mode needs chat_endpoint (or pass --mock)")
        if not os.environ.get(API_KEY_ENV):
            raise ConfigError(f"live mode needs the {API_KEY_ENV} environment variable")

    # -- component builders ---------------------------------------------

    def make_gateway(self) -> ChatGateway:
        if self.mock:
            return MockChatGateway(fixtures_dir=self.mock_fixtures_dir)
        self.validate()
        return HttpChatGateway(endpoint=self.chat_endpoint, model=self.chat_model)

    def make_embed_client(self) -> EmbedClient:
        if self.mock:
            return HashEmbedClient(dim=self.mock_embed_dim)
        if not self.embed_endpoint:
            raise ConfigError("live mode needs embed_endpoint for similarity scoring")
        return HttpEmbedClient(self.embed_endpoint)

    def make_weights(self) -> EvaluatorWeights:
        if self.equation == "even":
            return EvaluatorWeights.even()
        if not self.weights_path:
            raise ConfigError(
                "equation 'correlation' needs a calibrated weights file; run "
                "`commitopt calibrate` and pass --weights (or use --equation even)"
            )
        try:
            return EvaluatorWeights.from_json(
                Path(self.weights_path).read_text(encoding="utf-8")
            )
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read weights {self.weights_path}: {exc}") from exc

    def load_corpus(self) -> CorpusIndex:
        if not self.corpus_path:
            raise ConfigError(
                "similarity scoring needs a corpus index; build one with "
                "`commitopt corpus build` and pass --corpus"
            )
        try:
            return load_index(self.corpus_path)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read corpus {self.corpus_path}: {exc}") from exc

    def make_evaluator(self, gateway: ChatGateway) -> Evaluator:
        weights = self.make_weights()
        embed_client = index = None
        if weights.needs_sim():
            embed_client = self.make_embed_client()
            index = self.load_corpus()
        return Evaluator(
            gateway=gateway,
            weights=weights,
            embed_client=embed_client,
            index=index,
            k=self.k,
            model=self.chat_model,
        )

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            step_limit=self.step_limit,
            p=self.p,
            base_temperature=self.base_temperature,
            escalated_temperature=self.escalated_temperature,
            k=self.k,
            equation=self.equation,
            model=self.chat_model,
            max_output_tokens=self.max_output_tokens,
        )

    def summary_config(self) -> SummaryConfig:
        return SummaryConfig(
            max_input_tokens=self.summary_max_input_tokens,
            max_summary_tokens=self.summary_max_tokens,
            model=self.chat_model,
        )

    def forge_config(self) -> ForgeConfig | None:
        if self.mock or not self.forge_base_url:
            return None
        return ForgeConfig(base_url=self.forge_base_url)
