"""Engine configuration: one human-readable YAML file, env-var addressable.

Every ruleset default, optimizer parameter, guardrail policy, and model
registry entry can be overridden by key.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Optional

import yaml

from .investigate import OptimizerState
from .monitor import Band, RulesetConfig

CONFIG_ENV_VAR = "FCC_ENGINE_CONFIG"

DEFAULT_POLICY_ACTIONS = {
    "INGEST": {"INGEST_BATCH"},
    "SCREENING": {"SCREEN_WALLET"},
    "MONITORING": {"EVALUATE_TRADE"},
    "TRIAGE": {"AGGREGATE", "OPEN_CASE"},
    "INVESTIGATION": {"READ_CASE", "INVESTIGATE", "CACHE_WRITE", "CLOSE_CASE"},
    "REPORTING": {"DRAFT_STR", "RENDER"},
    "ORCHESTRATOR": {"TRANSITION", "HANDOVER", "ROUTE"},
}

# REPORTING may draft for HIGH-band cases: the draft is informational and the
# submission stays human-gated; anything else autonomous stops at MODERATE_HIGH.
DEFAULT_MAX_AUTO_BAND = {
    "INGEST": Band.MODERATE_HIGH,
    "SCREENING": Band.MODERATE_HIGH,
    "MONITORING": Band.MODERATE_HIGH,
    "TRIAGE": Band.MODERATE_HIGH,
    "INVESTIGATION": Band.MODERATE_HIGH,
    "REPORTING": Band.HIGH,
    "ORCHESTRATOR": Band.HIGH,
}


@dataclass
class PolicyConfig:
    allowed_actions: dict[str, set[str]] = field(
        default_factory=lambda: {k: set(v) for k, v in DEFAULT_POLICY_ACTIONS.items()}
    )
    max_auto_band: dict[str, Band] = field(default_factory=lambda: dict(DEFAULT_MAX_AUTO_BAND))


@dataclass
class ModelProfileConfig:
    profile_id: str
    kind: str = "RULES"
    explainability: int = 5
    cost_per_call_usd: Decimal = Decimal("0")
    latency_ms_p50: int = 5
    compliance_score: float = 1.0


DEFAULT_REGISTRY = [ModelProfileConfig(profile_id="rules-v1")]


@dataclass
class CostDefaults:
    automated_seconds_per_case: Decimal = Decimal("60")


@dataclass
class EngineConfig:
    data_dir: Optional[Path] = None
    dev_mode: bool = True
    port: int = 8300
    reporting_entity: str = "FCC Engine (digitally native desk)"
    sanctions_path: Optional[Path] = None
    high_risk_jurisdictions_path: Optional[Path] = None
    ruleset: RulesetConfig = field(default_factory=RulesetConfig)
    optimizer: OptimizerState = field(default_factory=OptimizerState)
    optimizer_run_every_n_feedback: int = 25
    policies: PolicyConfig = field(default_factory=PolicyConfig)
    model_baseline: float = 0.8
    model_registry: list[ModelProfileConfig] = field(default_factory=lambda: list(DEFAULT_REGISTRY))
    cost: CostDefaults = field(default_factory=CostDefaults)

    def validate(self) -> None:
        self.ruleset.validate()
        self.optimizer.validate()
        if not any(m.kind == "RULES" for m in self.model_registry):
            raise ValueError("model registry must include the RULES fallback profile")


def load_config(path: str | Path | None = None) -> EngineConfig:
    """Load the YAML config; falls back to the env var, then pure defaults."""
    if path is None:
        env = os.environ.get(CONFIG_ENV_VAR)
        path = Path(env) if env else None
    cfg = EngineConfig()
    if path is None:
        cfg.validate()
        return cfg
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    base = Path(path).parent

    def _resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base / candidate

    if "data_dir" in raw:
        cfg.data_dir = _resolve(raw["data_dir"])
    cfg.dev_mode = bool(raw.get("dev_mode", cfg.dev_mode))
    cfg.port = int(raw.get("port", cfg.port))
    cfg.reporting_entity = raw.get("reporting_entity", cfg.reporting_entity)

    lists = raw.get("lists", {})
    if lists.get("sanctions"):
        cfg.sanctions_path = _resolve(lists["sanctions"])
    if lists.get("high_risk_jurisdictions"):
        cfg.high_risk_jurisdictions_path = _resolve(lists["high_risk_jurisdictions"])

    if "ruleset" in raw:
        cfg.ruleset = RulesetConfig.from_dict(raw["ruleset"])

    opt = raw.get("optimizer", {})
    cfg.optimizer = OptimizerState(
        theta=int(opt.get("theta", cfg.optimizer.theta)),
        c_fn=int(opt.get("c_fn", cfg.optimizer.c_fn)),
        c_fp=int(opt.get("c_fp", cfg.optimizer.c_fp)),
        grid_step=int(opt.get("grid_step", cfg.optimizer.grid_step)),
        history_window=int(opt.get("history_window", cfg.optimizer.history_window)),
    )
    cfg.optimizer_run_every_n_feedback = int(
        opt.get("run_every_n_feedback", cfg.optimizer_run_every_n_feedback)
    )

    guard = raw.get("guardrails", {})
    for agent, actions in guard.get("allowed_actions", {}).items():
        cfg.policies.allowed_actions[agent] = set(actions)
    for agent, band in guard.get("max_auto_band", {}).items():
        cfg.policies.max_auto_band[agent] = Band[band]

    models = raw.get("models", {})
    cfg.model_baseline = float(models.get("baseline_compliance", cfg.model_baseline))
    if "registry" in models:
        cfg.model_registry = [
            ModelProfileConfig(
                profile_id=entry["profile_id"],
                kind=entry.get("kind", "EXTERNAL_LLM"),
                explainability=int(entry.get("explainability", 3)),
                cost_per_call_usd=Decimal(str(entry.get("cost_per_call_usd", "0"))),
                latency_ms_p50=int(entry.get("latency_ms_p50", 100)),
                compliance_score=float(entry.get("compliance_score", 1.0)),
            )
            for entry in models["registry"]
        ]
        if not any(m.kind == "RULES" for m in cfg.model_registry):
            cfg.model_registry.insert(0, ModelProfileConfig(profile_id="rules-v1"))

    cost = raw.get("cost", {})
    if "automated_seconds_per_case" in cost:
        cfg.cost.automated_seconds_per_case = Decimal(str(cost["automated_seconds_per_case"]))

    cfg.validate()
    return cfg


def dump_default_config(path: Path, data_dir: str = "data") -> None:
    """Write a commented starter config next to a fresh deployment."""
    text = f"""# FCC engine configuration
data_dir: {data_dir}
dev_mode: true
port: 8300
reporting_entity: "FCC Engine (digitally native desk)"
lists:
  sanctions: sanctions.txt
  high_risk_jurisdictions: high_risk_jurisdictions.txt
ruleset:
  base_scores:
    NEW_WALLET: 10
    WASH_TRADING: 40
    STRUCTURING: 20
    HIGH_VELOCITY: 15
    OBFUSCATION: 35
    SANCTIONS_HIT: 100
    HIGH_RISK_JURISDICTION: 30
  new_wallet_age_days: 7
  wash_window_days: 30
  wash_min_alternations: 3
  wash_max_price_cv: 0.10
  kyc_threshold_usd: 100
  structuring_min_count: 3
  velocity_max_trades_24h: 20
  obfuscation_min_hops: 4
optimizer:
  theta: 50
  c_fn: 5
  c_fp: 1
  grid_step: 5
  history_window: 500
  run_every_n_feedback: 25
models:
  baseline_compliance: 0.8
  registry:
    - profile_id: rules-v1
      kind: RULES
      explainability: 5
      cost_per_call_usd: 0
      latency_ms_p50: 5
      compliance_score: 1.0
cost:
  automated_seconds_per_case: 60
"""
    path.write_text(text, encoding="utf-8")
