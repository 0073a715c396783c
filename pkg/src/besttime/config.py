"""Declarative deployment configuration (TOML)."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .assembler import AssemblerSpec
from .errors import BestTimeError, ConfigurationError, UnknownUseCaseError
from .policy import PRIORITIES, BestTimePolicy
from .signals import SignalProvider
from .store import STORE_ENV

_TOP_LEVEL = {"store", "providers", "use_cases", "simulation"}


@dataclass(frozen=True)
class UseCaseConfig:
    id: str
    tier: str
    spec: AssemblerSpec
    policy: BestTimePolicy

    @property
    def metrics(self):
        return self.spec.metrics


@dataclass
class DeploymentConfig:
    providers: dict = field(default_factory=dict)    # metric -> SignalProvider
    use_cases: dict = field(default_factory=dict)    # id -> UseCaseConfig
    store_path: str | None = None
    simulation: dict = field(default_factory=dict)
    base_dir: Path | None = None

    def __post_init__(self):
        for uc in self.use_cases.values():
            missing = [m for m in uc.metrics if m not in self.providers]
            if missing:
                raise ConfigurationError(
                    f"use case {uc.id!r} references unknown metrics {missing}")
            if uc.tier not in PRIORITIES:
                raise ConfigurationError(f"use case {uc.id!r}: tier must be high or low")

    def use_case(self, uc_id) -> UseCaseConfig:
        try:
            return self.use_cases[uc_id]
        except KeyError:
            raise UnknownUseCaseError(f"unknown use case {uc_id!r}") from None

    def resolved_store_path(self) -> str | None:
        """``BESTTIME_STORE`` wins over the file; relative paths follow the file."""
        env = os.environ.get(STORE_ENV)
        if env:
            return env
        if self.store_path is None:
            return None
        p = Path(self.store_path)
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        return str(p)

    def experiment(self, **overrides):
        from .sim import ExperimentConfig
        if not self.simulation:
            raise ConfigurationError("config has no [simulation] section")
        return ExperimentConfig.from_dict({**self.simulation, **overrides})

    @classmethod
    def from_dict(cls, doc: Mapping, base_dir=None) -> "DeploymentConfig":
        unknown = set(doc) - _TOP_LEVEL
        if unknown:
            raise ConfigurationError(f"unknown config sections {sorted(unknown)}")
        try:
            providers = {}
            for p in doc.get("providers", []):
                p = dict(p)
                metric, kind = p.pop("metric"), p.pop("kind")
                if metric in providers:
                    raise ConfigurationError(f"provider {metric!r} declared twice")
                providers[metric] = SignalProvider(metric, kind, p)
            use_cases = {}
            for u in doc.get("use_cases", []):
                uc = _use_case(u)
                if uc.id in use_cases:
                    raise ConfigurationError(f"use case {uc.id!r} declared twice")
                use_cases[uc.id] = uc
        except KeyError as exc:
            raise ConfigurationError(f"missing config field {exc}") from None
        except BestTimeError as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(str(exc)) from exc
        store = doc.get("store", {})
        return cls(providers, use_cases, store.get("path"), dict(doc.get("simulation", {})),
                   Path(base_dir) if base_dir is not None else None)

    @classmethod
    def load(cls, path) -> "DeploymentConfig":
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigurationError(f"config file {str(path)!r} not found") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from None
        return cls.from_dict(doc, base_dir=path.parent)


def _use_case(u) -> UseCaseConfig:
    u = dict(u)
    extra = set(u) - {"id", "tier", "metrics", "weights", "policy"}
    if extra:
        raise ConfigurationError(f"use case {u.get('id')!r}: unknown fields {sorted(extra)}")
    uc_id = str(u["id"])
    tier = u.get("tier", "high")
    if tier not in PRIORITIES:
        raise ConfigurationError(f"use case {uc_id!r}: tier must be high or low, got {tier!r}")
    metrics = tuple(u["metrics"])
    weights = u.get("weights") or {m: 1.0 for m in metrics}
    policy = BestTimePolicy.from_dict(u.get("policy"), default_priority=tier)
    return UseCaseConfig(uc_id, tier, AssemblerSpec(uc_id, metrics, weights), policy)
