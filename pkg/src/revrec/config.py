"""Run configuration shared by every pipeline stage.

A single JSON file carries one section per stage plus output paths and a
top-level seed. Sections map onto the stage config dataclasses; unknown
keys anywhere are rejected so a typo cannot silently fall back to a
default. Resolution order for where the file comes from: an explicit
--config flag, then the REVREC_CONFIG environment variable, then built-in
defaults.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import InvalidConfig
from .featurize import CandidatePolicy
from .policy import PolicyConfig
from .ranker import HyperParams
from .sim import SimConfig
from .synth import SynthConfig

ENV_VAR = "REVREC_CONFIG"


@dataclass(frozen=True)
class Paths:
    corpus: str = "corpus.jsonl"
    model: str = "model.json"
    reports: str = "reports"

    def validate(self) -> None:
        for name in ("corpus", "model", "reports"):
            v = getattr(self, name)
            if not isinstance(v, str) or not v:
                raise InvalidConfig(f"paths.{name} must be a non-empty string, got {v!r}")


def _section(cls, obj, where: str):
    if not isinstance(obj, dict):
        raise InvalidConfig(f"{where} must be an object, got {type(obj).__name__}")
    known = set(cls.__dataclass_fields__)
    unknown = set(obj) - known
    if unknown:
        raise InvalidConfig(f"unknown {where} keys: {sorted(unknown)}")
    try:
        return cls(**obj)
    except TypeError as exc:
        raise InvalidConfig(f"bad {where} section: {exc}") from exc


@dataclass(frozen=True)
class GlobalConfig:
    paths: Paths = field(default_factory=Paths)
    candidates: CandidatePolicy = field(default_factory=CandidatePolicy)
    hyperparams: HyperParams = field(default_factory=HyperParams)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    seed: int = 0

    def validate(self) -> None:
        self.paths.validate()
        self.candidates.validate()
        self.hyperparams.validate()
        self.policy.validate()
        self.synth.validate()
        self.sim.validate()
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise InvalidConfig(f"seed must be an integer, got {self.seed!r}")

    @classmethod
    def from_dict(cls, obj: dict) -> "GlobalConfig":
        if not isinstance(obj, dict):
            raise InvalidConfig(f"config must be an object, got {type(obj).__name__}")
        sections = {
            "paths": Paths,
            "candidates": CandidatePolicy,
            "hyperparams": HyperParams,
            "policy": PolicyConfig,
            "synth": SynthConfig,
            "sim": SimConfig,
        }
        unknown = set(obj) - set(sections) - {"seed"}
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for name, seccls in sections.items():
            if name in obj:
                kwargs[name] = _section(seccls, obj[name], name)
        if "seed" in obj:
            kwargs["seed"] = obj["seed"]
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def load_config(path: str | Path) -> GlobalConfig:
    """Parse and validate a config file; all errors become InvalidConfig."""
    p = Path(path)
    if not p.is_file():
        raise InvalidConfig(f"config file not found: {p}")
    try:
        obj = json.loads(p.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig(f"cannot parse config {p}: {exc}") from exc
    return GlobalConfig.from_dict(obj)


def resolve_config(flag_path: str | None, env: dict | None = None) -> GlobalConfig:
    """Config for a run: --config beats REVREC_CONFIG beats defaults."""
    if flag_path is not None:
        return load_config(flag_path)
    env = os.environ if env is None else env
    env_path = env.get(ENV_VAR)
    if env_path:
        return load_config(env_path)
    return GlobalConfig()


def config_hash(cfg: GlobalConfig) -> str:
    """Stable digest of the fully resolved configuration."""
    canon = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
