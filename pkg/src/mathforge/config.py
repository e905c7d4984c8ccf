"""Run configuration for the command-line client.

One JSON file holds everything a run might need — artifact paths,
difficulty scales and band edges, sampler and loop settings, one
backend section per role, and arena parameters.  Command-line flags
override file values, and every section falls back to the package
defaults, so an empty config is valid.

Credentials never appear in the file: backend sections name an
environment variable, and the variable is read only when a request is
actually sent.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .gateway import BackendConfig, RoleProfile
from .loop import LoopConfig
from .sampling import SamplerConfig

_SECTIONS = ("paths", "difficulty", "sampler", "loop", "backends", "arena")

ROLES = ("generator", "evaluator", "expert", "judge")


@dataclass
class ArenaSettings:
    k_factor: float = 32.0
    initial_rating: float = 1000.0
    resamples: int = 100
    retry_cap: int = 2
    dimension: str = "Overall"

    def __post_init__(self) -> None:
        if self.k_factor <= 0:
            raise ConfigError(f"arena k_factor must be positive, got {self.k_factor}")
        if self.resamples < 1:
            raise ConfigError(f"arena resamples must be >= 1, got {self.resamples}")
        if self.retry_cap < 0:
            raise ConfigError(f"arena retry_cap must be >= 0, got {self.retry_cap}")


@dataclass
class AppConfig:
    """Validated view of the config file, with defaults filled in."""

    paths: dict[str, str] = field(default_factory=dict)
    sigma: dict[str, float] | None = None
    bands: list[float] | None = None
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    loop: LoopConfig = field(default_factory=LoopConfig)
    backends: dict[str, dict] = field(default_factory=dict)
    profiles: dict[str, dict] = field(default_factory=dict)
    arena: ArenaSettings = field(default_factory=ArenaSettings)

    def backend_for(self, role: str) -> BackendConfig | None:
        """Build the HTTP backend for a role, or None if unconfigured."""
        section = self.backends.get(role)
        if section is None:
            return None
        try:
            return BackendConfig(
                base_url=section["base_url"],
                model_name=section["model"],
                credential_env=section.get("credential_env"),
                timeout=float(section.get("timeout", 60.0)),
                max_retries=int(section.get("max_retries", 2)),
                backoff=float(section.get("backoff", 0.5)),
                audit_log=section.get("audit_log"),
            )
        except KeyError as exc:
            raise ConfigError(f"backend section {role!r} is missing {exc}") from exc

    def profile_for(self, role: str, system_prompt: str) -> RoleProfile:
        """Build a role profile, applying any per-role sampling overrides."""
        overrides = self.profiles.get(role, {})
        return RoleProfile(
            system_prompt=system_prompt,
            temperature=float(overrides.get("temperature", 0.2)),
            top_p=float(overrides.get("top_p", 0.7)),
            top_k=int(overrides.get("top_k", 20)),
            max_output_tokens=int(overrides.get("max_output_tokens", 4096)),
        )


def _check_paths(paths: dict) -> dict[str, str]:
    known = ("corpus", "matrix", "templates", "factor_table", "rules")
    for key, value in paths.items():
        if key not in known:
            raise ConfigError(f"unknown path entry {key!r}; expected one of {known}")
        if not Path(value).exists():
            raise ConfigError(f"configured path {key} = {value!r} does not exist")
    return dict(paths)


def load_config(path: str | Path | None) -> AppConfig:
    """Load and validate a config file; ``None`` gives all defaults."""
    if path is None:
        return AppConfig()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = [k for k in raw if k not in _SECTIONS]
    if unknown:
        raise ConfigError(f"{path}: unknown config sections {unknown}")

    paths = _check_paths(raw.get("paths", {}))

    difficulty_section = raw.get("difficulty", {})
    sigma = difficulty_section.get("sigma")
    bands = difficulty_section.get("bands")
    if bands is not None:
        bands = [float(b) for b in bands]
        if len(bands) != 5 or sorted(bands) != bands:
            raise ConfigError("difficulty.bands must be 5 nondecreasing edges")

    sampler_section = raw.get("sampler", {})
    sampler = SamplerConfig(
        batch_size=int(sampler_section.get("batch_size", 64)),
        max_attempt_rounds=int(sampler_section.get("max_attempt_rounds", 100)),
        rng_seed=int(sampler_section.get("seed", 0)),
    )

    loop_section = raw.get("loop", {})
    loop = LoopConfig(
        tau_max=int(loop_section.get("tau_max", 5)),
        thresholds=loop_section.get("thresholds", LoopConfig().thresholds),
        mode=loop_section.get("mode", "apprentice"),
        retry_budget=int(loop_section.get("retry_budget", 2)),
        history_cycles=int(loop_section.get("history_cycles", 2)),
    )

    backends = raw.get("backends", {})
    profiles: dict[str, dict] = {}
    for role, section in backends.items():
        if role not in ROLES:
            raise ConfigError(f"unknown backend role {role!r}; expected one of {ROLES}")
        if not isinstance(section, dict):
            raise ConfigError(f"backend section {role!r} must be an object")
        profiles[role] = {
            k: section[k]
            for k in ("temperature", "top_p", "top_k", "max_output_tokens")
            if k in section
        }

    arena_section = raw.get("arena", {})
    arena = ArenaSettings(
        k_factor=float(arena_section.get("k_factor", 32.0)),
        initial_rating=float(arena_section.get("initial_rating", 1000.0)),
        resamples=int(arena_section.get("resamples", 100)),
        retry_cap=int(arena_section.get("retry_cap", 2)),
        dimension=arena_section.get("dimension", "Overall"),
    )

    return AppConfig(
        paths=paths,
        sigma=sigma,
        bands=bands,
        sampler=sampler,
        loop=loop,
        backends=backends,
        profiles=profiles,
        arena=arena,
    )
