"""Engine configuration: utility weights, buffer sizes, plugin settings.

The JSON layout mirrors these dataclasses one-to-one so harness config
files, engine snapshots, and the serve protocol all share one schema.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

from .errors import ConfigError

PASS_NAMES = ("prune", "merge", "cascade")


@dataclass(frozen=True)
class UtilityParams:
    """Weights and thresholds for the retention utility and eviction policy.

    alpha/beta weigh the frequency and recency terms of the node utility;
    tau is the recency decay scale in turns. gamma is the horizon discount
    used only by offline regret reporting, never by the greedy policy.
    """

    alpha: float = 0.6
    beta: float = 0.4
    tau: float = 500.0
    gamma: float = 0.95
    theta_concept: float = 0.85
    theta_sim: float = 0.85
    tau_drift: float = 0.7
    t_max: int = 1000

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be >= 0")
        if self.tau <= 0:
            raise ConfigError("tau must be > 0")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must lie in (0, 1)")
        for name in ("theta_concept", "theta_sim"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        # -1 disables drift boundaries (cosine never drops below -1).
        if not -1.0 <= self.tau_drift <= 1.0:
            raise ConfigError(f"tau_drift must lie in [-1, 1], got {self.tau_drift}")
        if self.t_max < 0:
            raise ConfigError("t_max must be >= 0")


@dataclass(frozen=True)
class PluginSettings:
    """Where each model boundary is served from: deterministic stub or HTTP."""

    embedder_kind: str = "stub"
    embedder_endpoint: str | None = None
    generator_kind: str = "stub"
    generator_endpoint: str | None = None
    extractor_kind: str = "stub"
    transcriber_kind: str = "passthrough"
    transcriber_endpoint: str | None = None
    model_name: str = "stub"
    timeout: float = 10.0
    retry: int = 2
    scene_keywords: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for kind_name, endpoint_name in (
            ("embedder_kind", "embedder_endpoint"),
            ("generator_kind", "generator_endpoint"),
        ):
            kind = getattr(self, kind_name)
            if kind not in ("stub", "remote"):
                raise ConfigError(f"{kind_name} must be 'stub' or 'remote', got {kind!r}")
            if kind == "remote" and not getattr(self, endpoint_name):
                raise ConfigError(f"{kind_name}='remote' requires {endpoint_name}")
        if self.extractor_kind != "stub":
            raise ConfigError("only the stub triplet extractor is shipped")
        if self.transcriber_kind not in ("passthrough", "remote"):
            raise ConfigError("transcriber_kind must be 'passthrough' or 'remote'")
        if self.transcriber_kind == "remote" and not self.transcriber_endpoint:
            raise ConfigError("transcriber_kind='remote' requires transcriber_endpoint")
        if self.retry < 0:
            raise ConfigError("retry must be >= 0")


@dataclass(frozen=True)
class EngineConfig:
    """Full engine configuration; every knob has its shipped default."""

    params: UtilityParams = field(default_factory=UtilityParams)
    dimension: int = 384
    buffer_capacity: int = 5
    leading_window_tokens: int = 10
    k_scene: int = 5
    k_event: int = 10
    k_amu: int = 3
    min_sim: float = 0.5
    per_event_k: bool = False
    flush_on_probe: bool = False
    pass_order: tuple[str, ...] = PASS_NAMES
    plugins: PluginSettings = field(default_factory=PluginSettings)

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigError("dimension must be >= 1")
        if self.buffer_capacity < 1:
            raise ConfigError("buffer_capacity must be >= 1")
        if self.leading_window_tokens < 0:
            raise ConfigError("leading_window_tokens must be >= 0")
        for name in ("k_scene", "k_event", "k_amu"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not -1.0 <= self.min_sim <= 1.0:
            raise ConfigError("min_sim must lie in [-1, 1]")
        if sorted(self.pass_order) != sorted(PASS_NAMES):
            raise ConfigError(
                f"pass_order must be a permutation of {PASS_NAMES}, got {self.pass_order}"
            )

    def with_params(self, **kwargs) -> "EngineConfig":
        return replace(self, params=replace(self.params, **kwargs))

    def to_dict(self) -> dict:
        data = asdict(self)
        data["pass_order"] = list(self.pass_order)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        data = dict(data)
        _reject_unknown(data, {f.name for f in cls.__dataclass_fields__.values()}, "config")
        params = data.pop("params", {})
        plugins = data.pop("plugins", {})
        if not isinstance(params, dict) or not isinstance(plugins, dict):
            raise ConfigError("'params' and 'plugins' must be objects")
        _reject_unknown(
            params, {f.name for f in UtilityParams.__dataclass_fields__.values()}, "params"
        )
        _reject_unknown(
            plugins, {f.name for f in PluginSettings.__dataclass_fields__.values()}, "plugins"
        )
        if "pass_order" in data:
            data["pass_order"] = tuple(data["pass_order"])
        try:
            return cls(
                params=UtilityParams(**params),
                plugins=PluginSettings(**plugins),
                **data,
            )
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def _reject_unknown(data: dict, allowed: set[str], where: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")
