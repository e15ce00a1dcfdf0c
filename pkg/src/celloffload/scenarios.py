"""Scenario configurations and their JSON form.

Rates are given in contacts per pair per day in files and on the command
line; :class:`ScenarioConfig` keeps those values verbatim and converts to
per-second rates in one place (:attr:`ScenarioConfig.mean_rate`).
"""

from __future__ import annotations

import json
import math
from dataclasses import MISSING, asdict, dataclass, fields, replace

import numpy as np

from .analytic import ChainParams
from .mobility import SECONDS_PER_DAY, ContactGraph, ContactTrace, DurationDistribution, RateDistribution, generate_trace, sample_graph
from .sim import RoundConfig

__all__ = [
    "ScenarioConfig",
    "ConfigError",
    "BUILTIN_SCENARIOS",
    "VALIDATION_GRID",
    "get_scenario",
    "load_config",
    "dump_config",
    "default_replications",
]


class ConfigError(ValueError):
    """Invalid or unknown scenario configuration."""


def default_replications(n: int) -> int:
    return 1000 if n <= 200 else 100


@dataclass(frozen=True)
class ScenarioConfig:
    """One mobility + content scenario.

    ``sigma`` is a multiple of ``mu_beta`` when ``sigma_mode == "relative"``
    and contacts/pair/day when ``"absolute"``.  ``sparsity`` is the
    probability that a pair never meets.
    """

    name: str
    n: int
    mu_beta: float
    sigma: float
    mean_contact_duration: float
    deadline: float
    chunk_bytes: float
    sigma_mode: str = "relative"
    sparsity: float = 0.0
    replications: int | None = None
    seed: int = 0
    n_rounds: int = 500

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 2:
            raise ConfigError(f"n must be an integer >= 2, got {self.n!r}")
        for key in ("mu_beta", "mean_contact_duration", "deadline", "chunk_bytes"):
            v = getattr(self, key)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{key} must be a positive number, got {v!r}")
        if not (isinstance(self.sigma, (int, float)) and math.isfinite(self.sigma) and self.sigma >= 0):
            raise ConfigError(f"sigma must be >= 0, got {self.sigma!r}")
        if self.sigma_mode not in ("relative", "absolute"):
            raise ConfigError(f"sigma_mode must be 'relative' or 'absolute', got {self.sigma_mode!r}")
        if not 0 <= self.sparsity < 1:
            raise ConfigError(f"sparsity must be in [0, 1), got {self.sparsity!r}")
        if self.replications is not None and self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.n_rounds < 1:
            raise ConfigError("n_rounds must be >= 1")

    # unit conversion lives here and nowhere else
    @property
    def mean_rate(self) -> float:
        """Mean pairwise contact rate in contacts per second."""
        return self.mu_beta / SECONDS_PER_DAY

    @property
    def rate_stddev(self) -> float:
        sigma_day = self.sigma * self.mu_beta if self.sigma_mode == "relative" else self.sigma
        return sigma_day / SECONDS_PER_DAY

    @property
    def n_replications(self) -> int:
        return default_replications(self.n) if self.replications is None else self.replications

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def scaled_to(self, n: int) -> "ScenarioConfig":
        """Same scenario with ``n`` users and ``N mu_beta`` held constant."""
        return replace(self, n=n, mu_beta=self.mu_beta * self.n / n)

    def rate_distribution(self) -> RateDistribution:
        return RateDistribution(self.mean_rate, self.rate_stddev)

    def duration_distribution(self) -> DurationDistribution:
        return DurationDistribution(self.mean_contact_duration)

    def chain_params(self) -> ChainParams:
        """Homogenised chain; pairs that never meet lower the mean rate."""
        return ChainParams(self.n, self.mean_rate * (1.0 - self.sparsity), self.deadline)

    def round_config(self, seed_count: int = 1, **overrides) -> RoundConfig:
        return RoundConfig(deadline=self.deadline, seed_count=seed_count, chunk_bytes=self.chunk_bytes,
                           rng_seed=self.seed, **overrides)

    def seed_streams(self) -> tuple[int, int, int]:
        """Independent integer seeds for the graph, the trace and the rounds."""
        children = np.random.SeedSequence(self.seed).spawn(3)
        return tuple(int(c.generate_state(1)[0]) for c in children)

    def build_graph(self) -> ContactGraph:
        return sample_graph(self.n, self.rate_distribution(), self.sparsity, rng_seed=self.seed_streams()[0])

    def build_trace(self, n_rounds: int | None = None, graph: ContactGraph | None = None) -> ContactTrace:
        rounds = self.n_rounds if n_rounds is None else n_rounds
        graph = self.build_graph() if graph is None else graph
        return generate_trace(graph, self.duration_distribution(), rounds * self.deadline,
                              rng_seed=self.seed_streams()[1])

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("scenario config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        missing = sorted(f.name for f in fields(cls) if f.name not in data and f.default is MISSING)
        if missing:
            raise ConfigError(f"missing config keys: {', '.join(missing)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


BUILTIN_SCENARIOS: dict[str, ScenarioConfig] = {
    "streaming": ScenarioConfig("streaming", n=100, mu_beta=13.0, sigma=0.58, mean_contact_duration=66.46,
                                deadline=120.0, chunk_bytes=1e6),
    "road_traffic": ScenarioConfig("road_traffic", n=1000, mu_beta=1.2, sigma=1.5, mean_contact_duration=72.0,
                                   deadline=600.0, chunk_bytes=1e6),
    "news_feed": ScenarioConfig("news_feed", n=100, mu_beta=0.69, sigma=2.0, mean_contact_duration=125.0,
                                deadline=3600.0, chunk_bytes=0.5e6),
    "social_data": ScenarioConfig("social_data", n=50, mu_beta=3.5, sigma=1.0, mean_contact_duration=164.0,
                                  deadline=900.0, chunk_bytes=4e3),
}

# model-vs-simulation grid: N = 200, sigma = 0.04 contacts/pair/day absolute,
# (deadline s, mu_beta contacts/pair/day)
VALIDATION_GRID = {
    "n": 200,
    "sigma": 0.04,
    "settings": [(60.0, 17.0), (40.0, 17.0), (60.0, 8.0)],
    "d_values": [1, 5, 10, 20, 30, 40, 50, 70, 100, 150],
    # ratio 1 / (mu_beta E[delta]) = 100 at mu_beta = 17/day
    "mean_contact_duration": 50.8,
    "chunk_bytes": 1e6,
}


def get_scenario(name: str) -> ScenarioConfig:
    try:
        return BUILTIN_SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(BUILTIN_SCENARIOS)}") from None


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return ScenarioConfig.from_dict(data)


def dump_config(config: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
