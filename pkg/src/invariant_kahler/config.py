"""Solve configuration, read from JSON."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .densities import OVERFLOW_RADIUS, DensitySpec, parse_u
from .rootsys import RootSystemError, load_root_system


class ConfigError(ValueError):
    pass


@dataclass
class SolveConfig:
    group: str | list = "A1"
    u_spec: str = "zero"
    k_list: list = field(default_factory=lambda: [1.0])
    m_schedule: list = field(default_factory=lambda: [200])
    grid_resolution: int = 4096
    tol: float = 1e-6
    seed: int = 0
    overflow_radius: float = OVERFLOW_RADIUS
    eps_wall: float = 1e-3
    # "inverse_k" uses eps_k = 1/k for each k; a number fixes eps for every k
    regularization: str | float = "inverse_k"
    root_scale: float = 1.0
    max_iter: int = 100
    # "transport" solves; "su2-oracle" stores the closed-form SU(2) potential
    method: str = "transport"

    def validate(self) -> "SolveConfig":
        if not self.k_list:
            raise ConfigError("k_list must not be empty")
        try:
            ks = [float(k) for k in self.k_list]
        except (TypeError, ValueError):
            raise ConfigError("k_list must hold numbers") from None
        if any(k <= 0 for k in ks):
            raise ConfigError("k values must be positive")
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ConfigError("k_list must be increasing")
        if len(self.m_schedule) != len(ks):
            raise ConfigError("m_schedule must have the same length as k_list")
        if any(int(m) != m or m <= 0 for m in self.m_schedule):
            raise ConfigError("m_schedule must hold positive integers")
        if not (1e-12 < float(self.tol) < 1e-2):
            raise ConfigError("tol must lie in (1e-12, 1e-2)")
        if int(self.grid_resolution) < 16:
            raise ConfigError("grid_resolution must be at least 16")
        if self.method not in ("transport", "su2-oracle"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.regularization != "inverse_k":
            try:
                if float(self.regularization) < 0:
                    raise ConfigError("regularization must be non-negative")
            except (TypeError, ValueError):
                raise ConfigError("regularization must be 'inverse_k' or a number") from None
        try:
            rs = self.root_system()
            parse_u(self.u_spec)
        except (RootSystemError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if self.method == "transport" and rs.rank > 2:
            raise ConfigError("the transport solver supports rank 1 and rank 2 only")
        if self.method == "su2-oracle" and rs.rank != 1:
            raise ConfigError("the su2-oracle method needs a rank-1 group")
        self.k_list = ks
        self.m_schedule = [int(m) for m in self.m_schedule]
        return self

    def root_system(self):
        return load_root_system(self.group, scale=float(self.root_scale))

    def density_spec(self) -> DensitySpec:
        return DensitySpec(self.root_system(), parse_u(self.u_spec), 0.0, float(self.overflow_radius))

    def epsilon(self, k: float) -> float:
        return 1.0 / k if self.regularization == "inverse_k" else float(self.regularization)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SolveConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        return cls(**data).validate()

    @classmethod
    def load(cls, path) -> "SolveConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)
