"""Experiment configuration as nested dataclasses with a versioned JSON form."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .apparatus import TruncationPolicy
from .simulator import FluxModel
from .states import BinGrid, HyperStateSpec
from .tomography import ChainConfig

SCHEMA_VERSION = 1
PROTOCOL_KINDS = ("qubit128", "qutrit720", "random", "file")


@dataclass
class StateSection:
    d: int = 2
    alpha: float = 1 / np.sqrt(2)
    beta: float = 1 / np.sqrt(2)
    gamma: list[float] | None = None  # real amplitudes; None means uniform
    fidelity: float = 1.0  # white-noise admixture sets this fidelity to the target

    def spec(self) -> HyperStateSpec:
        return HyperStateSpec(self.d, self.alpha, self.beta, None if self.gamma is None else tuple(self.gamma))


@dataclass
class ProtocolSection:
    kind: str = "qubit128"
    seed: int = 7
    n_frames: int = 10
    path: str | None = None


@dataclass
class ExperimentConfig:
    state: StateSection = field(default_factory=StateSection)
    grid: BinGrid = field(default_factory=BinGrid)
    protocol: ProtocolSection = field(default_factory=ProtocolSection)
    flux: FluxModel = field(default_factory=FluxModel)
    chain: ChainConfig = field(default_factory=ChainConfig)
    truncation: TruncationPolicy = field(default_factory=TruncationPolicy)
    out_dir: str = "out"
    seed: int = 0
    schema_version: int = SCHEMA_VERSION

    def validate(self) -> None:
        """Cheap consistency checks, run before any expensive work."""
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version} (expected {SCHEMA_VERSION})")
        self.state.spec()
        if self.grid.d != self.state.d:
            raise ValueError(f"grid.d = {self.grid.d} but state.d = {self.state.d}")
        p = self.protocol
        if p.kind not in PROTOCOL_KINDS:
            raise ValueError(f"protocol.kind must be one of {PROTOCOL_KINDS}, got {p.kind!r}")
        if p.kind == "qubit128" and self.state.d != 2:
            raise ValueError("qubit128 protocol requires state.d = 2")
        if p.kind == "qutrit720" and self.state.d != 3:
            raise ValueError("qutrit720 protocol requires state.d = 3")
        if p.kind == "file":
            if not p.path:
                raise ValueError("protocol.kind = 'file' needs protocol.path")
            if not Path(p.path).is_file():
                raise ValueError(f"protocol file {p.path} does not exist")
        if not 0.0 <= self.state.fidelity <= 1.0:
            raise ValueError("state.fidelity must lie in [0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        sections = {"state": StateSection, "grid": BinGrid, "protocol": ProtocolSection, "flux": FluxModel,
                    "chain": ChainConfig, "truncation": TruncationPolicy}
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        kwargs = {}
        for key, value in raw.items():
            if key in sections:
                if not isinstance(value, dict):
                    raise ValueError(f"config section {key!r} must be an object")
                allowed = {f.name for f in fields(sections[key])}
                extra = set(value) - allowed
                if extra:
                    raise ValueError(f"unknown keys {sorted(extra)} in section {key!r}")
                try:
                    kwargs[key] = sections[key](**value)
                except TypeError as exc:
                    raise ValueError(f"bad section {key!r}: {exc}") from exc
            else:
                kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: top level must be an object")
        return cls.from_dict(raw)


def derive_seed(master: int, *path: int) -> int:
    """Independent child seed for a labelled sub-task."""
    return int(np.random.SeedSequence(master, spawn_key=tuple(path)).generate_state(1)[0])
