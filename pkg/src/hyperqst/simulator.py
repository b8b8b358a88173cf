"""Poissonian coincidence-count simulation for a measurement protocol."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .apparatus import MeasurementSetting, TruncationPolicy, protocol_dimension
from .born import BornMap
from .linalg import DensityMatrix

INTEGRATION_TIME = 60.0


@dataclass(frozen=True)
class FluxModel:
    """pair_rate: coincidences/s at unit POVM expectation; accidental_rate: background coincidences/s.

    The default rate gives about 500 coincidences per 60 s Z x Z frame (summed over
    the four bin outcomes) for the ideal d = 2 state.
    """

    pair_rate: float = 31.4
    integration_time: float = INTEGRATION_TIME
    accidental_rate: float = 0.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value >= 0:
                raise ValueError(f"{name} must be non-negative, got {value}")


@dataclass(frozen=True)
class CountRecord:
    setting_label: str
    counts: int
    duration: float

    def __post_init__(self):
        if self.counts < 0:
            raise ValueError("counts must be non-negative")


@dataclass
class Dataset:
    records: list[CountRecord]
    protocol_id: str
    d: int
    metadata: dict = field(default_factory=dict)

    @property
    def counts(self) -> np.ndarray:
        return np.array([r.counts for r in self.records], dtype=float)

    @property
    def durations(self) -> np.ndarray:
        return np.array([r.duration for r in self.records], dtype=float)

    @property
    def labels(self) -> list[str]:
        return [r.setting_label for r in self.records]

    def check_against(self, protocol: list[MeasurementSetting]) -> None:
        if len(protocol) != len(self.records):
            raise ValueError(f"dataset has {len(self.records)} records but protocol has {len(protocol)} settings")
        for rec, s in zip(self.records, protocol):
            if rec.setting_label != s.label:
                raise ValueError(f"record {rec.setting_label!r} does not match protocol setting {s.label!r}")


def born_probabilities(rho: DensityMatrix | np.ndarray, protocol: list[MeasurementSetting],
                       trunc: TruncationPolicy = TruncationPolicy()) -> np.ndarray:
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return np.clip(BornMap(protocol, trunc).expectations(m), 0.0, None)


def expected_rate(rho: DensityMatrix, setting: MeasurementSetting, flux: FluxModel,
                  trunc: TruncationPolicy = TruncationPolicy()) -> float:
    p = born_probabilities(rho, [setting], trunc)[0]
    return flux.pair_rate * p + flux.accidental_rate


def sample_counts(rate: float, duration: float, rng: np.random.Generator) -> int:
    if rate < 0:
        raise ValueError("rate must be non-negative")
    return int(rng.poisson(rate * duration))


def generate_dataset(rho: DensityMatrix, protocol: list[MeasurementSetting], flux: FluxModel,
                     rng: np.random.Generator | int, protocol_id: str = "custom",
                     trunc: TruncationPolicy = TruncationPolicy(), metadata: dict | None = None) -> Dataset:
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = np.random.default_rng(rng) if seed is not None else rng
    d = protocol_dimension(protocol)
    rates = flux.pair_rate * born_probabilities(rho, protocol, trunc) + flux.accidental_rate
    counts = gen.poisson(rates * flux.integration_time)
    records = [CountRecord(s.label, int(c), flux.integration_time) for s, c in zip(protocol, counts)]
    meta = {"seed": seed, "protocol": protocol_id, **asdict(flux)}
    meta.update(metadata or {})
    return Dataset(records, protocol_id, d, meta)


def pair_rate_for_counts(rho: DensityMatrix, protocol: list[MeasurementSetting], mean_counts: float,
                         integration_time: float = INTEGRATION_TIME, select=None) -> float:
    """pair_rate giving ``mean_counts`` expected coincidences, averaged over the selected settings."""
    idx = [i for i, s in enumerate(protocol) if select is None or select(s)]
    p = born_probabilities(rho, [protocol[i] for i in idx])
    return mean_counts / (integration_time * p.mean())
