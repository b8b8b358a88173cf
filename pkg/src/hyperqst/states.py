"""Target polarization/frequency-bin hyperentangled states and noisy variants."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import DensityMatrix, Ket, SubsystemLayout


def _uniform_gamma(d: int) -> tuple[complex, ...]:
    return tuple(complex(1 / np.sqrt(d)) for _ in range(d))


@dataclass(frozen=True)
class HyperStateSpec:
    """(alpha|HH> + beta|VV>) x sum_k gamma_k |idler k, signal d-1-k>."""

    d: int = 2
    alpha: complex = 1 / np.sqrt(2)
    beta: complex = 1 / np.sqrt(2)
    gamma: tuple[complex, ...] | None = None

    def __post_init__(self):
        if int(self.d) < 2:
            raise ValueError(f"frequency dimension must be >= 2, got {self.d}")
        gamma = _uniform_gamma(self.d) if self.gamma is None else tuple(complex(g) for g in self.gamma)
        object.__setattr__(self, "gamma", gamma)
        if len(gamma) != self.d:
            raise ValueError(f"gamma has {len(gamma)} entries, expected {self.d}")
        if abs(abs(self.alpha) ** 2 + abs(self.beta) ** 2 - 1) > 1e-12:
            raise ValueError("|alpha|^2 + |beta|^2 must equal 1")
        if abs(sum(abs(g) ** 2 for g in gamma) - 1) > 1e-12:
            raise ValueError("sum |gamma_k|^2 must equal 1")

    @classmethod
    def uniform(cls, d: int) -> "HyperStateSpec":
        return cls(d=d)


@dataclass(frozen=True)
class BinGrid:
    """Frequency-bin grid; offsets in GHz relative to arbitrary origins."""

    d: int = 2
    spacing: float = 25.0
    width: float = 18.0
    idler_origin: float = 0.0
    signal_origin: float = 0.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("grid needs at least one bin")
        if not 0 < self.width < self.spacing:
            raise ValueError(f"bin width {self.width} must be positive and below spacing {self.spacing}")

    @staticmethod
    def partner(k: int, d: int) -> int:
        """Signal bin energy-matched to idler bin ``k``."""
        return d - 1 - k


def bin_frequencies(grid: BinGrid) -> tuple[np.ndarray, np.ndarray]:
    steps = grid.spacing * np.arange(grid.d)
    return grid.idler_origin + steps, grid.signal_origin + steps


def polarization_ket(alpha: complex = 1 / np.sqrt(2), beta: complex = 1 / np.sqrt(2)) -> Ket:
    amps = np.zeros(4, dtype=complex)
    amps[0], amps[3] = alpha, beta
    return Ket(SubsystemLayout.polarization(), amps)


def frequency_ket(gamma) -> Ket:
    gamma = np.asarray(gamma, dtype=complex)
    d = gamma.size
    amps = np.zeros((d, d), dtype=complex)
    for k, g in enumerate(gamma):
        amps[k, BinGrid.partner(k, d)] = g
    return Ket(SubsystemLayout.frequency(d), amps.ravel())


def build_target(spec: HyperStateSpec) -> Ket:
    pol = polarization_ket(spec.alpha, spec.beta)
    freq = frequency_ket(spec.gamma)
    return Ket(SubsystemLayout.full(spec.d), np.kron(pol.amplitudes, freq.amplitudes))


def depolarize(rho: DensityMatrix, p: float) -> DensityMatrix:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing weight must lie in [0, 1], got {p}")
    n = rho.dim
    return DensityMatrix(rho.layout, (1 - p) * rho.matrix + p * np.eye(n) / n)


def depolarizing_weight_for_fidelity(fidelity: float, dim: int) -> float:
    """White-noise weight that takes a pure target to the given fidelity."""
    p = (1.0 - fidelity) * dim / (dim - 1)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"fidelity {fidelity} unreachable by white noise in dimension {dim}")
    return p


def noisy_target(spec: HyperStateSpec, fidelity: float = 1.0) -> DensityMatrix:
    target = build_target(spec)
    p = depolarizing_weight_for_fidelity(fidelity, target.layout.dim)
    return depolarize(target.projector(), p)
