"""Operator models for the polarization analyzers, pulse shaper, EOMs and WSS.

The frequency lattice is indexed by bin number. Computational bins ``0..d-1``
sit in the middle of an extended lattice padded by ``guard_bins`` on each side
so EOM sidebands have somewhere to go.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
from scipy import optimize, special

from .linalg import tensor


class ConfigurationError(ValueError):
    """Raised when an operator cannot be represented within the chosen truncation."""


POL_STATES = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "A": np.array([1, -1], dtype=complex) / np.sqrt(2),
    "R": np.array([1, 1j], dtype=complex) / np.sqrt(2),
    "L": np.array([1, -1j], dtype=complex) / np.sqrt(2),
}

# Tomographically complete; every label occurs on both arms.
POL_TOMO_16 = (
    "HH", "HV", "HA", "HL", "VL", "RV", "AV", "LV",
    "DD", "AD", "LD", "DR", "RR", "LR", "RL", "AL",
)
POL_MUB_8 = ("HH", "HV", "VH", "VV", "DD", "DA", "AD", "AA")

MAX_RANDOM_DEPTH = 2.32


@dataclass(frozen=True)
class PolProjectorSetting:
    idler: str
    signal: str

    def __post_init__(self):
        for s in (self.idler, self.signal):
            if s not in POL_STATES:
                raise ValueError(f"unknown polarization label {s!r}")

    @classmethod
    def parse(cls, pair: str) -> "PolProjectorSetting":
        return cls(pair[0], pair[1])

    def __str__(self):
        return self.idler + self.signal


@dataclass(frozen=True)
class EomSetting:
    depth: float = 0.0
    rf_phase: float = 0.0

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError(f"modulation depth must be non-negative, got {self.depth}")


@dataclass(frozen=True)
class ShaperMask:
    idler_phases: tuple[float, ...]
    signal_phases: tuple[float, ...]

    def __post_init__(self):
        ip = tuple(float(x) for x in self.idler_phases)
        sp = tuple(float(x) for x in self.signal_phases)
        if len(ip) != len(sp):
            raise ValueError("idler and signal masks must cover the same number of bins")
        if any(not 0.0 <= x < 2 * np.pi for x in ip + sp):
            raise ValueError("shaper phases must lie in [0, 2pi)")
        object.__setattr__(self, "idler_phases", ip)
        object.__setattr__(self, "signal_phases", sp)

    @classmethod
    def flat(cls, d: int) -> "ShaperMask":
        return cls((0.0,) * d, (0.0,) * d)

    @property
    def d(self) -> int:
        return len(self.idler_phases)


@dataclass(frozen=True)
class MeasurementSetting:
    pol: PolProjectorSetting
    mask: ShaperMask
    idler_eom: EomSetting
    signal_eom: EomSetting
    out_bins: tuple[int, int]
    label: str = ""

    def __post_init__(self):
        out = tuple(int(b) for b in self.out_bins)
        if len(out) != 2 or any(not 0 <= b < self.d for b in out):
            raise ValueError(f"output bins {self.out_bins} outside [0, {self.d})")
        object.__setattr__(self, "out_bins", out)

    @property
    def d(self) -> int:
        return self.mask.d


@dataclass(frozen=True)
class TruncationPolicy:
    guard_bins: int = 12
    leakage_tolerance: float = 1e-10


def bessel_j(n: int, x: float) -> float:
    """Bessel function of the first kind J_n(x) for integer order."""
    if abs(n) > 40 or abs(x) > 10:
        raise ValueError(f"bessel_j supports |n| <= 40 and |x| <= 10, got n={n}, x={x}")
    return float(special.jv(int(n), float(x)))


@lru_cache(maxsize=None)
def hadamard_depth(lo: float = 1.0, hi: float = 2.0) -> float:
    """Smallest positive modulation index where |J0| = |J1| (two-bin Hadamard).

    J0 > J1 > 0 on (0, 1], so any bracket inside [1, 2] isolates the first crossing.
    """
    return optimize.bisect(lambda x: special.j0(x) - special.j1(x), lo, hi, xtol=1e-9)


def leakage(depth: float, guard_bins: int) -> float:
    n = np.arange(-guard_bins, guard_bins + 1)
    return float(1.0 - np.sum(special.jv(n, depth) ** 2))


def check_truncation(depth: float, trunc: TruncationPolicy) -> None:
    leak = leakage(depth, trunc.guard_bins)
    if leak > trunc.leakage_tolerance:
        raise ConfigurationError(
            f"modulation depth {depth:.4f} leaks {leak:.2e} beyond {trunc.guard_bins} guard bins "
            f"(tolerance {trunc.leakage_tolerance:.0e}); increase guard_bins"
        )


def eom_transfer(setting: EomSetting, lattice_size: int, trunc: TruncationPolicy = TruncationPolicy()) -> np.ndarray:
    """Finite section of the EOM bin-scattering matrix, entry (m, k) = J_{m-k}(depth) e^{i(m-k)phase}."""
    check_truncation(setting.depth, trunc)
    idx = np.arange(lattice_size)
    n = idx[:, None] - idx[None, :]
    return special.jv(n, setting.depth) * np.exp(1j * n * setting.rf_phase)


def shaper_operator(mask: ShaperMask) -> np.ndarray:
    phases = np.add.outer(np.asarray(mask.idler_phases), np.asarray(mask.signal_phases)).ravel()
    return np.diag(np.exp(1j * phases))


def freq_measurement_vector(setting: MeasurementSetting, trunc: TruncationPolicy = TruncationPolicy()) -> np.ndarray:
    """Row vector K with E = K^dag K, acting on the d*d computational frequency space."""
    d, g = setting.d, trunc.guard_bins
    size = d + 2 * g
    comp = slice(g, g + d)
    u_i = eom_transfer(setting.idler_eom, size, trunc)[g + setting.out_bins[0], comp]
    u_s = eom_transfer(setting.signal_eom, size, trunc)[g + setting.out_bins[1], comp]
    phases = np.add.outer(np.asarray(setting.mask.idler_phases), np.asarray(setting.mask.signal_phases))
    return (np.outer(u_i, u_s) * np.exp(1j * phases)).ravel()


def freq_povm_element(setting: MeasurementSetting, trunc: TruncationPolicy = TruncationPolicy()) -> np.ndarray:
    k = freq_measurement_vector(setting, trunc)
    return np.outer(k.conj(), k)


def pol_projector(setting: PolProjectorSetting) -> np.ndarray:
    a, b = POL_STATES[setting.idler], POL_STATES[setting.signal]
    return tensor(np.outer(a, a.conj()), np.outer(b, b.conj()))


def joint_measurement_vector(setting: MeasurementSetting, trunc: TruncationPolicy = TruncationPolicy()) -> np.ndarray:
    """Row vector whose outer product gives the joint POVM element (it is rank one)."""
    a, b = POL_STATES[setting.pol.idler], POL_STATES[setting.pol.signal]
    return np.kron(np.kron(a.conj(), b.conj()), freq_measurement_vector(setting, trunc))


def joint_povm(setting: MeasurementSetting, trunc: TruncationPolicy = TruncationPolicy()) -> np.ndarray:
    return tensor(pol_projector(setting.pol), freq_povm_element(setting, trunc))


def _bin_pairs(d: int):
    return list(product(range(d), repeat=2))


def protocol_qubit128() -> list[MeasurementSetting]:
    """16 polarization projections x (4 Z(x)Z + 4 X(x)X frequency outcomes)."""
    d = 2
    off = EomSetting(0.0)
    on = EomSetting(hadamard_depth())
    flat = ShaperMask.flat(d)
    settings = []
    for pol in POL_TOMO_16:
        for basis, eom in (("Z", off), ("X", on)):
            for i, s in _bin_pairs(d):
                settings.append(MeasurementSetting(
                    PolProjectorSetting.parse(pol), flat, eom, eom, (i, s), label=f"{pol}-{basis}-{i}{s}"))
    return settings


def protocol_random(d: int, seed: int, n_frames: int = 10, max_depth: float = MAX_RANDOM_DEPTH,
                    pol_set=POL_MUB_8) -> list[MeasurementSetting]:
    """Random shaper phases and EOM depths, each frame read out on all d*d bin pairs."""
    if d < 2:
        raise ValueError("random protocol needs d >= 2")
    rng = np.random.default_rng(seed)
    frames = []
    for _ in range(n_frames):
        phases = rng.uniform(0.0, 2 * np.pi, size=2 * d)
        depths = rng.uniform(0.0, max_depth, size=2)
        frames.append((ShaperMask(tuple(phases[:d]), tuple(phases[d:])), EomSetting(depths[0]), EomSetting(depths[1])))
    settings = []
    for pol in pol_set:
        for f, (mask, eom_i, eom_s) in enumerate(frames):
            for i, s in _bin_pairs(d):
                settings.append(MeasurementSetting(
                    PolProjectorSetting.parse(pol), mask, eom_i, eom_s, (i, s), label=f"{pol}-R{f:02d}-{i}{s}"))
    return settings


def protocol_qutrit720(rng_seed: int) -> list[MeasurementSetting]:
    return protocol_random(3, rng_seed)


def protocol_dimension(settings: list[MeasurementSetting]) -> int:
    ds = {s.d for s in settings}
    if len(ds) != 1:
        raise ValueError(f"protocol mixes frequency dimensions {sorted(ds)}")
    return ds.pop()
