"""Reduced states, entanglement bounds and posterior interval summaries."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linalg import ROLES, DensityMatrix, Ket, entropy, fidelity_pure, partial_trace, partial_transpose, trace_norm
from .states import HyperStateSpec, build_target, frequency_ket, polarization_ket
from .tomography import PosteriorEnsemble

DOF_SUBSYSTEMS = {"polarization": (0, 1), "frequency": (2, 3)}


@dataclass(frozen=True)
class Bipartition:
    side_a: tuple[int, ...]
    side_b: tuple[int, ...]

    def __post_init__(self):
        a, b = tuple(int(i) for i in self.side_a), tuple(int(i) for i in self.side_b)
        if not a or not b:
            raise ValueError("both sides of a bipartition must be nonempty")
        if set(a) & set(b):
            raise ValueError(f"sides {a} and {b} overlap")
        object.__setattr__(self, "side_a", a)
        object.__setattr__(self, "side_b", b)

    def check(self, rho: DensityMatrix) -> None:
        n = len(rho.layout.dims)
        if sorted(self.side_a + self.side_b) != list(range(n)):
            raise ValueError(f"cut {self.side_a}|{self.side_b} does not cover the {n} subsystems")

    @classmethod
    def photons(cls, rho: DensityMatrix) -> "Bipartition":
        """Idler photon vs signal photon, for a full or single-DoF layout."""
        roles = rho.layout.roles
        a = tuple(i for i, r in enumerate(roles) if r.endswith("idler"))
        b = tuple(i for i, r in enumerate(roles) if r.endswith("signal"))
        return cls(a, b)


def reduce_to_dof(rho_pf: DensityMatrix, dof: str) -> DensityMatrix:
    if rho_pf.layout.roles != ROLES:
        raise ValueError(f"expected the full polarization x frequency layout, got roles {rho_pf.layout.roles}")
    if dof not in DOF_SUBSYSTEMS:
        raise ValueError(f"dof must be 'polarization' or 'frequency', got {dof!r}")
    return partial_trace(rho_pf, DOF_SUBSYSTEMS[dof])


def log_negativity(rho: DensityMatrix, cut: Bipartition) -> float:
    """log2 of the trace norm of the partial transpose, in ebits."""
    cut.check(rho)
    return max(0.0, math.log2(trace_norm(partial_transpose(rho, cut.side_b))))


def coherent_information(rho: DensityMatrix, cut: Bipartition) -> float:
    """Coherent information maximized over the two one-way directions, in ebits."""
    cut.check(rho)
    s_ab = entropy(rho)
    s_a = entropy(partial_trace(rho, cut.side_a))
    s_b = entropy(partial_trace(rho, cut.side_b))
    return max(s_b - s_ab, s_a - s_ab)


def format_mean_std(mean: float, std: float, percent: bool = False) -> str:
    """Compact notation with one significant digit of uncertainty, e.g. 94.4(6)%."""
    scale = 100.0 if percent else 1.0
    m, s = mean * scale, std * scale
    suffix = "%" if percent else ""
    if not np.isfinite(s) or s < 0:
        raise ValueError(f"invalid standard deviation {std}")
    if s == 0:
        return f"{m:.4g}(0){suffix}"
    exp = math.floor(math.log10(s))
    digit = math.floor(s / 10 ** exp + 0.5)
    if digit == 10:
        exp, digit = exp + 1, 1
    if exp >= 0:
        unit = 10 ** exp
        return f"{round(m / unit) * unit:.0f}({digit * unit}){suffix}"
    return f"{m:.{-exp}f}({digit}){suffix}"


@dataclass(frozen=True)
class IntervalEstimate:
    mean: float
    std: float
    label: str = ""

    def __post_init__(self):
        if not self.std >= 0:
            raise ValueError("std must be non-negative")

    def format(self, percent: bool = False) -> str:
        return format_mean_std(self.mean, self.std, percent)

    def to_dict(self) -> dict:
        return {"label": self.label, "mean": self.mean, "std": self.std, "formatted": self.format()}


def ensemble_interval(ens: PosteriorEnsemble, functional: Callable[..., float], *args,
                      label: str = "") -> IntervalEstimate:
    if len(ens) == 0:
        raise ValueError("empty ensemble")
    values = np.array([functional(s, *args) for s in ens.states])
    return IntervalEstimate(float(values.mean()), float(values.std()), label)


def reduced_ensemble(ens: PosteriorEnsemble, dof: str) -> PosteriorEnsemble:
    keep = DOF_SUBSYSTEMS[dof]
    layout = ens.layout.sub(keep)
    samples = np.array([reduce_to_dof(s, dof).matrix for s in ens.states])
    return PosteriorEnsemble(layout, samples, ens.acceptance_rate, ens.step_beta)


def target_kets(spec: HyperStateSpec) -> dict[str, Ket]:
    return {
        "PF": build_target(spec),
        "P": polarization_ket(spec.alpha, spec.beta),
        "F": frequency_ket(spec.gamma),
    }


def summarize(ens: PosteriorEnsemble, spec: HyperStateSpec) -> dict[str, dict[str, IntervalEstimate]]:
    """Fidelity and [I_C, E_N] intervals for the joint state and each DoF."""
    kets = target_kets(spec)
    levels = {"PF": ens, "P": reduced_ensemble(ens, "polarization"), "F": reduced_ensemble(ens, "frequency")}
    out = {}
    for name, sub in levels.items():
        cut = Bipartition.photons(sub.states[0])
        out[name] = {
            "fidelity": ensemble_interval(sub, fidelity_pure, kets[name], label=f"F_{name}"),
            "coherent_information": ensemble_interval(sub, coherent_information, cut, label=f"I_C({name})"),
            "log_negativity": ensemble_interval(sub, log_negativity, cut, label=f"E_N({name})"),
        }
    return out


def bound_violations(ens: PosteriorEnsemble, tol: float = 1e-9) -> int:
    """Number of (sample, cut) pairs where I_C exceeds E_N by more than ``tol``."""
    bad = 0
    for s in ens.states:
        levels = [s, reduce_to_dof(s, "polarization"), reduce_to_dof(s, "frequency")] \
            if s.layout.roles == ROLES else [s]
        for r in levels:
            cut = Bipartition.photons(r)
            bad += coherent_information(r, cut) > log_negativity(r, cut) + tol
    return bad
