"""Dense linear algebra on small multipartite Hilbert spaces.

Matrices are plain ``numpy`` arrays. Subsystem index 0 is the slowest-varying
tensor factor, so ``tensor(a, b)`` agrees with the order in a ``SubsystemLayout``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

ROLES = ("pol-idler", "pol-signal", "freq-idler", "freq-signal")

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
EIG_CLIP = 1e-12


@dataclass(frozen=True)
class SubsystemLayout:
    dims: tuple[int, ...]
    roles: tuple[str, ...]

    def __post_init__(self):
        if len(self.dims) != len(self.roles):
            raise ValueError("dims and roles must have equal length")
        if any(int(d) < 1 for d in self.dims):
            raise ValueError(f"subsystem dimensions must be positive, got {self.dims}")
        bad = [r for r in self.roles if r not in ROLES]
        if bad:
            raise ValueError(f"unknown subsystem roles {bad}")

    @classmethod
    def full(cls, d: int) -> "SubsystemLayout":
        return cls((2, 2, d, d), ROLES)

    @classmethod
    def polarization(cls) -> "SubsystemLayout":
        return cls((2, 2), ROLES[:2])

    @classmethod
    def frequency(cls, d: int) -> "SubsystemLayout":
        return cls((d, d), ROLES[2:])

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, role: str) -> int:
        return self.roles.index(role)

    def sub(self, keep: Sequence[int]) -> "SubsystemLayout":
        return SubsystemLayout(tuple(self.dims[i] for i in keep), tuple(self.roles[i] for i in keep))


@dataclass(frozen=True, eq=False)
class Ket:
    layout: SubsystemLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        if amps.size != self.layout.dim:
            raise ValueError(f"ket has {amps.size} amplitudes, layout needs {self.layout.dim}")
        if abs(np.vdot(amps, amps).real - 1.0) > 1e-12:
            raise ValueError("ket is not normalized")
        object.__setattr__(self, "amplitudes", amps)

    def projector(self) -> "DensityMatrix":
        return DensityMatrix(self.layout, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, PSD, unit-trace matrix attached to a layout.

    Construction validates the invariants; pass ``check=False`` only for
    matrices that are valid by construction (e.g. ``AA^dag / tr``).
    """

    layout: SubsystemLayout
    matrix: np.ndarray
    check: bool = True

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = self.layout.dim
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match layout dimension {n}")
        object.__setattr__(self, "matrix", m)
        if self.check:
            validate_density(m)

    @property
    def dim(self) -> int:
        return self.layout.dim


def validate_density(m: np.ndarray) -> None:
    if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
        raise ValueError("matrix is not Hermitian")
    if abs(np.trace(m).real - 1.0) > TRACE_TOL:
        raise ValueError(f"trace {np.trace(m).real!r} differs from 1")
    if np.linalg.eigvalsh(m).min() < -PSD_TOL:
        raise ValueError("matrix has negative eigenvalues")


def tensor(*factors: np.ndarray) -> np.ndarray:
    """Kronecker product; the first factor is the slowest-varying index."""
    return reduce(np.kron, [np.asarray(f, dtype=complex) for f in factors])


def _check_indices(subsystems: Sequence[int], n: int) -> list[int]:
    idx = [int(i) for i in subsystems]
    if any(i < 0 or i >= n for i in idx) or len(set(idx)) != len(idx):
        raise ValueError(f"invalid subsystem indices {list(subsystems)} for {n} subsystems")
    return idx


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    dims = rho.layout.dims
    n = len(dims)
    keep = sorted(_check_indices(keep, n))
    if not keep:
        raise ValueError("keep must name at least one subsystem")
    t = rho.matrix.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # einsum labels: row indices 0..n-1, column indices n..2n-1; traced pairs share a label
    row = list(range(n))
    col = [i if i in traced else n + i for i in range(n)]
    out = [i for i in keep] + [n + i for i in keep]
    red = np.einsum(t, row + col, out)
    kd = rho.layout.sub(keep)
    return DensityMatrix(kd, red.reshape(kd.dim, kd.dim), check=False)


def partial_transpose(rho: DensityMatrix, subsystems: Sequence[int]) -> np.ndarray:
    dims = rho.layout.dims
    n = len(dims)
    idx = _check_indices(subsystems, n)
    t = rho.matrix.reshape(dims + dims)
    perm = list(range(2 * n))
    for i in idx:
        perm[i], perm[n + i] = perm[n + i], perm[i]
    return t.transpose(perm).reshape(rho.dim, rho.dim)


def eig_hermitian(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order with matching orthonormal eigenvectors."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
    if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-10 * scale:
        raise ValueError("matrix is not Hermitian")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return w[::-1], v[:, ::-1]


def entropy(rho: DensityMatrix | np.ndarray) -> float:
    """von Neumann entropy in bits."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else rho
    w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    w = w[w > EIG_CLIP]
    return float(-np.sum(w * np.log2(w)))


def fidelity_pure(rho: DensityMatrix, target: Ket) -> float:
    if rho.dim != target.amplitudes.size:
        raise ValueError(f"dimension mismatch: state {rho.dim}, target {target.amplitudes.size}")
    psi = target.amplitudes
    f = np.vdot(psi, rho.matrix @ psi).real
    return float(min(1.0, max(0.0, f)))


def trace_norm(m: np.ndarray) -> float:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("trace norm needs a square matrix")
    if m.size == 0:
        return 0.0
    if np.allclose(m, m.conj().T, atol=1e-12):
        return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (m + m.conj().T)))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def maximally_mixed(layout: SubsystemLayout) -> DensityMatrix:
    return DensityMatrix(layout, np.eye(layout.dim) / layout.dim)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * trace_norm(np.asarray(a) - np.asarray(b))
