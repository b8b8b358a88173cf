"""Bayesian state tomography with a preconditioned Crank-Nicolson (pCN) sampler.

States are parametrized as rho(A) = A A^dag / tr(A A^dag) with A a square complex
Gaussian (Ginibre) matrix, which induces the Hilbert-Schmidt measure on density
matrices. pCN proposals leave the Gaussian prior invariant, so the Metropolis
ratio only involves the likelihood.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .apparatus import TruncationPolicy
from .born import BornMap
from .linalg import DensityMatrix, SubsystemLayout
from .simulator import Dataset

log = logging.getLogger(__name__)


class DiagnosticError(RuntimeError):
    """The data cannot be explained by any state under the measurement model."""


@dataclass(eq=False)
class GinibreParam:
    matrix: np.ndarray

    @classmethod
    def draw(cls, dim: int, rng: np.random.Generator, rank: int | None = None) -> "GinibreParam":
        return cls(complex_normal(rng, (dim, rank or dim)))

    def density(self) -> np.ndarray:
        a = self.matrix
        rho = a @ a.conj().T
        return rho / np.trace(rho).real


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@dataclass
class ChainConfig:
    n_samples: int = 1024
    burn_in: int = 10_000
    thinning: int = 200
    step_beta: float = 0.1
    seed: int = 0
    adapt: bool = True
    target_acceptance: float = 0.25
    init: str = "estimate"  # or "prior"
    dilation_every: int = 10  # 0 disables the spectral dilation move
    dilation_scale: float = 0.05

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not 0 < self.step_beta <= 1:
            raise ValueError("step_beta must lie in (0, 1]")
        if self.burn_in < 0 or self.thinning < 1:
            raise ValueError("burn_in must be >= 0 and thinning >= 1")
        if self.init not in ("estimate", "prior"):
            raise ValueError(f"unknown chain init {self.init!r}")


@dataclass
class PosteriorEnsemble:
    layout: SubsystemLayout
    samples: np.ndarray  # (n, D, D)
    acceptance_rate: float
    step_beta: float
    acceptance_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    loglik_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return len(self.samples)

    @property
    def states(self) -> list[DensityMatrix]:
        return [DensityMatrix(self.layout, s) for s in self.samples]


def hermitian_coordinates(dim: int):
    """Index arrays for orthonormal Hermitian-basis coordinates (diag, Re upper, Im upper)."""
    iu, ju = np.triu_indices(dim, k=1)
    return iu, ju


def design_matrix(born: BornMap) -> np.ndarray:
    """tr(E_m B_b) for the orthonormal Hermitian basis B_b, shape (M, dim^2)."""
    dim = born.dim
    if born.rank_one:
        k = born.vectors
        e = k.conj()[:, :, None] * k[:, None, :]
    else:
        e = born.mats
    iu, ju = hermitian_coordinates(dim)
    diag = np.einsum("mii->mi", e).real
    off = e[:, iu, ju]
    return np.hstack([diag, np.sqrt(2) * off.real, -np.sqrt(2) * off.imag])


def from_coordinates(c: np.ndarray, dim: int) -> np.ndarray:
    iu, ju = hermitian_coordinates(dim)
    n_off = iu.size
    x = np.diag(c[:dim]).astype(complex)
    x[iu, ju] = (c[dim:dim + n_off] - 1j * c[dim + n_off:]) / np.sqrt(2)
    x[ju, iu] = x[iu, ju].conj()
    return x


class PoissonModel:
    """Counts N_m ~ Poisson((s p_m + b_m) T_m) with p_m = tr(E_m rho) and unknown scale s.

    ``scale`` is "profile" (maximize over s per evaluation), a fixed float, or
    ("gamma", shape, rate) to integrate s against a conjugate Gamma prior.
    """

    def __init__(self, data: Dataset, povms, scale="profile", background: Sequence[float] | None = None,
                 trunc: TruncationPolicy = TruncationPolicy()):
        self.born = povms if isinstance(povms, BornMap) else BornMap(povms, trunc)
        if self.born.n != len(data.records):
            raise ValueError(f"{len(data.records)} records but {self.born.n} POVM elements")
        if not (scale == "profile" or isinstance(scale, (int, float)) or
                (isinstance(scale, tuple) and len(scale) == 3 and scale[0] == "gamma")):
            raise ValueError(f"unknown scale handling {scale!r}")
        self.dim = self.born.dim
        self.counts = data.counts
        self.durations = data.durations
        self.background = np.zeros(self.born.n) if background is None else np.asarray(background, dtype=float)
        if isinstance(scale, tuple) and np.any(self.background > 0):
            raise ValueError("gamma scale marginalization requires zero background")
        self.scale = scale
        self._n_total = self.counts.sum()
        self._pos = self.counts > 0

    def _fixed(self, p: np.ndarray, s: float) -> float:
        lam = (s * p + self.background) * self.durations
        if np.any(lam[self._pos] <= 0):
            return -np.inf
        return float(np.sum(self.counts[self._pos] * np.log(lam[self._pos])) - lam.sum())

    def profile_scale(self, p: np.ndarray) -> float:
        pt = p * self.durations
        if not np.any(self.background > 0):
            return self._n_total / pt.sum() if pt.sum() > 0 else 0.0
        bt = self.background * self.durations

        def grad(s):
            return np.sum(self.counts * pt / (s * pt + bt)) - pt.sum()

        if grad(0.0) <= 0:
            return 0.0
        hi = 1.0
        while grad(hi) > 0:
            hi *= 2
        return optimize.brentq(grad, 0.0, hi, xtol=1e-12, rtol=1e-12)

    def from_probabilities(self, p: np.ndarray) -> float:
        p = np.clip(p, 0.0, None)
        if isinstance(self.scale, tuple):
            _, shape, rate = self.scale
            if np.any(p[self._pos] <= 0):
                return -np.inf
            pt = p * self.durations
            return float(np.sum(self.counts[self._pos] * np.log(pt[self._pos]))
                         - (self._n_total + shape) * np.log(pt.sum() + rate))
        if self.scale == "profile":
            return self._fixed(p, self.profile_scale(p))
        return self._fixed(p, float(self.scale))

    def loglik(self, rho: np.ndarray) -> float:
        return self.from_probabilities(self.born.expectations(rho))

    def __call__(self, param: GinibreParam) -> float:
        a = param.matrix
        return self.from_probabilities(self.born.factor_weights(a) / np.vdot(a, a).real)


def log_likelihood(param: GinibreParam, data: Dataset, povms, scale_handling="profile",
                   background=None) -> float:
    """Poisson log-likelihood up to parameter-independent constants."""
    return PoissonModel(data, povms, scale_handling, background)(param)


def pcn_step(current: GinibreParam, step_beta: float, rng: np.random.Generator,
             loglik=None, current_ll: float | None = None):
    """One pCN move. Returns (state, loglik, accepted); the proposal is always drawn."""
    g = complex_normal(rng, current.matrix.shape)
    proposal = GinibreParam(np.sqrt(1 - step_beta ** 2) * current.matrix + step_beta * g)
    if loglik is None:
        return proposal, None, True
    new_ll = loglik(proposal)
    log_u = np.log(rng.uniform())
    if np.isfinite(new_ll) and log_u < new_ll - current_ll:
        return proposal, new_ll, True
    return current, current_ll, False


def radial_refresh(current: GinibreParam, rng: np.random.Generator) -> GinibreParam:
    """Redraw ||A||_F from its prior conditional; rho(A) and the likelihood are unchanged.

    Under the Ginibre prior the direction and norm of A are independent and the
    likelihood sees only the direction, so this is an exact Gibbs update.
    """
    a = current.matrix
    r2 = rng.gamma(a.size, 1.0)  # ||A||^2 for a complex normal matrix with E|A_ij|^2 = 1
    return GinibreParam(a * np.sqrt(r2) / np.linalg.norm(a))


def dilation_step(current: GinibreParam, tau: float, rng: np.random.Generator, loglik, current_ll: float):
    """Metropolis move that rescales A off its dominant left-singular direction by c = exp(eta).

    A -> (P + cQ) A with P the projector on the top eigenvector of A A^dag and
    Q = 1 - P. This shifts weight between the leading eigenvalue of rho and the
    rest of the spectrum, the direction pCN explores most slowly. The map keeps
    that eigenvector, so it is its own reverse with c -> 1/c; moves that change
    which eigenvector leads are rejected. The acceptance ratio carries the
    Gaussian prior and the Jacobian of sigma_j -> c sigma_j (j >= 2) under the
    singular-value density prod_{i<j} (s_i^2 - s_j^2)^2 prod_i s_i^(2(D-K)+1).
    """
    a = current.matrix
    dim, cols = a.shape
    u, sv, _ = np.linalg.svd(a, full_matrices=False)
    psi = u[:, 0]
    eta = tau * rng.standard_normal()
    c = np.exp(eta)
    top = np.outer(psi, psi.conj() @ a)
    proposal = GinibreParam(top + c * (a - top))
    log_u = np.log(rng.uniform())
    if sv.size > 1 and c * sv[1] >= sv[0]:
        return current, current_ll, False
    new_ll = loglik(proposal)
    s1, rest = sv[0] ** 2, sv[1:] ** 2
    log_jac = 2 * (dim - 1) * (sv.size - 1) * eta + 2 * np.sum(np.log((s1 - c * c * rest) / (s1 - rest)))
    log_ratio = (new_ll - current_ll - np.vdot(proposal.matrix, proposal.matrix).real + np.vdot(a, a).real
                 + log_jac)
    if np.isfinite(new_ll) and log_u < log_ratio:
        return proposal, new_ll, True
    return current, current_ll, False


def _sqrt_psd(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def _initial_param(model: PoissonModel, data: Dataset, povms, config: ChainConfig,
                   rng: np.random.Generator) -> GinibreParam:
    dim = model.dim
    if config.init == "prior":
        return GinibreParam.draw(dim, rng)
    return start_from_estimate(linear_inversion(data, model.born).psd)


def start_from_estimate(rho: np.ndarray, mix: float = 0.1) -> GinibreParam:
    """Full-rank chain start near a point estimate, scaled to the prior's typical tr(A A^dag) = D^2."""
    dim = rho.shape[0]
    return GinibreParam(_sqrt_psd((1 - mix) * rho + mix * np.eye(dim) / dim) * dim)


def run_chain(data: Dataset, povms, config: ChainConfig = ChainConfig(), layout: SubsystemLayout | None = None,
              scale_handling="profile", background=None, model: PoissonModel | None = None,
              initial: np.ndarray | GinibreParam | None = None) -> PosteriorEnsemble:
    """Sample the posterior; ``initial`` optionally fixes the start (a density matrix or a parameter)."""
    model = model or PoissonModel(data, povms, scale_handling, background)
    dim = model.dim
    if layout is None:
        layout = SubsystemLayout.full(data.d) if SubsystemLayout.full(data.d).dim == dim else \
            SubsystemLayout((dim,), ("pol-idler",))
    dead = (model.counts > 0) & (model.born.operator_norms() < 1e-14) & (model.background <= 0)
    if np.any(dead):
        bad = [data.records[i].setting_label for i in np.flatnonzero(dead)]
        raise DiagnosticError(f"records {bad[:5]} have counts but a zero measurement operator")

    rng = np.random.default_rng(config.seed)
    if isinstance(initial, GinibreParam):
        current = initial
    elif initial is not None:
        current = GinibreParam(_sqrt_psd(np.asarray(initial)) * dim)
    else:
        current = _initial_param(model, data, povms, config, rng)
    ll = model(current)
    if not np.isfinite(ll):
        current = GinibreParam(np.eye(dim, dtype=complex) * np.sqrt(dim))
        ll = model(current)
    if not np.isfinite(ll):
        raise DiagnosticError("data have zero likelihood under every full-rank state")

    beta, tau = config.step_beta, config.dilation_scale
    pcn_acc = dil_acc = dil_tried = 0
    window = 100

    def sweep(step):
        nonlocal current, ll, pcn_acc, dil_acc, dil_tried
        current, ll, acc = pcn_step(current, beta, rng, model, ll)
        current = radial_refresh(current, rng)
        pcn_acc += acc
        if config.dilation_every and step % config.dilation_every == 0:
            current, ll, acc = dilation_step(current, tau, rng, model, ll)
            dil_acc += acc
            dil_tried += 1

    for step in range(1, config.burn_in + 1):
        sweep(step)
        if config.adapt and step % window == 0:
            beta = float(np.clip(beta * np.exp(2.0 * (pcn_acc / window - config.target_acceptance)), 1e-6, 1.0))
            if dil_tried:
                tau = float(np.clip(tau * np.exp(2.0 * (dil_acc / dil_tried - 0.3)), 1e-6, 1.0))
            pcn_acc = dil_acc = dil_tried = 0

    pcn_acc = dil_acc = dil_tried = 0
    samples = np.empty((config.n_samples, dim, dim), dtype=complex)
    lls = np.empty(config.n_samples)
    acc_trace = np.empty(config.n_samples)
    step = 0
    for i in range(config.n_samples):
        before = pcn_acc
        for _ in range(config.thinning):
            step += 1
            sweep(step)
        acc_trace[i] = (pcn_acc - before) / config.thinning
        samples[i] = current.density()
        lls[i] = ll
    rate = pcn_acc / (config.n_samples * config.thinning)
    log.info("chain finished: pCN acceptance %.3f (beta %.2e), dilation acceptance %.3f (tau %.2e)",
             rate, beta, dil_acc / max(dil_tried, 1), tau)
    return PosteriorEnsemble(layout, samples, rate, beta, acc_trace, lls)


def bayesian_mean(ens: PosteriorEnsemble) -> DensityMatrix:
    if len(ens) == 0:
        raise ValueError("empty ensemble")
    m = ens.samples.mean(axis=0)
    return DensityMatrix(ens.layout, 0.5 * (m + m.conj().T))


@dataclass
class LinearInversionResult:
    raw: np.ndarray  # Hermitian, unit trace, possibly not PSD
    psd: np.ndarray  # density-matrix-constrained least squares
    rank: int
    n_params: int

    @property
    def complete(self) -> bool:
        return self.rank == self.n_params


def project_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.clip(w, 0, None)) @ v.conj().T


def linear_inversion(data: Dataset, povms, max_iter: int = 5000, tol: float = 1e-12) -> LinearInversionResult:
    """Least-squares inversion of the rate-normalized Born rule.

    The unknown is X = s * rho with the flux scale s absorbed; both returned
    matrices are normalized to unit trace. ``raw`` is the minimum-norm solution,
    whose unconstrained directions are zero when the protocol is incomplete
    (``complete`` is False then). ``psd`` minimizes the same residual over the
    PSD cone by accelerated projected gradient (FISTA).
    """
    born = povms if isinstance(povms, BornMap) else BornMap(povms)
    if born.n != len(data.records):
        raise ValueError(f"{len(data.records)} records but {born.n} POVM elements")
    dim = born.dim
    y = data.counts / data.durations
    coef, _, rank, _ = np.linalg.lstsq(design_matrix(born), y, rcond=None)
    n_params = dim * dim
    if rank < n_params:
        log.warning("linear inversion: measurement operators span %d of %d directions", rank, n_params)
    x_raw = from_coordinates(coef, dim)
    tr = np.trace(x_raw).real
    if tr <= 0:
        raise DiagnosticError("linear inversion produced a non-positive trace")

    step = 1.0 / born.lipschitz()
    x = project_psd(x_raw)
    z, t = x.copy(), 1.0
    for _ in range(max_iter):
        grad = born.adjoint(born.expectations(z) - y)
        x_new = project_psd(z - step * grad)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = x_new + (t - 1) / t_new * (x_new - x)
        change = np.linalg.norm(x_new - x)
        x, t = x_new, t_new
        if change <= tol * max(1.0, np.linalg.norm(x)):
            break
    return LinearInversionResult(x_raw / tr, x / np.trace(x).real, int(rank), n_params)
