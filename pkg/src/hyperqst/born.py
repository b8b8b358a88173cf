"""Born-rule maps from states to outcome probabilities for a list of POVM elements.

Protocol settings are rank one and factor as (polarization bra) x (frequency
bra), so ``BornMap`` contracts the two factors separately. Arbitrary PSD
matrices are also accepted and go through a dense path.
"""
from __future__ import annotations

import numpy as np

from .apparatus import POL_STATES, MeasurementSetting, TruncationPolicy, freq_measurement_vector


class BornMap:
    def __init__(self, povms, trunc: TruncationPolicy = TruncationPolicy()):
        povms = list(povms)
        if not povms:
            raise ValueError("empty measurement list")
        self.n = len(povms)
        if all(isinstance(p, MeasurementSetting) for p in povms):
            self._init_settings(povms, trunc)
        else:
            self._init_dense(povms)

    def _init_settings(self, settings, trunc):
        pol_keys, freq_keys = {}, {}
        pol_idx, freq_idx = [], []
        pol_vecs, freq_vecs = [], []
        for s in settings:
            pk = (s.pol.idler, s.pol.signal)
            if pk not in pol_keys:
                pol_keys[pk] = len(pol_vecs)
                pol_vecs.append(np.kron(POL_STATES[pk[0]].conj(), POL_STATES[pk[1]].conj()))
            fk = (s.mask, s.idler_eom, s.signal_eom, s.out_bins)
            if fk not in freq_keys:
                freq_keys[fk] = len(freq_vecs)
                freq_vecs.append(freq_measurement_vector(s, trunc))
            pol_idx.append(pol_keys[pk])
            freq_idx.append(freq_keys[fk])
        self.rank_one = True
        self.pol_vecs = np.array(pol_vecs)
        self.freq_vecs = np.array(freq_vecs)
        self.pol_idx = np.array(pol_idx)
        self.freq_idx = np.array(freq_idx)
        self.vectors = np.einsum("ma,mf->maf", self.pol_vecs[self.pol_idx],
                                 self.freq_vecs[self.freq_idx]).reshape(self.n, -1)
        self.dim = self.vectors.shape[1]
        self.mats = None

    def _init_dense(self, povms):
        mats = np.array([np.asarray(p.matrix if hasattr(p, "matrix") else p, dtype=complex) for p in povms])
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValueError("POVM elements must be square matrices of one size")
        self.rank_one = False
        self.mats = mats
        self.dim = mats.shape[1]
        self.vectors = None

    def expectations(self, x: np.ndarray) -> np.ndarray:
        """tr(E_m X) for Hermitian X."""
        if x.shape != (self.dim, self.dim):
            raise ValueError(f"state dimension {x.shape[0]} does not match measurement dimension {self.dim}")
        if self.rank_one:
            return np.sum((self.vectors @ x) * self.vectors.conj(), axis=1).real
        return np.einsum("mij,ji->m", self.mats, x).real

    def adjoint(self, r: np.ndarray) -> np.ndarray:
        """sum_m r_m E_m."""
        if self.rank_one:
            return (self.vectors.conj().T * r) @ self.vectors
        return np.einsum("m,mij->ij", r, self.mats)

    def factor_weights(self, a: np.ndarray) -> np.ndarray:
        """tr(E_m A A^dag) without forming A A^dag."""
        if not self.rank_one:
            return self.expectations(a @ a.conj().T)
        n_pol, pol_dim = self.pol_vecs.shape
        fdim, cols = self.freq_vecs.shape[1], a.shape[1]
        # contract the polarization factor, then all frequency bras in one GEMM
        b = (self.pol_vecs @ a.reshape(pol_dim, fdim * cols)).reshape(n_pol, fdim, cols)
        c = self.freq_vecs @ b.transpose(1, 0, 2).reshape(fdim, n_pol * cols)
        w = np.square(c.view(float)).reshape(-1, n_pol, 2 * cols).sum(axis=2)
        return w[self.freq_idx, self.pol_idx]

    def operator_norms(self) -> np.ndarray:
        if self.rank_one:
            return np.sum(np.abs(self.vectors) ** 2, axis=1)
        return np.abs(np.einsum("mii->m", self.mats))

    def lipschitz(self) -> float:
        """Largest eigenvalue of the normal operator X -> adjoint(expectations(X))."""
        rng = np.random.default_rng(0)
        x = rng.standard_normal((self.dim, self.dim))
        x = x + x.T
        lam = 0.0
        for _ in range(200):
            y = self.adjoint(self.expectations(x))
            y = 0.5 * (y + y.conj().T)
            nrm = np.linalg.norm(y)
            if nrm == 0:
                return 0.0
            new = nrm / np.linalg.norm(x)
            x = y / nrm
            if abs(new - lam) < 1e-10 * new:
                break
            lam = new
        return float(new)
