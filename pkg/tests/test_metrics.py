import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperqst.linalg import DensityMatrix, SubsystemLayout, entropy, tensor
from hyperqst.metrics import (Bipartition, IntervalEstimate, bound_violations, coherent_information,
                              ensemble_interval, format_mean_std, log_negativity, reduce_to_dof, summarize)
from hyperqst.states import HyperStateSpec, build_target, frequency_ket, noisy_target, polarization_ket
from hyperqst.tomography import PosteriorEnsemble, bayesian_mean

from oracles import random_density

CUT = Bipartition((0,), (1,))


def max_entangled(d):
    psi = np.zeros(d * d)
    psi[[k * d + k for k in range(d)]] = 1 / np.sqrt(d)
    return DensityMatrix(SubsystemLayout((d, d), ("freq-idler", "freq-signal")), np.outer(psi, psi))


class TestReduce:
    def test_ideal_reductions(self):
        spec = HyperStateSpec.uniform(3)
        rho = build_target(spec).projector()
        pol = polarization_ket().amplitudes
        rho_p = reduce_to_dof(rho, "polarization")
        assert np.max(np.abs(rho_p.matrix - np.outer(pol, pol.conj()))) < 1e-15
        rho_f = reduce_to_dof(rho, "frequency")
        f = frequency_ket(spec.gamma).amplitudes
        assert np.allclose(rho_f.matrix, np.outer(f, f.conj()), atol=1e-15)
        schmidt = np.linalg.svd(f.reshape(3, 3), compute_uv=False)
        assert np.allclose(schmidt, 1 / np.sqrt(3))
        assert rho_f.layout.roles == ("freq-idler", "freq-signal")
        assert np.trace(rho_f.matrix).real == pytest.approx(1, abs=1e-10)

    def test_wrong_layout(self):
        with pytest.raises(ValueError):
            reduce_to_dof(max_entangled(2), "polarization")
        with pytest.raises(ValueError):
            reduce_to_dof(noisy_target(HyperStateSpec(), 0.9), "time")

    def test_commutes_with_mixtures(self):
        rng = np.random.default_rng(0)
        lay = SubsystemLayout.full(2)
        samples = np.stack([random_density(16, rng) for _ in range(10)])
        ens = PosteriorEnsemble(lay, samples, 1.0, 0.1)
        for dof in ("polarization", "frequency"):
            a = reduce_to_dof(bayesian_mean(ens), dof).matrix
            b = np.mean([reduce_to_dof(s, dof).matrix for s in ens.states], axis=0)
            assert np.max(np.abs(a - b)) < 1e-12


class TestEntanglement:
    def test_bell(self):
        assert log_negativity(max_entangled(2), CUT) == pytest.approx(1.0, abs=1e-9)
        assert coherent_information(max_entangled(2), CUT) == pytest.approx(1.0, abs=1e-9)

    def test_qutrit_limit(self):
        assert log_negativity(max_entangled(3), CUT) == pytest.approx(np.log2(3), abs=1e-9)
        assert coherent_information(max_entangled(3), CUT) == pytest.approx(np.log2(3), abs=1e-9)
        assert round(np.log2(3), 2) == 1.58

    def test_mixed_coherent_information(self):
        rho = DensityMatrix(max_entangled(2).layout, np.eye(4) / 4)
        assert coherent_information(rho, CUT) == pytest.approx(-1.0)
        assert log_negativity(rho, CUT) == 0.0

    def test_direction_maximized(self):
        # asymmetric state: |0><0| (x) I/2 has S_A = 0, S_B = 1, S_AB = 1
        lay = SubsystemLayout((2, 2), ("pol-idler", "pol-signal"))
        rho = DensityMatrix(lay, tensor(np.diag([1.0, 0.0]), np.eye(2) / 2))
        assert coherent_information(rho, CUT) == pytest.approx(0.0, abs=1e-12)

    def test_photon_cut_on_full_space(self):
        rho = build_target(HyperStateSpec.uniform(3)).projector()
        cut = Bipartition.photons(rho)
        assert cut == Bipartition((0, 2), (1, 3))
        assert log_negativity(rho, cut) == pytest.approx(1 + np.log2(3), abs=1e-9)

    @pytest.mark.parametrize("cut", [Bipartition((0,), (2,)), Bipartition((0,), (1, 2))])
    def test_invalid_cut(self, cut):
        with pytest.raises(ValueError):
            log_negativity(max_entangled(2), cut)
        with pytest.raises(ValueError):
            coherent_information(max_entangled(2), cut)

    def test_overlapping_cut(self):
        with pytest.raises(ValueError):
            Bipartition((0, 1), (1,))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 3), st.integers(2, 3), st.integers(0, 2 ** 32 - 1))
    def test_product_states(self, da, db, seed):
        rng = np.random.default_rng(seed)
        lay = SubsystemLayout((da, db), ("freq-idler", "freq-signal"))
        rho = DensityMatrix(lay, tensor(random_density(da, rng), random_density(db, rng)))
        assert log_negativity(rho, CUT) == pytest.approx(0.0, abs=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 3), st.integers(1, 9), st.integers(0, 2 ** 32 - 1))
    def test_hashing_bound_ordering(self, d, rank, seed):
        rng = np.random.default_rng(seed)
        lay = SubsystemLayout((d, d), ("freq-idler", "freq-signal"))
        rho = DensityMatrix(lay, random_density(d * d, rng, rank=min(rank, d * d)))
        assert log_negativity(rho, CUT) >= 0
        assert coherent_information(rho, CUT) <= log_negativity(rho, CUT) + 1e-9


class TestIntervals:
    def test_format(self):
        assert format_mean_std(0.9440, 0.0062, percent=True) == "94.4(6)%"
        assert format_mean_std(0.69, 0.03) == "0.69(3)"
        assert format_mean_std(0.936, 0.009) == "0.936(9)"
        assert format_mean_std(1.48, 0.0096) == "1.48(1)"
        assert format_mean_std(0.5, 0.0) == "0.5(0)"
        assert format_mean_std(123.0, 25.0) == "120(30)"

    def test_constant_functional(self):
        rng = np.random.default_rng(1)
        ens = PosteriorEnsemble(SubsystemLayout((2, 2), ("pol-idler", "pol-signal")),
                                np.stack([random_density(4, rng) for _ in range(5)]), 1.0, 0.1)
        est = ensemble_interval(ens, lambda s: 0.7, label="const")
        assert est.std == 0 and est.mean == pytest.approx(0.7) and est.label == "const"
        assert ensemble_interval(ens, entropy).std > 0

    def test_empty(self):
        ens = PosteriorEnsemble(SubsystemLayout((2,), ("pol-idler",)), np.zeros((0, 2, 2)), 0.0, 0.1)
        with pytest.raises(ValueError):
            ensemble_interval(ens, entropy)

    def test_negative_std(self):
        with pytest.raises(ValueError):
            IntervalEstimate(0.5, -0.1)

    def test_summary_of_ideal_ensemble(self):
        spec = HyperStateSpec()
        rho = build_target(spec).projector().matrix
        ens = PosteriorEnsemble(SubsystemLayout.full(2), np.stack([rho, rho]), 1.0, 0.1)
        out = summarize(ens, spec)
        for level in ("PF", "P", "F"):
            assert out[level]["fidelity"].mean == pytest.approx(1.0)
        assert out["P"]["log_negativity"].mean == pytest.approx(1.0)
        assert out["F"]["coherent_information"].mean == pytest.approx(1.0)
        assert bound_violations(ens) == 0
