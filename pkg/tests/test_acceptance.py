"""Acceptance suite: each test checks one numbered criterion at its stated tolerance.

Outcomes are recorded in ``acceptance_log`` and printed as one PASS/FAIL line per
criterion at the end of the pytest run.
"""
import itertools
import json
import time
from dataclasses import dataclass

import numpy as np
import pytest

from hyperqst.apparatus import (EomSetting, MeasurementSetting, PolProjectorSetting, ShaperMask, TruncationPolicy,
                                freq_povm_element, hadamard_depth, joint_povm, protocol_qubit128, protocol_qutrit720)
from hyperqst.born import BornMap
from hyperqst.cli import _computational, run
from hyperqst.config import derive_seed
from hyperqst.linalg import DensityMatrix, SubsystemLayout, partial_trace, partial_transpose, trace_distance
from hyperqst.metrics import (Bipartition, bound_violations, coherent_information, log_negativity,
                              reduced_ensemble)
from hyperqst.simulator import FluxModel, generate_dataset, pair_rate_for_counts
from hyperqst.states import HyperStateSpec, build_target, noisy_target
from hyperqst.tomography import ChainConfig, bayesian_mean, linear_inversion, run_chain, start_from_estimate

from acceptance_log import record
from oracles import freq_povm_loops, partial_trace_loops, partial_transpose_loops, random_density

QUTRIT_SEED = 7
QUBIT_COUNTS = 1000  # mean coincidences per Z x Z setting
CALIBRATION_TRUTH = 0.944
CALIBRATION_COUNTS = 320  # per Z x Z setting; gives a posterior std near 0.006
CALIBRATION_REPS = 20
QUTRIT_COUNTS = 3000  # mean coincidences per setting over all 720 settings


@dataclass
class Run:
    ensemble: object
    li_psd: np.ndarray
    seconds: float
    fidelities: np.ndarray


def reconstruct(rho, settings, mean_counts, data_seed, chain: ChainConfig, select=None):
    t0 = time.perf_counter()
    rate = pair_rate_for_counts(rho, settings, mean_counts, select=select)
    ds = generate_dataset(rho, settings, FluxModel(pair_rate=rate), data_seed)
    born = BornMap(settings)
    li = linear_inversion(ds, born)
    ens = run_chain(ds, born, chain, initial=start_from_estimate(li.psd))
    seconds = time.perf_counter() - t0
    return ens, li, seconds


def fidelities(ens, target):
    psi = target.amplitudes
    return np.einsum("i,nij,j->n", psi.conj(), ens.samples, psi).real


@pytest.fixture(scope="module")
def qubit_run():
    spec = HyperStateSpec()
    target = build_target(spec)
    ens, li, seconds = reconstruct(target.projector(), protocol_qubit128(), QUBIT_COUNTS, derive_seed(3, 1),
                                   ChainConfig(n_samples=1024, seed=derive_seed(3, 2)), select=_computational)
    return Run(ens, li.psd, seconds, fidelities(ens, target))


@pytest.fixture(scope="module")
def calibration_runs():
    spec = HyperStateSpec()
    target = build_target(spec)
    rho = noisy_target(spec, CALIBRATION_TRUTH)
    runs = []
    for rep in range(CALIBRATION_REPS):
        ens, li, seconds = reconstruct(rho, protocol_qubit128(), CALIBRATION_COUNTS, derive_seed(4, rep, 1),
                                       ChainConfig(n_samples=256, seed=derive_seed(4, rep, 2)), select=_computational)
        runs.append(Run(ens, li.psd, seconds, fidelities(ens, target)))
    return runs


@pytest.fixture(scope="module")
def qutrit_run():
    spec = HyperStateSpec.uniform(3)
    target = build_target(spec)
    ens, li, seconds = reconstruct(target.projector(), protocol_qutrit720(QUTRIT_SEED), QUTRIT_COUNTS,
                                   derive_seed(5, 1), ChainConfig(n_samples=1024, seed=derive_seed(5, 2)))
    return Run(ens, li.psd, seconds, fidelities(ens, target))


def test_criterion_1_hadamard_depth():
    hadamard_depth.cache_clear()
    t0 = time.perf_counter()
    depth = hadamard_depth()
    seconds = time.perf_counter() - t0
    ok = abs(depth - 1.4347) <= 1e-3 and round(depth, 3) == 1.435 and seconds < 1.0
    assert record(1, ok, f"depth {depth:.6f} rad in {seconds * 1e3:.1f} ms")


def test_criterion_2_analytic_values():
    values = {}
    for d in (2, 3):
        psi = np.zeros(d * d)
        psi[[k * d + k for k in range(d)]] = 1 / np.sqrt(d)
        rho = DensityMatrix(SubsystemLayout((d, d), ("freq-idler", "freq-signal")), np.outer(psi, psi))
        cut = Bipartition((0,), (1,))
        values[d] = (log_negativity(rho, cut), coherent_information(rho, cut))
    ok = all(abs(v - 1.0) <= 1e-9 for v in values[2]) and all(abs(v - np.log2(3)) <= 1e-9 for v in values[3])
    ok = ok and round(np.log2(3), 2) == 1.58
    assert record(2, ok, "Bell E_N, I_C = {:.12f}, {:.12f}; qutrit E_N, I_C = {:.12f}, {:.12f}".format(
        *values[2], *values[3]))


def test_criterion_3_qubit_recovery(qubit_run):
    f = qubit_run.fidelities.mean()
    ok = len(qubit_run.ensemble) == 1024 and f >= 0.98 and qubit_run.seconds <= 300
    assert record(3, ok, f"F_PF = {f:.4f} (std {qubit_run.fidelities.std():.4f}), 1024 samples, "
                         f"{qubit_run.seconds:.0f} s")


def test_criterion_4_calibration(calibration_runs):
    means = np.array([r.fidelities.mean() for r in calibration_runs])
    stds = np.array([r.fidelities.std() for r in calibration_runs])
    inside = np.abs(means - CALIBRATION_TRUTH) <= 0.02
    regime = 0.004 <= stds.mean() <= 0.008
    ok = regime and inside.mean() >= 0.9
    assert record(4, ok, f"{inside.sum()}/{len(means)} within +-0.02; mean posterior F {means.mean():.4f}, "
                         f"mean posterior std {stds.mean():.4f}")


def test_criterion_5_qutrit_recovery(qutrit_run):
    f = qutrit_run.fidelities.mean()
    freq = reduced_ensemble(qutrit_run.ensemble, "frequency")
    mean_f = bayesian_mean(freq)
    en_samples = np.mean([log_negativity(s, Bipartition((0,), (1,))) for s in freq.states])
    ok = f >= 0.95 and en_samples >= 1.45 and qutrit_run.seconds <= 1200
    assert record(5, ok, f"F_PF = {f:.4f}, E_N(F) = {en_samples:.3f} ebits "
                         f"(of the mean state {log_negativity(mean_f, Bipartition((0,), (1,))):.3f}), "
                         f"{qutrit_run.seconds:.0f} s")


def test_criterion_6_bound_ordering(qubit_run, calibration_runs, qutrit_run):
    ensembles = [qubit_run.ensemble, qutrit_run.ensemble] + [r.ensemble for r in calibration_runs]
    violations = sum(bound_violations(e, tol=1e-9) for e in ensembles)
    checked = sum(3 * len(e) for e in ensembles)
    assert record(6, violations == 0, f"{violations} violations over {checked} (sample, cut) pairs")


def test_criterion_7_oracles():
    rng = np.random.default_rng(7)
    worst = 0.0
    for dims in [(2, 2), (2, 3), (3, 3), (2, 2, 3), (2, 2, 2, 2), (2, 2, 3, 3)]:
        roles = ("pol-idler", "pol-signal", "freq-idler", "freq-signal")[:len(dims)]
        lay = SubsystemLayout(dims, roles)
        m = random_density(lay.dim, rng)
        rho = DensityMatrix(lay, m)
        for r in range(1, len(dims)):
            for subset in itertools.combinations(range(len(dims)), r):
                pt = partial_trace(rho, subset).matrix
                worst = max(worst, np.max(np.abs(pt - partial_trace_loops(m, dims, list(subset)))))
                tr = partial_transpose(rho, subset)
                worst = max(worst, np.max(np.abs(tr - partial_transpose_loops(m, dims, list(subset)))))
    for _ in range(40):
        d = int(rng.integers(2, 4))
        phases = rng.uniform(0, 2 * np.pi, 2 * d)
        depth = rng.uniform(0, 2.3, 2)
        rf = rng.uniform(0, 2 * np.pi, 2)
        out = tuple(int(b) for b in rng.integers(0, d, 2))
        s = MeasurementSetting(PolProjectorSetting("H", "H"), ShaperMask(tuple(phases[:d]), tuple(phases[d:])),
                               EomSetting(depth[0], rf[0]), EomSetting(depth[1], rf[1]), out)
        ref = freq_povm_loops(phases[:d], phases[d:], (depth[0], rf[0]), (depth[1], rf[1]), out)
        worst = max(worst, np.max(np.abs(freq_povm_element(s) - ref)))
    assert record(7, worst <= 1e-10, f"max deviation {worst:.2e}")


def test_criterion_8_povm_sanity():
    base, refined = TruncationPolicy(), TruncationPolicy(guard_bins=TruncationPolicy().guard_bins + 5)
    min_eig, max_eig, drift, n = np.inf, -np.inf, 0.0, 0
    for settings in (protocol_qubit128(), protocol_qutrit720(QUTRIT_SEED)):
        for s in settings:
            e = joint_povm(s, base)
            w = np.linalg.eigvalsh(e)
            min_eig, max_eig = min(min_eig, w[0]), max(max_eig, w[-1])
            drift = max(drift, np.max(np.abs(joint_povm(s, refined) - e)))
            n += 1
    ok = min_eig >= -1e-12 and max_eig <= 1 + 1e-9 and drift <= 1e-8
    assert record(8, ok, f"{n} settings, eigenvalues in [{min_eig:.1e}, {max_eig:.6f}], "
                         f"guard-bin drift {drift:.1e}")


def test_criterion_9_baseline():
    target = build_target(HyperStateSpec())
    ens, li, _ = reconstruct(target.projector(), protocol_qubit128(), 1e4, derive_seed(9, 1),
                             ChainConfig(n_samples=1024, seed=derive_seed(9, 2)), select=_computational)
    dist = trace_distance(li.psd, bayesian_mean(ens).matrix)
    assert record(9, dist <= 0.05, f"trace distance {dist:.4f}")


def test_criterion_10_determinism(tmp_path):
    cfg = tmp_path / "light.json"
    cfg.write_text(json.dumps({"seed": 2024, "chain": {"n_samples": 32, "burn_in": 200, "thinning": 5}}))
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = run(["replicate-paper", "--config", str(cfg), "--out", str(out), "--quiet"])
        assert code in (0, 2)
        outputs.append(((out / "replicate.json").read_bytes(), (out / "replicate.md").read_bytes()))
    ok = outputs[0] == outputs[1]
    assert record(10, ok, f"two runs {'byte-identical' if ok else 'differ'} "
                          f"({len(outputs[0][0])} byte report)")
