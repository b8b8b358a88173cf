"""Posterior fidelity mean and spread versus count level for a depolarized qubit-grid state.

Used to pick the count level whose posterior std matches a target width, and to
measure how far the Hilbert-Schmidt prior pulls the posterior mean below the truth.

    python3 scripts/calibrate_counts.py --fidelity 0.944 --counts 100 320 1000 --reps 3
"""
import argparse
import logging

import numpy as np

from hyperqst.apparatus import protocol_qubit128
from hyperqst.born import BornMap
from hyperqst.cli import _computational
from hyperqst.config import derive_seed
from hyperqst.simulator import FluxModel, generate_dataset, pair_rate_for_counts
from hyperqst.states import HyperStateSpec, build_target, noisy_target
from hyperqst.tomography import ChainConfig, linear_inversion, run_chain, start_from_estimate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fidelity", type=float, default=0.944)
    ap.add_argument("--counts", type=float, nargs="+", default=[100, 320, 1000, 3000])
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--samples", type=int, default=256)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.ERROR)

    spec = HyperStateSpec()
    psi = build_target(spec).amplitudes
    rho = noisy_target(spec, args.fidelity)
    settings = protocol_qubit128()
    born = BornMap(settings)
    print("counts  rep  posterior_F  posterior_std  li_F")
    for counts in args.counts:
        rate = pair_rate_for_counts(rho, settings, counts, select=_computational)
        for rep in range(args.reps):
            ds = generate_dataset(rho, settings, FluxModel(pair_rate=rate), derive_seed(args.seed, int(counts), rep))
            li = linear_inversion(ds, born)
            ens = run_chain(ds, born, ChainConfig(n_samples=args.samples, seed=derive_seed(args.seed, rep)),
                            initial=start_from_estimate(li.psd))
            f = np.einsum("i,nij,j->n", psi.conj(), ens.samples, psi).real
            li_f = np.vdot(psi, li.psd @ psi).real
            print(f"{counts:6.0f}  {rep:3d}  {f.mean():11.4f}  {f.std():13.4f}  {li_f:.4f}", flush=True)


if __name__ == "__main__":
    main()
