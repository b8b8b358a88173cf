"""Block averages of fidelity and frequency-DoF E_N along one long chain.

A drifting block mean means the default chain length has not reached equilibrium
for that dimension and count level.

    python3 scripts/chain_convergence.py --d 3 --counts 3000 --blocks 8 --thinning 2000
"""
import argparse
import logging
import time

import numpy as np

from hyperqst.apparatus import protocol_qubit128, protocol_qutrit720
from hyperqst.born import BornMap
from hyperqst.cli import count_reference
from hyperqst.metrics import Bipartition, log_negativity, reduce_to_dof
from hyperqst.simulator import FluxModel, generate_dataset, pair_rate_for_counts
from hyperqst.states import HyperStateSpec, build_target, noisy_target
from hyperqst.tomography import ChainConfig, linear_inversion, run_chain, start_from_estimate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, choices=(2, 3), default=3)
    ap.add_argument("--fidelity", type=float, default=1.0)
    ap.add_argument("--counts", type=float, default=3000)
    ap.add_argument("--samples", type=int, default=320)
    ap.add_argument("--thinning", type=int, default=2000)
    ap.add_argument("--blocks", type=int, default=8)
    ap.add_argument("--protocol-seed", type=int, default=7)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.ERROR)

    spec = HyperStateSpec.uniform(args.d)
    psi = build_target(spec).amplitudes
    rho = noisy_target(spec, args.fidelity)
    settings = protocol_qubit128() if args.d == 2 else protocol_qutrit720(args.protocol_seed)
    rate = pair_rate_for_counts(rho, settings, args.counts, select=count_reference(settings))
    ds = generate_dataset(rho, settings, FluxModel(pair_rate=rate), args.seed + 100)
    born = BornMap(settings)
    start = start_from_estimate(linear_inversion(ds, born).psd)
    t0 = time.perf_counter()
    ens = run_chain(ds, born, ChainConfig(n_samples=args.samples, thinning=args.thinning, seed=args.seed),
                    initial=start)
    f = np.einsum("i,nij,j->n", psi.conj(), ens.samples, psi).real
    cut = Bipartition((0,), (1,))
    en = np.array([log_negativity(reduce_to_dof(s, "frequency"), cut) for s in ens.states])
    n = len(f) // args.blocks * args.blocks
    print(f"{time.perf_counter() - t0:.0f} s, pCN acceptance {ens.acceptance_rate:.3f}")
    print("block  F_PF    E_N(F)")
    for i, (fb, eb) in enumerate(zip(f[:n].reshape(args.blocks, -1), en[:n].reshape(args.blocks, -1))):
        print(f"{i:5d}  {fb.mean():.4f}  {eb.mean():.3f}")


if __name__ == "__main__":
    main()
