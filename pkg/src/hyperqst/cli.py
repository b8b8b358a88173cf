"""Command-line pipeline: protocol -> simulate -> reconstruct -> metrics, plus a replication harness."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import io
from .apparatus import ConfigurationError, protocol_qubit128, protocol_qutrit720, protocol_random
from .born import BornMap
from .config import SCHEMA_VERSION, ExperimentConfig, ProtocolSection, StateSection, derive_seed
from .linalg import trace_distance
from .metrics import format_mean_std, reduce_to_dof, summarize
from .simulator import Dataset, generate_dataset, pair_rate_for_counts
from .states import noisy_target
from .tomography import (DiagnosticError, PosteriorEnsemble, bayesian_mean, linear_inversion,
                         run_chain, start_from_estimate)

log = logging.getLogger("hyperqst")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2

# seed stream indices under the master seed
SEED_DATA, SEED_CHAIN = 1, 2


class CheckFailure(RuntimeError):
    """A replication check missed its tolerance."""


# ---------------------------------------------------------------- pipeline steps

def build_protocol(cfg: ExperimentConfig):
    p = cfg.protocol
    if p.kind == "qubit128":
        return protocol_qubit128()
    if p.kind == "qutrit720":
        return protocol_qutrit720(p.seed)
    if p.kind == "random":
        return protocol_random(cfg.state.d, p.seed, n_frames=p.n_frames)
    settings = io.load_protocol(p.path)
    if settings[0].d != cfg.state.d:
        raise ValueError(f"protocol file has d = {settings[0].d} but state.d = {cfg.state.d}")
    return settings


def protocol_id(cfg: ExperimentConfig) -> str:
    p = cfg.protocol
    return p.kind if p.kind == "qubit128" else f"{p.kind}-seed{p.seed}" if p.kind != "file" else f"file:{p.path}"


def cmd_protocol(cfg: ExperimentConfig, out: Path) -> list:
    cfg.validate()
    settings = build_protocol(cfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(io.dumps_protocol(settings))
    return settings


def cmd_simulate(cfg: ExperimentConfig, out: Path, mean_counts: float | None = None) -> Dataset:
    cfg.validate()
    settings = build_protocol(cfg)
    rho = noisy_target(cfg.state.spec(), cfg.state.fidelity)
    flux = cfg.flux
    if mean_counts is not None:
        rate = pair_rate_for_counts(rho, settings, mean_counts, flux.integration_time, count_reference(settings))
        flux = replace(flux, pair_rate=rate)
    ds = generate_dataset(rho, settings, flux, derive_seed(cfg.seed, SEED_DATA), protocol_id(cfg),
                          cfg.truncation, {"master_seed": cfg.seed, "fidelity": cfg.state.fidelity})
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(io.dumps_dataset(ds))
    return ds


def _computational(setting) -> bool:
    """Settings without EOM mixing (the Z x Z frequency readout)."""
    return setting.idler_eom.depth == 0 and setting.signal_eom.depth == 0


def count_reference(settings):
    """Settings that ``mean_counts`` refers to: Z x Z ones when present, else all of them."""
    return _computational if any(_computational(s) for s in settings) else None


def reconstruct(cfg: ExperimentConfig, ds: Dataset) -> tuple[PosteriorEnsemble, dict]:
    """Run the chain on a dataset and assemble the report dictionary."""
    settings = build_protocol(cfg)
    if ds.d != cfg.state.d:
        raise ValueError(f"dataset has d = {ds.d} but config state.d = {cfg.state.d}")
    ds.check_against(settings)
    chain_cfg = replace(cfg.chain, seed=derive_seed(cfg.seed, SEED_CHAIN))
    born = BornMap(settings, cfg.truncation)
    li = linear_inversion(ds, born)
    start = start_from_estimate(li.psd) if chain_cfg.init == "estimate" else None
    ens = run_chain(ds, born, chain_cfg, initial=start)
    mean = bayesian_mean(ens)
    spec = cfg.state.spec()
    summary = summarize(ens, spec)
    d = cfg.state.d
    levels = {"PF": mean, "P": reduce_to_dof(mean, "polarization"), "F": reduce_to_dof(mean, "frequency")}
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "data": {"protocol_id": ds.protocol_id, "n_records": len(ds.records),
                 "total_counts": int(ds.counts.sum()), "metadata": ds.metadata},
        "chain": {"n_samples": len(ens), "seed": chain_cfg.seed, "acceptance_rate": ens.acceptance_rate,
                  "step_beta": ens.step_beta},
        "baseline": {"linear_inversion_complete": li.complete, "rank": li.rank, "n_params": li.n_params,
                     "trace_distance_to_bayesian_mean": trace_distance(li.psd, mean.matrix)},
        "levels": {
            name: {"matrix": io.matrix_block(m.matrix, m.layout),
                   **{k: v.to_dict() for k, v in summary[name].items()}}
            for name, m in levels.items()
        },
        "ebit_ceiling": {"P": 1.0, "F": math.log2(d)},
        "lines": report_lines(summary, d),
    }
    return ens, report


def report_lines(summary: dict, d: int) -> list[str]:
    lines = []
    for name in ("PF", "P", "F"):
        fid = summary[name]["fidelity"]
        lines.append(f"F_{name} = {fid.format(percent=True)}")
    for name, ceiling in (("P", 1.0), ("F", math.log2(d))):
        ic, en = summary[name]["coherent_information"], summary[name]["log_negativity"]
        lines.append(f"[I_C, E_N]({name}) = [{ic.format()}, {en.format()}] ebits (ceiling {ceiling:.2f})")
    return lines


def write_reconstruction(out_dir: Path, ens: PosteriorEnsemble, report: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(io.dumps_json(report))
    for name, level in report["levels"].items():
        m = io.matrix_from_block(level["matrix"])
        layout = ens.layout if name == "PF" else ens.layout.sub((0, 1) if name == "P" else (2, 3))
        (out_dir / f"rho_{name}.csv").write_text(io.plot_table(m, layout))
    io.save_ensemble(out_dir / "ensemble.npz", ens, {"lines": report["lines"]})
    (out_dir / "acceptance.csv").write_text(io.acceptance_table(ens))


def cmd_metrics(cfg: ExperimentConfig, ensemble_path: Path) -> dict:
    ens, _ = io.load_ensemble(ensemble_path)
    if ens.layout.dims != (2, 2, cfg.state.d, cfg.state.d):
        raise ValueError(f"ensemble layout {ens.layout.dims} does not match state.d = {cfg.state.d}")
    summary = summarize(ens, cfg.state.spec())
    return {"schema_version": SCHEMA_VERSION, "n_samples": len(ens),
            "levels": {k: {m: v.to_dict() for m, v in lv.items()} for k, lv in summary.items()},
            "lines": report_lines(summary, cfg.state.d)}


# ---------------------------------------------------------------- replication harness

@dataclass(frozen=True)
class ReferenceRun:
    name: str
    d: int
    fidelity: float  # ground truth for the synthetic state
    reported: dict  # values quoted by the original measurement, as strings
    mean_counts: float  # expected coincidences per setting, see count_reference


REFERENCE_RUNS = (
    ReferenceRun("qubit-ch1", 2, 0.944, {"F_PF": "94.4(6)", "IE_P": "[0.69(3), 0.936(9)]",
                                            "IE_F": "[0.76(2), 0.954(5)]"}, 10_000),
    ReferenceRun("qubit-ch2", 2, 0.933, {"F_PF": "93.3(7)", "F_P": "94.5(6)", "F_F": "95.9(4)"}, 10_000),
    ReferenceRun("qubit-ch3", 2, 0.933, {"F_PF": "93.3(7)", "F_P": "94.5(6)", "F_F": "96.1(4)"}, 10_000),
    ReferenceRun("qubit-ch4", 2, 0.937, {"F_PF": "93.7(8)", "F_P": "94.8(7)", "F_F": "96.7(3)"}, 10_000),
    ReferenceRun("qubit-ch5", 2, 0.913, {"F_PF": "91.3(9)", "F_P": "93.1(8)", "F_F": "94.8(5)"}, 10_000),
    ReferenceRun("qutrit", 3, 0.908, {"F_PF": "90.8(7)", "IE_P": "[0.62(1), 0.915(3)]",
                                         "IE_F": "[1.04(4), 1.48(1)]"}, 10_000),
)
REPLICATION_TOLERANCE = 0.02


def experiment_config(exp: ReferenceRun, base: ExperimentConfig, index: int) -> ExperimentConfig:
    kind = "qubit128" if exp.d == 2 else "qutrit720"
    return replace(base, state=StateSection(d=exp.d, fidelity=exp.fidelity), grid=replace(base.grid, d=exp.d),
                   protocol=ProtocolSection(kind=kind, seed=base.protocol.seed),
                   seed=derive_seed(base.seed, 100 + index))


def run_experiment(args: tuple[ReferenceRun, ExperimentConfig, int]) -> dict:
    exp, base, index = args
    cfg = experiment_config(exp, base, index)
    cfg.validate()
    settings = build_protocol(cfg)
    rho = noisy_target(cfg.state.spec(), exp.fidelity)
    rate = pair_rate_for_counts(rho, settings, exp.mean_counts, cfg.flux.integration_time,
                                count_reference(settings))
    flux = replace(cfg.flux, pair_rate=rate)
    ds = generate_dataset(rho, settings, flux, derive_seed(cfg.seed, SEED_DATA), protocol_id(cfg), cfg.truncation)
    _, report = reconstruct(cfg, ds)
    fid = report["levels"]["PF"]["fidelity"]
    delta = fid["mean"] - exp.fidelity
    z = delta / fid["std"] if fid["std"] > 0 else math.inf
    return {
        "name": exp.name, "d": exp.d, "truth": exp.fidelity, "mean_counts": exp.mean_counts,
        "total_counts": report["data"]["total_counts"],
        "posterior": {lv: {k: report["levels"][lv][k] for k in ("fidelity", "coherent_information", "log_negativity")}
                      for lv in ("PF", "P", "F")},
        "reported": exp.reported, "delta": delta, "z": z,
        "pass_tolerance": abs(delta) <= REPLICATION_TOLERANCE,
        "within_2sigma": abs(z) <= 2.0,
        "acceptance_rate": report["chain"]["acceptance_rate"],
    }


def cmd_replicate_paper(base: ExperimentConfig, jobs: int = 1) -> dict:
    tasks = [(exp, base, i) for i, exp in enumerate(REFERENCE_RUNS)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_experiment, tasks))
    else:
        rows = [run_experiment(t) for t in tasks]
    return {"schema_version": SCHEMA_VERSION, "master_seed": base.seed, "tolerance": REPLICATION_TOLERANCE,
            "chain": {k: v for k, v in asdict(base.chain).items() if k != "seed"},
            "rows": rows, "failed": [r["name"] for r in rows if not r["pass_tolerance"]]}


def replication_table(summary: dict) -> str:
    head = "| experiment | truth F_PF | posterior F_PF | reported F_PF | delta | z | pass | F_P | F_F | [I_C, E_N] P | [I_C, E_N] F |"
    lines = [head, "|" + "---|" * (head.count("|") - 1)]
    for r in summary["rows"]:
        post = r["posterior"]

        def fmt(lv, key, pct=False):
            return format_mean_std(post[lv][key]["mean"], post[lv][key]["std"], pct)

        lines.append(
            f"| {r['name']} | {100 * r['truth']:.1f}% | {fmt('PF', 'fidelity', True)} | {r['reported']['F_PF']}% "
            f"| {r['delta']:+.4f} | {r['z']:+.1f} | {'yes' if r['pass_tolerance'] else 'NO'} "
            f"| {fmt('P', 'fidelity', True)} | {fmt('F', 'fidelity', True)} "
            f"| [{fmt('P', 'coherent_information')}, {fmt('P', 'log_negativity')}] "
            f"| [{fmt('F', 'coherent_information')}, {fmt('F', 'log_negativity')}] |")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- argument handling

def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.samples is not None:
        cfg = replace(cfg, chain=replace(cfg.chain, n_samples=args.samples))
    if getattr(args, "protocol", None):
        cfg = replace(cfg, protocol=replace(cfg.protocol, kind=args.protocol))
    if getattr(args, "d", None):
        cfg = replace(cfg, state=replace(cfg.state, d=args.d), grid=replace(cfg.grid, d=args.d))
    return cfg


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", type=Path, help="output file or directory")
    common.add_argument("--samples", type=int, default=None, help="posterior samples to keep (default 1024)")
    common.add_argument("--quiet", action="store_true", help="only print errors")

    parser = argparse.ArgumentParser(prog="hyperqst", description="Hyperentangled photon-pair tomography toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("protocol", parents=[common], help="write a measurement protocol")
    p.add_argument("--protocol", choices=["qubit128", "qutrit720", "random"], help="override protocol.kind")
    p.add_argument("--d", type=int, help="override the frequency dimension")
    s = sub.add_parser("simulate", parents=[common], help="simulate coincidence counts")
    s.add_argument("--protocol", choices=["qubit128", "qutrit720", "random"], help="override protocol.kind")
    s.add_argument("--d", type=int, help="override the frequency dimension")
    s.add_argument("--mean-counts", type=float, help="set the flux for this mean count per Z x Z setting (per setting if none)")
    r = sub.add_parser("reconstruct", parents=[common], help="Bayesian reconstruction of a dataset")
    r.add_argument("--data", type=Path, required=True, help="dataset file from 'simulate'")
    m = sub.add_parser("metrics", parents=[common], help="entanglement metrics for a saved ensemble")
    m.add_argument("--ensemble", type=Path, required=True, help="ensemble.npz from 'reconstruct'")
    rp = sub.add_parser("replicate-paper", parents=[common], help="synthetic replication of the published runs")
    rp.add_argument("--jobs", type=int, default=1, help="experiments to run in parallel")
    return parser


def _emit(text: str, quiet: bool) -> None:
    if not quiet:
        print(text)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    started = time.perf_counter()
    try:
        cfg = _load_config(args)
        cfg.validate()
        out_dir = Path(cfg.out_dir)
        if args.command == "protocol":
            out = args.out or out_dir / "protocol.json"
            settings = cmd_protocol(cfg, out)
            _emit(f"{len(settings)} settings written to {out}", args.quiet)
        elif args.command == "simulate":
            out = args.out or out_dir / "data.csv"
            ds = cmd_simulate(cfg, out, args.mean_counts)
            _emit(f"{len(ds.records)} records ({int(ds.counts.sum())} counts) written to {out}", args.quiet)
        elif args.command == "reconstruct":
            if not args.data.is_file():
                raise ValueError(f"dataset {args.data} does not exist")
            ds = io.load_dataset(args.data)
            out = args.out or out_dir
            ens, report = reconstruct(cfg, ds)
            write_reconstruction(out, ens, report)
            for line in report["lines"]:
                _emit(line, args.quiet)
        elif args.command == "metrics":
            if not args.ensemble.is_file():
                raise ValueError(f"ensemble {args.ensemble} does not exist")
            result = cmd_metrics(cfg, args.ensemble)
            if args.out:
                args.out.parent.mkdir(parents=True, exist_ok=True)
                args.out.write_text(io.dumps_json(result))
            for line in result["lines"]:
                _emit(line, args.quiet)
        elif args.command == "replicate-paper":
            if args.jobs < 1:
                raise ValueError("--jobs must be >= 1")
            summary = cmd_replicate_paper(cfg, args.jobs)
            out = args.out or out_dir / "replicate"
            out.mkdir(parents=True, exist_ok=True)
            (out / "replicate.json").write_text(io.dumps_json(summary))
            table = replication_table(summary)
            (out / "replicate.md").write_text(table)
            _emit(table, args.quiet)
            if summary["failed"]:
                raise CheckFailure(f"replication outside +-{REPLICATION_TOLERANCE}: {', '.join(summary['failed'])}")
    except (ValueError, ConfigurationError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DiagnosticError, CheckFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    log.info("wall time %.1f s", time.perf_counter() - started)
    return EXIT_OK


def main() -> None:
    sys.exit(run())
