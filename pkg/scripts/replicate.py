"""Run the reference-experiment replication and print the comparison table.

    python3 scripts/replicate.py --samples 256 --jobs 1 --out out/replicate
"""
import argparse
import logging
from dataclasses import replace
from pathlib import Path

from hyperqst import io
from hyperqst.cli import cmd_replicate_paper, replication_table
from hyperqst.config import ExperimentConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path)
    ap.add_argument("--samples", type=int)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("out/replicate"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.samples:
        cfg = replace(cfg, chain=replace(cfg.chain, n_samples=args.samples))
    summary = cmd_replicate_paper(cfg, args.jobs)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "replicate.json").write_text(io.dumps_json(summary))
    table = replication_table(summary)
    (args.out / "replicate.md").write_text(table)
    print(table)
    if summary["failed"]:
        print("outside tolerance:", ", ".join(summary["failed"]))


if __name__ == "__main__":
    main()
