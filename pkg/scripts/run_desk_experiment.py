#!/usr/bin/env python3
"""End-to-end desk experiment: synthesize events, train, benchmark.

Generates a synthetic moving-bar event dataset, preprocesses it into frame
tensors, trains the ReLU-converted network, then runs the throughput sweep on
the trained model and writes results.csv.  Everything goes under --workdir.
"""
import argparse
import sys
from pathlib import Path

from ltcsrnn.cli import main as cli


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", default="desk_run", help="output directory")
    ap.add_argument("--classes", type=int, default=4)
    ap.add_argument("--samples-per-class", type=int, default=200)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--t", type=int, default=20, help="frames per sequence for training")
    ap.add_argument("--epochs", type=int, default=6)
    ap.add_argument("--bench-t", default="20,35", help="comma-separated T values for the sweep")
    ap.add_argument("--bench-batch", default="1,8,64", help="comma-separated batch sizes")
    ap.add_argument("--power-cmd", default=None, help="optional watts-per-line sampler command")
    args = ap.parse_args(argv)

    work = Path(args.workdir)
    events, frames = work / "events", work / "frames"
    model, metrics, results = work / "model.json", work / "metrics.csv", work / "results.csv"

    steps = [
        ["gen-synth", "--out", str(events), "--classes", str(args.classes),
         "--samples-per-class", str(args.samples_per_class), "--seed", str(args.seed)],
        ["prep", "--events", str(events), "--out", str(frames), "--t", str(args.t)],
        ["train-relu", "--data", str(frames), "--out", str(model),
         "--metrics", str(metrics), "--epochs", str(args.epochs), "--seed", str(args.seed)],
        ["bench", "--model", str(model), "--data", str(events), "--t", args.bench_t,
         "--batch", args.bench_batch, "--out", str(results)]
        + (["--power-cmd", args.power_cmd] if args.power_cmd else []),
    ]
    for step in steps:
        print(f"\n== ltcsrnn {' '.join(step)}")
        code = cli(step)
        if code != 0:
            return code
    print(f"\ndone: model={model} metrics={metrics} results={results}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
