"""Command-line interface.

Subcommands: ``gen-synth`` (synthetic event dataset), ``prep`` (events ->
frame tensors), ``train-relu`` (desk trainer), ``infer`` (single stream ->
class), ``bench`` (throughput/accuracy sweep), ``inspect-model``.

Exit codes: 0 success, 2 configuration error, 3 data/model error, 4 runtime
numeric error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import events as ev
from . import modelio, synth
from .network import ModelSpec, build_model, default_layers, forward_sequence, predict
from .neurons import NumericError
from .trainer import (
    LabeledFrames,
    TrainConfig,
    TrainingDivergedError,
    evaluate,
    train,
    write_metrics_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ltcsrnn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic labeled event dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--samples-per-class", type=int, default=200)
    p.add_argument("--duration-us", type=int, default=500_000)
    p.add_argument("--event-rate", type=float, default=10_000.0)
    p.add_argument("--noise-rate", type=float, default=500.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--format", choices=("evt1", "csv"), default="evt1")

    p = sub.add_parser("prep", help="accumulate, downsample and normalize events into frame tensors")
    p.add_argument("--events", required=True, help="event file or dataset directory with labels.json")
    p.add_argument("--out", required=True)
    p.add_argument("--t", type=int, default=20, help="frames per sequence")
    p.add_argument("--window-us", type=int, default=None, help="accumulation window (default: full recording)")
    p.add_argument("--format", choices=("evt1", "csv"), default=None)

    p = sub.add_parser("train-relu", help="train the ReLU-converted network on prepared frames")
    p.add_argument("--data", required=True, help="directory of frame tensors from `prep`")
    p.add_argument("--out", required=True, help="output model manifest path (.json)")
    p.add_argument("--metrics", default=None, help="per-epoch metrics CSV path")
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--batch-size", type=int, default=TrainConfig.batch_size)
    p.add_argument("--seed", type=int, default=TrainConfig.rng_seed)
    p.add_argument("--split", type=float, default=TrainConfig.train_split)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--kind", choices=("ltc", "alif", "lif"), default="ltc")
    p.add_argument("--readout-tau", type=float, default=3.0)

    p = sub.add_parser("infer", help="classify one event stream")
    p.add_argument("--model", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--t", type=int, default=20)
    p.add_argument("--window-us", type=int, default=None)
    p.add_argument("--format", choices=("evt1", "csv"), default=None)
    p.add_argument("--mode", choices=("spiking", "relu"), default="spiking")

    p = sub.add_parser("bench", help="run the throughput/accuracy sweep")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="event dataset directory with labels.json")
    p.add_argument("--t", type=_int_list, default=bench_mod.DEFAULT_T_VALUES)
    p.add_argument("--batch", type=_int_list, default=bench_mod.DEFAULT_BATCH_SIZES)
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--mode", choices=("spiking", "relu"), default="spiking")
    p.add_argument("--baseline-acc", type=float, default=bench_mod.DEFAULT_BASELINE_ACCURACY)
    p.add_argument("--power-cmd", default=None)
    p.add_argument("--out", default="results.csv")
    p.add_argument("--include-prep", action="store_true")
    p.add_argument("--window-us", type=int, default=None)

    p = sub.add_parser("inspect-model", help="print architecture and tensor table")
    p.add_argument("--model", required=True)
    return parser


def _event_format(path: Path, explicit: str | None) -> str:
    if explicit:
        return explicit
    return "evt1" if path.suffix == ".evt1" else "csv"


def cmd_gen_synth(args) -> int:
    spec = synth.SynthSpec(
        num_classes=args.classes,
        samples_per_class=args.samples_per_class,
        duration_us=args.duration_us,
        event_rate=args.event_rate,
        noise_rate=args.noise_rate,
        rng_seed=args.seed,
    )
    out = synth.write_synthetic_dir(spec, args.out, fmt=args.format)
    print(f"wrote {spec.num_classes * spec.samples_per_class} event streams to {out}")
    return EXIT_OK


def cmd_prep(args) -> int:
    src = Path(args.events)
    out = Path(args.out)
    if src.is_dir():
        out.mkdir(parents=True, exist_ok=True)
        dataset = synth.load_events_dir(src, fmt=args.format)
        for i, (stream, label) in enumerate(dataset):
            frames = ev.preprocess(stream, args.t, args.window_us)
            frames.label = label
            ev.save_frames(out / f"sample_{i:05d}", frames)
        print(f"wrote {len(dataset)} frame tensors (T={args.t}) to {out}")
    else:
        stream = ev.parse_events(src, fmt=_event_format(src, args.format))
        frames = ev.preprocess(stream, args.t, args.window_us)
        out.parent.mkdir(parents=True, exist_ok=True)
        ev.save_frames(out, frames)
        print(f"wrote frame tensor (T={args.t}) to {out}.bin/.json")
    return EXIT_OK


def cmd_train_relu(args) -> int:
    data, labels = ev.load_frames_dir(args.data)
    if (labels < 0).any():
        raise ValueError("training data must carry labels")
    num_classes = int(labels.max()) + 1
    c, h, w = data.shape[2:]
    spec = ModelSpec(
        input_shape=(c, h, w),
        layers=default_layers(c * h * w, width=args.width, depth=args.depth, neuron_kind=args.kind),
        num_classes=num_classes,
        readout_tau=args.readout_tau,
    )
    model = build_model(spec, seed=args.seed)
    config = TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        rng_seed=args.seed,
        t_frames=data.shape[1],
        train_split=args.split,
    )
    dataset = LabeledFrames(data=data, labels=labels)
    trained, metrics = train(model, dataset, config)
    for row in metrics:
        print(
            "epoch {epoch}: train_loss={train_loss:.4f} train_acc={train_acc:.3f} "
            "val_loss={val_loss:.4f} val_acc={val_acc:.3f}".format(**row)
        )
    if args.metrics:
        write_metrics_csv(args.metrics, metrics)
    manifest, blob = modelio.save_model(trained, args.out)
    relu_acc = evaluate(trained, dataset, mode="relu").accuracy
    spike_acc = evaluate(trained, dataset, mode="spiking").accuracy
    print(f"saved model to {manifest} (+ {blob})")
    print(f"full-set accuracy: relu={relu_acc:.3f} spiking={spike_acc:.3f} (spiking is informational)")
    return EXIT_OK


def cmd_infer(args) -> int:
    model = modelio.load_model(args.model)
    src = Path(args.events)
    stream = ev.parse_events(src, fmt=_event_format(src, args.format))
    frames = ev.preprocess(stream, args.t, args.window_us)
    scores = forward_sequence(model, frames.data, mode=args.mode)
    print(predict(scores))
    return EXIT_OK


def cmd_bench(args) -> int:
    model = modelio.load_model(args.model)
    dataset = synth.load_events_dir(args.data)
    config = bench_mod.SweepConfig(
        batch_sizes=args.batch,
        t_values=args.t,
        warmup_batches=args.warmup,
        repeats=args.repeats,
        mode=args.mode,
        baseline_accuracy=args.baseline_acc,
        power_cmd=args.power_cmd,
        include_prep=args.include_prep,
        window_us=args.window_us,
    )
    results = bench_mod.run_sweep(model, dataset, config)
    bench_mod.write_results_csv(args.out, results)
    for r in results:
        watts = "" if r.mean_watts is None else f" mean_watts={r.mean_watts:.3f}"
        print(
            f"T={r.t_frames} batch={r.batch_size}: {r.sequences_per_sec:.1f} seq/s "
            f"acc={r.raw_accuracy:.3f} norm={r.normalized_accuracy:.3f} "
            f"processed={r.processed_sequences}{watts}"
        )
    print(f"wrote {len(results)} rows to {args.out}")
    return EXIT_OK


def cmd_inspect_model(args) -> int:
    manifest = json.loads(Path(args.model).read_text())
    errors = modelio.validate_manifest(manifest)
    spec = manifest.get("model_spec", {})
    print(f"format_version: {manifest.get('format_version')}")
    print(f"input_shape: {spec.get('input_shape')}  num_classes: {spec.get('num_classes')}  readout_tau: {spec.get('readout_tau')}")
    for i, layer in enumerate(spec.get("layers", [])):
        print(f"layer{i}: {layer['neuron_kind']} {layer['in_dim']} -> {layer['width']}")
    total = 0
    for t in manifest.get("tensors", []):
        n = int(np.prod(t["shape"]))
        total += n
        print(f"  {t['name']:24s} {str(t['shape']):18s} {t['dtype']} @ {t['byte_offset']}")
    print(f"total parameters: {total}")
    if errors:
        print("manifest violations:")
        for e in errors:
            print(f"  - {e}")
        return EXIT_DATA
    return EXIT_OK


_COMMANDS = {
    "gen-synth": cmd_gen_synth,
    "prep": cmd_prep,
    "train-relu": cmd_train_relu,
    "infer": cmd_infer,
    "bench": cmd_bench,
    "inspect-model": cmd_inspect_model,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (NumericError, TrainingDivergedError) as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ev.EventError, modelio.ModelIOError, bench_mod.BenchDataError, OSError, json.JSONDecodeError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
