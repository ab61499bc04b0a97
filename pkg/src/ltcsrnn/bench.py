"""Throughput/accuracy benchmark harness.

Reproduces the measurement protocol: GPU/CPU warm-up batches whose timings
are discarded, a cartesian sweep over sequence lengths and batch sizes, a
throughput figure of classified sequences per second, accuracy normalized
against a fixed baseline, and an optional external power sampler (any command
that prints one decimal watts value per line).
"""
from __future__ import annotations

import csv
import logging
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .events import EventStream, preprocess
from .network import Model, forward_batch
from .trainer import LabeledFrames, evaluate

log = logging.getLogger(__name__)

DEFAULT_BATCH_SIZES = (16, 32, 64, 128, 256, 512, 1024)
DEFAULT_T_VALUES = (20, 35, 50, 100)
DEFAULT_BASELINE_ACCURACY = 0.91


class BenchDataError(ValueError):
    """Dataset or model unusable for the requested measurement."""


@dataclass
class SweepConfig:
    batch_sizes: tuple[int, ...] = DEFAULT_BATCH_SIZES
    t_values: tuple[int, ...] = DEFAULT_T_VALUES
    warmup_batches: int = 3
    repeats: int = 10
    mode: str = "spiking"
    baseline_accuracy: float = DEFAULT_BASELINE_ACCURACY
    power_cmd: str | None = None
    include_prep: bool = False
    window_us: int | None = None

    def __post_init__(self):
        if any(b < 1 for b in self.batch_sizes) or any(t < 1 for t in self.t_values):
            raise ValueError("batch sizes and T values must be positive")
        if self.warmup_batches < 0 or self.repeats < 1:
            raise ValueError("warmup_batches must be >= 0 and repeats >= 1")
        if not 0.0 < self.baseline_accuracy <= 1.0:
            raise ValueError("baseline_accuracy must lie in (0,1]")
        if self.mode not in ("spiking", "relu"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class SweepResult:
    mode: str
    t_frames: int
    batch_size: int
    sequences_per_sec: float
    raw_accuracy: float
    normalized_accuracy: float
    wall_time_s: float
    mean_watts: float | None = None
    processed_sequences: int = 0     # accounting ledger, not exported to CSV


CSV_HEADER = "mode,T,batch_size,sequences_per_sec,raw_accuracy,normalized_accuracy,wall_time_s,mean_watts"


class PowerSampler:
    """Runs a subprocess that prints one watts value per line and averages them."""

    def __init__(self, command: str):
        self.command = command
        self._values: list[float] = []
        self._proc: subprocess.Popen | None = None
        self._thread: threading.Thread | None = None

    def _reader(self):
        assert self._proc is not None and self._proc.stdout is not None
        for line in self._proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                self._values.append(float(line))
            except ValueError:
                log.warning("power sampler: skipping unparseable line %r", line)

    def __enter__(self) -> "PowerSampler":
        self._proc = subprocess.Popen(
            shlex.split(self.command), stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, text=True
        )
        self._thread = threading.Thread(target=self._reader, daemon=True)
        self._thread.start()
        # Wait for the sampler to warm up so even a very short timed region
        # overlaps at least one reading; a silent sampler just times out here.
        deadline = time.monotonic() + 2.0
        while not self._values and time.monotonic() < deadline:
            time.sleep(0.005)
        return self

    def __exit__(self, *exc):
        if self._proc is not None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        if self._thread is not None:
            self._thread.join(timeout=5)

    @property
    def mean_watts(self) -> float | None:
        if not self._values:
            log.warning("power sampler produced no parseable samples; omitting mean_watts")
            return None
        return float(np.mean(self._values))


def warmup(model: Model, frames: np.ndarray, batch_size: int, warmup_batches: int, mode: str) -> None:
    """Run discarded inference batches at the measured batch size."""
    with torch.no_grad():
        for _ in range(warmup_batches):
            forward_batch(model, frames[:batch_size], mode=mode)


def measure_throughput(
    model: Model,
    frames: np.ndarray,
    batch_size: int,
    repeats: int,
    mode: str = "spiking",
    power_cmd: str | None = None,
    extra_time_s: float = 0.0,
) -> SweepResult:
    """Timed region: ``repeats`` batched forwards, cycling through the dataset.

    ``sequences_per_sec = repeats * batch_size / wall_time``; preprocessing is
    excluded unless the caller folds it in through ``extra_time_s``.
    """
    n = len(frames)
    if n < batch_size:
        raise BenchDataError(f"dataset of {n} sequences is smaller than batch size {batch_size}")
    batches = []
    pos = 0
    for _ in range(repeats):
        if pos + batch_size > n:
            pos = 0
        batches.append(torch.from_numpy(frames[pos:pos + batch_size]))
        pos += batch_size

    sampler = PowerSampler(power_cmd) if power_cmd else None
    processed = 0
    with torch.no_grad():
        if sampler:
            sampler.__enter__()
        try:
            start = time.perf_counter()
            for batch in batches:
                forward_batch(model, batch, mode=mode)
                processed += len(batch)
            wall = time.perf_counter() - start
        finally:
            if sampler:
                sampler.__exit__(None, None, None)
    wall += extra_time_s
    return SweepResult(
        mode=mode,
        t_frames=frames.shape[1],
        batch_size=batch_size,
        sequences_per_sec=processed / wall,
        raw_accuracy=float("nan"),
        normalized_accuracy=float("nan"),
        wall_time_s=wall,
        mean_watts=sampler.mean_watts if sampler else None,
        processed_sequences=processed,
    )


def prep_dataset(events: list[tuple[EventStream, int]], t_frames: int, window_us: int | None = None) -> tuple[LabeledFrames, float]:
    """Preprocess labeled event streams at one T; returns the dataset and prep seconds."""
    start = time.perf_counter()
    data = np.stack([preprocess(stream, t_frames, window_us).data for stream, _ in events]).astype(np.float32)
    labels = np.asarray([label for _, label in events], dtype=np.int64)
    return LabeledFrames(data=data, labels=labels), time.perf_counter() - start


def run_sweep(model: Model, events: list[tuple[EventStream, int]], config: SweepConfig) -> list[SweepResult]:
    """One result row per (T, batch size), ascending; accuracy computed once per T."""
    results = []
    for t_frames in sorted(config.t_values):
        dataset, prep_s = prep_dataset(events, t_frames, config.window_us)
        prep_per_seq = prep_s / max(len(dataset), 1)
        accuracy = evaluate(model, dataset, mode=config.mode).accuracy
        for batch_size in sorted(config.batch_sizes):
            warmup(model, dataset.data, batch_size, config.warmup_batches, config.mode)
            extra = prep_per_seq * config.repeats * batch_size if config.include_prep else 0.0
            row = measure_throughput(
                model,
                dataset.data,
                batch_size,
                config.repeats,
                mode=config.mode,
                power_cmd=config.power_cmd,
                extra_time_s=extra,
            )
            row.raw_accuracy = accuracy
            row.normalized_accuracy = accuracy / config.baseline_accuracy
            results.append(row)
    return results


def write_results_csv(path, results: list[SweepResult]) -> None:
    with Path(path).open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER.split(","))
        for r in results:
            writer.writerow(
                [
                    r.mode,
                    r.t_frames,
                    r.batch_size,
                    f"{r.sequences_per_sec:.6g}",
                    f"{r.raw_accuracy:.6f}",
                    f"{r.normalized_accuracy:.6f}",
                    f"{r.wall_time_s:.6g}",
                    "" if r.mean_watts is None else f"{r.mean_watts:.4f}",
                ]
            )
