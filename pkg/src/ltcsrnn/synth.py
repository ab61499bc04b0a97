"""Synthetic DVS gesture generator for desk-scale experiments.

Each class is a bright bar sweeping across a 128x128 field; class ``k`` moves
in direction ``k * 360 / num_classes`` degrees.  Events are sampled along the
bar as it travels, ON polarity on the leading edge and OFF on the trailing
edge, plus optional uniform background noise.  Generation is deterministic
given the seed.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .events import EventStream, write_events

FIELD = 128
# Bar geometry, shared with the envelope check in tests.
BAR_LENGTH = 48.0        # extent perpendicular to the motion direction
EDGE_OFFSET = 2.0        # leading/trailing edge distance from the bar center
TRAVEL = 45.0            # half-span of the sweep around the field center


@dataclass
class SynthSpec:
    num_classes: int = 4
    samples_per_class: int = 200
    duration_us: int = 500_000
    event_rate: float = 10_000.0     # signal events per second
    noise_rate: float = 500.0        # background events per second
    rng_seed: int = 42

    def __post_init__(self):
        if self.num_classes < 2 or self.samples_per_class < 1:
            raise ValueError("num_classes and samples_per_class must be positive")
        if self.duration_us <= 0 or self.event_rate <= 0 or self.noise_rate < 0:
            raise ValueError("duration and rates must be positive")


def bar_center(direction: np.ndarray, frac) -> np.ndarray:
    """Bar center position at sweep fraction ``frac`` in [0, 1]."""
    mid = (FIELD - 1) / 2.0
    return mid + np.outer(np.atleast_1d(frac) * 2.0 - 1.0, direction) * TRAVEL


def _sample_stream(rng: np.random.Generator, spec: SynthSpec, class_idx: int) -> EventStream:
    angle = 2.0 * math.pi * class_idx / spec.num_classes
    direction = np.array([math.cos(angle), math.sin(angle)])
    perp = np.array([-direction[1], direction[0]])

    n_sig = int(round(spec.event_rate * spec.duration_us / 1e6))
    t_sig = np.sort(rng.integers(0, spec.duration_us + 1, size=n_sig))
    centers = bar_center(direction, t_sig / spec.duration_us)
    leading = rng.integers(0, 2, size=n_sig)                       # 1 -> ON edge
    edge = np.where(leading[:, None] == 1, EDGE_OFFSET, -EDGE_OFFSET) * direction
    along = rng.uniform(-BAR_LENGTH / 2.0, BAR_LENGTH / 2.0, size=n_sig)
    pos = centers + edge + along[:, None] * perp
    xy = np.clip(np.rint(pos), 0, FIELD - 1).astype(np.int32)
    p_sig = leading.astype(np.uint8)

    n_noise = int(round(spec.noise_rate * spec.duration_us / 1e6))
    t_noise = rng.integers(0, spec.duration_us + 1, size=n_noise)
    x_noise = rng.integers(0, FIELD, size=n_noise).astype(np.int32)
    y_noise = rng.integers(0, FIELD, size=n_noise).astype(np.int32)
    p_noise = rng.integers(0, 2, size=n_noise).astype(np.uint8)

    t = np.concatenate([t_sig, t_noise]).astype(np.int64)
    x = np.concatenate([xy[:, 0], x_noise])
    y = np.concatenate([xy[:, 1], y_noise])
    p = np.concatenate([p_sig, p_noise])
    order = np.argsort(t, kind="stable")
    return EventStream(t=t[order], x=x[order], y=y[order], p=p[order], sensor_w=FIELD, sensor_h=FIELD)


def generate_synthetic(spec: SynthSpec) -> list[tuple[EventStream, int]]:
    """Labeled event streams, ``samples_per_class`` per class, class-major order."""
    rng = np.random.default_rng(spec.rng_seed)
    out = []
    for k in range(spec.num_classes):
        for _ in range(spec.samples_per_class):
            out.append((_sample_stream(rng, spec, k), k))
    return out


def write_synthetic_dir(spec: SynthSpec, out_dir, fmt: str = "evt1") -> Path:
    """Materialize the dataset as one event file per sample plus labels.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = {}
    for i, (stream, label) in enumerate(generate_synthetic(spec)):
        name = f"sample_{i:05d}.{fmt}"
        write_events(out_dir / name, stream, fmt)
        labels[name] = label
    (out_dir / "labels.json").write_text(json.dumps(labels, indent=2) + "\n")
    return out_dir


def load_events_dir(directory, fmt: str | None = None) -> list[tuple[EventStream, int]]:
    """Load an event dataset directory written by :func:`write_synthetic_dir`."""
    from .events import parse_events

    directory = Path(directory)
    labels = json.loads((directory / "labels.json").read_text())
    out = []
    for name in sorted(labels):
        f = fmt or ("evt1" if name.endswith(".evt1") else "csv")
        out.append((parse_events(directory / name, fmt=f), int(labels[name])))
    return out
