"""DVS event stream parsing, frame accumulation, downsampling and tensor export.

Two interchange formats are supported:

* CSV: one event per line, ``t_us,x,y,polarity``, ASCII decimal, LF-terminated,
  no header.
* EVT1: 8-byte magic ``EVT1\\0\\0\\0\\0``, little-endian u16 sensor_w, u16
  sensor_h, u32 record count, then 14-byte records ``(u64 t_us, u16 x, u16 y,
  u8 polarity, u8 pad)``.

Accumulation buckets events into T count frames over fixed intervals anchored
at the first event's timestamp, with ON/OFF polarities kept as two channels.
Counts stay integer until normalization, so conservation is exact.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

DEFAULT_SENSOR = (128, 128)

EVT1_MAGIC = b"EVT1\x00\x00\x00\x00"
_EVT1_HEADER = struct.Struct("<8sHHI")
_EVT1_RECORD = struct.Struct("<QHHBB")


class EventError(ValueError):
    """Base class for event-stream input errors."""


class EventParseError(EventError):
    """Malformed record; carries the zero-based record index."""

    def __init__(self, index: int, message: str):
        super().__init__(f"record {index}: {message}")
        self.index = index


class EventValidationError(EventError):
    """Coordinate or polarity outside the sensor's valid range."""


class EventOrderError(EventError):
    """Timestamps are not non-decreasing."""


@dataclass
class EventStream:
    """Sorted DVS events with sensor geometry.

    Column arrays share one length: ``t`` (microseconds, int64), ``x``, ``y``
    (int32) and ``p`` (polarity 0/1, uint8).
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    sensor_w: int = DEFAULT_SENSOR[0]
    sensor_h: int = DEFAULT_SENSOR[1]

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def empty(cls, sensor_w: int = DEFAULT_SENSOR[0], sensor_h: int = DEFAULT_SENSOR[1]) -> "EventStream":
        return cls(
            t=np.empty(0, np.int64),
            x=np.empty(0, np.int32),
            y=np.empty(0, np.int32),
            p=np.empty(0, np.uint8),
            sensor_w=sensor_w,
            sensor_h=sensor_h,
        )


def _validate(t, x, y, p, sensor_w, sensor_h) -> None:
    if len(t) == 0:
        return
    if t.min() < 0:
        raise EventValidationError("negative timestamp")
    if np.any(np.diff(t) < 0):
        idx = int(np.argmax(np.diff(t) < 0)) + 1
        raise EventOrderError(f"timestamp decreases at record {idx}")
    if x.min() < 0 or x.max() >= sensor_w:
        raise EventValidationError(f"x coordinate outside [0, {sensor_w})")
    if y.min() < 0 or y.max() >= sensor_h:
        raise EventValidationError(f"y coordinate outside [0, {sensor_h})")
    if not np.isin(p, (0, 1)).all():
        raise EventValidationError("polarity must be 0 or 1")


def parse_events(source, fmt: str = "csv", sensor_size: tuple[int, int] = DEFAULT_SENSOR) -> EventStream:
    """Parse a path or byte string into a validated, sorted event stream.

    For CSV the sensor geometry comes from ``sensor_size``; EVT1 carries its
    own geometry in the header.
    """
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    else:
        data = bytes(source)
    if fmt == "csv":
        return _parse_csv(data, sensor_size)
    if fmt == "evt1":
        return _parse_evt1(data)
    raise ValueError(f"unknown event format {fmt!r}")


def _parse_csv(data: bytes, sensor_size) -> EventStream:
    w, h = sensor_size
    rows = []
    for i, line in enumerate(data.splitlines()):
        line = line.strip()
        if not line:
            continue
        parts = line.split(b",")
        if len(parts) != 4:
            raise EventParseError(i, f"expected 4 fields, got {len(parts)}")
        try:
            rows.append(tuple(int(v) for v in parts))
        except ValueError:
            raise EventParseError(i, f"non-integer field in {line!r}") from None
    if not rows:
        return EventStream.empty(w, h)
    arr = np.asarray(rows, dtype=np.int64)
    t = arr[:, 0]
    x = arr[:, 1].astype(np.int32)
    y = arr[:, 2].astype(np.int32)
    p = arr[:, 3]
    if p.min() < 0 or p.max() > 1:
        raise EventValidationError("polarity must be 0 or 1")
    _validate(t, x, y, p.astype(np.uint8), w, h)
    return EventStream(t=t, x=x, y=y, p=p.astype(np.uint8), sensor_w=w, sensor_h=h)


def _parse_evt1(data: bytes) -> EventStream:
    if len(data) < _EVT1_HEADER.size:
        raise EventParseError(0, "truncated EVT1 header")
    magic, w, h, count = _EVT1_HEADER.unpack_from(data, 0)
    if magic != EVT1_MAGIC:
        raise EventParseError(0, "bad EVT1 magic")
    expected = _EVT1_HEADER.size + count * _EVT1_RECORD.size
    if len(data) != expected:
        raise EventParseError(0, f"EVT1 payload is {len(data)} bytes, expected {expected}")
    if count == 0:
        return EventStream.empty(w, h)
    raw = np.frombuffer(
        data,
        dtype=np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1"), ("pad", "u1")]),
        count=count,
        offset=_EVT1_HEADER.size,
    )
    t = raw["t"].astype(np.int64)
    x = raw["x"].astype(np.int32)
    y = raw["y"].astype(np.int32)
    p = raw["p"].astype(np.uint8)
    _validate(t, x, y, p, w, h)
    return EventStream(t=t, x=x, y=y, p=p, sensor_w=w, sensor_h=h)


def serialize_events(stream: EventStream, fmt: str = "csv") -> bytes:
    if fmt == "csv":
        lines = [
            f"{int(t)},{int(x)},{int(y)},{int(p)}\n"
            for t, x, y, p in zip(stream.t, stream.x, stream.y, stream.p)
        ]
        return "".join(lines).encode("ascii")
    if fmt == "evt1":
        out = bytearray(_EVT1_HEADER.pack(EVT1_MAGIC, stream.sensor_w, stream.sensor_h, len(stream)))
        rec = np.empty(
            len(stream),
            dtype=np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1"), ("pad", "u1")]),
        )
        rec["t"] = stream.t
        rec["x"] = stream.x
        rec["y"] = stream.y
        rec["p"] = stream.p
        rec["pad"] = 0
        out += rec.tobytes()
        return bytes(out)
    raise ValueError(f"unknown event format {fmt!r}")


def write_events(path, stream: EventStream, fmt: str | None = None) -> None:
    path = Path(path)
    if fmt is None:
        fmt = "evt1" if path.suffix == ".evt1" else "csv"
    path.write_bytes(serialize_events(stream, fmt))


@dataclass
class FrameSequence:
    """``T x C x H x W`` accumulated event frames plus accumulation metadata."""

    data: np.ndarray
    dt_us: float
    source: str = ""
    label: int | None = None

    @property
    def t_len(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)


def accumulate_frames(events: EventStream, t_frames: int, window_us: int | None = None) -> FrameSequence:
    """Bucket events into ``t_frames`` count frames over fixed intervals.

    The window is anchored at the first event's timestamp; ``window_us``
    defaults to the full recording span.  An event falling exactly on the
    window's end lands in the last frame; later events are dropped.
    """
    if t_frames < 1:
        raise ValueError("frame count must be >= 1")
    frames = np.zeros((t_frames, 2, events.sensor_h, events.sensor_w), dtype=np.int64)
    if len(events) == 0:
        return FrameSequence(data=frames, dt_us=float(window_us or 0) / t_frames)
    rel = events.t - events.t[0]
    if window_us is None:
        window_us = int(max(rel[-1], t_frames))
    if window_us < t_frames:
        raise ValueError("window_us must be >= frame count")
    mask = rel <= window_us
    k = np.minimum(rel[mask] * t_frames // window_us, t_frames - 1).astype(np.int64)
    np.add.at(frames, (k, events.p[mask], events.y[mask], events.x[mask]), 1)
    return FrameSequence(data=frames, dt_us=window_us / t_frames)


def downsample(frames: FrameSequence, factor: int = 4) -> FrameSequence:
    """Non-overlapping ``factor x factor`` sum pooling; event counts are preserved."""
    t, c, h, w = frames.data.shape
    if h % factor or w % factor:
        raise ValueError(f"frame size {h}x{w} not divisible by pooling factor {factor}")
    pooled = frames.data.reshape(t, c, h // factor, factor, w // factor, factor).sum(axis=(3, 5))
    return replace(frames, data=pooled)


def normalize_frames(frames: FrameSequence) -> FrameSequence:
    """Scale so the global maximum becomes 1.0; all-zero input passes through."""
    data = frames.data.astype(np.float32)
    m = data.max() if data.size else 0.0
    if m > 0:
        data = data / m
    return replace(frames, data=data)


def preprocess(events: EventStream, t_frames: int, window_us: int | None = None, factor: int = 4) -> FrameSequence:
    """Full pipeline: accumulate, sum-pool downsample, normalize."""
    return normalize_frames(downsample(accumulate_frames(events, t_frames, window_us), factor))


def save_frames(path_base, frames: FrameSequence) -> None:
    """Write ``<base>.bin`` (little-endian f32, row-major) and a JSON sidecar."""
    base = Path(path_base)
    t, c, h, w = frames.data.shape
    base.with_suffix(".bin").write_bytes(frames.data.astype("<f4").tobytes())
    sidecar = {"T": t, "C": c, "H": h, "W": w, "dt_us": frames.dt_us, "label": frames.label}
    base.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_frames(path_base) -> FrameSequence:
    base = Path(path_base)
    meta = json.loads(base.with_suffix(".json").read_text())
    shape = (meta["T"], meta["C"], meta["H"], meta["W"])
    data = np.frombuffer(base.with_suffix(".bin").read_bytes(), dtype="<f4").reshape(shape)
    return FrameSequence(data=data.copy(), dt_us=meta["dt_us"], source=str(base), label=meta["label"])


def load_frames_dir(directory) -> tuple[np.ndarray, np.ndarray]:
    """Stack every exported frame tensor in a directory into ``(N,T,C,H,W)`` plus labels."""
    directory = Path(directory)
    bases = sorted(p.with_suffix("") for p in directory.glob("*.json"))
    if not bases:
        raise FileNotFoundError(f"no frame tensors found in {directory}")
    seqs = [load_frames(b) for b in bases]
    shapes = {s.shape for s in seqs}
    if len(shapes) > 1:
        raise ValueError(f"inconsistent frame shapes in {directory}: {sorted(shapes)}")
    data = np.stack([s.data for s in seqs]).astype(np.float32)
    labels = np.asarray([-1 if s.label is None else s.label for s in seqs], dtype=np.int64)
    return data, labels
