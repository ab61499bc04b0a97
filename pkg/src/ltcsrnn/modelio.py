"""Bit-exact model persistence: a JSON manifest plus a raw float32 blob.

The manifest records the format version, the model architecture, a tensor
table (name, shape, dtype, byte range) and a CRC-32 of the blob.  Tensors are
stored little-endian, row-major, back to back, under canonical names
``layer{i}.{w_in|w_rec|b_in|w_tau_m|w_tau_adp|b_tau_m|b_tau_adp}`` and
``readout.{w_out|b_out}``.  Saving is deterministic; loading verifies the
checksum before exposing any tensor.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from .network import LayerSpec, LayerWeights, Model, ModelSpec
from .neurons import AlifParams, LifParams, LtcTauWeights

FORMAT_VERSION = 1


class ModelIOError(Exception):
    """Base class for model load/save failures."""


class VersionError(ModelIOError):
    pass


class ChecksumError(ModelIOError):
    pass


class ShapeMismatchError(ModelIOError):
    pass


class UnknownTensorError(ModelIOError):
    pass


class ManifestError(ModelIOError):
    """Structurally invalid manifest; carries the full violation list."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


def _spec_to_json(spec: ModelSpec, layers: list[LayerWeights]) -> dict:
    out_layers = []
    for ls, lw in zip(spec.layers, layers):
        params: dict = {}
        if lw.lif is not None:
            params = asdict(lw.lif)
        elif lw.alif is not None:
            params = asdict(lw.alif)
        out_layers.append({"in_dim": ls.in_dim, "width": ls.width, "neuron_kind": ls.neuron_kind, "params": params})
    return {
        "input_shape": list(spec.input_shape),
        "num_classes": spec.num_classes,
        "readout_tau": spec.readout_tau,
        "layers": out_layers,
    }


def _spec_from_json(js: dict) -> ModelSpec:
    layers = [LayerSpec(l["in_dim"], l["width"], l["neuron_kind"]) for l in js["layers"]]
    return ModelSpec(
        input_shape=tuple(js["input_shape"]),
        layers=layers,
        num_classes=js["num_classes"],
        readout_tau=js["readout_tau"],
    )


def expected_tensor_names(spec: ModelSpec) -> list[str]:
    names = []
    for i, ls in enumerate(spec.layers):
        names += [f"layer{i}.w_in", f"layer{i}.w_rec", f"layer{i}.b_in"]
        if ls.neuron_kind == "ltc":
            names += [f"layer{i}.w_tau_m", f"layer{i}.w_tau_adp", f"layer{i}.b_tau_m", f"layer{i}.b_tau_adp"]
    names += ["readout.w_out", "readout.b_out"]
    return names


def save_model(model: Model, manifest_path, blob_path=None) -> tuple[Path, Path]:
    """Write the manifest and blob; byte output is deterministic per model."""
    manifest_path = Path(manifest_path)
    blob_path = Path(blob_path) if blob_path else manifest_path.with_suffix(".bin")
    params = model.parameters()
    blob = bytearray()
    tensors = []
    for name in expected_tensor_names(model.spec):
        arr = params[name].detach().cpu().numpy().astype("<f4")
        raw = arr.tobytes()
        tensors.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "dtype": "f32",
                "byte_offset": len(blob),
                "byte_length": len(raw),
            }
        )
        blob += raw
    manifest = {
        "format_version": FORMAT_VERSION,
        "model_spec": _spec_to_json(model.spec, model.layers),
        "tensors": tensors,
        "checksum": zlib.crc32(bytes(blob)),
        "blob": blob_path.name,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    blob_path.write_bytes(bytes(blob))
    return manifest_path, blob_path


def validate_manifest(manifest: dict) -> list[str]:
    """Collect every structural violation instead of stopping at the first."""
    errors: list[str] = []
    if manifest.get("format_version") != FORMAT_VERSION:
        errors.append(f"unsupported format_version {manifest.get('format_version')!r}")
    tensors = manifest.get("tensors")
    if not isinstance(tensors, list):
        return errors + ["missing tensor table"]
    try:
        spec = _spec_from_json(manifest["model_spec"])
        expected = set(expected_tensor_names(spec))
    except (KeyError, TypeError, ValueError) as e:
        errors.append(f"invalid model_spec: {e}")
        expected = None

    seen = {}
    spans = []
    for t in tensors:
        name = t.get("name", "<unnamed>")
        if t.get("dtype") != "f32":
            errors.append(f"{name}: unsupported dtype {t.get('dtype')!r}")
        shape = t.get("shape", [])
        nbytes = int(np.prod(shape)) * 4 if shape is not None else -1
        if t.get("byte_length") != nbytes:
            errors.append(f"{name}: byte_length {t.get('byte_length')} != 4 * prod(shape) = {nbytes}")
        if name in seen:
            errors.append(f"duplicate tensor {name}")
        seen[name] = t
        spans.append((t.get("byte_offset", 0), t.get("byte_offset", 0) + t.get("byte_length", 0), name))

    prev_end, prev_name = None, None
    for start, end, name in spans:
        if start < 0:
            errors.append(f"{name}: negative offset")
        if prev_end is not None and start < prev_end:
            errors.append(f"overlapping byte ranges: {prev_name} and {name}")
        prev_end, prev_name = end, name
    offsets = [s[0] for s in spans]
    if offsets != sorted(offsets):
        errors.append("tensor offsets not ascending")

    if expected is not None:
        missing = expected - set(seen)
        unknown = set(seen) - expected
        errors += [f"missing tensor {n}" for n in sorted(missing)]
        errors += [f"unknown tensor {n}" for n in sorted(unknown)]
    return errors


def load_model(manifest_path, blob_path=None) -> Model:
    """Load and validate a saved model; checksum is verified before any tensor is built."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ModelIOError(f"cannot read manifest {manifest_path}: {e}") from e
    if manifest.get("format_version") != FORMAT_VERSION:
        raise VersionError(
            f"manifest version {manifest.get('format_version')!r}, expected {FORMAT_VERSION}"
        )
    errors = validate_manifest(manifest)
    unknown = [e for e in errors if e.startswith("unknown tensor")]
    if unknown:
        raise UnknownTensorError("; ".join(unknown))
    if errors:
        raise ManifestError(errors)

    blob_path = Path(blob_path) if blob_path else manifest_path.parent / manifest.get("blob", manifest_path.with_suffix(".bin").name)
    blob = blob_path.read_bytes()
    if zlib.crc32(blob) != manifest["checksum"]:
        raise ChecksumError(f"blob checksum mismatch for {blob_path}")

    spec = _spec_from_json(manifest["model_spec"])
    table = {t["name"]: t for t in manifest["tensors"]}

    def tensor(name: str) -> torch.Tensor:
        t = table[name]
        end = t["byte_offset"] + t["byte_length"]
        if end > len(blob):
            raise ShapeMismatchError(f"{name}: byte range exceeds blob size")
        arr = np.frombuffer(blob[t["byte_offset"]:end], dtype="<f4").reshape(t["shape"])
        return torch.from_numpy(arr.copy())

    layers = []
    for i, (ls, js) in enumerate(zip(spec.layers, manifest["model_spec"]["layers"])):
        lw = LayerWeights(
            kind=ls.neuron_kind,
            w_in=tensor(f"layer{i}.w_in"),
            w_rec=tensor(f"layer{i}.w_rec"),
            b_in=tensor(f"layer{i}.b_in"),
        )
        if lw.w_in.shape != (ls.in_dim, ls.width) or lw.w_rec.shape != (ls.width, ls.width):
            raise ShapeMismatchError(f"layer{i}: weight shapes disagree with model_spec")
        if ls.neuron_kind == "ltc":
            lw.tau_weights = LtcTauWeights(
                w_tau_m=tensor(f"layer{i}.w_tau_m"),
                w_tau_adp=tensor(f"layer{i}.w_tau_adp"),
                bias_tau_m=tensor(f"layer{i}.b_tau_m"),
                bias_tau_adp=tensor(f"layer{i}.b_tau_adp"),
            )
            if lw.tau_weights.w_tau_m.shape != (2 * ls.width, ls.width):
                raise ShapeMismatchError(f"layer{i}: tau-network shape disagrees with model_spec")
        elif ls.neuron_kind == "lif":
            lw.lif = LifParams(**js.get("params", {}))
        else:
            lw.alif = AlifParams(**js.get("params", {}))
        layers.append(lw)

    w_out = tensor("readout.w_out")
    b_out = tensor("readout.b_out")
    if w_out.shape != (spec.layers[-1].width, spec.num_classes):
        raise ShapeMismatchError("readout.w_out shape disagrees with model_spec")
    return Model(spec=spec, layers=layers, w_out=w_out, b_out=b_out)
