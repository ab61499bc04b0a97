"""Four-recurrent-layer spiking network with a non-spiking leaky readout.

The network consumes accumulated event frames, flattened channel-major to one
vector per timestep.  Each recurrent layer computes a synaptic drive
``c_t = a_t @ w_in + s_prev @ w_rec + b_in`` and feeds it to its neuron step;
for LTC layers the tau-networks act on ``concat(c_t, u_prev)`` and
``concat(c_t, b_prev)``.  Class scores are the time-mean of a leaky readout
membrane, decoded by argmax.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .neurons import (
    DEFAULT_B0,
    AlifParams,
    LifParams,
    LtcTauWeights,
    NeuronState,
    NumericError,
    alif_step,
    lif_step,
    ltc_step,
)

Tensor = torch.Tensor

NEURON_KINDS = ("lif", "alif", "ltc")


@dataclass
class LayerSpec:
    in_dim: int
    width: int
    neuron_kind: str = "ltc"

    def __post_init__(self):
        if self.in_dim < 1 or self.width < 1:
            raise ValueError("layer dimensions must be >= 1")
        if self.neuron_kind not in NEURON_KINDS:
            raise ValueError(f"unknown neuron kind {self.neuron_kind!r}")


@dataclass
class ModelSpec:
    input_shape: tuple[int, int, int] = (2, 32, 32)
    layers: list[LayerSpec] = field(default_factory=list)
    num_classes: int = 11
    readout_tau: float = 3.0

    def __post_init__(self):
        if not self.layers:
            self.layers = default_layers(self.flat_input_dim)
        if self.layers[0].in_dim != self.flat_input_dim:
            raise ValueError("first layer in_dim must equal flattened input_shape")
        for prev, cur in zip(self.layers, self.layers[1:]):
            if cur.in_dim != prev.width:
                raise ValueError("layer in_dim must equal previous layer width")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.readout_tau < 1.0:
            raise ValueError("readout_tau must be >= 1")

    @property
    def flat_input_dim(self) -> int:
        c, h, w = self.input_shape
        return c * h * w


def default_layers(in_dim: int, width: int = 128, depth: int = 4, neuron_kind: str = "ltc") -> list[LayerSpec]:
    dims = [in_dim] + [width] * depth
    return [LayerSpec(dims[i], dims[i + 1], neuron_kind) for i in range(depth)]


@dataclass
class LayerWeights:
    """Weights and constants for one recurrent layer.

    ``w_in`` is ``(in_dim, width)``, ``w_rec`` is ``(width, width)``, ``b_in``
    is ``(width,)``.  Exactly one of ``tau_weights`` (LTC), ``lif`` or ``alif``
    carries the neuron constants, matching ``kind``.
    """

    kind: str
    w_in: Tensor
    w_rec: Tensor
    b_in: Tensor
    tau_weights: LtcTauWeights | None = None
    lif: LifParams | None = None
    alif: AlifParams | None = None

    @property
    def width(self) -> int:
        return self.w_in.shape[-1]

    @property
    def in_dim(self) -> int:
        return self.w_in.shape[-2]

    @property
    def theta0(self) -> float:
        """Initial threshold: b0 for adaptive kinds, the fixed theta for LIF."""
        if self.kind == "lif":
            return self.lif.theta
        if self.kind == "alif":
            return self.alif.b0
        return DEFAULT_B0


@dataclass
class Model:
    spec: ModelSpec
    layers: list[LayerWeights]
    w_out: Tensor       # (last width, num_classes)
    b_out: Tensor       # (num_classes,)

    def parameters(self) -> dict[str, Tensor]:
        """All tensors under their canonical serialization names."""
        out: dict[str, Tensor] = {}
        for i, layer in enumerate(self.layers):
            out[f"layer{i}.w_in"] = layer.w_in
            out[f"layer{i}.w_rec"] = layer.w_rec
            out[f"layer{i}.b_in"] = layer.b_in
            if layer.tau_weights is not None:
                for name, t in layer.tau_weights.tensors().items():
                    out[f"layer{i}.{name}"] = t
        out["readout.w_out"] = self.w_out
        out["readout.b_out"] = self.b_out
        return out

    def spike_counts(self) -> list[int]:
        """Per-layer spike totals from the most recent forward pass."""
        return list(self._last_spike_counts)

    _last_spike_counts: list[float] = field(default_factory=list, repr=False)


@dataclass
class NetworkState:
    layers: list[NeuronState]
    v: Tensor           # readout membrane, (batch, num_classes)
    v_sum: Tensor


def build_model(spec: ModelSpec, seed: int = 0, dtype: torch.dtype = torch.float32) -> Model:
    """Randomly initialized model.

    Feedforward weights get a larger-than-Xavier gain and a small positive
    input bias: accumulated event frames are sparse, and with the adaptive
    threshold base at 0.1 a plain 1/sqrt(fan-in) init leaves the deeper
    layers silent (zero activations, zero gradient).
    """
    gen = torch.Generator().manual_seed(seed)

    def normal(*shape, scale):
        return torch.randn(*shape, generator=gen, dtype=torch.float64).to(dtype) * scale

    layers = []
    for ls in spec.layers:
        lw = LayerWeights(
            kind=ls.neuron_kind,
            w_in=normal(ls.in_dim, ls.width, scale=4.0 / math.sqrt(ls.in_dim)),
            w_rec=normal(ls.width, ls.width, scale=0.5 / math.sqrt(ls.width)),
            b_in=torch.full((ls.width,), 0.2, dtype=dtype),
        )
        if ls.neuron_kind == "ltc":
            d = ls.width + ls.width
            lw.tau_weights = LtcTauWeights(
                w_tau_m=normal(d, ls.width, scale=1.0 / math.sqrt(d)),
                w_tau_adp=normal(d, ls.width, scale=1.0 / math.sqrt(d)),
                bias_tau_m=torch.zeros(ls.width, dtype=dtype),
                bias_tau_adp=torch.zeros(ls.width, dtype=dtype),
            )
        elif ls.neuron_kind == "lif":
            lw.lif = LifParams()
        else:
            lw.alif = AlifParams()
        layers.append(lw)
    last = spec.layers[-1].width
    return Model(
        spec=spec,
        layers=layers,
        w_out=normal(last, spec.num_classes, scale=1.0 / math.sqrt(last)),
        b_out=torch.zeros(spec.num_classes, dtype=dtype),
    )


def init_state(model: Model, batch: int, dtype: torch.dtype | None = None) -> NetworkState:
    if batch < 1:
        raise ValueError("batch must be >= 1")
    dtype = dtype or model.w_out.dtype
    states = [
        NeuronState.zeros((batch, lw.width), theta0=lw.theta0, dtype=dtype)
        for lw in model.layers
    ]
    z = torch.zeros((batch, model.spec.num_classes), dtype=dtype)
    return NetworkState(layers=states, v=z, v_sum=z.clone())


def layer_forward(layer: LayerWeights, state: NeuronState, a_t: Tensor, spiking: bool = True) -> tuple[NeuronState, Tensor]:
    """One layer timestep; returns the new state and its output activations."""
    if a_t.shape[-1] != layer.in_dim:
        raise ValueError(f"layer expects input of size {layer.in_dim}, got {a_t.shape[-1]}")
    c_t = a_t @ layer.w_in + state.s @ layer.w_rec + layer.b_in
    if layer.kind == "lif":
        new = lif_step(state, c_t, layer.lif, spiking=spiking)
    elif layer.kind == "alif":
        new = alif_step(state, c_t, layer.alif, spiking=spiking)
    else:
        new = ltc_step(state, c_t, layer.tau_weights, spiking=spiking)
    return new, new.s


def readout_step(w_out: Tensor, b_out: Tensor, s_t: Tensor, v: Tensor, readout_tau: float) -> Tensor:
    """Leaky-integrator readout membrane update."""
    k = 1.0 / readout_tau
    return v * (1.0 - k) + k * (s_t @ w_out + b_out)


def _as_input_tensor(frames, model: Model) -> Tensor:
    x = torch.as_tensor(np.asarray(frames) if not isinstance(frames, Tensor) else frames)
    return x.to(model.w_out.dtype)


def forward_batch(model: Model, frames, mode: str = "spiking") -> Tensor:
    """Run a batch of frame sequences through the network.

    ``frames``: array-like of shape ``(batch, T, C, H, W)`` (or pre-flattened
    ``(batch, T, D)``).  Returns class scores of shape ``(batch, num_classes)``.
    """
    if mode not in ("spiking", "relu"):
        raise ValueError(f"unknown mode {mode!r}")
    x = _as_input_tensor(frames, model)
    if x.dim() == 5:
        x = x.flatten(start_dim=2)
    if x.dim() != 3:
        raise ValueError(f"expected (batch, T, C, H, W) or (batch, T, D) input, got shape {tuple(x.shape)}")
    if x.shape[-1] != model.spec.flat_input_dim:
        raise ValueError(
            f"input dimension {x.shape[-1]} != model input {model.spec.flat_input_dim}"
        )
    batch, t_len = x.shape[0], x.shape[1]
    if t_len < 1:
        raise ValueError("sequence length must be >= 1")
    spiking = mode == "spiking"
    state = init_state(model, batch, dtype=x.dtype)
    counts = [0.0] * len(model.layers)
    for t in range(t_len):
        a = x[:, t]
        for i, layer in enumerate(model.layers):
            state.layers[i], a = layer_forward(layer, state.layers[i], a, spiking=spiking)
            counts[i] += float(state.layers[i].s.detach().sum())
        state.v = readout_step(model.w_out, model.b_out, a, state.v, model.spec.readout_tau)
        state.v_sum = state.v_sum + state.v
    model._last_spike_counts = counts
    scores = state.v_sum / t_len
    if not torch.isfinite(scores).all():
        raise NumericError("non-finite class scores")
    return scores


def forward_sequence(model: Model, frames, mode: str = "spiking") -> Tensor:
    """Classify a single ``(T, C, H, W)`` sequence; returns ``(num_classes,)`` scores."""
    x = _as_input_tensor(frames, model)
    return forward_batch(model, x.unsqueeze(0), mode=mode)[0]


def predict(scores) -> int:
    """Argmax class index; ties break to the lowest index."""
    s = np.asarray(scores.detach() if isinstance(scores, Tensor) else scores)
    if s.size == 0:
        raise ValueError("empty scores")
    if not np.isfinite(s).all():
        raise NumericError("non-finite scores")
    return int(np.argmax(s))
