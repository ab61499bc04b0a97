"""Spiking recurrent network inference engine with liquid-time-constant neurons."""

from .neurons import (
    AlifParams,
    LifParams,
    LtcTauWeights,
    NeuronState,
    NumericError,
    alif_step,
    input_current,
    lif_step,
    ltc_step,
)
from .network import (
    LayerSpec,
    LayerWeights,
    Model,
    ModelSpec,
    build_model,
    forward_batch,
    forward_sequence,
    init_state,
    layer_forward,
    predict,
)
from .events import (
    EventStream,
    FrameSequence,
    accumulate_frames,
    downsample,
    normalize_frames,
    parse_events,
    preprocess,
    serialize_events,
)
from .synth import SynthSpec, generate_synthetic
from .modelio import load_model, save_model, validate_manifest
from .trainer import LabeledFrames, TrainConfig, evaluate, grad_check, loss, train
from .bench import SweepConfig, SweepResult, measure_throughput, run_sweep

__version__ = "0.1.0"
