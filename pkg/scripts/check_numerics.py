#!/usr/bin/env python3
"""Quick numerical health report: gradient check and spiking/ReLU agreement.

Builds a small randomly initialized model per neuron kind, compares backprop
gradients against central finite differences, and reports how far the spiking
forward pass drifts from the ReLU relaxation on random input.
"""
import argparse
import sys

import numpy as np
import torch

from ltcsrnn.network import ModelSpec, build_model, default_layers, forward_batch
from ltcsrnn.trainer import grad_check


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--width", type=int, default=8)
    ap.add_argument("--depth", type=int, default=2)
    ap.add_argument("--t", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    shape = (2, 2, 2)
    frames = rng.random((args.t, *shape), dtype=np.float32)
    for kind in ("ltc", "alif", "lif"):
        spec = ModelSpec(
            input_shape=shape,
            layers=default_layers(int(np.prod(shape)), width=args.width,
                                  depth=args.depth, neuron_kind=kind),
            num_classes=3,
        )
        model = build_model(spec, seed=args.seed)
        err = grad_check(model, frames, label=1)
        batch = torch.tensor(frames).unsqueeze(0)
        relu = forward_batch(model, batch, "relu")
        spiking = forward_batch(model, batch, "spiking")
        drift = float((relu - spiking).abs().max())
        print(f"{kind:5s} grad rel err={err:.2e}  relu/spiking score drift={drift:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
