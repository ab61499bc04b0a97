"""Independent reference implementations used as test oracles.

Everything here is deliberately written without the package's tensor code:
the neuron references are pure-Python scalar loops, and the network reference
is a plain numpy RNN.  They must stay independent of src/ltcsrnn.
"""
from __future__ import annotations

import math

import numpy as np


def sigmoid(z: float) -> float:
    return 1.0 / (1.0 + math.exp(-z))


def lif_ref(u, i_t, tau_m, r_m, theta, u_reset, spiking=True):
    """Scalar-loop LIF step over lists of floats."""
    out_u, out_s = [], []
    for uj, ij in zip(u, i_t):
        uj = uj * (1.0 - 1.0 / tau_m) + (1.0 / tau_m) * r_m * ij
        if spiking:
            sj = 1.0 if uj >= theta else 0.0
            uj = uj * (1.0 - sj) + u_reset * sj
        else:
            sj = max(0.0, uj - theta)
        out_u.append(uj)
        out_s.append(sj)
    return out_u, out_s


def alif_ref(u, b, s, theta, i_t, alpha, rho, r_m, b0, beta, u_reset, spiking=True):
    out_u, out_b, out_s, out_theta = [], [], [], []
    for uj, bj, sj, thj, ij in zip(u, b, s, theta, i_t):
        uj = alpha * uj + (1.0 - alpha) * r_m * ij - thj * sj
        bj = rho * bj + (1.0 - rho) * sj
        thj = b0 + beta * bj
        if spiking:
            sj = 1.0 if uj >= thj else 0.0
            uj = uj * (1.0 - sj) + u_reset * sj
        else:
            sj = max(0.0, uj - thj)
        out_u.append(uj)
        out_b.append(bj)
        out_s.append(sj)
        out_theta.append(thj)
    return out_u, out_b, out_s, out_theta


def _affine_sigmoid(left, right, w, bias):
    """sigmoid(concat(left, right) @ w + bias) via explicit loops."""
    vec = list(left) + list(right)
    n = len(bias)
    out = []
    for j in range(n):
        z = bias[j]
        for i, v in enumerate(vec):
            z += v * w[i][j]
        out.append(sigmoid(z))
    return out


def ltc_ref(u, b, s, x_t, w_tau_m, w_tau_adp, bias_m, bias_adp, u_rest=0.0, b0=0.1, beta=1.8, spiking=True):
    rho = _affine_sigmoid(x_t, b, w_tau_adp, bias_adp)
    tau_m_inv = _affine_sigmoid(x_t, u, w_tau_m, bias_m)
    out_u, out_b, out_s, out_theta = [], [], [], []
    for j in range(len(u)):
        bj = rho[j] * b[j] + (1.0 - rho[j]) * s[j]
        thj = b0 + beta * bj
        uj = u[j] + (-u[j] + x_t[j]) * tau_m_inv[j]
        if spiking:
            sj = 1.0 if uj >= thj else 0.0
            uj = uj * (1.0 - sj) + u_rest * sj
        else:
            sj = max(0.0, uj - thj)
        out_u.append(uj)
        out_b.append(bj)
        out_s.append(sj)
        out_theta.append(thj)
    return out_u, out_b, out_s, out_theta


def relu_rnn_ref(weights, x):
    """Plain numpy RNN implementing the ReLU-converted network.

    ``weights``: list of per-layer dicts with keys ``kind``, ``w_in``,
    ``w_rec``, ``b_in`` and, per kind, either ``lif``/``alif`` scalar dicts or
    LTC matrices ``w_tau_m``/``w_tau_adp``/``b_tau_m``/``b_tau_adp``; plus a
    final dict ``{"w_out", "b_out", "readout_tau"}``.  ``x`` is ``(T, D)``.
    Returns the time-mean readout membrane.
    """
    *layer_ws, readout = weights
    t_len = x.shape[0]
    states = []
    for lw in layer_ws:
        n = lw["w_in"].shape[1]
        theta0 = lw["lif"]["theta"] if lw["kind"] == "lif" else (
            lw["alif"]["b0"] if lw["kind"] == "alif" else 0.1
        )
        states.append(
            {"u": np.zeros(n), "b": np.zeros(n), "s": np.zeros(n), "theta": np.full(n, theta0)}
        )
    v = np.zeros(readout["w_out"].shape[1])
    v_sum = np.zeros_like(v)
    for t in range(t_len):
        a = x[t]
        for lw, st in zip(layer_ws, states):
            c = a @ lw["w_in"] + st["s"] @ lw["w_rec"] + lw["b_in"]
            if lw["kind"] == "lif":
                p = lw["lif"]
                u = st["u"] * (1 - 1 / p["tau_m"]) + (1 / p["tau_m"]) * p["r_m"] * c
                theta = np.full_like(u, p["theta"])
                b = st["b"]
            elif lw["kind"] == "alif":
                p = lw["alif"]
                u = p["alpha"] * st["u"] + (1 - p["alpha"]) * p["r_m"] * c - st["theta"] * st["s"]
                b = p["rho"] * st["b"] + (1 - p["rho"]) * st["s"]
                theta = p["b0"] + p["beta"] * b
            else:
                zr = np.concatenate([c, st["b"]]) @ lw["w_tau_adp"] + lw["b_tau_adp"]
                zm = np.concatenate([c, st["u"]]) @ lw["w_tau_m"] + lw["b_tau_m"]
                rho = 1.0 / (1.0 + np.exp(-zr))
                tau_m_inv = 1.0 / (1.0 + np.exp(-zm))
                b = rho * st["b"] + (1 - rho) * st["s"]
                theta = 0.1 + 1.8 * b
                u = st["u"] + (-st["u"] + c) * tau_m_inv
            s = np.maximum(0.0, u - theta)
            st.update(u=u, b=b, s=s, theta=theta)
            a = s
        k = 1.0 / readout["readout_tau"]
        v = v * (1 - k) + k * (a @ readout["w_out"] + readout["b_out"])
        v_sum = v_sum + v
    return v_sum / t_len


def model_to_ref_weights(model):
    """Extract numpy weights from a package Model for the reference RNN."""
    out = []
    for lw in model.layers:
        d = {
            "kind": lw.kind,
            "w_in": lw.w_in.detach().numpy().astype(np.float64),
            "w_rec": lw.w_rec.detach().numpy().astype(np.float64),
            "b_in": lw.b_in.detach().numpy().astype(np.float64),
        }
        if lw.kind == "lif":
            d["lif"] = {"tau_m": lw.lif.tau_m, "r_m": lw.lif.r_m, "theta": lw.lif.theta}
        elif lw.kind == "alif":
            d["alif"] = {
                "alpha": lw.alif.alpha, "rho": lw.alif.rho, "r_m": lw.alif.r_m,
                "b0": lw.alif.b0, "beta": lw.alif.beta,
            }
        else:
            tw = lw.tau_weights.tensors()
            d["w_tau_m"] = tw["w_tau_m"].detach().numpy().astype(np.float64)
            d["w_tau_adp"] = tw["w_tau_adp"].detach().numpy().astype(np.float64)
            d["b_tau_m"] = tw["b_tau_m"].detach().numpy().astype(np.float64)
            d["b_tau_adp"] = tw["b_tau_adp"].detach().numpy().astype(np.float64)
        out.append(d)
    out.append(
        {
            "w_out": model.w_out.detach().numpy().astype(np.float64),
            "b_out": model.b_out.detach().numpy().astype(np.float64),
            "readout_tau": model.spec.readout_tau,
        }
    )
    return out
