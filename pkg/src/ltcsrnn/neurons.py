"""Discrete-time spiking neuron step functions: LIF, ALIF and liquid-time-constant (LTC).

All step functions are pure: they take a :class:`NeuronState` and return a new
one, never mutating their inputs.  Every function works on tensors of shape
``(n,)`` or ``(batch, n)`` and does all arithmetic in the dtype of the state
(float32 in normal operation).

Each spiking step also has a ReLU-converted variant (``spiking=False``): the
membrane/adaptation/threshold updates are identical, but the output is
``relu(u - theta)`` and the hard reset is skipped, turning the layer into an
ordinary differentiable RNN cell.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import torch

Tensor = torch.Tensor

# Adaptive-threshold defaults shared by ALIF and LTC neurons.
DEFAULT_B0 = 0.1
DEFAULT_BETA = 1.8


class NumericError(ArithmeticError):
    """Non-finite value encountered in a neuron update."""


@dataclass
class LifParams:
    """Leaky integrate-and-fire constants."""

    tau_m: float = 2.0
    r_m: float = 1.0
    theta: float = 1.0
    u_reset: float = 0.0

    def __post_init__(self):
        if self.tau_m < 1.0:
            raise ValueError(f"tau_m must be >= 1, got {self.tau_m}")
        if self.theta <= self.u_reset:
            raise ValueError("theta must exceed u_reset")


@dataclass
class AlifParams:
    """Adaptive-LIF constants.

    ``alpha`` and ``rho`` are the per-step decay factors of the membrane and
    the adaptation trace; use :meth:`from_time_constants` to derive them from
    time constants (``alpha = exp(-dt/tau_m)``, ``rho = exp(-dt/tau_adp)``).
    """

    alpha: float = 0.9
    rho: float = 0.95
    r_m: float = 1.0
    b0: float = DEFAULT_B0
    beta: float = DEFAULT_BETA
    u_reset: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0,1), got {self.alpha}")
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0,1), got {self.rho}")
        if self.b0 <= 0.0:
            raise ValueError("b0 must be positive")
        if self.beta < 0.0:
            raise ValueError("beta must be non-negative")

    @classmethod
    def from_time_constants(cls, tau_m: float, tau_adp: float, dt: float = 1.0, **kw) -> "AlifParams":
        import math

        return cls(alpha=math.exp(-dt / tau_m), rho=math.exp(-dt / tau_adp), **kw)


@dataclass
class LtcTauWeights:
    """Affine maps producing the liquid time constants.

    ``w_tau_m`` maps ``concat(x, u)`` to the pre-sigmoid inverse membrane time
    constant; ``w_tau_adp`` maps ``concat(x, b)`` to the pre-sigmoid adaptation
    decay.  Shapes: ``(in_dim + n, n)``, biases ``(n,)`` (zero by default).
    """

    w_tau_m: Tensor
    w_tau_adp: Tensor
    bias_tau_m: Tensor | None = None
    bias_tau_adp: Tensor | None = None

    @property
    def width(self) -> int:
        return self.w_tau_m.shape[-1]

    def tensors(self) -> dict[str, Tensor]:
        n = self.width
        return {
            "w_tau_m": self.w_tau_m,
            "w_tau_adp": self.w_tau_adp,
            "b_tau_m": self.bias_tau_m if self.bias_tau_m is not None else self.w_tau_m.new_zeros(n),
            "b_tau_adp": self.bias_tau_adp if self.bias_tau_adp is not None else self.w_tau_adp.new_zeros(n),
        }


@dataclass
class NeuronState:
    """Per-neuron dynamic state: membrane ``u``, adaptation trace ``b``,
    previous spike output ``s`` and current threshold ``theta``."""

    u: Tensor
    b: Tensor
    s: Tensor
    theta: Tensor

    @classmethod
    def zeros(cls, shape, theta0: float = 0.0, dtype: torch.dtype = torch.float32) -> "NeuronState":
        z = torch.zeros(shape, dtype=dtype)
        return cls(u=z, b=z.clone(), s=z.clone(), theta=torch.full(shape, theta0, dtype=dtype))


def _check_finite(*tensors: Tensor) -> None:
    for t in tensors:
        if not torch.isfinite(t).all():
            raise NumericError("non-finite value in neuron update")


def _fire_and_reset(u: Tensor, theta: Tensor, reset_to: float, spiking: bool) -> tuple[Tensor, Tensor]:
    # Spike on u >= theta so an exact threshold hit is deterministic.
    if spiking:
        s = (u >= theta).to(u.dtype)
        u = u * (1.0 - s) + reset_to * s
    else:
        s = torch.relu(u - theta)
    return u, s


def input_current(weights: Tensor, presyn_spikes: Tensor, i_ext: Tensor | None = None) -> Tensor:
    """Synaptic drive ``weights @ presyn_spikes + i_ext``.

    ``weights`` has shape ``(n_post, n_pre)``; ``presyn_spikes`` is ``(n_pre,)``
    or ``(batch, n_pre)``.
    """
    if weights.shape[-1] != presyn_spikes.shape[-1]:
        raise ValueError(
            f"weight columns ({weights.shape[-1]}) != presynaptic size ({presyn_spikes.shape[-1]})"
        )
    if presyn_spikes.dim() > 1:
        drive = presyn_spikes @ weights.mT
    else:
        drive = weights @ presyn_spikes
    if i_ext is not None:
        drive = drive + i_ext
    return drive


def lif_step(state: NeuronState, i_t: Tensor, p: LifParams, spiking: bool = True) -> NeuronState:
    """One LIF update: leaky integration, threshold, hard reset."""
    _check_finite(state.u, i_t)
    k = 1.0 / p.tau_m
    u = state.u * (1.0 - k) + k * p.r_m * i_t
    theta = torch.full_like(u, p.theta)
    u, s = _fire_and_reset(u, theta, p.u_reset, spiking)
    return NeuronState(u=u, b=state.b, s=s, theta=theta)


def alif_step(state: NeuronState, i_t: Tensor, p: AlifParams, spiking: bool = True) -> NeuronState:
    """One adaptive-LIF update.

    The soft-reset term uses the previous step's threshold (the one the prior
    spike was compared against); the new spike is compared against the freshly
    adapted threshold.
    """
    _check_finite(state.u, i_t)
    u = p.alpha * state.u + (1.0 - p.alpha) * p.r_m * i_t - state.theta * state.s
    b = p.rho * state.b + (1.0 - p.rho) * state.s
    theta = p.b0 + p.beta * b
    u, s = _fire_and_reset(u, theta, p.u_reset, spiking)
    return NeuronState(u=u, b=b, s=s, theta=theta)


def _open_sigmoid(z: Tensor) -> Tensor:
    # Keep the gate strictly inside (0,1): float32 sigmoid saturates to
    # exactly 0/1 for |z| beyond ~17, which would stall the dynamics.
    info = torch.finfo(z.dtype)
    return torch.sigmoid(z).clamp(min=info.tiny, max=1.0 - info.eps / 2)


def ltc_gates(x_t: Tensor, state: NeuronState, tw: LtcTauWeights) -> tuple[Tensor, Tensor]:
    """Liquid time constants ``(rho, tau_m_inv)``, each sigmoid-squashed into (0,1)."""
    in_dim = tw.w_tau_m.shape[-2] - tw.width
    if x_t.shape[-1] != in_dim:
        raise ValueError(f"tau-network expects input of size {in_dim}, got {x_t.shape[-1]}")
    z_adp = torch.cat([x_t, state.b], dim=-1) @ tw.w_tau_adp
    if tw.bias_tau_adp is not None:
        z_adp = z_adp + tw.bias_tau_adp
    z_m = torch.cat([x_t, state.u], dim=-1) @ tw.w_tau_m
    if tw.bias_tau_m is not None:
        z_m = z_m + tw.bias_tau_m
    return _open_sigmoid(z_adp), _open_sigmoid(z_m)


def ltc_step(
    state: NeuronState,
    x_t: Tensor,
    tw: LtcTauWeights,
    spiking: bool = True,
    u_rest: float = 0.0,
    b0: float = DEFAULT_B0,
    beta: float = DEFAULT_BETA,
) -> NeuronState:
    """One liquid-time-constant neuron update.

    Order matters: both time constants are computed from the previous-step
    state, then the adaptation trace, threshold, membrane and spike/reset are
    updated in sequence.  The membrane drift multiplies by the sigmoid output
    ``tau_m_inv`` directly, never dividing by a reconstructed ``tau_m``.
    """
    _check_finite(state.u, x_t)
    rho, tau_m_inv = ltc_gates(x_t, state, tw)
    b = rho * state.b + (1.0 - rho) * state.s
    theta = b0 + beta * b
    u = state.u + (-state.u + x_t) * tau_m_inv
    u, s = _fire_and_reset(u, theta, u_rest, spiking)
    return NeuronState(u=u, b=b, s=s, theta=theta)
