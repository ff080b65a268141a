"""Initialization, Adam with bias correction, and the warmup learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor


def glorot_init(shape, rng: np.random.Generator) -> np.ndarray:
    """Uniform in +/- sqrt(6 / (fan_in + fan_out)); deterministic under a seeded rng."""
    shape = tuple(shape)
    if len(shape) >= 2:
        fan_in, fan_out = shape[0], shape[1]
    else:
        fan_in = fan_out = shape[0]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def seeded_rng(seed: int, stream: str) -> np.random.Generator:
    """Generator keyed by (seed, stream name) so streams are order-independent.

    Giving every parameter its own named stream means two models that share a
    parameter name initialize that parameter identically, regardless of which
    other parameters either model owns.
    """
    digest = np.frombuffer(stream.encode("utf-8"), dtype=np.uint8)
    return np.random.default_rng([seed, *digest.tolist()])


def inverse_sqrt_lr(step: int, model_dim: int, warmup: int, lr_scale: float = 1.0) -> float:
    """Warmup-then-decay schedule: d^-0.5 * min(step^-0.5, step * warmup^-1.5)."""
    step = max(step, 1)
    return lr_scale * model_dim ** -0.5 * min(step ** -0.5, step * warmup ** -1.5)


@dataclass
class AdamState:
    """First/second moment accumulators for one set of named parameters."""

    beta1: float = 0.9
    beta2: float = 0.998
    eps: float = 1e-9
    learning_rate: float = 1e-3
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """One bias-corrected Adam update; ``grads`` maps names to arrays."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.data.shape:
            raise ValueError(
                f"adam_step: gradient shape {g.shape} does not match "
                f"parameter {name!r} of shape {p.data.shape}"
            )
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        p.data -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)


class Adam:
    """Adam over a named parameter dict, reading gradients off the tensors.

    ``scale`` divides the accumulated gradients before the update, which is
    how summed gradients from several accumulated batches become a mean over
    the total token count.
    """

    def __init__(self, params: dict[str, Tensor], beta1=0.9, beta2=0.998,
                 eps=1e-9, learning_rate=1e-3):
        self.params = params
        self.state = AdamState(beta1=beta1, beta2=beta2, eps=eps,
                               learning_rate=learning_rate)

    def step(self, learning_rate: float | None = None, scale: float = 1.0) -> None:
        if learning_rate is not None:
            self.state.learning_rate = learning_rate
        grads = {}
        for name, p in self.params.items():
            if p.grad is not None:
                grads[name] = p.grad if scale == 1.0 else p.grad * scale
        adam_step(self.params, grads, self.state)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None
