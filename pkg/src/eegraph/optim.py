"""Adam over the composite update directions, with decoupled weight decay.

Decay touches only the dense transforms; the adjacency's shrinkage comes
from its own sparsity penalty, so decaying it too would double-regularize.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError
from .params import DECAYED, GradientSet, ParamSet


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        for name in ("beta1", "beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {getattr(self, name)}")
        if self.eps < 0 or self.weight_decay < 0:
            raise ConfigError("eps and weight_decay must be >= 0")


@dataclass
class AdamState:
    """Step counter plus first/second moment buffers, one pair per tensor."""

    cfg: AdamConfig
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: ParamSet, cfg: AdamConfig | None = None) -> "AdamState":
        cfg = cfg or AdamConfig()
        state = cls(cfg=cfg)
        for name, arr in params.tensors().items():
            state.m[name] = np.zeros_like(arr)
            state.v[name] = np.zeros_like(arr)
        return state


def adam_step(state: AdamState, params: ParamSet, directions: GradientSet) -> tuple[ParamSet, AdamState]:
    """Advance every parameter tensor one Adam step along its direction.

    Mutates params and state in place and returns them. Weight decay is
    applied to the pre-step parameter value, independent of the moments.
    """
    cfg = state.cfg
    tensors = params.tensors()
    dirs = directions.tensors()
    for name in tensors:
        if name not in dirs:
            raise ConfigError(f"no update direction for tensor {name!r}")
        if not np.all(np.isfinite(dirs[name])):
            raise DivergenceError(f"non-finite update direction for tensor {name!r}")
    state.t += 1
    t = state.t
    bias1 = 1.0 - cfg.beta1**t
    bias2 = 1.0 - cfg.beta2**t
    for name, p in tensors.items():
        g = dirs[name]
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        m_hat = m / bias1
        v_hat = v / bias2
        if cfg.weight_decay > 0.0 and name in DECAYED:
            p -= cfg.lr * cfg.weight_decay * p
        denom = np.sqrt(v_hat) + cfg.eps
        # eps = 0 with an untouched coordinate gives 0/0; the step is 0 there
        delta = np.divide(m_hat, denom, out=np.zeros_like(m_hat), where=denom > 0.0)
        p -= cfg.lr * delta
    return params, state
