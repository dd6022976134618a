"""Categorical cross-entropy and Adam."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, TrainingError
from .nn import softmax

PROB_FLOOR = 1e-7


def _check_targets(targets, shape):
    if targets.shape != shape:
        raise ContractError(f"targets shape {targets.shape} != predictions shape {shape}")
    is_binary = np.all((targets == 0) | (targets == 1))
    if not is_binary or np.any(targets.sum(axis=1) != 1):
        bad = int(np.flatnonzero(~((targets == 0) | (targets == 1)).all(axis=1) | (targets.sum(axis=1) != 1))[0])
        raise ContractError(f"target row {bad} is not one-hot: {targets[bad].tolist()}")


def categorical_cross_entropy(probs, targets):
    """Mean negative log-likelihood of one-hot ``targets`` under ``probs``.

    Probabilities are clamped to ``[1e-7, 1]`` before the log; the returned
    gradient is that of the clamped expression (zero where the clamp is
    active).
    """
    _check_targets(targets, probs.shape)
    n = probs.shape[0]
    clamped = np.clip(probs, PROB_FLOOR, 1.0)
    loss = float(-(targets * np.log(clamped)).sum() / n)
    active = (probs >= PROB_FLOOR) & (probs <= 1.0)
    grad = np.where(active, -targets / (n * clamped), 0.0).astype(probs.dtype)
    return loss, grad


def softmax_backward(dprobs, probs):
    """Gradient through a row-wise softmax given its output ``probs``."""
    return probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))


def softmax_cross_entropy(logits, targets):
    """Fused softmax + cross-entropy: returns ``(loss, probs, grad_logits)``.

    ``grad_logits = (probs - targets) / N``.
    """
    probs = softmax(logits)
    loss, _ = categorical_cross_entropy(probs, targets)
    grad = (probs - targets.astype(probs.dtype)) / probs.shape[0]
    return loss, probs, grad


@dataclass
class AdamState:
    """Moment estimates keyed by parameter name, plus the shared step count."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params, **hyper):
        state = cls(**hyper)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        return state


def adam_step(params, grads, state):
    """Apply one Adam update in place to ``params`` and ``state``.

    Every gradient is checked for non-finite values before anything is
    modified, so a failed step leaves params and state untouched.
    """
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ContractError(f"gradient for {name!r} has shape {g.shape}, parameter has {p.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
    state.t += 1
    t = state.t
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads[name].astype(p.dtype, copy=False)
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= p.dtype.type(b1)
        m += p.dtype.type(1.0 - b1) * g
        v *= p.dtype.type(b2)
        v += p.dtype.type(1.0 - b2) * g * g
        m_hat = m / p.dtype.type(corr1)
        v_hat = v / p.dtype.type(corr2)
        p -= p.dtype.type(state.lr) * m_hat / (np.sqrt(v_hat) + p.dtype.type(state.epsilon))
    return params, state
