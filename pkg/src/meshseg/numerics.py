"""Dense layer kernel: explicit forward/backward passes and Adam.

The network vocabulary is fixed (linear, ReLU, layer norm, tanh, row
softmax, scaled dot-product attention, plus the two losses), so each
layer exposes a hand-written backward pass instead of a general autodiff
graph. Matrices are plain 2D numpy arrays; float64 in gradient-check
mode, float32 for training throughput.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NumericError(Exception):
    """Non-finite value encountered during optimization."""


# --- layers ------------------------------------------------------------------
# Each forward returns (output, trace); the matching backward consumes the
# trace plus the upstream gradient and returns gradients for its inputs.


def linear_forward(x, W, bias):
    if x.shape[1] != W.shape[0]:
        raise ValueError(f"linear shape mismatch: x {x.shape} W {W.shape}")
    if bias.shape != (1, W.shape[1]):
        raise ValueError(f"bias must be (1, {W.shape[1]}), got {bias.shape}")
    y = x @ W + bias
    return y, (x, W)


def linear_backward(trace, grad_out):
    x, W = trace
    if grad_out.shape != (x.shape[0], W.shape[1]):
        raise ValueError("linear backward: grad shape mismatch")
    grad_x = grad_out @ W.T
    grad_W = x.T @ grad_out
    grad_b = grad_out.sum(axis=0, keepdims=True)
    return grad_x, grad_W, grad_b


def relu_forward(x):
    mask = x > 0
    return np.maximum(x, 0.0), mask


def relu_backward(trace, grad_out):
    mask = trace
    return grad_out * mask


def tanh_forward(x):
    y = np.tanh(x)
    return y, y


def tanh_backward(trace, grad_out):
    y = trace
    return grad_out * (1.0 - y * y)


def layer_norm_forward(x, gain, offset, eps=1e-5):
    """Per-row zero-mean unit-variance normalization, then gain and offset."""
    if gain.shape != (1, x.shape[1]) or offset.shape != (1, x.shape[1]):
        raise ValueError("layer norm gain/offset must be (1, d)")
    if eps <= 0:
        raise ValueError("eps must be positive")
    mu = x.mean(axis=1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = xhat * gain + offset
    return y, (xhat, inv, gain)


def layer_norm_backward(trace, grad_out):
    xhat, inv, gain = trace
    d = xhat.shape[1]
    g = grad_out * gain
    # d/dx of (x - mu) / sqrt(var + eps), all statistics per row.
    grad_x = inv / d * (d * g - g.sum(axis=1, keepdims=True)
                        - xhat * (g * xhat).sum(axis=1, keepdims=True))
    grad_gain = (grad_out * xhat).sum(axis=0, keepdims=True)
    grad_offset = grad_out.sum(axis=0, keepdims=True)
    return grad_x, grad_gain, grad_offset


def softmax_rows(x):
    """Row softmax with per-row max subtraction."""
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows_backward(y, grad_out):
    # y is the softmax output; standard Jacobian-vector product per row.
    dot = (grad_out * y).sum(axis=1, keepdims=True)
    return y * (grad_out - dot)


def attention_forward(Q, K, V):
    """Scaled dot-product attention G = softmax(Q K^T / sqrt(d)) V."""
    if K.shape[0] == 0:
        raise ValueError("attention needs at least one key")
    if Q.shape[1] != K.shape[1] or K.shape[0] != V.shape[0]:
        raise ValueError("attention shape mismatch")
    d = Q.shape[1]
    scale = 1.0 / np.sqrt(float(d))
    A = softmax_rows((Q @ K.T) * np.asarray(scale, dtype=Q.dtype))
    G = A @ V
    return G, (Q, K, V, A)


def attention_backward(trace, grad_out):
    Q, K, V, A = trace
    scale = np.asarray(1.0 / np.sqrt(float(Q.shape[1])), dtype=Q.dtype)
    grad_V = A.T @ grad_out
    grad_A = grad_out @ V.T
    grad_S = softmax_rows_backward(A, grad_A) * scale
    grad_Q = grad_S @ K
    grad_K = grad_S.T @ Q
    return grad_Q, grad_K, grad_V


# --- losses ------------------------------------------------------------------


def squared_error_loss(pred, target):
    """Mean over rows of the channel-summed squared error.

    Returns (loss, grad_pred). With constant per-channel offset delta the
    loss equals channels * delta**2.
    """
    if pred.shape != target.shape:
        raise ValueError("squared error shape mismatch")
    diff = pred - target
    n = max(pred.shape[0], 1)
    loss = float((diff * diff).sum() / n)
    grad = (2.0 / n) * diff
    return loss, grad


def binary_cross_entropy(prob, target, eps=1e-7):
    """Mean BCE over entries; prob is clamped to [eps, 1 - eps].

    Returns (loss, grad_prob) where the gradient is w.r.t. the unclamped
    probability (zero where clamping saturates).
    """
    if prob.shape != target.shape:
        raise ValueError("cross entropy shape mismatch")
    q = np.clip(prob, eps, 1.0 - eps)
    count = prob.size if prob.size else 1
    loss = float(-(target * np.log(q) + (1.0 - target) * np.log1p(-q)).sum() / count)
    grad = (q - target) / (q * (1.0 - q)) / count
    grad = np.where((prob > eps) & (prob < 1.0 - eps), grad, 0.0)
    return loss, grad.astype(prob.dtype)


# --- parameter store and optimizer --------------------------------------------


@dataclass
class Param:
    value: np.ndarray
    grad: np.ndarray
    m: np.ndarray
    v: np.ndarray


@dataclass
class ParamStore:
    """Named parameters with gradients and Adam moment buffers."""

    params: dict = field(default_factory=dict)

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self.params:
            raise KeyError(f"duplicate parameter {name!r}")
        value = np.array(value)
        self.params[name] = Param(
            value=value,
            grad=np.zeros_like(value),
            m=np.zeros_like(value),
            v=np.zeros_like(value),
        )
        return self.params[name].value

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name].value

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self) -> list:
        return list(self.params.keys())

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        p = self.params[name]
        if grad.shape != p.value.shape:
            raise ValueError(f"gradient shape mismatch for {name!r}")
        p.grad += grad

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.grad[...] = 0.0

    def astype(self, dtype) -> "ParamStore":
        out = ParamStore()
        for name, p in self.params.items():
            out.add(name, p.value.astype(dtype))
        return out

    def copy_values(self) -> dict:
        return {name: p.value.copy() for name, p in self.params.items()}

    def load_values(self, values: dict) -> None:
        if set(values) != set(self.params):
            raise KeyError("parameter name mismatch in snapshot")
        for name, val in values.items():
            p = self.params[name]
            if p.value.shape != val.shape:
                raise ValueError(f"snapshot shape mismatch for {name!r}")
            p.value[...] = val

    def state_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for name in sorted(self.params):
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.params[name].value).tobytes())
        return h.hexdigest()


def adam_step(store: ParamStore, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8, t: int = 1) -> None:
    """Bias-corrected adaptive-moment update in place; zeroes gradients.

    Aborts (without touching any parameter) if a gradient is non-finite.
    """
    if t < 1:
        raise ValueError("step index t must be >= 1")
    for name, p in store.params.items():
        if not np.isfinite(p.grad).all():
            raise NumericError(f"non-finite gradient in parameter {name!r}")
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p in store.params.values():
        p.m[...] = beta1 * p.m + (1.0 - beta1) * p.grad
        p.v[...] = beta2 * p.v + (1.0 - beta2) * (p.grad * p.grad)
        p.value[...] -= lr * (p.m / c1) / (np.sqrt(p.v / c2) + eps)
        p.grad[...] = 0.0


def kaiming_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                    scale: float = 1.0, dtype=np.float64) -> np.ndarray:
    """Uniform fan-in initialization for W of shape (fan_in, fan_out)."""
    bound = scale * np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)
