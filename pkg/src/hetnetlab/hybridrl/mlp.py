"""Small fully-connected network with hand-written backprop, and Adam."""

from __future__ import annotations

import numpy as np


class MLP:
    """tanh hidden layers, linear output.  Weights are stored (fan_in, fan_out)."""

    def __init__(self, sizes, rng: np.random.Generator | None = None, zero: bool = False):
        self.sizes = [int(s) for s in sizes]
        if len(self.sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            if zero:
                w = np.zeros((fan_in, fan_out))
            else:
                w = rng.standard_normal((fan_in, fan_out)) * np.sqrt(1.0 / fan_in)
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MLP":
        other = MLP.__new__(MLP)
        other.sizes = list(self.sizes)
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def soft_update(self, source: "MLP", tau: float) -> None:
        for dst, src in zip(self.params, source.params):
            dst *= 1.0 - tau
            dst += tau * src

    def forward(self, x: np.ndarray):
        x = np.atleast_2d(x)
        acts = [x]
        n = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w + b
            acts.append(np.tanh(z) if i < n - 1 else z)
        return acts[-1], acts

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, acts, grad_out: np.ndarray):
        """Gradients of sum(grad_out * output) w.r.t. params (same order as ``params``) and input."""
        grads = [None] * (2 * len(self.weights))
        g = grad_out
        for i in reversed(range(len(self.weights))):
            if i < len(self.weights) - 1:
                g = g * (1.0 - acts[i + 1] ** 2)
            grads[2 * i] = acts[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return grads, g


class Adam:
    def __init__(self, params, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads) -> None:
        """In-place descent step on the tracked arrays."""
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
