"""Minimal dense-network machinery: float64 MLPs and decoupled-weight-decay Adam.

Kept deliberately small and explicit so gradients can be verified against
central finite differences and so artifacts serialize losslessly.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError, NumericsError


class DenseNet:
    """Affine stack with ReLU between layers and a linear output layer."""

    def __init__(self, dims: list[int], rng: np.random.Generator | None = None):
        if len(dims) < 2:
            raise DataError("a dense network needs at least input and output dims")
        self.dims = [int(d) for d in dims]
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.dims[:-1], self.dims[1:]):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                scale = np.sqrt(2.0 / (fan_in + fan_out))
                w = rng.normal(0.0, scale, size=(fan_in, fan_out))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns (output, per-layer pre-activation inputs for backward)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dims[0]:
            raise DataError(f"expected input of shape (batch, {self.dims[0]}), got {x.shape}")
        cache = [x]
        h = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            if i < self.n_layers - 1:
                h = np.maximum(z, 0.0)
            else:
                h = z
            cache.append(h)
        return h, cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(
        self, cache: list[np.ndarray], grad_out: np.ndarray
    ) -> tuple[np.ndarray, list[np.ndarray]]:
        """Backprop grad_out to the input; returns (grad_input, param grads).

        Param grads are ordered [dW0, db0, dW1, db1, ...] to match
        ``parameters()``.
        """
        grads: list[np.ndarray] = []
        g = np.asarray(grad_out, dtype=np.float64)
        for i in range(self.n_layers - 1, -1, -1):
            h_in = cache[i]
            if i < self.n_layers - 1:
                g = g * (cache[i + 1] > 0.0)
            grads.append(g.sum(axis=0))  # db
            grads.append(h_in.T @ g)  # dW
            g = g @ self.weights[i].T
        grads.reverse()
        return g, grads

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def set_parameters(self, params: list[np.ndarray]) -> None:
        if len(params) != 2 * self.n_layers:
            raise DataError("parameter count mismatch")
        for i in range(self.n_layers):
            self.weights[i] = np.asarray(params[2 * i], dtype=np.float64).reshape(
                self.weights[i].shape
            )
            self.biases[i] = np.asarray(params[2 * i + 1], dtype=np.float64).reshape(
                self.biases[i].shape
            )

    def to_record(self) -> dict:
        return {
            "dims": self.dims,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @staticmethod
    def from_record(rec: dict) -> "DenseNet":
        net = DenseNet(rec["dims"])
        net.weights = [np.asarray(w, dtype=np.float64) for w in rec["weights"]]
        net.biases = [np.asarray(b, dtype=np.float64) for b in rec["biases"]]
        for w, b, fan_in, fan_out in zip(net.weights, net.biases, net.dims[:-1], net.dims[1:]):
            if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise DataError("network record shape mismatch")
        return net


class AdamW:
    """Adam with decoupled weight decay; decay is masked per parameter."""

    def __init__(
        self,
        params: list[np.ndarray],
        lr: float,
        weight_decay: float = 0.0,
        decay_mask: list[bool] | None = None,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.decay_mask = decay_mask if decay_mask is not None else [True] * len(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise DataError("gradient count mismatch")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if not np.all(np.isfinite(g)):
                raise NumericsError("non-finite gradient")
            self.m[i] += (1.0 - self.beta1) * (g - self.m[i])
            self.v[i] += (1.0 - self.beta2) * (g * g - self.v[i])
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            update = m_hat / (np.sqrt(v_hat) + self.eps)
            if self.decay_mask[i] and self.weight_decay > 0.0:
                update = update + self.weight_decay * p
            p -= self.lr * update

    def reset_state(self, index: int, rows: np.ndarray) -> None:
        """Clear moments of selected rows (used when codewords are re-seeded)."""
        self.m[index][rows] = 0.0
        self.v[index][rows] = 0.0
