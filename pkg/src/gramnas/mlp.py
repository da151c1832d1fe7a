"""Dense softmax networks in NumPy: forward pass, backprop, SGD with momentum."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

__all__ = ["DenseNetwork", "softmax", "cross_entropy", "ACTIVATIONS"]

ACTIVATIONS = ("linear", "relu", "sigmoid")


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def cross_entropy(logits: np.ndarray, y: np.ndarray) -> float:
    """Mean categorical cross-entropy of integer labels ``y`` under ``softmax(logits)``."""
    return float(-_log_softmax(logits)[np.arange(len(y)), y].mean())


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "linear":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    return 1.0 / (1.0 + np.exp(-z))


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "linear":
        return np.ones_like(z)
    if name == "relu":
        return (z > 0).astype(z.dtype)
    return a * (1.0 - a)


class DenseNetwork:
    """Fully-connected layers ending in a softmax layer.

    ``activations`` names the hidden activations (one per hidden layer);
    ``use_bias`` has one flag per layer including the output layer.
    Weights use Glorot-uniform initialisation, biases start at zero.
    """

    def __init__(
        self,
        sizes: Sequence[int],
        activations: Sequence[str],
        use_bias: Sequence[bool],
        rng: Optional[np.random.Generator] = None,
    ):
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output size")
        if len(activations) != len(sizes) - 2 or len(use_bias) != len(sizes) - 1:
            raise ValueError("one activation per hidden layer and one bias flag per layer")
        bad = [a for a in activations if a not in ACTIVATIONS]
        if bad:
            raise ValueError(f"unsupported activations {bad}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.sizes = tuple(int(s) for s in sizes)
        self.activations = tuple(activations)
        self.use_bias = tuple(bool(b) for b in use_bias)
        self.weights: list[np.ndarray] = []
        self.biases: list[Optional[np.ndarray]] = []
        for fan_in, fan_out, bias in zip(self.sizes[:-1], self.sizes[1:], self.use_bias):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out) if bias else None)

    @property
    def n_outputs(self) -> int:
        return self.sizes[-1]

    def parameters(self) -> list[np.ndarray]:
        return self.weights + [b for b in self.biases if b is not None]

    def copy(self) -> "DenseNetwork":
        clone = object.__new__(DenseNetwork)
        clone.sizes, clone.activations, clone.use_bias = self.sizes, self.activations, self.use_bias
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [None if b is None else b.copy() for b in self.biases]
        return clone

    def _forward(self, x: np.ndarray):
        zs, acts = [], [x]
        a = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w
            if b is not None:
                z = z + b
            zs.append(z)
            a = z if i == last else _act(self.activations[i], z)
            acts.append(a)
        return zs, acts

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self._forward(np.asarray(x, dtype=np.float64))[0][-1]

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.logits(x))

    def predict(self, x: np.ndarray) -> np.ndarray:
        # argmax returns the lowest index among ties
        return np.argmax(self.predict_proba(x), axis=1)

    def loss(self, x: np.ndarray, y: np.ndarray) -> float:
        return cross_entropy(self.logits(x), y)

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray):
        """Mean cross-entropy and gradients ordered like :meth:`parameters`."""
        zs, acts = self._forward(x)
        logits = zs[-1]
        loss = cross_entropy(logits, y)
        delta = softmax(logits)
        delta[np.arange(len(y)), y] -= 1.0
        delta /= len(y)
        gw: list[np.ndarray] = [None] * len(self.weights)  # type: ignore[list-item]
        gb: list[Optional[np.ndarray]] = [None] * len(self.weights)
        for i in range(len(self.weights) - 1, -1, -1):
            gw[i] = acts[i].T @ delta
            if self.biases[i] is not None:
                gb[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * _act_grad(self.activations[i - 1], zs[i - 1], acts[i])
        return loss, gw + [g for g in gb if g is not None]

    def sgd_step(self, grads: list[np.ndarray], velocity: list[np.ndarray], lr: float, momentum: float) -> None:
        """Classical momentum: ``v <- m v - lr g``; ``p <- p + v`` (in place)."""
        for p, g, v in zip(self.parameters(), grads, velocity):
            v *= momentum
            v -= lr * g
            p += v
