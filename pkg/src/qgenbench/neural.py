"""Small dense networks in numpy: forward, backprop, Adam.

Used for the QGAN discriminators and for both halves of the classical GAN.
Every network ends in a sigmoid, so outputs are probabilities (discriminator)
or points in [0,1]^d (classical generator).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CLAMP = 1e-12
ACTIVATIONS = ("relu", "leaky_relu")
LEAKY_SLOPE = 0.2


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class Mlp:
    def __init__(self, layer_sizes, activation: str = "relu", seed=None):
        if activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.layer_sizes = [int(s) for s in layer_sizes]
        self.activation = activation
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.weights, self.biases = [], []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))
        self._cache = None

    @property
    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def _act(self, z):
        if self.activation == "relu":
            return np.maximum(z, 0.0)
        return np.where(z > 0, z, LEAKY_SLOPE * z)

    def _act_grad(self, z):
        if self.activation == "relu":
            return (z > 0).astype(float)
        return np.where(z > 0, 1.0, LEAKY_SLOPE)

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.layer_sizes[0]:
            raise ValueError(f"expected input of shape (N, {self.layer_sizes[0]}), got {x.shape}")
        inputs, pre = [], []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ w + b
            pre.append(z)
            h = sigmoid(z) if i == last else self._act(z)
        self._cache = (inputs, pre, h)
        return h

    __call__ = forward

    def backward(self, grad, of: str = "output"):
        """Backprop from the cached forward pass.

        ``grad`` is dL/d(output) (``of="output"``) or dL/d(pre-sigmoid logit)
        (``of="logit"``). Returns ``(param_grads, input_grad)`` with
        ``param_grads`` ordered like :attr:`params`.
        """
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        inputs, pre, out = self._cache
        g = np.asarray(grad, dtype=float)
        if of == "output":
            g = g * out * (1.0 - out)
        elif of != "logit":
            raise ValueError("of must be 'output' or 'logit'")
        grads = []
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                g = g * self._act_grad(pre[i])
            grads.append(g.sum(axis=0))
            grads.append(inputs[i].T @ g)
            g = g @ self.weights[i].T
        grads.reverse()
        return grads, g

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, flat) -> None:
        flat = np.asarray(flat, dtype=float)
        pos = 0
        for p in self.params:
            p[...] = flat[pos: pos + p.size].reshape(p.shape)
            pos += p.size

    def copy(self) -> "Mlp":
        other = Mlp.__new__(Mlp)
        other.layer_sizes = list(self.layer_sizes)
        other.activation = self.activation
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        other._cache = None
        return other

    def to_dict(self) -> dict:
        return {
            "layer_sizes": self.layer_sizes,
            "activation": self.activation,
            "shapes": [list(p.shape) for p in self.params],
            "params": self.get_flat().tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Mlp":
        net = cls(data["layer_sizes"], data["activation"], seed=0)
        if [list(p.shape) for p in net.params] != data["shapes"]:
            raise ValueError("shape manifest does not match layer sizes")
        net.set_flat(data["params"])
        return net


@dataclass
class Adam:
    """Adam moments for a list of parameter arrays, updated in place."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> bool:
        """One update; returns False (and changes nothing) on non-finite gradients."""
        if not all(np.all(np.isfinite(g)) for g in grads):
            return False
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.step_count += 1
        t = self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            m_hat = m / (1 - self.beta1**t)
            v_hat = v / (1 - self.beta2**t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return True


def backward_and_step(mlp: Mlp, adam: Adam, grad, of: str = "output") -> bool:
    grads, _ = mlp.backward(grad, of)
    return adam.step(mlp.params, grads)


def _clamp(p):
    return np.clip(np.asarray(p, dtype=float), CLAMP, 1.0 - CLAMP)


def bce_losses(d_real, d_fake) -> tuple[float, float]:
    """Discriminator and generator losses from discriminator outputs."""
    r, f = _clamp(d_real), _clamp(d_fake)
    loss_d = -float(np.mean(np.log(r)) + np.mean(np.log(1.0 - f)))
    loss_g = -float(np.mean(np.log(f)))
    return loss_d, loss_g


def discriminator_logit_grads(d_real, d_fake):
    """dL_D/d(logit) for the real and the fake half of a batch."""
    m_r, m_f = len(d_real), len(d_fake)
    return (np.asarray(d_real) - 1.0) / m_r, np.asarray(d_fake) / m_f


def generator_logit_grad(d_fake):
    """dL_G/d(logit of D) per fake sample."""
    return (np.asarray(d_fake) - 1.0) / len(d_fake)


def classical_gan_generator(generator: Mlp, noise) -> np.ndarray:
    noise = np.asarray(noise, dtype=float)
    if noise.ndim != 2 or noise.shape[1] != generator.layer_sizes[0]:
        raise ValueError(f"noise must have shape (N, {generator.layer_sizes[0]})")
    return generator.forward(noise)
