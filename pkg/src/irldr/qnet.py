"""Minimal feed-forward Q-network with hand-written backpropagation.

The demand-response network is 8 inputs, two rectified hidden layers of 32
units, and 11 linear outputs (one Q-value per curtailment level).  No
autodiff framework is involved; gradients are derived by hand and verified
against central finite differences in the test suite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import SLOTS_PER_DAY

DEFAULT_LAYER_SIZES = (8, 32, 32, 11)


class Mlp:
    """Affine layers with ReLU after all but the last.

    Parameters live in ``params`` as [W1, b1, W2, b2, ...] with W of shape
    (fan_in, fan_out), He-initialized from the supplied generator.  All
    parameter arrays are views into one flat buffer so the optimizer and the
    soft target blend can run as single vectorized operations.
    """

    def __init__(self, layer_sizes=DEFAULT_LAYER_SIZES, rng: np.random.Generator | None = None):
        if len(layer_sizes) < 2:
            raise ValueError("need at least one layer")
        rng = rng or np.random.default_rng()
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        self._allocate()
        for layer, (fan_in, fan_out) in enumerate(zip(self.layer_sizes, self.layer_sizes[1:])):
            self.params[2 * layer][:] = rng.normal(
                0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)
            )
            self.params[2 * layer + 1][:] = 0.0

    def _allocate(self) -> None:
        shapes = []
        for fan_in, fan_out in zip(self.layer_sizes, self.layer_sizes[1:]):
            shapes.append((fan_in, fan_out))
            shapes.append((fan_out,))
        total = sum(int(np.prod(s)) for s in shapes)
        self.flat_params = np.zeros(total)
        self.params: list[np.ndarray] = []
        offset = 0
        for shape in shapes:
            count = int(np.prod(shape))
            self.params.append(self.flat_params[offset : offset + count].reshape(shape))
            offset += count

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    def copy(self) -> "Mlp":
        twin = Mlp.__new__(Mlp)
        twin.layer_sizes = self.layer_sizes
        twin._allocate()
        twin.flat_params[:] = self.flat_params
        return twin

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Q-values for a single observation or a batch (rows)."""
        x = np.asarray(x, dtype=float)
        if not math.isfinite(float(x.sum())):
            raise ValueError("network input must be finite")
        h = x
        for layer in range(self.n_layers):
            h = h @ self.params[2 * layer] + self.params[2 * layer + 1]
            if layer < self.n_layers - 1:
                h = np.maximum(h, 0.0)
        return h

    def _forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        activations = [x]
        h = x
        for layer in range(self.n_layers):
            h = h @ self.params[2 * layer] + self.params[2 * layer + 1]
            if layer < self.n_layers - 1:
                h = np.maximum(h, 0.0)
            activations.append(h)
        return h, activations


def backward(net: Mlp, x: np.ndarray, action: int, td_target: float) -> list[np.ndarray]:
    """Gradient of 0.5 * (Q(x)[action] - td_target)^2 w.r.t. all parameters."""
    x = np.asarray(x, dtype=float)
    grads = backward_batch(net, x[None, :], np.array([action]), np.array([td_target]))
    # backward_batch averages over the batch; a single sample needs no scaling.
    return grads


def backward_batch(
    net: Mlp, x: np.ndarray, actions: np.ndarray, td_targets: np.ndarray
) -> list[np.ndarray]:
    """Gradient of the mean of 0.5 * (Q(x_i)[a_i] - y_i)^2 over a batch."""
    batch = x.shape[0]
    q, acts = net._forward_cached(x)
    delta = np.zeros_like(q)
    rows = np.arange(batch)
    delta[rows, actions] = (q[rows, actions] - td_targets) / batch

    grads: list[np.ndarray] = [np.empty(0)] * len(net.params)
    for layer in reversed(range(net.n_layers)):
        h_in = acts[layer]
        grads[2 * layer] = h_in.T @ delta
        grads[2 * layer + 1] = delta.sum(axis=0)
        if layer > 0:
            delta = delta @ net.params[2 * layer].T
            delta *= acts[layer] > 0  # ReLU mask of the producing layer
    return grads


@dataclass
class Adam:
    """Adaptive-moment optimizer with bias correction."""

    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        self.step_count = 0
        self._m: list[np.ndarray] | None = None
        self._v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        flat = np.concatenate([np.ravel(p) for p in params])
        self.step_flat(flat, np.concatenate([np.ravel(g) for g in grads]))
        offset = 0
        for p in params:
            p[...] = flat[offset : offset + p.size].reshape(p.shape)
            offset += p.size

    def step_flat(self, flat_params: np.ndarray, flat_grads: np.ndarray) -> None:
        if self._m is None:
            self._m = np.zeros_like(flat_params)
            self._v = np.zeros_like(flat_params)
        self.step_count += 1
        m, v = self._m, self._v
        m *= self.beta1
        m += (1.0 - self.beta1) * flat_grads
        v *= self.beta2
        v += (1.0 - self.beta2) * flat_grads * flat_grads
        bias1 = 1.0 - self.beta1**self.step_count
        bias2 = 1.0 - self.beta2**self.step_count
        flat_params -= self.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
        # NaN/Inf anywhere poisons the sum, so one scalar check covers all.
        if not math.isfinite(float(flat_params.sum())):
            raise FloatingPointError("non-finite network parameter after update")


def apply_update(net: Mlp, grads: list[np.ndarray], opt: Adam) -> None:
    opt.step(net.params, grads)


def soft_update(target: Mlp, online: Mlp, tau: float) -> None:
    """Blend online parameters into the target: target <- tau*online + (1-tau)*target."""
    target.flat_params *= 1.0 - tau
    target.flat_params += tau * online.flat_params


@dataclass(frozen=True)
class InputNormalizer:
    """Divides each observation component by a fixed positive scale."""

    scales: tuple[float, ...]

    def __call__(self, obs: np.ndarray) -> np.ndarray:
        return obs / np.asarray(self.scales)

    @classmethod
    def identity(cls, dim: int) -> "InputNormalizer":
        return cls(scales=(1.0,) * dim)

    @classmethod
    def for_household(cls, household, price_max: float) -> "InputNormalizer":
        """Demands and baseline scale to the 95th-percentile slot demand,
        delays to a full day, price to its configured maximum."""
        demand_scale = float(np.percentile(household.total_series(), 95))
        demand_scale = max(demand_scale, 1e-6)
        price_scale = max(float(price_max), 1e-6)
        return cls(
            scales=(demand_scale, demand_scale)
            + (float(SLOTS_PER_DAY),) * 4
            + (price_scale, demand_scale)
        )


_CHECKPOINT_VERSION = 1


def save_mlp(net: Mlp, prefix: str | Path) -> None:
    """Write ``<prefix>.bin`` (flat little-endian float64, parameters in
    order W1, b1, W2, b2, ..., row-major) plus a ``<prefix>.json`` sidecar
    describing the shapes and byte offsets."""
    prefix = Path(prefix)
    arrays = []
    offset = 0
    blob = bytearray()
    for i, p in enumerate(net.params):
        kind = "W" if i % 2 == 0 else "b"
        data = np.ascontiguousarray(p, dtype="<f8").tobytes()
        arrays.append(
            {"name": f"{kind}{i // 2 + 1}", "shape": list(p.shape), "offset": offset}
        )
        blob.extend(data)
        offset += len(data)
    sidecar = {
        "format_version": _CHECKPOINT_VERSION,
        "dtype": "<f8",
        "layer_sizes": list(net.layer_sizes),
        "arrays": arrays,
    }
    prefix.with_suffix(".bin").write_bytes(bytes(blob))
    prefix.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")


def load_mlp(prefix: str | Path) -> Mlp:
    prefix = Path(prefix)
    sidecar = json.loads(prefix.with_suffix(".json").read_text())
    blob = prefix.with_suffix(".bin").read_bytes()
    net = Mlp.__new__(Mlp)
    net.layer_sizes = tuple(sidecar["layer_sizes"])
    net._allocate()
    for i, entry in enumerate(sidecar["arrays"]):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        flat = np.frombuffer(blob, dtype="<f8", count=count, offset=entry["offset"])
        net.params[i][...] = flat.reshape(shape)
    return net
