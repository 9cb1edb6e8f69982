"""Classification head and end-to-end training.

The extracted feature tensor is flattened and pushed through three
fully-connected layers (relu on the hidden layers, softmax on the output
so the cross-entropy loss is well defined), and every trainable array —
the subgraph templates included — is updated with Adam.  All gradients are
hand-derived reverse mode; nothing here depends on an autodiff framework.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .features import LayerConfig, backward_stack, forward_stack

DEFAULT_WIDTHS = (1024, 128, 2)


@dataclass
class MLPParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    @property
    def d_in(self) -> int:
        return self.w1.shape[0]


@dataclass
class LayerParams:
    kernels: np.ndarray  # (c, k, k)
    config: LayerConfig


@dataclass
class ModelParams:
    layers: list[LayerParams]
    mlp: MLPParams
    input_size: int  # adjacency side length the model expects


@dataclass
class TrainConfig:
    epochs: int
    learning_rate: float = 0.001
    batch_size: int = 16
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def feature_shape(input_size: int, specs: Sequence[tuple[int, int]]) -> tuple[int, int]:
    """(channels, grid) of the feature tensor a layer stack produces."""
    grid = input_size
    channels = 1
    for k, c in specs:
        grid = grid - k + 1
        if grid < 1:
            raise ValueError(f"kernel size {k} exhausts the grid (size {input_size}, specs {specs})")
        channels *= c
    return channels, grid


def init_mlp(d_in: int, widths=DEFAULT_WIDTHS, rng: np.random.Generator | None = None) -> MLPParams:
    """Scaled-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = rng if rng is not None else np.random.default_rng(0)

    def uniform(fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    h1, h2, out = widths
    return MLPParams(
        w1=uniform(d_in, h1),
        b1=np.zeros(h1),
        w2=uniform(h1, h2),
        b2=np.zeros(h2),
        w3=uniform(h2, out),
        b3=np.zeros(out),
    )


def build_model(
    input_size: int,
    layer_specs: Sequence[tuple[int, int]],
    widths=DEFAULT_WIDTHS,
    mode: str = "brute",
    softmax_axis: str = "per_kernel",
    seed: int = 0,
) -> ModelParams:
    """Fresh model for ``input_size``-node (padded) graphs.

    Kernels start uniform in [0, 1) so their entries live in the same range
    as adjacency values and initial match distances carry signal.
    """
    rng = np.random.default_rng(seed)
    layers = [
        LayerParams(
            kernels=rng.random((c, k, k)),
            config=LayerConfig(size_k=k, channels_c=c, mode=mode, softmax_axis=softmax_axis),
        )
        for k, c in layer_specs
    ]
    channels, grid = feature_shape(input_size, layer_specs)
    mlp = init_mlp(channels * grid * grid, widths, rng)
    return ModelParams(layers=layers, mlp=mlp, input_size=input_size)


def layer_pairs(model: ModelParams) -> list[tuple[np.ndarray, LayerConfig]]:
    return [(lp.kernels, lp.config) for lp in model.layers]


def flatten(q: np.ndarray) -> np.ndarray:
    """Channel-major, then row-major flattening of a (c, g, g) feature tensor."""
    return np.asarray(q).ravel()


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max())
    return e / e.sum()


@dataclass
class MLPCache:
    x: np.ndarray
    z1: np.ndarray
    d1: np.ndarray
    z2: np.ndarray
    d2: np.ndarray
    y_hat: np.ndarray


def forward_mlp(params: MLPParams, x: np.ndarray) -> tuple[np.ndarray, MLPCache]:
    if x.shape != (params.d_in,):
        raise ValueError(f"input has shape {x.shape}, expected ({params.d_in},)")
    z1 = x @ params.w1 + params.b1
    d1 = _relu(z1)
    z2 = d1 @ params.w2 + params.b2
    d2 = _relu(z2)
    logits = d2 @ params.w3 + params.b3
    y_hat = _softmax(logits)
    return y_hat, MLPCache(x, z1, d1, z2, d2, y_hat)


def one_hot(label: int) -> np.ndarray:
    """Class vector for a binary label: -1 -> (1, 0), +1 -> (0, 1)."""
    if label == -1:
        return np.array([1.0, 0.0])
    if label == 1:
        return np.array([0.0, 1.0])
    raise ValueError(f"label must be +1 or -1, got {label}")


def cross_entropy(y_hat: np.ndarray, y: np.ndarray) -> float:
    """Negative log-likelihood with the log argument floored at 1e-12."""
    y = np.asarray(y, dtype=float)
    if y.shape != y_hat.shape or not (
        np.all((y == 0.0) | (y == 1.0)) and np.count_nonzero(y) == 1
    ):
        raise ValueError(f"expected a one-hot vector of shape {y_hat.shape}, got {y}")
    return float(-(y * np.log(np.maximum(y_hat, 1e-12))).sum())


@dataclass
class MLPGrads:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray


@dataclass
class Gradients:
    layer_kernels: list[np.ndarray]
    mlp: MLPGrads


def backward_mlp(params: MLPParams, cache: MLPCache, y: np.ndarray) -> tuple[MLPGrads, np.ndarray]:
    """Gradients of the cross-entropy loss; also returns d(loss)/d(input)."""
    dlogits = cache.y_hat - y  # softmax + cross-entropy shortcut
    dw3 = np.outer(cache.d2, dlogits)
    db3 = dlogits
    dd2 = params.w3 @ dlogits
    dz2 = dd2 * (cache.z2 > 0)
    dw2 = np.outer(cache.d1, dz2)
    db2 = dz2
    dd1 = params.w2 @ dz2
    dz1 = dd1 * (cache.z1 > 0)
    dw1 = np.outer(cache.x, dz1)
    db1 = dz1
    dx = params.w1 @ dz1
    return MLPGrads(dw1, db1, dw2, db2, dw3, db3), dx


@dataclass
class FullCache:
    stack_cache: object
    q_shape: tuple
    mlp_cache: MLPCache


def forward_full(model: ModelParams, a: np.ndarray, threads: int = 1) -> tuple[np.ndarray, FullCache]:
    q, stack_cache = forward_stack(a, layer_pairs(model), threads=threads)
    y_hat, mlp_cache = forward_mlp(model.mlp, flatten(q))
    return y_hat, FullCache(stack_cache, q.shape, mlp_cache)


def backward_full(model: ModelParams, cache: FullCache, y: np.ndarray) -> Gradients:
    if cache is None or cache.mlp_cache is None:
        raise RuntimeError("backward_full requires the cache of a matching forward pass")
    mlp_grads, dx = backward_mlp(model.mlp, cache.mlp_cache, y)
    grad_q = dx.reshape(cache.q_shape)
    layer_grads = backward_stack(grad_q, cache.stack_cache, layer_pairs(model))
    return Gradients(layer_grads, mlp_grads)


def predict(model: ModelParams, a: np.ndarray, threads: int = 1) -> int:
    y_hat, _ = forward_full(model, a, threads=threads)
    return 1 if int(np.argmax(y_hat)) == 1 else -1


def named_parameters(model: ModelParams) -> list[tuple[str, np.ndarray]]:
    """Stable (name, array) listing of every trainable array, views not copies."""
    out = [(f"layers.{i}.kernels", lp.kernels) for i, lp in enumerate(model.layers)]
    m = model.mlp
    out += [
        ("mlp.w1", m.w1),
        ("mlp.b1", m.b1),
        ("mlp.w2", m.w2),
        ("mlp.b2", m.b2),
        ("mlp.w3", m.w3),
        ("mlp.b3", m.b3),
    ]
    return out


def named_gradients(grads: Gradients) -> list[tuple[str, np.ndarray]]:
    out = [(f"layers.{i}.kernels", g) for i, g in enumerate(grads.layer_kernels)]
    m = grads.mlp
    out += [
        ("mlp.w1", m.w1),
        ("mlp.b1", m.b1),
        ("mlp.w2", m.w2),
        ("mlp.b2", m.b2),
        ("mlp.w3", m.w3),
        ("mlp.b3", m.b3),
    ]
    return out


def add_gradients(total: Gradients, extra: Gradients) -> Gradients:
    for (_, t), (_, e) in zip(named_gradients(total), named_gradients(extra)):
        t += e
    return total


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def init_adam(model: ModelParams) -> AdamState:
    state = AdamState()
    for name, p in named_parameters(model):
        state.m[name] = np.zeros_like(p)
        state.v[name] = np.zeros_like(p)
    return state


def adam_step(model: ModelParams, grads: Gradients, state: AdamState, config: TrainConfig) -> None:
    """Standard bias-corrected Adam update, applied to the arrays in place."""
    state.step += 1
    t = state.step
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    grad_map = dict(named_gradients(grads))
    for name, p in named_parameters(model):
        g = grad_map[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)


def train(
    model: ModelParams,
    graphs: Sequence,
    config: TrainConfig,
    epoch_callback: Callable[[int, float], None] | None = None,
    threads: int = 1,
) -> list[float]:
    """Minibatch Adam over ``graphs`` (objects with .adjacency and .label).

    The loss is summed (not averaged) within each batch, and the per-epoch
    trace records the total loss over all samples of the epoch.  With a
    fixed seed and a single thread the run is fully deterministic.
    """
    if len(graphs) == 0:
        raise ValueError("training set is empty")
    rng = np.random.default_rng(config.seed)
    state = init_adam(model)
    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(graphs))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch_grads = None
            for idx in order[start : start + config.batch_size]:
                graph = graphs[int(idx)]
                y = one_hot(graph.label)
                y_hat, cache = forward_full(model, graph.adjacency, threads=threads)
                epoch_loss += cross_entropy(y_hat, y)
                g = backward_full(model, cache, y)
                batch_grads = g if batch_grads is None else add_gradients(batch_grads, g)
            adam_step(model, batch_grads, state, config)
        trace.append(epoch_loss)
        if epoch_callback is not None:
            epoch_callback(epoch, epoch_loss)
    return trace
