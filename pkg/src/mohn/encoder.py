"""MLP encoder with hand-written forward/backward and the EMA-coupled key copy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidSpec, StaleCache
from .numeric import l2_normalize_rows
from .rng import make_rng

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class EncoderSpec:
    layer_dims: tuple[int, ...] = (64, 128, 64)
    activation: str = "relu"

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        object.__setattr__(self, "layer_dims", dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise InvalidSpec(f"layer_dims needs >= 2 positive entries, got {list(dims)}")
        if self.activation not in ACTIVATIONS:
            raise InvalidSpec(f"unknown activation {self.activation!r}")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def embed_dim(self) -> int:
        return self.layer_dims[-1]


@dataclass
class EncoderParams:
    """Per layer ``weights[l]`` is (out, in) and ``biases[l]`` is (out,)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def tensors(self) -> list[np.ndarray]:
        """Flat list of all parameter arrays, layer order, weight before bias."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "EncoderParams":
        return EncoderParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self) -> "EncoderParams":
        return EncoderParams([np.zeros_like(w) for w in self.weights],
                             [np.zeros_like(b) for b in self.biases])

    def shapes(self) -> list[tuple[int, ...]]:
        return [t.shape for t in self.tensors()]

    def check_spec(self, spec: EncoderSpec) -> None:
        expected = []
        for fan_in, fan_out in zip(spec.layer_dims[:-1], spec.layer_dims[1:]):
            expected.extend([(fan_out, fan_in), (fan_out,)])
        if self.shapes() != expected:
            raise InvalidSpec(f"parameter shapes {self.shapes()} do not match {spec}")
        if not all(np.all(np.isfinite(t)) for t in self.tensors()):
            raise InvalidSpec("non-finite parameter entries")


def init_params(spec: EncoderSpec, seed: int) -> EncoderParams:
    """Glorot-uniform weights, zero biases, deterministic in ``seed``."""
    if not isinstance(spec, EncoderSpec):
        spec = EncoderSpec(tuple(spec))
    rng = make_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_dims[:-1], spec.layer_dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return EncoderParams(weights, biases)


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]  # input to each affine layer
    preacts: list[np.ndarray]  # affine output of each layer
    norms: np.ndarray  # norm of each final pre-normalization row
    output: np.ndarray  # unit rows
    activation: str


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_grad(name, z, a):
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    return 1.0 - a * a


def forward(params: EncoderParams, batch, activation: str = "relu"):
    """Embed a (B, in) batch. Returns (unit rows (B, D), cache for :func:`backward`).

    The activation is applied after every affine layer except the last; the
    last layer's output is L2-normalized per row.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.weights[0].shape[1]:
        raise DimensionMismatch(
            f"batch shape {x.shape} incompatible with input dim {params.weights[0].shape[1]}")
    inputs, preacts = [], []
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        z = h @ w.T + b
        preacts.append(z)
        h = z if i == last else _act(activation, z)
    out, norms = l2_normalize_rows(h)
    return out, ForwardCache(inputs, preacts, norms, out, activation)


def backward(params: EncoderParams, cache: ForwardCache, grad_output) -> EncoderParams:
    """Gradients of a scalar loss w.r.t. every parameter, given dL/d(output)."""
    g = np.asarray(grad_output, dtype=np.float64)
    if (len(cache.preacts) != len(params.weights) or g.shape != cache.output.shape
            or any(z.shape[1] != w.shape[0] for z, w in zip(cache.preacts, params.weights))
            or any(h.shape[1] != w.shape[1] for h, w in zip(cache.inputs, params.weights))):
        raise StaleCache("cache does not match parameters or grad_output shape")
    u = cache.output
    # Jacobian of x -> x/|x| is (I - u u^T)/|x|
    radial = np.einsum("ij,ij->i", g, u)
    dz = (g - radial[:, None] * u) / cache.norms[:, None]
    gw = [None] * len(params.weights)
    gb = [None] * len(params.weights)
    for i in range(len(params.weights) - 1, -1, -1):
        gw[i] = dz.T @ cache.inputs[i]
        gb[i] = dz.sum(axis=0)
        if i > 0:
            dh = dz @ params.weights[i]
            z_prev = cache.preacts[i - 1]
            dz = dh * _act_grad(cache.activation, z_prev, cache.inputs[i])
    return EncoderParams(gw, gb)


@dataclass
class EncoderPair:
    spec: EncoderSpec
    query_params: EncoderParams
    key_params: EncoderParams
    momentum_coefficient: float = 0.99

    @classmethod
    def create(cls, spec: EncoderSpec, seed: int, momentum_coefficient: float = 0.99):
        query = init_params(spec, seed)
        # key encoder starts as an exact copy
        return cls(spec, query, query.copy(), momentum_coefficient)

    def embed_query(self, batch):
        return forward(self.query_params, batch, self.spec.activation)

    def embed_key(self, batch) -> np.ndarray:
        out, _ = forward(self.key_params, batch, self.spec.activation)
        return out


def momentum_update(pair: EncoderPair) -> EncoderParams:
    """In place: key <- m * key + (1 - m) * query. Returns the key params."""
    m = float(pair.momentum_coefficient)
    if not 0.0 <= m <= 1.0:
        raise ValueError(f"momentum coefficient {m} outside [0, 1]")
    for k, q in zip(pair.key_params.tensors(), pair.query_params.tensors()):
        if m == 1.0:
            continue
        if m == 0.0:
            k[...] = q
        else:
            k *= m
            k += (1.0 - m) * q
    return pair.key_params
