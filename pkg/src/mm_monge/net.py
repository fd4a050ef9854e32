"""Fully connected feed-forward maps R^d -> R^d with hand-written backprop.

Parameters of a network live in one flat float64 buffer; the per-layer
weight and bias arrays are views into it.  This lets an optimizer update
the whole ensemble with a single vector operation.

Binary checkpoint layout (little-endian)::

    magic   8 bytes   b"MMMONGE1"
    n_maps  uint32
    per map:
        in_dim, out_dim, n_hidden   uint32 x 3
        hidden widths               uint32 x n_hidden
        activation                  uint32 (0 = relu, 1 = tanh)
    then for each map, for each layer in order: W (row-major, out x in)
    followed by b, as float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensor_rng import Rng, SizeError, as_matrix

__all__ = [
    "MlpSpec",
    "MlpParams",
    "Tape",
    "TapeError",
    "MapEnsemble",
    "init",
    "forward",
    "backward",
    "save_checkpoint",
    "load_checkpoint",
]

ACTIVATIONS = ("relu", "tanh")
_MAGIC = b"MMMONGE1"


class TapeError(RuntimeError):
    """A tape was used with parameters other than the ones that produced it."""


@dataclass(frozen=True)
class MlpSpec:
    in_dim: int
    hidden: tuple[int, ...] = (128, 128)
    out_dim: int | None = None
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.out_dim is None:
            object.__setattr__(self, "out_dim", self.in_dim)
        if self.in_dim < 1 or self.out_dim != self.in_dim:
            raise ValueError("maps must send R^d to R^d with d >= 1")
        if not self.hidden or min(self.hidden) < 1:
            raise ValueError("need at least one hidden layer, all widths >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.in_dim, *self.hidden, self.out_dim)

    @property
    def n_params(self) -> int:
        w = self.widths
        return sum(w[i + 1] * w[i] + w[i + 1] for i in range(len(w) - 1))


def _layer_views(spec: MlpSpec, flat: np.ndarray):
    layers = []
    off = 0
    w = spec.widths
    for i in range(len(w) - 1):
        n_out, n_in = w[i + 1], w[i]
        W = flat[off:off + n_out * n_in].reshape(n_out, n_in)
        off += n_out * n_in
        b = flat[off:off + n_out]
        off += n_out
        layers.append((W, b))
    return layers


class MlpParams:
    """Weights ``W_l`` (D_l x D_{l-1}) and biases ``b_l`` as views into ``flat``."""

    def __init__(self, spec: MlpSpec, flat: np.ndarray | None = None):
        if flat is None:
            flat = np.zeros(spec.n_params)
        if flat.shape != (spec.n_params,):
            raise SizeError(f"expected {spec.n_params} parameters, got {flat.shape}")
        self.spec = spec
        self.flat = flat
        self.layers = _layer_views(spec, flat)
        self.version = 0

    def touch(self):
        """Mark the parameters as modified; invalidates earlier tapes."""
        self.version += 1


def init(spec: MlpSpec, rng: Rng, flat: np.ndarray | None = None) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    params = MlpParams(spec, flat)
    for W, b in params.layers:
        fan_out, fan_in = W.shape
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        W[...] = (2.0 * rng.uniform(W.size) - 1.0).reshape(W.shape) * bound
        b[...] = 0.0
    params.touch()
    return params


@dataclass
class Tape:
    params_id: int
    version: int
    inputs: list = field(default_factory=list)  # input to each affine layer
    pre: list = field(default_factory=list)  # hidden pre-activations
    out_shape: tuple = ()


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_grad(name, z, a):
    if name == "relu":
        return (z > 0.0).astype(np.float64)  # subgradient 0 at the kink
    return 1.0 - a * a


def forward(spec: MlpSpec, params: MlpParams, x):
    x = as_matrix(x, "x")
    if x.shape[1] != spec.in_dim:
        raise SizeError(f"input has {x.shape[1]} columns, network expects {spec.in_dim}")
    tape = Tape(id(params), params.version)
    h = x
    n = len(params.layers)
    for i, (W, b) in enumerate(params.layers):
        tape.inputs.append(h)
        z = h @ W.T + b
        if i < n - 1:
            tape.pre.append(z)
            h = _act(spec.activation, z)
        else:
            h = z
    tape.out_shape = h.shape
    return h, tape


def backward(spec: MlpSpec, params: MlpParams, tape: Tape, upstream):
    """Gradients of ``sum(upstream * y)``.

    Returns ``(grad_flat, grad_x)`` where ``grad_flat`` is laid out like
    ``params.flat``.
    """
    if tape.params_id != id(params) or tape.version != params.version:
        raise TapeError("tape does not belong to the current parameters")
    upstream = as_matrix(upstream, "upstream")
    if upstream.shape != tape.out_shape:
        raise SizeError(f"upstream shape {upstream.shape} != output shape {tape.out_shape}")
    grad_flat = np.zeros_like(params.flat)
    grads = _layer_views(spec, grad_flat)
    g = upstream
    for i in range(len(params.layers) - 1, -1, -1):
        W, _ = params.layers[i]
        gW, gb = grads[i]
        gW[...] = g.T @ tape.inputs[i]
        gb[...] = g.sum(axis=0)
        g = g @ W
        if i > 0:
            z = tape.pre[i - 1]
            g = g * _act_grad(spec.activation, z, tape.inputs[i])
    return grad_flat, g


class MapEnsemble:
    """Maps ``T_2, ..., T_N``; ``T_1`` is the identity and is not stored.

    All parameters share one flat buffer, ``self.flat``.
    """

    def __init__(self, specs: list[MlpSpec], flat: np.ndarray | None = None):
        if not specs:
            raise ValueError("need at least one map")
        d = specs[0].in_dim
        if any(s.in_dim != d for s in specs):
            raise ValueError("all maps must share the same dimension")
        self.specs = list(specs)
        sizes = [s.n_params for s in specs]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        if flat is None:
            flat = np.zeros(self.offsets[-1])
        if flat.shape != (self.offsets[-1],):
            raise SizeError(f"expected {self.offsets[-1]} parameters, got {flat.shape}")
        self.flat = flat
        self.params = [
            MlpParams(s, flat[self.offsets[i]:self.offsets[i + 1]])
            for i, s in enumerate(specs)
        ]

    @classmethod
    def initialize(cls, specs: list[MlpSpec], rng: Rng) -> "MapEnsemble":
        ens = cls(specs)
        for s, p in zip(ens.specs, ens.params):
            init(s, rng, p.flat)
            p.touch()
        return ens

    @property
    def dim(self) -> int:
        return self.specs[0].in_dim

    def __len__(self):
        return len(self.specs)

    def touch(self):
        for p in self.params:
            p.touch()

    def push(self, x) -> list[np.ndarray]:
        """``[T_2(x), ..., T_N(x)]``."""
        return [forward(s, p, x)[0] for s, p in zip(self.specs, self.params)]

    def copy(self) -> "MapEnsemble":
        return MapEnsemble(self.specs, self.flat.copy())


def save_checkpoint(path, ens: MapEnsemble) -> None:
    parts = [_MAGIC, struct.pack("<I", len(ens.specs))]
    for s in ens.specs:
        parts.append(struct.pack("<III", s.in_dim, s.out_dim, len(s.hidden)))
        parts.append(struct.pack(f"<{len(s.hidden)}I", *s.hidden))
        parts.append(struct.pack("<I", ACTIVATIONS.index(s.activation)))
    parts.append(ens.flat.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path) -> MapEnsemble:
    buf = Path(path).read_bytes()
    if buf[:8] != _MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    off = 8
    (n_maps,) = struct.unpack_from("<I", buf, off)
    off += 4
    specs = []
    for _ in range(n_maps):
        in_dim, out_dim, nh = struct.unpack_from("<III", buf, off)
        off += 12
        hidden = struct.unpack_from(f"<{nh}I", buf, off)
        off += 4 * nh
        (act,) = struct.unpack_from("<I", buf, off)
        off += 4
        specs.append(MlpSpec(in_dim, tuple(hidden), out_dim, ACTIVATIONS[act]))
    flat = np.frombuffer(buf, dtype="<f8", offset=off).astype(np.float64)
    return MapEnsemble(specs, flat)
