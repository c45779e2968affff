"""Bag classifier: instance embedding, attention pooling, sigmoid head.

The forward pass embeds each instance, scores it with the two-layer
attention network f(z) = wᵀ tanh(V z), normalizes scores to weights with a
softmax over the bag, pools the embeddings with those weights and maps the
bag embedding to a probability with a single affine layer + sigmoid.
Max/mean pooling baselines bypass the attention block entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

POOLINGS = ("attention", "max", "mean")


@dataclass(frozen=True)
class ModelConfig:
    """Network sizes. ``embed_dims`` lists hidden-layer widths; the last
    entry is the embedding dimension D. An empty tuple means the identity
    embedding (D = input_dim)."""

    input_dim: int
    embed_dims: tuple = (16,)
    att_dim: int = 8
    pooling: str = "attention"

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be positive, got {self.input_dim}")
        if any(d < 1 for d in self.embed_dims):
            raise ValueError(f"embed_dims must be positive, got {self.embed_dims}")
        if len(self.embed_dims) > 3:
            raise ValueError("at most 3 embedding layers are supported")
        if self.att_dim < 1:
            raise ValueError(f"att_dim must be positive, got {self.att_dim}")
        if self.pooling not in POOLINGS:
            raise ValueError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")

    @property
    def feature_dim(self) -> int:
        return self.embed_dims[-1] if self.embed_dims else self.input_dim


def _glorot(rng: np.random.Generator, shape: tuple, fan_in: int, fan_out: int) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


@dataclass
class ModelParams:
    """Trainable tensors. V is att_dim x D, w has length att_dim; embedding
    weights are stored (in, out) so the forward pass is Z @ W + b."""

    embed_layers: list = field(default_factory=list)  # [(W, b), ...]
    V: Tensor = None
    w: Tensor = None
    clf_w: Tensor = None
    clf_b: Tensor = None

    @classmethod
    def init(cls, cfg: ModelConfig, seed) -> "ModelParams":
        rng = np.random.default_rng(seed)
        layers = []
        d_in = cfg.input_dim
        for d_out in cfg.embed_dims:
            W = Tensor(_glorot(rng, (d_in, d_out), d_in, d_out))
            b = Tensor(np.zeros(d_out))
            layers.append((W, b))
            d_in = d_out
        D = cfg.feature_dim
        L = cfg.att_dim
        return cls(
            embed_layers=layers,
            V=Tensor(_glorot(rng, (L, D), D, L)),
            w=Tensor(_glorot(rng, (L,), L, 1)),
            clf_w=Tensor(_glorot(rng, (D,), D, 1)),
            clf_b=Tensor(np.zeros(())),
        )

    def trainables(self) -> list:
        out = []
        for W, b in self.embed_layers:
            out.extend((W, b))
        out.extend((self.V, self.w, self.clf_w, self.clf_b))
        return out

    def named(self) -> dict:
        names = {}
        for i, (W, b) in enumerate(self.embed_layers):
            names[f"embed.{i}.W"] = W
            names[f"embed.{i}.b"] = b
        names.update({"V": self.V, "w": self.w, "clf_w": self.clf_w, "clf_b": self.clf_b})
        return names

    def copy(self) -> "ModelParams":
        return ModelParams(
            embed_layers=[(Tensor(W.data.copy()), Tensor(b.data.copy()))
                          for W, b in self.embed_layers],
            V=Tensor(self.V.data.copy()),
            w=Tensor(self.w.data.copy()),
            clf_w=Tensor(self.clf_w.data.copy()),
            clf_b=Tensor(self.clf_b.data.copy()),
        )

    @property
    def input_dim(self) -> int:
        if self.embed_layers:
            return self.embed_layers[0][0].shape[0]
        return self.V.shape[1]


@dataclass
class BagForward:
    """One forward pass. f and s are None under max/mean pooling."""

    Z: Tensor
    f: Tensor | None
    s: Tensor | None
    bag_embedding: Tensor
    prob: Tensor


def embed(features, params: ModelParams) -> Tensor:
    """Per-instance embeddings, one row per instance, bag order preserved."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2:
        raise ValueError(f"features must be an instances x dims matrix, got shape {feats.shape}")
    if feats.shape[1] != params.input_dim:
        raise ValueError(
            f"instance feature dimension {feats.shape[1]} does not match model input {params.input_dim}")
    Z = Tensor(feats)
    for W, b in params.embed_layers:
        Z = ad.tanh(ad.add(ad.matmul(Z, W), b))
    return Z


def attention_values(Z: Tensor, V: Tensor, w: Tensor) -> Tensor:
    """Unnormalized per-instance scores f_i = wᵀ tanh(V z_i)."""
    return ad.matmul(ad.tanh(ad.matmul(Z, ad.transpose(V))), w)


def attention_weights(f: Tensor) -> Tensor:
    """Softmax of the attention values within one bag; sums to 1."""
    return ad.softmax(f)


def attention_pool(Z: Tensor, s: Tensor) -> Tensor:
    """Weighted average of instance embeddings, Σ_i s_i z_i."""
    if s.ndim != 1 or Z.ndim != 2 or s.shape[0] != Z.shape[0]:
        raise ValueError(f"attention_pool: weights shape {s.shape} does not match embeddings {Z.shape}")
    return ad.matmul(s, Z)


def pool_baseline(Z: Tensor, mode: str) -> Tensor:
    """Per-dimension max or mean over instances."""
    if mode == "max":
        return ad.reduce_max(Z, axis=0)
    if mode == "mean":
        return ad.reduce_mean(Z, axis=0)
    raise ValueError(f"pooling baseline must be 'max' or 'mean', got {mode!r}")


def forward(features, params: ModelParams, pooling: str = "attention") -> BagForward:
    """Full bag pass; prob is a strictly-(0,1) scalar tensor."""
    if pooling not in POOLINGS:
        raise ValueError(f"pooling must be one of {POOLINGS}, got {pooling!r}")
    Z = embed(features, params)
    if pooling == "attention":
        f = attention_values(Z, params.V, params.w)
        s = attention_weights(f)
        bag_embedding = attention_pool(Z, s)
    else:
        f = s = None
        bag_embedding = pool_baseline(Z, pooling)
    logit = ad.add(ad.matmul(bag_embedding, params.clf_w), params.clf_b)
    prob = ad.sigmoid(logit)
    return BagForward(Z=Z, f=f, s=s, bag_embedding=bag_embedding, prob=prob)
