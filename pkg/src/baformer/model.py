"""Boundary-aware query Transformer: frame decoder, query decoder, heads.

The frame decoder is a stack of dilated temporal-convolution residual blocks
(dilation doubles per block).  The deepest ``decoder_layers`` block outputs
feed the query decoder, one per layer, unless ``feature_connection`` is
``"single_level"`` in which case every layer reads the last block.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import numeric as nm
from .errors import ConfigError, ShapeError

FEATURE_CONNECTIONS = ("multi_level", "single_level")
GLOBAL_QUERY_MODES = ("mlp_aggregate", "mean", "class_token")


@dataclass
class ModelConfig:
    num_queries: int = 20
    num_classes: int = 5
    input_dim: int = 32
    hidden: int = 64
    frame_layers: int = 6
    decoder_layers: int = 5
    heads: int = 2
    ffn_dim: int = 128
    feature_connection: str = "multi_level"
    global_query_mode: str = "mlp_aggregate"
    init_std: float = 0.02

    def validate(self):
        if self.num_queries < 1:
            raise ConfigError("model.num_queries must be >= 1")
        if self.num_classes < 1:
            raise ConfigError("model.num_classes must be >= 1")
        if self.hidden < 1 or self.input_dim < 1 or self.ffn_dim < 1:
            raise ConfigError("model dimensions must be >= 1")
        if self.decoder_layers < 1 or self.decoder_layers > self.frame_layers:
            raise ConfigError("model: need 1 <= decoder_layers <= frame_layers")
        if self.heads < 1 or self.hidden % self.heads:
            raise ConfigError(f"model.heads={self.heads} must divide hidden={self.hidden}")
        if self.feature_connection not in FEATURE_CONNECTIONS:
            raise ConfigError(f"model.feature_connection must be one of {FEATURE_CONNECTIONS}")
        if self.global_query_mode not in GLOBAL_QUERY_MODES:
            raise ConfigError(f"model.global_query_mode must be one of {GLOBAL_QUERY_MODES}")

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class ModelOutputs:
    """Per decoder layer: class probs (M x K+1), masks (M x T), boundary (1 x T)."""

    class_probs: list = field(default_factory=list)
    mask_probs: list = field(default_factory=list)
    boundary_probs: list = field(default_factory=list)
    initial_masks: object = None

    @property
    def num_layers(self) -> int:
        return len(self.class_probs)

    def final(self):
        """Last layer's ``(P^c, P^m, P^b)`` as plain arrays."""
        return (
            self.class_probs[-1].data,
            self.mask_probs[-1].data,
            self.boundary_probs[-1].data.reshape(-1),
        )


class _Registry:
    def __init__(self, rng, std):
        self.rng = rng
        self.std = std
        self.params = {}

    def normal(self, name, shape):
        return self._add(name, self.rng.standard_normal(shape) * self.std)

    def const(self, name, shape, value):
        return self._add(name, np.full(shape, float(value)))

    def _add(self, name, value):
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name}")
        p = nm.Parameter(value, name)
        self.params[name] = p
        return p


class Linear:
    def __init__(self, reg, name, n_in, n_out, bias=True):
        self.weight = reg.normal(f"{name}.weight", (n_in, n_out))
        self.bias = reg.const(f"{name}.bias", (1, n_out), 0.0) if bias else None

    def __call__(self, x):
        y = nm.matmul(x, self.weight)
        return y if self.bias is None else nm.add(y, self.bias)


class LayerNorm:
    def __init__(self, reg, name, dim):
        self.gain = reg.const(f"{name}.gain", (1, dim), 1.0)
        self.shift = reg.const(f"{name}.shift", (1, dim), 0.0)

    def __call__(self, x):
        return nm.add(nm.hadamard(nm.layer_norm(x), self.gain), self.shift)


class MLP:
    """Three linear layers with ReLU between them."""

    def __init__(self, reg, name, dim):
        self.layers = [Linear(reg, f"{name}.{i}", dim, dim) for i in range(3)]

    def __call__(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < 2:
                x = nm.relu(x)
        return x


class FrameBlock:
    def __init__(self, reg, name, dim, dilation):
        self.dilation = dilation
        self.conv = Linear(reg, f"{name}.conv", 3 * dim, dim)
        self.pointwise = Linear(reg, f"{name}.pointwise", dim, dim)
        self.norm = LayerNorm(reg, f"{name}.norm", dim)

    def __call__(self, x):
        h = nm.relu(self.conv(nm.temporal_stack(x, self.dilation)))
        return self.norm(nm.add(x, self.pointwise(h)))


def _split_heads(x, heads):
    width = x.shape[1] // heads
    return [nm.cols(x, h * width, (h + 1) * width) for h in range(heads)]


class DecoderLayer:
    def __init__(self, reg, name, cfg: ModelConfig):
        C = cfg.hidden
        self.heads = cfg.heads
        self.dim = C
        self.ma_q = Linear(reg, f"{name}.mask_attn.q", C, C)
        self.ma_k = Linear(reg, f"{name}.mask_attn.k", C, C)
        self.ma_v = Linear(reg, f"{name}.mask_attn.v", C, C)
        self.ma_out = Linear(reg, f"{name}.mask_attn.out", C, C)
        self.norm1 = LayerNorm(reg, f"{name}.norm1", C)
        self.sa_q = Linear(reg, f"{name}.self_attn.q", C, C)
        # a key bias only shifts each softmax row by a constant, so it is left out
        self.sa_k = Linear(reg, f"{name}.self_attn.k", C, C, bias=False)
        self.sa_v = Linear(reg, f"{name}.self_attn.v", C, C)
        self.sa_out = Linear(reg, f"{name}.self_attn.out", C, C)
        self.norm2 = LayerNorm(reg, f"{name}.norm2", C)
        self.ffn1 = Linear(reg, f"{name}.ffn.0", C, cfg.ffn_dim)
        self.ffn2 = Linear(reg, f"{name}.ffn.1", cfg.ffn_dim, C)
        self.norm3 = LayerNorm(reg, f"{name}.norm3", C)

    def attention_weights(self, q_prev, feats, masks_prev):
        """Per-head T-wise attention rows and the value slices they mix."""
        q_prev, feats, masks_prev = nm._wrap(q_prev), nm._wrap(feats), nm._wrap(masks_prev)
        if q_prev.shape[1] != self.dim or feats.shape[1] != self.dim:
            raise ShapeError("mask_attention", f"queries {q_prev.shape}, features {feats.shape}, C={self.dim}")
        if masks_prev.shape != (q_prev.shape[0], feats.shape[0]):
            raise ShapeError("mask_attention", f"mask {masks_prev.shape} vs {(q_prev.shape[0], feats.shape[0])}")
        modulation = nm.scale(masks_prev, 1.0 / math.sqrt(self.dim))
        qs = _split_heads(self.ma_q(q_prev), self.heads)
        ks = _split_heads(self.ma_k(feats), self.heads)
        vs = _split_heads(self.ma_v(feats), self.heads)
        attn = [nm.row_softmax(nm.hadamard(modulation, nm.matmul(q, nm.transpose(k)))) for q, k in zip(qs, ks)]
        return attn, vs

    def mask_attention(self, q_prev, feats, masks_prev):
        """Soft-masked cross attention from queries to frames, plus residual."""
        attn, vs = self.attention_weights(q_prev, feats, masks_prev)
        outs = [nm.matmul(a, v) for a, v in zip(attn, vs)]
        mixed = outs[0] if len(outs) == 1 else nm.hconcat(outs)
        return nm.add(self.ma_out(mixed), nm._wrap(q_prev))

    def self_attention(self, x):
        scale = 1.0 / math.sqrt(self.dim // self.heads)
        qs = _split_heads(self.sa_q(x), self.heads)
        ks = _split_heads(self.sa_k(x), self.heads)
        vs = _split_heads(self.sa_v(x), self.heads)
        outs = []
        for q, k, v in zip(qs, ks, vs):
            attn = nm.row_softmax(nm.scale(nm.matmul(q, nm.transpose(k)), scale))
            outs.append(nm.matmul(attn, v))
        mixed = outs[0] if len(outs) == 1 else nm.hconcat(outs)
        return nm.add(self.sa_out(mixed), x)

    def __call__(self, q_prev, feats, masks_prev):
        x = self.norm1(self.mask_attention(q_prev, feats, masks_prev))
        x = self.norm2(self.self_attention(x))
        ff = self.ffn2(nm.relu(self.ffn1(x)))
        return self.norm3(nm.add(ff, x))


class BaFormer:
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        reg = _Registry(np.random.default_rng(seed), cfg.init_std)
        C, M = cfg.hidden, cfg.num_queries
        self.in_proj = Linear(reg, "frame.in_proj", cfg.input_dim, C)
        self.blocks = [FrameBlock(reg, f"frame.block{l}", C, 2 ** l) for l in range(cfg.frame_layers)]
        self.out_proj = Linear(reg, "frame.out_proj", C, C)
        self.queries = reg.normal("decoder.queries", (M, C))
        self.class_token = reg.normal("decoder.class_token", (1, C)) if cfg.global_query_mode == "class_token" else None
        self.layers = [DecoderLayer(reg, f"decoder.layer{i}", cfg) for i in range(cfg.decoder_layers)]
        self.class_head = Linear(reg, "head.class", C, cfg.num_classes + 1)
        self.mask_mlp = MLP(reg, "head.mask_mlp", C)
        self.boundary_mlp = MLP(reg, "head.boundary_mlp", C)
        self.boundary_agg = Linear(reg, "head.boundary_agg", M, 1) if cfg.global_query_mode == "mlp_aggregate" else None
        self.params = reg.params

    # ------------------------------------------------------------------ api

    def parameters(self) -> list:
        return list(self.params.values())

    def state_dict(self) -> dict:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_dict(self, state: dict):
        missing = set(self.params) - set(state)
        extra = set(state) - set(self.params)
        if missing or extra:
            raise ValueError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, p in self.params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.data.shape:
                raise ShapeError("load_state_dict", f"{name}: {value.shape} vs {p.data.shape}")
            p.data = value.copy()

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    # -------------------------------------------------------------- forward

    def frame_decode(self, features):
        """Return ``(F_d, pyramid)``; pyramid has one T x C entry per decoder layer."""
        features = nm._wrap(features)
        if features.shape[1] != self.cfg.input_dim:
            raise ShapeError("frame_decode", f"feature width {features.shape[1]} != input_dim {self.cfg.input_dim}")
        x = self.in_proj(features)
        block_outs = []
        for block in self.blocks:
            x = block(x)
            block_outs.append(x)
        frame_emb = self.out_proj(x)
        L, D = self.cfg.frame_layers, self.cfg.decoder_layers
        if self.cfg.feature_connection == "single_level":
            pyramid = [block_outs[-1]] * D
        else:
            pyramid = [block_outs[i + L - D] for i in range(D)]
        return frame_emb, pyramid

    def mask_head(self, queries, frame_emb):
        return nm.sigmoid(nm.matmul(self.mask_mlp(queries), nm.transpose(frame_emb)))

    def class_probs(self, queries):
        return nm.row_softmax(self.class_head(queries))

    def global_query(self, queries, token=None):
        if self.cfg.global_query_mode == "class_token":
            return self.boundary_mlp(token)
        emb = self.boundary_mlp(queries)
        if self.cfg.global_query_mode == "mean":
            return nm.scale(nm.matmul(np.ones((1, queries.shape[0])), emb), 1.0 / queries.shape[0])
        return nm.transpose(self.boundary_agg(nm.transpose(emb)))

    def output_heads(self, queries, frame_emb, token=None):
        """Class, mask and boundary probabilities for one set of queries."""
        queries, frame_emb = nm._wrap(queries), nm._wrap(frame_emb)
        if queries.shape[1] != self.cfg.hidden or frame_emb.shape[1] != self.cfg.hidden:
            raise ShapeError("output_heads", f"queries {queries.shape}, frames {frame_emb.shape}")
        pc = self.class_probs(queries)
        pm = self.mask_head(queries, frame_emb)
        pb = nm.sigmoid(nm.matmul(self.global_query(queries, token), nm.transpose(frame_emb)))
        return pc, pm, pb

    def forward(self, features, queries=None) -> ModelOutputs:
        """Run the whole network.  ``queries`` overrides the learned Q_0."""
        frame_emb, pyramid = self.frame_decode(features)
        q = self.queries if queries is None else nm._wrap(queries)
        M = q.shape[0]
        masks = self.mask_head(q, frame_emb)
        out = ModelOutputs(initial_masks=masks)
        use_token = self.class_token is not None
        if use_token:
            q = nm.vconcat([q, self.class_token])
        for layer, feats in zip(self.layers, pyramid):
            if use_token:
                masks = nm.vconcat([masks, np.ones((1, masks.shape[1]))])
            q = layer(q, feats, masks)
            if use_token:
                inst, token = nm.rows(q, np.arange(M)), nm.rows(q, [M])
            else:
                inst, token = q, None
            pc, pm, pb = self.output_heads(inst, frame_emb, token)
            out.class_probs.append(pc)
            out.mask_probs.append(pm)
            out.boundary_probs.append(pb)
            masks = pm
        return out

    __call__ = forward
