"""Sequence and graph encoders plus the MLP predictors they feed.

The sequence route embeds tokens and positions, runs pre-norm multi-head
attention blocks, and mean-pools over positions.  The graph route embeds
bead types and runs mean-neighborhood message passing, then mean-pools
over nodes.  Both emit a single d-vector per peptide.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import (
    NUM_BEAD_TYPES,
    BeadGraph,
    TokenSequence,
)

VOCAB_SIZE = 20

# Normalization floor for the attention blocks.  Chosen large enough that
# the encoder responds smoothly to uniform scaling of its input embedding;
# with a tiny floor the blocks are scale-invariant except in a narrow band
# near zero, which path-integrated attribution cannot resolve.
LAYER_NORM_EPS = 0.05

# Incremented by graphsage_encode; see data.GRAPH_BUILD_CALLS for the
# matching graph-construction counter.
GRAPH_ENCODE_CALLS = 0


def reset_graph_encode_counter() -> None:
    global GRAPH_ENCODE_CALLS
    GRAPH_ENCODE_CALLS = 0


def _uniform_init(rng: np.random.Generator, shape: tuple[int, ...],
                  fan_in: int) -> np.ndarray:
    bound = float(np.sqrt(1.0 / fan_in))
    return rng.uniform(-bound, bound, size=shape)


def _param(rng, shape, fan_in, name) -> Tensor:
    return Tensor(_uniform_init(rng, shape, fan_in), requires_grad=True, name=name)


def _zeros(shape, name) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


def _ones(shape, name) -> Tensor:
    return Tensor(np.ones(shape), requires_grad=True, name=name)


@dataclass
class AttentionBlockParams:
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    ff1: Tensor
    ff1_bias: Tensor
    ff2: Tensor
    ff2_bias: Tensor
    ln1_gain: Tensor
    ln1_bias: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor


@dataclass
class SeqEncoderParams:
    token_embedding: Tensor
    position_embedding: Tensor
    blocks: list[AttentionBlockParams]
    heads: int

    @property
    def hidden_dim(self) -> int:
        return self.token_embedding.shape[1]

    @property
    def max_len(self) -> int:
        return self.position_embedding.shape[0]

    @staticmethod
    def init(rng: np.random.Generator, d: int = 64, layers: int = 2,
             heads: int = 4, ff_dim: int = 128, max_len: int = 50) -> "SeqEncoderParams":
        if d % heads != 0:
            raise ValueError(f"heads ({heads}) must divide hidden dim ({d})")
        blocks = []
        for i in range(layers):
            blocks.append(AttentionBlockParams(
                wq=_param(rng, (d, d), d, f"blocks.{i}.wq"),
                wk=_param(rng, (d, d), d, f"blocks.{i}.wk"),
                wv=_param(rng, (d, d), d, f"blocks.{i}.wv"),
                wo=_param(rng, (d, d), d, f"blocks.{i}.wo"),
                ff1=_param(rng, (d, ff_dim), d, f"blocks.{i}.ff1"),
                ff1_bias=_zeros((ff_dim,), f"blocks.{i}.ff1_bias"),
                ff2=_param(rng, (ff_dim, d), ff_dim, f"blocks.{i}.ff2"),
                ff2_bias=_zeros((d,), f"blocks.{i}.ff2_bias"),
                ln1_gain=_ones((d,), f"blocks.{i}.ln1_gain"),
                ln1_bias=_zeros((d,), f"blocks.{i}.ln1_bias"),
                ln2_gain=_ones((d,), f"blocks.{i}.ln2_gain"),
                ln2_bias=_zeros((d,), f"blocks.{i}.ln2_bias"),
            ))
        return SeqEncoderParams(
            token_embedding=_param(rng, (VOCAB_SIZE, d), d, "token_embedding"),
            position_embedding=_param(rng, (max_len, d), d, "position_embedding"),
            blocks=blocks,
            heads=heads,
        )

    def named_parameters(self, prefix: str = "seq"):
        yield f"{prefix}.token_embedding", self.token_embedding
        yield f"{prefix}.position_embedding", self.position_embedding
        for i, b in enumerate(self.blocks):
            for fname in ("wq", "wk", "wv", "wo", "ff1", "ff1_bias", "ff2",
                          "ff2_bias", "ln1_gain", "ln1_bias", "ln2_gain", "ln2_bias"):
                yield f"{prefix}.blocks.{i}.{fname}", getattr(b, fname)


@dataclass
class GraphEncoderParams:
    bead_embedding: Tensor
    weights: list[Tensor]
    biases: list[Tensor]

    @property
    def hidden_dim(self) -> int:
        return self.bead_embedding.shape[1]

    @staticmethod
    def init(rng: np.random.Generator, d: int = 64,
             layers: int = 3) -> "GraphEncoderParams":
        if layers < 1:
            raise ValueError("graph encoder needs at least one layer")
        weights = [_param(rng, (2 * d, d), 2 * d, f"layers.{i}.weight")
                   for i in range(layers)]
        biases = [_zeros((d,), f"layers.{i}.bias") for i in range(layers)]
        return GraphEncoderParams(
            bead_embedding=_param(rng, (NUM_BEAD_TYPES, d), d, "bead_embedding"),
            weights=weights,
            biases=biases,
        )

    def named_parameters(self, prefix: str = "graph"):
        yield f"{prefix}.bead_embedding", self.bead_embedding
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            yield f"{prefix}.layers.{i}.weight", w
            yield f"{prefix}.layers.{i}.bias", b


@dataclass
class PredictorParams:
    weights: list[Tensor]
    biases: list[Tensor]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @staticmethod
    def init(rng: np.random.Generator, in_dim: int, out_dim: int,
             hidden: tuple[int, ...] = (64,)) -> "PredictorParams":
        dims = [in_dim, *hidden, out_dim]
        weights, biases = [], []
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            weights.append(_param(rng, (a, b), a, f"layers.{i}.weight"))
            biases.append(_zeros((b,), f"layers.{i}.bias"))
        return PredictorParams(weights=weights, biases=biases)

    def named_parameters(self, prefix: str):
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            yield f"{prefix}.layers.{i}.weight", w
            yield f"{prefix}.layers.{i}.bias", b


# ---------------------------------------------------------------------------
# forward passes
# ---------------------------------------------------------------------------

def embed_sequence(seq: TokenSequence, p: SeqEncoderParams) -> Tensor:
    """Token plus position embeddings: the continuous input the blocks consume."""
    if len(seq) > p.max_len:
        raise ValueError(
            f"sequence length {len(seq)} exceeds positional table of {p.max_len}"
        )
    tok = ad.embedding_gather(p.token_embedding, list(seq.tokens))
    pos = ad.embedding_gather(p.position_embedding, list(seq.positions))
    return ad.add(tok, pos)


def _attention(x: Tensor, b: AttentionBlockParams, heads: int) -> Tensor:
    n, d = x.shape
    dh = d // heads
    scaling = 1.0 / float(np.sqrt(dh))

    def split_heads(t: Tensor) -> Tensor:
        return ad.swapaxes(ad.reshape(t, (n, heads, dh)), 0, 1)

    q = split_heads(ad.matmul(x, b.wq))
    k = split_heads(ad.matmul(x, b.wk))
    v = split_heads(ad.matmul(x, b.wv))
    scores = ad.scale(ad.matmul(q, ad.swapaxes(k, 1, 2)), scaling)
    weights = ad.softmax(scores, axis=-1)
    ctx = ad.reshape(ad.swapaxes(ad.matmul(weights, v), 0, 1), (n, d))
    return ad.matmul(ctx, b.wo)


def _feed_forward(x: Tensor, b: AttentionBlockParams) -> Tensor:
    h = ad.leaky_relu(ad.add(ad.matmul(x, b.ff1), b.ff1_bias))
    return ad.add(ad.matmul(h, b.ff2), b.ff2_bias)


def encode_from_embedding(h: Tensor, p: SeqEncoderParams) -> Tensor:
    """Run the pre-norm attention blocks on an embedded sequence and pool."""
    x = h
    for b in p.blocks:
        a = _attention(ad.layer_norm(x, b.ln1_gain, b.ln1_bias,
                                     eps=LAYER_NORM_EPS), b, p.heads)
        x = ad.add(x, a)
        f = _feed_forward(ad.layer_norm(x, b.ln2_gain, b.ln2_bias,
                                        eps=LAYER_NORM_EPS), b)
        x = ad.add(x, f)
    return ad.mean_pool(x, axis=0)


def transformer_encode(seq: TokenSequence, p: SeqEncoderParams) -> Tensor:
    return encode_from_embedding(embed_sequence(seq, p), p)


def neighbor_mean_matrix(graph: BeadGraph) -> np.ndarray:
    """Row-normalized adjacency: row v averages v's neighbors.

    An isolated node gets an all-zero row, so its neighbor mean is the
    zero vector.
    """
    n = graph.num_nodes
    m = np.zeros((n, n))
    for u, v in graph.edges:
        m[u, v] = 1.0
        m[v, u] = 1.0
    deg = m.sum(axis=1, keepdims=True)
    np.divide(m, deg, out=m, where=deg > 0)
    return m


def embed_graph(graph: BeadGraph, p: GraphEncoderParams) -> Tensor:
    return ad.embedding_gather(p.bead_embedding, list(graph.node_types))


def encode_graph_from_embedding(h: Tensor, adjacency: np.ndarray,
                                p: GraphEncoderParams) -> Tensor:
    adj = Tensor(adjacency)
    x = h
    for w, b in zip(p.weights, p.biases):
        neigh = ad.matmul(adj, x)
        x = ad.leaky_relu(ad.add(ad.matmul(ad.concat([x, neigh], axis=1), w), b))
    return ad.mean_pool(x, axis=0)


def graphsage_encode(graph: BeadGraph, p: GraphEncoderParams) -> Tensor:
    global GRAPH_ENCODE_CALLS
    GRAPH_ENCODE_CALLS += 1
    if graph.num_nodes == 0:
        raise ValueError("cannot encode an empty graph")
    return encode_graph_from_embedding(embed_graph(graph, p),
                                       neighbor_mean_matrix(graph), p)


def mlp_predict(h: Tensor, p: PredictorParams) -> Tensor:
    """Affine stack with LeakyReLU between layers; raw output (no activation).

    Returns a scalar for a 1-wide head, else the logit vector.
    """
    if h.shape != (p.input_dim,):
        raise ad.ShapeError(
            f"predictor layer 0 expects input of shape ({p.input_dim},), got {h.shape}"
        )
    x = ad.reshape(h, (1, h.shape[0]))
    last = len(p.weights) - 1
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        if x.shape[1] != w.shape[0]:
            raise ad.ShapeError(
                f"predictor layer {i} expects width {w.shape[0]}, got {x.shape[1]}"
            )
        x = ad.add(ad.matmul(x, w), b)
        if i != last:
            x = ad.leaky_relu(x)
    out_dim = p.weights[-1].shape[1]
    return ad.reshape(x, ()) if out_dim == 1 else ad.reshape(x, (out_dim,))


# ---------------------------------------------------------------------------
# the co-model bundle
# ---------------------------------------------------------------------------

@dataclass
class CoModel:
    """Both encoders plus predictors, wired per the fusion configuration.

    The contrastive mode keeps one predictor per route; the other fusion
    kinds share a single predictor fed by the fused vector.
    """
    seq: SeqEncoderParams
    graph: GraphEncoderParams
    fusion: "FusionConfig"
    task: str
    pred_seq: PredictorParams | None = None
    pred_graph: PredictorParams | None = None
    pred_fused: PredictorParams | None = None

    def named_parameters(self):
        yield from self.seq.named_parameters("seq")
        yield from self.graph.named_parameters("graph")
        if self.pred_seq is not None:
            yield from self.pred_seq.named_parameters("pred_seq")
        if self.pred_graph is not None:
            yield from self.pred_graph.named_parameters("pred_graph")
        if self.pred_fused is not None:
            yield from self.pred_fused.named_parameters("pred_fused")

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]


def build_co_model(fusion: "FusionConfig", task: str, seed: int, d: int = 64,
                   heads: int = 4, seq_layers: int = 2, ff_dim: int = 128,
                   graph_layers: int = 3, predictor_hidden: tuple[int, ...] = (64,),
                   max_len: int = 50, n_classes: int = 2) -> CoModel:
    """Initialize a co-model; each component draws from its own seed stream.

    Component-wise seeding makes a route's initialization independent of
    which other components exist, so e.g. the sequence route of a co-model
    matches a sequence-only model built from the same seed.
    """
    from .fusion import FusionConfig  # noqa: F401 (typing only)

    out_dim = 1 if task == "regression" else n_classes
    streams = np.random.SeedSequence(seed).spawn(5)
    seq = SeqEncoderParams.init(np.random.default_rng(streams[0]), d=d,
                                layers=seq_layers, heads=heads, ff_dim=ff_dim,
                                max_len=max_len)
    graph = GraphEncoderParams.init(np.random.default_rng(streams[1]), d=d,
                                    layers=graph_layers)
    model = CoModel(seq=seq, graph=graph, fusion=fusion, task=task)
    if fusion.kind == "repcon":
        model.pred_seq = PredictorParams.init(np.random.default_rng(streams[2]),
                                              d, out_dim, predictor_hidden)
        model.pred_graph = PredictorParams.init(np.random.default_rng(streams[3]),
                                                d, out_dim, predictor_hidden)
    else:
        in_dim = 2 * d if fusion.kind == "concat" else d
        model.pred_fused = PredictorParams.init(np.random.default_rng(streams[4]),
                                                in_dim, out_dim, predictor_hidden)
    return model
