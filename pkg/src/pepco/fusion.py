"""Fusion of sequence and graph representations.

Four operators merge the two routes' vectors into one input for a shared
predictor (weighted sum, concatenation, cross attention, compact bilinear
pooling).  The fifth mode, ``repcon``, fuses by regularization instead: a
temperature-scaled contrastive loss pulls the two representations of the
same peptide together and pushes apart representations of different
in-batch peptides, while each route keeps its own predictor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

FUSION_KINDS = ("ws", "concat", "ca", "cbp", "repcon")


@dataclass
class FusionConfig:
    kind: str = "repcon"
    delta: float = 0.5
    lambda_: float = 1e-4
    tau: float = 0.5
    l2_normalize: bool = False

    def __post_init__(self):
        if self.kind not in FUSION_KINDS:
            raise ValueError(f"unknown fusion kind {self.kind!r}; expected one of {FUSION_KINDS}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must be in [0, 1], got {self.delta}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.lambda_ < 0:
            raise ValueError(f"lambda must be non-negative, got {self.lambda_}")


def _check_same_dim(h_seq: Tensor, h_graph: Tensor, op: str) -> None:
    if h_seq.ndim != 1 or h_seq.shape != h_graph.shape:
        raise ad.ShapeError(
            f"{op}: need equal-length vectors, got {h_seq.shape} and {h_graph.shape}"
        )


def fuse_ws(h_seq: Tensor, h_graph: Tensor, delta: float = 0.5) -> Tensor:
    _check_same_dim(h_seq, h_graph, "fuse_ws")
    return ad.add(ad.scale(h_seq, delta), ad.scale(h_graph, 1.0 - delta))


def fuse_concat(h_seq: Tensor, h_graph: Tensor) -> Tensor:
    return ad.concat([h_seq, h_graph], axis=0)


def fuse_ca(h_seq: Tensor, h_graph: Tensor) -> Tensor:
    """Cross attention with the graph vector as query and key.

    Attention weights come from the scaled outer product of h_graph with
    itself; each output entry is that row's softmax applied to h_seq.
    """
    _check_same_dim(h_seq, h_graph, "fuse_ca")
    d = h_seq.shape[0]
    col = ad.reshape(h_graph, (d, 1))
    row = ad.reshape(h_graph, (1, d))
    logits = ad.scale(ad.matmul(col, row), 1.0 / float(np.sqrt(d)))
    attn = ad.softmax(logits, axis=-1)
    return ad.reshape(ad.matmul(attn, ad.reshape(h_seq, (d, 1))), (d,))


def fuse_cbp(h_seq: Tensor, h_graph: Tensor) -> Tensor:
    """Bilinear interaction pooled by Fourier transform, i.e. the inverse
    transform of the element-wise product of the two spectra; equal to the
    circular convolution of the inputs."""
    _check_same_dim(h_seq, h_graph, "fuse_cbp")
    return ad.circular_conv(h_seq, h_graph)


def fuse_for_predictor(h_seq: Tensor, h_graph: Tensor, cfg: FusionConfig) -> Tensor:
    if cfg.kind == "ws":
        return fuse_ws(h_seq, h_graph, cfg.delta)
    if cfg.kind == "concat":
        return fuse_concat(h_seq, h_graph)
    if cfg.kind == "ca":
        return fuse_ca(h_seq, h_graph)
    if cfg.kind == "cbp":
        return fuse_cbp(h_seq, h_graph)
    raise ValueError(
        "repcon does not produce a fused vector: each route keeps its own "
        "predictor and the routes are tied by the contrastive loss instead"
    )


def infonce_loss(batch_h_seq: Tensor, batch_h_graph: Tensor, tau: float,
                 l2_normalize: bool = False) -> Tensor:
    """In-batch contrastive loss over paired representations.

    Sample i's two representations form the positive pair; for a given
    anchor, every representation of every other in-batch sample -- from
    both encoders, 2(B-1) in total -- is a negative.  Each anchor scores
    -log(exp(pos/tau) / (exp(pos/tau) + sum exp(neg/tau))) and the mean
    over all 2B anchors (both directions) is returned.
    """
    if batch_h_seq.ndim != 2 or batch_h_seq.shape != batch_h_graph.shape:
        raise ad.ShapeError(
            f"infonce_loss: need matching B x d matrices, got "
            f"{batch_h_seq.shape} and {batch_h_graph.shape}"
        )
    b = batch_h_seq.shape[0]
    if b < 2:
        raise ValueError(f"infonce_loss: need at least 2 samples for negatives, got {b}")
    if tau <= 0:
        raise ValueError(f"infonce_loss: tau must be positive, got {tau}")

    z = ad.concat([batch_h_seq, batch_h_graph], axis=0)
    if l2_normalize:
        z = ad.l2_normalize_rows(z)
    sims = ad.scale(ad.matmul(z, ad.transpose(z)), 1.0 / tau)

    anchors = np.arange(2 * b)
    positives = np.concatenate([anchors[b:], anchors[:b]])
    # Denominator per anchor: its positive plus all cross-sample
    # representations; only the anchor itself is excluded.
    mask = ~np.eye(2 * b, dtype=bool)
    pos = ad.gather_pairs(sims, anchors, positives)
    lse = ad.masked_row_logsumexp(sims, mask)
    per_anchor = ad.add(lse, ad.scale(pos, -1.0))
    return ad.mean_pool(per_anchor, axis=0)
