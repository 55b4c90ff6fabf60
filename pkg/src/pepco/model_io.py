"""Save and load whole co-models through the flat parameter format.

Scalar settings that cannot be recovered from parameter shapes (task,
fusion kind, temperatures) ride along as reserved ``__meta__.*`` records
so a checkpoint is self-contained.
"""
from __future__ import annotations

import numpy as np

from .autodiff import Tensor
from .checkpoint import CheckpointError, load_params, save_params
from .encoders import (
    AttentionBlockParams,
    CoModel,
    GraphEncoderParams,
    PredictorParams,
    SeqEncoderParams,
)
from .fusion import FUSION_KINDS, FusionConfig

_TASKS = ("regression", "classification")
_META_PREFIX = "__meta__."
_FORMAT = 1.0


def save_model(path, model: CoModel) -> None:
    params: dict[str, Tensor] = {}
    meta = {
        "format": _FORMAT,
        "task": float(_TASKS.index(model.task)),
        "fusion_kind": float(FUSION_KINDS.index(model.fusion.kind)),
        "delta": model.fusion.delta,
        "lambda": model.fusion.lambda_,
        "tau": model.fusion.tau,
        "l2_normalize": float(model.fusion.l2_normalize),
        "heads": float(model.seq.heads),
    }
    for key, value in meta.items():
        params[_META_PREFIX + key] = Tensor(np.float64(value))
    for name, tensor in model.named_parameters():
        params[name] = tensor
    save_params(path, params)


def _collect(params: dict[str, Tensor], prefix: str) -> dict[str, Tensor]:
    plen = len(prefix) + 1
    return {name[plen:]: t for name, t in params.items()
            if name.startswith(prefix + ".")}


def _predictor_from(params: dict[str, Tensor], prefix: str) -> PredictorParams | None:
    sub = _collect(params, prefix)
    if not sub:
        return None
    count = sum(1 for k in sub if k.endswith(".weight"))
    weights = [sub[f"layers.{i}.weight"] for i in range(count)]
    biases = [sub[f"layers.{i}.bias"] for i in range(count)]
    return PredictorParams(weights=weights, biases=biases)


def load_model(path) -> CoModel:
    raw = load_params(path)
    meta: dict[str, float] = {}
    params: dict[str, Tensor] = {}
    for name, t in raw.items():
        if name.startswith(_META_PREFIX):
            meta[name[len(_META_PREFIX):]] = float(t.data)
        else:
            params[name] = t
    if meta.get("format") != _FORMAT:
        raise CheckpointError(f"{path}: unsupported model format {meta.get('format')}")

    task = _TASKS[int(meta["task"])]
    fusion = FusionConfig(kind=FUSION_KINDS[int(meta["fusion_kind"])],
                          delta=meta["delta"], lambda_=meta["lambda"],
                          tau=meta["tau"], l2_normalize=bool(meta["l2_normalize"]))

    seq_sub = _collect(params, "seq")
    n_blocks = sum(1 for k in seq_sub if k.endswith(".wq"))
    blocks = []
    for i in range(n_blocks):
        b = _collect(seq_sub, f"blocks.{i}")
        blocks.append(AttentionBlockParams(**{k: b[k] for k in (
            "wq", "wk", "wv", "wo", "ff1", "ff1_bias", "ff2", "ff2_bias",
            "ln1_gain", "ln1_bias", "ln2_gain", "ln2_bias")}))
    seq = SeqEncoderParams(token_embedding=seq_sub["token_embedding"],
                           position_embedding=seq_sub["position_embedding"],
                           blocks=blocks, heads=int(meta["heads"]))

    graph_sub = _collect(params, "graph")
    n_layers = sum(1 for k in graph_sub if k.endswith(".weight"))
    graph = GraphEncoderParams(
        bead_embedding=graph_sub["bead_embedding"],
        weights=[graph_sub[f"layers.{i}.weight"] for i in range(n_layers)],
        biases=[graph_sub[f"layers.{i}.bias"] for i in range(n_layers)],
    )

    return CoModel(
        seq=seq, graph=graph, fusion=fusion, task=task,
        pred_seq=_predictor_from(params, "pred_seq"),
        pred_graph=_predictor_from(params, "pred_graph"),
        pred_fused=_predictor_from(params, "pred_fused"),
    )
