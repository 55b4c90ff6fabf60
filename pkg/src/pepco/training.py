"""Co-training of the two routes, decoupled inference, and evaluation.

Per batch: both encoders run on every sample, each route (or the shared
fused predictor) takes a supervised loss, and in ``repcon`` mode the
in-batch contrastive term is added with weight lambda.  One adaptive-
moment step follows the backward pass.  The model with the best
validation metric across epochs is the one returned.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .data import (
    BeadGraph,
    DatasetSplit,
    PeptideRecord,
    TokenSequence,
    build_graph,
    encode_sequence,
    make_batches,
)
from .encoders import CoModel, build_co_model, graphsage_encode, mlp_predict, transformer_encode
from .fusion import FusionConfig, fuse_for_predictor, infonce_loss


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass
class TrainConfig:
    task: str = "regression"
    fusion: str = "repcon"
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    lambda_: float = 1e-4
    tau: float = 0.5
    delta: float = 0.5
    hidden_dim: int = 64
    heads: int = 4
    seq_layers: int = 2
    ff_dim: int = 128
    graph_layers: int = 3
    predictor_hidden: tuple[int, ...] = (64,)
    max_len: int = 50
    n_classes: int = 2
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    l2_normalize: bool = False

    def __post_init__(self):
        if self.task not in ("regression", "classification"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.lambda_ < 0:
            raise ValueError("lambda must be non-negative")

    def fusion_config(self) -> FusionConfig:
        return FusionConfig(kind=self.fusion, delta=self.delta,
                            lambda_=self.lambda_, tau=self.tau,
                            l2_normalize=self.l2_normalize)


@dataclass
class EpochStats:
    epoch: int
    loss_pred: float
    loss_con: float
    loss_train: float
    val_metric: float


@dataclass
class LossCurve:
    task: str
    rows: list[EpochStats] = field(default_factory=list)

    @property
    def val_metric_name(self) -> str:
        return "mse" if self.task == "regression" else "accuracy"

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("epoch,loss_pred,loss_con,loss_train,val_metric\n")
            for r in self.rows:
                fh.write(f"{r.epoch},{r.loss_pred:.6f},{r.loss_con:.6f},"
                         f"{r.loss_train:.6f},{r.val_metric:.6f}\n")


class Adam:
    """Adaptive-moment estimation over a fixed parameter list."""

    def __init__(self, params: list[Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p.data -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def supervised_loss(pred_seq: Tensor, pred_graph: Tensor, y, task: str) -> Tensor:
    """Sum of both routes' supervised losses for one batch."""
    if task == "regression":
        target = Tensor(np.asarray(y, dtype=np.float64))
        return ad.add(ad.mse_loss(pred_seq, target), ad.mse_loss(pred_graph, target))
    return ad.add(ad.cross_entropy_loss(pred_seq, y),
                  ad.cross_entropy_loss(pred_graph, y))


def total_loss(loss_pred: Tensor, loss_con: Tensor, lambda_: float) -> Tensor:
    return ad.add(loss_pred, ad.scale(loss_con, lambda_))


def _stack_rows(rows: list[Tensor]) -> Tensor:
    return ad.concat([ad.reshape(r, (1, r.shape[0] if r.ndim else 1)) for r in rows],
                     axis=0)


@dataclass
class _Prepared:
    record: PeptideRecord
    tokens: TokenSequence
    graph: BeadGraph | None


def _prepare(records: list[PeptideRecord], with_graphs: bool) -> list[_Prepared]:
    # Graphs are deterministic, so they are built once per dataset.
    return [_Prepared(record=r, tokens=encode_sequence(r),
                      graph=build_graph(r) if with_graphs else None)
            for r in records]


def _batch_forward(model: CoModel, batch: list[_Prepared], cfg: TrainConfig):
    """Return (loss_pred, loss_con) tensors for one batch on the active tape."""
    h_seqs, h_graphs = [], []
    for item in batch:
        h_seqs.append(transformer_encode(item.tokens, model.seq))
        h_graphs.append(graphsage_encode(item.graph, model.graph))
    labels = [item.record.label for item in batch]

    if cfg.fusion == "repcon":
        preds_s = [mlp_predict(h, model.pred_seq) for h in h_seqs]
        preds_g = [mlp_predict(h, model.pred_graph) for h in h_graphs]
        if cfg.task == "regression":
            pred_seq = ad.concat([ad.reshape(p, (1,)) for p in preds_s], axis=0)
            pred_graph = ad.concat([ad.reshape(p, (1,)) for p in preds_g], axis=0)
        else:
            pred_seq = _stack_rows(preds_s)
            pred_graph = _stack_rows(preds_g)
        loss_pred = supervised_loss(pred_seq, pred_graph, labels, cfg.task)
        loss_con = infonce_loss(_stack_rows(h_seqs), _stack_rows(h_graphs),
                                cfg.tau, cfg.l2_normalize)
        return loss_pred, loss_con

    fused = [fuse_for_predictor(hs, hg, model.fusion)
             for hs, hg in zip(h_seqs, h_graphs)]
    preds = [mlp_predict(h, model.pred_fused) for h in fused]
    if cfg.task == "regression":
        stacked = ad.concat([ad.reshape(p, (1,)) for p in preds], axis=0)
        loss_pred = ad.mse_loss(stacked, Tensor(np.asarray(labels, dtype=np.float64)))
    else:
        loss_pred = ad.cross_entropy_loss(_stack_rows(preds), labels)
    return loss_pred, None


def infer(x_seq: TokenSequence, model: CoModel,
          bead_graph: BeadGraph | None = None) -> np.ndarray:
    """Predict for one peptide.

    A ``repcon`` model runs the sequence route alone: no graph is built,
    the graph encoder is never called.  The fused baselines need both
    inputs, so they require ``bead_graph``.
    """
    if model.fusion.kind == "repcon":
        h = transformer_encode(x_seq, model.seq)
        out = mlp_predict(h, model.pred_seq)
        return np.asarray(out.data)
    if bead_graph is None:
        raise ValueError(
            f"a {model.fusion.kind!r} model fuses both routes at inference and "
            f"needs the bead graph input; only repcon decouples from the graph route"
        )
    h_seq = transformer_encode(x_seq, model.seq)
    h_graph = graphsage_encode(bead_graph, model.graph)
    out = mlp_predict(fuse_for_predictor(h_seq, h_graph, model.fusion),
                      model.pred_fused)
    return np.asarray(out.data)


def predict_records(model: CoModel, records: list[PeptideRecord]) -> np.ndarray:
    """Deployment-path predictions for a record list (stacked)."""
    outs = []
    for rec in records:
        tokens = encode_sequence(rec)
        graph = None if model.fusion.kind == "repcon" else build_graph(rec)
        outs.append(infer(tokens, model, graph))
    return np.stack(outs)


def regression_metrics(preds: np.ndarray, labels: np.ndarray) -> dict[str, float]:
    preds = np.asarray(preds, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    err = preds - labels
    mae = float(np.abs(err).mean())
    mse = float((err ** 2).mean())
    ss_tot = float(((labels - labels.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise ValueError(
            f"R-squared undefined (SS_tot = 0, constant labels); partial "
            f"metrics mae={mae:.6f}, mse={mse:.6f}"
        )
    return {"mae": mae, "mse": mse,
            "r2": 1.0 - float((err ** 2).sum()) / ss_tot}


def evaluate(model: CoModel, records: list[PeptideRecord], task: str) -> dict[str, float]:
    """MAE/MSE/R-squared for regression, accuracy for classification."""
    if not records:
        raise ValueError("evaluate: empty record list")
    preds = predict_records(model, records)
    labels = np.asarray([r.label for r in records], dtype=np.float64)
    if task == "regression":
        return regression_metrics(preds, labels)
    classes = preds.argmax(axis=1)
    return {"accuracy": float((classes == labels.astype(np.intp)).mean())}


def _validation_metric(model: CoModel, prepared: list[_Prepared], task: str) -> float:
    """MSE (regression) or accuracy (classification) on the deployment path."""
    outs = []
    for item in prepared:
        outs.append(infer(item.tokens, model, item.graph))
    preds = np.stack(outs)
    labels = np.asarray([item.record.label for item in prepared], dtype=np.float64)
    if task == "regression":
        return float(((preds.reshape(-1) - labels) ** 2).mean())
    return float((preds.argmax(axis=1) == labels.astype(np.intp)).mean())


def _better(candidate: float, incumbent: float, task: str) -> bool:
    # Regression minimizes validation MSE, classification maximizes accuracy;
    # ties keep the earlier epoch.
    if task == "regression":
        return candidate < incumbent
    return candidate > incumbent


def train(dataset: DatasetSplit, cfg: TrainConfig,
          on_epoch_end=None) -> tuple[CoModel, LossCurve]:
    """Run the co-training loop and return the best-validation model.

    ``on_epoch_end(epoch, model, stats)``, when given, observes the live
    model after each epoch's optimizer steps.
    """
    if not dataset.train or not dataset.validation:
        raise ValueError("train: dataset needs non-empty train and validation parts")
    model = build_co_model(
        cfg.fusion_config(), cfg.task, cfg.seed, d=cfg.hidden_dim, heads=cfg.heads,
        seq_layers=cfg.seq_layers, ff_dim=cfg.ff_dim, graph_layers=cfg.graph_layers,
        predictor_hidden=tuple(cfg.predictor_hidden), max_len=cfg.max_len,
        n_classes=cfg.n_classes,
    )
    optimizer = Adam(model.parameters(), lr=cfg.learning_rate, beta1=cfg.beta1,
                     beta2=cfg.beta2, eps=cfg.adam_eps)
    train_prep = _prepare(dataset.train, with_graphs=True)
    by_id = {item.record.id: item for item in train_prep}
    # Baselines fuse both routes at validation time; repcon validates on the
    # sequence route alone, matching how it deploys.
    val_prep = _prepare(dataset.validation,
                        with_graphs=cfg.fusion != "repcon")

    curve = LossCurve(task=cfg.task)
    best_metric: float | None = None
    best_params: dict[str, np.ndarray] | None = None

    for epoch in range(1, cfg.epochs + 1):
        batches = make_batches(dataset.train, cfg.batch_size, seed=cfg.seed + epoch)
        sum_pred = sum_con = sum_total = 0.0
        for batch_num, batch_records in enumerate(batches, start=1):
            batch = [by_id[r.id] for r in batch_records]
            with Tape() as tape:
                try:
                    loss_pred, loss_con = _batch_forward(model, batch, cfg)
                except ValueError as e:
                    raise DivergenceError(
                        f"forward pass failed at epoch {epoch}, "
                        f"batch {batch_num}: {e}"
                    ) from e
                if loss_con is not None:
                    loss = total_loss(loss_pred, loss_con, cfg.lambda_)
                else:
                    loss = loss_pred
                loss_value = float(loss.data)
                if not np.isfinite(loss_value):
                    raise DivergenceError(
                        f"non-finite training loss at epoch {epoch}, "
                        f"batch {batch_num}: loss_pred="
                        f"{float(loss_pred.data)}, loss_con="
                        f"{float(loss_con.data) if loss_con is not None else 0.0}"
                    )
                tape.backward(loss)
            optimizer.step()
            optimizer.zero_grad()
            sum_pred += float(loss_pred.data)
            sum_con += float(loss_con.data) if loss_con is not None else 0.0
            sum_total += loss_value

        nb = len(batches)
        val_metric = _validation_metric(model, val_prep, cfg.task)
        stats = EpochStats(epoch=epoch, loss_pred=sum_pred / nb, loss_con=sum_con / nb,
                           loss_train=sum_total / nb, val_metric=val_metric)
        curve.rows.append(stats)
        if best_metric is None or _better(val_metric, best_metric, cfg.task):
            best_metric = val_metric
            best_params = {name: p.data.copy() for name, p in model.named_parameters()}
        if on_epoch_end is not None:
            on_epoch_end(epoch, model, stats)

    for name, p in model.named_parameters():
        p.data = best_params[name].copy()
    return model, curve
