"""Per-residue importance scores from path-integrated gradient saliency.

For one peptide, the embedded input H (tokens or beads, n x d) is scaled
along the straight path from the origin to H; the gradient of a
prediction-corrupting loss is accumulated over m path steps, averaged,
and multiplied element-wise by H.  Row sums of that saliency, grouped by
residue and divided by the grand total, give one normalized score per
residue (the scores of a peptide sum to one).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .data import BeadGraph, PeptideRecord, TokenSequence, build_graph, encode_sequence
from .encoders import (
    CoModel,
    embed_graph,
    embed_sequence,
    encode_from_embedding,
    encode_graph_from_embedding,
    mlp_predict,
    neighbor_mean_matrix,
)


class AttributionError(ValueError):
    pass


@dataclass
class AttributionProfile:
    peptide_id: str
    residues: str
    scores: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if len(self.scores) != len(self.residues):
            raise AttributionError(
                f"{self.peptide_id}: {len(self.scores)} scores for "
                f"{len(self.residues)} residues"
            )
        if abs(self.scores.sum() - 1.0) > 1e-6:
            raise AttributionError(
                f"{self.peptide_id}: scores sum to {self.scores.sum():.8f}, not 1"
            )


def attribution_loss(output: Tensor, task: str,
                     original_class: int | None = None) -> Tensor:
    """Loss whose gradient points at what the prediction depends on.

    Regression: |f(X)|, so the salient dimensions are the ones that move
    the prediction away from its value.  Classification: cross entropy
    against the model's own original class.
    """
    if task == "regression":
        return ad.absolute(output)
    if original_class is None:
        raise AttributionError("classification attribution needs the original class")
    return ad.cross_entropy_loss(output, original_class)


class SequenceRoute:
    """Sequence encoder + predictor viewed as a function of its embedding."""

    def __init__(self, model: CoModel):
        if model.pred_seq is None:
            raise AttributionError(
                f"a {model.fusion.kind!r} model has no standalone sequence route "
                f"to attribute"
            )
        self.encoder = model.seq
        self.predictor = model.pred_seq

    def embed(self, record: PeptideRecord) -> tuple[np.ndarray, TokenSequence]:
        tokens = encode_sequence(record)
        h = embed_sequence(tokens, self.encoder)
        return np.asarray(h.data), tokens

    def output_from_embedding(self, h: Tensor) -> Tensor:
        rep = encode_from_embedding(h, self.encoder)
        return mlp_predict(rep, self.predictor)

    def residue_of_row(self, record: PeptideRecord) -> list[int]:
        return list(range(len(record.sequence)))


class GraphRoute:
    """Graph encoder + predictor as a function of the bead embedding.

    The adjacency is frozen when the route is built; a guard verifies it
    is bit-identical at every path step, since only the embedding is
    scaled along the integration path.
    """

    def __init__(self, model: CoModel):
        if model.pred_graph is None:
            raise AttributionError(
                f"a {model.fusion.kind!r} model has no standalone graph route "
                f"to attribute"
            )
        self.encoder = model.graph
        self.predictor = model.pred_graph
        self._graph: BeadGraph | None = None
        self._adjacency: np.ndarray | None = None
        self._adjacency_bytes: bytes | None = None

    def embed(self, record: PeptideRecord) -> tuple[np.ndarray, BeadGraph]:
        graph = build_graph(record)
        self._graph = graph
        self._adjacency = neighbor_mean_matrix(graph)
        self._adjacency_bytes = self._adjacency.tobytes()
        h = embed_graph(graph, self.encoder)
        return np.asarray(h.data), graph

    def output_from_embedding(self, h: Tensor) -> Tensor:
        if self._adjacency.tobytes() != self._adjacency_bytes:
            raise AttributionError(
                "adjacency changed between path steps; only the embedding may "
                "be scaled"
            )
        rep = encode_graph_from_embedding(h, self._adjacency, self.encoder)
        return mlp_predict(rep, self.predictor)

    def residue_of_row(self, record: PeptideRecord) -> list[int]:
        return list(self._graph.residue_of_node)


def integrated_gradients(loss_fn, h_input: np.ndarray, m: int = 300) -> np.ndarray:
    """Saliency = H * mean over k=1..m of dL(k/m * H)/dH.

    The averaged Riemann sum makes the linear case exact for any m and
    makes the summed saliency approximate L(H) - L(0).
    """
    if m < 1:
        raise AttributionError(f"need at least one path step, got m={m}")
    h_input = np.asarray(h_input, dtype=np.float64)
    total = np.zeros_like(h_input)
    for k in range(1, m + 1):
        point = Tensor(h_input * (k / m), requires_grad=True)
        with Tape() as tape:
            loss = loss_fn(point)
            tape.backward(loss)
        if point.grad is None or not np.all(np.isfinite(point.grad)):
            raise AttributionError(f"non-finite or missing gradient at path step {k}")
        total += point.grad
    return h_input * (total / m)


def aggregate_to_residues(saliency: np.ndarray, residue_of_row: list[int],
                          record: PeptideRecord) -> AttributionProfile:
    """Sum each residue's saliency rows and normalize by the grand total."""
    saliency = np.asarray(saliency, dtype=np.float64)
    n_res = len(record.sequence)
    if len(residue_of_row) != saliency.shape[0]:
        raise AttributionError(
            f"{record.id}: {saliency.shape[0]} saliency rows but "
            f"{len(residue_of_row)} row-to-residue entries"
        )
    per_residue = np.zeros(n_res)
    row_sums = saliency.sum(axis=1)
    for row, res in enumerate(residue_of_row):
        per_residue[res] += row_sums[row]
    grand_total = per_residue.sum()
    if abs(grand_total) < 1e-9:
        raise AttributionError(
            f"{record.id}: total saliency {grand_total:.2e} is degenerate; "
            f"scores cannot be normalized"
        )
    return AttributionProfile(peptide_id=record.id, residues=record.sequence,
                              scores=per_residue / grand_total)


def attribute_record(model: CoModel, route: str, record: PeptideRecord,
                     m: int = 300, task: str | None = None) -> AttributionProfile:
    task = task or model.task
    if route not in ("seq", "graph"):
        raise AttributionError(f"unknown route {route!r}; expected 'seq' or 'graph'")
    r = SequenceRoute(model) if route == "seq" else GraphRoute(model)
    h0, _ = r.embed(record)

    original_class = None
    if task == "classification":
        out = r.output_from_embedding(Tensor(h0))
        original_class = int(np.argmax(out.data))

    def loss_fn(h: Tensor) -> Tensor:
        return attribution_loss(r.output_from_embedding(h), task, original_class)

    saliency = integrated_gradients(loss_fn, h0, m)
    return aggregate_to_residues(saliency, r.residue_of_row(record), record)


def attribute_dataset(model: CoModel, route: str, records: list[PeptideRecord],
                      m: int = 300, task: str | None = None) -> list[AttributionProfile]:
    return [attribute_record(model, route, rec, m=m, task=task) for rec in records]


def write_profiles_csv(path, profiles: list[AttributionProfile]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id,position,residue,score\n")
        for prof in profiles:
            for pos, (letter, score) in enumerate(zip(prof.residues, prof.scores)):
                fh.write(f"{prof.peptide_id},{pos},{letter},{score:.6f}\n")


def read_profiles_csv(path) -> list[AttributionProfile]:
    import csv as _csv

    rows_by_id: dict[str, list[tuple[int, str, float]]] = {}
    order: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "position", "residue", "score"]:
            raise AttributionError(
                f"{path}: expected header 'id,position,residue,score', got {header}"
            )
        for row in reader:
            if not row:
                continue
            pid, pos, letter, score = row[0], int(row[1]), row[2], float(row[3])
            if pid not in rows_by_id:
                rows_by_id[pid] = []
                order.append(pid)
            rows_by_id[pid].append((pos, letter, score))
    profiles = []
    for pid in order:
        entries = sorted(rows_by_id[pid])
        residues = "".join(letter for _, letter, _ in entries)
        scores = np.array([score for _, _, score in entries])
        # 6-decimal output rounds the unit sum; renormalize on read.
        total = scores.sum()
        if abs(total) < 1e-9:
            raise AttributionError(f"{path}: profile {pid} has degenerate total")
        profiles.append(AttributionProfile(peptide_id=pid, residues=residues,
                                           scores=scores / total))
    return profiles
