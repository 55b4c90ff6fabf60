"""Similarity metrics between attribution profiles, and per-letter stats.

Rank metrics (Kendall tau, footrule similarity, top-i overlap) compare
the importance ordering two models assign to the residues of the same
peptide; distribution metrics (Jensen-Shannon divergence, cosine
similarity) compare the score vectors themselves.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attribution import AttributionProfile
from .data import ALPHABET


class MetricError(ValueError):
    pass


def _check_pair(a, b, name) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise MetricError(f"{name}: need equal-length vectors, got {a.shape} and {b.shape}")
    return a, b


def kendall_tau(a, b) -> float:
    """(concordant - discordant) / (n(n-1)/2); tied pairs count as neither."""
    a, b = _check_pair(a, b, "kendall_tau")
    n = len(a)
    if n < 2:
        raise MetricError(f"kendall_tau: need at least 2 entries, got {n}")
    da = np.sign(a[:, None] - a[None, :])
    db = np.sign(b[:, None] - b[None, :])
    upper = np.triu_indices(n, k=1)
    prod = da[upper] * db[upper]
    return float(prod.sum() / (n * (n - 1) / 2))


def _importance_ranks(scores: np.ndarray) -> np.ndarray:
    """Rank 1 = highest score; ties broken by earlier position."""
    order = np.lexsort((np.arange(len(scores)), -scores))
    ranks = np.empty(len(scores), dtype=np.int64)
    ranks[order] = np.arange(1, len(scores) + 1)
    return ranks


def spearman_footrule(a, b) -> float:
    """1 - (total rank displacement) / floor(n^2 / 2), in [0, 1]."""
    a, b = _check_pair(a, b, "spearman_footrule")
    n = len(a)
    if n < 2:
        raise MetricError(f"spearman_footrule: need at least 2 entries, got {n}")
    distance = np.abs(_importance_ranks(a) - _importance_ranks(b)).sum()
    return 1.0 - float(distance) / float(n * n // 2)


def top_i_indices(scores, i: int) -> set[int]:
    scores = np.asarray(scores, dtype=np.float64)
    if i < 1:
        raise MetricError(f"top-i needs i >= 1, got {i}")
    if i > len(scores):
        raise MetricError(f"top-{i} undefined for a {len(scores)}-residue peptide")
    order = np.lexsort((np.arange(len(scores)), -scores))
    return set(int(k) for k in order[:i])


def top_i_overlap(profiles_a: list[AttributionProfile],
                  profiles_b: list[AttributionProfile], i: int) -> float:
    """Fraction of peptides whose top-i position sets intersect."""
    _check_paired_profiles(profiles_a, profiles_b)
    hits = 0
    for pa, pb in zip(profiles_a, profiles_b):
        if top_i_indices(pa.scores, i) & top_i_indices(pb.scores, i):
            hits += 1
    return hits / len(profiles_a)


def _as_distribution(p: np.ndarray, name: str) -> np.ndarray:
    # Signed profiles are clamped at zero, then renormalized.
    q = np.clip(p, 0.0, None)
    total = q.sum()
    if total <= 0:
        raise MetricError(f"{name}: no positive mass to form a distribution")
    return q / total


def js_divergence(p, q) -> float:
    """Jensen-Shannon divergence, natural log; 0 log 0 taken as 0."""
    p, q = _check_pair(p, q, "js_divergence")
    p = _as_distribution(p, "js_divergence")
    q = _as_distribution(q, "js_divergence")
    m = 0.5 * (p + q)

    def kl(x, y):
        mask = x > 0
        return float((x[mask] * np.log(x[mask] / y[mask])).sum())

    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


def cosine_similarity(p, q) -> float:
    p, q = _check_pair(p, q, "cosine_similarity")
    np_, nq = np.linalg.norm(p), np.linalg.norm(q)
    if np_ == 0 or nq == 0:
        raise MetricError("cosine_similarity: zero vector")
    return float(np.dot(p, q) / (np_ * nq))


@dataclass
class SimilarityReport:
    kendall_tau_mean: float
    kendall_tau_var: float
    footrule_mean: float
    footrule_var: float
    top_overlap: dict[int, float]
    js_mean: float
    js_var: float
    cosine_mean: float
    cosine_var: float
    num_peptides: int

    def rows(self) -> list[tuple[str, str, float]]:
        out = [
            ("kendall_tau", "mean", self.kendall_tau_mean),
            ("kendall_tau", "var", self.kendall_tau_var),
            ("spearman_footrule", "mean", self.footrule_mean),
            ("spearman_footrule", "var", self.footrule_var),
        ]
        for i in sorted(self.top_overlap):
            out.append((f"top_{i}_overlap", "fraction", self.top_overlap[i]))
        out += [
            ("js_divergence", "mean", self.js_mean),
            ("js_divergence", "var", self.js_var),
            ("cosine_similarity", "mean", self.cosine_mean),
            ("cosine_similarity", "var", self.cosine_var),
        ]
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("metric,statistic,value\n")
            for metric, stat, value in self.rows():
                fh.write(f"{metric},{stat},{value:.6f}\n")


def _check_paired_profiles(a: list[AttributionProfile],
                           b: list[AttributionProfile]) -> None:
    if not a or len(a) != len(b):
        raise MetricError(f"need matching non-empty profile lists, got {len(a)} and {len(b)}")
    mismatched = [pa.peptide_id for pa, pb in zip(a, b)
                  if pa.peptide_id != pb.peptide_id or pa.residues != pb.residues]
    if mismatched:
        raise MetricError(
            f"profiles are not paired over identical peptides; offenders: "
            f"{', '.join(mismatched[:10])}"
        )


def compare_models(profiles_a: list[AttributionProfile],
                   profiles_b: list[AttributionProfile],
                   top_i: tuple[int, ...] = (1, 2)) -> SimilarityReport:
    """All similarity metrics between two models' profiles over one test set."""
    _check_paired_profiles(profiles_a, profiles_b)
    taus, foots, jss, coss = [], [], [], []
    for pa, pb in zip(profiles_a, profiles_b):
        taus.append(kendall_tau(pa.scores, pb.scores))
        foots.append(spearman_footrule(pa.scores, pb.scores))
        jss.append(js_divergence(pa.scores, pb.scores))
        coss.append(cosine_similarity(pa.scores, pb.scores))
    overlap = {i: top_i_overlap(profiles_a, profiles_b, i) for i in top_i}
    return SimilarityReport(
        kendall_tau_mean=float(np.mean(taus)), kendall_tau_var=float(np.var(taus)),
        footrule_mean=float(np.mean(foots)), footrule_var=float(np.var(foots)),
        top_overlap=overlap,
        js_mean=float(np.mean(jss)), js_var=float(np.var(jss)),
        cosine_mean=float(np.mean(coss)), cosine_var=float(np.var(coss)),
        num_peptides=len(profiles_a),
    )


def residue_stats(profiles: list[AttributionProfile]) -> dict[str, dict[str, float]]:
    """Per-letter mean attribution and most-important frequency.

    The frequency counts, per peptide, which letter holds the maximum
    score; exact ties split the peptide's weight equally.
    """
    if not profiles:
        raise MetricError("residue_stats: no profiles")
    sums = {ch: 0.0 for ch in ALPHABET}
    counts = {ch: 0 for ch in ALPHABET}
    top_weight = {ch: 0.0 for ch in ALPHABET}
    for prof in profiles:
        for letter, score in zip(prof.residues, prof.scores):
            sums[letter] += float(score)
            counts[letter] += 1
        best = prof.scores.max()
        tied = [k for k, s in enumerate(prof.scores) if s == best]
        for k in tied:
            top_weight[prof.residues[k]] += 1.0 / len(tied)
    out: dict[str, dict[str, float]] = {}
    for ch in ALPHABET:
        if counts[ch] == 0:
            continue
        out[ch] = {
            "mean_attribution": sums[ch] / counts[ch],
            "occurrences": float(counts[ch]),
            "top_frequency": top_weight[ch] / len(profiles),
        }
    return out


def residue_mae(model, records) -> dict[str, float | None]:
    """Per-letter MAE over the peptides containing that letter.

    Letters absent from every record map to None (reported missing rather
    than zero).
    """
    from .training import predict_records

    if not records:
        raise MetricError("residue_mae: no records")
    preds = predict_records(model, records).reshape(-1)
    labels = np.asarray([rec.label for rec in records], dtype=np.float64)
    abs_errors = np.abs(preds - labels)
    out: dict[str, float | None] = {}
    for ch in ALPHABET:
        mask = np.array([ch in rec.sequence for rec in records])
        out[ch] = float(abs_errors[mask].mean()) if mask.any() else None
    return out
