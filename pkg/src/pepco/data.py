"""Peptide datasets: parsing, token/graph encodings, splits, and batches.

Sequences use the 20 one-letter amino-acid codes.  The molecular encoding
is a coarse-grained bead graph: one backbone bead per residue plus a short
chain of side-chain beads whose count depends on the residue (side-chain
size classes, with aromatic rings flattened to chains).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ALPHABET = "ACDEFGHIKLMNPQRSTVWY"
TOKEN_OF = {letter: i for i, letter in enumerate(ALPHABET)}

# Side-chain bead counts per residue.  G/A have no side bead; bulky
# aromatics get two or three; everything else one.
SIDE_BEADS = {
    "G": 0, "A": 0,
    "C": 1, "S": 1, "T": 1, "V": 1, "P": 1, "D": 1, "N": 1,
    "E": 1, "Q": 1, "L": 1, "I": 1, "M": 1, "K": 1,
    "F": 2, "H": 2, "R": 2, "Y": 2,
    "W": 3,
}

DEFAULT_MAX_LEN = 50

# Bead-type vocabulary: id 0 is the shared backbone bead; side beads get
# one id per (residue letter, side slot) pair, assigned in alphabet order.
BACKBONE_TYPE = 0
SIDE_TYPE_OF: dict[tuple[str, int], int] = {}
for _letter in ALPHABET:
    for _slot in range(SIDE_BEADS[_letter]):
        SIDE_TYPE_OF[(_letter, _slot)] = 1 + len(SIDE_TYPE_OF)
NUM_BEAD_TYPES = 1 + len(SIDE_TYPE_OF)

# Incremented by build_graph; lets callers assert that sequence-only
# inference never touched graph construction.
GRAPH_BUILD_CALLS = 0


def reset_graph_build_counter() -> None:
    global GRAPH_BUILD_CALLS
    GRAPH_BUILD_CALLS = 0


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class PeptideRecord:
    """One peptide with an optional task label.

    ``label`` is a float for regression, an int class index for
    classification, and None for unlabeled inference-only input.
    """
    id: str
    sequence: str
    label: float | int | None

    def __post_init__(self):
        # Length against the configured maximum is enforced at parse time.
        if not self.sequence:
            raise DataError("empty sequence")
        for ch in self.sequence:
            if ch not in TOKEN_OF:
                raise DataError(f"character {ch!r} is not a one-letter amino-acid code")


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[int, ...]
    positions: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class BeadGraph:
    node_types: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    residue_of_node: tuple[int, ...]

    @property
    def num_nodes(self) -> int:
        return len(self.node_types)

    def neighbor_lists(self) -> list[list[int]]:
        neighbors: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for u, v in self.edges:
            neighbors[u].append(v)
            neighbors[v].append(u)
        return neighbors


@dataclass
class DatasetSplit:
    train: list[PeptideRecord]
    validation: list[PeptideRecord]
    test: list[PeptideRecord]
    seed: int


def validate_sequence(sequence: str, max_len: int = DEFAULT_MAX_LEN) -> None:
    if not sequence:
        raise DataError("empty sequence")
    for ch in sequence:
        if ch not in TOKEN_OF:
            raise DataError(f"character {ch!r} is not a one-letter amino-acid code")
    if len(sequence) > max_len:
        raise DataError(f"sequence length {len(sequence)} exceeds maximum {max_len}")


def parse_dataset(path, task: str, max_len: int = DEFAULT_MAX_LEN) -> list[PeptideRecord]:
    """Read a labeled CSV with header ``sequence,label``.

    Regression labels parse as floats, classification labels as
    non-negative integers.  Any bad row fails with its 1-based data row
    number.
    """
    if task not in ("regression", "classification"):
        raise DataError(f"unknown task {task!r}")
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    records: list[PeptideRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["sequence", "label"]:
            raise DataError(f"{path}: expected header 'sequence,label', got {header}")
        for row_num, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path} row {row_num}: expected 2 fields, got {len(row)}")
            seq, label_text = row[0].strip(), row[1].strip()
            for ch in seq:
                if ch not in TOKEN_OF:
                    raise DataError(
                        f"{path} row {row_num}: character {ch!r} is not in the "
                        f"amino-acid alphabet"
                    )
            if len(seq) > max_len:
                raise DataError(
                    f"{path} row {row_num}: sequence length {len(seq)} exceeds "
                    f"maximum {max_len}"
                )
            if not seq:
                raise DataError(f"{path} row {row_num}: empty sequence")
            try:
                if task == "regression":
                    label: float | int = float(label_text)
                else:
                    label = int(label_text)
                    if label < 0:
                        raise ValueError
            except ValueError:
                raise DataError(
                    f"{path} row {row_num}: label {label_text!r} is not a valid "
                    f"{task} label"
                )
            records.append(PeptideRecord(id=f"r{row_num}", sequence=seq, label=label))
    return records


def parse_fasta(path, max_len: int = DEFAULT_MAX_LEN) -> list[PeptideRecord]:
    """Read unlabeled FASTA records; lowercase letters are upcased."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"FASTA file not found: {path}")
    records: list[PeptideRecord] = []
    name: str | None = None
    chunks: list[str] = []

    def flush():
        if name is None:
            return
        seq = "".join(chunks).upper()
        validate_sequence(seq, max_len)
        records.append(PeptideRecord(id=name, sequence=seq, label=None))

    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith(">"):
                flush()
                name = line[1:].split()[0] if line[1:].strip() else f"seq{len(records) + 1}"
                chunks = []
            else:
                if name is None:
                    raise DataError(f"{path}: sequence data before first '>' header")
                chunks.append(line)
    flush()
    if not records:
        raise DataError(f"{path}: no FASTA records found")
    return records


def encode_sequence(record: PeptideRecord) -> TokenSequence:
    tokens = tuple(TOKEN_OF[ch] for ch in record.sequence)
    return TokenSequence(tokens=tokens, positions=tuple(range(len(tokens))))


def build_graph(record: PeptideRecord) -> BeadGraph:
    """Coarse-grain a peptide into its bead graph.

    Per residue: one backbone bead, then that residue's side beads bonded
    in a chain off the backbone.  Consecutive backbone beads are bonded,
    which keeps any peptide's graph connected.
    """
    global GRAPH_BUILD_CALLS
    GRAPH_BUILD_CALLS += 1
    node_types: list[int] = []
    edges: list[tuple[int, int]] = []
    residue_of: list[int] = []
    prev_backbone = -1
    for res_index, letter in enumerate(record.sequence):
        backbone = len(node_types)
        node_types.append(BACKBONE_TYPE)
        residue_of.append(res_index)
        if prev_backbone >= 0:
            edges.append((prev_backbone, backbone))
        prev = backbone
        for slot in range(SIDE_BEADS[letter]):
            bead = len(node_types)
            node_types.append(SIDE_TYPE_OF[(letter, slot)])
            residue_of.append(res_index)
            edges.append((prev, bead))
            prev = bead
        prev_backbone = backbone
    return BeadGraph(node_types=tuple(node_types), edges=tuple(edges),
                     residue_of_node=tuple(residue_of))


def split_dataset(records: list[PeptideRecord],
                  ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
                  seed: int = 0) -> DatasetSplit:
    """Shuffle deterministically, then cut into train/validation/test.

    Sizes follow the ratios by largest remainder; every part gets at
    least one record.
    """
    if len(records) < 3:
        raise DataError(f"need at least 3 records to split, got {len(records)}")
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"ratios must be positive and sum to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(records))
    shuffled = [records[i] for i in order]

    n = len(records)
    exact = [r * n for r in ratios]
    sizes = [int(np.floor(e)) for e in exact]
    remainders = [e - s for e, s in zip(exact, sizes)]
    for _ in range(n - sum(sizes)):
        k = int(np.argmax(remainders))
        sizes[k] += 1
        remainders[k] = -1.0
    for k in range(3):
        if sizes[k] == 0:
            donor = int(np.argmax(sizes))
            sizes[donor] -= 1
            sizes[k] += 1

    a, b = sizes[0], sizes[0] + sizes[1]
    return DatasetSplit(train=shuffled[:a], validation=shuffled[a:b],
                        test=shuffled[b:], seed=seed)


def make_batches(records: list[PeptideRecord], batch_size: int,
                 seed: int = 0) -> list[list[PeptideRecord]]:
    """Shuffle into batches; a trailing singleton folds into the previous batch."""
    if batch_size < 2:
        raise DataError(f"batch_size must be at least 2, got {batch_size}")
    if len(records) < 2:
        raise DataError(f"need at least 2 records to batch, got {len(records)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(records))
    shuffled = [records[i] for i in order]
    batches = [shuffled[i:i + batch_size] for i in range(0, len(shuffled), batch_size)]
    if len(batches) > 1 and len(batches[-1]) < 2:
        batches[-2].extend(batches.pop())
    return batches


def aromatic_fraction(sequence: str) -> float:
    return sum(ch in "FWY" for ch in sequence) / len(sequence)


def generate_synthetic(n: int, max_len: int, seed: int) -> list[PeptideRecord]:
    """Random peptides labeled with their aromatic-residue fraction.

    Lengths are uniform on [2, max_len] so every peptide supports
    pairwise metrics and in-batch contrast.
    """
    if n < 10:
        raise DataError(f"need at least 10 synthetic records, got {n}")
    if max_len < 2:
        raise DataError(f"max_len must be at least 2, got {max_len}")
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        length = int(rng.integers(2, max_len + 1))
        seq = "".join(ALPHABET[int(t)] for t in rng.integers(0, 20, size=length))
        records.append(PeptideRecord(id=f"s{i + 1}", sequence=seq,
                                     label=aromatic_fraction(seq)))
    return records


def write_dataset_csv(path, records: list[PeptideRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sequence,label\n")
        for rec in records:
            if isinstance(rec.label, float):
                fh.write(f"{rec.sequence},{rec.label:.6f}\n")
            else:
                fh.write(f"{rec.sequence},{rec.label}\n")
