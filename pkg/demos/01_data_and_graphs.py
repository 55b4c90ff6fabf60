"""Peptides as token sequences and as coarse-grained bead graphs.

Shows the fixed alphabet encoding, the bead table at work, and the
deterministic split/batch machinery.
"""
from pepco.data import (
    SIDE_BEADS,
    PeptideRecord,
    build_graph,
    encode_sequence,
    generate_synthetic,
    make_batches,
    split_dataset,
)

rec = PeptideRecord(id="demo", sequence="WFCW", label=0.75)
tokens = encode_sequence(rec)
print(f"sequence {rec.sequence!r} -> token ids {tokens.tokens}")

graph = build_graph(rec)
print(f"bead graph: {graph.num_nodes} nodes, {len(graph.edges)} edges")
for letter in rec.sequence:
    print(f"  residue {letter}: 1 backbone bead + {SIDE_BEADS[letter]} side bead(s)")
print(f"node -> residue map: {graph.residue_of_node}")

# deterministic splits: same seed, same membership
records = generate_synthetic(50, max_len=8, seed=3)
split = split_dataset(records, (0.8, 0.1, 0.1), seed=3)
print(f"\nsplit sizes: {len(split.train)}/{len(split.validation)}/{len(split.test)}")

again = split_dataset(records, (0.8, 0.1, 0.1), seed=3)
assert [r.id for r in split.train] == [r.id for r in again.train]
print("same seed reproduces the same split")

batches = make_batches(split.train, batch_size=16, seed=1)
print(f"batch sizes at batch_size=16: {[len(b) for b in batches]} "
      f"(trailing singletons fold into the previous batch)")
