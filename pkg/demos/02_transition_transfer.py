#!/usr/bin/env python3
"""Label-set-independent transitions: one table, any domain.

Transition scores are kept over abstract patterns (O/B/I crossed with
same-label/different-label targets, 13 cells total), so a table learned on
source domains expands onto any target label set. This script expands one
table onto two differently sized label sets, then shows Viterbi using the
expanded scores to veto an illegal decode that per-position argmax commits.
"""

import numpy as np

from fewtag import LabelSet, TransitionTable, expand, rule_decode, viterbi
from fewtag.crf import TABLE_ENTRIES

# a hand-written table: spans like to continue, illegal I-entries are walled off
values = {
    ("O", "O"): 1.0, ("O", "sB"): 0.4, ("O", "sI"): -4.0,
    ("B", "O"): 0.0, ("B", "sB"): -0.5, ("B", "dB"): -0.5, ("B", "sI"): 1.2, ("B", "dI"): -4.0,
    ("I", "O"): 0.2, ("I", "sB"): -0.3, ("I", "dB"): -0.3, ("I", "sI"): 0.8, ("I", "dI"): -4.0,
}
table = TransitionTable(entries=np.array([values[key] for key in TABLE_ENTRIES]))

for labels in (["city"], ["city", "artist", "genre"]):
    label_set = LabelSet(labels)
    matrix = expand(table, label_set)
    print(f"\nlabel set {labels}: {label_set.num_tags}x{label_set.num_tags} matrix")
    header = " ".join(f"{str(t):>9}" for t in label_set.tags)
    print(f"{'':>9} {header}")
    for a, row in enumerate(matrix.scores):
        cells = " ".join(f"{v:>9.1f}" for v in row)
        print(f"{str(label_set.tag_at(a)):>9} {cells}")

# --- decoding: argmax vs rule vs viterbi ---------------------------------------
label_set = LabelSet(["city", "artist"])
matrix = expand(table, label_set)
# emissions that love an I-artist right after O (illegal) and are lukewarm
# about continuing the city span it actually belongs to
emissions = np.array(
    [
        #   O   B-city I-city B-artist I-artist
        [ 2.0,  0.1,  -1.0,  0.0,  -1.0],
        [ 0.1,  2.0,  -0.5,  0.3,  -0.5],
        [ 0.4, -0.5,   0.3, -0.5,   0.9],  # wants I-artist, gold is I-city
        [ 2.0, -0.5,  -0.5, -0.5,  -0.5],
    ]
)
argmax_path = [int(i) for i in emissions.argmax(axis=1)]
rule_path = rule_decode(emissions, label_set)
viterbi_path = viterbi(emissions, matrix, lam=1.0)

def show(name, path):
    print(f"  {name:<8} {[str(label_set.tag_at(i)) for i in path]}")

print("\ndecoding comparison:")
show("argmax", argmax_path)   # picks the illegal I-artist
show("rule", rule_path)       # blocks it, falls back per position
show("viterbi", viterbi_path) # keeps the span together via transition scores
