"""
Which triplets does the teacher attend to?
==========================================

Train a small teacher through the command line, then export its attention
over (region, word, answer-word) triplets as JSON.
"""

import json
import tempfile
from pathlib import Path

from trifuse.cli import main

work = Path(tempfile.mkdtemp())
(work / "run.ini").write_text("""
[dims]
v = 4
q = 4
a = 4
d_z = 16

[data]
task = mc
n_train = 600
n_test = 100

[training]
step_size = 0.5
batch = 64
epochs = 5
normalize = softmax
""")

# %%
# Every verb writes a manifest next to its outputs.

cfg = str(work / "run.ini")
main(["gen-data", "--config", cfg, "--out", str(work / "data")])
main(["train-teacher", "--config", cfg, "--data", str(work / "data"), "--out", str(work / "teacher")])
main(["export-attention", "--config", cfg, "--data", str(work / "data"),
      "--checkpoint", str(work / "teacher" / "checkpoint.json"), "--index", "0", "1", "--out", str(work / "att")])

# %%
# Strongest triplets per example: indices are (V channel, Q channel, A channel).

maps = json.loads((work / "att" / "attention.json").read_text())
for ex in maps["examples"]:
    print(f"example {ex['index']} ({ex['qtype']}):")
    for t in ex["top"][:3]:
        print(f"   {tuple(t['triplet'])}  {t['weight']:.3f}")
print(sorted(json.loads((work / "att" / "manifest.json").read_text())))
