"""
Traces and graphs
=================

Runs are written as JSON lines with a header that pins the scenario,
seed and perturbation.  Transition graphs are written in DOT.
"""

import tempfile
from pathlib import Path

from rematch.dynamics import run_p_process
from rematch.scenario import builtin, export_process_graph, read_trace, write_trace

out = Path(tempfile.mkdtemp())
game = builtin("example4_experience")

res = run_p_process(game, game.initial, epsilon=0.1, seed=7)
write_trace(res, out / "run.jsonl")
for record in read_trace(out / "run.jsonl"):
    print(record)

text = export_process_graph(builtin("example1_knuth"), out / "knuth.dot", process="classic")
print(text.splitlines()[0], "...", sum("->" in line for line in text.splitlines()), "edges")
print("render with: dot -Tsvg", out / "knuth.dot")
