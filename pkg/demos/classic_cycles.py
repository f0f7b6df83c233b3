"""
Cycles and escapes in a classic marriage market
===============================================

Satisfying blocking pairs one at a time need not reach a stable matching.
A fixed order can loop forever, while random choices escape.
"""

from rematch.market import blocking_pairs, is_stable_classic, run_deterministic, run_perturbed_classic
from rematch.scenario import builtin

# Knuth's three-by-three market with its bundled cycle script
knuth = builtin("example1_knuth")
market = knuth.market()
res = run_deterministic(market, knuth.initial.matching, policy="scripted", script=knuth.script)
print(res.kind, "of period", res.period)
for mu, pair in zip(res.matchings, res.pairs):
    print(f"  {knuth.matching_name(mu):4} blocked by {pair}")

# every matching on the cycle has blocking pairs
print("blocking pairs at mu1:", sorted(blocking_pairs(market, knuth.matchings["mu1"])))

# the mutual-optimal-first rule loops in the four-by-four example
cyc = builtin("example2_cycle")
det = run_deterministic(cyc.market(), cyc.initial.matching)
print("mutual-optimal-first:", det.kind, "period", det.period, "entered at step", det.entry)

# a perturbed run leaves the same start and settles
run = run_perturbed_classic(cyc.market(), cyc.initial.matching, epsilon=0.1, seed=4)
print("perturbed:", run.kind, "after", len(run.pairs), "satisfactions")
print("stable:", is_stable_classic(cyc.market(), run.matchings[-1]))
