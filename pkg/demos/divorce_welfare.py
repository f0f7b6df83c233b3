"""
Who gains from divorce
======================

In a five-by-five market everybody learns something once the first
stable matching forms.  The process then leaves that matching, and
depending on the path a player ends up better, worse or unchanged.
"""

from collections import Counter

from rematch.dynamics import Outcome, Welfare, best_blocking_pairs, branch_terminals, run_p_process, welfare_delta
from rematch.scenario import builtin

game = builtin("example8_divorce")
mu1, om2 = game.matchings["mu1"], game.states["omega2"]
start = Outcome(mu1, om2)

# every stable matching reachable through best blocking pairs
for o in sorted(branch_terminals(game, start, best_blocking_pairs), key=lambda o: o.matching.label()):
    verdict = {i: welfare_delta(game, i, mu1, o.matching, om2).value for i in ("m1", "w1")}
    print(o.matching.label(), verdict)

# how often each happens under the perturbed process
tally = Counter()
for seed in range(300):
    end = run_p_process(game, start, epsilon=0.1, seed=seed).terminal
    tally[welfare_delta(game, "m1", mu1, end.matching, om2)] += 1
print({w.value: tally[w] for w in Welfare})
