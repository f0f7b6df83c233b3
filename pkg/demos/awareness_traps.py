"""
Traps and infidelity
====================

Players can settle in an outcome that looks stable only because nobody
ever tries the match that would teach them better.  An affair outside
the matching can break the trap.
"""

from rematch.dynamics import apply_infidelity, enumerate_self_confirming, run_p_process
from rematch.scenario import builtin

game = builtin("example5_trap")
for o in sorted(enumerate_self_confirming(game, states=list(game.states.values())), key=game.describe):
    print("self-confirming:", game.describe(o))

# from the initial outcome nothing moves
res = run_p_process(game, game.initial, epsilon=0.2, seed=0)
print("run from start ends at", game.describe(res.terminal), "after", res.steps, "steps")

# an affair between m1 and w2 teaches them c while the matching stays put
after = apply_infidelity(game, game.initial.state, game.initial.matching, ("m1", "w2"))
print("after the affair:", game.describe(after))
res = run_p_process(game, after, epsilon=0.2, seed=0)
print("run then ends at", game.describe(res.terminal))
