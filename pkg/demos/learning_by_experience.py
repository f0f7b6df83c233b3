"""
Learning from experience
========================

Being matched can reveal a characteristic.  Once revealed, a stable
matching may stop being stable and the process moves on.
"""

from rematch.dynamics import is_self_confirming, is_stable, p_step_distribution, run_p_process, transition
from rematch.scenario import builtin

game = builtin("example4_experience")
mu0, om1 = game.matchings["mu0"], game.states["omega1"]

# stable but not absorbing: matched to w1, m1 discovers c
print("stable at start:", is_stable(game, om1, mu0))
print("self-confirming:", is_self_confirming(game, om1, mu0))
print("next state:", game.state_name(transition(om1, mu0, game.rules)))

# one step of the perturbed process from the revealed state
for s in p_step_distribution(game, game.states["omega2"], mu0, epsilon=0.1):
    print(f"  satisfy {s.pairs} with probability {s.probability:.2f} -> {game.describe(s.outcome)}")

res = run_p_process(game, game.initial, epsilon=0.1, seed=1)
print(" -> ".join(game.describe(o) for o in res.path))
