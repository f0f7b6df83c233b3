"""
Exact transition chains
=======================

For small markets the perturbed process is a finite Markov chain.  Its
absorbing outcomes are exactly the self-confirming ones.
"""

from rematch.dynamics import absorbing_outcomes, build_chain, closed_classes, enumerate_self_confirming, outcome_space, p_step_distribution
from rematch.scenario import builtin

game = builtin("example7_belief")
chain = build_chain(game, outcome_space(game, 10_000), lambda om, mu: p_step_distribution(game, om, mu, 0.1))
print(len(chain), "outcomes in the chain")

absorbing = absorbing_outcomes(chain)
print(len(absorbing), "absorbing;", "equal to self-confirming:", absorbing == enumerate_self_confirming(game))
print("closed classes:", sorted(len(c) for c in closed_classes(chain)))

start = game.initial
for s in chain[start]:
    print(f"  from {game.describe(start)}: {s.probability:.3f} -> {game.describe(s.outcome)}")
