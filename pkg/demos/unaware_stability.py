"""
Stability under unawareness
===========================

A pair that would block under full information can be harmless when
the two players do not commonly believe they would both gain.
"""

from rematch.awareness import belief_closure, effective_preference, type_map
from rematch.dynamics import best_blocking_sets, commonly_believed_block, is_stable
from rematch.market import blocking_pairs
from rematch.scenario import builtin

game = builtin("example3_unaware")
omega, mu = game.states["omega1"], game.matchings["mu0"]

# under the full space (m1, w2) blocks mu0
print("blocking pairs with everyone aware:", sorted(blocking_pairs(game.market(game.characteristics), mu)))

# but only m1 is aware of the characteristic
for i in game.players:
    print(f"  {i}: aware of {sorted(omega.aware(i)) or '-'}, ranks {effective_preference(i, omega, game.prefs)}")

# w2 sees only the base space, where m1 would rather keep w1
print("w2 believes state:", type_map("w2", omega).label())
print("states reachable by m1 and w2 beliefs:", len(belief_closure(omega, ("m1", "w2"))))
print("commonly believed block (m1,w2):", commonly_believed_block(game, omega, mu, "m1", "w2"))

print("best-blocking sets:", {i: sorted(s) for i, s in best_blocking_sets(game, omega, mu).items()})
print("stable:", is_stable(game, omega, mu))
