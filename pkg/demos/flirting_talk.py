"""
Flirting
========

Unmatched players may talk before deciding to block.  A player raises
a characteristic when doing so could convince the other side.
"""

from rematch.flirting import communicate_fixpoint, enumerate_flirt_proof, is_flirt_proof_stable, run_q_process
from rematch.dynamics import is_stable
from rematch.scenario import builtin

game = builtin("example6_flirt")
omega, mu = game.states["omega1"], game.matchings["mu0"]
print("stable:", is_stable(game, omega, mu))
print("flirt-proof stable:", is_flirt_proof_stable(game, omega, mu))

talk = communicate_fixpoint(game, omega, mu)
for move in talk.raised:
    print(f"  round {move['round']}: {move['from']} tells {move['to']} about {move['raised']}")
print("awareness after talking:", game.state_name(talk.state), f"({talk.rounds} rounds)")

res = run_q_process(game, game.initial, epsilon=0.1, seed=2)
print(" -> ".join(game.describe(o) for o in res.path))

for o in sorted(enumerate_flirt_proof(game, states=list(game.states.values())), key=game.describe):
    print("flirt-proof self-confirming:", game.describe(o))
