"""Awareness-raising communication between potential blocking partners.

A player flirts with someone on the other side when, in a state they can
conceive, raising the partner's awareness would make blocking a matter of
pairwise common belief.  Everybody who can do so talks in the same round;
rounds repeat until nobody's awareness changes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .awareness import State, common_belief, states_in, subspaces, type_map
from .dynamics import (
    Outcome,
    StepDistribution,
    blocking_event,
    blocking_step_distribution,
    is_absorbing,
    is_stable,
    outcome_space,
    simulate,
)
from .market import Matching, natural_key


def _opposite(game, i: str) -> tuple[str, ...]:
    return game.women if i in game.men else game.men


def _oriented(game, i: str, j: str) -> tuple[str, str]:
    return (i, j) if i in game.men else (j, i)


def hypothetical_states(game, i: str, omega: State, mu: Matching, j: str) -> set[State]:
    """States ``i`` can conceive in which raising ``j``'s awareness yields common belief in blocking.

    Enumerates every awareness profile within ``i``'s awareness space, so the
    cost grows as ``2 ** (|awareness| * players)``.
    """
    if j not in _opposite(game, i):
        raise ValueError(f"{i} and {j} are on the same side")
    m, w = _oriented(game, i, j)
    if mu.partner(m) == w:
        return set()
    event = blocking_event(game, m, w, mu)
    floor = type_map(i, omega).aware(j)
    return {
        s
        for s in states_in(omega.aware(i), game.men + game.women)
        if floor <= s.aware(j) and common_belief(m, w, event, s)
    }


def raised_awareness(game, i: str, omega: State, mu: Matching, j: str) -> frozenset[str]:
    """Join of ``j``'s awareness over ``i``'s hypothetical states (empty if none).

    Blocking events depend only on a state's space, and the belief closure of
    ``(i, j)`` only visits spaces built from their two awareness levels, so it
    suffices to range over those two levels instead of whole profiles.
    """
    if j not in _opposite(game, i):
        raise ValueError(f"{i} and {j} are on the same side")
    m, w = _oriented(game, i, j)
    if mu.partner(m) == w:
        return frozenset()
    event = blocking_event(game, m, w, mu)
    space = omega.aware(i)
    floor = space & omega.aware(j)
    others = {k: frozenset() for k in game.men + game.women}
    raised = frozenset()
    for own, theirs in itertools.product(subspaces(space), repeat=2):
        if not floor <= theirs or theirs <= raised:
            continue
        probe = State.of(space, {**others, i: own, j: theirs})
        if common_belief(m, w, event, probe):
            raised |= theirs
    return raised


@dataclass
class CommunicationResult:
    state: State
    rounds: int
    raised: list[dict] = field(default_factory=list)


def _communication_round(game, omega: State, mu: Matching, round_no: int) -> tuple[State, list[dict]]:
    updates: dict[str, frozenset[str]] = {}
    moves = []
    players = game.men + game.women
    for j in players:
        gained = frozenset()
        for i in _opposite(game, j):
            new = raised_awareness(game, i, omega, mu, j) - omega.aware(j)
            if new:
                moves.append({"kind": "flirt", "from": i, "to": j, "raised": sorted(new, key=natural_key), "round": round_no})
                gained |= new
        if gained:
            updates[j] = omega.aware(j) | gained
    return (omega.replace(updates) if updates else omega), moves


def communicate(game, omega: State, mu: Matching) -> State:
    """One simultaneous round of awareness-raising."""
    return _communication_round(game, omega, mu, 1)[0]


def communicate_fixpoint(game, omega: State, mu: Matching) -> CommunicationResult:
    """Repeat rounds until one leaves the state unchanged.

    ``rounds`` counts every application, including the final confirming one.
    """
    moves: list[dict] = []
    rounds = 0
    while True:
        rounds += 1
        nxt, made = _communication_round(game, omega, mu, rounds)
        moves.extend(made)
        if nxt == omega:
            return CommunicationResult(omega, rounds, moves)
        omega = nxt


def is_flirt_proof_stable(game, omega: State, mu: Matching) -> bool:
    return is_stable(game, omega, mu) and communicate_fixpoint(game, omega, mu).state == omega


def is_flirt_proof_self_confirming(game, omega: State, mu: Matching) -> bool:
    return is_absorbing(game, omega, mu) and is_flirt_proof_stable(game, omega, mu)


def q_step_distribution(game, omega: State, mu: Matching, epsilon: float) -> StepDistribution:
    """Communicate to the fixed point, then block as in the P-process."""
    settled = communicate_fixpoint(game, omega, mu).state
    return blocking_step_distribution(game, settled, mu, epsilon)


def run_q_process(game, start: Outcome, epsilon: float, seed: int, max_steps: int = 10_000):
    def kernel(omega, mu):
        talk = communicate_fixpoint(game, omega, mu)
        return blocking_step_distribution(game, talk.state, mu, epsilon), talk.raised, talk.state

    return simulate(
        game, start, epsilon, seed, max_steps, kernel,
        lambda omega, mu: is_flirt_proof_self_confirming(game, omega, mu), "q",
    )


def enumerate_flirt_proof(game, bound: int = 50_000, states=None) -> set[Outcome]:
    return {
        o
        for o in outcome_space(game, bound, states)
        if is_flirt_proof_self_confirming(game, o.state, o.matching)
    }
