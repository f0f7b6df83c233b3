"""Awareness transitions, stability under pairwise common belief, and the P-process.

Functions take a ``game`` argument: anything exposing ``men``, ``women``,
``prefs`` (a :class:`~rematch.awareness.PreferenceMap`), ``rules`` and
``characteristics``.  :class:`rematch.scenario.Scenario` is the usual one.
"""

from __future__ import annotations

import enum
import random
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .awareness import Event, State, common_belief, space_key, states_in
from .market import Matching, MatchingError, Pair, count_matchings, natural_key, sample, satisfy_pair


class BoundExceeded(RuntimeError):
    """An exhaustive computation would visit more outcomes than allowed."""

    def __init__(self, size: int, bound: int, what: str = "outcome space"):
        super().__init__(f"{what} has {size} elements, above the bound of {bound}")
        self.size = size
        self.bound = bound


@dataclass(frozen=True)
class DiscoveryRule:
    """Awareness gained whenever a matching meets a condition.

    The condition lists pairs that must be matched and players that must be
    single; it never looks at awareness.
    """

    pairs: frozenset[Pair] = frozenset()
    single: frozenset[str] = frozenset()
    effects: tuple[tuple[str, frozenset[str]], ...] = ()

    def __post_init__(self):
        effects = tuple(sorted(((i, frozenset(c)) for i, c in dict(self.effects).items()), key=lambda kv: natural_key(kv[0])))
        if not any(c for _, c in effects):
            raise ValueError("a discovery rule must grant at least one characteristic")
        object.__setattr__(self, "pairs", frozenset(tuple(p) for p in self.pairs))
        object.__setattr__(self, "single", frozenset(self.single))
        object.__setattr__(self, "effects", effects)

    def fires(self, mu: Matching) -> bool:
        return all(mu.partner(m) == w for m, w in self.pairs) and all(mu.is_single(i) for i in self.single)


@dataclass(frozen=True)
class Outcome:
    matching: Matching
    state: State

    def label(self, men: Sequence[str] | None = None) -> str:
        return f"({self.matching.label(men)} @ {self.state.label()})"


@dataclass(frozen=True)
class Successor:
    outcome: Outcome
    probability: float
    pairs: tuple[Pair, ...]


StepDistribution = tuple[Successor, ...]


class Welfare(enum.Enum):
    BETTER = "better"
    SAME = "same"
    WORSE = "worse"


def transition(omega: State, mu: Matching, rules: Iterable[DiscoveryRule]) -> State:
    """Apply every rule firing at ``mu`` at once; awareness only grows."""
    gained: dict[str, frozenset[str]] = {}
    for rule in rules:
        if rule.fires(mu):
            for i, chars in rule.effects:
                gained[i] = gained.get(i, frozenset()) | (chars & omega.space)
    if not gained:
        return omega
    updates = {i: omega.aware(i) | c for i, c in gained.items() if not c <= omega.aware(i)}
    return omega.replace(updates) if updates else omega


def is_absorbing(game, omega: State, mu: Matching) -> bool:
    return transition(omega, mu, game.rules) == omega


def firing_rules(game, omega: State, mu: Matching) -> list[DiscoveryRule]:
    """Rules that would raise someone's awareness at ``(mu, omega)``."""
    return [r for r in game.rules if r.fires(mu) and any(not (c & omega.space) <= omega.aware(i) for i, c in r.effects)]


def blocking_event(game, m: str, w: str, mu: Matching) -> Event:
    """States whose space's rankings make ``(m, w)`` a blocking pair at ``mu``."""
    if mu.partner(m) == w:
        raise MatchingError(f"({m}, {w}) are matched; they cannot block")
    prefs = game.prefs
    current_m, current_w = mu.partner(m), mu.partner(w)

    def blocks(omega: State) -> bool:
        s = omega.space
        return prefs.prefers(w, s, m, current_w) and prefs.prefers(m, s, w, current_m)

    return Event(blocks, f"block({m},{w})")


def commonly_believed_block(game, omega: State, mu: Matching, m: str, w: str) -> bool:
    return mu.partner(m) != w and common_belief(m, w, blocking_event(game, m, w, mu), omega)


def prefers_single(game, omega: State, mu: Matching, i: str) -> bool:
    """``i`` would rather be alone, judged by ``i``'s effective ranking."""
    return game.prefs.prefers(i, omega.aware(i), i, mu.partner(i))


def is_stable(game, omega: State, mu: Matching) -> bool:
    return not any(best_blocking_sets(game, omega, mu).values())


def _memo(game) -> dict | None:
    """Per-game cache of best blocking sets; ``None`` if the game takes no attributes."""
    try:
        return game.__dict__.setdefault("_best_sets_memo", {})
    except AttributeError:
        return None


def best_blocking_sets(game, omega: State, mu: Matching) -> dict[str, frozenset[str]]:
    """Per player, commonly-believed blocking partners plus self if singlehood wins."""
    memo = _memo(game)
    if memo is not None and (omega, mu) in memo:
        return memo[(omega, mu)]
    sets = _best_blocking_sets(game, omega, mu)
    if memo is not None:
        if len(memo) > 200_000:
            memo.clear()
        memo[(omega, mu)] = sets
    return sets


def _best_blocking_sets(game, omega: State, mu: Matching) -> dict[str, frozenset[str]]:
    sets: dict[str, set[str]] = {i: set() for i in game.men + game.women}
    for m in game.men:
        for w in game.women:
            if commonly_believed_block(game, omega, mu, m, w):
                sets[m].add(w)
                sets[w].add(m)
    for i in sets:
        if prefers_single(game, omega, mu, i):
            sets[i].add(i)
    return {i: frozenset(s) for i, s in sets.items()}


def _best_partners(game, omega: State, mu: Matching) -> dict[str, str]:
    best = {}
    for i, options in best_blocking_sets(game, omega, mu).items():
        if options:
            awareness = omega.aware(i)
            best[i] = min(options, key=lambda j: game.prefs.rank(i, awareness, j))
    return best


def _normalize(game, i: str, j: str) -> Pair:
    return (j, i) if i != j and i in game.women else (i, j)


def pair_order(game) -> Callable[[Pair], tuple]:
    order = {i: n for n, i in enumerate(game.men + game.women)}
    return lambda p: (order[p[0]], order[p[1]])


def _split(game, best: Mapping[str, str]) -> tuple[set[Pair], set[Pair]]:
    every = {_normalize(game, i, j) for i, j in best.items()}
    mutual = {_normalize(game, i, j) for i, j in best.items() if best.get(j) == i}
    return every, mutual


def best_blocking_pairs(game, omega: State, mu: Matching) -> set[Pair]:
    """Commonly-believed best blocking pairs (best for at least one member)."""
    return _split(game, _best_partners(game, omega, mu))[0]


def mutual_best_blocking_pairs(game, omega: State, mu: Matching) -> set[Pair]:
    return _split(game, _best_partners(game, omega, mu))[1]


def priority_blocking_pairs(game, omega: State, mu: Matching) -> set[Pair]:
    """Mutual best pairs when there are any, otherwise all best pairs."""
    best, mutual = _split(game, _best_partners(game, omega, mu))
    return mutual or best


def is_self_confirming(game, omega: State, mu: Matching) -> bool:
    return is_absorbing(game, omega, mu) and is_stable(game, omega, mu)


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")


def blocking_step_distribution(game, omega: State, mu: Matching, epsilon: float) -> StepDistribution:
    """Perturbed satisfaction of one best blocking pair judged at ``omega``.

    ``1 - epsilon`` is shared by the priority pairs and ``epsilon`` by all
    best pairs; successor states follow the experience in the new matching.
    A stable ``mu`` keeps its matching with certainty.
    """
    _check_epsilon(epsilon)
    best, mutual = _split(game, _best_partners(game, omega, mu))
    if not best:
        return (Successor(Outcome(mu, transition(omega, mu, game.rules)), 1.0, ()),)
    key = pair_order(game)
    priority = mutual or best
    mass: dict[Pair, float] = {}
    for p in priority:
        mass[p] = mass.get(p, 0.0) + (1.0 - epsilon) / len(priority)
    for p in best:
        mass[p] = mass.get(p, 0.0) + epsilon / len(best)
    merged: dict[Outcome, list] = {}
    for p in sorted(mass, key=key):
        nxt = satisfy_pair(mu, p)
        out = Outcome(nxt, transition(omega, nxt, game.rules))
        entry = merged.setdefault(out, [0.0, []])
        entry[0] += mass[p]
        entry[1].append(p)
    return tuple(Successor(o, prob, tuple(pairs)) for o, (prob, pairs) in merged.items())


def p_step_distribution(game, omega: State, mu: Matching, epsilon: float) -> StepDistribution:
    return blocking_step_distribution(game, omega, mu, epsilon)


# -- simulation -------------------------------------------------------------


def matching_record(game, mu: Matching) -> dict[str, str | None]:
    return mu.as_dict(game.men)


def awareness_record(omega: State) -> dict[str, list[str]]:
    return {i: sorted(a, key=natural_key) for i, a in omega.awareness}


@dataclass
class RunResult:
    """A simulated trajectory.  ``records`` excludes the header."""

    header: dict
    records: list[dict]
    path: list[Outcome]
    converged: bool

    @property
    def terminal(self) -> Outcome:
        return self.path[-1]

    @property
    def steps(self) -> int:
        return len(self.path) - 1


def run_header(game, process: str, seed: int, epsilon: float, start: Outcome) -> dict:
    digest = game.digest() if hasattr(game, "digest") else None
    return {
        "step": 0,
        "kind": "header",
        "process": process,
        "scenario": getattr(game, "name", None),
        "digest": digest,
        "seed": seed,
        "epsilon": epsilon,
        "matching": matching_record(game, start.matching),
        "awareness": awareness_record(start.state),
    }


def simulate(
    game,
    start: Outcome,
    epsilon: float,
    seed: int,
    max_steps: int,
    kernel: Callable[[State, Matching], tuple[StepDistribution, list[dict], State]],
    done: Callable[[State, Matching], bool],
    process: str,
) -> RunResult:
    """Sample a chain from a one-step kernel, one uniform draw per step.

    The kernel returns the step distribution, any communication records, and
    the state at which blocking was judged.
    """
    _check_epsilon(epsilon)
    rng = random.Random(seed)
    header = run_header(game, process, seed, epsilon, start)
    records: list[dict] = []
    path = [start]
    current = start

    def emit(kind, **payload):
        records.append({"step": len(records) + 1, "kind": kind, **payload})

    converged = done(current.state, current.matching)
    t = 0
    while not converged and t < max_steps:
        t += 1
        dist, extra, judged = kernel(current.state, current.matching)
        for rec in extra:
            emit(time=t, **rec)
        u = rng.random()
        succ = sample(dist, [s.probability for s in dist], u)
        nxt = succ.outcome
        if succ.pairs:
            emit(
                "satisfy",
                time=t,
                pair=list(succ.pairs[0]),
                pairs=[list(p) for p in succ.pairs],
                matching=matching_record(game, nxt.matching),
                awareness=awareness_record(judged),
                rng_draw=u,
            )
        if nxt.state != judged or not succ.pairs:
            before = judged
            gained = {i: sorted(nxt.state.aware(i) - before.aware(i), key=natural_key)
                      for i in nxt.state.players if nxt.state.aware(i) - before.aware(i)}
            emit(
                "experience",
                time=t,
                matching=matching_record(game, nxt.matching),
                awareness=awareness_record(nxt.state),
                gained=gained,
                rng_draw=None if succ.pairs else u,
            )
        current = nxt
        path.append(current)
        converged = done(current.state, current.matching)
    emit(
        "terminal",
        time=t,
        converged=converged,
        matching=matching_record(game, current.matching),
        awareness=awareness_record(current.state),
        steps=t,
    )
    return RunResult(header, records, path, converged)


def run_p_process(game, start: Outcome, epsilon: float, seed: int, max_steps: int = 10_000) -> RunResult:
    """Run P until a self-confirming outcome or ``max_steps`` transitions."""

    def kernel(omega, mu):
        return p_step_distribution(game, omega, mu, epsilon), [], omega

    return simulate(
        game, start, epsilon, seed, max_steps, kernel,
        lambda omega, mu: is_self_confirming(game, omega, mu), "p",
    )


# -- enumeration and exact chains -------------------------------------------


def join_space(game) -> frozenset[str]:
    return frozenset(game.characteristics)


def outcome_space_size(game, states: Sequence[State] | None = None) -> int:
    n_players = len(game.men) + len(game.women)
    n_states = len(states) if states is not None else 2 ** (len(game.characteristics) * n_players)
    return n_states * count_matchings(len(game.men), len(game.women))


def outcome_space(game, bound: int, states: Sequence[State] | None = None):
    """All (matching, state) pairs over the join space, or over ``states``."""
    from .market import all_matchings

    size = outcome_space_size(game, states)
    if size > bound:
        raise BoundExceeded(size, bound)
    if states is None:
        states = list(states_in(join_space(game), game.men + game.women))
    matchings = list(all_matchings(game.men, game.women))
    for omega in states:
        for mu in matchings:
            yield Outcome(mu, omega)


def enumerate_self_confirming(game, bound: int = 50_000, states: Sequence[State] | None = None) -> set[Outcome]:
    return {o for o in outcome_space(game, bound, states) if is_self_confirming(game, o.state, o.matching)}


def build_chain(
    game,
    starts: Iterable[Outcome],
    kernel: Callable[[State, Matching], StepDistribution],
    bound: int = 50_000,
) -> dict[Outcome, StepDistribution]:
    """Exact transition table over every outcome reachable from ``starts``."""
    chain: dict[Outcome, StepDistribution] = {}
    queue = deque(starts)
    while queue:
        o = queue.popleft()
        if o in chain:
            continue
        if len(chain) >= bound:
            raise BoundExceeded(len(chain) + 1, bound, "reachable chain")
        dist = kernel(o.state, o.matching)
        chain[o] = dist
        queue.extend(s.outcome for s in dist if s.outcome not in chain)
    return chain


def absorbing_outcomes(chain: Mapping[Outcome, StepDistribution], tol: float = 1e-12) -> set[Outcome]:
    return {o for o, dist in chain.items() if any(s.outcome == o and s.probability >= 1.0 - tol for s in dist)}


def closed_classes(chain: Mapping[Outcome, StepDistribution]) -> list[set[Outcome]]:
    """Closed communicating classes of the chain's support graph."""
    import networkx as nx

    g = nx.DiGraph()
    g.add_nodes_from(chain)
    for o, dist in chain.items():
        g.add_edges_from((o, s.outcome) for s in dist if s.probability > 0)
    return [set(c) for c in nx.attracting_components(g)]


# -- infidelity, welfare, branch search -------------------------------------


def apply_infidelity(game, omega: State, mu: Matching, pair: Pair) -> Outcome:
    """A temporary match that reverts; only the awareness it triggers remains."""
    m, w = pair
    if mu.partner(m) == w:
        raise MatchingError(f"({m}, {w}) are already matched")
    return Outcome(mu, transition(omega, satisfy_pair(mu, pair), game.rules))


def welfare_delta(game, i: str, before: Matching, after: Matching, omega: State) -> Welfare:
    awareness = omega.aware(i)
    old = game.prefs.rank(i, awareness, before.partner(i))
    new = game.prefs.rank(i, awareness, after.partner(i))
    if new < old:
        return Welfare.BETTER
    if new > old:
        return Welfare.WORSE
    return Welfare.SAME


def branch_terminals(
    game,
    start: Outcome,
    choices: Callable[[object, State, Matching], set[Pair]] = priority_blocking_pairs,
    bound: int = 200_000,
) -> set[Outcome]:
    """Stable absorbing outcomes reachable when any offered pair may be chosen.

    Stable but non-absorbing outcomes move by experience alone.
    """
    seen: set[Outcome] = set()
    terminals: set[Outcome] = set()
    stack = [start]
    while stack:
        o = stack.pop()
        if o in seen:
            continue
        seen.add(o)
        if len(seen) > bound:
            raise BoundExceeded(len(seen), bound, "branch search")
        omega, mu = o.state, o.matching
        pairs = choices(game, omega, mu) if not is_stable(game, omega, mu) else set()
        if not pairs:
            nxt = transition(omega, mu, game.rules)
            if nxt == omega:
                terminals.add(o)
            else:
                stack.append(Outcome(mu, nxt))
            continue
        for p in pairs:
            mu2 = satisfy_pair(mu, p)
            stack.append(Outcome(mu2, transition(omega, mu2, game.rules)))
    return terminals
