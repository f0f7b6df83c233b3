"""Full-awareness two-sided matching primitives and decentralized blocking processes.

Players are plain string labels (``"m1"``, ``"w3"``).  A pair is always written
``(man, woman)``; a unilateral divorce is written ``(i, i)``.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

Pair = tuple[str, str]


class MatchingError(ValueError):
    """Raised for structurally invalid matchings or pair operations."""


@dataclass(frozen=True)
class Matching:
    """A symmetric partial pairing of men and women.

    Players that do not appear in ``pairs`` are self-matched (single).
    """

    pairs: frozenset[Pair]
    _partner: dict = field(init=False, compare=False, repr=False, hash=False)

    def __post_init__(self):
        partner: dict[str, str] = {}
        men, women = set(), set()
        for m, w in self.pairs:
            if m == w:
                raise MatchingError(f"pair ({m}, {w}) matches a player to themselves")
            for i in (m, w):
                if i in partner:
                    raise MatchingError(f"player {i} appears in more than one pair")
            partner[m] = w
            partner[w] = m
            men.add(m)
            women.add(w)
        clash = men & women
        if clash:
            raise MatchingError(f"players {sorted(clash)} appear on both sides")
        object.__setattr__(self, "pairs", frozenset(self.pairs))
        object.__setattr__(self, "_partner", partner)

    @classmethod
    def of(cls, pairs: Iterable[Pair] | Mapping[str, str | None] = ()) -> "Matching":
        """Build from ``(man, woman)`` pairs or a ``{man: woman | None}`` mapping."""
        if isinstance(pairs, Mapping):
            pairs = [(m, w) for m, w in pairs.items() if w is not None and w != m]
        return cls(frozenset(tuple(p) for p in pairs))

    def partner(self, i: str) -> str:
        return self._partner.get(i, i)

    def is_single(self, i: str) -> bool:
        return i not in self._partner

    def as_dict(self, men: Sequence[str]) -> dict[str, str | None]:
        return {m: self._partner.get(m) for m in men}

    def label(self, men: Sequence[str] | None = None) -> str:
        """Compact text form, e.g. ``"m1:w1,m2:w2"`` (``"-"`` when empty)."""
        if men is None:
            ordered = sorted(self.pairs, key=lambda p: natural_key(p[0]))
        else:
            ordered = [(m, self._partner[m]) for m in men if m in self._partner]
        return ",".join(f"{m}:{w}" for m, w in ordered) or "-"

    def __len__(self):
        return len(self.pairs)


def natural_key(label: str):
    """Sort key placing ``m2`` before ``m10``."""
    head = label.rstrip("0123456789")
    tail = label[len(head):]
    return (head, int(tail) if tail else -1, label)


def satisfy_pair(mu: Matching, pair: Pair) -> Matching:
    """Satisfy a blocking pair: both members leave their partners and match.

    ``(i, i)`` divorces ``i`` to singlehood.
    """
    a, b = pair
    if a == b:
        if mu.is_single(a):
            raise MatchingError(f"player {a} is already single")
        return Matching(frozenset(p for p in mu.pairs if a not in p))
    if mu.partner(a) == b:
        raise MatchingError(f"({a}, {b}) are already matched to each other")
    kept = [p for p in mu.pairs if a not in p and b not in p]
    kept.append((a, b))
    return Matching(frozenset(kept))


def all_matchings(men: Sequence[str], women: Sequence[str]) -> Iterator[Matching]:
    """Every matching between ``men`` and ``women`` (singles allowed)."""
    for k in range(min(len(men), len(women)) + 1):
        for ms in itertools.combinations(men, k):
            for ws in itertools.permutations(women, k):
                yield Matching(frozenset(zip(ms, ws)))


def count_matchings(n_men: int, n_women: int) -> int:
    from math import comb, factorial

    return sum(comb(n_men, k) * comb(n_women, k) * factorial(k) for k in range(min(n_men, n_women) + 1))


@dataclass(frozen=True)
class ClassicMarket:
    """Men, women, and one strict rank-order list per player.

    Each list ranks the opposite side plus the owner (staying single).  Lists
    that omit the owner get the owner appended last.
    """

    men: tuple[str, ...]
    women: tuple[str, ...]
    prefs: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        object.__setattr__(self, "men", tuple(self.men))
        object.__setattr__(self, "women", tuple(self.women))
        labels = self.men + self.women
        if len(set(labels)) != len(labels):
            raise ValueError("player labels must be unique")
        prefs = {}
        for i in labels:
            if i not in self.prefs:
                raise ValueError(f"no rank-order list for {i}")
            prefs[i] = complete_ranking(i, self.prefs[i], self.women if i in self.men else self.men)
        object.__setattr__(self, "prefs", prefs)
        object.__setattr__(self, "_rank", {i: {j: r for r, j in enumerate(prefs[i])} for i in labels})
        object.__setattr__(self, "_order", {i: n for n, i in enumerate(labels)})

    @property
    def players(self) -> tuple[str, ...]:
        return self.men + self.women

    def is_man(self, i: str) -> bool:
        return i in self._order and self._order[i] < len(self.men)

    def prefers(self, i: str, a: str, b: str) -> bool:
        """True iff ``i`` strictly prefers ``a`` to ``b``."""
        rank = self._rank[i]
        return rank[a] < rank[b]

    def normalize(self, i: str, j: str) -> Pair:
        return (j, i) if i != j and not self.is_man(i) else (i, j)

    def pair_key(self, pair: Pair):
        return (self._order[pair[0]], self._order[pair[1]])

    def check(self, mu: Matching) -> None:
        for m, w in mu.pairs:
            if m not in self._order or w not in self._order:
                raise MatchingError(f"pair ({m}, {w}) names an unknown player")
            if not self.is_man(m) or self.is_man(w):
                raise MatchingError(f"pair ({m}, {w}) is not (man, woman)")


def complete_ranking(owner: str, ranking: Sequence[str], opposite: Sequence[str]) -> tuple[str, ...]:
    """Validate a rank list and append the owner last if it was omitted."""
    ranking = tuple(ranking)
    if len(set(ranking)) != len(ranking):
        raise ValueError(f"ranking of {owner} lists someone twice")
    if owner not in ranking:
        ranking = ranking + (owner,)
    expected = set(opposite) | {owner}
    if set(ranking) != expected:
        missing = sorted(expected - set(ranking), key=natural_key)
        extra = sorted(set(ranking) - expected, key=natural_key)
        raise ValueError(f"ranking of {owner} is not a permutation: missing {missing}, unexpected {extra}")
    return ranking


def blocking_pairs(market: ClassicMarket, mu: Matching) -> set[Pair]:
    market.check(mu)
    out = set()
    for m in market.men:
        for w in market.women:
            if mu.partner(m) != w and market.prefers(w, m, mu.partner(w)) and market.prefers(m, w, mu.partner(m)):
                out.add((m, w))
    return out


def individually_irrational_players(market: ClassicMarket, mu: Matching) -> set[str]:
    market.check(mu)
    return {i for i in market.players if market.prefers(i, i, mu.partner(i))}


def optimal_blocking_partner(market: ClassicMarket, mu: Matching, i: str) -> str | None:
    """``i``'s most preferred blocking partner (``i`` itself if singlehood wins)."""
    candidates = [j for j in market.prefs[i] if j != i and _blocks(market, mu, i, j)]
    if market.prefers(i, i, mu.partner(i)):
        candidates.append(i)
    if not candidates:
        return None
    return min(candidates, key=market._rank[i].__getitem__)


def _blocks(market, mu, i, j):
    return mu.partner(i) != j and market.prefers(i, j, mu.partner(i)) and market.prefers(j, i, mu.partner(j))


def optimal_blocking_pairs(market: ClassicMarket, mu: Matching) -> set[Pair]:
    market.check(mu)
    out = set()
    for i in market.players:
        j = optimal_blocking_partner(market, mu, i)
        if j is not None:
            out.add(market.normalize(i, j))
    return out


def mutually_optimal_blocking_pairs(market: ClassicMarket, mu: Matching) -> set[Pair]:
    market.check(mu)
    best = {i: optimal_blocking_partner(market, mu, i) for i in market.players}
    return {market.normalize(i, j) for i, j in best.items() if j is not None and best[j] == i}


def is_stable_classic(market: ClassicMarket, mu: Matching) -> bool:
    return not blocking_pairs(market, mu) and not individually_irrational_players(market, mu)


def deferred_acceptance(market: ClassicMarket, proposing: str = "men") -> Matching:
    """Gale-Shapley; returns the proposing side's optimal stable matching."""
    if proposing not in ("men", "women"):
        raise ValueError("proposing must be 'men' or 'women'")
    proposers = market.men if proposing == "men" else market.women
    nxt = {p: 0 for p in proposers}
    held: dict[str, str] = {}
    free = list(proposers)
    while free:
        p = free.pop()
        ranking = market.prefs[p]
        while True:
            target = ranking[nxt[p]]
            nxt[p] += 1
            if target == p:
                break  # every acceptable partner has rejected p
            if market.prefers(target, target, p):
                continue
            current = held.get(target)
            if current is None:
                held[target] = p
                break
            if market.prefers(target, p, current):
                held[target] = p
                free.append(current)
                break
    if proposing == "men":
        return Matching.of((m, w) for w, m in held.items())
    return Matching.of(held.items())


@dataclass(frozen=True)
class ProcessResult:
    """Outcome of a deterministic or perturbed classic run.

    ``kind`` is ``"stable"``, ``"cycle"`` or ``"exhausted"``.  ``matchings[k+1]``
    results from ``matchings[k]`` by satisfying ``pairs[k]``.  For a cycle,
    ``matchings[entry] == matchings[entry + period]``.
    """

    kind: str
    matchings: tuple[Matching, ...]
    pairs: tuple[Pair, ...]
    entry: int | None = None
    period: int | None = None

    @property
    def terminal(self) -> Matching:
        return self.matchings[-1]

    @property
    def steps(self) -> int:
        return len(self.pairs)


def _least(market: ClassicMarket, pairs: set[Pair]) -> Pair:
    return min(pairs, key=market.pair_key)


def run_deterministic(
    market: ClassicMarket,
    mu0: Matching,
    policy: str = "mutual-optimal-first",
    max_steps: int = 1000,
    script: Sequence[Pair] | None = None,
) -> ProcessResult:
    """Satisfy blocking pairs under a fixed policy until stability or a revisit.

    ``policy="scripted"`` replays ``script``; ``"mutual-optimal-first"``
    takes the least mutually optimal pair, else the least optimal pair.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    if policy == "scripted" and script is None:
        raise ValueError("scripted policy needs a script")
    if policy not in ("scripted", "mutual-optimal-first"):
        raise ValueError(f"unknown policy {policy!r}")
    market.check(mu0)
    matchings = [mu0]
    pairs: list[Pair] = []
    seen = {mu0: 0}
    mu = mu0
    for step in range(max_steps):
        if is_stable_classic(market, mu):
            return ProcessResult("stable", tuple(matchings), tuple(pairs))
        if policy == "scripted":
            if step >= len(script):
                break
            pair = tuple(script[step])
            legal = blocking_pairs(market, mu) | {(i, i) for i in individually_irrational_players(market, mu)}
            if pair not in legal:
                raise MatchingError(f"script step {step}: {pair} is not a blocking pair at {mu.label(market.men)}")
        else:
            mutual = mutually_optimal_blocking_pairs(market, mu)
            pair = _least(market, mutual or optimal_blocking_pairs(market, mu))
        mu = satisfy_pair(mu, pair)
        matchings.append(mu)
        pairs.append(pair)
        if mu in seen:
            entry = seen[mu]
            return ProcessResult("cycle", tuple(matchings), tuple(pairs), entry, len(pairs) - entry)
        seen[mu] = len(pairs)
    if is_stable_classic(market, mu):
        return ProcessResult("stable", tuple(matchings), tuple(pairs))
    return ProcessResult("exhausted", tuple(matchings), tuple(pairs))


def perturbed_classic_distribution(market: ClassicMarket, mu: Matching, epsilon: float) -> dict[Pair, float]:
    """One-step pair probabilities of the perturbed classic process.

    Mass ``1 - epsilon`` is spread over mutually optimal pairs and ``epsilon``
    over optimal pairs that are not mutually optimal.  When one of the two
    sets is empty its share goes to the other.  Empty for stable ``mu``.
    """
    _check_epsilon(epsilon)
    optimal = optimal_blocking_pairs(market, mu)
    if not optimal:
        return {}
    mutual = mutually_optimal_blocking_pairs(market, mu)
    others = optimal - mutual
    if not mutual or not others:
        group = mutual or others
        return {p: 1.0 / len(group) for p in sorted(group, key=market.pair_key)}
    dist = {p: (1.0 - epsilon) / len(mutual) for p in sorted(mutual, key=market.pair_key)}
    dist.update({p: epsilon / len(others) for p in sorted(others, key=market.pair_key)})
    return dist


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")


def sample(items: Sequence, probs: Sequence[float], u: float):
    """Inverse-CDF pick of one item for a uniform draw ``u`` in [0, 1)."""
    acc = 0.0
    for item, p in zip(items, probs):
        acc += p
        if u < acc:
            return item
    return items[-1]


def run_perturbed_classic(
    market: ClassicMarket, mu0: Matching, epsilon: float, seed: int, max_steps: int = 10_000
) -> ProcessResult:
    _check_epsilon(epsilon)
    market.check(mu0)
    rng = random.Random(seed)
    matchings = [mu0]
    pairs: list[Pair] = []
    mu = mu0
    for _ in range(max_steps):
        dist = perturbed_classic_distribution(market, mu, epsilon)
        if not dist:
            return ProcessResult("stable", tuple(matchings), tuple(pairs))
        pair = sample(list(dist), list(dist.values()), rng.random())
        mu = satisfy_pair(mu, pair)
        matchings.append(mu)
        pairs.append(pair)
    kind = "stable" if is_stable_classic(market, mu) else "exhausted"
    return ProcessResult(kind, tuple(matchings), tuple(pairs))
