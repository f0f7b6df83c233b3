"""Canonical characteristics-based unawareness structures.

A space is a frozenset of characteristic ids; set inclusion is the lattice
order and union the join.  A state is a space together with every player's
awareness (a subspace of it).  Point beliefs come from intersecting awareness
profiles, which makes the structure introspective and free of redundancies.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .market import complete_ranking, natural_key

Space = frozenset
BASE = frozenset()


class PreferenceError(KeyError):
    """A ranking is needed for a (player, space) that has none."""

    def __str__(self):
        return str(self.args[0])


def space_key(space: Iterable[str]) -> str:
    """File key of a space: ``"base"`` or sorted ids joined by ``+``."""
    chars = sorted(space, key=natural_key)
    return "+".join(chars) if chars else "base"


def parse_space(key: str) -> frozenset[str]:
    key = key.strip()
    if key in ("base", "-", ""):
        return BASE
    return frozenset(c.strip() for c in key.split("+"))


def subspaces(space: Iterable[str]) -> list[frozenset[str]]:
    chars = sorted(space, key=natural_key)
    return [frozenset(c) for k in range(len(chars) + 1) for c in itertools.combinations(chars, k)]


@dataclass(frozen=True)
class State:
    space: frozenset[str]
    awareness: tuple[tuple[str, frozenset[str]], ...]
    _aware: dict = field(init=False, compare=False, repr=False, hash=False)

    def __post_init__(self):
        aware = {}
        for i, a in self.awareness:
            a = frozenset(a)
            if not a <= self.space:
                raise ValueError(f"awareness of {i} ({space_key(a)}) exceeds space {space_key(self.space)}")
            aware[i] = a
        object.__setattr__(self, "space", frozenset(self.space))
        object.__setattr__(self, "awareness", tuple(sorted(aware.items(), key=lambda kv: natural_key(kv[0]))))
        object.__setattr__(self, "_aware", aware)

    @classmethod
    def of(cls, space: Iterable[str], awareness: Mapping[str, Iterable[str]]) -> "State":
        return cls(frozenset(space), tuple((i, frozenset(a)) for i, a in awareness.items()))

    def aware(self, i: str) -> frozenset[str]:
        return self._aware[i]

    @property
    def players(self) -> tuple[str, ...]:
        return tuple(i for i, _ in self.awareness)

    def replace(self, updates: Mapping[str, frozenset[str]]) -> "State":
        return State.of(self.space, {i: updates.get(i, a) for i, a in self.awareness})

    def label(self) -> str:
        body = "|".join(f"{i}:{space_key(a) if a else '-'}" for i, a in self.awareness)
        return f"[{space_key(self.space)}] {body}"


def project(omega: State, target: Iterable[str]) -> State:
    target = frozenset(target)
    if not target <= omega.space:
        raise ValueError(f"{space_key(target)} is not a subspace of {space_key(omega.space)}")
    return State.of(target, {i: a & target for i, a in omega.awareness})


@functools.lru_cache(maxsize=1 << 16)
def type_map(i: str, omega: State) -> State:
    """``i``'s point belief: the projection of ``omega`` to ``i``'s awareness."""
    return project(omega, omega.aware(i))


def awareness_level(i: str, omega: State) -> frozenset[str]:
    return omega.aware(i)


def states_in(space: Iterable[str], players: Sequence[str]) -> Iterator[State]:
    """Every canonical state of ``space`` (all awareness profiles within it)."""
    space = frozenset(space)
    subs = subspaces(space)
    for profile in itertools.product(subs, repeat=len(players)):
        yield State(space, tuple(zip(players, profile)))


def all_states(characteristics: Iterable[str], players: Sequence[str]) -> Iterator[State]:
    for space in subspaces(characteristics):
        yield from states_in(space, players)


class PreferenceMap:
    """Rank-order lists per (player, space); complete lists end with self."""

    def __init__(self, men: Sequence[str], women: Sequence[str], rankings: Mapping[tuple[str, frozenset], Sequence[str]]):
        self.men = tuple(men)
        self.women = tuple(women)
        self._lists: dict[tuple[str, frozenset], tuple[str, ...]] = {}
        self._rank: dict[tuple[str, frozenset], dict[str, int]] = {}
        man_set = set(self.men)
        for (i, space), ranking in rankings.items():
            space = frozenset(space)
            if i not in man_set and i not in self.women:
                raise ValueError(f"ranking given for unknown player {i}")
            full = complete_ranking(i, ranking, self.women if i in man_set else self.men)
            self._lists[(i, space)] = full
            self._rank[(i, space)] = {j: r for r, j in enumerate(full)}

    def ranking(self, i: str, space: Iterable[str]) -> tuple[str, ...]:
        try:
            return self._lists[(i, frozenset(space))]
        except KeyError:
            raise PreferenceError(f"no ranking for {i} at space {space_key(space)}") from None

    def has(self, i: str, space: Iterable[str]) -> bool:
        return (i, frozenset(space)) in self._lists

    def prefers(self, i: str, space: frozenset, a: str, b: str) -> bool:
        try:
            rank = self._rank[(i, space)]
        except KeyError:
            raise PreferenceError(f"no ranking for {i} at space {space_key(space)}") from None
        return rank[a] < rank[b]

    def rank(self, i: str, space: frozenset, j: str) -> int:
        return self._rank[(i, frozenset(space))][j]

    def items(self):
        return self._lists.items()

    def spaces(self, i: str) -> list[frozenset[str]]:
        return [s for (j, s) in self._lists if j == i]


def effective_preference(i: str, omega: State, prefs: PreferenceMap) -> tuple[str, ...]:
    return prefs.ranking(i, omega.aware(i))


class Event:
    """A set of states given by a membership predicate."""

    def __init__(self, predicate: Callable[[State], bool], name: str = "event"):
        self.predicate = predicate
        self.name = name

    def __contains__(self, omega: State) -> bool:
        return bool(self.predicate(omega))

    def __repr__(self):
        return f"Event({self.name})"

    @classmethod
    def from_states(cls, states: Iterable[State], name: str = "explicit") -> "Event":
        members = frozenset(states)
        return cls(members.__contains__, name)


EVERYTHING = Event(lambda omega: True, "everything")
NOTHING = Event(lambda omega: False, "nothing")


def believes(i: str, event: Event, omega: State) -> bool:
    return type_map(i, omega) in event


@functools.lru_cache(maxsize=1 << 16)
def _closure(omega: State, players: tuple[str, ...]) -> frozenset[State]:
    seen: set[State] = set()
    stack = [type_map(i, omega) for i in players]
    while stack:
        s = stack.pop()
        if s in seen:
            continue
        seen.add(s)
        stack.extend(type_map(i, s) for i in players)
    return frozenset(seen)


def belief_closure(omega: State, players: Sequence[str]) -> frozenset[State]:
    """States reachable from ``omega`` by one or more type maps of ``players``."""
    return _closure(omega, tuple(players))


def common_belief(m: str, w: str, event: Event, omega: State) -> bool:
    """Pairwise common belief: every belief-reachable state lies in ``event``."""
    return all(s in event for s in belief_closure(omega, (m, w)))


@dataclass
class StructureReport:
    violations: list[str] = field(default_factory=list)
    checked: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str) -> None:
        self.violations.append(message)


def check_type_map_properties(characteristics: Iterable[str], players: Sequence[str], report: StructureReport) -> None:
    """Exhaustive check of the canonical structure's consistency properties."""
    chars = frozenset(characteristics)
    spaces = subspaces(chars)
    states = list(all_states(chars, players))
    # projections commute and the identity projection is trivial
    for omega in states:
        if project(omega, omega.space) != omega:
            report.add(f"identity projection moves {omega.label()}")
        for mid in subspaces(omega.space):
            for low in subspaces(mid):
                if project(project(omega, mid), low) != project(omega, low):
                    report.add(f"projections do not commute at {omega.label()} via {space_key(mid)} to {space_key(low)}")
    for omega in states:
        for i in players:
            belief = type_map(i, omega)
            # (i) belief is a projection of omega to a subspace
            if not belief.space <= omega.space or project(omega, belief.space) != belief:
                report.add(f"type map of {i} at {omega.label()} is not a projection")
            # (ii) beliefs at projections are projections of beliefs
            for low in subspaces(belief.space):
                if type_map(i, project(omega, low)) != project(belief, low):
                    report.add(f"property (ii) fails for {i} at {omega.label()} to {space_key(low)}")
            # (iii) awareness at a projection bounds awareness from below
            for mid in subspaces(omega.space):
                if not type_map(i, project(omega, mid)).space <= belief.space:
                    report.add(f"property (iii) fails for {i} at {omega.label()} via {space_key(mid)}")
    # no redundancies: distinct states of a space differ in someone's awareness
    by_profile: dict[tuple, State] = {}
    for omega in states:
        key = (omega.space, tuple(type_map(i, omega).space for i in players))
        if key in by_profile and by_profile[key] != omega:
            report.add(f"states {omega.label()} and {by_profile[key].label()} share every awareness level")
        by_profile[key] = omega
    # richness: every awareness profile is realised at the join space
    for profile in itertools.product(spaces, repeat=len(players)):
        if (chars, profile) not in by_profile:
            report.add(f"awareness profile {[space_key(s) for s in profile]} is not realised")
    report.checked.append(f"type-map properties over {len(states)} states")


def check_monotone_agreement(prefs: PreferenceMap, report: StructureReport) -> None:
    """If ``i`` ranks ``a`` over ``b`` at two spaces, the same holds at their join."""
    for i in prefs.men + prefs.women:
        spaces = prefs.spaces(i)
        for s1, s2 in itertools.combinations_with_replacement(spaces, 2):
            join = s1 | s2
            if not prefs.has(i, join):
                continue
            r1, r2 = prefs.ranking(i, s1), prefs.ranking(i, s2)
            for a, b in itertools.combinations(r1, 2):
                if r2.index(a) < r2.index(b) and not prefs.prefers(i, join, a, b):
                    report.add(
                        f"monotone agreement: {i} prefers {a} to {b} at {space_key(s1)} and {space_key(s2)} "
                        f"but not at {space_key(join)}"
                    )
    report.checked.append("preference monotone agreement")
