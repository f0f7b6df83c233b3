"""Scenario files, bundled examples, JSONL traces and DOT process graphs.

A scenario file is a JSON object with schema version ``"1"``::

    {
      "schema_version": "1",
      "name": "example4_experience",
      "players": {"men": ["m1", "m2"], "women": ["w1", "w2"]},
      "characteristics": ["c"],
      "preferences": {
        "m1": {"base": ["w1", "w2"], "c": ["w2", "w1"]},
        "m2": ["w1", "w2"]
      },
      "rules": [{"when": {"pairs": [["m1", "w1"]], "single": []}, "grant": {"m1": ["c"]}}],
      "matchings": {"mu0": "m1:w1,m2:w2"},
      "states": {"omega1": {"m1": [], "w1": ["c"]}},
      "initial": {"matching": "mu0", "state": "omega1"},
      "flags": {"classic_only": false}
    }

Spaces are keyed ``"base"`` or ``"c1+c2"``.  A bare list under a player is
that player's ranking at every space.  Rankings omit self; self is appended
last.  Named states default to the join space and list only non-empty
awareness.  ``script`` (optional) is a list of pairs for scripted replays.
"""

from __future__ import annotations

import copy
import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .awareness import (
    PreferenceMap,
    State,
    StructureReport,
    check_monotone_agreement,
    check_type_map_properties,
    parse_space,
    space_key,
    subspaces,
)
from .dynamics import BoundExceeded, DiscoveryRule, Outcome, build_chain, outcome_space, p_step_distribution
from .market import ClassicMarket, Matching, MatchingError, Pair, perturbed_classic_distribution, satisfy_pair

SCHEMA_VERSION = "1"
STRUCTURE_CHECK_LIMIT = 5_000


class ScenarioError(ValueError):
    """A scenario file is malformed or fails validation."""


class ValidationError(ScenarioError):
    """A well-formed scenario whose data break a structural requirement."""

    def __init__(self, message: str, report: StructureReport):
        super().__init__(message)
        self.report = report


class TraceError(ValueError):
    """A trace file does not follow the trace schema."""


@dataclass(eq=False)
class Scenario:
    name: str
    men: tuple[str, ...]
    women: tuple[str, ...]
    characteristics: tuple[str, ...]
    prefs: PreferenceMap
    rules: tuple[DiscoveryRule, ...]
    initial: Outcome
    matchings: dict[str, Matching] = field(default_factory=dict)
    states: dict[str, State] = field(default_factory=dict)
    flags: dict[str, bool] = field(default_factory=dict)
    script: tuple[Pair, ...] = ()
    description: str = ""
    _raw: dict = field(default_factory=dict, repr=False)

    @property
    def players(self) -> tuple[str, ...]:
        return self.men + self.women

    @property
    def classic_only(self) -> bool:
        return bool(self.flags.get("classic_only", False))

    def market(self, space: Iterable[str] | None = None) -> ClassicMarket:
        """The full-information market at ``space`` (the join space by default)."""
        space = frozenset(self.characteristics if space is None else space)
        return ClassicMarket(self.men, self.women, {i: self.prefs.ranking(i, space) for i in self.players})

    def to_dict(self) -> dict:
        return copy.deepcopy(self._raw)

    def digest(self) -> str:
        if "_digest" not in self.__dict__:
            self.__dict__["_digest"] = digest_of(self._raw)
        return self.__dict__["_digest"]

    def __eq__(self, other) -> bool:
        return isinstance(other, Scenario) and canonical_json(self._raw) == canonical_json(other._raw)

    def __hash__(self):
        return hash(self.digest())

    def matching(self, text: str) -> Matching:
        """A named matching or one written ``"m1:w1,m2:w2"`` (``"-"`` for empty)."""
        text = text.strip()
        if text in self.matchings:
            return self.matchings[text]
        return parse_matching(text, self.men, self.women)

    def state(self, text: str) -> State:
        """A named state or one written ``"m1:c1+c2|w2:-"``; unlisted players are unaware."""
        text = text.strip()
        if text in self.states:
            return self.states[text]
        return parse_awareness(text, self)

    def state_name(self, omega: State) -> str | None:
        return next((k for k, s in self.states.items() if s == omega), None)

    def matching_name(self, mu: Matching) -> str | None:
        return next((k for k, m in self.matchings.items() if m == mu), None)

    def describe(self, o: Outcome) -> str:
        mu = self.matching_name(o.matching) or o.matching.label(self.men)
        if not self.characteristics:
            return mu
        omega = self.state_name(o.state) or o.state.label()
        return f"({mu}, {omega})"


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def digest_of(data) -> str:
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()


# -- outcome syntax ---------------------------------------------------------


def parse_matching(text: str, men: Sequence[str], women: Sequence[str]) -> Matching:
    text = text.strip()
    if text in ("", "-"):
        return Matching.of()
    pairs = []
    for item in text.split(","):
        if ":" not in item:
            raise ScenarioError(f"matching entry {item!r} is not of the form man:woman")
        a, b = (x.strip() for x in item.split(":", 1))
        if b in ("", "-"):
            continue
        if a in women and b in men:
            a, b = b, a
        if a not in men or b not in women:
            raise ScenarioError(f"matching entry {item!r} does not pair a known man with a known woman")
        pairs.append((a, b))
    try:
        return Matching.of(pairs)
    except MatchingError as exc:
        raise ScenarioError(f"invalid matching {text!r}: {exc}") from None


def parse_awareness(text: str, game) -> State:
    text = text.strip()
    aware: dict[str, frozenset[str]] = {i: frozenset() for i in game.players}
    if text not in ("", "-"):
        for item in text.split("|"):
            if ":" not in item:
                raise ScenarioError(f"awareness entry {item!r} is not of the form player:space")
            i, key = (x.strip() for x in item.split(":", 1))
            if i not in aware:
                raise ScenarioError(f"awareness entry names unknown player {i!r}")
            aware[i] = parse_space(key)
    return _make_state(game.characteristics, aware, "awareness")


def _make_state(characteristics, aware: Mapping[str, Iterable[str]], where: str, space=None) -> State:
    space = frozenset(characteristics if space is None else space)
    unknown = frozenset().union(*map(frozenset, aware.values())) - frozenset(characteristics)
    if unknown:
        raise ScenarioError(f"{where}: unknown characteristics {sorted(unknown)}")
    try:
        return State.of(space, aware)
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


# -- parsing ----------------------------------------------------------------


def _need(obj: Mapping, key: str, kind, where: str):
    if key not in obj:
        raise ScenarioError(f"{where}: missing field {key!r}")
    value = obj[key]
    if not isinstance(value, kind):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise ScenarioError(f"{where}.{key}: expected {names}, got {type(value).__name__}")
    return value


def _labels(values, where: str) -> tuple[str, ...]:
    if not isinstance(values, list) or not all(isinstance(v, str) and v for v in values):
        raise ScenarioError(f"{where}: expected a list of non-empty strings")
    if len(set(values)) != len(values):
        raise ScenarioError(f"{where}: duplicate labels")
    return tuple(values)


def scenario_from_dict(data: Mapping) -> Scenario:
    """Build and fully validate a scenario from its JSON object."""
    if not isinstance(data, Mapping):
        raise ScenarioError("scenario: top level must be an object")
    version = data.get("schema_version")
    if version is None:
        raise ScenarioError("scenario: missing field 'schema_version'")
    if str(version) != SCHEMA_VERSION:
        raise ScenarioError(
            f"scenario: schema_version {version!r} is not supported (this library reads version {SCHEMA_VERSION!r})"
        )
    name = _need(data, "name", str, "scenario")
    players = _need(data, "players", dict, "scenario")
    men = _labels(_need(players, "men", list, "players"), "players.men")
    women = _labels(_need(players, "women", list, "players"), "players.women")
    if set(men) & set(women):
        raise ScenarioError(f"players: {sorted(set(men) & set(women))} listed on both sides")
    chars = _labels(_need(data, "characteristics", list, "scenario"), "characteristics")
    everyone = men + women

    raw_prefs = _need(data, "preferences", dict, "scenario")
    for i in raw_prefs:
        if i not in everyone:
            raise ScenarioError(f"preferences: unknown player {i!r}")
    rankings: dict[tuple[str, frozenset], list[str]] = {}
    for i in everyone:
        if i not in raw_prefs:
            raise ScenarioError(f"preferences: no ranking for player {i}")
        entry = raw_prefs[i]
        where = f"preferences.{i}"
        if isinstance(entry, list):
            per_space = {space: entry for space in subspaces(chars)}
        elif isinstance(entry, dict):
            per_space = {}
            for key, ranking in entry.items():
                space = parse_space(key)
                if not space <= set(chars):
                    raise ScenarioError(f"{where}.{key}: unknown characteristics {sorted(space - set(chars))}")
                if not isinstance(ranking, list):
                    raise ScenarioError(f"{where}.{key}: expected a list")
                per_space[space] = ranking
        else:
            raise ScenarioError(f"{where}: expected a list or an object keyed by space")
        for space, ranking in per_space.items():
            rankings[(i, space)] = ranking
    try:
        prefs = PreferenceMap(men, women, rankings)
    except ValueError as exc:
        raise ScenarioError(f"preferences: {exc}") from None

    rules = []
    for n, raw in enumerate(data.get("rules", [])):
        where = f"rules[{n}]"
        if not isinstance(raw, dict):
            raise ScenarioError(f"{where}: expected an object")
        when = raw.get("when", {})
        pairs = []
        for p in when.get("pairs", []):
            if not (isinstance(p, list) and len(p) == 2 and p[0] in men and p[1] in women):
                raise ScenarioError(f"{where}.when.pairs: {p!r} is not a [man, woman] pair")
            pairs.append(tuple(p))
        single = when.get("single", [])
        for i in single:
            if i not in everyone:
                raise ScenarioError(f"{where}.when.single: unknown player {i!r}")
        grant = _need(raw, "grant", dict, where)
        effects = {}
        for i, cs in grant.items():
            if i not in everyone:
                raise ScenarioError(f"{where}.grant: unknown player {i!r}")
            cs = frozenset(cs)
            if not cs <= set(chars):
                raise ScenarioError(f"{where}.grant.{i}: unknown characteristics {sorted(cs - set(chars))}")
            effects[i] = cs
        try:
            Matching.of(pairs)
            rules.append(DiscoveryRule(frozenset(pairs), frozenset(single), tuple(effects.items())))
        except ValueError as exc:
            raise ScenarioError(f"{where}: {exc}") from None

    matchings = {}
    for key, text in data.get("matchings", {}).items():
        if not isinstance(text, str):
            raise ScenarioError(f"matchings.{key}: expected a string like 'm1:w1,m2:w2'")
        try:
            matchings[key] = parse_matching(text, men, women)
        except ScenarioError as exc:
            raise ScenarioError(f"matchings.{key}: {exc}") from None
    states = {}
    for key, raw in data.get("states", {}).items():
        where = f"states.{key}"
        if not isinstance(raw, dict):
            raise ScenarioError(f"{where}: expected an object of player awareness lists")
        raw = dict(raw)
        space = parse_space(raw.pop("space")) if "space" in raw else None
        for i in raw:
            if i not in everyone:
                raise ScenarioError(f"{where}: unknown player {i!r}")
        aware = {i: frozenset(raw.get(i, [])) for i in everyone}
        states[key] = _make_state(chars, aware, where, space)

    game_stub = _Stub(men, women, chars)
    initial = _need(data, "initial", dict, "scenario")
    m_text = _need(initial, "matching", str, "initial")
    mu0 = matchings[m_text] if m_text in matchings else parse_matching(m_text, men, women)
    if "state" in initial:
        s_text = _need(initial, "state", str, "initial")
        omega0 = states[s_text] if s_text in states else parse_awareness(s_text, game_stub)
    else:
        omega0 = _make_state(chars, {i: frozenset() for i in everyone}, "initial")

    script = []
    for n, p in enumerate(data.get("script", [])):
        if not (isinstance(p, list) and len(p) == 2 and all(x in everyone for x in p)):
            raise ScenarioError(f"script[{n}]: {p!r} is not a pair of players")
        script.append(tuple(p))

    flags = data.get("flags", {})
    if not isinstance(flags, dict) or not all(isinstance(v, bool) for v in flags.values()):
        raise ScenarioError("flags: expected an object of booleans")

    scenario = Scenario(
        name=name,
        men=men,
        women=women,
        characteristics=chars,
        prefs=prefs,
        rules=tuple(rules),
        initial=Outcome(mu0, omega0),
        matchings=matchings,
        states=states,
        flags=dict(flags),
        script=tuple(script),
        description=str(data.get("description", "")),
        _raw=copy.deepcopy(dict(data)),
    )
    problems = validate_preferences(scenario)
    if problems.violations:
        raise ValidationError(f"{name}: {problems.violations[0]}", problems)
    return scenario


@dataclass
class _Stub:
    men: tuple
    women: tuple
    characteristics: tuple

    @property
    def players(self):
        return self.men + self.women


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return scenario_from_dict(data)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}", exc.report) from None
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2) + "\n", encoding="utf-8")


# -- validation -------------------------------------------------------------


def validate_preferences(scenario: Scenario) -> StructureReport:
    """Every player ranks at every space, and rankings agree monotonically."""
    report = StructureReport()
    for i in scenario.players:
        for space in subspaces(scenario.characteristics):
            if not scenario.prefs.has(i, space):
                report.add(f"no ranking for {i} at space {space_key(space)}")
    report.checked.append("rankings present at every space")
    check_monotone_agreement(scenario.prefs, report)
    return report


def validate_structure(scenario: Scenario, limit: int = STRUCTURE_CHECK_LIMIT) -> StructureReport:
    """Type-map consistency of the scenario's canonical structure plus its data."""
    report = StructureReport()
    n_states = sum(2 ** (len(s) * len(scenario.players)) for s in subspaces(scenario.characteristics))
    if n_states <= limit:
        check_type_map_properties(scenario.characteristics, scenario.players, report)
    else:
        report.checked.append(f"type-map properties skipped: {n_states} states above {limit}")
    for key, mu in [("initial", scenario.initial.matching), *scenario.matchings.items()]:
        for m, w in mu.pairs:
            if m not in scenario.men or w not in scenario.women:
                report.add(f"matching {key} pairs unknown players ({m}, {w})")
    for key, omega in [("initial", scenario.initial.state), *scenario.states.items()]:
        if set(omega.players) != set(scenario.players):
            report.add(f"state {key} does not give every player an awareness level")
    for n, (a, b) in enumerate(scenario.script):
        if not ((a == b) or (a in scenario.men and b in scenario.women)):
            report.add(f"script step {n}: ({a}, {b}) is neither a man-woman pair nor a divorce")
    report.checked.append("matchings, states and script")
    return report


def validate(scenario: Scenario) -> StructureReport:
    report = validate_preferences(scenario)
    structure = validate_structure(scenario)
    report.violations.extend(structure.violations)
    report.checked.extend(structure.checked)
    return report


# -- bundled scenarios ------------------------------------------------------

BUILTIN_NAMES = (
    "example1_knuth",
    "example2_cycle",
    "example3_unaware",
    "example4_experience",
    "example5_trap",
    "example6_flirt",
    "example7_belief",
    "example8_divorce",
)


def builtin(name: str) -> Scenario:
    matches = [n for n in BUILTIN_NAMES if n == name or n.split("_")[0] == name]
    if not matches:
        raise KeyError(f"no bundled scenario {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
    text = resources.files("rematch.scenarios").joinpath(f"{matches[0]}.json").read_text(encoding="utf-8")
    return scenario_from_dict(json.loads(text))


def builtin_scenarios() -> list[Scenario]:
    return [builtin(n) for n in BUILTIN_NAMES]


def resolve_scenario(ref: str | Path) -> Scenario:
    """Load a path, or a bundled scenario by name when no such file exists."""
    path = Path(ref)
    if path.exists():
        return load_scenario(path)
    try:
        return builtin(str(ref))
    except KeyError:
        raise FileNotFoundError(f"{ref}: no such file or bundled scenario") from None


# -- traces -----------------------------------------------------------------

HEADER_FIELDS = ("digest", "seed", "epsilon", "process")


def write_trace(records, path: str | Path, header: Mapping | None = None) -> None:
    """Write a header line then one JSON object per record.

    ``records`` may be a run result with ``header`` and ``records`` fields.
    """
    if hasattr(records, "header") and hasattr(records, "records"):
        header, records = records.header, records.records
    records = list(records)
    if header is None:
        if not records or records[0].get("kind") != "header":
            raise TraceError("a trace needs a header record")
        header, records = records[0], records[1:]
    _check_trace([dict(header), *records])
    with open(path, "w", encoding="utf-8") as fh:
        for rec in [header, *records]:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_trace(path: str | Path) -> list[dict]:
    """All records, header first."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise TraceError(f"{path}: line {n}: {exc.msg}") from None
    _check_trace(out)
    return out


def _check_trace(records: list[dict]) -> None:
    if not records:
        raise TraceError("empty trace: the header record is missing")
    header = records[0]
    if header.get("kind") != "header":
        raise TraceError("the first record is not a header")
    missing = [f for f in HEADER_FIELDS if f not in header]
    if missing:
        raise TraceError(f"header lacks {', '.join(missing)}")
    last = None
    for rec in records:
        step = rec.get("step")
        if not isinstance(step, int) or "kind" not in rec:
            raise TraceError(f"record {rec!r} lacks an integer step or a kind")
        if last is not None and step <= last:
            raise TraceError(f"steps are not strictly increasing at step {step}")
        last = step


# -- process graphs ---------------------------------------------------------


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _pair_text(pairs) -> str:
    return " ".join(f"({a},{b})" for a, b in pairs)


def classic_chain(scenario: Scenario, epsilon: float, bound: int, space=None) -> dict[Matching, list[tuple[Matching, float, tuple]]]:
    """Perturbed classic transitions over all matchings; stable ones loop."""
    from .market import all_matchings, count_matchings

    size = count_matchings(len(scenario.men), len(scenario.women))
    if size > bound:
        raise BoundExceeded(size, bound)
    market = scenario.market(space)
    chain = {}
    for mu in all_matchings(scenario.men, scenario.women):
        dist = perturbed_classic_distribution(market, mu, epsilon)
        if not dist:
            chain[mu] = [(mu, 1.0, ())]
            continue
        merged: dict[Matching, list] = {}
        for p, prob in dist.items():
            entry = merged.setdefault(satisfy_pair(mu, p), [0.0, []])
            entry[0] += prob
            entry[1].append(p)
        chain[mu] = [(nxt, prob, tuple(ps)) for nxt, (prob, ps) in merged.items()]
    return chain


def _reachable(chain, start) -> dict:
    keep, queue = {}, deque([start])
    while queue:
        node = queue.popleft()
        if node in keep:
            continue
        keep[node] = chain[node]
        queue.extend(nxt for nxt, _, _ in chain[node])
    return keep


def process_graph(
    scenario: Scenario,
    bound: int = 50_000,
    process: str = "p",
    epsilon: float = 0.1,
    states=None,
    reachable: bool = False,
):
    """Nodes and weighted edges of a process over the scenario's outcome space.

    With ``reachable`` only outcomes reachable from the initial outcome are kept.
    Returns ``(nodes, edges)`` with nodes as display labels and edges as
    ``(source, target, probability, pairs)`` label tuples.
    """
    if process == "classic":
        chain = classic_chain(scenario, epsilon, bound)
        if reachable:
            chain = _reachable(chain, scenario.initial.matching)
        label = lambda mu: scenario.matching_name(mu) or mu.label(scenario.men)
        nodes = [label(mu) for mu in chain]
        edges = [(label(mu), label(nxt), prob, pairs) for mu, succ in chain.items() for nxt, prob, pairs in succ]
        return nodes, edges
    if process == "p":
        kernel = lambda omega, mu: p_step_distribution(scenario, omega, mu, epsilon)
    elif process == "q":
        from .flirting import q_step_distribution

        kernel = lambda omega, mu: q_step_distribution(scenario, omega, mu, epsilon)
    else:
        raise ValueError(f"unknown process {process!r}")
    starts = [scenario.initial] if reachable else outcome_space(scenario, bound, states)
    chain = build_chain(scenario, starts, kernel, bound)
    nodes = [scenario.describe(o) for o in chain]
    edges = [
        (scenario.describe(o), scenario.describe(s.outcome), s.probability, s.pairs)
        for o, dist in chain.items()
        for s in dist
    ]
    return nodes, edges


def to_dot(name: str, nodes: Sequence[str], edges) -> str:
    ids = {n: f"n{k}" for k, n in enumerate(nodes)}
    lines = [f"digraph {_dot_quote(name)} {{", "  rankdir=LR;"]
    for n in nodes:
        lines.append(f"  {ids[n]} [label={_dot_quote(n)}];")
    for a, b, prob, pairs in edges:
        text = f"{prob:.6g}" + (f" {_pair_text(pairs)}" if pairs else "")
        lines.append(f"  {ids[a]} -> {ids[b]} [label={_dot_quote(text)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_process_graph(
    scenario: Scenario,
    path: str | Path,
    bound: int = 50_000,
    process: str = "p",
    epsilon: float = 0.1,
    states=None,
    reachable: bool = False,
) -> str:
    """Write the DOT graph of ``process`` and return its text."""
    nodes, edges = process_graph(scenario, bound, process, epsilon, states, reachable)
    text = to_dot(f"{scenario.name}_{process}", nodes, edges)
    Path(path).write_text(text, encoding="utf-8")
    return text
