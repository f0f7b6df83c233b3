import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import iterated_common_belief, universe_of
from rematch.awareness import (
    BASE,
    EVERYTHING,
    NOTHING,
    Event,
    PreferenceError,
    PreferenceMap,
    State,
    StructureReport,
    all_states,
    believes,
    belief_closure,
    check_monotone_agreement,
    check_type_map_properties,
    common_belief,
    effective_preference,
    parse_space,
    project,
    space_key,
    states_in,
    subspaces,
    type_map,
)

PLAYERS = ("m1", "m2", "w1", "w2")


def test_space_keys_round_trip():
    assert space_key(BASE) == "base"
    assert space_key({"c2", "c1"}) == "c1+c2"
    for key in ("base", "c1", "c1+c2"):
        assert space_key(parse_space(key)) == key
    assert parse_space("-") == BASE


def test_subspaces_count():
    assert len(subspaces({"a", "b", "c"})) == 8
    assert subspaces(()) == [BASE]


def test_state_rejects_awareness_beyond_space():
    with pytest.raises(ValueError, match="exceeds"):
        State.of({"a"}, {"m1": {"b"}})


def test_type_map_projects_to_own_awareness():
    omega = State.of({"c"}, {"m1": {"c"}, "m2": (), "w1": (), "w2": ()})
    assert type_map("m1", omega) == omega
    assert type_map("w1", omega) == State.of(BASE, {i: () for i in PLAYERS})


def test_projection_requires_subspace():
    omega = State.of({"a"}, {"m1": ()})
    with pytest.raises(ValueError):
        project(omega, {"b"})


def test_state_enumeration_sizes():
    assert sum(1 for _ in states_in({"a"}, PLAYERS)) == 16
    assert sum(1 for _ in all_states({"a", "b"}, ("m1", "w1"))) == 1 + 2 * 4 + 16


def test_missing_ranking_names_player_and_space():
    prefs = PreferenceMap(("m1",), ("w1",), {("m1", BASE): ["w1"]})
    with pytest.raises(PreferenceError, match=r"w1 at space c"):
        prefs.ranking("w1", {"c"})


def test_effective_preference_uses_awareness_space():
    prefs = PreferenceMap(
        ("m1",), ("w1", "w2"),
        {("m1", BASE): ["w1", "w2"], ("m1", frozenset({"c"})): ["w2", "w1"]},
    )
    unaware = State.of({"c"}, {"m1": (), "w1": (), "w2": ()})
    aware = State.of({"c"}, {"m1": {"c"}, "w1": (), "w2": ()})
    assert effective_preference("m1", unaware, prefs)[0] == "w1"
    assert effective_preference("m1", aware, prefs)[0] == "w2"


def test_belief_of_constant_events():
    omega = State.of({"c"}, {i: () for i in PLAYERS})
    assert believes("m1", EVERYTHING, omega)
    assert not believes("m1", NOTHING, omega)
    assert common_belief("m1", "w1", EVERYTHING, omega)


def test_confused_players_in_belief_closure():
    # m1 and w2 aware, the others not: m1's belief shows m2 and w1 as unaware
    omega = State.of({"c"}, {"m1": {"c"}, "m2": (), "w1": (), "w2": {"c"}})
    closure = belief_closure(omega, ("m1", "w2"))
    assert closure == {omega}
    assert not type_map("m1", omega).aware("w1")


def test_structure_properties_exhaustive_small():
    report = StructureReport()
    check_type_map_properties(("a", "b"), ("m1", "w1", "w2"), report)
    assert report.ok and report.checked


def test_monotone_agreement_violation_reported():
    prefs = PreferenceMap(
        ("m1",), ("w1", "w2"),
        {
            ("m1", BASE): ["w1", "w2"],
            ("m1", frozenset({"a"})): ["w1", "w2"],
            ("m1", frozenset({"b"})): ["w1", "w2"],
            ("m1", frozenset({"a", "b"})): ["w2", "w1"],
        },
    )
    report = StructureReport()
    check_monotone_agreement(prefs, report)
    assert any("m1 prefers w1 to w2" in v for v in report.violations)


UNIVERSE = universe_of(("a",), ("m1", "w1", "w2"))


@settings(max_examples=80, deadline=None)
@given(st.sets(st.sampled_from(UNIVERSE)))
def test_reachability_common_belief_matches_iterated_operator(members):
    event = frozenset(members)
    ck = iterated_common_belief("m1", "w1", event, UNIVERSE)
    ev = Event.from_states(event)
    for omega in UNIVERSE:
        assert common_belief("m1", "w1", ev, omega) == (omega in ck)


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(UNIVERSE), st.sets(st.sampled_from(UNIVERSE)))
def test_common_belief_implies_each_believes(omega, members):
    ev = Event.from_states(members)
    if common_belief("m1", "w2", ev, omega):
        assert believes("m1", ev, omega) and believes("w2", ev, omega)
        assert all(common_belief("m1", "w2", ev, s) for s in belief_closure(omega, ("m1", "w2")))


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(universe_of(("a", "b"), ("m1", "w1"))))
def test_type_maps_are_idempotent(omega):
    for i in ("m1", "w1"):
        t = type_map(i, omega)
        assert type_map(i, t) == t
        for j in ("m1", "w1"):
            assert type_map(j, t).space <= t.space


def test_projection_commutes_exhaustively():
    for omega in universe_of(("a", "b"), ("m1", "w1")):
        for mid, low in itertools.product(subspaces(omega.space), repeat=2):
            if low <= mid:
                assert project(project(omega, mid), low) == project(omega, low)
