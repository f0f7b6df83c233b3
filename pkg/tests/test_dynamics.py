import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from oracles import all_blocking_dfs, oracle_best_sets, oracle_step_distribution, potential, universe_of
from rematch.dynamics import (
    BoundExceeded,
    DiscoveryRule,
    Outcome,
    Welfare,
    absorbing_outcomes,
    apply_infidelity,
    best_blocking_pairs,
    best_blocking_sets,
    blocking_event,
    branch_terminals,
    build_chain,
    closed_classes,
    enumerate_self_confirming,
    is_absorbing,
    is_self_confirming,
    is_stable,
    mutual_best_blocking_pairs,
    outcome_space,
    p_step_distribution,
    priority_blocking_pairs,
    run_p_process,
    transition,
    welfare_delta,
)
from rematch.market import Matching, MatchingError, satisfy_pair
from rematch.scenario import builtin
from strategies import games, outcomes

SLOW = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def test_rule_needs_an_effect():
    with pytest.raises(ValueError):
        DiscoveryRule(frozenset({("m1", "w1")}), frozenset(), ())


def test_rule_fires_on_pairs_and_singles():
    rule = DiscoveryRule(frozenset({("m1", "w1")}), frozenset({"m2"}), (("m1", {"c"}),))
    assert rule.fires(Matching.of([("m1", "w1")]))
    assert not rule.fires(Matching.of([("m1", "w1"), ("m2", "w2")]))


def test_transition_example4():
    e4 = builtin("example4")
    om1 = e4.states["omega1"]
    assert transition(om1, e4.matchings["mu0"], e4.rules) == e4.states["omega2"]
    assert transition(om1, e4.matchings["mu2"], e4.rules) == om1
    assert not is_absorbing(e4, om1, e4.matchings["mu0"])


def test_blocking_event_rejects_matched_pair():
    e3 = builtin("example3")
    with pytest.raises(MatchingError):
        blocking_event(e3, "m1", "w1", e3.matchings["mu0"])


def test_example3_best_sets_empty_despite_blocking_pair():
    e3 = builtin("example3")
    sets = best_blocking_sets(e3, e3.states["omega1"], e3.matchings["mu0"])
    assert not any(sets.values())


def test_example4_distribution_after_experience():
    e4 = builtin("example4")
    dist = p_step_distribution(e4, e4.states["omega2"], e4.matchings["mu0"], 0.2)
    assert [(s.pairs, s.probability) for s in dist] == [((("m1", "w2"),), pytest.approx(1.0))]


def test_stable_outcome_moves_only_by_experience():
    e4 = builtin("example4")
    dist = p_step_distribution(e4, e4.states["omega1"], e4.matchings["mu0"], 0.2)
    assert len(dist) == 1
    assert dist[0].outcome == Outcome(e4.matchings["mu0"], e4.states["omega2"])
    assert dist[0].pairs == ()


def test_trace_is_seed_deterministic():
    e4 = builtin("example4")
    a = run_p_process(e4, e4.initial, 0.4, 7)
    b = run_p_process(e4, e4.initial, 0.4, 7)
    assert a.records == b.records and a.header == b.header
    steps = [r["step"] for r in a.records]
    assert steps == sorted(set(steps)) and steps[0] == 1
    assert a.header["step"] == 0 and a.header["seed"] == 7
    assert a.records[-1]["kind"] == "terminal" and a.records[-1]["converged"]


def test_max_steps_stops_run():
    e2 = builtin("example2")
    res = run_p_process(e2, e2.initial, 0.01, 0, max_steps=3)
    assert res.steps == 3 and not res.converged
    assert res.records[-1]["converged"] is False


def test_outcome_space_bound():
    e8 = builtin("example8")
    with pytest.raises(BoundExceeded):
        list(outcome_space(e8, 1000))


def test_apply_infidelity_keeps_matching():
    e5 = builtin("example5")
    mu0 = e5.matchings["mu0"]
    out = apply_infidelity(e5, e5.states["omega1"], mu0, ("m1", "w2"))
    assert out == Outcome(mu0, e5.states["omega3"])
    with pytest.raises(MatchingError):
        apply_infidelity(e5, e5.states["omega1"], mu0, ("m1", "w1"))


def test_welfare_delta_categories():
    e8 = builtin("example8")
    mu1, om2 = e8.matchings["mu1"], e8.states["omega2"]
    w2 = satisfy_pair(mu1, ("m1", "w2"))
    w4 = satisfy_pair(mu1, ("m1", "w4"))
    assert welfare_delta(e8, "m1", mu1, w2, om2) is Welfare.BETTER
    assert welfare_delta(e8, "m1", mu1, mu1, om2) is Welfare.SAME
    assert welfare_delta(e8, "m1", mu1, w4, om2) is Welfare.WORSE


def test_example8_best_pair_branching_matches_all_pairs_search():
    e8 = builtin("example8")
    mu1, om2 = e8.matchings["mu1"], e8.states["omega2"]
    market = e8.market()
    prefs = {i: market.prefs[i] for i in e8.players}
    expected = all_blocking_dfs(e8.men, e8.women, prefs, mu1)
    found = branch_terminals(e8, Outcome(mu1, om2), best_blocking_pairs)
    assert {o.matching for o in found} == expected
    assert {o.matching.partner("m1") for o in found} == {"w1", "w2", "w4"}
    assert {o.matching.partner("w1") for o in found} == {"m1", "m3", "m5"}
    assert {welfare_delta(e8, "m1", mu1, o.matching, om2) for o in found} == set(Welfare)
    assert {welfare_delta(e8, "w1", mu1, o.matching, om2) for o in found} == set(Welfare)


def test_example8_priority_branching_is_single_path():
    e8 = builtin("example8")
    start = Outcome(e8.matchings["mu1"], e8.states["omega2"])
    assert priority_blocking_pairs(e8, start.state, start.matching) == {("m1", "w2")}
    found = branch_terminals(e8, start)
    assert {o.matching.label() for o in found} == {"m1:w2,m2:w3,m3:w1,m4:w4,m5:w5"}


def test_closed_classes_of_example6_chain_are_absorbing_points():
    e6 = builtin("example6")
    chain = build_chain(e6, outcome_space(e6, 10_000), lambda om, mu: p_step_distribution(e6, om, mu, 0.3))
    classes = closed_classes(chain)
    assert all(len(c) == 1 for c in classes)
    assert {o for c in classes for o in c} == absorbing_outcomes(chain)


@SLOW
@given(games(), st.floats(0.05, 0.95))
def test_step_distribution_matches_definition_oracle(game, eps):
    universe = universe_of(game.characteristics, game.players)
    trans = lambda om, mu: transition(om, mu, game.rules)  # noqa: E731
    for mu, omega in outcomes(game):
        lib = {s.outcome: s.probability for s in p_step_distribution(game, omega, mu, eps)}
        ref = {Outcome(m, o): p for (m, o), p in oracle_step_distribution(game, omega, mu, eps, universe, trans).items()}
        assert lib == pytest.approx(ref)


@SLOW
@given(games(self_anywhere=True))
def test_best_sets_match_definition_oracle(game):
    universe = universe_of(game.characteristics, game.players)
    for mu, omega in outcomes(game):
        lib = best_blocking_sets(game, omega, mu)
        ref = oracle_best_sets(game, omega, mu, universe)
        assert {i: set(s) for i, s in lib.items()} == ref


@SLOW
@given(games(self_anywhere=True), st.floats(0.05, 0.95))
def test_unstable_implies_best_pairs_and_mass_one(game, eps):
    for mu, omega in outcomes(game):
        dist = p_step_distribution(game, omega, mu, eps)
        assert sum(s.probability for s in dist) == pytest.approx(1.0)
        if not is_stable(game, omega, mu):
            assert best_blocking_pairs(game, omega, mu)
            assert all(s.outcome.matching != mu for s in dist)
        assert mutual_best_blocking_pairs(game, omega, mu) <= best_blocking_pairs(game, omega, mu)


@SLOW
@given(games())
def test_transition_grows_awareness_and_is_idempotent(game):
    for mu, omega in outcomes(game):
        nxt = transition(omega, mu, game.rules)
        assert all(omega.aware(i) <= nxt.aware(i) for i in game.players)
        assert transition(nxt, mu, game.rules) == nxt


@SLOW
@given(games(), st.floats(0.05, 0.95))
def test_chain_absorbing_outcomes_are_self_confirming(game, eps):
    chain = build_chain(game, outcome_space(game, 10_000), lambda om, mu: p_step_distribution(game, om, mu, eps))
    assert absorbing_outcomes(chain) == enumerate_self_confirming(game)


@SLOW
@given(games(with_rules=False, self_anywhere=True))
def test_potential_drops_when_matched_woman_takes_her_best_pair(game):
    for mu, omega in outcomes(game):
        sets = best_blocking_sets(game, omega, mu)
        for w in game.women:
            if mu.is_single(w) or not sets[w]:
                continue
            ranking = game.prefs.ranking(w, omega.aware(w))
            best = min(sets[w], key=ranking.index)
            pair = (w, w) if best == w else (best, w)
            after = satisfy_pair(mu, pair)
            assert potential(game, omega, after) <= potential(game, omega, mu) - 1


@SLOW
@given(games(), st.integers(0, 2**32), st.floats(0.05, 0.95))
def test_p_runs_end_self_confirming(game, seed, eps):
    for mu, omega in list(outcomes(game))[:6]:
        res = run_p_process(game, Outcome(mu, omega), eps, seed, max_steps=5_000)
        assert res.converged
        assert is_self_confirming(game, res.terminal.state, res.terminal.matching)
