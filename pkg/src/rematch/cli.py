"""Command-line front end.

Exit codes: 0 ok, 1 domain failure (invalid scenario, unstable outcome,
non-convergence, bound exceeded), 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from collections import Counter
from typing import Sequence

from .awareness import State, common_belief, space_key
from .dynamics import (
    BoundExceeded,
    Outcome,
    RunResult,
    blocking_event,
    firing_rules,
    is_absorbing,
    is_self_confirming,
    is_stable,
    prefers_single,
    run_p_process,
    welfare_delta,
    enumerate_self_confirming,
)
from .flirting import communicate_fixpoint, enumerate_flirt_proof, is_flirt_proof_self_confirming, run_q_process
from .market import (
    Matching,
    MatchingError,
    ProcessResult,
    run_deterministic,
    run_perturbed_classic,
)
from .scenario import (
    Scenario,
    ScenarioError,
    TraceError,
    ValidationError,
    export_process_graph,
    read_trace,
    resolve_scenario,
    validate,
    write_trace,
)

OK, DOMAIN, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(args, text: str, data) -> None:
    if args.format == "json":
        print(json.dumps(data, indent=2, sort_keys=True))
    else:
        print(text)


def _table(rows: Sequence[Sequence], header: Sequence[str]) -> str:
    cells = [list(map(str, header))] + [list(map(str, r)) for r in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _start(scenario: Scenario, args) -> Outcome:
    mu = scenario.matching(args.matching) if getattr(args, "matching", None) else scenario.initial.matching
    omega = scenario.state(args.awareness) if getattr(args, "awareness", None) else scenario.initial.state
    return Outcome(mu, omega)


def _states(scenario: Scenario, choice: str):
    if choice == "full" or (choice == "auto" and not scenario.states):
        return None
    named = list(dict.fromkeys([*scenario.states.values(), scenario.initial.state]))
    return named


def _epsilon(value: str) -> float:
    eps = float(value)
    if not 0.0 < eps < 1.0:
        raise argparse.ArgumentTypeError(f"epsilon must lie in (0, 1), got {value}")
    return eps


def _positive(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return n


# -- commands ---------------------------------------------------------------


def cmd_validate(args) -> int:
    try:
        scenario = resolve_scenario(args.scenario)
    except ValidationError as exc:
        _emit(args, f"INVALID {exc}", {"valid": False, "violations": exc.report.violations})
        return DOMAIN
    report = validate(scenario)
    lines = [f"{scenario.name}: {'valid' if report.ok else 'INVALID'}"]
    lines += [f"  checked: {c}" for c in report.checked]
    lines += [f"  violation: {v}" for v in report.violations]
    _emit(args, "\n".join(lines), {
        "scenario": scenario.name, "digest": scenario.digest(), "valid": report.ok,
        "checked": report.checked, "violations": report.violations,
    })
    return OK if report.ok else DOMAIN


def outcome_report(scenario: Scenario, omega, mu) -> dict:
    """The four outcome properties of ``(mu, omega)`` with witnesses."""
    stable = is_stable(scenario, omega, mu)
    stable_notes = []
    for m in scenario.men:
        for w in scenario.women:
            if mu.partner(m) == w:
                continue
            event = blocking_event(scenario, m, w, mu)
            if omega not in event:
                continue
            if common_belief(m, w, event, omega):
                stable_notes.append(f"blocking pair ({m},{w}) is commonly believed")
            else:
                stable_notes.append(f"blocking pair ({m},{w}) exists but lacks pairwise common belief")
    for i in scenario.players:
        if prefers_single(scenario, omega, mu, i):
            stable_notes.append(f"{i} prefers being single")
    absorbing = is_absorbing(scenario, omega, mu)
    absorbing_notes = [
        "rule fires: " + ", ".join(f"{i} gains {space_key(c & omega.space)}" for i, c in r.effects)
        for r in firing_rules(scenario, omega, mu)
    ]
    talk = communicate_fixpoint(scenario, omega, mu)
    flirt_notes = [f"{r['from']}->{r['to']} raises {'+'.join(r['raised'])} (round {r['round']})" for r in talk.raised]
    return {
        "matching": mu.label(scenario.men),
        "state": omega.label(),
        "stable": stable,
        "absorbing": absorbing,
        "self_confirming": stable and absorbing,
        "flirt_proof": is_flirt_proof_self_confirming(scenario, omega, mu),
        "witnesses": {"stable": stable_notes, "absorbing": absorbing_notes, "flirt_proof": flirt_notes},
    }


def cmd_check(args) -> int:
    scenario = resolve_scenario(args.scenario)
    start = _start(scenario, args)
    rep = outcome_report(scenario, start.state, start.matching)
    lines = [f"outcome {scenario.describe(start)}"]
    for key in ("stable", "absorbing", "self_confirming", "flirt_proof"):
        lines.append(f"  {key.replace('_', '-')}={str(rep[key]).lower()}")
        notes = rep["witnesses"].get(key, [])
        lines += [f"    {n}" for n in notes]
    _emit(args, "\n".join(lines), rep)
    return OK


def _classic_trace(scenario: Scenario, res: ProcessResult, seed: int, epsilon: float, process: str) -> dict:
    header = {
        "step": 0, "kind": "header", "process": process, "scenario": scenario.name,
        "digest": scenario.digest(), "seed": seed, "epsilon": epsilon if process == "classic" else None,
        "matching": res.matchings[0].as_dict(scenario.men),
    }
    records = [
        {"step": k + 1, "kind": "satisfy", "time": k + 1, "pair": list(p), "matching": mu.as_dict(scenario.men)}
        for k, (p, mu) in enumerate(zip(res.pairs, res.matchings[1:]))
    ]
    records.append({
        "step": len(records) + 1, "kind": "terminal", "time": res.steps, "converged": res.kind == "stable",
        "result": res.kind, "matching": res.terminal.as_dict(scenario.men), "steps": res.steps,
        "cycle_entry": res.entry, "cycle_period": res.period,
    })
    return {"header": header, "records": records}


def cmd_simulate(args) -> int:
    scenario = resolve_scenario(args.scenario)
    start = _start(scenario, args)
    if args.process == "classic":
        market = scenario.market(start.state.space)
        if args.policy == "perturbed":
            res = run_perturbed_classic(market, start.matching, args.epsilon, args.seed, args.max_steps)
        else:
            policy = "scripted" if args.policy == "scripted" else "mutual-optimal-first"
            if policy == "scripted" and not scenario.script:
                raise UsageError(f"{scenario.name} has no script")
            res = run_deterministic(market, start.matching, policy, args.max_steps, scenario.script or None)
        trace = _classic_trace(scenario, res, args.seed, args.epsilon, "classic" if args.policy == "perturbed" else f"classic-{policy}")
        if args.trace:
            write_trace(trace["records"], args.trace, header=trace["header"])
        data = {
            "process": "classic", "policy": args.policy, "result": res.kind, "steps": res.steps,
            "terminal": res.terminal.label(scenario.men), "pairs": [list(p) for p in res.pairs],
            "cycle_entry": res.entry, "cycle_period": res.period,
        }
        if res.kind == "cycle":
            entered = res.matchings[res.entry]
            text = (f"cycle of period {res.period} entered at "
                    f"{scenario.matching_name(entered) or entered.label(scenario.men)} (step {res.entry}); "
                    f"{res.steps} satisfactions")
        else:
            text = f"{res.kind} after {res.steps} steps: {scenario.matching_name(res.terminal) or res.terminal.label(scenario.men)}"
        _emit(args, text, data)
        return OK if res.kind == "stable" else DOMAIN
    runner = run_p_process if args.process == "p" else run_q_process
    res: RunResult = runner(scenario, start, args.epsilon, args.seed, args.max_steps)
    if args.trace:
        write_trace(res, args.trace)
    status = "converged" if res.converged else "max-steps reached"
    data = {
        "process": args.process, "converged": res.converged, "steps": res.steps,
        "terminal": {"matching": res.terminal.matching.label(scenario.men), "state": res.terminal.state.label()},
        "terminal_name": scenario.describe(res.terminal),
    }
    _emit(args, f"{status} after {res.steps} steps: {scenario.describe(res.terminal)}", data)
    return OK if res.converged else DOMAIN


def _rerun(scenario: Scenario, header: dict, max_steps: int) -> list[dict]:
    """Header and records of a fresh run with the settings of ``header``."""
    mu = Matching.of(header["matching"])
    process, seed, epsilon = header["process"], header["seed"], header["epsilon"]
    if process.startswith("classic"):
        market = scenario.market()
        if process == "classic":
            res = run_perturbed_classic(market, mu, epsilon, seed, max_steps)
        elif process == "classic-scripted":
            res = run_deterministic(market, mu, "scripted", max_steps, scenario.script)
        elif process == "classic-mutual-optimal-first":
            res = run_deterministic(market, mu, "mutual-optimal-first", max_steps)
        else:
            raise TraceError(f"unknown process {process!r} in trace header")
        trace = _classic_trace(scenario, res, seed, epsilon, process)
        records = [trace["header"], *trace["records"]]
    elif process in ("p", "q"):
        state = State.of(scenario.characteristics, header["awareness"])
        runner = run_p_process if process == "p" else run_q_process
        res = runner(scenario, Outcome(mu, state), epsilon, seed, max_steps)
        records = [res.header, *res.records]
    else:
        raise TraceError(f"unknown process {process!r} in trace header")
    return json.loads(json.dumps(records))


def cmd_reproduce(args) -> int:
    scenario = resolve_scenario(args.scenario)
    recorded = read_trace(args.trace)
    header = recorded[0]
    if header.get("digest") != scenario.digest():
        raise UsageError(f"{args.trace} was recorded against a different scenario than {scenario.name}")
    terminal = recorded[-1] if recorded[-1].get("kind") == "terminal" else {}
    steps = terminal.get("steps", args.max_steps)
    limit = steps if terminal.get("converged") is False else max(steps, args.max_steps)
    fresh = _rerun(scenario, header, limit)
    mismatch = next((k for k, (a, b) in enumerate(zip(recorded, fresh)) if a != b), None)
    if mismatch is None and len(recorded) != len(fresh):
        mismatch = min(len(recorded), len(fresh))
    data = {"trace": str(args.trace), "records": len(recorded), "reproduced": mismatch is None, "first_difference": mismatch}
    if mismatch is None:
        text = f"reproduced {len(recorded)} records exactly"
    else:
        text = f"trace differs from a fresh run at record {mismatch}"
    _emit(args, text, data)
    return OK if mismatch is None else DOMAIN


def cmd_enumerate(args) -> int:
    scenario = resolve_scenario(args.scenario)
    states = _states(scenario, args.states)
    finder = enumerate_flirt_proof if args.flirt_proof else enumerate_self_confirming
    found = sorted(finder(scenario, args.bound, states), key=scenario.describe)
    kind = "flirt-proof self-confirming" if args.flirt_proof else "self-confirming"
    domain = "full" if states is None else "named"
    lines = [f"{len(found)} {kind} outcome(s) over {domain} states"] + [f"  {scenario.describe(o)}" for o in found]
    _emit(args, "\n".join(lines), {
        "kind": kind, "domain": domain, "count": len(found),
        "outcomes": [{"name": scenario.describe(o), "matching": o.matching.label(scenario.men), "state": o.state.label()} for o in found],
    })
    return OK


def _process_for(scenario: Scenario, choice: str) -> str:
    if choice != "auto":
        return choice
    return "classic" if scenario.classic_only else "p"


def run_seeds(master: int, runs: int) -> list[int]:
    return [master + k for k in range(runs)]


def _one_run(scenario: Scenario, start: Outcome, process: str, epsilon: float, seed: int, max_steps: int):
    """``(terminal outcome, steps, converged)`` of one seeded run."""
    if process == "classic":
        res = run_perturbed_classic(scenario.market(start.state.space), start.matching, epsilon, seed, max_steps)
        return Outcome(res.terminal, start.state), res.steps, res.kind == "stable"
    runner = run_p_process if process == "p" else run_q_process
    res = runner(scenario, start, epsilon, seed, max_steps)
    return res.terminal, res.steps, res.converged


def _percentile(values: list[int], q: float) -> float:
    if len(values) == 1:
        return float(values[0])
    return statistics.quantiles(values, n=100, method="inclusive")[int(q) - 1]


def cmd_montecarlo(args) -> int:
    scenario = resolve_scenario(args.scenario)
    start = _start(scenario, args)
    process = _process_for(scenario, args.process)
    results = [_one_run(scenario, start, process, args.epsilon, s, args.max_steps) for s in run_seeds(args.seed, args.runs)]
    counts = Counter(scenario.describe(o) if ok else "(not converged)" for o, _, ok in results)
    steps = [n for _, n, _ in results]
    converged = sum(ok for _, _, ok in results)
    rows = [(name, n, f"{n / args.runs:.3f}") for name, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]
    summary = {
        "runs": args.runs, "process": process, "epsilon": args.epsilon, "seed": args.seed,
        "converged": converged, "converged_share": converged / args.runs,
        "terminals": {name: n for name, n in counts.items()},
        "steps": {"mean": statistics.fmean(steps), "p50": _percentile(steps, 50), "p90": _percentile(steps, 90), "max": max(steps)},
    }
    by_player = {}
    for i in getattr(args, "partner_of", None) or []:
        by_player[i] = dict(Counter(o.matching.partner(i) for o, _, ok in results if ok))
    summary["partners"] = by_player
    text = [
        f"{args.runs} runs of {process} (epsilon={args.epsilon}, seed={args.seed}): "
        f"{converged} converged ({100 * converged / args.runs:.1f}%)",
        _table(rows, ["terminal", "count", "share"]),
        f"steps: mean {summary['steps']['mean']:.2f}, median {summary['steps']['p50']:g}, "
        f"p90 {summary['steps']['p90']:g}, max {summary['steps']['max']}",
    ]
    for i, parts in by_player.items():
        text.append(f"partner of {i}: " + ", ".join(f"{p}={n}" for p, n in sorted(parts.items())))
    _emit(args, "\n".join(text), summary)
    return OK if converged == args.runs else DOMAIN


def cmd_welfare(args) -> int:
    scenario = resolve_scenario(args.scenario)
    start = _start(scenario, args)
    for i in args.player:
        if i not in scenario.players:
            raise UsageError(f"unknown player {i!r}")
    process = _process_for(scenario, args.process)
    results = [_one_run(scenario, start, process, args.epsilon, s, args.max_steps) for s in run_seeds(args.seed, args.runs)]
    data = {"runs": args.runs, "process": process, "epsilon": args.epsilon, "seed": args.seed, "players": {}}
    text = [f"{args.runs} runs of {process} (epsilon={args.epsilon}, seed={args.seed}); welfare against the initial matching"]
    unconverged = sum(not ok for _, _, ok in results)
    for i in args.player:
        counts = Counter()
        partners = Counter()
        for o, _, ok in results:
            if not ok:
                continue
            counts[welfare_delta(scenario, i, start.matching, o.matching, o.state).value] += 1
            partners[o.matching.partner(i)] += 1
        rows = [(w, counts[w], f"{counts[w] / args.runs:.3f}") for w in ("better", "same", "worse")]
        text += [f"player {i}", _table(rows, ["welfare", "count", "share"]),
                 "  final partners: " + ", ".join(f"{p}={n}" for p, n in sorted(partners.items()))]
        data["players"][i] = {"welfare": {w: counts[w] for w in ("better", "same", "worse")}, "partners": dict(partners)}
    if unconverged:
        text.append(f"{unconverged} run(s) did not converge and are excluded")
    data["unconverged"] = unconverged
    _emit(args, "\n".join(text), data)
    return OK if not unconverged else DOMAIN


def cmd_export(args) -> int:
    scenario = resolve_scenario(args.scenario)
    process = _process_for(scenario, args.process)
    text = export_process_graph(
        scenario, args.output, args.bound, process, args.epsilon, _states(scenario, args.states), args.reachable,
    )
    n_edges = sum(1 for line in text.splitlines() if "->" in line)
    _emit(args, f"wrote {args.output} ({n_edges} edges, process {process})",
          {"output": args.output, "process": process, "edges": n_edges})
    return OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rematch",
        description="Simulate and verify decentralized two-sided matching with evolving awareness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("scenario", help="scenario file, or the name of a bundled scenario (e.g. example4)")
        p.add_argument("--format", choices=("text", "json"), default="text", help="output format (default: text)")
        p.set_defaults(func=func)
        return p

    def outcome_flags(p):
        p.add_argument("--matching", help='matching name or label such as "m1:w1,m2:w2" (default: the initial one)')
        p.add_argument("--awareness", help='state name or profile such as "m1:c1|w2:-" (default: the initial one)')

    def run_flags(p, runs: bool):
        p.add_argument("--epsilon", type=_epsilon, default=0.1, help="perturbation probability in (0, 1) (default: 0.1)")
        p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
        p.add_argument("--max-steps", type=_positive, default=10_000, help="step limit per run (default: 10000)")
        if runs:
            p.add_argument("--runs", type=_positive, default=500, help="number of runs (default: 500)")
            p.add_argument("--process", choices=("auto", "p", "q", "classic"), default="auto",
                           help="process to run; auto picks classic for full-information scenarios, else p")

    command("validate", cmd_validate, "Run every validator on a scenario.")

    p = command("check", cmd_check, "Report stability, absorption, self-confirmation and flirt-proofness of an outcome.")
    outcome_flags(p)

    p = command("simulate", cmd_simulate, "Run one process and print its terminal outcome.")
    outcome_flags(p)
    p.add_argument("--process", choices=("p", "q", "classic"), default="p", help="process to run (default: p)")
    p.add_argument("--policy", choices=("perturbed", "mutual-optimal", "scripted"), default="perturbed",
                   help="classic process only: perturbed random choice, deterministic mutual-optimal-first, or the scenario's script")
    run_flags(p, runs=False)
    p.add_argument("--trace", help="write a JSONL trace to this path")

    p = command("reproduce", cmd_reproduce, "Re-run a recorded trace from its header and compare record by record.")
    p.add_argument("trace", help="JSONL trace written by simulate")
    p.add_argument("--max-steps", type=_positive, default=10_000, help="step limit for converged traces (default: 10000)")

    p = command("enumerate", cmd_enumerate, "List all self-confirming (or flirt-proof self-confirming) outcomes.")
    p.add_argument("--flirt-proof", action="store_true", help="list flirt-proof self-confirming outcomes only")
    p.add_argument("--bound", type=_positive, default=50_000, help="maximum outcome-space size (default: 50000)")
    p.add_argument("--states", choices=("auto", "named", "full"), default="auto",
                   help="state domain: the scenario's named states, every state of the join space, or named when any exist (default)")

    p = command("montecarlo", cmd_montecarlo, "Run many seeded processes and tabulate terminal outcomes.")
    outcome_flags(p)
    run_flags(p, runs=True)
    p.add_argument("--partner-of", action="append", metavar="PLAYER", help="also tabulate this player's final partner")

    p = command("welfare", cmd_welfare, "Tabulate whether players end better off, the same, or worse off.")
    outcome_flags(p)
    p.add_argument("--player", action="append", required=True, help="player to evaluate (repeatable)")
    run_flags(p, runs=True)

    p = command("export", cmd_export, "Write the process graph over outcomes in DOT format.")
    p.add_argument("--process", choices=("auto", "p", "q", "classic"), default="auto", help="process whose transitions to draw")
    p.add_argument("--epsilon", type=_epsilon, default=0.1, help="perturbation probability (default: 0.1)")
    p.add_argument("--bound", type=_positive, default=50_000, help="maximum outcome-space size (default: 50000)")
    p.add_argument("--states", choices=("auto", "named", "full"), default="auto", help="state domain (default: auto)")
    p.add_argument("--reachable", action="store_true", help="keep only outcomes reachable from the initial outcome")
    p.add_argument("-o", "--output", required=True, help="DOT file to write")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DOMAIN
    except BoundExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DOMAIN
    except (ScenarioError, MatchingError, UsageError, TraceError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
