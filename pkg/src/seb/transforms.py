"""Pipeline from the raw control graph to the minimal one.

Order: silent-step prioritization, silent-step compression,
run-to-completion pruning, strong-equivalence minimization.  The first
two preserve branching equivalence and rely on the raw graph being free
of silent cycles and confluent; pruning deliberately discards schedules.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

from .compiler import (
    build_prioritized_cg,
    build_raw_cg,
    find_confluence_violation,
    find_tau_cycle,
)
from .control import (
    Action,
    ControlGraph,
    Recv,
    Send,
    SesInit,
    TAU,
    Tau,
    renumber_bfs,
    sorted_transitions,
)
from .syntax import Activity


class TransformPreconditionError(Exception):
    pass


def _check_confluent_loop_free(g: ControlGraph, stage: str) -> None:
    cycle = find_tau_cycle(g)
    if cycle is not None:
        raise TransformPreconditionError(
            f"{stage}: input contains a silent cycle through states {cycle}"
        )
    violation = find_confluence_violation(g)
    if violation is not None:
        state, g1, action, g2 = violation
        raise TransformPreconditionError(
            f"{stage}: silent step {state}->{g1} does not commute with "
            f"{action.render()} {state}->{g2}"
        )


def tau_prioritize(g: ControlGraph, validate: bool = True) -> ControlGraph:
    """Give silent transitions priority over observable ones.

    In the result every state is homogeneous: either all its outgoing
    transitions are silent or none is.  Because the silent transitions of
    the input commute with everything and cannot loop, dropping the
    observable alternatives preserves branching equivalence.
    """
    if validate:
        _check_confluent_loop_free(g, "tau_prioritize")
    out = g.outgoing()
    kept = []
    for state in g.states:
        has_tau = any(action == TAU for action, _ in out[state])
        for action, to in out[state]:
            if has_tau and action != TAU:
                continue
            kept.append((state, action, to))
    return renumber_bfs(
        ControlGraph(g.num_states, g.init, sorted_transitions(kept), g.payloads)
    )


def tau_compress(g: ControlGraph) -> ControlGraph:
    """Collapse every maximal silent path onto its endpoint.

    Expects a prioritized graph.  Since silent steps commute and
    terminate, all silent paths from a state end in the same observable
    (or sink) state; the chase follows the least-numbered successor, which
    reaches that endpoint deterministically.
    """
    cycle = find_tau_cycle(g)
    if cycle is not None:
        raise TransformPreconditionError(
            f"tau_compress: silent cycle through states {cycle}"
        )
    out = g.outgoing()
    for state in g.states:
        labels = {action == TAU for action, _ in out[state]}
        if len(labels) > 1:
            raise TransformPreconditionError(
                f"tau_compress: state {state} mixes silent and observable transitions"
            )

    @functools.lru_cache(maxsize=None)
    def endpoint(state: int) -> int:
        taus = sorted(to for action, to in out[state] if action == TAU)
        if not taus:
            return state
        return endpoint(taus[0])

    new_init = endpoint(g.init)
    transitions = []
    for frm, action, to in g.transitions:
        if action == TAU:
            continue
        if endpoint(frm) == frm:
            transitions.append((frm, action, endpoint(to)))
    return renumber_bfs(
        ControlGraph(g.num_states, new_init, sorted_transitions(transitions), g.payloads)
    )


_PRIORITY = {Tau: 3, Send: 2, SesInit: 1, Recv: 0}


def action_priority(action: Action) -> int:
    return _PRIORITY[type(action)]


def run_to_completion(g: ControlGraph) -> ControlGraph:
    """Keep only the highest-priority class of transitions at every state.

    Priority: silent > send > session-init > receive.  States made
    unreachable by the pruning are dropped.
    """
    out = g.outgoing()
    kept = []
    for state in g.states:
        if not out[state]:
            continue
        best = max(action_priority(action) for action, _ in out[state])
        for action, to in out[state]:
            if action_priority(action) == best:
                kept.append((state, action, to))
    return renumber_bfs(
        ControlGraph(g.num_states, g.init, sorted_transitions(kept), g.payloads)
    )


# --------------------------------------------------------------------------
# Strong bisimulation minimization (iterative partition refinement)


def refine_partition(g: ControlGraph) -> list[int]:
    """Coarsest strong-bisimulation partition; returns block id per state."""
    out = g.outgoing()
    block = [0] * g.num_states
    while True:
        signatures: dict[tuple, int] = {}
        new_block = [0] * g.num_states
        for state in g.states:
            sig_body = frozenset((action, block[to]) for action, to in out[state])
            sig = (block[state], sig_body)
            if sig not in signatures:
                signatures[sig] = len(signatures)
            new_block[state] = signatures[sig]
        if new_block == block:
            return block
        block = new_block


def minimize(g: ControlGraph) -> ControlGraph:
    """Quotient by strong bisimulation; requires a silent-free graph."""
    if any(action == TAU for _, action, _ in g.transitions):
        raise TransformPreconditionError(
            "minimize expects a graph without silent transitions"
        )
    block = refine_partition(g)
    transitions = sorted_transitions(
        {(block[f], a, block[t]) for f, a, t in g.transitions}
    )
    n_blocks = max(block) + 1 if g.num_states else 0
    quotient = ControlGraph(n_blocks, block[g.init], transitions)
    return renumber_bfs(quotient)


# --------------------------------------------------------------------------
# Whole pipeline

STAGES = ("raw", "prio", "compress", "rtc", "min")


def compile_stages(
    act: Activity,
    upto: str = "min",
    *,
    rtc_before_compress: bool = False,
    keep_payloads: bool = False,
    max_states: int | None = None,
    validate: bool = False,
) -> ControlGraph:
    """Run the pipeline up to the requested stage.

    Payloads are dropped from the result unless ``keep_payloads``;
    minimization always discards them because it merges states that
    differ only by payload.
    """
    if upto not in STAGES:
        raise ValueError(f"unknown stage '{upto}', expected one of {STAGES}")
    kwargs = {} if max_states is None else {"max_states": max_states}
    if upto == "raw" or validate:
        g = build_raw_cg(act, **kwargs)
    if upto != "raw":
        if validate:
            g = tau_prioritize(g, validate=True)
        else:
            # Fused construction: never expands the successors that
            # prioritization would discard (asserted equal in tests).
            g = build_prioritized_cg(act, **kwargs)
        if upto != "prio":
            if rtc_before_compress:
                if upto in ("rtc", "min"):
                    g = run_to_completion(g)
                g = tau_compress(g)
            else:
                g = tau_compress(g)
                if upto in ("rtc", "min"):
                    g = run_to_completion(g)
            if upto == "min":
                g = minimize(g)
    if not keep_payloads:
        g = g.without_payloads()
    return g


@functools.lru_cache(maxsize=256)
def compile_activity(act: Activity) -> ControlGraph:
    """The fully reduced control graph: compressed, pruned and minimal."""
    return compile_stages(act, "min")


def init_state(act: Activity) -> int:
    return compile_activity(act).init


def states(act: Activity) -> range:
    return compile_activity(act).states


def transitions(act: Activity) -> tuple:
    return compile_activity(act).transitions


def terminal_state(act: Activity) -> int:
    """The unique sink of the compiled graph."""
    sinks = compile_activity(act).sinks()
    if len(sinks) != 1:
        raise AssertionError(f"compiled graph has {len(sinks)} sinks, expected one")
    return sinks[0]


# --------------------------------------------------------------------------
# Stage invariants


@dataclass(frozen=True)
class StageReport:
    stage: str
    problems: tuple[str, ...]


def check_stage_invariants(act: Activity, *, max_states: int | None = None) -> list[StageReport]:
    """Run the pipeline and verify each stage's structural guarantee."""
    from .compiler import check_raw_properties

    kwargs = {} if max_states is None else {"max_states": max_states}
    reports = []
    raw = build_raw_cg(act, **kwargs)
    reports.append(StageReport("raw", tuple(check_raw_properties(act, raw))))

    prio = tau_prioritize(raw)
    problems = []
    out = prio.outgoing()
    for state in prio.states:
        kinds = {action == TAU for action, _ in out[state]}
        if len(kinds) > 1:
            problems.append(f"state {state} mixes silent and observable transitions")
    reports.append(StageReport("prio", tuple(problems)))

    compressed = tau_compress(prio)
    problems = []
    if any(a == TAU for _, a, _ in compressed.transitions):
        problems.append("silent transition survived compression")
    reports.append(StageReport("compress", tuple(problems)))

    rtc = run_to_completion(compressed)
    problems = []
    out = rtc.outgoing()
    for state in rtc.states:
        classes = {action_priority(action) for action, _ in out[state]}
        if len(classes) > 1:
            problems.append(f"state {state} keeps several priority classes")
    reports.append(StageReport("rtc", tuple(problems)))

    minimal = minimize(rtc)
    problems = []
    block = refine_partition(minimal)
    if len(set(block)) != minimal.num_states:
        problems.append("minimized graph still has equivalent states")
    if len(minimal.sinks()) != 1:
        problems.append(f"minimized graph has {len(minimal.sinks())} sinks")
    reports.append(StageReport("min", tuple(problems)))
    return reports
