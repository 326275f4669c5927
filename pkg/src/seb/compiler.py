"""Derivation rules and raw control graph construction.

``enabled_steps`` returns every transition derivable from a configuration
(link map, residual activity); ``build_raw_cg`` closes it breadth-first
from the initial configuration.  The step relation:

* an atomic activity whose join evaluates true fires its action, sets its
  outgoing links true and reduces to nil;
* any record activity whose join evaluates false is cancelled silently,
  setting the outgoing links of its whole subtree false (dead-path
  elimination);
* a flow propagates steps of its children, silently drops finished
  children, and when reduced to a single nil child ticks its own outgoing
  links;
* a pick propagates a step of one branch head, cancelling the outgoing
  links of every other branch, and continues with that branch wrapped in
  a flow carrying the pick's control fields;
* a repeat steps either through its do part (entering an unfolding that
  remembers the iteration body) or through its until part (leaving the
  loop); a finished unfolding silently resets the do part's internal
  links and reinstates the repeat.

Joins that are still undefined block the activity; sequences must have
been desugared beforehand.
"""

from __future__ import annotations

import logging
from collections import deque

from .control import (
    Action,
    ControlGraph,
    LinkMap,
    Recv,
    Send,
    SesInit,
    TAU,
    eval_join,
    initial_link_map,
    sorted_transitions,
)
from .syntax import (
    Activity,
    Flo,
    Inv,
    NIL,
    Nil,
    Pic,
    Rec,
    Rep,
    Seq,
    Ses,
    Unf,
    all_sources,
    all_targets,
    structure_key,
    subacts,
)
from .wellformed import desugar_seq

logger = logging.getLogger(__name__)

Step = tuple[Action, LinkMap, Activity]


class StateCapExceeded(Exception):
    def __init__(self, cap: int):
        super().__init__(f"state count exceeded the safety cap of {cap}")
        self.cap = cap


def _step_key(step: Step) -> tuple:
    action, c, act = step
    return (action.sort_key(), c.sort_key(), structure_key(act))


def _dedupe(steps: list[Step]) -> list[Step]:
    return sorted(set(steps), key=_step_key)


class _Memo:
    """Per-build caches: derived steps per configuration, interned nodes.

    Interning makes equal residuals the same object, so state lookups
    compare by identity instead of walking trees.
    """

    __slots__ = ("steps", "nodes")

    def __init__(self):
        self.steps: dict = {}
        self.nodes: dict = {}

    def intern(self, node: Activity) -> Activity:
        prev = self.nodes.get(node)
        if prev is None:
            self.nodes[node] = node
            return node
        return prev

    def intern_tree(self, root: Activity) -> None:
        for node in subacts(root).values():
            self.nodes.setdefault(node, node)


def enabled_steps(c: LinkMap, act: Activity) -> list[Step]:
    """Every derivable transition from (c, act), deduplicated and ordered."""
    return list(_steps(c, act, _Memo()))


def _steps(c: LinkMap, act: Activity, cache: _Memo) -> tuple[Step, ...]:
    """Memoized step derivation.

    Interleaving states of a flow recompute the very same child
    configurations over and over; the per-build cache makes each distinct
    (link map, residual) pair cost one derivation.
    """
    key = (c, act)
    hit = cache.steps.get(key)
    if hit is not None:
        return hit
    result = _derive(c, act, cache)
    cache.steps[key] = result
    return result


def _derive(c: LinkMap, act: Activity, cache: _Memo) -> tuple[Step, ...]:
    if isinstance(act, Nil):
        return ()
    if isinstance(act, Seq):
        raise ValueError("sequences must be desugared before compilation")

    verdict = eval_join(c, act.jcd, act.tgt)
    if verdict is None:
        return ()
    if verdict is False:
        # Dead-path elimination cancels the whole subtree.
        return ((TAU, c.set_links(False, all_sources(act)), NIL),)

    steps: list[Step] = []
    match act:
        case Ses(s, p, _, src, _):
            steps.append((SesInit(s, p), c.set_links(True, src), NIL))
        case Inv(s, op, args, _, src, _):
            steps.append((Send(s, op, args), c.set_links(True, src), NIL))
        case Rec(s, op, params, _, src, _):
            steps.append((Recv(s, op, params), c.set_links(True, src), NIL))
        case Flo(children, tgt, src, jcd, lnk):
            if len(children) == 1 and isinstance(children[0], Nil):
                steps.append((TAU, c.set_links(True, src), NIL))
            else:
                for i, child in enumerate(children):
                    if isinstance(child, Nil):
                        rest = children[:i] + children[i + 1 :]
                        succ = cache.intern(Flo(rest, tgt, src, jcd, lnk))
                        steps.append((TAU, c, succ))
                        continue
                    for action, c2, residual in _steps(c, child, cache):
                        body = children[:i] + (residual,) + children[i + 1 :]
                        succ = cache.intern(Flo(body, tgt, src, jcd, lnk))
                        steps.append((action, c2, succ))
        case Pic(branches, tgt, src, jcd):
            for i, (head, cont) in enumerate(branches):
                for action, c2, residual in _steps(c, head, cache):
                    assert isinstance(residual, Nil)
                    cancelled: set[str] = set()
                    for j, (other_head, other_cont) in enumerate(branches):
                        if j != i:
                            cancelled |= all_sources(other_head)
                            cancelled |= all_sources(other_cont)
                    c3 = c2.set_links(False, cancelled)
                    succ = cache.intern(Flo((cont,), tgt, src, jcd))
                    steps.append((action, c3, succ))
        case Rep(do_pic, until_pic, tgt, src, jcd):
            for action, c2, residual in _steps(c, do_pic, cache):
                succ = cache.intern(Unf(residual, do_pic, until_pic, tgt, src, jcd))
                steps.append((action, c2, succ))
            for action, c2, residual in _steps(c, until_pic, cache):
                succ = cache.intern(Flo((residual,), tgt, src, jcd))
                steps.append((action, c2, succ))
        case Unf(body, do_pic, until_pic, tgt, src, jcd):
            if isinstance(body, Nil):
                if do_pic.src:
                    logger.warning(
                        "unfold completion ticks non-empty do-part sources %s",
                        sorted(do_pic.src),
                    )
                c2 = c.set_links(None, all_sources(do_pic, strict=True))
                c2 = c2.set_links(None, all_targets(do_pic, strict=True))
                c2 = c2.set_links(True, do_pic.src)
                succ = cache.intern(Rep(do_pic, until_pic, tgt, src, jcd))
                steps.append((TAU, c2, succ))
            else:
                for action, c2, residual in _steps(c, body, cache):
                    succ = cache.intern(Unf(residual, do_pic, until_pic, tgt, src, jcd))
                    steps.append((action, c2, succ))
        case _:
            raise TypeError(f"not an activity: {act!r}")

    return tuple(_dedupe(steps))


DEFAULT_STATE_CAP = 1_000_000


def _closure(act: Activity, max_states: int, tau_first: bool) -> ControlGraph:
    root = desugar_seq(act)
    c0 = initial_link_map(root)
    start = (c0, root)

    index: dict[tuple[LinkMap, Activity], int] = {start: 0}
    payloads: list[tuple[LinkMap, Activity]] = [start]
    transitions: list[tuple[int, Action, int]] = []
    queue: deque[tuple[LinkMap, Activity]] = deque([start])
    cache = _Memo()
    cache.intern_tree(root)

    while queue:
        state = queue.popleft()
        sid = index[state]
        steps = _steps(state[0], state[1], cache)
        if tau_first:
            taus = [s for s in steps if s[0] == TAU]
            steps = taus or steps
        for action, c2, residual in steps:
            succ = (c2, residual)
            to = index.get(succ)
            if to is None:
                if len(index) >= max_states:
                    raise StateCapExceeded(max_states)
                to = len(index)
                index[succ] = to
                payloads.append(succ)
                queue.append(succ)
            transitions.append((sid, action, to))

    return ControlGraph(
        num_states=len(index),
        init=0,
        transitions=sorted_transitions(transitions),
        payloads=tuple(payloads),
    )


def build_raw_cg(act: Activity, max_states: int = DEFAULT_STATE_CAP) -> ControlGraph:
    """Breadth-first closure of the step relation from the initial state.

    Sequences are desugared first; the initial link map covers every link
    of the desugared tree.  States keep their (link map, residual) payload
    and are numbered in discovery order.
    """
    return _closure(act, max_states, tau_first=False)


def build_prioritized_cg(
    act: Activity, max_states: int = DEFAULT_STATE_CAP
) -> ControlGraph:
    """Closure with silent steps given priority during exploration.

    At any configuration with a silent step, observable alternatives are
    not even expanded.  Produces exactly the prioritized stage of the
    pipeline (they are asserted equal in the tests) while sidestepping the
    interleaving explosion the priority rule exists to avoid.
    """
    return _closure(act, max_states, tau_first=True)


def state_upper_bound(act: Activity) -> int:
    """Structural bound on the raw state count, on the desugared form."""

    def ub(node: Activity) -> int:
        match node:
            case Nil():
                return 1
            case Ses() | Inv() | Rec():
                return 2
            case Flo(children):
                product = 1
                for child in children:
                    product *= ub(child) + 1
                return product + 1
            case Pic(branches):
                return sum(ub(cont) + 2 for _, cont in branches) + 1
            case Rep(do_pic, until_pic):
                return ub(do_pic) + ub(until_pic) + 1
            case Seq():
                raise AssertionError("unreachable: desugared first")
            case Unf():
                raise ValueError("no structural bound for running unfoldings")
        raise TypeError(f"not an activity: {node!r}")

    return ub(desugar_seq(act))


# --------------------------------------------------------------------------
# Structural properties of raw graphs


def find_tau_cycle(g: ControlGraph) -> list[int] | None:
    """A cycle made only of silent transitions, or None."""
    tau_out: dict[int, list[int]] = {}
    for frm, action, to in g.transitions:
        if action == TAU:
            tau_out.setdefault(frm, []).append(to)

    state: dict[int, int] = {}
    trail: list[int] = []

    def dfs(node: int) -> list[int] | None:
        state[node] = 1
        trail.append(node)
        for succ in tau_out.get(node, ()):
            if state.get(succ, 0) == 1:
                return trail[trail.index(succ) :] + [succ]
            if state.get(succ, 0) == 0:
                found = dfs(succ)
                if found is not None:
                    return found
        state[node] = 2
        trail.pop()
        return None

    for start in sorted(tau_out):
        if state.get(start, 0) == 0:
            found = dfs(start)
            if found is not None:
                return found
    return None


def find_confluence_violation(g: ControlGraph):
    """Exhaustively check the one-step commutation of silent transitions.

    For every pair of distinct transitions g -τ-> g1 and g -σ-> g2 out of
    the same state there must be a state g' with g1 -σ-> g' and g2 -τ-> g'.
    Returns (state, g1, action, g2) for the first failure, else None.
    """
    out = g.outgoing()
    edge_sets = [frozenset(edges) for edges in out]
    for state in g.states:
        taus = [to for action, to in out[state] if action == TAU]
        if not taus:
            continue
        for g1 in taus:
            for action, g2 in out[state]:
                if action == TAU and g2 == g1:
                    continue
                joined = any(
                    (TAU, target) in edge_sets[g2]
                    for a, target in out[g1]
                    if a == action
                )
                if not joined:
                    return (state, g1, action, g2)
    return None


def find_sink_shape_violation(g: ControlGraph):
    """Sinks must hold a nil residual and every state must reach a sink."""
    if g.payloads is not None:
        for state in g.sinks():
            _, residual = g.payloads[state]
            if not isinstance(residual, Nil):
                return ("non-nil sink", state)
    reaches: set[int] = set(g.sinks())
    incoming: dict[int, set[int]] = {}
    for frm, _, to in g.transitions:
        incoming.setdefault(to, set()).add(frm)
    queue = deque(reaches)
    while queue:
        node = queue.popleft()
        for prev in incoming.get(node, ()):
            if prev not in reaches:
                reaches.add(prev)
                queue.append(prev)
    for state in g.states:
        if state not in reaches:
            return ("sink unreachable from state", state)
    return None


def check_raw_properties(act: Activity, g: ControlGraph) -> list[str]:
    """Violations of the structural guarantees of raw graphs, as messages."""
    problems = []
    bound = state_upper_bound(act)
    if g.num_states > bound:
        problems.append(f"state count {g.num_states} exceeds structural bound {bound}")
    cycle = find_tau_cycle(g)
    if cycle is not None:
        problems.append(f"silent cycle through states {cycle}")
    violation = find_confluence_violation(g)
    if violation is not None:
        state, g1, action, g2 = violation
        problems.append(
            f"silent step at state {state} (to {g1}) does not commute with "
            f"{action.render()} (to {g2})"
        )
    shape = find_sink_shape_violation(g)
    if shape is not None:
        problems.append(f"{shape[0]}: {shape[1]}")
    return problems
