"""Independent reference implementations used only to check the library.

Nothing here shares code with the package's step derivation, transforms
or exploration: the step interpreter below works on plain dicts and was
written directly from the derivation rules; the equivalence checkers are
classic partition refinements.
"""

from __future__ import annotations

import itertools
import random
from collections import deque

from seb.control import TAU, ControlGraph
from seb.syntax import (
    Activity,
    And,
    Flo,
    Inv,
    LinkRef,
    Lit,
    Nil,
    Not,
    Or,
    Pic,
    Rec,
    Rep,
    Seq,
    Ses,
    TRUE,
    Unf,
    render,
)

# --------------------------------------------------------------------------
# Reference step interpreter (dict link maps, label strings)


def _jls(e):
    if isinstance(e, Lit):
        return set()
    if isinstance(e, LinkRef):
        return {e.name}
    if isinstance(e, Not):
        return _jls(e.operand)
    return _jls(e.left) | _jls(e.right)


def _jeval(c, e):
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, LinkRef):
        return c[e.name]
    if isinstance(e, And):
        return _jeval(c, e.left) and _jeval(c, e.right)
    if isinstance(e, Or):
        return _jeval(c, e.left) or _jeval(c, e.right)
    if isinstance(e, Not):
        return not _jeval(c, e.operand)
    raise TypeError(e)


def _join(c, act):
    """None (blocked), or the boolean verdict of the join."""
    for link in act.tgt:
        if c[link] is None:
            return None
    return _jeval(c, act.jcd)


def _subtree_srcs(act):
    if isinstance(act, Nil):
        return set()
    srcs = set(act.src)
    if isinstance(act, (Seq, Flo)):
        for child in act.children:
            srcs |= _subtree_srcs(child)
    elif isinstance(act, Pic):
        for head, cont in act.branches:
            srcs |= _subtree_srcs(head) | _subtree_srcs(cont)
    elif isinstance(act, Rep):
        srcs |= _subtree_srcs(act.do_pic) | _subtree_srcs(act.until_pic)
    elif isinstance(act, Unf):
        srcs |= (
            _subtree_srcs(act.body)
            | _subtree_srcs(act.do_pic)
            | _subtree_srcs(act.until_pic)
        )
    return srcs


def _subtree_tgts(act):
    if isinstance(act, Nil):
        return set()
    tgts = set(act.tgt)
    for child in _children(act):
        tgts |= _subtree_tgts(child)
    return tgts


def _children(act):
    if isinstance(act, (Seq, Flo)):
        return list(act.children)
    if isinstance(act, Pic):
        return [x for pair in act.branches for x in pair]
    if isinstance(act, Rep):
        return [act.do_pic, act.until_pic]
    if isinstance(act, Unf):
        return [act.body, act.do_pic, act.until_pic]
    return []


def _label(action_kind, s, op=None, names=()):
    if action_kind == "tau":
        return "tau"
    if action_kind == "init":
        return f"{s}@{op}"
    mark = "!" if action_kind == "send" else "?"
    return f"{s}{mark}{op}({','.join(names)})"


def oracle_steps(c: dict, act: Activity) -> list[tuple[str, dict, Activity]]:
    """All transitions of (c, act) as (label, new map, residual)."""
    if isinstance(act, Nil):
        return []
    verdict = _join(c, act)
    if verdict is None:
        return []
    out = []
    if verdict is False:
        c2 = dict(c)
        for link in _subtree_srcs(act):
            c2[link] = False
        return [("tau", c2, Nil())]

    def ticked(links):
        c2 = dict(c)
        for link in links:
            c2[link] = True
        return c2

    if isinstance(act, Ses):
        out.append((_label("init", act.s, act.p), ticked(act.src), Nil()))
    elif isinstance(act, Inv):
        out.append((_label("send", act.s, act.op, act.args), ticked(act.src), Nil()))
    elif isinstance(act, Rec):
        out.append((_label("recv", act.s, act.op, act.params), ticked(act.src), Nil()))
    elif isinstance(act, Flo):
        kids = act.children
        if len(kids) == 1 and isinstance(kids[0], Nil):
            out.append(("tau", ticked(act.src), Nil()))
        else:
            for i, kid in enumerate(kids):
                if isinstance(kid, Nil):
                    out.append(
                        (
                            "tau",
                            dict(c),
                            Flo(kids[:i] + kids[i + 1 :], act.tgt, act.src, act.jcd, act.lnk),
                        )
                    )
                else:
                    for label, c2, res in oracle_steps(c, kid):
                        out.append(
                            (
                                label,
                                c2,
                                Flo(
                                    kids[:i] + (res,) + kids[i + 1 :],
                                    act.tgt,
                                    act.src,
                                    act.jcd,
                                    act.lnk,
                                ),
                            )
                        )
    elif isinstance(act, Pic):
        for i, (head, cont) in enumerate(act.branches):
            for label, c2, res in oracle_steps(c, head):
                assert isinstance(res, Nil)
                c3 = dict(c2)
                for j, (other_head, other_cont) in enumerate(act.branches):
                    if i == j:
                        continue
                    for link in _subtree_srcs(other_head) | _subtree_srcs(other_cont):
                        c3[link] = False
                out.append((label, c3, Flo((cont,), act.tgt, act.src, act.jcd)))
    elif isinstance(act, Rep):
        for label, c2, res in oracle_steps(c, act.do_pic):
            out.append(
                (label, c2, Unf(res, act.do_pic, act.until_pic, act.tgt, act.src, act.jcd))
            )
        for label, c2, res in oracle_steps(c, act.until_pic):
            out.append((label, c2, Flo((res,), act.tgt, act.src, act.jcd)))
    elif isinstance(act, Unf):
        if isinstance(act.body, Nil):
            c2 = dict(c)
            for link in _subtree_srcs(act.do_pic) - set(act.do_pic.src):
                c2[link] = None
            for link in _subtree_tgts(act.do_pic) - set(act.do_pic.tgt):
                c2[link] = None
            for link in act.do_pic.src:
                c2[link] = True
            out.append(
                ("tau", c2, Rep(act.do_pic, act.until_pic, act.tgt, act.src, act.jcd))
            )
        else:
            for label, c2, res in oracle_steps(c, act.body):
                out.append(
                    (
                        label,
                        c2,
                        Unf(res, act.do_pic, act.until_pic, act.tgt, act.src, act.jcd),
                    )
                )
    else:
        raise TypeError(act)
    # distinct derivations may coincide (e.g. removing either of two nils)
    seen = {}
    for label, c2, res in out:
        seen[(label, tuple(sorted(c2.items(), key=lambda kv: (kv[0], str(kv[1])))), render(res))] = (
            label,
            c2,
            res,
        )
    return list(seen.values())


def _occurring_links(act):
    if isinstance(act, Nil):
        return set()
    links = set(act.tgt) | set(act.src) | set(getattr(act, "lnk", frozenset()))
    for child in _children(act):
        links |= _occurring_links(child)
    return links


def oracle_graph(act: Activity):
    """Brute-force closure; states keyed by (map items, rendered residual).

    Returns (state count, transition count, labeled transition list with
    dense ids in discovery order).
    """
    c0 = {link: None for link in _occurring_links(act)}

    def key(c, a):
        return (tuple(sorted(c.items(), key=lambda kv: (kv[0], str(kv[1])))), render(a))

    start = (c0, act)
    ids = {key(*start): 0}
    queue = deque([start])
    transitions = []
    while queue:
        c, a = queue.popleft()
        sid = ids[key(c, a)]
        for label, c2, res in oracle_steps(c, a):
            k = key(c2, res)
            if k not in ids:
                ids[k] = len(ids)
                queue.append((c2, res))
            transitions.append((sid, label, ids[k]))
    return len(ids), len(set(transitions)), sorted(set(transitions))


# --------------------------------------------------------------------------
# Trace enumeration


def complete_traces(g: ControlGraph, erase_tau: bool = True) -> set[tuple[str, ...]]:
    """All action-label sequences from the start to a sink (acyclic graphs)."""
    out = g.outgoing()
    sinks = set(g.sinks())
    traces: set[tuple[str, ...]] = set()

    def walk(state: int, prefix: tuple[str, ...], depth: int) -> None:
        if depth > g.num_states + 1:
            raise RuntimeError("cycle detected; complete_traces needs an acyclic graph")
        if state in sinks:
            traces.add(prefix)
            return
        for action, to in out[state]:
            if erase_tau and action == TAU:
                walk(to, prefix, depth + 1)
            else:
                walk(to, prefix + (action.render(tau="tau"),), depth + 1)

    walk(g.init, (), 0)
    return traces


# --------------------------------------------------------------------------
# Equivalence checkers (partition refinement on a disjoint union)


def _union(g1: ControlGraph, g2: ControlGraph):
    offset = g1.num_states
    edges = [(f, a, t) for f, a, t in g1.transitions]
    edges += [(f + offset, a, t + offset) for f, a, t in g2.transitions]
    n = g1.num_states + g2.num_states
    out = [[] for _ in range(n)]
    for f, a, t in edges:
        out[f].append((a, t))
    return n, out, g1.init, g2.init + offset


def strongly_bisimilar(g1: ControlGraph, g2: ControlGraph) -> bool:
    n, out, i1, i2 = _union(g1, g2)
    block = [0] * n
    while True:
        sigs = {}
        new = [0] * n
        for s in range(n):
            sig = (block[s], frozenset((a, block[t]) for a, t in out[s]))
            new[s] = sigs.setdefault(sig, len(sigs))
        if new == block:
            return block[i1] == block[i2]
        block = new


def branching_bisimilar(g1: ControlGraph, g2: ControlGraph) -> bool:
    """Branching bisimilarity of the initial states.

    Refines by the signature: observable (or block-changing silent) moves
    reachable through silent steps inside the current block.
    """
    n, out, i1, i2 = _union(g1, g2)
    block = [0] * n
    while True:
        sigs_table = {}
        new = [0] * n
        signatures = []
        for s in range(n):
            # states silently reachable without leaving s's block
            closure = {s}
            stack = [s]
            while stack:
                u = stack.pop()
                for a, t in out[u]:
                    if a == TAU and block[t] == block[s] and t not in closure:
                        closure.add(t)
                        stack.append(t)
            sig = set()
            for u in closure:
                for a, t in out[u]:
                    if a == TAU and block[t] == block[s]:
                        continue
                    sig.add((a, block[t]))
            signatures.append((block[s], frozenset(sig)))
        for s in range(n):
            new[s] = sigs_table.setdefault(signatures[s], len(sigs_table))
        if new == block:
            return block[i1] == block[i2]
        block = new


# --------------------------------------------------------------------------
# Random well-formed activity generation

SESSIONS = ("s", "r")
LOCATIONS = ("p", "q")
PAYLOAD = ("x", "y", "z")
OPS = ("a", "b", "c", "d")


class ActivityGenerator:
    """Deterministic generator of well-formed activities.

    Link wiring only ever connects direct children of a flow, which keeps
    scoping, unicity and acyclicity true by construction.  Pick heads and
    the picks of a repeat keep default control fields, matching the shape
    every example in the source language uses (exotic joins there would
    break the confluence the pipeline relies on).
    """

    def __init__(self, rng: random.Random, allow_rep: bool = True):
        self.rng = rng
        self.allow_rep = allow_rep
        self.link_counter = itertools.count()

    def atom(self) -> Activity:
        kind = self.rng.choice(("ses", "inv", "rec"))
        s = self.rng.choice(SESSIONS)
        if kind == "ses":
            return Ses(s, self.rng.choice(LOCATIONS))
        op = self.rng.choice(OPS)
        names = tuple(
            self.rng.sample(PAYLOAD, self.rng.randrange(0, 3))
        )
        return Inv(s, op, names) if kind == "inv" else Rec(s, op, names)

    def pic(self, depth: int) -> Pic:
        branches = []
        for _ in range(self.rng.randrange(1, 3)):
            head = Rec(
                self.rng.choice(SESSIONS),
                self.rng.choice(OPS),
                tuple(self.rng.sample(PAYLOAD, self.rng.randrange(0, 2))),
            )
            branches.append((head, self.activity(depth - 1)))
        return Pic(tuple(branches))

    def _wire_flo(self, children: list[Activity]) -> Flo:
        """Optionally add links between earlier and later children."""
        wirable = [i for i, c in enumerate(children) if not isinstance(c, Nil)]
        links: list[str] = []
        tgt_of: dict[int, set[str]] = {}
        src_of: dict[int, set[str]] = {}
        if len(wirable) >= 2:
            for _ in range(self.rng.randrange(0, 3)):
                i, j = sorted(self.rng.sample(wirable, 2))
                name = f"w{next(self.link_counter)}"
                links.append(name)
                src_of.setdefault(i, set()).add(name)
                tgt_of.setdefault(j, set()).add(name)
        wired = []
        for i, child in enumerate(children):
            tgt = frozenset(tgt_of.get(i, ()))
            src = frozenset(src_of.get(i, ()))
            if not tgt and not src:
                wired.append(child)
                continue
            jcd = self._random_join(tgt)
            wired.append(self._with_fields(child, tgt, src, jcd))
        return Flo(tuple(wired), lnk=frozenset(links))

    def _random_join(self, tgt: frozenset[str]):
        if not tgt or self.rng.random() < 0.3:
            return TRUE
        terms = [
            Not(LinkRef(n)) if self.rng.random() < 0.25 else LinkRef(n)
            for n in sorted(tgt)
        ]
        expr = terms[0]
        for term in terms[1:]:
            expr = And(expr, term) if self.rng.random() < 0.5 else Or(expr, term)
        return expr

    @staticmethod
    def _with_fields(act: Activity, tgt, src, jcd) -> Activity:
        if isinstance(act, Ses):
            return Ses(act.s, act.p, tgt, src, jcd)
        if isinstance(act, Inv):
            return Inv(act.s, act.op, act.args, tgt, src, jcd)
        if isinstance(act, Rec):
            return Rec(act.s, act.op, act.params, tgt, src, jcd)
        if isinstance(act, Seq):
            return Seq(act.children, tgt, src, jcd)
        if isinstance(act, Flo):
            return Flo(act.children, tgt, src, jcd, act.lnk)
        if isinstance(act, Pic):
            return Pic(act.branches, tgt, src, jcd)
        if isinstance(act, Rep):
            return Rep(act.do_pic, act.until_pic, tgt, src, jcd)
        raise TypeError(act)

    def activity(self, depth: int) -> Activity:
        if depth <= 0:
            return self.atom() if self.rng.random() < 0.9 else Nil()
        roll = self.rng.random()
        if roll < 0.35:
            return self.atom()
        if roll < 0.55:
            children = [
                self.activity(depth - 1) for _ in range(self.rng.randrange(1, 4))
            ]
            return Seq(tuple(children))
        if roll < 0.80:
            children = [
                self.activity(depth - 1) for _ in range(self.rng.randrange(1, 4))
            ]
            return self._wire_flo(children)
        if roll < 0.92 or not self.allow_rep:
            return self.pic(depth)
        return Rep(self.pic(depth - 1), self.pic(depth - 1))


def random_activity(seed: int, depth: int = 4, allow_rep: bool = True) -> Activity:
    gen = ActivityGenerator(random.Random(seed), allow_rep=allow_rep)
    return gen.activity(depth)


def small_random_activities(count: int, depth: int = 3, max_raw_states: int = 400):
    """Deterministic stream of activities whose raw graphs stay small.

    The expensive reference checks (naive equivalence refinements, brute
    enumeration) are only tractable on small graphs; seeds whose graph
    exceeds the cap are skipped deterministically.
    """
    from seb.compiler import StateCapExceeded, build_raw_cg

    found = 0
    seed = 0
    while found < count:
        act = random_activity(seed, depth=depth)
        seed += 1
        try:
            raw = build_raw_cg(act, max_states=max_raw_states)
        except StateCapExceeded:
            continue
        found += 1
        yield act, raw


def random_atomic_seq(seed: int, max_len: int = 5) -> Seq:
    """A plain sequence of atoms, the shape the reference trace covers."""
    gen = ActivityGenerator(random.Random(seed))
    n = gen.rng.randrange(1, max_len + 1)
    return Seq(tuple(gen.atom() for _ in range(n)))


def sequential_reference_trace(seq: Seq) -> tuple[str, ...]:
    """What running the atoms in order must produce."""
    labels = []
    for atom in seq.children:
        if isinstance(atom, Ses):
            labels.append(f"{atom.s}@{atom.p}")
        elif isinstance(atom, Inv):
            labels.append(f"{atom.s}!{atom.op}({','.join(atom.args)})")
        elif isinstance(atom, Rec):
            labels.append(f"{atom.s}?{atom.op}({','.join(atom.params)})")
        else:
            raise TypeError(atom)
    return tuple(labels)
