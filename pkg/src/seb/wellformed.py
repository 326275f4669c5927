"""Static validation of activity trees and seq removal.

An activity is accepted when its control links are unique, well scoped
and acyclic (including across the containment relation), every repeat
is closed with respect to links, and variable kinds inferred from the
syntactic positions are consistent.  Violations are collected
exhaustively, never fail-fast.
"""

from __future__ import annotations

import enum

from .diagnostics import (
    CONTAINMENT_CROSS,
    CYCLE,
    DUP_LINK,
    Diagnostic,
    KIND_CLASH,
    REP_ESCAPE,
    REP_INCOMING,
    REP_OUTGOING,
    UNSCOPED_LINK,
    sort_diagnostics,
)
from .syntax import (
    Activity,
    And,
    Flo,
    Inv,
    LinkRef,
    Nil,
    OWN_LOCATION,
    Path,
    Pic,
    ROOT_SESSION,
    Rec,
    Rep,
    Seq,
    Ses,
    TRUE,
    contains_unf,
    describe_path,
    fields_src,
    fields_tgt,
    join_links,
    subacts,
)


class VarKind(enum.Enum):
    SESSION = "session"
    LOCATION = "service-location"
    EXCHANGEABLE = "exchangeable"


def infer_kinds(act: Activity) -> tuple[dict[str, VarKind], list[Diagnostic]]:
    """Assign a kind to every variable from its syntactic positions.

    Payload positions only reveal that a variable is exchangeable; a
    location usage elsewhere refines that to service-location.  A variable
    seen both as a session and as anything else is a clash, as are misuses
    of the reserved names.
    """
    kinds: dict[str, VarKind] = {OWN_LOCATION: VarKind.LOCATION, ROOT_SESSION: VarKind.SESSION}
    clashes: dict[str, Diagnostic] = {}

    def observe(var: str, kind: VarKind, path: Path) -> None:
        seen = kinds.get(var)
        if seen is None:
            kinds[var] = kind
            return
        if seen == kind:
            return
        if VarKind.SESSION in (seen, kind):
            if var not in clashes:
                clashes[var] = Diagnostic(
                    KIND_CLASH,
                    f"variable '{var}' is used both as {seen.value} and as {kind.value}",
                    path,
                )
            return
        # exchangeable refines to service-location
        kinds[var] = VarKind.LOCATION

    for path, sub in subacts(act).items():
        match sub:
            case Ses(s, p):
                observe(s, VarKind.SESSION, path)
                observe(p, VarKind.LOCATION, path)
            case Inv(s, _, args):
                observe(s, VarKind.SESSION, path)
                for a in args:
                    observe(a, VarKind.EXCHANGEABLE, path)
            case Rec(s, _, params):
                observe(s, VarKind.SESSION, path)
                for x in params:
                    observe(x, VarKind.EXCHANGEABLE, path)

    return kinds, list(clashes.values())


def validate_well_formed(act: Activity) -> list[Diagnostic]:
    """All well-formedness violations of the tree; empty means accepted."""
    if contains_unf(act):
        raise ValueError("validation applies to source activities, not residuals")

    subs = subacts(act)
    out: list[Diagnostic] = []

    # Link occurrence tables, by declaration role.
    by_src: dict[str, list[Path]] = {}
    by_tgt: dict[str, list[Path]] = {}
    by_lnk: dict[str, list[Path]] = {}
    for path, sub in subs.items():
        for link in fields_src(sub):
            by_src.setdefault(link, []).append(path)
        for link in fields_tgt(sub):
            by_tgt.setdefault(link, []).append(path)
        for link in getattr(sub, "lnk", frozenset()):
            by_lnk.setdefault(link, []).append(path)

    # Unicity: each role of a link belongs to exactly one activity.
    for role, table in (("source", by_src), ("target", by_tgt), ("scope", by_lnk)):
        for link in sorted(table):
            paths = table[link]
            if len(paths) > 1:
                places = ", ".join(describe_path(act, p) for p in paths)
                out.append(
                    Diagnostic(
                        DUP_LINK,
                        f"link '{link}' declared as {role} by several activities: {places}",
                        paths[0],
                    )
                )

    # Scoping: each src/tgt occurrence needs a declaring flo containing both
    # the occurrence and a matching opposite endpoint.
    def scoped(link: str, here: Path, opposite: dict[str, list[Path]]) -> bool:
        for scope_path in by_lnk.get(link, ()):  # flo declaring the link
            if here[: len(scope_path)] != scope_path:
                continue
            for other in opposite.get(link, ()):
                if other[: len(scope_path)] == scope_path:
                    return True
        return False

    for link in sorted(by_src):
        for path in by_src[link]:
            if not scoped(link, path, by_tgt):
                out.append(
                    Diagnostic(
                        UNSCOPED_LINK,
                        f"source link '{link}' has no enclosing flo scope with a matching target",
                        path,
                    )
                )
    for link in sorted(by_tgt):
        for path in by_tgt[link]:
            if not scoped(link, path, by_src):
                out.append(
                    Diagnostic(
                        UNSCOPED_LINK,
                        f"target link '{link}' has no enclosing flo scope with a matching source",
                        path,
                    )
                )

    # Join conditions range over the activity's own incoming links.
    for path, sub in subs.items():
        jcd = getattr(sub, "jcd", TRUE)
        stray = join_links(jcd) - fields_tgt(sub)
        if stray:
            out.append(
                Diagnostic(
                    UNSCOPED_LINK,
                    "join condition references links outside the tgt set: "
                    + ", ".join(sorted(stray)),
                    path,
                )
            )

    # Non-cyclicity of the precedence relation.
    edges: dict[Path, set[Path]] = {}
    for path, sub in subs.items():
        src1 = fields_src(sub)
        if src1:
            for p2, sub2 in subs.items():
                if src1 & fields_tgt(sub2):
                    edges.setdefault(path, set()).add(p2)
    for path, sub in subs.items():
        if isinstance(sub, Seq):
            for i in range(len(sub.children) - 1):
                edges.setdefault(path + (i,), set()).add(path + (i + 1,))

    state: dict[Path, int] = {}

    def on_cycle(path: Path, trail: list[Path]) -> Path | None:
        state[path] = 1
        trail.append(path)
        for succ in sorted(edges.get(path, ())):
            if state.get(succ, 0) == 1:
                return succ
            if state.get(succ, 0) == 0:
                found = on_cycle(succ, trail)
                if found is not None:
                    return found
        state[path] = 2
        trail.pop()
        return None

    for start in sorted(edges):
        if state.get(start, 0) == 0:
            trail: list[Path] = []
            entry = on_cycle(start, trail)
            if entry is not None:
                loop = trail[trail.index(entry) :]
                names = " -> ".join(describe_path(act, p) for p in loop + [entry])
                out.append(Diagnostic(CYCLE, f"precedence cycle: {names}", entry))
                break  # one report per tree is enough; state is tainted

    # Containment crossing: no links between an activity and its subactivities.
    for path, sub in subs.items():
        for p2, sub2 in subs.items():
            if p2[: len(path)] != path:
                continue
            if fields_src(sub) & fields_tgt(sub2):
                out.append(
                    Diagnostic(
                        CONTAINMENT_CROSS,
                        f"links from {describe_path(act, path)} target its own "
                        f"subactivity {describe_path(act, p2)}",
                        path,
                    )
                )
            if p2 != path and fields_src(sub2) & fields_tgt(sub):
                out.append(
                    Diagnostic(
                        CONTAINMENT_CROSS,
                        f"links from subactivity {describe_path(act, p2)} target "
                        f"the containing {describe_path(act, path)}",
                        path,
                    )
                )

    # Repeat closure conditions.
    for path, sub in subs.items():
        if not isinstance(sub, Rep):
            continue
        if fields_tgt(sub.do_pic) or fields_tgt(sub.until_pic):
            out.append(
                Diagnostic(
                    REP_INCOMING,
                    "the do/until parts of a repeat cannot have incoming links",
                    path,
                )
            )
        if fields_src(sub.do_pic):
            out.append(
                Diagnostic(
                    REP_OUTGOING,
                    "the do part of a repeat cannot have outgoing links",
                    path,
                )
            )
        inner_src = frozenset().union(
            *(fields_src(s) for s in subacts(sub.do_pic, strict=True).values())
        ) if subacts(sub.do_pic, strict=True) else frozenset()
        inner_tgt = frozenset().union(
            *(fields_tgt(s) for s in subacts(sub.do_pic, strict=True).values())
        ) if subacts(sub.do_pic, strict=True) else frozenset()
        if inner_src != inner_tgt:
            escaped = sorted(inner_src ^ inner_tgt)
            out.append(
                Diagnostic(
                    REP_ESCAPE,
                    "links of activities inside the do part must stay internal: "
                    + ", ".join(escaped),
                    path,
                )
            )

    _, clashes = infer_kinds(act)
    out.extend(clashes)

    return sort_diagnostics(out)


# --------------------------------------------------------------------------
# Seq removal

SEQ_LINK_PREFIX = "$seq"


def desugar_seq(act: Activity) -> Activity:
    """Replace every seq by a flow chained with fresh generated links.

    Each consecutive pair of children gets a fresh ``$seq<k>`` link from
    the earlier to the later child, whose join condition is strengthened
    with the new link.  Numbering is allocated in preorder, so the result
    is deterministic.
    """
    counter = 0

    def fresh() -> str:
        nonlocal counter
        name = f"{SEQ_LINK_PREFIX}{counter}"
        counter += 1
        return name

    def conj(jcd, link: str):
        return LinkRef(link) if jcd == TRUE else And(jcd, LinkRef(link))

    def walk(node: Activity) -> Activity:
        match node:
            case Seq(children, tgt, src, jcd):
                # nil children complete immediately: chaining skips them
                children = tuple(c for c in children if not isinstance(c, Nil))
                if not children:
                    return Flo((Nil(),), tgt, src, jcd, frozenset())
                if len(children) == 1:
                    return Flo((walk(children[0]),), tgt, src, jcd, frozenset())
                links = [fresh() for _ in range(len(children) - 1)]
                chained: list[Activity] = []
                for i, child in enumerate(children):
                    add_src = frozenset([links[i]]) if i < len(links) else frozenset()
                    add_tgt = frozenset([links[i - 1]]) if i > 0 else frozenset()
                    new_jcd = conj(child.jcd, links[i - 1]) if i > 0 else child.jcd
                    child = _replace_common(
                        child,
                        tgt=child.tgt | add_tgt,
                        src=child.src | add_src,
                        jcd=new_jcd,
                    )
                    chained.append(walk(child))
                return Flo(tuple(chained), tgt, src, jcd, frozenset(links))
            case Flo(children, tgt, src, jcd, lnk):
                return Flo(tuple(walk(c) for c in children), tgt, src, jcd, lnk)
            case Pic(branches, tgt, src, jcd):
                new_branches = tuple((h, walk(c)) for h, c in branches)
                return Pic(new_branches, tgt, src, jcd)
            case Rep(do_pic, until_pic, tgt, src, jcd):
                return Rep(walk(do_pic), walk(until_pic), tgt, src, jcd)
            case _:
                return node

    return walk(act)


def _replace_common(act: Activity, *, tgt, src, jcd) -> Activity:
    match act:
        case Ses(s, p):
            return Ses(s, p, tgt, src, jcd)
        case Inv(s, op, args):
            return Inv(s, op, args, tgt, src, jcd)
        case Rec(s, op, params):
            return Rec(s, op, params, tgt, src, jcd)
        case Seq(children):
            return Seq(children, tgt, src, jcd)
        case Flo(children):
            return Flo(children, tgt, src, jcd, act.lnk)
        case Pic(branches):
            return Pic(branches, tgt, src, jcd)
        case Rep(do_pic, until_pic):
            return Rep(do_pic, until_pic, tgt, src, jcd)
        case Nil():
            raise ValueError("nil carries no control fields")
    raise TypeError(f"not an activity: {act!r}")
