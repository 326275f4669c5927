"""Concrete s-expression syntax for activity files.

Grammar (``;`` starts a line comment)::

    act   ::= "(nil)" | "(" kind head field* body ")"
    kind  ::= "ses" | "inv" | "rec" | "seq" | "flo" | "pic" | "rep"
    head  ::= ses: VAR VAR | inv/rec: VAR IDENT [ "(" VAR* ")" ] | others: none
    field ::= ":tgt" "(" IDENT* ")" | ":src" "(" IDENT* ")"
            | ":jcd" jexpr | ":lnk" "(" IDENT* ")"          ; :lnk on flo only
    jexpr ::= "true" | "false" | IDENT
            | "(" ("and"|"or") jexpr jexpr ")" | "(" "not" jexpr ")"
    body  ::= seq/flo: act+ | pic: ("(" "on" act act ")")+
            | rep: "(" "do" act ")" "(" "until" act ")"

Names starting with ``$`` are reserved for generated sequencing links and
rejected in user source.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .syntax import (
    And,
    Activity,
    Flo,
    Inv,
    JoinExpr,
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
)


class SebSyntaxError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


# --------------------------------------------------------------------------
# Generic s-expression reader


@dataclass(frozen=True)
class Atom:
    text: str
    line: int
    col: int


@dataclass(frozen=True)
class Str:
    text: str
    line: int
    col: int


@dataclass(frozen=True)
class SList:
    items: tuple["Node", ...]
    line: int
    col: int


Node = Atom | Str | SList

_TOKEN = re.compile(r'\(|\)|"(?:[^"\\]|\\.)*"|[^\s()";]+')


def _tokenize(text: str) -> list[tuple[str, int, int]]:
    tokens = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        cut = line.find(";")
        if cut >= 0:
            line = line[:cut]
        for m in _TOKEN.finditer(line):
            tokens.append((m.group(0), lineno, m.start() + 1))
    return tokens


def read_forms(text: str) -> list[Node]:
    """Read every top-level form in the text."""
    tokens = _tokenize(text)
    pos = 0

    def read() -> Node:
        nonlocal pos
        tok, line, col = tokens[pos]
        pos += 1
        if tok == "(":
            items = []
            while True:
                if pos >= len(tokens):
                    raise SebSyntaxError("unclosed '('", line, col)
                if tokens[pos][0] == ")":
                    pos += 1
                    return SList(tuple(items), line, col)
                items.append(read())
        if tok == ")":
            raise SebSyntaxError("unexpected ')'", line, col)
        if tok.startswith('"'):
            body = tok[1:-1]
            body = re.sub(r"\\(.)", r"\1", body)
            return Str(body, line, col)
        return Atom(tok, line, col)

    forms = []
    while pos < len(tokens):
        forms.append(read())
    return forms


def _single_form(text: str, what: str) -> Node:
    forms = read_forms(text)
    if not forms:
        raise SebSyntaxError(f"empty input, expected {what}", 1, 1)
    if len(forms) > 1:
        extra = forms[1]
        raise SebSyntaxError(f"trailing input after {what}", extra.line, extra.col)
    return forms[0]


# --------------------------------------------------------------------------
# Activity construction

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

_KINDS = {"nil", "ses", "inv", "rec", "seq", "flo", "pic", "rep"}
_FIELD_KEYS = (":tgt", ":src", ":jcd", ":lnk")


def _err(node: Node, message: str) -> SebSyntaxError:
    return SebSyntaxError(message, node.line, node.col)


def _ident(node: Node, what: str) -> str:
    if not isinstance(node, Atom):
        raise _err(node, f"expected {what}")
    if node.text.startswith("$"):
        raise _err(node, f"'{node.text}': the '$' prefix is reserved for generated links")
    if not _IDENT.match(node.text):
        raise _err(node, f"'{node.text}' is not a valid {what}")
    return node.text


def _ident_list(node: Node, what: str) -> tuple[str, ...]:
    if not isinstance(node, SList):
        raise _err(node, f"expected a parenthesized list of {what}s")
    return tuple(_ident(item, what) for item in node.items)


def _parse_jexpr(node: Node) -> JoinExpr:
    if isinstance(node, Atom):
        if node.text == "true":
            return Lit(True)
        if node.text == "false":
            return Lit(False)
        return LinkRef(_ident(node, "link name"))
    if isinstance(node, SList):
        if not node.items or not isinstance(node.items[0], Atom):
            raise _err(node, "expected 'and', 'or' or 'not'")
        op = node.items[0].text
        if op in ("and", "or"):
            if len(node.items) != 3:
                raise _err(node, f"'{op}' takes exactly two operands")
            left, right = _parse_jexpr(node.items[1]), _parse_jexpr(node.items[2])
            return And(left, right) if op == "and" else Or(left, right)
        if op == "not":
            if len(node.items) != 2:
                raise _err(node, "'not' takes exactly one operand")
            return Not(_parse_jexpr(node.items[1]))
        raise _err(node.items[0], f"unknown join operator '{op}'")
    raise _err(node, "expected a join condition")


def _build_activity(node: Node) -> Activity:
    if not isinstance(node, SList):
        raise _err(node, "expected an activity")
    if not node.items or not isinstance(node.items[0], Atom):
        raise _err(node, "expected an activity keyword")
    kind = node.items[0].text
    if kind not in _KINDS:
        raise _err(node.items[0], f"unknown activity keyword '{kind}'")
    rest = list(node.items[1:])

    if kind == "nil":
        if rest:
            raise _err(rest[0], "(nil) takes no arguments")
        return Nil()

    # Head
    head: dict = {}
    if kind == "ses":
        if len(rest) < 2:
            raise _err(node, "ses needs a session variable and a location variable")
        head["s"] = _ident(rest.pop(0), "session variable")
        head["p"] = _ident(rest.pop(0), "location variable")
    elif kind in ("inv", "rec"):
        if len(rest) < 2:
            raise _err(node, f"{kind} needs a session variable and an operation name")
        head["s"] = _ident(rest.pop(0), "session variable")
        head["op"] = _ident(rest.pop(0), "operation name")
        # The argument list is optional when empty; a following parenthesized
        # form can only be it, since fields are introduced by keyword atoms.
        names: tuple[str, ...] = ()
        if rest and isinstance(rest[0], SList):
            names = _ident_list(rest.pop(0), "variable")
        head["args" if kind == "inv" else "params"] = names

    # Fields
    fields: dict = {}
    while rest and isinstance(rest[0], Atom) and rest[0].text.startswith(":"):
        key_node = rest.pop(0)
        key = key_node.text
        if key not in _FIELD_KEYS:
            raise _err(key_node, f"unknown field '{key}'")
        if key in fields:
            raise _err(key_node, f"duplicate field '{key}'")
        if not rest:
            raise _err(key_node, f"field '{key}' needs a value")
        value = rest.pop(0)
        if key == ":jcd":
            fields["jcd"] = _parse_jexpr(value)
        else:
            name = key[1:]
            if name == "lnk" and kind != "flo":
                raise _err(key_node, ":lnk is only legal on flo")
            fields[name] = frozenset(_ident_list(value, "link name"))

    common = {
        "tgt": fields.get("tgt", frozenset()),
        "src": fields.get("src", frozenset()),
        "jcd": fields.get("jcd", TRUE),
    }

    # Body
    if kind == "ses":
        if rest:
            raise _err(rest[0], "ses takes no body")
        return Ses(head["s"], head["p"], **common)
    if kind == "inv":
        if rest:
            raise _err(rest[0], "inv takes no body")
        return Inv(head["s"], head["op"], head["args"], **common)
    if kind == "rec":
        if rest:
            raise _err(rest[0], "rec takes no body")
        return Rec(head["s"], head["op"], head["params"], **common)
    if kind in ("seq", "flo"):
        if not rest:
            raise _err(node, f"{kind} needs at least one child activity")
        children = tuple(_build_activity(item) for item in rest)
        if kind == "seq":
            return Seq(children, **common)
        return Flo(children, lnk=fields.get("lnk", frozenset()), **common)
    if kind == "pic":
        if not rest:
            raise _err(node, "pic needs at least one (on ...) branch")
        branches = []
        for item in rest:
            if (
                not isinstance(item, SList)
                or len(item.items) != 3
                or not isinstance(item.items[0], Atom)
                or item.items[0].text != "on"
            ):
                raise _err(item, "pic branches have the form (on <rec> <activity>)")
            guard = _build_activity(item.items[1])
            if not isinstance(guard, Rec):
                raise _err(item.items[1], "a pic branch head must be a reception")
            branches.append((guard, _build_activity(item.items[2])))
        return Pic(tuple(branches), **common)
    if kind == "rep":
        if len(rest) != 2:
            raise _err(node, "rep has the form (rep (do <pic>) (until <pic>))")
        parts = {}
        for item, label in zip(rest, ("do", "until")):
            if (
                not isinstance(item, SList)
                or len(item.items) != 2
                or not isinstance(item.items[0], Atom)
                or item.items[0].text != label
            ):
                raise _err(item, f"expected ({label} <pic>)")
            sub = _build_activity(item.items[1])
            if not isinstance(sub, Pic):
                raise _err(item.items[1], f"the {label} part of rep must be a pic")
            parts[label] = sub
        return Rep(parts["do"], parts["until"], **common)
    raise _err(node, f"unknown activity keyword '{kind}'")


def parse_activity(text: str) -> Activity:
    """Parse a single activity from source text."""
    return _build_activity(_single_form(text, "an activity"))


def parse_activity_file(path) -> Activity:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_activity(fh.read())
