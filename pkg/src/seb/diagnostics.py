"""Shared diagnostic record used by the validators."""

from __future__ import annotations

from dataclasses import dataclass, field

from .syntax import Path

# Well-formedness codes
DUP_LINK = "DUP_LINK"
UNSCOPED_LINK = "UNSCOPED_LINK"
CYCLE = "CYCLE"
CONTAINMENT_CROSS = "CONTAINMENT_CROSS"
REP_INCOMING = "REP_INCOMING"
REP_OUTGOING = "REP_OUTGOING"
REP_ESCAPE = "REP_ESCAPE"
KIND_CLASH = "KIND_CLASH"

# Variable / occurrence codes
P0_REBOUND = "P0_REBOUND"
S0_INITIATED = "S0_INITIATED"

# Deployability codes
NOT_PIC = "NOT_PIC"
ROOT_SESSION = "ROOT_SESSION"
MISSING_ROOT_FREE = "MISSING_ROOT_FREE"
FREE_SESSION = "FREE_SESSION"
DOMAIN_MISMATCH = "DOMAIN_MISMATCH"
NONFREE_DEFINED = "NONFREE_DEFINED"
UNDEFINED_FREE = "UNDEFINED_FREE"

# Configuration codes
DUP_LOCATION = "DUP_LOCATION"
DANGLING_PARTNER = "DANGLING_PARTNER"
CLIENT_SHAPE = "CLIENT_SHAPE"
BROKEN_BINDING = "BROKEN_BINDING"
UNDEFINED_PAYLOAD = "UNDEFINED_PAYLOAD"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    path: Path = field(default=())

    def __str__(self) -> str:
        where = "/" + "/".join(str(i) for i in self.path) if self.path else "/"
        return f"{self.code} at {where}: {self.message}"


def sort_diagnostics(items: list[Diagnostic]) -> list[Diagnostic]:
    return sorted(items, key=lambda d: (d.code, d.path, d.message))
