"""Executable semantics of networked service configurations.

A running configuration holds deployable services (factories), running
instances, FIFO message queues and session bindings.  Four rules advance
it: a session initiation enqueues a fresh-session request at the target
location; a service consumes such a request by spawning an instance; a
send appends an operation message to the partner session's queue; a
reception consumes a matching head message.  Interaction safety fails
exactly when some instance is open for reception on a session whose queue
head it cannot receive.

All values are immutable; exploration and simulation are deterministic.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .control import ControlGraph, Recv, Send, SesInit
from .diagnostics import (
    BROKEN_BINDING,
    CLIENT_SHAPE,
    DANGLING_PARTNER,
    DUP_LOCATION,
    Diagnostic,
    UNDEFINED_FREE,
    UNDEFINED_PAYLOAD,
    sort_diagnostics,
)
from .syntax import Activity, OWN_LOCATION, ROOT_SESSION
from .variables import check_deployable

# --------------------------------------------------------------------------
# Values


@dataclass(frozen=True)
class Data:
    text: str

    def render(self) -> str:
        return f'"{self.text}"'


@dataclass(frozen=True)
class ServiceLoc:
    name: str

    def render(self) -> str:
        return self.name


@dataclass(frozen=True)
class SessionId:
    name: str

    def render(self) -> str:
        return self.name


Value = Data | ServiceLoc | SessionId

EXCHANGEABLE = (Data, ServiceLoc)


def value_key(value: Value) -> tuple:
    rank = {Data: 0, ServiceLoc: 1, SessionId: 2}[type(value)]
    return (rank, value.render())


VarMap = tuple[tuple[str, Value | None], ...]


def make_var_map(mapping: dict[str, Value | None]) -> VarMap:
    return tuple(sorted(mapping.items()))


def var_map_get(m: VarMap, var: str) -> Value | None:
    for name, value in m:
        if name == var:
            return value
    return None


def var_map_set(m: VarMap, updates: dict[str, Value | None]) -> VarMap:
    d = dict(m)
    d.update(updates)
    return make_var_map(d)


# --------------------------------------------------------------------------
# Messages, queues, configuration


@dataclass(frozen=True)
class NewSession:
    session: SessionId

    def render(self) -> str:
        return f"new({self.session.render()})"


@dataclass(frozen=True)
class OpMessage:
    op: str
    payload: tuple[Value, ...]

    def render(self) -> str:
        return f"{self.op}({', '.join(v.render() for v in self.payload)})"


Message = NewSession | OpMessage


@dataclass(frozen=True)
class DeployableService:
    name: str
    var_map: VarMap
    pic: Activity
    graph: ControlGraph

    @property
    def location(self) -> ServiceLoc:
        loc = var_map_get(self.var_map, OWN_LOCATION)
        assert isinstance(loc, ServiceLoc)
        return loc


@dataclass(frozen=True)
class Instance:
    origin: str  # service name, or "client"
    var_map: VarMap
    graph: ControlGraph = field(repr=False)
    state: int


Queues = tuple[tuple[Value, tuple[Message, ...]], ...]


@dataclass(frozen=True)
class RunningConfiguration:
    services: tuple[DeployableService, ...]
    instances: tuple[Instance, ...]
    queues: Queues
    bindings: tuple[tuple[SessionId, SessionId], ...]
    fresh_counter: int = 0
    fault: Diagnostic | None = None

    def queue(self, dest: Value) -> tuple[Message, ...]:
        for d, items in self.queues:
            if d == dest:
                return items
        return ()

    def partner(self, session: SessionId) -> SessionId | None:
        for a, b in self.bindings:
            if a == session:
                return b
            if b == session:
                return a
        return None


def _queue_set(queues: Queues, dest: Value, items: tuple[Message, ...]) -> Queues:
    as_dict = {d: i for d, i in queues}
    if items:
        as_dict[dest] = items
    else:
        as_dict.pop(dest, None)  # empty queues are dropped for canonicity
    return tuple(sorted(as_dict.items(), key=lambda e: value_key(e[0])))


def _bind(
    bindings: tuple[tuple[SessionId, SessionId], ...], a: SessionId, b: SessionId
) -> tuple[tuple[SessionId, SessionId], ...]:
    pair = tuple(sorted((a, b), key=value_key))
    return tuple(sorted(set(bindings) | {pair}, key=lambda p: (value_key(p[0]), value_key(p[1]))))


# --------------------------------------------------------------------------
# Static configuration checks


def check_well_partnered(services: list[DeployableService]) -> list[Diagnostic]:
    """Distinct own locations, and every referenced location present."""
    out: list[Diagnostic] = []
    locations: dict[ServiceLoc, str] = {}
    for svc in services:
        loc = svc.location
        if loc in locations:
            out.append(
                Diagnostic(
                    DUP_LOCATION,
                    f"services '{locations[loc]}' and '{svc.name}' share location "
                    f"{loc.render()}",
                )
            )
        else:
            locations[loc] = svc.name
    for svc in services:
        for var, value in svc.var_map:
            if isinstance(value, ServiceLoc) and value not in locations:
                out.append(
                    Diagnostic(
                        DANGLING_PARTNER,
                        f"service '{svc.name}' points '{var}' at {value.render()}, "
                        "where no service is deployed",
                    )
                )
    return sort_diagnostics(out)


class ConfigurationError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


def make_service(
    name: str, var_map: dict[str, Value | None], pic: Activity, graph: ControlGraph
) -> DeployableService:
    problems = check_deployable(var_map, pic)
    if not isinstance(var_map.get(OWN_LOCATION), ServiceLoc):
        problems = problems + [
            Diagnostic(
                UNDEFINED_FREE,
                f"'{OWN_LOCATION}' must hold a service location",
            )
        ]
    if problems:
        raise ConfigurationError(problems)
    return DeployableService(name, make_var_map(var_map), pic, graph)


def make_client(
    var_map: dict[str, Value | None],
    act: Activity,
    graph: ControlGraph,
    services: list[DeployableService],
) -> Instance:
    """Validate and build the bootstrap client instance.

    The client's first steps must all be session initiations whose target
    location variable is defined and names a deployed service.
    """
    problems: list[Diagnostic] = []
    out = graph.outgoing()
    first = out[graph.init]
    if not first:
        problems.append(Diagnostic(CLIENT_SHAPE, "the client activity does nothing"))
    locations = {svc.location for svc in services}
    for action, _ in first:
        if not isinstance(action, SesInit):
            problems.append(
                Diagnostic(
                    CLIENT_SHAPE,
                    f"the client must start with a session initiation, found "
                    f"{action.render()}",
                )
            )
            continue
        value = var_map.get(action.p)
        if value is None:
            problems.append(
                Diagnostic(
                    UNDEFINED_FREE,
                    f"client location variable '{action.p}' has no value",
                )
            )
        elif not isinstance(value, ServiceLoc) or value not in locations:
            problems.append(
                Diagnostic(
                    DANGLING_PARTNER,
                    f"client location variable '{action.p}' does not name a "
                    "deployed service",
                )
            )
    if problems:
        raise ConfigurationError(sort_diagnostics(problems))
    return Instance("client", make_var_map(var_map), graph, graph.init)


def make_initial_config(
    services: list[DeployableService], client: Instance
) -> RunningConfiguration:
    problems = check_well_partnered(services)
    if problems:
        raise ConfigurationError(problems)
    return RunningConfiguration(
        services=tuple(services),
        instances=(client,),
        queues=(),
        bindings=(),
        fresh_counter=0,
    )


# --------------------------------------------------------------------------
# The step relation

RuleTag = str  # "SES1" | "SES2" | "INV" | "REC"


@dataclass(frozen=True)
class ConfigStep:
    rule: RuleTag
    actor: str  # rendered instance or service identity
    detail: str  # rendered action
    result: RunningConfiguration

    def render(self) -> str:
        return f"{self.rule} {self.actor} {self.detail}"


def _fresh_session(counter: int) -> tuple[SessionId, int]:
    return SessionId(f"#{counter}"), counter + 1


def successors(config: RunningConfiguration) -> list[ConfigStep]:
    """Every configuration reachable in one rule application."""
    steps: list[ConfigStep] = []
    if config.fault is not None:
        return steps

    # SES1: an instance initiates a session.
    for idx, inst in enumerate(config.instances):
        out = inst.graph.outgoing()[inst.state]
        for action, to in sorted(out, key=lambda e: (e[0].sort_key(), e[1])):
            if not isinstance(action, SesInit):
                continue
            target = var_map_get(inst.var_map, action.p)
            actor = f"{inst.origin}[{idx}]"
            if not isinstance(target, ServiceLoc):
                fault = Diagnostic(
                    BROKEN_BINDING,
                    f"{actor} initiates on '{action.p}' which holds no location",
                )
                steps.append(
                    ConfigStep("SES1", actor, action.render(), replace(config, fault=fault))
                )
                continue
            alpha, counter = _fresh_session(config.fresh_counter)
            beta, counter = _fresh_session(counter)
            new_inst = replace(
                inst, var_map=var_map_set(inst.var_map, {action.s: alpha}), state=to
            )
            instances = (
                config.instances[:idx] + (new_inst,) + config.instances[idx + 1 :]
            )
            queues = _queue_set(
                config.queues, target, config.queue(target) + (NewSession(beta),)
            )
            result = replace(
                config,
                instances=instances,
                queues=queues,
                bindings=_bind(config.bindings, alpha, beta),
                fresh_counter=counter,
            )
            detail = f"{action.render()} -> {NewSession(beta).render()} at {target.render()}"
            steps.append(ConfigStep("SES1", actor, detail, result))

    # SES2: a service consumes a session request and spawns an instance.
    for svc_idx, svc in enumerate(config.services):
        queue = config.queue(svc.location)
        if not queue:
            continue
        head = queue[0]
        if not isinstance(head, NewSession):
            continue
        spawned = Instance(
            origin=svc.name,
            var_map=var_map_set(svc.var_map, {ROOT_SESSION: head.session}),
            graph=svc.graph,
            state=svc.graph.init,
        )
        result = replace(
            config,
            instances=config.instances + (spawned,),
            queues=_queue_set(config.queues, svc.location, queue[1:]),
        )
        detail = f"consume {head.render()} at {svc.location.render()}"
        steps.append(ConfigStep("SES2", svc.name, detail, result))

    # INV: an instance sends an operation message over a bound session.
    for idx, inst in enumerate(config.instances):
        out = inst.graph.outgoing()[inst.state]
        for action, to in sorted(out, key=lambda e: (e[0].sort_key(), e[1])):
            if not isinstance(action, Send):
                continue
            actor = f"{inst.origin}[{idx}]"
            own = var_map_get(inst.var_map, action.s)
            partner = (
                config.partner(own) if isinstance(own, SessionId) else None
            )
            if partner is None:
                fault = Diagnostic(
                    BROKEN_BINDING,
                    f"{actor} sends on '{action.s}' which is not bound to a session",
                )
                steps.append(
                    ConfigStep("INV", actor, action.render(), replace(config, fault=fault))
                )
                continue
            payload = []
            undefined = None
            for arg in action.args:
                value = var_map_get(inst.var_map, arg)
                if value is None or isinstance(value, SessionId):
                    undefined = arg
                    break
                payload.append(value)
            if undefined is not None:
                fault = Diagnostic(
                    UNDEFINED_PAYLOAD,
                    f"{actor} sends '{undefined}' which holds no exchangeable value",
                )
                steps.append(
                    ConfigStep("INV", actor, action.render(), replace(config, fault=fault))
                )
                continue
            message = OpMessage(action.op, tuple(payload))
            new_inst = replace(inst, state=to)
            instances = (
                config.instances[:idx] + (new_inst,) + config.instances[idx + 1 :]
            )
            queues = _queue_set(
                config.queues, partner, config.queue(partner) + (message,)
            )
            result = replace(config, instances=instances, queues=queues)
            detail = f"{action.render()} -> {message.render()} to {partner.render()}"
            steps.append(ConfigStep("INV", actor, detail, result))

    # REC: an instance consumes a matching head message.
    for idx, inst in enumerate(config.instances):
        out = inst.graph.outgoing()[inst.state]
        for action, to in sorted(out, key=lambda e: (e[0].sort_key(), e[1])):
            if not isinstance(action, Recv):
                continue
            own = var_map_get(inst.var_map, action.s)
            if not isinstance(own, SessionId):
                continue
            queue = config.queue(own)
            if not queue:
                continue
            head = queue[0]
            if not isinstance(head, OpMessage):
                continue
            if head.op != action.op or len(head.payload) != len(action.params):
                continue
            updates = dict(zip(action.params, head.payload))
            new_inst = replace(
                inst, var_map=var_map_set(inst.var_map, updates), state=to
            )
            instances = (
                config.instances[:idx] + (new_inst,) + config.instances[idx + 1 :]
            )
            result = replace(
                config,
                instances=instances,
                queues=_queue_set(config.queues, own, queue[1:]),
            )
            actor = f"{inst.origin}[{idx}]"
            detail = f"{action.render()} <- {head.render()}"
            steps.append(ConfigStep("REC", actor, detail, result))

    return steps


# --------------------------------------------------------------------------
# Interaction safety


@dataclass(frozen=True)
class UnsafeWitness:
    instance: str
    session_var: str
    op: str
    arity: int
    state: int

    def render(self) -> str:
        return (
            f"{self.instance} is open on '{self.session_var}' at state "
            f"{self.state} but cannot receive head message "
            f"{self.op}/{self.arity}"
        )


def one_step_safe(config: RunningConfiguration) -> UnsafeWitness | None:
    """None when safe; otherwise the first mismatch witness.

    A mismatch: some instance holds a session whose queue head is an
    operation message, the instance is open for reception on that session,
    yet no outgoing reception matches the head's operation and arity.
    """
    for idx, inst in enumerate(config.instances):
        out = inst.graph.outgoing()[inst.state]
        for var, value in inst.var_map:
            if not isinstance(value, SessionId):
                continue
            queue = config.queue(value)
            if not queue or not isinstance(queue[0], OpMessage):
                continue
            head = queue[0]
            receptions = [
                action
                for action, _ in out
                if isinstance(action, Recv) and action.s == var
            ]
            if not receptions:
                continue  # not open on this session
            if not any(
                r.op == head.op and len(r.params) == len(head.payload)
                for r in receptions
            ):
                return UnsafeWitness(
                    instance=f"{inst.origin}[{idx}]",
                    session_var=var,
                    op=head.op,
                    arity=len(head.payload),
                    state=inst.state,
                )
    return None


@dataclass(frozen=True)
class Verified:
    configurations: int


@dataclass(frozen=True)
class Unsafe:
    trace: tuple[ConfigStep, ...]
    witness: UnsafeWitness | None
    fault: Diagnostic | None = None
    configurations: int = 0


@dataclass(frozen=True)
class Exhausted:
    configurations: int
    max_configs: int
    max_queue_len: int
    reason: str


ExploreResult = Verified | Unsafe | Exhausted


def _max_queue(config: RunningConfiguration) -> int:
    return max((len(items) for _, items in config.queues), default=0)


def explore_safety(
    services: list[DeployableService],
    client: Instance,
    max_configs: int = 100_000,
    max_queue_len: int = 16,
) -> ExploreResult:
    """Breadth-first interaction-safety check of the reachable space.

    ``Verified`` means every reachable configuration was visited and is
    safe.  Hitting either limit downgrades the verdict to ``Exhausted``:
    verified only up to the bound.
    """
    initial = make_initial_config(services, client)
    visited: dict[RunningConfiguration, int] = {initial: 0}
    order: list[RunningConfiguration] = [initial]
    parents: dict[int, tuple[int, ConfigStep]] = {}
    truncated = False

    def trace_to(index: int) -> tuple[ConfigStep, ...]:
        chain = []
        while index != 0:
            index, step = parents[index]
            chain.append(step)
        return tuple(reversed(chain))

    frontier = [0]
    while frontier:
        next_frontier = []
        for cfg_index in frontier:
            config = order[cfg_index]
            witness = one_step_safe(config)
            if witness is not None:
                return Unsafe(trace_to(cfg_index), witness, configurations=len(visited))
            for step in successors(config):
                succ = step.result
                if succ.fault is not None:
                    trace = trace_to(cfg_index) + (step,)
                    return Unsafe(trace, None, fault=succ.fault, configurations=len(visited))
                if succ in visited:
                    continue
                if _max_queue(succ) > max_queue_len:
                    truncated = True
                    continue
                if len(visited) >= max_configs:
                    return Exhausted(
                        len(visited), max_configs, max_queue_len, "configuration limit"
                    )
                index = len(order)
                visited[succ] = index
                order.append(succ)
                parents[index] = (cfg_index, step)
                next_frontier.append(index)
        frontier = next_frontier

    if truncated:
        return Exhausted(len(visited), max_configs, max_queue_len, "queue length limit")
    return Verified(len(visited))


# --------------------------------------------------------------------------
# Random simulation


@dataclass(frozen=True)
class SimulationResult:
    steps: tuple[ConfigStep, ...]
    final: RunningConfiguration
    quiescent_at: int | None


def simulate(
    services: list[DeployableService],
    client: Instance,
    steps: int,
    seed: int = 0,
) -> SimulationResult:
    """Follow ``steps`` pseudo-random rule applications from the start."""
    rng = random.Random(seed)
    config = make_initial_config(services, client)
    taken: list[ConfigStep] = []
    for n in range(steps):
        options = successors(config)
        if not options:
            return SimulationResult(tuple(taken), config, quiescent_at=n)
        step = options[rng.randrange(len(options))]
        taken.append(step)
        config = step.result
        if config.fault is not None:
            return SimulationResult(tuple(taken), config, quiescent_at=None)
    return SimulationResult(tuple(taken), config, quiescent_at=None)
