"""Deterministic execution of S-BPM models.

Every internal subject runs as its own instance: a state machine plus a
FIFO input pool. Instances share nothing; the only cross-instance effect
is appending an envelope to another instance's pool. A single scheduler
picks one runnable instance per step, cycling through instance names in
sorted order, so a run is fully determined by the model and the scenario.

Step semantics per state kind:

* function: record entry; at a decision point take the scripted label.
* send: append an envelope to the receiver's pool.
* receive: consume the first pooled envelope matching an alternative, or
  wait if there is none.

A run ends ``completed`` when every instance has ended, ``deadlock`` when
none can move, and ``step_limit`` when the step budget runs out.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

from ontoflow.errors import OntoflowError
from ontoflow.sbpm import EXTERNAL, FUNCTION, MULTI, RECEIVE, SEND, SbpmModel, model_violations

COMPLETED = "completed"
DEADLOCK = "deadlock"
STEP_LIMIT = "step_limit"
TERMINAL_STATUSES = (COMPLETED, DEADLOCK, STEP_LIMIT)

RUNNING = "running"
WAITING = "waiting"
ENDED = "ended"

DEFAULT_MAX_STEPS = 10_000


class EngineError(OntoflowError):
    pass


class ModelInvalid(EngineError):
    def __init__(self, violations: list):
        self.violations = list(violations)
        lines = "; ".join(f"{s or '<model>'}: {rule}" + (f" ({d})" if d else "") for s, rule, d in self.violations)
        super().__init__(f"model is not executable: {lines}")


class ScenarioInvalid(EngineError):
    pass


class ScenarioMissingChoice(EngineError):
    def __init__(self, point: str, visit: int = 1):
        self.point = point
        self.visit = visit
        super().__init__(f"no scripted choice for decision point {point} (visit {visit})")


@dataclass(frozen=True)
class DecisionPoint:
    subject: str
    state: str
    labels: tuple

    @property
    def id(self) -> str:
        return f"{self.subject}/{self.state}"


@dataclass(frozen=True)
class ProcessDefinition:
    model: SbpmModel
    decision_points: tuple = ()

    def decision_point(self, subject: str, state: str) -> Optional[DecisionPoint]:
        for p in self.decision_points:
            if (p.subject, p.state) == (subject, state):
                return p
        return None


def compile_model(model: SbpmModel) -> ProcessDefinition:
    """Validate ``model`` and list its decision points in (subject, state) order."""
    problems = model_violations(model)
    if problems:
        raise ModelInvalid(problems)
    points = []
    for s in model.subjects:
        if s.behavior is None:
            continue
        for st in s.behavior.states:
            outs = s.behavior.outgoing(st.id)
            if st.kind == FUNCTION and len(outs) > 1:
                points.append(DecisionPoint(s.name, st.id, tuple(t.label for t in outs)))
    return ProcessDefinition(model, tuple(sorted(points, key=lambda p: (p.subject, p.state))))


# ``compile`` reads naturally at call sites but shadows the builtin inside this module only.
compile = compile_model  # noqa: A001


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class Scenario:
    """Scripted stand-in for human users.

    ``choices`` maps a decision point (``subject/state``, or a bare state id
    when that is unambiguous) to a label, or to a list of labels consumed one
    per visit. ``payloads`` maps a send state the same way to an opaque value.
    ``external_messages`` lists envelopes that external subjects hand in
    before the first step, as ``{"from", "message", "payload"}`` objects.
    """

    choices: dict = field(default_factory=dict)
    payloads: dict = field(default_factory=dict)
    max_steps: int = DEFAULT_MAX_STEPS
    multi_counts: dict = field(default_factory=dict)
    external_messages: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "choices", {k: (tuple(v) if isinstance(v, list) else v)
                                             for k, v in self.choices.items()})
        object.__setattr__(self, "external_messages", tuple(dict(e) for e in self.external_messages))

    @classmethod
    def from_json(cls, data) -> "Scenario":
        try:
            doc = json.loads(data)
        except (ValueError, UnicodeDecodeError) as exc:
            raise ScenarioInvalid(f"scenario is not JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ScenarioInvalid("scenario must be a JSON object")
        unknown = set(doc) - {"choices", "payloads", "max_steps", "multi_counts", "external_messages"}
        if unknown:
            raise ScenarioInvalid(f"unknown scenario keys: {', '.join(sorted(unknown))}")
        choices = doc.get("choices", {})
        if not isinstance(choices, dict) or not all(
                isinstance(v, str) or (isinstance(v, list) and all(isinstance(x, str) for x in v))
                for v in choices.values()):
            raise ScenarioInvalid("choices must map decision points to a label or a list of labels")
        max_steps = doc.get("max_steps", DEFAULT_MAX_STEPS)
        if not isinstance(max_steps, int) or isinstance(max_steps, bool) or max_steps < 1:
            raise ScenarioInvalid("max_steps must be a positive integer")
        multi = doc.get("multi_counts", {})
        if not isinstance(multi, dict) or not all(isinstance(v, int) and v >= 1 for v in multi.values()):
            raise ScenarioInvalid("multi_counts must map subjects to positive integers")
        payloads = doc.get("payloads", {})
        if not isinstance(payloads, dict):
            raise ScenarioInvalid("payloads must be an object")
        ext = doc.get("external_messages", [])
        if not isinstance(ext, list) or not all(isinstance(e, dict) and {"from", "message"} <= set(e) for e in ext):
            raise ScenarioInvalid("external_messages must be a list of {from, message[, to, payload]} objects")
        return cls({k: (tuple(v) if isinstance(v, list) else v) for k, v in choices.items()},
                   dict(payloads), max_steps, dict(multi), tuple(dict(e) for e in ext))

    def to_json(self) -> str:
        return json.dumps({
            "choices": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.choices.items()},
            "payloads": self.payloads, "max_steps": self.max_steps, "multi_counts": self.multi_counts,
            "external_messages": list(self.external_messages)}, sort_keys=True)


def _lookup(table: dict, subject: str, state: str, default=None):
    if f"{subject}/{state}" in table:
        return table[f"{subject}/{state}"]
    return table.get(state, default)


def validate_scenario(definition: ProcessDefinition, scenario: Scenario) -> None:
    """Reject scenarios that name decision points, states or subjects the model does not have."""
    model = definition.model
    points = {p.id: p for p in definition.decision_points}
    bare: dict = {}
    for p in definition.decision_points:
        bare.setdefault(p.state, []).append(p)
    for key, choice in scenario.choices.items():
        targets = [points[key]] if key in points else bare.get(key, [])
        if not targets:
            raise ScenarioInvalid(f"choice for unknown decision point {key!r}")
        for p in targets:
            for label in (choice if isinstance(choice, tuple) else (choice,)):
                if label not in p.labels:
                    raise ScenarioInvalid(f"{p.id} has no outgoing label {label!r} (have {', '.join(p.labels)})")
    sends = {(s.name, st.id) for s in model.subjects if s.behavior for st in s.behavior.states if st.kind == SEND}
    for key in scenario.payloads:
        subject, _, state = key.rpartition("/")
        if not any((state == st and (not subject or subject == s)) for s, st in sends):
            raise ScenarioInvalid(f"payload for unknown send state {key!r}")
    subjects = model.subject_map
    for name in scenario.multi_counts:
        if name not in subjects or subjects[name].kind != MULTI:
            raise ScenarioInvalid(f"multi_counts names {name!r}, which is not a multi subject")
    for e in scenario.external_messages:
        sender = subjects.get(e["from"])
        if sender is None or sender.kind != EXTERNAL:
            raise ScenarioInvalid(f"external message from {e['from']!r}, which is not an external subject")
        if not [m for m in model.messages if m.sender == e["from"] and m.name == e["message"]
                and ("to" not in e or m.receiver == e["to"])]:
            raise ScenarioInvalid(f"{e['from']} declares no message {e['message']!r}")


# ---------------------------------------------------------------------------
# traces


@dataclass(frozen=True)
class Trace:
    events: tuple
    terminal: str
    footer: dict = field(default_factory=dict)

    def to_jsonl(self) -> bytes:
        lines = [json.dumps(e, sort_keys=True, separators=(",", ":")) for e in self.events]
        lines.append(json.dumps({"type": "footer", "terminal": self.terminal, **self.footer},
                                sort_keys=True, separators=(",", ":")))
        return ("\n".join(lines) + "\n").encode("utf-8")

    @classmethod
    def from_jsonl(cls, data: bytes) -> "Trace":
        records = [json.loads(line) for line in data.decode("utf-8").splitlines() if line.strip()]
        if not records or records[-1].get("type") != "footer":
            raise EngineError("trace has no footer record")
        footer = dict(records[-1])
        footer.pop("type")
        terminal = footer.pop("terminal")
        return cls(tuple(records[:-1]), terminal, footer)

    def of_type(self, kind: str) -> list:
        return [e for e in self.events if e["type"] == kind]


@dataclass
class _Envelope:
    seq: int
    sender: str
    to: str
    message: str
    payload: Any


@dataclass
class _Instance:
    name: str
    subject: str
    state: str
    pool: list = field(default_factory=list)
    status: str = RUNNING


class _Run:
    def __init__(self, definition: ProcessDefinition, scenario: Scenario):
        self.model = definition.model
        self.definition = definition
        self.scenario = scenario
        self.subjects = self.model.subject_map
        self.instances: dict = {}
        self.by_subject: dict = {}
        for s in sorted(self.model.subjects, key=lambda s: s.name):
            if s.kind == EXTERNAL:
                continue
            n = scenario.multi_counts.get(s.name, 1) if s.kind == MULTI else 1
            names = [s.name] if n == 1 else [f"{s.name}#{k}" for k in range(1, n + 1)]
            for name in names:
                self.instances[name] = _Instance(name, s.name, s.behavior.start_state)
            self.by_subject[s.name] = names
        self.sinks: dict = {s.name: [] for s in self.model.subjects if s.kind == EXTERNAL}
        self.delivered: dict = {}
        self.visits: dict = {}
        self.events: list = []
        self.seq = 0
        self.step = 0

    # -- plumbing
    def emit(self, event_type: str, **data) -> None:
        self.events.append({"type": event_type, "step": self.step, **data})

    def deliver(self, env: _Envelope) -> str:
        if env.to in self.sinks:
            self.sinks[env.to].append(env)
            return env.to
        # multi-instance receivers take envelopes in turn
        names = self.by_subject[env.to]
        k = self.delivered.get(env.to, 0)
        self.delivered[env.to] = k + 1
        target = names[k % len(names)]
        self.instances[target].pool.append(env)
        return target

    def match(self, inst: _Instance) -> Optional[tuple]:
        st = self.state(inst)
        for i, env in enumerate(inst.pool):
            if (env.message, env.sender) in st.alternatives:
                return i, env
        return None

    def state(self, inst: _Instance):
        return self.subjects[inst.subject].behavior.state_map[inst.state]

    def runnable(self, inst: _Instance) -> bool:
        if inst.status == ENDED:
            return False
        if self.state(inst).kind == RECEIVE and self.match(inst) is None:
            inst.status = WAITING
            return False
        inst.status = RUNNING
        return True

    def advance(self, inst: _Instance, label: Optional[str]) -> Optional[str]:
        st = self.state(inst)
        if st.end:
            inst.status = ENDED
            self.emit("SubjectEnded", subject=inst.name, state=st.id)
            return None
        for t in self.subjects[inst.subject].behavior.outgoing(st.id):
            if label is None or t.label == label:
                inst.state = t.target
                return t.target
        raise EngineError(f"{inst.name}: no transition {label!r} from {st.id}")  # unreachable for valid models

    # -- one step of one instance
    def execute(self, inst: _Instance) -> None:
        st = self.state(inst)
        behavior = self.subjects[inst.subject].behavior
        outs = behavior.outgoing(st.id)
        if st.kind == FUNCTION:
            point = self.definition.decision_point(inst.subject, st.id)
            if point is None:
                label = outs[0].label if outs else None
                self.emit("StateEntered", subject=inst.name, state=st.id, kind=FUNCTION, task=st.task,
                          label=label, to=outs[0].target if outs else None)
                self.advance(inst, label)
                return
            self.emit("StateEntered", subject=inst.name, state=st.id, kind=FUNCTION, task=st.task,
                      label=None, to=None)
            visit = self.visits.get((inst.name, st.id), 0) + 1
            self.visits[(inst.name, st.id)] = visit
            choice = _lookup(self.scenario.choices, inst.subject, st.id)
            if isinstance(choice, tuple):
                choice = choice[visit - 1] if visit <= len(choice) else None
            if choice is None:
                raise ScenarioMissingChoice(point.id, visit)
            target = self.advance(inst, choice)
            self.emit("DecisionTaken", subject=inst.name, state=st.id, decision=point.id, visit=visit,
                      label=choice, to=target)
        elif st.kind == SEND:
            self.seq += 1
            payload = _lookup(self.scenario.payloads, inst.subject, st.id)
            env = _Envelope(self.seq, inst.subject, st.to, st.message, payload)
            target = self.deliver(env)
            label = outs[0].label if outs else None
            self.emit("MessageSent", subject=inst.name, state=st.id, seq=env.seq, sender=env.sender,
                      receiver=env.to, instance=target, message=env.message, payload=payload,
                      label=label, to=outs[0].target if outs else None)
            self.advance(inst, label)
        else:
            i, env = self.match(inst)
            del inst.pool[i]
            target = next((t.target for t in outs if t.label == env.message), None)
            self.emit("MessageReceived", subject=inst.name, state=st.id, seq=env.seq, sender=env.sender,
                      message=env.message, payload=env.payload, label=env.message, to=target)
            self.advance(inst, env.message if outs else None)

    def run(self) -> Trace:
        for e in self.scenario.external_messages:
            spec = next(m for m in self.model.messages if m.sender == e["from"] and m.name == e["message"]
                        and ("to" not in e or m.receiver == e["to"]))
            self.seq += 1
            env = _Envelope(self.seq, spec.sender, spec.receiver, spec.name, e.get("payload"))
            target = self.deliver(env)
            self.emit("MessageSent", subject=spec.sender, state=None, seq=env.seq, sender=spec.sender,
                      receiver=spec.receiver, instance=target, message=spec.name, payload=env.payload,
                      label=None, to=None)
        order = sorted(self.instances)
        cursor = 0
        terminal = None
        while terminal is None:
            if all(i.status == ENDED for i in self.instances.values()):
                terminal = COMPLETED
                break
            pick = None
            for k in range(len(order)):
                name = order[(cursor + k) % len(order)]
                if self.runnable(self.instances[name]):
                    pick = name
                    cursor = (cursor + k + 1) % len(order)
                    break
            if pick is None:
                terminal = DEADLOCK
                break
            if self.step >= self.scenario.max_steps:
                terminal = STEP_LIMIT
                break
            self.step += 1
            self.execute(self.instances[pick])
        for inst in self.instances.values():
            self.runnable(inst)  # refresh waiting flags for the footer
        footer = {
            "steps": self.step,
            "events": len(self.events),
            "messages_sent": sum(1 for e in self.events if e["type"] == "MessageSent"),
            "unconsumed": {n: len(i.pool) for n, i in sorted(self.instances.items())},
            "unconsumed_total": sum(len(i.pool) for i in self.instances.values()),
            "sunk": {n: len(p) for n, p in sorted(self.sinks.items())},
            "waiting": sorted(n for n, i in self.instances.items() if i.status == WAITING),
            "final_states": {n: i.state for n, i in sorted(self.instances.items())},
            "status": {n: i.status for n, i in sorted(self.instances.items())},
        }
        return Trace(tuple(self.events), terminal, footer)


def run(definition: ProcessDefinition, scenario: Scenario) -> Trace:
    validate_scenario(definition, scenario)
    return _Run(definition, scenario).run()


def replay_check(definition: ProcessDefinition, scenario: Scenario, trace: Trace) -> bool:
    """True iff re-running the scenario yields an identical trace."""
    try:
        fresh = run(definition, scenario)
    except EngineError:
        return False
    return fresh.to_jsonl() == trace.to_jsonl()
