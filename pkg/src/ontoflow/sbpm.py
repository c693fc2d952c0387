"""Subject-oriented process models: types, invariants, translation from BPMN, OWL form.

Translation rules (BPMN element -> S-BPM construct):

=====================================  ==========================================
participant with processRef            internal subject
participant without processRef         external subject
messageFlow                            message (flow name, else message name, else msg_<k>)
task, userTask                         function state
sendTask, message throw/end event      send state
receiveTask, message catch/start event receive state with one alternative per incoming flow
eventBasedGateway                      one receive state; each branch's catch event is an alternative
exclusiveGateway (split)               labelled transitions of the preceding function state
exclusiveGateway (merge/pass-through)  elided
endEvent                               empty terminal function state
=====================================  ==========================================

A split that follows a send or receive state has no function state to
hang its labels on; it becomes a function state of its own (named after
the gateway) whose outcome is the branch label.
"""
from __future__ import annotations

import re
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Optional

from ontoflow.bpmn import MODEL_NS, BpmnDocument, BpmnElement, describe_path
from ontoflow.errors import OntoflowError
from ontoflow.ontology import (
    Cardinality,
    DataAssertion,
    Iri,
    NamedIndividual,
    ObjectAssertion,
    OntoClass,
    Ontology,
    OntologyBuilder,
    PropertyDecl,
    Restriction,
    parse,
)

INTERNAL = "internal"
EXTERNAL = "external"
MULTI = "multi"
SUBJECT_KINDS = (INTERNAL, EXTERNAL, MULTI)

FUNCTION = "function"
SEND = "send"
RECEIVE = "receive"
STATE_KINDS = (FUNCTION, SEND, RECEIVE)


class SbpmError(OntoflowError):
    pass


class UnsupportedElement(SbpmError):
    def __init__(self, tag: str, path: str, reason: str = "outside the translatable subset"):
        self.tag = tag
        self.path = path
        self.reason = reason
        super().__init__(f"unsupported element {tag} at {path}: {reason}")


class DanglingMessageFlow(SbpmError):
    def __init__(self, flow_id: str, reason: str):
        self.flow_id = flow_id
        super().__init__(f"message flow {flow_id}: {reason}")


class NoProcessForInternalParticipant(SbpmError):
    def __init__(self, participant: str, process_ref: str):
        self.participant = participant
        super().__init__(f"participant {participant} references missing process {process_ref!r}")


class BehaviorInvariantViolation(SbpmError):
    def __init__(self, subject: str, rule: str, detail: str = ""):
        self.subject = subject
        self.rule = rule
        super().__init__(f"subject {subject}: {rule}" + (f" ({detail})" if detail else ""))


class UnknownSbpmClass(SbpmError):
    def __init__(self, iri: str, where: str = ""):
        self.iri = iri
        super().__init__(f"{iri} is not an S-BPM class" + (f" (used by {where})" if where else ""))


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class MessageSpec:
    name: str
    sender: str
    receiver: str
    payload_schema: Optional[str] = None

    @property
    def key(self) -> tuple:
        return (self.name, self.sender, self.receiver)


@dataclass(frozen=True)
class State:
    id: str
    kind: str
    task: Optional[str] = None  # function states
    message: Optional[str] = None  # send states
    to: Optional[str] = None  # send states
    alternatives: tuple = ()  # receive states: ((message, from_subject), ...)
    start: bool = False
    end: bool = False

    def __post_init__(self):
        if self.kind not in STATE_KINDS:
            raise ValueError(f"unknown state kind {self.kind!r}")
        object.__setattr__(self, "alternatives", tuple(tuple(a) for a in self.alternatives))


@dataclass(frozen=True)
class Transition:
    source: str
    label: str
    target: str


@dataclass(frozen=True)
class Behavior:
    states: tuple
    transitions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        # transitions are kept grouped by source state, in state order
        order = {s.id: i for i, s in enumerate(self.states)}
        object.__setattr__(self, "transitions",
                           tuple(sorted(self.transitions, key=lambda t: order.get(t.source, len(order)))))

    @property
    def state_map(self) -> dict:
        return {s.id: s for s in self.states}

    @property
    def start_state(self) -> Optional[str]:
        starts = [s.id for s in self.states if s.start]
        return starts[0] if len(starts) == 1 else None

    @property
    def end_states(self) -> tuple:
        return tuple(s.id for s in self.states if s.end)

    def outgoing(self, state_id: str) -> list:
        return [t for t in self.transitions if t.source == state_id]


@dataclass(frozen=True)
class Subject:
    name: str
    kind: str = INTERNAL
    behavior: Optional[Behavior] = None

    def __post_init__(self):
        if self.kind not in SUBJECT_KINDS:
            raise ValueError(f"unknown subject kind {self.kind!r}")


@dataclass(frozen=True)
class SbpmModel:
    name: str
    subjects: tuple = ()
    messages: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "subjects", tuple(self.subjects))
        object.__setattr__(self, "messages", tuple(self.messages))

    @property
    def subject_map(self) -> dict:
        return {s.name: s for s in self.subjects}

    def internal_subjects(self) -> list:
        return [s for s in self.subjects if s.kind != EXTERNAL]

    def find_message(self, name: str, sender: str, receiver: str) -> Optional[MessageSpec]:
        for m in self.messages:
            if m.key == (name, sender, receiver):
                return m
        return None


# ---------------------------------------------------------------------------
# invariants


def behavior_violations(subject: str, behavior: Behavior, model: SbpmModel) -> list:
    """All broken behavior rules as (rule, detail) pairs; empty when well-formed."""
    out = []
    states = behavior.state_map
    if len(states) != len(behavior.states):
        out.append(("unique state ids", "duplicate state id"))
    starts = [s.id for s in behavior.states if s.start]
    if len(starts) != 1:
        out.append(("exactly one start state", f"found {len(starts)}"))
    if not behavior.end_states:
        out.append(("at least one end state", "found none"))
    for t in behavior.transitions:
        for end in (t.source, t.target):
            if end not in states:
                out.append(("transitions reference existing states", f"{t.source} -{t.label}-> {t.target}"))
    for s in behavior.states:
        outs = behavior.outgoing(s.id)
        labels = [t.label for t in outs]
        if s.end and outs:
            out.append(("end states have no outgoing transitions", s.id))
        if not s.end and not outs:
            out.append(("non-end states have outgoing transitions", s.id))
        if len(set(labels)) != len(labels):
            out.append(("transition labels are distinct per state", s.id))
        if s.kind == SEND:
            if model.find_message(s.message or "", subject, s.to or "") is None:
                out.append(("send state names a declared message", f"{s.id}: {s.message} to {s.to}"))
            if not s.end and len(outs) != 1:
                out.append(("send state has one outgoing transition", s.id))
        elif s.kind == RECEIVE:
            if not s.alternatives:
                out.append(("receive state has alternatives", s.id))
            names = [m for m, _ in s.alternatives]
            if len(set(names)) != len(names):
                out.append(("receive alternatives have distinct message names", s.id))
            for m, sender in s.alternatives:
                if model.find_message(m, sender, subject) is None:
                    out.append(("receive alternative names a declared message", f"{s.id}: {m} from {sender}"))
            if not s.end and sorted(labels) != sorted(names):
                out.append(("receive transitions are labelled by alternative", s.id))
    if len(starts) == 1:
        seen = {starts[0]}
        queue = deque(starts)
        while queue:
            cur = queue.popleft()
            for t in behavior.outgoing(cur):
                if t.target not in seen and t.target in states:
                    seen.add(t.target)
                    queue.append(t.target)
        missing = [s.id for s in behavior.states if s.id not in seen]
        if missing:
            out.append(("every state reachable from start", ", ".join(missing)))
    return out


def model_violations(model: SbpmModel) -> list:
    """(subject, rule, detail) triples for every broken model invariant."""
    out = []
    names = [s.name for s in model.subjects]
    if len(set(names)) != len(names):
        out.append(("", "unique subject names", ", ".join(sorted(n for n in set(names) if names.count(n) > 1))))
    keys = [m.key for m in model.messages]
    if len(set(keys)) != len(keys):
        out.append(("", "unique messages", "duplicate (name, sender, receiver)"))
    subjects = model.subject_map
    for m in model.messages:
        for end in (m.sender, m.receiver):
            if end not in subjects:
                out.append((end, "message endpoints name subjects", f"message {m.name}"))
    for s in model.subjects:
        if s.kind == EXTERNAL and s.behavior is not None:
            out.append((s.name, "external subjects have no behavior", ""))
        if s.kind != EXTERNAL:
            if s.behavior is None:
                out.append((s.name, "internal subjects have a behavior", ""))
            else:
                out.extend((s.name, rule, detail) for rule, detail in behavior_violations(s.name, s.behavior, model))
    return out


def validate(model: SbpmModel) -> None:
    problems = model_violations(model)
    if problems:
        subject, rule, detail = problems[0]
        raise BehaviorInvariantViolation(subject, rule, detail)


# ---------------------------------------------------------------------------
# BPMN -> S-BPM

_FUNCTION_TAGS = {"task", "userTask"}
_IGNORED_TAGS = {
    "laneSet", "dataObject", "dataObjectReference", "dataStoreReference", "documentation",
    "extensionElements", "sequenceFlow", "textAnnotation", "association",
}
_NODE_TAGS = _FUNCTION_TAGS | {
    "startEvent", "endEvent", "sendTask", "receiveTask", "exclusiveGateway", "eventBasedGateway",
    "intermediateThrowEvent", "intermediateCatchEvent",
}
_EVENT_TAGS = {"startEvent", "endEvent", "intermediateThrowEvent", "intermediateCatchEvent"}


def _has_message_definition(el: BpmnElement) -> bool:
    return bool(el.find_children("messageEventDefinition"))


def _check_event_definitions(el: BpmnElement, where: str) -> None:
    for c in el.children:
        if c.namespace == MODEL_NS and c.local.endswith("EventDefinition") and c.local != "messageEventDefinition":
            raise UnsupportedElement(c.local, f"{where}/{c.local}", "only message events are translatable")
    if el.local.startswith("intermediate") and not _has_message_definition(el):
        raise UnsupportedElement(el.local, where, "intermediate events must carry a message definition")


@dataclass
class _Flow:
    id: str
    name: str
    source: str
    target: str


@dataclass
class _ProcessGraph:
    subject: str
    nodes: dict = field(default_factory=dict)  # id -> (element, path)
    succ: dict = field(default_factory=dict)  # id -> [_Flow]
    pred: dict = field(default_factory=dict)


class _Translator:
    def __init__(self, doc: BpmnDocument):
        self.doc = doc
        self.root = doc.root

    def where(self, path: tuple) -> str:
        return describe_path(self.root, path)

    def run(self) -> SbpmModel:
        defs = self.root
        tops = [(i, c) for i, c in enumerate(defs.children) if c.namespace == MODEL_NS]
        processes = {c.id: ((i,), c) for i, c in tops if c.local == "process"}
        messages = {c.id: c for _, c in tops if c.local == "message"}
        collabs = [((i,), c) for i, c in tops if c.local == "collaboration"]
        for i, c in tops:
            if c.local in ("choreography", "conversation"):
                raise UnsupportedElement(c.local, self.where((i,)))

        subjects: list = []  # (name, kind, process (path, el) | None)
        owner: dict = {}  # element id -> subject name
        flows: list = []
        if collabs:
            cpath, collab = collabs[0]
            taken: set = set()
            for j, p in enumerate(collab.children):
                if p.namespace != MODEL_NS or p.local != "participant":
                    continue
                name = p.get("name") or p.id or f"participant_{j + 1}"
                if name in taken:
                    name = p.id or f"{name}_{j + 1}"
                taken.add(name)
                ref = p.get("processRef")
                if ref is None:
                    subjects.append((name, EXTERNAL, None))
                else:
                    if ref not in processes:
                        raise NoProcessForInternalParticipant(p.id or name, ref)
                    subjects.append((name, INTERNAL, processes[ref]))
                if p.id:
                    owner[p.id] = name
            flows = [(cpath + (j,), f) for j, f in enumerate(collab.children)
                     if f.namespace == MODEL_NS and f.local == "messageFlow"]
        else:
            for pid, (path, proc) in processes.items():
                subjects.append((proc.get("name") or pid or "process", INTERNAL, (path, proc)))

        graphs: dict = {}
        for name, kind, proc in subjects:
            if proc is not None:
                graphs[name] = self.graph(name, *proc)
                for node_id in graphs[name].nodes:
                    owner[node_id] = name
        external = {name for name, kind, _ in subjects if kind == EXTERNAL}

        # messages, in flow order
        specs: list = []
        sends: dict = {}  # node id -> (message name, receiver)
        receives: dict = {}  # node id -> [(message name, sender)]
        keys: set = set()
        for k, (fpath, f) in enumerate(flows, 1):
            fid = f.id or f"messageFlow_{k}"
            src, dst = f.get("sourceRef"), f.get("targetRef")
            if src not in owner or dst not in owner:
                raise DanglingMessageFlow(fid, "endpoint is not a participant or a node of a translated process")
            sender, receiver = owner[src], owner[dst]
            if sender == receiver:
                raise DanglingMessageFlow(fid, "sender and receiver are the same subject")
            name = f.get("name")
            if not name:
                msg = messages.get(f.get("messageRef") or "")
                name = (msg.get("name") if msg is not None else None) or f"msg_{k}"
            base, n = name, 2
            while (name, sender, receiver) in keys:
                name = f"{base}_{n}"
                n += 1
            keys.add((name, sender, receiver))
            specs.append(MessageSpec(name, sender, receiver))
            if src in graphs.get(sender, _ProcessGraph("")).nodes:
                if not self.can_send(graphs[sender], src):
                    raise DanglingMessageFlow(fid, f"source {src} cannot send messages")
                if src in sends:
                    raise UnsupportedElement(graphs[sender].nodes[src][0].local, self.where(graphs[sender].nodes[src][1]),
                                             "more than one outgoing message flow")
                sends[src] = (name, receiver)
            elif sender not in external:
                raise DanglingMessageFlow(fid, f"source {src} is a pool with a process, not a node")
            if dst in graphs.get(receiver, _ProcessGraph("")).nodes:
                if not self.can_receive(graphs[receiver], dst):
                    raise DanglingMessageFlow(fid, f"target {dst} cannot receive messages")
                receives.setdefault(dst, []).append((name, sender))
            elif receiver not in external:
                raise DanglingMessageFlow(fid, f"target {dst} is a pool with a process, not a node")

        model_subjects = []
        for name, kind, proc in subjects:
            behavior = None if proc is None else self.behavior(graphs[name], sends, receives)
            model_subjects.append(Subject(name, kind, behavior))
        model_name = (collabs[0][1].get("name") if collabs else None) or defs.get("name") or defs.id or "model"
        return SbpmModel(model_name, tuple(model_subjects), tuple(specs))

    def graph(self, subject: str, path: tuple, proc: BpmnElement) -> _ProcessGraph:
        g = _ProcessGraph(subject)
        for i, c in enumerate(proc.children):
            if c.namespace != MODEL_NS or c.local in _IGNORED_TAGS:
                continue
            cpath = path + (i,)
            if c.local not in _NODE_TAGS:
                raise UnsupportedElement(c.local, self.where(cpath))
            if c.local in _EVENT_TAGS:
                _check_event_definitions(c, self.where(cpath))
            if c.id is None:
                raise UnsupportedElement(c.local, self.where(cpath), "flow node without id")
            g.nodes[c.id] = (c, cpath)
            g.succ[c.id] = []
            g.pred[c.id] = []
        for i, c in enumerate(proc.children):
            if c.namespace == MODEL_NS and c.local == "sequenceFlow":
                src, dst = c.get("sourceRef"), c.get("targetRef")
                if src not in g.nodes or dst not in g.nodes:
                    raise UnsupportedElement("sequenceFlow", self.where(path + (i,)), "endpoint is not a flow node")
                f = _Flow(c.id or f"flow_{i}", c.get("name") or "", src, dst)
                g.succ[src].append(f)
                g.pred[dst].append(f)
        return g

    @staticmethod
    def can_send(g: _ProcessGraph, node_id: str) -> bool:
        el = g.nodes[node_id][0]
        return el.local == "sendTask" or (
            el.local in ("intermediateThrowEvent", "endEvent") and _has_message_definition(el))

    @staticmethod
    def can_receive(g: _ProcessGraph, node_id: str) -> bool:
        el = g.nodes[node_id][0]
        return el.local == "receiveTask" or (
            el.local in ("intermediateCatchEvent", "startEvent") and _has_message_definition(el))

    def behavior(self, g: _ProcessGraph, sends: dict, receives: dict) -> Behavior:
        def tag(nid):
            return g.nodes[nid][0].local

        def fail(nid, reason):
            el, p = g.nodes[nid]
            raise UnsupportedElement(el.local, self.where(p), reason)

        starts = [n for n in g.nodes if tag(n) == "startEvent"]
        if len(starts) != 1:
            if not starts:
                raise UnsupportedElement("process", self.where(()), f"subject {g.subject} has no start event")
            fail(starts[1], "more than one start event")
        start = starts[0]
        taken_ids = set(g.nodes)

        def fresh(base: str) -> str:
            cand, n = base, 2
            while cand in taken_ids:
                cand = f"{base}_{n}"
                n += 1
            taken_ids.add(cand)
            return cand

        def expand(flow: _Flow, split_ok: bool, seen: frozenset = frozenset()) -> list:
            """(label, node id) pairs reached through ``flow``, looking through exclusive gateways."""
            t = flow.target
            if tag(t) != "exclusiveGateway":
                return [(flow.name, t)]
            if t in seen:
                fail(t, "cycle made only of gateways")
            outs = g.succ[t]
            if not outs:
                fail(t, "gateway without outgoing flow")
            if len(outs) == 1:
                ((label, node),) = expand(outs[0], split_ok, seen | {t}) or [("", None)]
                return [(flow.name or label, node)]
            if not split_ok:
                return [(flow.name, t)]  # becomes a decision state of its own
            out = []
            for o in outs:
                for label, node in expand(o, True, seen | {t}):
                    out.append((o.name or label, node))
            return out

        states: dict = {}
        transitions: list = []
        order: list = []
        queue: deque = deque()

        def want(nid: str) -> str:
            if nid not in states:
                states[nid] = None
                order.append(nid)
                queue.append(nid)
            return nid

        def end_after(nid: str) -> str:
            eid = fresh(f"{nid}_end")
            states[eid] = State(eid, FUNCTION, task="", end=True)
            order.append(eid)
            return eid

        def single_successor(nid: str) -> str:
            outs = g.succ[nid]
            if not outs:
                return end_after(nid)
            if len(outs) > 1:
                fail(nid, "several outgoing sequence flows (implicit parallel split)")
            ((_, target),) = expand(outs[0], split_ok=False)
            return want(target)

        # the start event itself: a message start event is a receive state
        start_el = g.nodes[start][0]
        if _has_message_definition(start_el):
            first = want(start)
        else:
            outs = g.succ[start]
            if len(outs) != 1:
                fail(start, "start event needs exactly one outgoing sequence flow")
            ((_, first),) = expand(outs[0], split_ok=False)
            want(first)

        while queue:
            nid = queue.popleft()
            el = g.nodes[nid][0]
            kind = el.local
            name = el.get("name") or ""
            if kind == "endEvent":
                if _has_message_definition(el):
                    if nid not in sends:
                        fail(nid, "message end event without outgoing message flow")
                    msg, to = sends[nid]
                    states[nid] = State(nid, SEND, message=msg, to=to)
                    transitions.append(Transition(nid, msg, end_after(nid)))
                else:
                    states[nid] = State(nid, FUNCTION, task=name, end=True)
            elif kind in _FUNCTION_TAGS or kind == "exclusiveGateway":
                states[nid] = State(nid, FUNCTION, task=name or (nid if kind == "exclusiveGateway" else ""))
                outs = g.succ[nid]
                if not outs:
                    transitions.append(Transition(nid, "", end_after(nid)))
                    continue
                if len(outs) > 1 and kind != "exclusiveGateway":
                    fail(nid, "several outgoing sequence flows (implicit parallel split)")
                branches = [b for o in outs for b in expand(o, split_ok=True)]
                if kind == "exclusiveGateway":
                    branches = [(o.name or lab, node) for o in outs for lab, node in expand(o, True)]
                labels = _distinct_labels([lab or (node if len(branches) > 1 else "") for lab, node in branches])
                for label, (_, node) in zip(labels, branches):
                    transitions.append(Transition(nid, label, want(node)))
            elif kind in ("sendTask", "intermediateThrowEvent"):
                if nid not in sends:
                    fail(nid, "send node without outgoing message flow")
                msg, to = sends[nid]
                states[nid] = State(nid, SEND, message=msg, to=to)
                transitions.append(Transition(nid, msg, single_successor(nid)))
            elif kind in ("receiveTask", "intermediateCatchEvent", "startEvent"):
                alts = receives.get(nid)
                if not alts:
                    fail(nid, "receive node without incoming message flow")
                states[nid] = State(nid, RECEIVE, alternatives=tuple(alts))
                succ = single_successor(nid)
                for msg, _ in alts:
                    transitions.append(Transition(nid, msg, succ))
            elif kind == "eventBasedGateway":
                alts = []
                for o in g.succ[nid]:
                    branch = o.target
                    if tag(branch) not in ("intermediateCatchEvent", "receiveTask"):
                        fail(branch, "event-based gateway branches must start with a message catch")
                    if len(g.pred[branch]) != 1:
                        fail(branch, "catch event after an event-based gateway has other incoming flows")
                    succ = single_successor(branch)
                    for msg, sender in receives.get(branch, ()):
                        alts.append((msg, sender))
                        transitions.append(Transition(nid, msg, succ))
                    if not receives.get(branch):
                        fail(branch, "receive node without incoming message flow")
                states[nid] = State(nid, RECEIVE, alternatives=tuple(alts))
            else:  # pragma: no cover - filtered by graph()
                fail(nid, "not translatable")

        first_state = states[first]
        states[first] = State(first_state.id, first_state.kind, first_state.task, first_state.message,
                              first_state.to, first_state.alternatives, True, first_state.end)
        return Behavior(tuple(states[n] for n in order), tuple(transitions))


def _distinct_labels(labels: list) -> list:
    out, seen = [], set()
    for lab in labels:
        cand, n = lab, 2
        while cand in seen:
            cand = f"{lab}#{n}"
            n += 1
        seen.add(cand)
        out.append(cand)
    return out


def transform_document(doc: BpmnDocument) -> SbpmModel:
    model = _Translator(doc).run()
    validate(model)
    return model


def transform(model) -> SbpmModel:
    """Translate a model ontology (or an already parsed document) into an S-BPM model."""
    if isinstance(model, BpmnDocument):
        return transform_document(model)
    from ontoflow.transform import owl_to_bpmn

    return transform_document(owl_to_bpmn(model))


# ---------------------------------------------------------------------------
# OWL form

S = "sbpm"
SBPM_NS = "urn:ontoflow:sbpm#"
I = "sbpmi"
SBPM_INSTANCE_NS = "urn:ontoflow:sbpm-instance#"

SBPM_CLASSES = (
    ("ProcessModel", ()),
    ("Subject", ()),
    ("ExternalSubject", ("Subject",)),
    ("MultiSubject", ("Subject",)),
    ("Message", ()),
    ("Behavior", ()),
    ("State", ()),
    ("FunctionState", ("State",)),
    ("SendState", ("State",)),
    ("ReceiveState", ("State",)),
    ("Transition", ()),
)
SBPM_OBJECT_PROPERTIES = (
    ("hasSubject", "Subject"),
    ("hasMessage", "Message"),
    ("hasBehavior", "Behavior"),
    ("hasState", "State"),
    ("hasTransition", "Transition"),
    ("target", "State"),
    ("sender", "Subject"),
    ("receiver", "Subject"),
)
SBPM_DATA_PROPERTIES = (
    ("name", "string"),
    ("stateId", "string"),
    ("taskName", "string"),
    ("label", "string"),
    ("messageName", "string"),
    ("toSubject", "string"),
    ("acceptsMessage", "string"),
    ("acceptsFrom", "string"),
    ("isStart", "boolean"),
    ("isEnd", "boolean"),
    ("payloadSchema", "string"),
)
# (class, property, cardinality kind, n, onClass or datatype)
SBPM_RESTRICTIONS = (
    ("ProcessModel", "name", "exact", 1, "string"),
    ("ProcessModel", "hasSubject", "min", 0, "Subject"),
    ("ProcessModel", "hasMessage", "min", 0, "Message"),
    ("Subject", "name", "exact", 1, "string"),
    ("Subject", "hasBehavior", "max", 1, "Behavior"),
    ("Message", "name", "exact", 1, "string"),
    ("Message", "sender", "exact", 1, "Subject"),
    ("Message", "receiver", "exact", 1, "Subject"),
    ("Message", "payloadSchema", "max", 1, "string"),
    ("Behavior", "hasState", "min", 1, "State"),
    ("State", "stateId", "exact", 1, "string"),
    ("State", "isStart", "exact", 1, "boolean"),
    ("State", "isEnd", "exact", 1, "boolean"),
    ("State", "hasTransition", "min", 0, "Transition"),
    ("FunctionState", "taskName", "exact", 1, "string"),
    ("SendState", "messageName", "exact", 1, "string"),
    ("SendState", "toSubject", "exact", 1, "string"),
    ("ReceiveState", "acceptsMessage", "min", 1, "string"),
    ("ReceiveState", "acceptsFrom", "min", 1, "string"),
    ("Transition", "label", "exact", 1, "string"),
    ("Transition", "target", "exact", 1, "State"),
)


def _s(local: str) -> Iri:
    return Iri(S, local)


def sbpm_builder(header: str = "model") -> OntologyBuilder:
    """Builder pre-loaded with the S-BPM vocabulary (classes, properties, restrictions)."""
    b = OntologyBuilder(Iri(I, header), annotations=[("vocabulary", "S-BPM subset 1")],
                        namespaces=[(S, SBPM_NS), (I, SBPM_INSTANCE_NS)])
    for name, supers in SBPM_CLASSES:
        b.add_class(OntoClass(_s(name), tuple(_s(x) for x in supers)))
    for name, rng in SBPM_OBJECT_PROPERTIES:
        b.add_property(PropertyDecl(_s(name), "object", _s(rng)))
    for name, rng in SBPM_DATA_PROPERTIES:
        b.add_property(PropertyDecl(_s(name), "data", rng))
    for cls, prop, kind, n, target in SBPM_RESTRICTIONS:
        card = {"exact": Cardinality.exact, "min": Cardinality.min, "max": Cardinality.max}[kind](n)
        if target[0].isupper():
            b.add_restriction(Restriction(_s(cls), _s(prop), card, on_class=_s(target)))
        else:
            b.add_restriction(Restriction(_s(cls), _s(prop), card, on_data_range=target))
    return b


def _d(prop: str, value, datatype: str = "string") -> DataAssertion:
    if isinstance(value, bool):
        return DataAssertion(_s(prop), "true" if value else "false", "boolean")
    return DataAssertion(_s(prop), value, datatype)


def emit_sbpm_owl(model: SbpmModel) -> Ontology:
    validate(model)
    b = sbpm_builder()
    model_iri = Iri(I, "model")
    subject_iri = {s.name: Iri(I, f"subject_{i}") for i, s in enumerate(model.subjects, 1)}
    top_objs = [ObjectAssertion(_s("hasSubject"), subject_iri[s.name]) for s in model.subjects]
    top_objs += [ObjectAssertion(_s("hasMessage"), Iri(I, f"message_{i}")) for i in range(1, len(model.messages) + 1)]
    b.add_individual(NamedIndividual(model_iri, (_s("ProcessModel"),), (_d("name", model.name),), tuple(top_objs)))

    for i, s in enumerate(model.subjects, 1):
        cls = {INTERNAL: "Subject", EXTERNAL: "ExternalSubject", MULTI: "MultiSubject"}[s.kind]
        objs = []
        if s.behavior is not None:
            bh = s.behavior
            beh_iri = Iri(I, f"behavior_{i}")
            objs.append(ObjectAssertion(_s("hasBehavior"), beh_iri))
            state_iri = {st.id: Iri(I, f"state_{i}_{j}") for j, st in enumerate(bh.states, 1)}
            b.add_individual(NamedIndividual(
                beh_iri, (_s("Behavior"),), (),
                tuple(ObjectAssertion(_s("hasState"), state_iri[st.id]) for st in bh.states)))
            t_index = 0
            for st in bh.states:
                data = [_d("stateId", st.id), _d("isStart", st.start), _d("isEnd", st.end)]
                if st.kind == FUNCTION:
                    cls_s = "FunctionState"
                    data.append(_d("taskName", st.task or ""))
                elif st.kind == SEND:
                    cls_s = "SendState"
                    data += [_d("messageName", st.message), _d("toSubject", st.to)]
                else:
                    cls_s = "ReceiveState"
                    for m, frm in st.alternatives:
                        data += [_d("acceptsMessage", m), _d("acceptsFrom", frm)]
                t_objs = []
                for t in bh.outgoing(st.id):
                    t_index += 1
                    t_iri = Iri(I, f"transition_{i}_{t_index}")
                    t_objs.append(ObjectAssertion(_s("hasTransition"), t_iri))
                    b.add_individual(NamedIndividual(
                        t_iri, (_s("Transition"),), (_d("label", t.label),),
                        (ObjectAssertion(_s("target"), state_iri[t.target]),)))
                b.add_individual(NamedIndividual(state_iri[st.id], (_s(cls_s),), tuple(data), tuple(t_objs)))
        b.add_individual(NamedIndividual(subject_iri[s.name], (_s(cls),), (_d("name", s.name),), tuple(objs)))

    for i, m in enumerate(model.messages, 1):
        data = [_d("name", m.name)]
        if m.payload_schema is not None:
            data.append(_d("payloadSchema", m.payload_schema))
        b.add_individual(NamedIndividual(
            Iri(I, f"message_{i}"), (_s("Message"),), tuple(data),
            (ObjectAssertion(_s("sender"), subject_iri[m.sender]),
             ObjectAssertion(_s("receiver"), subject_iri[m.receiver]))))
    return b.build()


def _one(values: list, what: str, where: str) -> str:
    if len(values) != 1:
        raise BehaviorInvariantViolation(where, f"exactly one {what}", f"found {len(values)}")
    return values[0]


def model_from_ontology(ont: Ontology) -> SbpmModel:
    known = {_s(name) for name, _ in SBPM_CLASSES}
    for c in ont.classes:
        if c.iri not in known:
            raise UnknownSbpmClass(str(c.iri))
    inds = ont.individual_map

    def data(ind: NamedIndividual, prop: str) -> list:
        return [a.value for a in ind.data_assertions if a.property == _s(prop)]

    def objs(ind: NamedIndividual, prop: str) -> list:
        return [inds[a.target] for a in ind.object_assertions if a.property == _s(prop)]

    def flag(ind: NamedIndividual, prop: str, where: str) -> bool:
        return _one(data(ind, prop), prop, where) == "true"

    roots = [i for i in ont.individuals if _s("ProcessModel") in i.types]
    if len(roots) != 1:
        raise BehaviorInvariantViolation("", "exactly one ProcessModel individual", f"found {len(roots)}")
    root = roots[0]
    names_by_iri = {}
    subjects = []
    for s_ind in objs(root, "hasSubject"):
        name = _one(data(s_ind, "name"), "subject name", str(s_ind.iri))
        names_by_iri[s_ind.iri] = name
        if _s("ExternalSubject") in s_ind.types:
            kind = EXTERNAL
        elif _s("MultiSubject") in s_ind.types:
            kind = MULTI
        elif _s("Subject") in s_ind.types:
            kind = INTERNAL
        else:
            raise UnknownSbpmClass(str(s_ind.types[0]), str(s_ind.iri))
        behavior = None
        behaviors = objs(s_ind, "hasBehavior")
        if len(behaviors) > 1:
            raise BehaviorInvariantViolation(name, "at most one behavior per subject")
        if behaviors:
            states, transitions = [], []
            state_ids = {}
            st_inds = objs(behaviors[0], "hasState")
            for st in st_inds:
                state_ids[st.iri] = _one(data(st, "stateId"), "stateId", name)
            for st in st_inds:
                sid = state_ids[st.iri]
                start, end = flag(st, "isStart", name), flag(st, "isEnd", name)
                if _s("FunctionState") in st.types:
                    states.append(State(sid, FUNCTION, task=_one(data(st, "taskName"), "taskName", name),
                                        start=start, end=end))
                elif _s("SendState") in st.types:
                    states.append(State(sid, SEND, message=_one(data(st, "messageName"), "messageName", name),
                                        to=_one(data(st, "toSubject"), "toSubject", name), start=start, end=end))
                elif _s("ReceiveState") in st.types:
                    msgs, froms = data(st, "acceptsMessage"), data(st, "acceptsFrom")
                    if len(msgs) != len(froms):
                        raise BehaviorInvariantViolation(name, "receive alternatives pair message and sender", sid)
                    states.append(State(sid, RECEIVE, alternatives=tuple(zip(msgs, froms)), start=start, end=end))
                else:
                    raise UnknownSbpmClass(str(st.types[0]), str(st.iri))
                for t in objs(st, "hasTransition"):
                    tgt = _one(objs(t, "target"), "transition target", name)
                    if tgt.iri not in state_ids:
                        raise BehaviorInvariantViolation(name, "transitions reference existing states", str(tgt.iri))
                    transitions.append(Transition(sid, _one(data(t, "label"), "label", name), state_ids[tgt.iri]))
            behavior = Behavior(tuple(states), tuple(transitions))
        subjects.append(Subject(name, kind, behavior))
    messages = []
    for m in objs(root, "hasMessage"):
        where = str(m.iri)
        sender = _one(objs(m, "sender"), "sender", where)
        receiver = _one(objs(m, "receiver"), "receiver", where)
        if sender.iri not in names_by_iri or receiver.iri not in names_by_iri:
            raise BehaviorInvariantViolation(where, "message endpoints name subjects")
        payload = data(m, "payloadSchema")
        messages.append(MessageSpec(_one(data(m, "name"), "name", where), names_by_iri[sender.iri],
                                    names_by_iri[receiver.iri], payload[0] if payload else None))
    model = SbpmModel(_one(data(root, "name"), "model name", "ProcessModel"), tuple(subjects), tuple(messages))
    validate(model)
    return model


def load_sbpm_owl(data: bytes) -> SbpmModel:
    return model_from_ontology(parse(data))


# ---------------------------------------------------------------------------
# S-BPM -> BPMN (best effort)


_NCNAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.-]*$")


def to_bpmn(model: SbpmModel) -> bytes:
    """Render ``model`` as a BPMN collaboration. Lossy: layout and names of elided gateways are invented."""
    from ontoflow import xmlio

    validate(model)
    w = xmlio.Writer()
    w.open("bpmn2:definitions", {"xmlns:bpmn2": MODEL_NS, "id": "Definitions_sbpm",
                                 "targetNamespace": "urn:ontoflow:sbpm-export"})
    sid = {s.name: f"S{i}" for i, s in enumerate(model.subjects, 1)}
    for i, m in enumerate(model.messages, 1):
        w.empty("bpmn2:message", {"id": f"Message_{i}", "name": m.name})
    # state ids double as node ids when they are unique across subjects and valid XML names
    counts = Counter(st.id for s in model.subjects for st in (s.behavior.states if s.behavior else ()))
    node = {}  # (subject, state id) -> BPMN node id
    for s in model.subjects:
        for st in (s.behavior.states if s.behavior else ()):
            plain = counts[st.id] == 1 and _NCNAME.match(st.id) and not st.id.startswith(("S", "Message_", "Participant_"))
            node[(s.name, st.id)] = st.id if plain else f"{sid[s.name]}_{len(node) + 1}"
    w.open("bpmn2:collaboration", {"id": "Collaboration_1", "name": model.name})
    for s in model.subjects:
        attrs = {"id": f"Participant_{sid[s.name]}", "name": s.name}
        if s.behavior is not None:
            attrs["processRef"] = f"Process_{sid[s.name]}"
        w.empty("bpmn2:participant", attrs)
    for i, m in enumerate(model.messages, 1):
        src = tgt = None
        sender, receiver = model.subject_map[m.sender], model.subject_map[m.receiver]
        for st in (sender.behavior.states if sender.behavior else ()):
            if st.kind == SEND and (st.message, st.to) == (m.name, m.receiver):
                src = node[(m.sender, st.id)]
                break
        for st in (receiver.behavior.states if receiver.behavior else ()):
            if st.kind == RECEIVE and (m.name, m.sender) in st.alternatives:
                tgt = node[(m.receiver, st.id)]
                if len(st.alternatives) > 1:
                    tgt += f"_{st.alternatives.index((m.name, m.sender)) + 1}"
                break
        w.empty("bpmn2:messageFlow", {"id": f"MessageFlow_{i}", "name": m.name,
                                      "sourceRef": src or f"Participant_{sid[m.sender]}",
                                      "targetRef": tgt or f"Participant_{sid[m.receiver]}",
                                      "messageRef": f"Message_{i}"})
    w.close("bpmn2:collaboration")

    for s in model.subjects:
        if s.behavior is None:
            continue
        bh = s.behavior
        pid = sid[s.name]
        w.open("bpmn2:process", {"id": f"Process_{pid}", "name": s.name, "isExecutable": "false"})
        flows: list = []
        counter = [0]

        def flow(src: str, dst: str, name: str = "") -> str:
            counter[0] += 1
            fid = f"{pid}_flow{counter[0]}"
            flows.append((fid, src, dst, name))
            return fid

        def refs(fid_in: list, fid_out: list) -> None:
            for f in fid_in:
                w.text_element("bpmn2:incoming", f)
            for f in fid_out:
                w.text_element("bpmn2:outgoing", f)

        incoming: dict = {node[(s.name, st.id)]: [] for st in bh.states}
        plans = []
        start_id = f"{pid}_start"
        first = node[(s.name, bh.start_state)]
        incoming[first].append(flow(start_id, first))
        for st in bh.states:
            nid = node[(s.name, st.id)]
            outs = bh.outgoing(st.id)
            out_ids = []
            extra = []
            if st.kind == FUNCTION and len(outs) > 1:
                gw = f"{nid}_xor"
                f_to_gw = flow(nid, gw)
                out_ids.append(f_to_gw)
                gw_outs = []
                for t in outs:
                    tgt = node[(s.name, t.target)]
                    fid = flow(gw, tgt, t.label)
                    incoming[tgt].append(fid)
                    gw_outs.append(fid)
                extra.append(("exclusiveGateway", gw, [f_to_gw], gw_outs, None))
            elif st.kind == RECEIVE and len(st.alternatives) > 1:
                gw_outs = []
                for k, t in enumerate(outs, 1):
                    catch = f"{nid}_{k}"
                    fid = flow(nid, catch)
                    gw_outs.append(fid)
                    tgt = node[(s.name, t.target)]
                    nxt = flow(catch, tgt)
                    incoming[tgt].append(nxt)
                    extra.append(("intermediateCatchEvent", catch, [fid], [nxt], t.label))
                out_ids = gw_outs
            else:
                for t in outs[:1]:
                    tgt = node[(s.name, t.target)]
                    fid = flow(nid, tgt)
                    incoming[tgt].append(fid)
                    out_ids.append(fid)
            plans.append((st, nid, out_ids, extra))

        w.open("bpmn2:startEvent", {"id": start_id})
        refs([], [flows[0][0]])
        w.close("bpmn2:startEvent")
        for st, nid, out_ids, extra in plans:
            if st.end and not out_ids:
                tag = "endEvent"
            elif st.kind == FUNCTION:
                tag = "task"
            elif st.kind == SEND:
                tag = "sendTask"
            elif len(st.alternatives) > 1:
                tag = "eventBasedGateway"
            else:
                tag = "receiveTask"
            attrs = {"id": nid}
            label = st.task if st.kind == FUNCTION else (st.message if st.kind == SEND else None)
            if label:
                attrs["name"] = label
            w.open(f"bpmn2:{tag}", attrs)
            refs(incoming[nid], out_ids)
            w.close(f"bpmn2:{tag}")
            for etag, eid, e_in, e_out, ename in extra:
                w.open(f"bpmn2:{etag}", {"id": eid, **({"name": ename} if ename else {})})
                refs(e_in, e_out)
                if etag == "intermediateCatchEvent":
                    w.empty("bpmn2:messageEventDefinition", {"id": f"{eid}_med"})
                w.close(f"bpmn2:{etag}")
        for fid, src, dst, name in flows:
            attrs = {"id": fid}
            if name:
                attrs["name"] = name
            attrs.update({"sourceRef": src, "targetRef": dst})
            w.empty("bpmn2:sequenceFlow", attrs)
        w.close("bpmn2:process")
    w.close("bpmn2:definitions")
    return w.getvalue()
