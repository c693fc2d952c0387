"""Embedded BPMN reference ontology subset and the name translation table.

The manifest below transcribes the attribute and model-association tables
of the BPMN 2.0 standard for the Descriptive conformance subset plus the
elements the S-BPM translator needs. Each restriction is either
attribute-kind (``onDataRange``, satisfied by an XML attribute) or
child-kind (``onClass``, satisfied by XML child elements).

Standard class names are capitalised; serialized XML tags are bridged
only through :class:`TranslationTable`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional, Sequence

from ontoflow.bpmn import DI_NS, MODEL_NS
from ontoflow.errors import OntoflowError
from ontoflow.ontology import (
    OWL_THING,
    Cardinality,
    InvariantViolation,
    Iri,
    OntoClass,
    Ontology,
    OntologyBuilder,
    PropertyDecl,
    Restriction,
    parse_builder,
)

REFERENCE_VERSION = "bpmn-2.0.2-subset/1"
SUBSET_TAG = "descriptive+sbpm"

M = "bpmn2"
D = "bpmndi"

PACKAGES = ("ChoreographyPackage", "CollaborationPackage", "Core", "ProcessPackage", "DI")


def _a(prop: str, kind: str, n: int, datatype: str = "string", prefix: str = M) -> tuple:
    return ("attr", prefix, prop, kind, n, datatype)


def _c(prop: str, kind: str, n: int, target: str, prefix: str = M) -> tuple:
    return ("child", prefix, prop, kind, n, target)


# (prefix, class, superclasses, package, restrictions)
MANIFEST = (
    (M, "BaseElement", (), "Core", [_a("id", "max", 1)]),
    (M, "RootElement", ("BaseElement",), "Core", []),
    (M, "Definitions", ("BaseElement",), "Core", [
        _a("name", "max", 1),
        _a("targetNamespace", "exact", 1),
        _a("expressionLanguage", "max", 1),
        _a("typeLanguage", "max", 1),
        _a("exporter", "max", 1),
        _a("exporterVersion", "max", 1),
        _c("rootElement", "min", 0, "RootElement"),
        _c("diagram", "min", 0, "bpmndi:BPMNDiagram"),
    ]),
    (M, "Documentation", ("BaseElement",), "Core", [_a("textFormat", "max", 1)]),
    (M, "ExtensionDefinition", (), "Core", []),
    (M, "ItemDefinition", ("RootElement",), "Core", [
        _a("itemKind", "max", 1),
        _a("structureRef", "max", 1),
        _a("isCollection", "max", 1, "boolean"),
    ]),
    (M, "Message", ("RootElement",), "Core", [
        _a("name", "min", 1),
        _a("itemRef", "max", 1, "idref"),
    ]),
    (M, "EndPoint", ("RootElement",), "Core", []),
    (M, "Interface", ("RootElement",), "Core", [
        _a("name", "min", 1),
        _a("implementationRef", "max", 1),
    ]),
    (M, "PartnerEntity", ("RootElement",), "CollaborationPackage", [_a("name", "max", 1)]),
    (M, "PartnerRole", ("RootElement",), "CollaborationPackage", [_a("name", "max", 1)]),
    (M, "EventDefinition", ("RootElement",), "Core", []),
    (M, "MessageEventDefinition", ("EventDefinition",), "Core", [
        _a("messageRef", "max", 1, "idref"),
        _a("operationRef", "max", 1, "idref"),
    ]),
    (M, "Expression", ("BaseElement",), "Core", []),
    (M, "FormalExpression", ("Expression",), "Core", [
        _a("language", "max", 1),
        _a("evaluatesToTypeRef", "max", 1, "idref"),
    ]),
    (M, "FlowElement", ("BaseElement",), "Core", [_a("name", "max", 1)]),
    (M, "FlowNode", ("FlowElement",), "Core", [
        _c("incoming", "min", 0, "Incoming"),
        _c("outgoing", "min", 0, "Outgoing"),
    ]),
    (M, "SequenceFlow", ("FlowElement",), "Core", [
        _a("sourceRef", "exact", 1, "idref"),
        _a("targetRef", "exact", 1, "idref"),
        _a("isImmediate", "max", 1, "boolean"),
        _c("conditionExpression", "max", 1, "Expression"),
    ]),
    # id-reference wrapper elements such as <incoming>FlowId</incoming>
    (M, "ElementReference", (), "Core", []),
    (M, "Incoming", ("ElementReference",), "Core", []),
    (M, "Outgoing", ("ElementReference",), "Core", []),
    (M, "FlowNodeRef", ("ElementReference",), "ProcessPackage", []),
    (M, "Collaboration", ("RootElement",), "CollaborationPackage", [
        _a("name", "min", 1),
        _a("isClosed", "max", 1, "boolean"),
        _c("participant", "min", 0, "Participant"),
        _c("messageFlow", "min", 0, "MessageFlow"),
    ]),
    (M, "Participant", ("BaseElement",), "CollaborationPackage", [
        _a("name", "max", 1),
        _c("endpointRef", "min", 0, "EndPoint"),
        _c("interfaceRef", "min", 0, "Interface"),
        _c("participantMultiplicity", "max", 1, "ParticipantMultiplicity"),
        _a("processRef", "max", 1, "idref"),
        _c("partnerEntityRef", "min", 0, "PartnerEntity"),
        _c("partnerRoleRef", "min", 0, "PartnerRole"),
    ]),
    (M, "ParticipantMultiplicity", ("BaseElement",), "CollaborationPackage", [
        _a("minimum", "max", 1, "integer"),
        _a("maximum", "max", 1, "integer"),
    ]),
    (M, "MessageFlow", ("BaseElement",), "CollaborationPackage", [
        _a("name", "max", 1),
        _a("sourceRef", "exact", 1, "idref"),
        _a("targetRef", "exact", 1, "idref"),
        _a("messageRef", "max", 1, "idref"),
    ]),
    (M, "Choreography", ("Collaboration",), "ChoreographyPackage", []),
    (M, "Process", ("RootElement",), "ProcessPackage", [
        _a("name", "max", 1),
        _a("processType", "max", 1),
        _a("isExecutable", "max", 1, "boolean"),
        _a("isClosed", "max", 1, "boolean"),
        _c("laneSet", "min", 0, "LaneSet"),
        _c("flowElement", "min", 0, "FlowElement"),
    ]),
    (M, "LaneSet", ("BaseElement",), "ProcessPackage", [
        _a("name", "max", 1),
        _c("lane", "min", 1, "Lane"),
    ]),
    (M, "Lane", ("BaseElement",), "ProcessPackage", [
        _a("name", "max", 1),
        _a("partitionElementRef", "max", 1, "idref"),
        _c("flowNodeRef", "min", 0, "FlowNodeRef"),
        _c("childLaneSet", "max", 1, "LaneSet"),
    ]),
    (M, "Activity", ("FlowNode",), "ProcessPackage", [
        _a("isForCompensation", "max", 1, "boolean"),
        _a("startQuantity", "max", 1, "integer"),
        _a("completionQuantity", "max", 1, "integer"),
        _a("default", "max", 1, "idref"),
    ]),
    (M, "Task", ("Activity",), "ProcessPackage", []),
    (M, "SendTask", ("Task",), "ProcessPackage", [
        _a("implementation", "max", 1),
        _a("messageRef", "max", 1, "idref"),
        _a("operationRef", "max", 1, "idref"),
    ]),
    (M, "ReceiveTask", ("Task",), "ProcessPackage", [
        _a("implementation", "max", 1),
        _a("instantiate", "max", 1, "boolean"),
        _a("messageRef", "max", 1, "idref"),
        _a("operationRef", "max", 1, "idref"),
    ]),
    (M, "UserTask", ("Task",), "ProcessPackage", [_a("implementation", "max", 1)]),
    (M, "Gateway", ("FlowNode",), "ProcessPackage", [_a("gatewayDirection", "max", 1)]),
    (M, "ExclusiveGateway", ("Gateway",), "ProcessPackage", [_a("default", "max", 1, "idref")]),
    (M, "EventBasedGateway", ("Gateway",), "ProcessPackage", [
        _a("instantiate", "max", 1, "boolean"),
        _a("eventGatewayType", "max", 1),
    ]),
    (M, "Event", ("FlowNode",), "ProcessPackage", []),
    (M, "CatchEvent", ("Event",), "ProcessPackage", [
        _a("parallelMultiple", "max", 1, "boolean"),
        _c("eventDefinition", "min", 0, "EventDefinition"),
    ]),
    (M, "ThrowEvent", ("Event",), "ProcessPackage", [_c("eventDefinition", "min", 0, "EventDefinition")]),
    (M, "StartEvent", ("CatchEvent",), "ProcessPackage", [_a("isInterrupting", "max", 1, "boolean")]),
    (M, "EndEvent", ("ThrowEvent",), "ProcessPackage", []),
    (M, "IntermediateCatchEvent", ("CatchEvent",), "ProcessPackage", []),
    (M, "IntermediateThrowEvent", ("ThrowEvent",), "ProcessPackage", []),
    (M, "DataObject", ("FlowElement",), "ProcessPackage", [
        _a("itemSubjectRef", "max", 1, "idref"),
        _a("isCollection", "max", 1, "boolean"),
    ]),
    (M, "DataObjectReference", ("FlowElement",), "ProcessPackage", [
        _a("dataObjectRef", "max", 1, "idref"),
        _a("itemSubjectRef", "max", 1, "idref"),
    ]),
    (M, "DataStore", ("RootElement",), "ProcessPackage", [
        _a("name", "min", 1),
        _a("capacity", "max", 1, "integer"),
        _a("isUnlimited", "max", 1, "boolean"),
        _a("itemSubjectRef", "max", 1, "idref"),
    ]),
    (M, "DataStoreReference", ("FlowElement",), "ProcessPackage", [
        _a("dataStoreRef", "max", 1, "idref"),
        _a("itemSubjectRef", "max", 1, "idref"),
    ]),
    (D, "BPMNDiagram", (), "DI", [
        _a("id", "max", 1, prefix=D),
        _a("name", "max", 1, prefix=D),
        _a("documentation", "max", 1, prefix=D),
        _a("resolution", "max", 1, prefix=D),
        _c("plane", "exact", 1, "bpmndi:BPMNPlane", prefix=D),
    ]),
    (D, "DiagramElement", (), "DI", [_a("id", "max", 1, prefix=D)]),
    (D, "BPMNPlane", ("bpmndi:DiagramElement",), "DI", [_a("bpmnElement", "max", 1, "idref", prefix=D)]),
    (D, "BPMNShape", ("bpmndi:DiagramElement",), "DI", [
        _a("bpmnElement", "max", 1, "idref", prefix=D),
        _a("isHorizontal", "max", 1, "boolean", prefix=D),
        _a("isExpanded", "max", 1, "boolean", prefix=D),
        _a("isMarkerVisible", "max", 1, "boolean", prefix=D),
        _a("isMessageVisible", "max", 1, "boolean", prefix=D),
        _a("participantBandKind", "max", 1, prefix=D),
        _a("choreographyActivityShape", "max", 1, "idref", prefix=D),
        _c("label", "max", 1, "bpmndi:BPMNLabel", prefix=D),
    ]),
    (D, "BPMNEdge", ("bpmndi:DiagramElement",), "DI", [
        _a("bpmnElement", "max", 1, "idref", prefix=D),
        _a("sourceElement", "max", 1, "idref", prefix=D),
        _a("targetElement", "max", 1, "idref", prefix=D),
        _a("messageVisibleKind", "max", 1, prefix=D),
        _c("label", "max", 1, "bpmndi:BPMNLabel", prefix=D),
    ]),
    (D, "BPMNLabel", ("bpmndi:DiagramElement",), "DI", [_a("labelStyle", "max", 1, "idref", prefix=D)]),
    (D, "BPMNLabelStyle", (), "DI", [_a("id", "max", 1, prefix=D)]),
)

# Object properties and the class their values refer to (None: several kinds).
OBJECT_PROPERTY_RANGES = {
    "processRef": "Process",
    "messageRef": "Message",
    "itemRef": "ItemDefinition",
    "sourceRef": None,
    "targetRef": None,
    "default": "SequenceFlow",
    "operationRef": None,
    "itemSubjectRef": "ItemDefinition",
    "evaluatesToTypeRef": "ItemDefinition",
    "dataStoreRef": "DataStore",
    "dataObjectRef": "DataObject",
    "partitionElementRef": None,
}

# Attributes seen in serialized models that no manifest restriction covers.
EXTRA_DATA_PROPERTIES = ((M, "method", "string"),)


def _class_iri(name: str, default_prefix: str) -> Iri:
    return Iri.parse(name) if ":" in name else Iri(default_prefix, name)


def _cardinality(kind: str, n: int) -> Cardinality:
    return {"exact": Cardinality.exact, "min": Cardinality.min, "max": Cardinality.max}[kind](n)


@dataclass(frozen=True)
class ReferenceOntology:
    ontology: Ontology
    subset_tag: str = SUBSET_TAG
    version: str = REFERENCE_VERSION


def build_reference() -> ReferenceOntology:
    b = OntologyBuilder(
        Iri(M, "BPMN20"),
        annotations=[("version", REFERENCE_VERSION), ("subset", SUBSET_TAG)],
        namespaces=[(M, MODEL_NS), (D, DI_NS)],
    )
    b.add_class(OntoClass(Iri(M, "ClassDiagramStructure")))
    for pkg in PACKAGES:
        b.add_class(OntoClass(Iri(M, pkg), (Iri(M, "ClassDiagramStructure"),)))

    props: dict = {}

    def declare(iri: Iri, kind: str, rng) -> None:
        known = props.get(iri)
        if known is None:
            props[iri] = PropertyDecl(iri, kind, rng)
        elif known.kind != kind:
            raise InvariantViolation(f"manifest declares {iri} as {known.kind} and {kind}")

    for prefix, name, supers, pkg, restrictions in MANIFEST:
        iri = Iri(prefix, name)
        b.add_class(OntoClass(iri, tuple(_class_iri(s, prefix) for s in supers), (("package", pkg),)))
    for prefix, name, supers, pkg, restrictions in MANIFEST:
        subject = Iri(prefix, name)
        for kind, pprefix, prop, ckind, n, extra in restrictions:
            piri = Iri(pprefix, prop)
            if kind == "attr":
                if extra == "idref" and prop in OBJECT_PROPERTY_RANGES:
                    target = OBJECT_PROPERTY_RANGES[prop]
                    declare(piri, "object", Iri(M, target) if target else None)
                elif extra == "idref":
                    declare(piri, "object", None)
                else:
                    declare(piri, "data", extra)
                b.add_restriction(Restriction(subject, piri, _cardinality(ckind, n), on_data_range=extra))
            else:
                target = _class_iri(extra, M)
                declare(piri, "object", target)
                b.add_restriction(Restriction(subject, piri, _cardinality(ckind, n), on_class=target))
    for prefix, prop, dtype in EXTRA_DATA_PROPERTIES:
        declare(Iri(prefix, prop), "data", dtype)
    for p in props.values():
        b.add_property(p)
    return ReferenceOntology(b.build())


class MergeConflict(OntoflowError):
    def __init__(self, iri):
        self.iri = str(iri)
        super().__init__(f"extension redefines {self.iri}")


def load_extension(ref: ReferenceOntology, data: bytes) -> ReferenceOntology:
    """Merge an extension file (ontology dialect) into ``ref``; redefinitions are refused."""
    ext = parse_builder(data)
    b = ref.ontology.builder()
    for prefix, uri in ext.namespaces.items():
        known = b.namespaces.get(prefix)
        if known is not None and known != uri:
            raise MergeConflict(f"namespace {prefix}")
        b.namespaces[prefix] = uri
    for iri, cls in ext._classes.items():
        known = b._classes.get(iri)
        if known is None:
            b._classes[iri] = cls
        elif known != cls:
            raise MergeConflict(iri)
    for iri, prop in ext._properties.items():
        known = b._properties.get(iri)
        if known is None:
            b._properties[iri] = prop
        elif known != prop:
            raise MergeConflict(iri)
    by_slot = {(r.subject_class, r.on_property): r for r in b._restrictions.values()}
    for key, r in ext._restrictions.items():
        known = by_slot.get((r.subject_class, r.on_property))
        if known is None:
            b._restrictions[key] = r
            by_slot[(r.subject_class, r.on_property)] = r
        elif known != r:
            raise MergeConflict(f"{r.subject_class}/{r.on_property}")
    for iri, ind in ext._individuals.items():
        known = b._individuals.get(iri)
        if known is None:
            b._individuals[iri] = ind
        elif known != ind:
            raise MergeConflict(iri)
    return ReferenceOntology(b.build(), ref.subset_tag, ref.version)


# ---------------------------------------------------------------------------
# translation table

GLOBAL_SCOPE = "*"
TO_SERIALIZED = "to_serialized"
TO_STANDARD = "to_standard"


class TranslationTableError(OntoflowError):
    pass


@dataclass
class TranslationTable:
    """Scoped bijection standard name <-> serialized name."""

    _to_ser: dict = field(default_factory=dict)
    _to_std: dict = field(default_factory=dict)

    def add(self, scope: str, standard: str, serialized: str, replace: bool = False) -> None:
        fwd = self._to_ser.setdefault(scope, {})
        back = self._to_std.setdefault(scope, {})
        if replace:
            old_ser = fwd.pop(standard, None)
            if old_ser is not None:
                back.pop(old_ser, None)
            old_std = back.pop(serialized, None)
            if old_std is not None:
                fwd.pop(old_std, None)
        if fwd.get(standard, serialized) != serialized or back.get(serialized, standard) != standard:
            raise TranslationTableError(
                f"scope {scope}: {standard} <-> {serialized} breaks the one-to-one mapping")
        fwd[standard] = serialized
        back[serialized] = standard

    def entries(self) -> list:
        return [(scope, std, ser) for scope, m in self._to_ser.items() for std, ser in m.items()]

    def translate(self, name: str, direction: str, scopes: Sequence[str] = ()) -> str:
        table = self._to_ser if direction == TO_SERIALIZED else self._to_std
        if direction not in (TO_SERIALIZED, TO_STANDARD):
            raise ValueError(f"unknown direction {direction!r}")
        for scope in (*scopes, GLOBAL_SCOPE):
            hit = table.get(scope, {}).get(name)
            if hit is not None:
                return hit
        return name


def translate(table: TranslationTable, name: str, direction: str, scopes: Sequence[str] = ()) -> str:
    return table.translate(name, direction, scopes)


def parse_table(text: str) -> list:
    """Rows of ``scope standard serialized``; ``#`` starts a comment."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise TranslationTableError(f"line {lineno}: expected 3 columns, got {len(parts)}")
        rows.append(tuple(parts))
    return rows


def default_entries() -> list:
    text = resources.files("ontoflow").joinpath("data/translation.tsv").read_text(encoding="utf-8")
    return parse_table(text)


def build_table(ref: ReferenceOntology, extra_rows: Iterable = ()) -> TranslationTable:
    """Table for ``ref``: lower-camel tags for every model class, the shipped overrides, then ``extra_rows``."""
    table = TranslationTable()
    model_prefix = M
    for cls in ref.ontology.classes:
        if cls.iri.prefix != model_prefix:
            continue
        name = cls.iri.local
        serialized = name[:1].lower() + name[1:]
        if serialized != name:
            table.add(GLOBAL_SCOPE, name, serialized)
    for scope, std, ser in (*default_entries(), *extra_rows):
        table.add(scope, std, ser, replace=True)
    return table


def load_table(ref: ReferenceOntology, path: Optional[str] = None) -> TranslationTable:
    if path is None:
        return build_table(ref)
    with open(path, encoding="utf-8") as fh:
        return build_table(ref, parse_table(fh.read()))
