"""OWL-style ontology model, its RDF/XML-flavoured file dialect, and structural diff.

An :class:`Ontology` is an immutable value. Construction goes through
:class:`OntologyBuilder`, which checks the referential and acyclicity
invariants once in :meth:`OntologyBuilder.build`.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Optional, Sequence

from ontoflow import xmlio
from ontoflow.errors import OntoflowError

DATATYPES = ("string", "integer", "boolean", "idref", "anyType")

# datatype tag <-> resource written in the file
_DATATYPE_RESOURCE = {
    "string": "xsd:string",
    "integer": "xsd:integer",
    "boolean": "xsd:boolean",
    "idref": "xsd:IDREF",
    "anyType": "xsd:anyType",
}
_RESOURCE_DATATYPE = {v: k for k, v in _DATATYPE_RESOURCE.items()}

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS_NS = "http://www.w3.org/2000/01/rdf-schema#"
OWL_NS = "http://www.w3.org/2002/07/owl#"
XSD_NS = "http://www.w3.org/2001/XMLSchema#"
ONTO_NS = "urn:ontoflow:dialect#"

BUILTIN_NAMESPACES = {
    "rdf": RDF_NS,
    "rdfs": RDFS_NS,
    "owl": OWL_NS,
    "xsd": XSD_NS,
    "onto": ONTO_NS,
}


class OntologyError(OntoflowError):
    pass


class DuplicateIri(OntologyError):
    pass


class UnresolvedSuperclass(OntologyError):
    pass


class CycleIntroduced(OntologyError):
    pass


class UnknownClass(OntologyError):
    pass


class MalformedXml(OntologyError):
    pass


class UnresolvedReference(OntologyError):
    def __init__(self, iri: "Iri | str", path: str = ""):
        self.iri = str(iri)
        self.path = path
        super().__init__(f"unresolved reference {self.iri}" + (f" at {path}" if path else ""))


class InvariantViolation(OntologyError):
    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{message}" + (f" at {path}" if path else ""))


_LOCAL_RE = re.compile(r"^\S+$")
_PREFIX_RE = re.compile(r"^[A-Za-z_][\w.-]*$")


@dataclass(frozen=True, order=True)
class Iri:
    prefix: str
    local: str

    def __post_init__(self):
        if not _PREFIX_RE.match(self.prefix):
            raise ValueError(f"bad IRI prefix {self.prefix!r}")
        if not self.local or not _LOCAL_RE.match(self.local):
            raise ValueError(f"bad IRI local name {self.local!r}")

    @classmethod
    def parse(cls, text: str) -> "Iri":
        prefix, sep, local = text.partition(":")
        if not sep:
            raise ValueError(f"IRI {text!r} lacks a prefix")
        return cls(prefix, local)

    def __str__(self) -> str:
        return f"{self.prefix}:{self.local}"


OWL_THING = Iri("owl", "Thing")


@dataclass(frozen=True, order=True)
class Cardinality:
    """exact(n), min(n), max(n) or range(lo, hi)."""

    kind: str
    low: int
    high: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("exact", "min", "max", "range"):
            raise ValueError(f"unknown cardinality kind {self.kind!r}")
        if self.low < 0 or (self.high is not None and self.high < 0):
            raise ValueError("cardinality bounds must be >= 0")
        if self.kind == "range":
            if self.high is None or self.low > self.high:
                raise ValueError("range cardinality requires min <= max")
        elif self.high is not None:
            raise ValueError(f"{self.kind} cardinality takes one bound")

    @classmethod
    def exact(cls, n: int) -> "Cardinality":
        return cls("exact", n)

    @classmethod
    def min(cls, n: int) -> "Cardinality":
        return cls("min", n)

    @classmethod
    def max(cls, n: int) -> "Cardinality":
        return cls("max", n)

    @classmethod
    def range(cls, lo: int, hi: int) -> "Cardinality":
        return cls("range", lo, hi)

    @property
    def lower(self) -> int:
        return 0 if self.kind == "max" else self.low

    @property
    def upper(self) -> Optional[int]:
        if self.kind == "exact" or self.kind == "max":
            return self.low
        if self.kind == "range":
            return self.high
        return None

    def admits(self, count: int) -> bool:
        upper = self.upper
        return count >= self.lower and (upper is None or count <= upper)

    def describe(self) -> str:
        if self.kind == "exact":
            return f"={self.low}"
        if self.kind == "min":
            return f">={self.low}"
        if self.kind == "max":
            return f"<={self.low}"
        return f"{self.low}..{self.high}"


@dataclass(frozen=True)
class OntoClass:
    iri: Iri
    superclasses: tuple = ()
    annotations: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "superclasses", tuple(self.superclasses) or (OWL_THING,))
        object.__setattr__(self, "annotations", tuple(tuple(a) for a in self.annotations))


@dataclass(frozen=True)
class PropertyDecl:
    iri: Iri
    kind: str  # "object" | "data"
    range: "Iri | str | None" = None

    def __post_init__(self):
        if self.kind not in ("object", "data"):
            raise ValueError(f"property kind must be object or data, got {self.kind!r}")
        if self.kind == "data":
            rng = self.range or "string"
            if rng not in DATATYPES:
                raise ValueError(f"unknown datatype {rng!r}")
            object.__setattr__(self, "range", rng)
        elif self.range is not None and not isinstance(self.range, Iri):
            raise ValueError("object property range must be a class IRI")


@dataclass(frozen=True)
class Restriction:
    subject_class: Iri
    on_property: Iri
    cardinality: Cardinality
    on_class: Optional[Iri] = None
    on_data_range: Optional[str] = None

    def __post_init__(self):
        if self.on_class is not None and self.on_data_range is not None:
            raise InvariantViolation(
                f"restriction on {self.subject_class}/{self.on_property} has both onClass and onDataRange"
            )
        if self.on_data_range is not None and self.on_data_range not in DATATYPES:
            raise ValueError(f"unknown datatype {self.on_data_range!r}")

    @property
    def is_child_kind(self) -> bool:
        return self.on_class is not None

    def key(self) -> tuple:
        return (
            str(self.subject_class),
            str(self.on_property),
            self.cardinality.kind,
            self.cardinality.low,
            -1 if self.cardinality.high is None else self.cardinality.high,
            str(self.on_class or ""),
            self.on_data_range or "",
        )

    def describe(self) -> str:
        target = f" onClass {self.on_class}" if self.on_class else (
            f" onDataRange {self.on_data_range}" if self.on_data_range else "")
        return f"{self.subject_class} {self.on_property} {self.cardinality.describe()}{target}"


@dataclass(frozen=True)
class DataAssertion:
    property: Iri
    value: str
    datatype: str = "string"


@dataclass(frozen=True)
class ObjectAssertion:
    property: Iri
    target: Iri


@dataclass(frozen=True)
class NamedIndividual:
    iri: Iri
    types: tuple
    data_assertions: tuple = ()
    object_assertions: tuple = ()
    text_content: Optional[str] = None
    annotations: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        if not self.types:
            raise InvariantViolation(f"individual {self.iri} has no type")
        object.__setattr__(self, "data_assertions", tuple(self.data_assertions))
        object.__setattr__(self, "object_assertions", tuple(self.object_assertions))
        object.__setattr__(self, "annotations", tuple(tuple(a) for a in self.annotations))

    def annotation_values(self, key: str) -> list:
        return [v for k, v in self.annotations if k == key]

    def annotation(self, key: str) -> Optional[str]:
        for k, v in self.annotations:
            if k == key:
                return v
        return None


@dataclass(frozen=True)
class Ontology:
    header_iri: Iri
    annotations: tuple = ()
    namespaces: tuple = ()  # (prefix, uri) pairs beyond the built-in vocabulary
    classes: tuple = ()
    properties: tuple = ()
    restrictions: tuple = ()
    individuals: tuple = ()

    @cached_property
    def class_map(self) -> dict:
        return {c.iri: c for c in self.classes}

    @cached_property
    def property_map(self) -> dict:
        return {p.iri: p for p in self.properties}

    @cached_property
    def individual_map(self) -> dict:
        return {i.iri: i for i in self.individuals}

    @cached_property
    def namespace_map(self) -> dict:
        return dict(self.namespaces)

    @cached_property
    def _restrictions_by_subject(self) -> dict:
        out: dict = {}
        for r in self.restrictions:
            out.setdefault(r.subject_class, []).append(r)
        return out

    def has_class(self, iri: Iri) -> bool:
        return iri == OWL_THING or iri in self.class_map

    def object_properties(self) -> list:
        return [p for p in self.properties if p.kind == "object"]

    def data_properties(self) -> list:
        return [p for p in self.properties if p.kind == "data"]

    def restrictions_of(self, iri: Iri) -> list:
        return list(self._restrictions_by_subject.get(iri, ()))

    def subclass_edges(self) -> list:
        return [(c.iri, s) for c in self.classes for s in c.superclasses]

    def is_subclass(self, sub: Iri, sup: Iri) -> bool:
        return sub == sup or sup in superclass_closure(self, sub)

    def builder(self) -> "OntologyBuilder":
        b = OntologyBuilder(self.header_iri, annotations=self.annotations, namespaces=self.namespaces)
        for c in self.classes:
            b._classes[c.iri] = c
        for p in self.properties:
            b._properties[p.iri] = p
        for r in self.restrictions:
            b._restrictions[r.key()] = r
        for i in self.individuals:
            b._individuals[i.iri] = i
        return b


class OntologyBuilder:
    """Mutable accumulator; :meth:`build` validates and freezes."""

    def __init__(self, header_iri: Iri, annotations: Iterable = (), namespaces: Iterable = ()):
        self.header_iri = header_iri
        self.annotations = [tuple(a) for a in annotations]
        self.namespaces: dict = {}
        for prefix, uri in namespaces:
            self.add_namespace(prefix, uri)
        self._classes: dict = {}
        self._properties: dict = {}
        self._restrictions: dict = {}
        self._individuals: dict = {}

    def add_namespace(self, prefix: str, uri: str) -> None:
        if prefix in BUILTIN_NAMESPACES:
            raise InvariantViolation(f"prefix {prefix!r} is reserved")
        known = self.namespaces.get(prefix)
        if known is not None and known != uri:
            raise InvariantViolation(f"prefix {prefix!r} bound to both {known} and {uri}")
        self.namespaces[prefix] = uri

    def add_class(self, cls: OntoClass) -> OntoClass:
        if cls.iri in self._classes or cls.iri == OWL_THING:
            raise DuplicateIri(f"class {cls.iri} already declared")
        self._classes[cls.iri] = cls
        return cls

    def has_class(self, iri: Iri) -> bool:
        return iri == OWL_THING or iri in self._classes

    def add_superclass(self, iri: Iri, sup: Iri) -> bool:
        """Append a superclass edge; returns False if it would close a cycle."""
        cls = self._classes[iri]
        if sup in cls.superclasses:
            return True
        if sup == iri or self._reaches(sup, iri):
            return False
        supers = tuple(s for s in cls.superclasses if s != OWL_THING) + (sup,)
        self._classes[iri] = OntoClass(iri, supers, cls.annotations)
        return True

    def _reaches(self, start: Iri, goal: Iri) -> bool:
        seen = set()
        stack = [start]
        while stack:
            cur = stack.pop()
            if cur == goal:
                return True
            if cur in seen or cur not in self._classes:
                continue
            seen.add(cur)
            stack.extend(self._classes[cur].superclasses)
        return False

    def add_property(self, prop: PropertyDecl) -> PropertyDecl:
        known = self._properties.get(prop.iri)
        if known is not None:
            if known.kind != prop.kind:
                raise InvariantViolation(f"property {prop.iri} declared as both {known.kind} and {prop.kind}")
            raise DuplicateIri(f"property {prop.iri} already declared")
        self._properties[prop.iri] = prop
        return prop

    def add_restriction(self, r: Restriction) -> Restriction:
        self._restrictions.setdefault(r.key(), r)
        return r

    def add_individual(self, ind: NamedIndividual) -> NamedIndividual:
        if ind.iri in self._individuals:
            raise DuplicateIri(f"individual {ind.iri} already declared")
        self._individuals[ind.iri] = ind
        return ind

    def build(self) -> Ontology:
        ont = Ontology(
            header_iri=self.header_iri,
            annotations=tuple(self.annotations),
            namespaces=tuple(self.namespaces.items()),
            classes=tuple(self._classes.values()),
            # the file lists object properties before data properties
            properties=tuple(sorted(self._properties.values(), key=lambda p: p.kind != "object")),
            restrictions=tuple(self._restrictions.values()),
            individuals=tuple(self._individuals.values()),
        )
        validate(ont)
        return ont


def _check_prefix(ont: Ontology, iri: Iri, path: str) -> None:
    if iri.prefix not in BUILTIN_NAMESPACES and iri.prefix not in ont.namespace_map:
        raise InvariantViolation(f"IRI {iri} uses undeclared prefix {iri.prefix!r}", path)


def validate(ont: Ontology) -> None:
    """Raise on the first violated ontology invariant."""
    classes = ont.class_map
    props = ont.property_map
    inds = ont.individual_map
    if len(classes) != len(ont.classes):
        raise InvariantViolation("duplicate class IRI")
    if len(props) != len(ont.properties):
        raise InvariantViolation("duplicate property IRI")
    if len(inds) != len(ont.individuals):
        raise InvariantViolation("duplicate individual IRI")
    _check_prefix(ont, ont.header_iri, "Ontology")

    for c in ont.classes:
        path = f"Class[{c.iri}]"
        _check_prefix(ont, c.iri, path)
        for s in c.superclasses:
            if not ont.has_class(s):
                raise UnresolvedReference(s, path)
    # acyclicity: iterative three-colour DFS
    state: dict = {}
    for start in classes:
        if start in state:
            continue
        stack = [(start, iter(classes[start].superclasses))]
        state[start] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[node] = 2
                stack.pop()
                continue
            if nxt == OWL_THING:
                continue
            mark = state.get(nxt)
            if mark == 1:
                raise InvariantViolation(f"subclass cycle through {nxt}", f"Class[{node}]")
            if mark is None:
                state[nxt] = 1
                stack.append((nxt, iter(classes[nxt].superclasses)))

    for p in ont.properties:
        path = f"Property[{p.iri}]"
        _check_prefix(ont, p.iri, path)
        if p.kind == "object" and p.range is not None and not ont.has_class(p.range):
            raise UnresolvedReference(p.range, path)

    for r in ont.restrictions:
        path = f"Restriction[{r.describe()}]"
        if not ont.has_class(r.subject_class):
            raise UnresolvedReference(r.subject_class, path)
        if r.on_property not in props:
            raise UnresolvedReference(r.on_property, path)
        if r.on_class is not None and not ont.has_class(r.on_class):
            raise UnresolvedReference(r.on_class, path)

    for ind in ont.individuals:
        path = f"NamedIndividual[{ind.iri}]"
        _check_prefix(ont, ind.iri, path)
        for t in ind.types:
            if not ont.has_class(t):
                raise UnresolvedReference(t, path)
        for a in ind.data_assertions:
            decl = props.get(a.property)
            if decl is None:
                raise UnresolvedReference(a.property, path)
            if a.datatype not in DATATYPES:
                raise InvariantViolation(f"unknown datatype {a.datatype!r}", path)
            if decl.kind == "object" and a.datatype != "idref":
                raise InvariantViolation(f"literal on object property {a.property} must be idref", path)
        for a in ind.object_assertions:
            decl = props.get(a.property)
            if decl is None:
                raise UnresolvedReference(a.property, path)
            if decl.kind != "object":
                raise InvariantViolation(f"object assertion on data property {a.property}", path)
            if a.target not in inds:
                raise UnresolvedReference(a.target, path)


# ---------------------------------------------------------------------------
# functional operations


def add_class(ont: Ontology, cls: OntoClass) -> Ontology:
    if cls.iri in ont.class_map or cls.iri == OWL_THING:
        raise DuplicateIri(f"class {cls.iri} already declared")
    for s in cls.superclasses:
        if not ont.has_class(s):
            raise UnresolvedSuperclass(f"superclass {s} of {cls.iri} is not declared")
    b = ont.builder()
    b.add_class(cls)
    return b.build()


def add_superclass(ont: Ontology, iri: Iri, sup: Iri) -> Ontology:
    if iri not in ont.class_map:
        raise UnknownClass(str(iri))
    if not ont.has_class(sup):
        raise UnresolvedSuperclass(f"superclass {sup} of {iri} is not declared")
    b = ont.builder()
    if not b.add_superclass(iri, sup):
        raise CycleIntroduced(f"{iri} subClassOf {sup} closes a cycle")
    return b.build()


def superclass_closure(ont: Ontology, iri: Iri) -> list:
    """Transitive superclasses, breadth-first, declaration order breaking ties; owl:Thing last."""
    if iri == OWL_THING:
        return []
    classes = ont.class_map
    if iri not in classes:
        raise UnknownClass(str(iri))
    out = []
    seen = {iri}
    queue = deque(classes[iri].superclasses)
    while queue:
        cur = queue.popleft()
        if cur in seen:
            continue
        seen.add(cur)
        if cur == OWL_THING:
            continue
        out.append(cur)
        queue.extend(classes[cur].superclasses)
    out.append(OWL_THING)
    return out


def effective_restrictions(ont: Ontology, iri: Iri) -> list:
    closure = superclass_closure(ont, iri)
    out = []
    seen = set()
    for cls in [iri, *closure]:
        for r in ont.restrictions_of(cls):
            # identical restriction bodies inherited along two paths count once
            body = r.key()[1:]
            if body in seen:
                continue
            seen.add(body)
            out.append(r)
    return out


# ---------------------------------------------------------------------------
# file dialect


def _res(value: "Iri | str") -> dict:
    return {"rdf:resource": str(value)}


def _annotation_lines(w: "xmlio.Writer", annotations: Sequence) -> None:
    for key, text in annotations:
        w.text_element("onto:annotation", text, {"onto:key": key})


def serialize(ont: Ontology) -> bytes:
    """Render ``ont`` in the canonical ``.owl`` dialect (deterministic bytes)."""
    w = xmlio.Writer()
    wrapper = {f"xmlns:{p}": uri for p, uri in BUILTIN_NAMESPACES.items()}
    for p, uri in ont.namespaces:
        wrapper[f"xmlns:{p}"] = uri
    w.open("rdf:RDF", wrapper)

    if ont.annotations:
        w.open("owl:Ontology", {"rdf:about": str(ont.header_iri)})
        _annotation_lines(w, ont.annotations)
        w.close("owl:Ontology")
    else:
        w.empty("owl:Ontology", {"rdf:about": str(ont.header_iri)})

    for p in ont.object_properties():
        if p.range is None:
            w.empty("owl:ObjectProperty", {"rdf:about": str(p.iri)})
        else:
            w.open("owl:ObjectProperty", {"rdf:about": str(p.iri)})
            w.empty("rdfs:range", _res(p.range))
            w.close("owl:ObjectProperty")

    for p in ont.data_properties():
        w.open("owl:DatatypeProperty", {"rdf:about": str(p.iri)})
        w.empty("rdfs:range", _res(_DATATYPE_RESOURCE[p.range]))
        w.close("owl:DatatypeProperty")

    for r in ont.restrictions:
        w.open("owl:Restriction")
        w.empty("onto:restricts", _res(r.subject_class))
        w.empty("owl:onProperty", _res(r.on_property))
        card = r.cardinality
        nni = {"rdf:datatype": "xsd:nonNegativeInteger"}
        if card.kind == "exact":
            w.text_element("owl:qualifiedCardinality", str(card.low), nni)
        elif card.kind == "min":
            w.text_element("owl:minQualifiedCardinality", str(card.low), nni)
        elif card.kind == "max":
            w.text_element("owl:maxQualifiedCardinality", str(card.low), nni)
        else:
            w.text_element("owl:minQualifiedCardinality", str(card.low), nni)
            w.text_element("owl:maxQualifiedCardinality", str(card.high), nni)
        if r.on_class is not None:
            w.empty("owl:onClass", _res(r.on_class))
        if r.on_data_range is not None:
            w.empty("owl:onDataRange", _res(_DATATYPE_RESOURCE[r.on_data_range]))
        w.close("owl:Restriction")

    for ind in ont.individuals:
        w.open("owl:NamedIndividual", {"rdf:about": str(ind.iri)})
        for t in ind.types:
            w.empty("rdf:type", _res(t))
        for a in ind.data_assertions:
            w.text_element("onto:data", a.value, {"onto:property": str(a.property), "onto:datatype": a.datatype})
        for a in ind.object_assertions:
            w.empty("onto:object", {"onto:property": str(a.property), "rdf:resource": str(a.target)})
        if ind.text_content is not None:
            w.text_element("onto:text", ind.text_content)
        _annotation_lines(w, ind.annotations)
        w.close("owl:NamedIndividual")

    for c in ont.classes:
        w.open("owl:Class", {"rdf:about": str(c.iri)})
        for s in c.superclasses:
            w.empty("rdfs:subClassOf", _res(s))
        _annotation_lines(w, c.annotations)
        w.close("owl:Class")

    w.close("rdf:RDF")
    return w.getvalue()


_PART_ORDER = {
    "Ontology": 0,
    "ObjectProperty": 1,
    "DatatypeProperty": 2,
    "Restriction": 3,
    "NamedIndividual": 4,
    "Class": 5,
}


def _iri(text: Optional[str], path: str) -> Iri:
    if not text:
        raise InvariantViolation("missing IRI", path)
    try:
        return Iri.parse(text)
    except ValueError as exc:
        raise InvariantViolation(str(exc), path) from None


def _child_map(node: "xmlio.Node", path: str) -> list:
    return [c for c in node.children if c.namespace in (RDF_NS, RDFS_NS, OWL_NS, ONTO_NS)]


def _attr(node: "xmlio.Node", ns: str, local: str) -> Optional[str]:
    return node.get(ns, local)


def parse_builder(data: bytes) -> OntologyBuilder:
    """Parse the dialect into a builder without running the final validation."""
    try:
        root = xmlio.parse(data, strip_blank=False)
    except xmlio.XmlSyntaxError as exc:
        raise MalformedXml(str(exc)) from None
    if (root.namespace, root.local) != (RDF_NS, "RDF"):
        raise InvariantViolation("root element must be rdf:RDF", "/")
    namespaces = [(p, u) for p, u in root.nsdecls if p and p not in BUILTIN_NAMESPACES]
    header = None
    header_annotations: list = []
    body: list = []
    last_part = -1
    for idx, node in enumerate(root.children):
        path = f"/rdf:RDF/*[{idx + 1}]"
        if node.namespace not in (OWL_NS,) or node.local not in _PART_ORDER:
            raise InvariantViolation(f"unexpected element {{{node.namespace}}}{node.local}", path)
        part = _PART_ORDER[node.local]
        if part < last_part:
            raise InvariantViolation(f"{node.local} block out of order", path)
        last_part = part
        if node.local == "Ontology":
            if header is not None:
                raise InvariantViolation("duplicate owl:Ontology header", path)
            header = _iri(_attr(node, RDF_NS, "about"), path)
            header_annotations = _read_annotations(node, path)
        else:
            body.append((node, path))
    if header is None:
        raise InvariantViolation("missing owl:Ontology header", "/rdf:RDF")
    try:
        b = OntologyBuilder(header, header_annotations, namespaces)
    except ValueError as exc:
        raise InvariantViolation(str(exc), "/rdf:RDF") from None
    for node, path in body:
        try:
            _read_member(b, node, path)
        except ValueError as exc:
            raise InvariantViolation(str(exc), path) from None
        except DuplicateIri as exc:
            raise InvariantViolation(str(exc), path) from None
    return b


def _read_annotations(node: "xmlio.Node", path: str) -> list:
    out = []
    for c in node.children:
        if (c.namespace, c.local) == (ONTO_NS, "annotation"):
            key = c.get(ONTO_NS, "key")
            if key is None:
                raise InvariantViolation("annotation without onto:key", path)
            out.append((key, c.text or ""))
    return out


def _resource(node: "xmlio.Node", path: str) -> str:
    value = node.get(RDF_NS, "resource")
    if value is None:
        raise InvariantViolation(f"{node.local} lacks rdf:resource", path)
    return value


def _datatype(resource: str, path: str) -> str:
    if resource not in _RESOURCE_DATATYPE:
        raise InvariantViolation(f"unknown datatype resource {resource}", path)
    return _RESOURCE_DATATYPE[resource]


def _read_member(b: OntologyBuilder, node: "xmlio.Node", path: str) -> None:
    kind = node.local
    if kind == "Restriction":
        fields: dict = {}
        for c in node.children:
            tag = c.local
            if tag == "restricts":
                fields["subject"] = _iri(_resource(c, path), path)
            elif tag == "onProperty":
                fields["prop"] = _iri(_resource(c, path), path)
            elif tag in ("qualifiedCardinality", "minQualifiedCardinality", "maxQualifiedCardinality"):
                try:
                    fields[tag] = int((c.text or "").strip())
                except ValueError:
                    raise InvariantViolation(f"non-integer {tag}", path) from None
            elif tag == "onClass":
                fields["on_class"] = _iri(_resource(c, path), path)
            elif tag == "onDataRange":
                fields["on_data_range"] = _datatype(_resource(c, path), path)
            else:
                raise InvariantViolation(f"unexpected restriction field {tag}", path)
        if "subject" not in fields or "prop" not in fields:
            raise InvariantViolation("restriction lacks onto:restricts or owl:onProperty", path)
        lo = fields.get("minQualifiedCardinality")
        hi = fields.get("maxQualifiedCardinality")
        ex = fields.get("qualifiedCardinality")
        if ex is not None:
            if lo is not None or hi is not None:
                raise InvariantViolation("exact cardinality mixed with bounds", path)
            card = Cardinality.exact(ex)
        elif lo is not None and hi is not None:
            card = Cardinality.range(lo, hi)
        elif lo is not None:
            card = Cardinality.min(lo)
        elif hi is not None:
            card = Cardinality.max(hi)
        else:
            raise InvariantViolation("restriction without cardinality", path)
        if "on_class" in fields and "on_data_range" in fields:
            raise InvariantViolation("restriction carries both owl:onClass and owl:onDataRange", path)
        b.add_restriction(Restriction(fields["subject"], fields["prop"], card,
                                      fields.get("on_class"), fields.get("on_data_range")))
        return

    about = _iri(node.get(RDF_NS, "about"), path)
    if kind == "ObjectProperty":
        rng = None
        for c in node.children:
            if c.local == "range":
                rng = _iri(_resource(c, path), path)
        b.add_property(PropertyDecl(about, "object", rng))
    elif kind == "DatatypeProperty":
        rng = "string"
        for c in node.children:
            if c.local == "range":
                rng = _datatype(_resource(c, path), path)
        b.add_property(PropertyDecl(about, "data", rng))
    elif kind == "Class":
        supers = [_iri(_resource(c, path), path) for c in node.children if c.local == "subClassOf"]
        b.add_class(OntoClass(about, tuple(supers), tuple(_read_annotations(node, path))))
    elif kind == "NamedIndividual":
        types, data, objs, text = [], [], [], None
        for c in node.children:
            if c.local == "type" and c.namespace == RDF_NS:
                types.append(_iri(_resource(c, path), path))
            elif c.local == "data":
                prop = _iri(c.get(ONTO_NS, "property"), path)
                data.append(DataAssertion(prop, c.text or "", c.get(ONTO_NS, "datatype") or "string"))
            elif c.local == "object":
                prop = _iri(c.get(ONTO_NS, "property"), path)
                objs.append(ObjectAssertion(prop, _iri(_resource(c, path), path)))
            elif c.local == "text":
                text = c.text or ""
        b.add_individual(NamedIndividual(about, tuple(types), tuple(data), tuple(objs), text,
                                         tuple(_read_annotations(node, path))))


def parse(data: bytes) -> Ontology:
    return parse_builder(data).build()


# ---------------------------------------------------------------------------
# diff


@dataclass(frozen=True, order=True)
class Difference:
    kind: str  # header | namespace | class | subclass | object_property | data_property | restriction | individual | order
    side: str  # only-in-a | only-in-b
    name: str
    location: str = ""

    def record(self) -> dict:
        return {"kind": self.kind, "side": self.side, "name": self.name, "location": self.location}


def _individual_key(ind: NamedIndividual) -> tuple:
    return (
        str(ind.iri),
        tuple(map(str, ind.types)),
        tuple((str(a.property), a.value, a.datatype) for a in ind.data_assertions),
        tuple((str(a.property), str(a.target)) for a in ind.object_assertions),
        ind.text_content,
        ind.annotations,
    )


def _set_diff(kind: str, a: Sequence, b: Sequence, render=str) -> Iterator[Difference]:
    sa, sb = set(a), set(b)
    for item in a:
        if item not in sb:
            yield Difference(kind, "only-in-a", render(item))
    for item in b:
        if item not in sa:
            yield Difference(kind, "only-in-b", render(item))


def diff(a: Ontology, b: Ontology) -> list:
    """Structural differences; empty exactly when both serialize to the same bytes."""
    out: list = []
    out += _set_diff("header", [(str(a.header_iri), a.annotations)], [(str(b.header_iri), b.annotations)],
                     lambda h: h[0])
    out += _set_diff("namespace", list(a.namespaces), list(b.namespaces), lambda n: f"{n[0]}={n[1]}")
    out += _set_diff("class", [(c.iri, c.annotations) for c in a.classes],
                     [(c.iri, c.annotations) for c in b.classes], lambda c: str(c[0]))
    # edges of a class missing on one side are already covered by its class record
    shared = a.class_map.keys() & b.class_map.keys()
    out += _set_diff("subclass", [e for e in a.subclass_edges() if e[0] in shared],
                     [e for e in b.subclass_edges() if e[0] in shared], lambda e: f"{e[0]} < {e[1]}")
    out += _set_diff("object_property", [(p.iri, p.range) for p in a.object_properties()],
                     [(p.iri, p.range) for p in b.object_properties()], lambda p: str(p[0]))
    out += _set_diff("data_property", [(p.iri, p.range) for p in a.data_properties()],
                     [(p.iri, p.range) for p in b.data_properties()], lambda p: str(p[0]))
    out += _set_diff("restriction", list(a.restrictions), list(b.restrictions), lambda r: r.describe())
    out += _set_diff("individual", [_individual_key(i) for i in a.individuals],
                     [_individual_key(i) for i in b.individuals], lambda k: k[0])
    if not out:
        # same members; declaration order is still observable in the file
        parts = {
            "namespaces": (a.namespaces, b.namespaces),
            "classes": ([(c.iri, c.superclasses) for c in a.classes], [(c.iri, c.superclasses) for c in b.classes]),
            "object_properties": ([p.iri for p in a.object_properties()], [p.iri for p in b.object_properties()]),
            "data_properties": ([p.iri for p in a.data_properties()], [p.iri for p in b.data_properties()]),
            "restrictions": ([r.key() for r in a.restrictions], [r.key() for r in b.restrictions]),
            "individuals": ([i.iri for i in a.individuals], [i.iri for i in b.individuals]),
        }
        for name, (xa, xb) in parts.items():
            if list(xa) != list(xb):
                out.append(Difference("order", "only-in-a", name))
                out.append(Difference("order", "only-in-b", name))
    return out
