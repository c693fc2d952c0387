"""BPMN document <-> model ontology.

Every XML node becomes a named individual of a class named after its tag;
classes nest the way the tags nest. Attributes whose value is another
element's id become object assertions, all others data assertions.

Inversion needs facts the plain ontology cannot carry (position, written
prefixes, attribute order, whitespace), so each individual is annotated:

``model:path``   dotted child-index path from the root, "" for the root
``model:tag``    element name as written, e.g. ``bpmn2:task``
``model:xmlns``  one ``prefix=uri`` per namespace declaration on the element
``model:attr``   one ``<written name> <d|o> <property>`` per attribute, in order
``model:tail``   text following the element's end tag
``model:declaration``  (root only) the XML declaration as written
"""
from __future__ import annotations

import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional

from ontoflow.bpmn import (
    CONFORMANCE_NAMESPACES,
    DC_NS,
    DD_DI_NS,
    DI_NS,
    MODEL_NS,
    XML_NS,
    XSI_NS,
    BpmnAttribute,
    BpmnDocument,
    BpmnElement,
    QName,
    build_document,
)
from ontoflow.errors import OntoflowError
from ontoflow.ontology import (
    BUILTIN_NAMESPACES,
    Cardinality,
    DataAssertion,
    Difference,
    Iri,
    NamedIndividual,
    ObjectAssertion,
    OntoClass,
    Ontology,
    OntologyBuilder,
    PropertyDecl,
    Restriction,
)
from ontoflow.reference import TO_STANDARD, ReferenceOntology, TranslationTable

MODEL_PREFIX = "model"
MODEL_VOCAB = "urn:ontoflow:model#"
NO_NAMESPACE = "nons"
NO_NAMESPACE_URI = "urn:ontoflow:no-namespace"
DOCUMENT_CLASS = Iri(MODEL_PREFIX, "document")
HAS_CHILD = Iri(MODEL_PREFIX, "hasChild")

_FIXED_ALIASES = {
    MODEL_NS: "bpmn2",
    DI_NS: "bpmndi",
    DC_NS: "dc",
    DD_DI_NS: "di",
    XSI_NS: "xsi",
    XML_NS: "w3xml",
}
_RESERVED = set(BUILTIN_NAMESPACES) | {MODEL_PREFIX, NO_NAMESPACE, "xml", "xmlns"} | set(_FIXED_ALIASES.values())
_ALIAS_RE = re.compile(r"^[A-Za-z_][\w.-]*$")
_INTEGER_RE = re.compile(r"^[+-]?\d+$")


class TransformError(OntoflowError):
    pass


class MissingProvenance(TransformError):
    def __init__(self, iri, what: str):
        self.iri = str(iri)
        super().__init__(f"individual {self.iri} lacks {what}; the ontology cannot be turned back into BPMN")


@dataclass(frozen=True)
class ModelOntology:
    ontology: Ontology
    provenance: dict = field(default_factory=dict)  # individual Iri -> element path

    def individual_at(self, path: tuple) -> Optional[NamedIndividual]:
        for iri, p in self.provenance.items():
            if p == path:
                return self.ontology.individual_map[iri]
        return None


def lexical_datatype(value: str) -> str:
    if value in ("true", "false"):
        return "boolean"
    if _INTEGER_RE.match(value):
        return "integer"
    return "string"


def _path_text(path: tuple) -> str:
    return ".".join(map(str, path))


def _parse_path(text: str) -> tuple:
    return tuple(int(p) for p in text.split(".")) if text else ()


class _Aliases:
    """Namespace URI -> ontology prefix, stable across the document."""

    def __init__(self, doc: BpmnDocument):
        self.by_uri: dict = {"": NO_NAMESPACE}
        self._written: dict = {}
        for _, el in doc.walk():
            for prefix, uri in el.nsdecls:
                if prefix and uri not in self._written:
                    self._written[uri] = prefix

    def __call__(self, uri: str) -> str:
        alias = self.by_uri.get(uri)
        if alias is not None:
            return alias
        alias = _FIXED_ALIASES.get(uri)
        if alias is None:
            taken = set(self.by_uri.values())
            written = self._written.get(uri, "")
            if _ALIAS_RE.match(written) and written not in _RESERVED and written not in taken:
                alias = written
            else:
                k = 0
                while f"ns{k}" in taken or f"ns{k}" in _RESERVED:
                    k += 1
                alias = f"ns{k}"
        self.by_uri[uri] = alias
        return alias


def bpmn_to_owl(doc: BpmnDocument) -> ModelOntology:
    alias = _Aliases(doc)
    nodes = list(doc.walk())

    def class_iri(el: BpmnElement) -> Iri:
        return Iri(alias(el.namespace), el.local)

    def prop_iri(el: BpmnElement, a: BpmnAttribute) -> Iri:
        ns = a.qname.namespace_uri or el.namespace
        return Iri(alias(ns), a.qname.local)

    # individual names, dense per tag in document order
    counters: Counter = Counter()
    ind_of: dict = {}
    for path, el in nodes:
        cls = class_iri(el)
        counters[cls] += 1
        ind_of[path] = Iri(cls.prefix, f"{cls.local}_{counters[cls]}")

    def target(el: BpmnElement, value: str) -> Optional[tuple]:
        hit = doc.id_index.get(value)
        if hit is None or doc.element_at(hit) is el:
            return None
        return hit

    # property kinds: object as soon as one occurrence references another element
    object_props: set = set()
    data_types: dict = defaultdict(set)
    prop_order: list = []
    for path, el in nodes:
        for a in el.attributes:
            p = prop_iri(el, a)
            if p not in data_types and p not in object_props:
                prop_order.append(p)
            if target(el, a.value) is not None:
                object_props.add(p)
            data_types[p].add(lexical_datatype(a.value))

    # a data property keeps a narrower datatype only if every value agrees on it
    ranges = {p: next(iter(data_types[p])) if len(data_types[p]) == 1 else "string" for p in prop_order}

    header_local = doc.root.id if doc.root.id and re.match(r"^\S+$", doc.root.id) else "document"
    b = OntologyBuilder(Iri(MODEL_PREFIX, header_local), annotations=[("generator", "ontoflow bpmn_to_owl")])

    # classes and nesting edges
    b._classes[DOCUMENT_CLASS] = OntoClass(DOCUMENT_CLASS)
    for path, el in nodes:
        cls = class_iri(el)
        parent = class_iri(doc.element_at(path[:-1])) if path else DOCUMENT_CLASS
        if cls not in b._classes:
            b._classes[cls] = OntoClass(cls, (parent,))
        else:
            # an edge that would close a cycle (recursive nesting) is left out
            b.add_superclass(cls, parent)

    b._properties[HAS_CHILD] = PropertyDecl(HAS_CHILD, "object")
    for p in prop_order:
        b._properties[p] = PropertyDecl(p, "object") if p in object_props else PropertyDecl(p, "data", ranges[p])

    provenance: dict = {}
    for path, el in nodes:
        data, objs, notes = [], [], [("model:path", _path_text(path)), ("model:tag", el.written_name())]
        if not path and doc.declaration is not None:
            notes.append(("model:declaration", doc.declaration))
        for prefix, uri in el.nsdecls:
            notes.append(("model:xmlns", f"{prefix}={uri}"))
        for a in el.attributes:
            p = prop_iri(el, a)
            written = f"{a.prefix}:{a.qname.local}" if a.prefix else a.qname.local
            hit = target(el, a.value)
            if hit is not None:
                objs.append(ObjectAssertion(p, ind_of[hit]))
                notes.append(("model:attr", f"{written} o {p}"))
            else:
                dtype = "idref" if p in object_props else ranges[p]
                data.append(DataAssertion(p, a.value, dtype))
                notes.append(("model:attr", f"{written} d {p}"))
        for i in range(len(el.children)):
            objs.append(ObjectAssertion(HAS_CHILD, ind_of[path + (i,)]))
        if el.tail is not None:
            notes.append(("model:tail", el.tail))
        iri = ind_of[path]
        b._individuals[iri] = NamedIndividual(iri, (class_iri(el),), tuple(data), tuple(objs), el.text, tuple(notes))
        provenance[iri] = path

    # observed cardinalities, per class
    members: dict = defaultdict(list)
    for path, el in nodes:
        members[class_iri(el)].append(el)
    for cls, els in members.items():
        slots: dict = {}
        for el in els:
            for a in el.attributes:
                slots.setdefault(("attr", prop_iri(el, a)), None)
            for c in el.children:
                slots.setdefault(("child", class_iri(c)), None)
        for kind, key in slots:
            if kind == "attr":
                counts = [sum(1 for a in el.attributes if prop_iri(el, a) == key) for el in els]
            else:
                counts = [sum(1 for c in el.children if class_iri(c) == key) for el in els]
            lo, hi = min(counts), max(counts)
            card = Cardinality.exact(lo) if lo == hi else Cardinality.range(lo, hi)
            if kind == "attr":
                dr = "idref" if key in object_props else ranges[key]
                b.add_restriction(Restriction(cls, key, card, on_data_range=dr))
            else:
                b.add_restriction(Restriction(cls, HAS_CHILD, card, on_class=key))

    used = {i.prefix for i in b._classes} | {p.prefix for p in b._properties} | {i.prefix for i in b._individuals}
    b.add_namespace(MODEL_PREFIX, MODEL_VOCAB)
    for uri, a in alias.by_uri.items():
        if a in used:
            b.add_namespace(a, NO_NAMESPACE_URI if uri == "" else uri)
    return ModelOntology(b.build(), provenance)


def model_from_ontology(ont: Ontology) -> ModelOntology:
    """Rebuild provenance from ``model:path`` annotations (e.g. after reading a ``.owl`` file)."""
    provenance = {}
    for ind in ont.individuals:
        path = ind.annotation("model:path")
        if path is None:
            raise MissingProvenance(ind.iri, "model:path")
        try:
            provenance[ind.iri] = _parse_path(path)
        except ValueError:
            raise MissingProvenance(ind.iri, "a well-formed model:path") from None
    return ModelOntology(ont, provenance)


def _resolve_prefix(prefix: str, scopes: list, iri) -> str:
    if prefix == "xml":
        return XML_NS
    for decls in reversed(scopes):
        if prefix in decls:
            return decls[prefix]
    if prefix == "":
        return ""
    raise MissingProvenance(iri, f"a namespace declaration for prefix {prefix!r}")


def owl_to_bpmn(model: "ModelOntology | Ontology") -> BpmnDocument:
    if isinstance(model, Ontology):
        model = model_from_ontology(model)
    ont = model.ontology
    by_path: dict = {}
    for ind in ont.individuals:
        path = model.provenance.get(ind.iri)
        if path is None:
            raise MissingProvenance(ind.iri, "a recorded element path")
        if ind.annotation("model:tag") is None:
            raise MissingProvenance(ind.iri, "model:tag")
        if path in by_path:
            raise MissingProvenance(ind.iri, f"a unique path (clashes with {by_path[path].iri})")
        by_path[path] = ind
    if () not in by_path:
        raise MissingProvenance("root", "an individual at the root path")

    children: dict = defaultdict(list)
    for path in by_path:
        if path:
            if path[:-1] not in by_path:
                raise MissingProvenance(by_path[path].iri, "a parent individual")
            children[path[:-1]].append(path)

    # id values, needed to turn object assertions back into attribute text
    id_of: dict = {}
    for ind in ont.individuals:
        data = iter(ind.data_assertions)
        for note in ind.annotation_values("model:attr"):
            written, kind, _ = note.split(" ", 2)
            if kind == "d":
                value = next(data).value
                if written == "id":
                    id_of[ind.iri] = value

    def build(path: tuple, scopes: list) -> BpmnElement:
        ind = by_path[path]
        decls = {}
        nsdecls = []
        for note in ind.annotation_values("model:xmlns"):
            prefix, _, uri = note.partition("=")
            decls[prefix] = uri
            nsdecls.append((prefix, uri))
        scopes = scopes + [decls]
        tag = ind.annotation("model:tag")
        prefix, _, local = tag.rpartition(":")
        qname = QName(_resolve_prefix(prefix, scopes, ind.iri), local)
        data = iter(ind.data_assertions)
        objs = iter(a for a in ind.object_assertions if a.property != HAS_CHILD)
        attrs = []
        try:
            for note in ind.annotation_values("model:attr"):
                written, kind, _ = note.split(" ", 2)
                if kind == "d":
                    value = next(data).value
                else:
                    tgt = next(objs).target
                    if tgt not in id_of:
                        raise MissingProvenance(tgt, "an id attribute to reference")
                    value = id_of[tgt]
                aprefix, _, alocal = written.rpartition(":")
                ans = _resolve_prefix(aprefix, scopes, ind.iri) if aprefix else ""
                attrs.append(BpmnAttribute(QName(ans, alocal), value, aprefix))
        except (StopIteration, ValueError):
            raise MissingProvenance(ind.iri, "assertions matching its model:attr annotations") from None
        kids = tuple(build(p, scopes) for p in sorted(children[path]))
        return BpmnElement(qname, prefix, tuple(attrs), kids, ind.text_content, ind.annotation("model:tail"),
                           tuple(nsdecls))

    root_ind = by_path[()]
    return build_document(build((), []), root_ind.annotation("model:declaration"))


# ---------------------------------------------------------------------------
# comparison against the reference


def standard_class_name(table: TranslationTable, local: str, parent_locals: list) -> str:
    scopes = [table.translate(p, TO_STANDARD) for p in parent_locals]
    return table.translate(local, TO_STANDARD, scopes)


def compare_to_reference(model: ModelOntology, ref: ReferenceOntology, table: TranslationTable) -> list:
    """Differences between the conformance-namespace part of ``model`` and ``ref``.

    only-in-a: model classes/properties the reference lacks (after
    translating serialized names to standard names); only-in-b: reference
    classes the model never instantiates.
    """
    ont = model.ontology
    ref_ont = ref.ontology
    conformance = set(CONFORMANCE_NAMESPACES.values())
    first_path: dict = {}
    for ind in ont.individuals:
        for t in ind.types:
            first_path.setdefault(t, model.provenance.get(ind.iri, ()))

    doc_inds = {path: ont.individual_map[iri] for iri, path in model.provenance.items()}

    def where(cls: Iri) -> str:
        path = first_path.get(cls)
        if path is None:
            return ""
        parts = []
        for depth in range(len(path) + 1):
            cur = path[:depth]
            ind = doc_inds.get(cur)
            if ind is None:
                return ""
            kind = ind.types[0]
            if cur:
                same = [p for p in doc_inds if len(p) == depth and p[:-1] == cur[:-1]
                        and p[-1] <= cur[-1] and doc_inds[p].types[0] == kind]
                parts.append(f"/{kind.local}[{len(same)}]")
            else:
                parts.append(f"/{kind.local}")
        return "".join(parts)

    out = []
    used = set()
    for cls in ont.classes:
        if cls.iri.prefix not in conformance:
            continue
        parents = [s.local for s in cls.superclasses if s.prefix == cls.iri.prefix]
        std = Iri(cls.iri.prefix, standard_class_name(table, cls.iri.local, parents))
        if std in ref_ont.class_map:
            used.add(std)
        else:
            out.append(Difference("class", "only-in-a", str(cls.iri), where(cls.iri)))
    for p in ont.properties:
        if p.iri.prefix not in conformance:
            continue
        if p.iri not in ref_ont.property_map:
            kind = "object_property" if p.kind == "object" else "data_property"
            loc = ""
            for r in ont.restrictions:
                if r.on_property == p.iri:
                    loc = where(r.subject_class)
                    break
            out.append(Difference(kind, "only-in-a", str(p.iri), loc))
    for c in ref_ont.classes:
        if c.iri not in used:
            out.append(Difference("class", "only-in-b", str(c.iri), ""))
    return out
