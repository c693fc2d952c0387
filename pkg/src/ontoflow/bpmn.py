"""Typed, id-indexed BPMN 2.0 XML documents.

Parsing keeps the whole tree, BPMNDI and vendor subtrees included, with
the prefixes, attribute order and inter-element whitespace the file used.
Serialization writes them back verbatim; :func:`canonicalize` gives the
order/prefix/whitespace-insensitive form used for round-trip comparison.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

from ontoflow import xmlio
from ontoflow.errors import OntoflowError

MODEL_NS = "http://www.omg.org/spec/BPMN/20100524/MODEL"
DI_NS = "http://www.omg.org/spec/BPMN/20100524/DI"
DC_NS = "http://www.omg.org/spec/DD/20100524/DC"
DD_DI_NS = "http://www.omg.org/spec/DD/20100524/DI"
XSI_NS = "http://www.w3.org/2001/XMLSchema-instance"
XML_NS = xmlio.XML_NS

# The namespaces that count for conformance, with the ontology alias for each.
CONFORMANCE_NAMESPACES = {
    MODEL_NS: "bpmn2",
    DI_NS: "bpmndi",
}

# Attributes that carry id references in the conformance namespaces.
_REFERENCE_ATTRIBUTES = {"default", "bpmnElement", "sourceElement", "targetElement", "labelStyle"}


class BpmnError(OntoflowError):
    pass


class MalformedXml(BpmnError):
    pass


class RootNotDefinitions(BpmnError):
    pass


class DuplicateId(BpmnError):
    def __init__(self, id_value: str, path: str = ""):
        self.id = id_value
        super().__init__(f"duplicate id {id_value!r}" + (f" at {path}" if path else ""))


@dataclass(frozen=True, order=True)
class QName:
    namespace_uri: str
    local: str

    def __str__(self) -> str:
        return f"{{{self.namespace_uri}}}{self.local}" if self.namespace_uri else self.local


@dataclass(frozen=True)
class BpmnAttribute:
    qname: QName
    value: str
    prefix: str = ""


@dataclass(frozen=True)
class BpmnElement:
    qname: QName
    prefix: str = ""
    attributes: tuple = ()
    children: tuple = ()
    text: Optional[str] = None
    tail: Optional[str] = None
    nsdecls: tuple = ()

    @property
    def local(self) -> str:
        return self.qname.local

    @property
    def namespace(self) -> str:
        return self.qname.namespace_uri

    @property
    def id(self) -> Optional[str]:
        return self.get("id")

    def get(self, local: str, namespace: str = "") -> Optional[str]:
        for a in self.attributes:
            if a.qname.local == local and a.qname.namespace_uri == namespace:
                return a.value
        return None

    def find_children(self, local: str, namespace: str = MODEL_NS) -> list:
        return [c for c in self.children if c.qname == QName(namespace, local)]

    def written_name(self) -> str:
        return f"{self.prefix}:{self.local}" if self.prefix else self.local


@dataclass(frozen=True)
class BpmnDocument:
    root: BpmnElement
    namespace_map: dict = field(default_factory=dict)
    id_index: dict = field(default_factory=dict)
    declaration: Optional[str] = None  # None: emit the default declaration

    def element_at(self, path: tuple) -> BpmnElement:
        node = self.root
        for i in path:
            node = node.children[i]
        return node

    def walk(self) -> Iterator[tuple]:
        """Yield ``(path, element)`` in document order."""
        stack = [((), self.root)]
        while stack:
            path, el = stack.pop()
            yield path, el
            for i in range(len(el.children) - 1, -1, -1):
                stack.append((path + (i,), el.children[i]))

    def parent_of(self, path: tuple) -> Optional[BpmnElement]:
        return self.element_at(path[:-1]) if path else None

    def describe_path(self, path: tuple) -> str:
        return describe_path(self.root, path)

    def external_references(self) -> list:
        """(path, attribute local name, value) for id-typed attributes that do not resolve."""
        out = []
        for path, el in self.walk():
            if el.namespace not in CONFORMANCE_NAMESPACES:
                continue
            for a in el.attributes:
                if a.qname.namespace_uri not in ("", el.namespace):
                    continue
                name = a.qname.local
                if (name.endswith("Ref") or name in _REFERENCE_ATTRIBUTES) and a.value not in self.id_index:
                    out.append((path, name, a.value))
        return out


def describe_path(root: BpmnElement, path: tuple) -> str:
    parts = [f"/{root.local}"]
    node = root
    for i in path:
        child = node.children[i]
        same = [c for c in node.children[: i + 1] if c.qname == child.qname]
        parts.append(f"/{child.local}[{len(same)}]")
        node = child
    return "".join(parts)


def _convert(node: xmlio.Node) -> BpmnElement:
    return BpmnElement(
        qname=QName(node.namespace, node.local),
        prefix=node.prefix,
        attributes=tuple(BpmnAttribute(QName(a.namespace, a.local), a.value, a.prefix) for a in node.attrs),
        children=tuple(_convert(c) for c in node.children),
        text=node.text,
        tail=node.tail,
        nsdecls=tuple(node.nsdecls),
    )


def build_document(root: BpmnElement, declaration: Optional[str] = None) -> BpmnDocument:
    """Index ``root`` into a document, enforcing the definitions-root and unique-id rules."""
    if root.local != "definitions":
        raise RootNotDefinitions(f"root element is {root.local!r}, expected definitions")
    namespace_map: dict = {}
    id_index: dict = {}
    doc = BpmnDocument(root, namespace_map, id_index, declaration)
    for path, el in doc.walk():
        for prefix, uri in el.nsdecls:
            namespace_map.setdefault(prefix, uri)
        ident = el.id
        if ident is not None:
            if ident in id_index:
                raise DuplicateId(ident, describe_path(root, path))
            id_index[ident] = path
    return doc


def parse_bpmn(data: bytes) -> BpmnDocument:
    try:
        node = xmlio.parse(data, strip_blank=False)
    except xmlio.XmlSyntaxError as exc:
        raise MalformedXml(str(exc)) from None
    return build_document(_convert(node), node.declaration)


def resolve_reference(doc: BpmnDocument, value: str) -> Optional[BpmnElement]:
    path = doc.id_index.get(value)
    return None if path is None else doc.element_at(path)


# ---------------------------------------------------------------------------
# serialization


def _attr_name(a: BpmnAttribute) -> str:
    return f"{a.prefix}:{a.qname.local}" if a.prefix else a.qname.local


def _start_tag(el: BpmnElement) -> str:
    parts = [el.written_name()]
    for prefix, uri in el.nsdecls:
        parts.append(f'xmlns:{prefix}="{xmlio.escape_attr(uri)}"' if prefix else f'xmlns="{xmlio.escape_attr(uri)}"')
    for a in el.attributes:
        parts.append(f'{_attr_name(a)}="{xmlio.escape_attr(a.value)}"')
    return "<" + " ".join(parts)


def _blank(text: Optional[str]) -> bool:
    return text is None or not text.strip()


def _has_mixed_content(el: BpmnElement) -> bool:
    return not _blank(el.text) or any(not _blank(c.tail) for c in el.children)


def _write_inline(el: BpmnElement, out: list, keep_blank: bool = True) -> None:
    def chars(t: Optional[str]) -> None:
        if t is not None and (keep_blank or not _blank(t)):
            out.append(xmlio.escape_text(t))

    start = _start_tag(el)
    if not el.children and el.text is None:
        out.append(start + "/>")
        return
    out.append(start + ">")
    chars(el.text)
    for c in el.children:
        _write_inline(c, out, keep_blank)
        chars(c.tail)
    out.append(f"</{el.written_name()}>")


def _write_pretty(el: BpmnElement, depth: int, out: list) -> None:
    pad = "  " * depth
    if _has_mixed_content(el) or not el.children:
        chunk: list = []
        _write_inline(el, chunk, keep_blank=_has_mixed_content(el))
        out.append(pad + "".join(chunk) + "\n")
        return
    out.append(pad + _start_tag(el) + ">\n")
    for c in el.children:
        _write_pretty(c, depth + 1, out)
    out.append(f"{pad}</{el.written_name()}>\n")


DEFAULT_DECLARATION = '<?xml version="1.0" encoding="UTF-8"?>'


def serialize_bpmn(doc: BpmnDocument, pretty: bool = False) -> bytes:
    """Write ``doc`` back out.

    By default text and whitespace are emitted exactly as stored, so an
    unmodified parse reproduces the input file. ``pretty`` re-indents and
    drops whitespace-only text outside mixed content.
    """
    decl = DEFAULT_DECLARATION if doc.declaration is None else doc.declaration
    out = [decl + "\n"] if decl else []
    if pretty:
        _write_pretty(doc.root, 0, out)
    else:
        _write_inline(doc.root, out)
        out.append("\n")
    return "".join(out).encode("utf-8")


def canonicalize(doc: BpmnDocument) -> bytes:
    """Deterministic form: sorted attributes, fixed ``nsN`` prefixes, blank text dropped.

    Element order is kept. Each element without mixed content starts on its
    own line, so a line diff points at the first differing element.
    """
    prefixes: dict = {}

    def note(uri: str) -> None:
        if uri and uri != XML_NS and uri not in prefixes:
            prefixes[uri] = f"ns{len(prefixes)}"

    for _, el in doc.walk():
        note(el.namespace)
        for a in sorted(el.attributes, key=lambda a: (a.qname.namespace_uri, a.qname.local)):
            note(a.qname.namespace_uri)

    def name(q: QName) -> str:
        if not q.namespace_uri:
            return q.local
        if q.namespace_uri == XML_NS:
            return f"xml:{q.local}"
        return f"{prefixes[q.namespace_uri]}:{q.local}"

    def start(el: BpmnElement, root: bool) -> str:
        parts = [name(el.qname)]
        if root:
            parts += [f'xmlns:{p}="{xmlio.escape_attr(u)}"' for u, p in prefixes.items()]
        for a in sorted(el.attributes, key=lambda a: (a.qname.namespace_uri, a.qname.local)):
            parts.append(f'{name(a.qname)}="{xmlio.escape_attr(a.value)}"')
        return "<" + " ".join(parts) + ">"

    def text(t: Optional[str]) -> str:
        return "" if _blank(t) else xmlio.escape_text(t).replace("\n", "&#10;")

    def inline(el: BpmnElement, root: bool) -> str:
        body = [start(el, root), text(el.text)]
        for c in el.children:
            body.append(inline(c, False))
            body.append(text(c.tail))
        body.append(f"</{name(el.qname)}>")
        return "".join(body)

    lines: list = []

    def emit(el: BpmnElement, root: bool) -> None:
        if _has_mixed_content(el) or not el.children:
            lines.append(inline(el, root))
            return
        lines.append(start(el, root))
        for c in el.children:
            emit(c, False)
        lines.append(f"</{name(el.qname)}>")

    emit(doc.root, True)
    return ("\n".join(lines) + "\n").encode("utf-8")


def first_difference(a: bytes, b: bytes, context: int = 1) -> Optional[str]:
    """Describe the first differing line region of two canonical forms, or None if equal."""
    if a == b:
        return None
    la = a.decode("utf-8").splitlines()
    lb = b.decode("utf-8").splitlines()
    n = 0
    while n < min(len(la), len(lb)) and la[n] == lb[n]:
        n += 1
    lo = max(0, n - context)
    left = "\n".join(f"  - {line}" for line in la[lo: n + context + 1])
    right = "\n".join(f"  + {line}" for line in lb[lo: n + context + 1])
    return f"first difference at canonical line {n + 1}:\n{left}\n{right}"


def with_children(el: BpmnElement, children) -> BpmnElement:
    return replace(el, children=tuple(children))
