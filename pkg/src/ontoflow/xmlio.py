"""Namespace-exact XML reading and writing on top of expat.

ElementTree discards the prefixes a document used; lossless round trips
need them, so the reader keeps each element's written prefix, its
namespace declarations, and its attribute order. DOCTYPE and entity
declarations are refused outright.
"""
from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from typing import Optional
from xml.parsers import expat

XML_NS = "http://www.w3.org/XML/1998/namespace"


class XmlSyntaxError(ValueError):
    pass


@dataclass
class Attr:
    namespace: str  # "" when unqualified
    local: str
    prefix: str
    value: str


@dataclass
class Node:
    namespace: str
    local: str
    prefix: str
    attrs: list = field(default_factory=list)
    nsdecls: list = field(default_factory=list)  # (prefix, uri); prefix "" is the default namespace
    children: list = field(default_factory=list)
    text: Optional[str] = None
    tail: Optional[str] = None
    line: int = 0
    declaration: Optional[str] = None  # root only: the XML declaration as written, "" if absent

    def get(self, namespace: str, local: str) -> Optional[str]:
        for a in self.attrs:
            if a.namespace == namespace and a.local == local:
                return a.value
        return None


def _split(name: str) -> tuple:
    parts = name.split(" ")
    if len(parts) == 3:
        return parts[0], parts[1], parts[2]
    if len(parts) == 2:
        return parts[0], parts[1], ""
    return "", parts[0], ""


def _keep(text: str) -> Optional[str]:
    return text if text.strip() else None


def parse(data: bytes, strip_blank: bool = True) -> Node:
    """Parse ``data``; whitespace-only text is dropped unless ``strip_blank`` is false."""
    parser = expat.ParserCreate(namespace_separator=" ")
    parser.namespace_prefixes = True
    parser.ordered_attributes = True
    parser.buffer_text = True
    parser.SetParamEntityParsing(expat.XML_PARAM_ENTITY_PARSING_NEVER)

    stack: list = []
    pending_ns: list = []
    result: list = []
    decl: list = []
    # text chunks collected since the last tag boundary
    chunks: list = []

    def flush() -> Optional[str]:
        text = "".join(chunks)
        chunks.clear()
        if strip_blank:
            return _keep(text)
        return text or None

    def refuse(*_args):
        raise XmlSyntaxError("DTD and entity declarations are not accepted")

    def start_ns(prefix, uri):
        pending_ns.append((prefix or "", uri or ""))

    def start(name, attrs):
        text = flush()
        if stack:
            parent = stack[-1]
            if parent.children:
                parent.children[-1].tail = text
            else:
                parent.text = text
        ns, local, prefix = _split(name)
        node = Node(ns, local, prefix, line=parser.CurrentLineNumber)
        node.nsdecls = list(pending_ns)
        pending_ns.clear()
        for i in range(0, len(attrs), 2):
            ans, alocal, aprefix = _split(attrs[i])
            node.attrs.append(Attr(ans, alocal, aprefix, attrs[i + 1]))
        if stack:
            stack[-1].children.append(node)
        stack.append(node)

    def end(name):
        text = flush()
        node = stack.pop()
        if node.children:
            node.children[-1].tail = text
        else:
            node.text = text
        if not stack:
            result.append(node)

    def xml_decl(version, encoding, standalone):
        parts = [f'version="{version}"']
        if encoding:
            parts.append(f'encoding="{encoding}"')
        if standalone != -1:
            parts.append(f'standalone="{"yes" if standalone else "no"}"')
        decl.append("<?xml " + " ".join(parts) + "?>")

    def chardata(data):
        if stack:
            chunks.append(data)

    parser.StartNamespaceDeclHandler = start_ns
    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chardata
    parser.XmlDeclHandler = xml_decl
    parser.StartDoctypeDeclHandler = refuse
    parser.EntityDeclHandler = refuse
    parser.ExternalEntityRefHandler = refuse
    try:
        parser.Parse(data, True)
    except expat.ExpatError as exc:
        raise XmlSyntaxError(f"line {exc.lineno}, column {exc.offset}: {expat.ErrorString(exc.code)}") from None
    if not result:
        raise XmlSyntaxError("document has no root element")
    result[0].declaration = decl[0] if decl else ""
    return result[0]


_TEXT_ESCAPES = str.maketrans({"&": "&amp;", "<": "&lt;", ">": "&gt;", "\r": "&#13;"})
_ATTR_ESCAPES = str.maketrans({
    "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;",
    "\n": "&#10;", "\r": "&#13;", "\t": "&#9;",
})


# characters XML 1.0 cannot carry, not even as character references
_UNREPRESENTABLE = re.compile("[\x00-\x08\x0b\x0c\x0e-\x1f\ud800-\udfff\ufffe\uffff]")


class UnrepresentableText(ValueError):
    pass


def _check(text: str) -> None:
    bad = _UNREPRESENTABLE.search(text)
    if bad:
        raise UnrepresentableText(f"character U+{ord(bad.group()):04X} cannot be written in XML 1.0")


def escape_text(text: str) -> str:
    _check(text)
    return text.translate(_TEXT_ESCAPES)


def escape_attr(text: str) -> str:
    _check(text)
    return text.translate(_ATTR_ESCAPES)


def render_attrs(attrs) -> str:
    if isinstance(attrs, dict):
        attrs = attrs.items()
    return "".join(f' {k}="{escape_attr(v)}"' for k, v in attrs)


class Writer:
    """Indented element writer used for the ontology dialect."""

    def __init__(self, indent: str = "  "):
        self._buf = io.StringIO()
        self._buf.write('<?xml version="1.0" encoding="UTF-8"?>\n')
        self._indent = indent
        self._depth = 0

    def _line(self, s: str) -> None:
        self._buf.write(self._indent * self._depth + s + "\n")

    def open(self, tag: str, attrs=()) -> None:
        self._line(f"<{tag}{render_attrs(attrs)}>")
        self._depth += 1

    def close(self, tag: str) -> None:
        self._depth -= 1
        self._line(f"</{tag}>")

    def empty(self, tag: str, attrs=()) -> None:
        self._line(f"<{tag}{render_attrs(attrs)}/>")

    def text_element(self, tag: str, text: str, attrs=()) -> None:
        self._line(f"<{tag}{render_attrs(attrs)}>{escape_text(text)}</{tag}>")

    def getvalue(self) -> bytes:
        return self._buf.getvalue().encode("utf-8")
