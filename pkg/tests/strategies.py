"""Hypothesis strategies producing BPMN-shaped XML text.

Documents are rendered with the writer conventions the serializer uses
(double-quoted attributes, ``<a/>`` for empty elements, ``&lt; &gt; &amp;``
in text), so an unmodified parse must reproduce them byte for byte.
"""
from hypothesis import strategies as st

MODEL = "http://www.omg.org/spec/BPMN/20100524/MODEL"
DI = "http://www.omg.org/spec/BPMN/20100524/DI"
VENDOR = "http://vendor.example/ext"

TAGS = ["process", "task", "startEvent", "sequenceFlow", "lane", "documentation", "extensionElements"]
VENDOR_TAGS = ["prop", "listener", "meta"]
ATTRS = ["name", "sourceRef", "targetRef", "processRef", "isExecutable", "count"]


def _esc_text(s):
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace("\r", "&#13;")


def _esc_attr(s):
    return (s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
            .replace("\n", "&#10;").replace("\r", "&#13;").replace("\t", "&#9;"))


text_chars = st.characters(min_codepoint=0x20, max_codepoint=0x2FF) | st.sampled_from(list("\t\n\r &<>\""))
words = st.text(alphabet=text_chars, min_size=1, max_size=12)
blank = st.sampled_from(["\n  ", "\n    ", " ", "\n"])


@st.composite
def documents(draw, max_nodes=14):
    """XML text of a definitions document with nested, partially referencing elements."""
    count = [0]
    ids = []
    default_ns = draw(st.booleans())
    model_prefix = "" if default_ns else draw(st.sampled_from(["bpmn2", "bpmn", "semantic"]))

    def name(ns_kind, local):
        if ns_kind == "vendor":
            return f"v:{local}"
        return f"{model_prefix}:{local}" if model_prefix else local

    def element(depth, ns_kind):
        count[0] += 1
        local = draw(st.sampled_from(VENDOR_TAGS if ns_kind == "vendor" else TAGS))
        attrs = []
        if draw(st.booleans()):
            ident = f"id_{count[0]}"
            ids.append(ident)
            attrs.append(("id", ident))
        for a in draw(st.lists(st.sampled_from(ATTRS), max_size=3, unique=True)):
            if a.endswith("Ref") and ids and draw(st.booleans()):
                attrs.append((a, draw(st.sampled_from(ids))))
            else:
                attrs.append((a, draw(words)))
        if ns_kind == "model" and draw(st.integers(0, 5)) == 0:
            attrs.append(("v:flag", draw(words)))
        children = []
        if depth < 3:
            for _ in range(draw(st.integers(0, 3))):
                if count[0] >= max_nodes:
                    break
                kind = "vendor" if ns_kind == "vendor" or draw(st.integers(0, 4)) == 0 else "model"
                children.append(element(depth + 1, kind))
        tag = name(ns_kind, local)
        start = "<" + " ".join([tag] + [f'{k}="{_esc_attr(v)}"' for k, v in attrs])
        if not children:
            body = draw(st.none() | words)
            if body is None:
                return start + "/>"
            return f"{start}>{_esc_text(body)}</{tag}>"
        mixed = draw(st.integers(0, 4)) == 0
        parts = [start + ">"]
        for c in children:
            parts.append(_esc_text(draw(words)) if mixed else draw(blank))
            parts.append(c)
        parts.append(draw(blank))
        parts.append(f"</{tag}>")
        return "".join(parts)

    root_tag = "definitions"
    decls = (f'xmlns="{MODEL}"' if default_ns else f'xmlns:{model_prefix}="{MODEL}"') + f' xmlns:v="{VENDOR}"'
    body = []
    for _ in range(draw(st.integers(0, 3))):
        if count[0] >= max_nodes:
            break
        body.append(draw(blank))
        body.append(element(1, "model"))
    body.append("\n" if body else "")
    qualified = name("model", root_tag)
    declaration = draw(st.sampled_from(['<?xml version="1.0" encoding="UTF-8"?>\n', ""]))
    root = f'<{qualified} {decls} id="defs" targetNamespace="urn:t">' if body != [""] else None
    if root is None:
        return f'{declaration}<{qualified} {decls} id="defs" targetNamespace="urn:t"/>\n'
    return f"{declaration}{root}{''.join(body)}</{qualified}>\n"
