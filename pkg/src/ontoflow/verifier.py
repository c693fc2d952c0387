"""Check BPMN documents against the reference ontology.

Three rules are applied to every element in a conformance namespace:

1. its tag, translated to a standard name, must be a reference class;
2. each of its attributes must be a declared reference property;
3. each restriction in the class's effective (inherited) set must hold.
   Restrictions without ``onClass`` are about XML attributes and also get
   a lexical datatype check; restrictions with ``onClass`` count the child
   elements whose class is ``onClass`` or one of its subclasses.

Children are visited like any other element, so a counted child is in
turn held to its own class's inherited restrictions. Elements outside the
conformance namespaces are skipped together with their subtrees.
"""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from ontoflow.bpmn import CONFORMANCE_NAMESPACES, BpmnDocument, BpmnElement, describe_path, parse_bpmn
from ontoflow.errors import OntoflowError
from ontoflow.ontology import Iri, Restriction, effective_restrictions, superclass_closure
from ontoflow.reference import TO_STANDARD, ReferenceOntology, TranslationTable

UNKNOWN_CLASS = "UnknownClass"
UNKNOWN_PROPERTY = "UnknownProperty"
RESTRICTION_VIOLATION = "RestrictionViolation"
FINDING_KINDS = (UNKNOWN_CLASS, UNKNOWN_PROPERTY, RESTRICTION_VIOLATION)

_LEXICAL = {
    "integer": re.compile(r"^[+-]?\d+$"),
    "boolean": re.compile(r"^(true|false)$"),
    "idref": re.compile(r"^\S+$"),
}


def lexically_valid(value: str, datatype: Optional[str]) -> bool:
    pattern = _LEXICAL.get(datatype or "")
    return pattern is None or bool(pattern.match(value))


@dataclass(frozen=True, order=True)
class Finding:
    kind: str
    path: str
    tag: str
    detail: str
    severity: str = "error"
    restriction: Optional[str] = None  # Restriction.describe() of the violated restriction
    expected: Optional[str] = None
    actual: Optional[int] = None

    def record(self) -> dict:
        return {
            "kind": self.kind,
            "severity": self.severity,
            "path": self.path,
            "tag": self.tag,
            "detail": self.detail,
            "restriction": self.restriction,
            "expected": self.expected,
            "actual": self.actual,
        }


@dataclass(frozen=True)
class VerificationReport:
    model_id: str
    reference_version: str
    findings: tuple = ()

    @property
    def counters(self) -> dict:
        counts = Counter(f.kind for f in self.findings)
        return {k: counts.get(k, 0) for k in FINDING_KINDS}

    @property
    def errors(self) -> list:
        return [f for f in self.findings if f.severity == "error"]

    @property
    def passed(self) -> bool:
        return not self.errors


class VerifierConfigError(OntoflowError):
    pass


def _severity(overrides: Mapping, kind: str, std_class: Iri) -> str:
    """Most specific override wins: ``Kind@bpmn2:Class``, then ``Kind@Class``, then ``Kind``."""
    level = overrides.get(f"{kind}@{std_class}",
                          overrides.get(f"{kind}@{std_class.local}", overrides.get(kind, "error")))
    if level not in ("error", "warning"):
        raise VerifierConfigError(f"severity for {kind} must be error or warning, got {level!r}")
    return level


class _Checker:
    def __init__(self, ref: ReferenceOntology, table: TranslationTable, overrides: Mapping):
        self.ont = ref.ontology
        self.table = table
        self.overrides = dict(overrides or {})
        self._closure_cache: dict = {}
        self._restriction_cache: dict = {}

    def standard_class(self, el: BpmnElement, parent_std: Optional[str]) -> Iri:
        alias = CONFORMANCE_NAMESPACES[el.namespace]
        scopes = [parent_std] if parent_std else []
        return Iri(alias, self.table.translate(el.local, TO_STANDARD, scopes))

    def is_a(self, cls: Iri, sup: Iri) -> bool:
        if cls not in self.ont.class_map:
            return False
        if cls not in self._closure_cache:
            self._closure_cache[cls] = {cls, *superclass_closure(self.ont, cls)}
        return sup in self._closure_cache[cls]

    def restrictions(self, cls: Iri) -> list:
        if cls not in self._restriction_cache:
            self._restriction_cache[cls] = effective_restrictions(self.ont, cls)
        return self._restriction_cache[cls]

    def attribute_property(self, el: BpmnElement, attr) -> Optional[Iri]:
        ns = attr.qname.namespace_uri
        if ns == "":
            return Iri(CONFORMANCE_NAMESPACES[el.namespace], attr.qname.local)
        if ns in CONFORMANCE_NAMESPACES:
            return Iri(CONFORMANCE_NAMESPACES[ns], attr.qname.local)
        return None  # vendor, xsi, xml: outside the reference

    def check(self, doc: BpmnDocument) -> list:
        findings: list = []
        # (path, element, standard class name of the conformance parent)
        stack = [((), doc.root, None)]
        while stack:
            path, el, parent_std = stack.pop()
            if el.namespace not in CONFORMANCE_NAMESPACES:
                continue
            cls = self.standard_class(el, parent_std)
            findings.extend(self.check_element(doc, path, el, cls))
            for i in range(len(el.children) - 1, -1, -1):
                stack.append((path + (i,), el.children[i], cls.local))
        return findings

    def check_element(self, doc: BpmnDocument, path: tuple, el: BpmnElement, cls: Iri) -> list:
        where = describe_path(doc.root, path)
        tag = f"{CONFORMANCE_NAMESPACES[el.namespace]}:{el.local}"
        out = []

        def finding(kind: str, detail: str, **kw) -> Finding:
            return Finding(kind, where, tag, detail, _severity(self.overrides, kind, cls), **kw)

        if cls not in self.ont.class_map:
            out.append(finding(UNKNOWN_CLASS, f"{cls} is not a reference class"))
            return out
        for a in el.attributes:
            prop = self.attribute_property(el, a)
            if prop is not None and prop not in self.ont.property_map:
                out.append(finding(UNKNOWN_PROPERTY, f"attribute {a.qname.local} is not a reference property"))
        for r in self.restrictions(cls):
            if r.is_child_kind:
                out.extend(self._check_children(el, cls, r, finding))
            else:
                out.extend(self._check_attributes(el, r, finding))
        return out

    def _check_attributes(self, el: BpmnElement, r: Restriction, finding) -> list:
        values = [a.value for a in el.attributes if self.attribute_property(el, a) == r.on_property]
        out = []
        if not r.cardinality.admits(len(values)):
            out.append(finding(
                RESTRICTION_VIOLATION,
                f"attribute {r.on_property.local}: expected {r.cardinality.describe()}, found {len(values)}",
                restriction=r.describe(), expected=r.cardinality.describe(), actual=len(values)))
        for v in values:
            if not lexically_valid(v, r.on_data_range):
                out.append(finding(
                    RESTRICTION_VIOLATION,
                    f"attribute {r.on_property.local}: {v!r} is not a valid {r.on_data_range}",
                    restriction=r.describe(), expected=r.on_data_range, actual=len(values)))
        return out

    def _check_children(self, el: BpmnElement, cls: Iri, r: Restriction, finding) -> list:
        count = 0
        for c in el.children:
            if c.namespace in CONFORMANCE_NAMESPACES and self.is_a(self.standard_class(c, cls.local), r.on_class):
                count += 1
        if r.cardinality.admits(count):
            return []
        return [finding(
            RESTRICTION_VIOLATION,
            f"children of class {r.on_class.local}: expected {r.cardinality.describe()}, found {count}",
            restriction=r.describe(), expected=r.cardinality.describe(), actual=count)]


def verify(doc: BpmnDocument, ref: ReferenceOntology, table: TranslationTable,
           overrides: Optional[Mapping] = None, model_id: Optional[str] = None) -> VerificationReport:
    findings = _Checker(ref, table, overrides or {}).check(doc)
    return VerificationReport(model_id or doc.root.id or "", ref.version, tuple(findings))


def verify_model(model, ref: ReferenceOntology, table: TranslationTable,
                 overrides: Optional[Mapping] = None) -> VerificationReport:
    """Verify a model ontology through the document it reconstructs to."""
    from ontoflow.transform import owl_to_bpmn

    return verify(owl_to_bpmn(model), ref, table, overrides)


@dataclass(frozen=True)
class CorpusEntry:
    path: str
    report: Optional[VerificationReport] = None
    error: Optional[str] = None

    def row(self) -> dict:
        counts = self.report.counters if self.report else {k: 0 for k in FINDING_KINDS}
        return {"file": self.path, **counts,
                "errors": len(self.report.errors) if self.report else 0,
                "status": "error" if self.error else ("pass" if self.report.passed else "fail")}


@dataclass(frozen=True)
class CorpusSummary:
    entries: tuple = field(default_factory=tuple)

    def matrix(self) -> list:
        return [e.row() for e in self.entries]

    @property
    def exit_code(self) -> int:
        if any(e.error for e in self.entries):
            return 2
        if any(not e.report.passed for e in self.entries):
            return 1
        return 0


def verify_corpus(paths: Sequence, ref: ReferenceOntology, table: TranslationTable,
                  overrides: Optional[Mapping] = None) -> CorpusSummary:
    entries = []
    for p in paths:
        try:
            doc = parse_bpmn(Path(p).read_bytes())
        except (OSError, OntoflowError) as exc:
            entries.append(CorpusEntry(str(p), error=f"{type(exc).__name__}: {exc}"))
            continue
        entries.append(CorpusEntry(str(p), verify(doc, ref, table, overrides, model_id=str(p))))
    return CorpusSummary(tuple(entries))


def render_text(summary: CorpusSummary) -> str:
    lines = []
    for e in summary.entries:
        if e.error:
            lines.append(f"{e.path}: ERROR {e.error}")
            continue
        r = e.report
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{e.path}: {status} ({len(r.errors)} errors, {len(r.findings) - len(r.errors)} warnings)")
        for f in r.findings:
            lines.append(f"  {f.severity:<7} {f.kind:<20} {f.path}  {f.detail}")
    if summary.entries:
        width = max(len(e.path) for e in summary.entries)
        lines.append("")
        lines.append(f"{'file':<{width}}  {'UnknownClass':>12}  {'UnknownProperty':>15}  "
                     f"{'RestrictionViolation':>20}  status")
        for row in summary.matrix():
            lines.append(f"{row['file']:<{width}}  {row[UNKNOWN_CLASS]:>12}  {row[UNKNOWN_PROPERTY]:>15}  "
                         f"{row[RESTRICTION_VIOLATION]:>20}  {row['status']}")
    return "\n".join(lines) + ("\n" if lines else "")


def render_jsonl(summary: CorpusSummary) -> str:
    out = []
    for e in summary.entries:
        if e.report:
            for f in e.report.findings:
                out.append(json.dumps({"type": "finding", "file": e.path, **f.record()}, sort_keys=True))
        out.append(json.dumps({"type": "summary", "error": e.error, **e.row()}, sort_keys=True))
    return "".join(line + "\n" for line in out)
