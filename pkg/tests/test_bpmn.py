import pytest
from hypothesis import given, settings

from conftest import CORPUS, fixture_bytes, load
from ontoflow.bpmn import (
    MODEL_NS,
    DuplicateId,
    MalformedXml,
    RootNotDefinitions,
    canonicalize,
    first_difference,
    parse_bpmn,
    resolve_reference,
    serialize_bpmn,
)
from strategies import documents


def model_children(el, local):
    return [c for c in el.children if c.namespace == MODEL_NS and c.local == local]


def test_elementary_has_one_process():
    doc = load("elementary")
    assert len(model_children(doc.root, "process")) == 1
    proc = model_children(doc.root, "process")[0]
    assert [len(model_children(proc, t)) for t in ("startEvent", "task", "endEvent", "sequenceFlow")] == [1, 1, 1, 2]


def test_question_answer_shape():
    doc = load("question_answer")
    (collab,) = model_children(doc.root, "collaboration")
    assert len(model_children(collab, "participant")) == 2
    assert len(model_children(collab, "messageFlow")) >= 2
    assert len(model_children(doc.root, "process")) == 2


def test_root_must_be_definitions():
    with pytest.raises(RootNotDefinitions):
        parse_bpmn(f'<process xmlns="{MODEL_NS}" id="p"/>'.encode())


def test_duplicate_id_names_location():
    data = f'<definitions xmlns="{MODEL_NS}"><process id="a"/><task id="a"/></definitions>'.encode()
    with pytest.raises(DuplicateId) as info:
        parse_bpmn(data)
    assert info.value.id == "a" and "/definitions/task[1]" in str(info.value)


@pytest.mark.parametrize("data", [
    b"<definitions",
    b"not xml at all",
    f'<?xml version="1.0"?><!DOCTYPE definitions [<!ENTITY x "boom">]><definitions xmlns="{MODEL_NS}">&x;</definitions>'.encode(),
    f'<!DOCTYPE definitions SYSTEM "http://example.org/x.dtd"><definitions xmlns="{MODEL_NS}"/>'.encode(),
])
def test_malformed_and_dtd_input_rejected(data):
    with pytest.raises(MalformedXml):
        parse_bpmn(data)


def test_corpus_serializes_byte_identically(corpus_name):
    data = fixture_bytes(corpus_name)
    assert serialize_bpmn(parse_bpmn(data)) == data


def test_corpus_canonical_round_trip_and_idempotence(corpus_name):
    doc = load(corpus_name)
    canon = canonicalize(doc)
    assert canonicalize(parse_bpmn(serialize_bpmn(doc))) == canon
    assert canonicalize(parse_bpmn(canon)) == canon
    assert canonicalize(parse_bpmn(serialize_bpmn(doc, pretty=True))) == canon


def test_corpus_has_eight_files():
    assert len(CORPUS) == 8


def test_empty_definitions_minimal_output():
    data = f'<definitions xmlns="{MODEL_NS}" id="d"/>'.encode()
    out = serialize_bpmn(parse_bpmn(data)).decode()
    assert out.startswith("<definitions") and out.strip().endswith("/>")
    assert f'xmlns="{MODEL_NS}"' in out


def test_vendor_subtree_preserved_verbatim():
    data = fixture_bytes("vendor_extension")
    text = data.decode()
    start = text.index("<extensionElements")
    end = text.index("</extensionElements>") + len("</extensionElements>")
    out = serialize_bpmn(parse_bpmn(data)).decode()
    assert text[start:end] in out


def test_canonical_ignores_attribute_order_and_prefixes():
    a = f'<bpmn2:definitions xmlns:bpmn2="{MODEL_NS}" id="d" name="n"><bpmn2:task id="t" name="x"/></bpmn2:definitions>'
    b = f'<m:definitions xmlns:m="{MODEL_NS}" name="n" id="d">\n  <m:task name="x" id="t"/>\n</m:definitions>'
    assert canonicalize(parse_bpmn(a.encode())) == canonicalize(parse_bpmn(b.encode()))


def test_canonical_difference_points_at_changed_value():
    a = load("elementary")
    text = fixture_bytes("elementary").decode().replace('name="do work"', 'name="do play"', 1)
    assert "do play" in text
    b = parse_bpmn(text.encode())
    ca, cb = canonicalize(a), canonicalize(b)
    assert ca != cb
    report = first_difference(ca, cb)
    changed = [line for line in report.splitlines() if line.startswith("  - ") or line.startswith("  + ")]
    assert any("do work" in line for line in changed) and any("do play" in line for line in changed)
    la, lb = ca.decode().splitlines(), cb.decode().splitlines()
    assert sum(x != y for x, y in zip(la, lb)) == 1


def test_resolve_reference():
    doc = load("elementary")
    flows = [el for _, el in doc.walk() if el.local == "sequenceFlow"]
    target = resolve_reference(doc, flows[0].get("sourceRef"))
    assert target.local == "startEvent"
    assert resolve_reference(doc, "no-such-id") is None
    qa = load("question_answer")
    part = next(el for _, el in qa.walk() if el.local == "participant")
    assert resolve_reference(qa, part.get("processRef")).local == "process"


def test_id_index_total_and_injective(corpus_name):
    doc = load(corpus_name)
    with_id = [(p, el) for p, el in doc.walk() if el.id is not None]
    assert len(doc.id_index) == len(with_id)
    assert all(doc.element_at(doc.id_index[el.id]) is el for _, el in with_id)


@settings(max_examples=150, deadline=None)
@given(documents())
def test_random_documents_round_trip(text):
    data = text.encode()
    doc = parse_bpmn(data)
    assert serialize_bpmn(doc) == data
    canon = canonicalize(doc)
    assert canonicalize(parse_bpmn(canon)) == canon
    assert canonicalize(parse_bpmn(serialize_bpmn(doc, pretty=True))) == canon
