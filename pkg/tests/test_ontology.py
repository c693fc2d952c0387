import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ontoflow.ontology import (
    OWL_THING,
    Cardinality,
    CycleIntroduced,
    DataAssertion,
    DuplicateIri,
    InvariantViolation,
    Iri,
    NamedIndividual,
    ObjectAssertion,
    OntoClass,
    Ontology,
    OntologyBuilder,
    PropertyDecl,
    Restriction,
    UnresolvedReference,
    UnresolvedSuperclass,
    add_class,
    add_superclass,
    diff,
    effective_restrictions,
    parse,
    serialize,
    superclass_closure,
)

NS = [("ex", "http://example.org/ex#")]


def X(local):
    return Iri("ex", local)


def empty():
    return OntologyBuilder(X("onto"), namespaces=NS).build()


def diamond(same_restriction=True):
    b = OntologyBuilder(X("onto"), namespaces=NS)
    b.add_class(OntoClass(X("D")))
    b.add_class(OntoClass(X("B"), (X("D"),)))
    b.add_class(OntoClass(X("C"), (X("D"),)))
    b.add_class(OntoClass(X("A"), (X("B"), X("C"))))
    b.add_property(PropertyDecl(X("name"), "data", "string"))
    b.add_restriction(Restriction(X("B"), X("name"), Cardinality.max(1), on_data_range="string"))
    card = Cardinality.max(1) if same_restriction else Cardinality.exact(1)
    b.add_restriction(Restriction(X("C"), X("name"), card, on_data_range="string"))
    return b.build()


class TestCardinality:
    @pytest.mark.parametrize("card,ok,bad", [
        (Cardinality.exact(2), [2], [0, 1, 3]),
        (Cardinality.min(1), [1, 2, 50], [0]),
        (Cardinality.max(1), [0, 1], [2]),
        (Cardinality.range(1, 3), [1, 2, 3], [0, 4]),
    ])
    def test_admits(self, card, ok, bad):
        assert all(card.admits(n) for n in ok)
        assert not any(card.admits(n) for n in bad)

    @pytest.mark.parametrize("args", [("exact", -1), ("range", 3, 1), ("max", 1, 2), ("between", 1)])
    def test_rejects_malformed(self, args):
        with pytest.raises(ValueError):
            Cardinality(*args)


class TestClasses:
    def test_add_participant_under_base_element(self):
        ont = add_class(empty(), OntoClass(X("BaseElement")))
        ont = add_class(ont, OntoClass(X("Participant"), (X("BaseElement"),)))
        assert {c.iri for c in ont.classes} == {X("BaseElement"), X("Participant")}
        assert ont.is_subclass(X("Participant"), X("BaseElement"))

    def test_class_without_superclass_hangs_under_thing(self):
        ont = add_class(empty(), OntoClass(X("Lonely")))
        assert ont.class_map[X("Lonely")].superclasses == (OWL_THING,)

    def test_two_cycle_rejected(self):
        ont = add_class(empty(), OntoClass(X("Y")))
        ont = add_class(ont, OntoClass(X("X"), (X("Y"),)))
        with pytest.raises(CycleIntroduced):
            add_superclass(ont, X("Y"), X("X"))

    def test_self_loop_rejected(self):
        ont = add_class(empty(), OntoClass(X("Y")))
        with pytest.raises(CycleIntroduced):
            add_superclass(ont, X("Y"), X("Y"))

    def test_duplicate_and_unknown_superclass(self):
        ont = add_class(empty(), OntoClass(X("Y")))
        with pytest.raises(DuplicateIri):
            add_class(ont, OntoClass(X("Y")))
        with pytest.raises(UnresolvedSuperclass):
            add_class(ont, OntoClass(X("Z"), (X("Missing"),)))

    def test_functional_ops_leave_input_untouched(self):
        base = empty()
        add_class(base, OntoClass(X("Y")))
        assert base.classes == ()


class TestClosure:
    def test_participant_chain(self):
        ont = add_class(empty(), OntoClass(X("BaseElement")))
        ont = add_class(ont, OntoClass(X("Participant"), (X("BaseElement"),)))
        assert superclass_closure(ont, X("Participant")) == [X("BaseElement"), OWL_THING]

    def test_thing_has_no_superclasses(self):
        assert superclass_closure(empty(), OWL_THING) == []

    def test_diamond_lists_shared_ancestor_once(self):
        assert superclass_closure(diamond(), X("A")) == [X("B"), X("C"), X("D"), OWL_THING]


class TestEffectiveRestrictions:
    def test_no_restrictions(self):
        assert effective_restrictions(diamond(), X("D")) == []

    def test_identical_restriction_from_two_parents_counted_once(self):
        got = effective_restrictions(diamond(same_restriction=True), X("A"))
        assert len(got) == 1

    def test_distinct_restrictions_from_two_parents_both_kept(self):
        got = effective_restrictions(diamond(same_restriction=False), X("A"))
        assert sorted(r.cardinality.describe() for r in got) == ["<=1", "=1"]

    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_matches_union_over_closure(self, data):
        n = data.draw(st.integers(1, 10))
        b = OntologyBuilder(X("onto"), namespaces=NS)
        for i in range(n):
            supers = data.draw(st.lists(st.integers(0, max(i - 1, 0)), max_size=3, unique=True)) if i else []
            b.add_class(OntoClass(X(f"C{i}"), tuple(X(f"C{j}") for j in supers)))
        b.add_property(PropertyDecl(X("p"), "data"))
        b.add_property(PropertyDecl(X("q"), "data"))
        for i in range(n):
            for prop in data.draw(st.lists(st.sampled_from(["p", "q"]), max_size=2, unique=True)):
                k = data.draw(st.integers(0, 2))
                b.add_restriction(Restriction(X(f"C{i}"), X(prop), Cardinality.max(k), on_data_range="string"))
        ont = b.build()
        for i in range(n):
            cls = X(f"C{i}")
            # brute force: walk every path upwards
            reach, frontier = {cls}, [cls]
            while frontier:
                nxt = []
                for c in frontier:
                    for s in ont.class_map[c].superclasses:
                        if s != OWL_THING and s not in reach:
                            reach.add(s)
                            nxt.append(s)
                frontier = nxt
            expected = {r.key()[1:] for r in ont.restrictions if r.subject_class in reach}
            got = effective_restrictions(ont, cls)
            assert {r.key()[1:] for r in got} == expected
            assert len(got) == len(expected)
            assert set(ont.restrictions_of(cls)) <= {r for r in ont.restrictions if r.key()[1:] in expected}
            closure = superclass_closure(ont, cls)
            assert len(closure) == len(set(closure)) and closure.count(OWL_THING) == 1


class TestFileDialect:
    def test_empty_ontology_is_header_only(self):
        text = serialize(empty()).decode()
        assert text.count("<owl:Ontology") == 1
        for tag in ("owl:Class", "owl:ObjectProperty", "owl:DatatypeProperty", "owl:Restriction",
                    "owl:NamedIndividual"):
            assert tag not in text
        assert text.rstrip().endswith("</rdf:RDF>")

    def test_parts_in_fixed_order(self):
        b = OntologyBuilder(X("onto"), namespaces=NS)
        b.add_class(OntoClass(X("Thing1")))
        b.add_property(PropertyDecl(X("size"), "data", "integer"))
        b.add_restriction(Restriction(X("Thing1"), X("size"), Cardinality.exact(1), on_data_range="integer"))
        b.add_property(PropertyDecl(X("link"), "object", X("Thing1")))
        b.add_individual(NamedIndividual(X("t1"), (X("Thing1"),), (DataAssertion(X("size"), "3", "integer"),)))
        text = serialize(b.build()).decode()
        marks = [text.index(t) for t in ("<owl:Ontology", "<owl:ObjectProperty", "<owl:DatatypeProperty",
                                         "<owl:Restriction", "<owl:NamedIndividual", "<owl:Class")]
        assert marks == sorted(marks)

    def test_fixpoint(self, ref):
        once = serialize(ref.ontology)
        assert serialize(parse(once)) == once
        assert parse(once) == ref.ontology

    def test_undeclared_property_on_individual(self):
        b = OntologyBuilder(X("onto"), namespaces=NS)
        b.add_class(OntoClass(X("K")))
        b.add_property(PropertyDecl(X("declared"), "data"))
        b.add_individual(NamedIndividual(X("i"), (X("K"),), (DataAssertion(X("declared"), "v"),)))
        text = serialize(b.build()).decode()
        bad = text.replace('onto:property="ex:declared"', 'onto:property="ex:ghost"')
        assert bad != text
        with pytest.raises(UnresolvedReference) as info:
            parse(bad.encode())
        assert "ex:ghost" in str(info.value)

    def test_restriction_with_both_targets(self):
        with pytest.raises(InvariantViolation):
            Restriction(X("K"), X("p"), Cardinality.max(1), on_class=X("K"), on_data_range="string")
        b = OntologyBuilder(X("onto"), namespaces=NS)
        b.add_class(OntoClass(X("K")))
        b.add_property(PropertyDecl(X("p"), "object", X("K")))
        b.add_restriction(Restriction(X("K"), X("p"), Cardinality.max(1), on_class=X("K")))
        text = serialize(b.build()).decode()
        i = text.index("<owl:onClass")
        doubled = text[:i] + '<owl:onDataRange rdf:resource="xsd:string"/>' + text[i:]
        with pytest.raises(InvariantViolation):
            parse(doubled.encode())

    def test_malformed_bytes(self):
        from ontoflow.ontology import MalformedXml

        with pytest.raises(MalformedXml):
            parse(b"<rdf:RDF")


# ---------------------------------------------------------------------------
# random ontologies: round trip and diff


# any character XML 1.0 can carry, including tab, CR and LF
xml_text = st.text(alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\ufffe\uffff")
                   .filter(lambda c: c in "\t\n\r" or ord(c) >= 0x20), max_size=10)


@st.composite
def ontologies(draw):
    b = OntologyBuilder(X("onto"), annotations=[("comment", draw(xml_text))], namespaces=NS)
    n = draw(st.integers(0, 6))
    for i in range(n):
        supers = draw(st.lists(st.integers(0, i - 1), max_size=2, unique=True)) if i else []
        b.add_class(OntoClass(X(f"K{i}"), tuple(X(f"K{j}") for j in supers)))
    props = []
    for j in range(draw(st.integers(0, 3))):
        kind = draw(st.sampled_from(["object", "data"]))
        rng = (X(f"K{draw(st.integers(0, n - 1))}") if n and draw(st.booleans()) else None) if kind == "object" \
            else draw(st.sampled_from(["string", "integer", "boolean", "idref", "anyType"]))
        props.append(b.add_property(PropertyDecl(X(f"p{j}"), kind, rng)))
    if n:
        for p in props:
            if draw(st.booleans()):
                card = draw(st.sampled_from([Cardinality.exact(1), Cardinality.min(0), Cardinality.max(2),
                                             Cardinality.range(1, 2)]))
                subj = X(f"K{draw(st.integers(0, n - 1))}")
                if p.kind == "object":
                    b.add_restriction(Restriction(subj, p.iri, card, on_class=X(f"K{draw(st.integers(0, n - 1))}")))
                else:
                    b.add_restriction(Restriction(subj, p.iri, card, on_data_range=p.range))
        inds = [X(f"i{k}") for k in range(draw(st.integers(0, 4)))]
        text = xml_text
        for iri in inds:
            data = []
            objs = []
            for p in props:
                if p.kind == "data" and draw(st.booleans()):
                    data.append(DataAssertion(p.iri, draw(text), p.range))
                if p.kind == "object" and draw(st.booleans()):
                    objs.append(ObjectAssertion(p.iri, draw(st.sampled_from(inds))))
            b.add_individual(NamedIndividual(
                iri, (X(f"K{draw(st.integers(0, n - 1))}"),), tuple(data), tuple(objs),
                draw(st.none() | text), tuple((k, draw(text)) for k in draw(st.lists(st.sampled_from("ab"), max_size=2)))))
    return b.build()


@settings(max_examples=120, deadline=None)
@given(ontologies())
def test_round_trip_and_fixpoint(ont):
    data = serialize(ont)
    back = parse(data)
    assert back == ont
    assert serialize(back) == data


@settings(max_examples=80, deadline=None)
@given(ontologies(), ontologies())
def test_diff_empty_iff_same_bytes(a, b):
    assert (diff(a, b) == []) == (serialize(a) == serialize(b))
    assert diff(a, a) == []


def test_unrepresentable_text_is_refused():
    b = OntologyBuilder(X("onto"), annotations=[("comment", "bell\x07")], namespaces=NS)
    with pytest.raises(ValueError):
        serialize(b.build())


def test_diff_reports_added_class():
    a = empty()
    b = add_class(a, OntoClass(X("New")))
    d = diff(a, b)
    assert [(x.kind, x.side, x.name) for x in d] == [("class", "only-in-b", "ex:New")]


def test_diff_notices_declaration_order():
    a = add_class(add_class(empty(), OntoClass(X("P"))), OntoClass(X("Q")))
    b = add_class(add_class(empty(), OntoClass(X("Q"))), OntoClass(X("P")))
    assert serialize(a) != serialize(b)
    assert diff(a, b) != []


def test_model_vs_reference_lists_unused_reference_classes(ref):
    from conftest import load
    from ontoflow.transform import bpmn_to_owl

    model = bpmn_to_owl(load("question_answer")).ontology
    d = diff(model, ref.ontology)
    only_ref = {x.name for x in d if x.kind == "class" and x.side == "only-in-b"}
    assert "bpmn2:Participant" in only_ref  # the model names it bpmn2:participant
    assert "bpmn2:Lane" in only_ref


def test_ontology_value_semantics():
    a, b = diamond(), diamond()
    assert a == b and a is not b
    assert isinstance(a, Ontology)
    assert list(itertools.islice((c.iri for c in a.classes), 1)) == [X("D")]
