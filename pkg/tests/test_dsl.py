import pytest
from hypothesis import HealthCheck, given, settings

from helpers import model_graphs
from psoc.core import Assertion, RelationKind as R
from psoc.dsl import ParseFailure, SimRequest, SourceSpan, parse, serialize_canonical


def _errors(text):
    with pytest.raises(ParseFailure) as info:
        parse(text)
    return [(e.span.line, e.span.column, e.message) for e in info.value.errors]


def test_forward_references_resolve():
    model = parse(
        "rel a located_in b\n"
        "instance a : Thing\n"
        "instance b : Object\n"
        "class Thing < Object\n"
        "value a = 2.5 m\n"
    )
    assert model.graph.cls("a") == "Thing"
    assert model.graph.assertions == (Assertion("a", R.LOCATED_IN, "b"),)
    assert model.graph.values["a"].unit == "m"


def test_comments_and_blank_lines_are_ignored():
    model = parse("# header\n\ninstance a : Object \"a # not a comment\"  # trailing\n")
    assert model.graph.instances["a"].label == "a # not a comment"


@pytest.mark.parametrize("text, expected", [
    ("instance a : Object\ninstance b : Object\nrel a touches b\n", (3, 7, "unknown relation")),
    ("instance a : Object\nrel a located_in zz\n", (2, 18, "unresolved identifier")),
    ("instance t : Temperature\nvalue t = 1.2.3 K\n", (2, 11, "malformed number")),
    ("instance a : Nope\n", (1, 14, "unresolved identifier")),
    ("foo bar\n", (1, 1, "unknown keyword")),
    ("class A < Nope\n", (1, 11, "unknown parent")),
    ('instance a : Object "open\n', (1, 21, "malformed label")),
    ("instance a : Object\ninstance a : Object\n", (2, 10, "duplicate instance")),
    ("instance t : Temperature\nmesh m for t box 1 1 1 div 1 1 1\n", (2, 12, "not a material entity")),
    ("instance p : Object\nmesh m for p box 0 1 1 div 1 1 1\n", (2, 18, "must be positive")),
    ("instance p : Object\nmesh m for p box 1 1 1 div 0 1 1\n", (2, 28, "positive integer")),
    ("instance b : ThermalBehavior\nsimulate b target abaqus\n", (2, 19, "unknown target")),
    ("instance b : Object\nsimulate b target fenics\n", (2, 10, "not a physical behavior")),
])
def test_single_error_with_span(text, expected):
    errors = _errors(text)
    assert len(errors) == 1
    line, col, message = errors[0]
    assert (line, col) == expected[:2]
    assert expected[2] in message


def test_class_cycle_reports_each_member():
    errors = _errors("class A < B\nclass B < A\n")
    assert [(l, c) for l, c, _ in errors] == [(1, 11), (2, 11)]
    assert all("cycle" in m for _, _, m in errors)


MESH_HEAD = (
    "instance p : Object\n"
    "instance s : FiatObjectSurface\n"
    "instance q : FiatObjectSurface\n"
    "rel s continuant_part_of p\n"
    "mesh m for p box 1 1 1 div 1 1 1\n"
)


def test_tag_checks():
    assert "unknown face name" in _errors(MESH_HEAD + "tag m face w_min surface s\n")[0][2]
    assert "not part of" in _errors(MESH_HEAD + "tag m face x_min surface q\n")[0][2]
    assert "already tagged" in _errors(MESH_HEAD + "tag m face x_min surface s\ntag m face x_min surface s\n")[0][2]


def test_tagged_surface_may_be_a_nested_part():
    model = parse(MESH_HEAD + "rel q continuant_part_of s\ntag m face x_min surface q\n")
    assert model.mesh("m").face_tags == {"x_min": "q"}


def test_all_errors_reported_in_source_order():
    errors = _errors("instance a : Nope\nfoo\nrel a located_in a\n")
    assert [line for line, _, _ in errors] == sorted(line for line, _, _ in errors)
    assert len(errors) >= 2


def test_source_span_is_one_based():
    with pytest.raises(ValueError):
        SourceSpan(0, 1)


def test_simulate_defaults_and_dedup():
    model = parse("instance b : ThermalBehavior\nsimulate b target fenics\nsimulate b target fenics\n")
    assert model.sims == [SimRequest("b", "fenics", 50)]


def test_empty_model():
    model = parse("")
    assert not model.graph.instances and serialize_canonical(model.graph) == ""


def test_case_study_round_trips(case_text):
    model = parse(case_text)
    text = serialize_canonical(model.graph, model.meshes, model.sims)
    again = parse(text)
    assert again == model
    assert serialize_canonical(again.graph, again.meshes, again.sims) == text


def test_labels_with_quotes_and_backslashes_round_trip():
    model = parse('instance a : Object "say \\"hi\\" \\\\ bye"\n')
    assert model.graph.instances["a"].label == 'say "hi" \\ bye'
    assert parse(serialize_canonical(model.graph)).graph == model.graph


@settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(model_graphs())
def test_parse_inverts_serialize(graph):
    text = serialize_canonical(graph)
    back = parse(text).graph
    assert back == graph
    assert serialize_canonical(back) == text
