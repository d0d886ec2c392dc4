import json
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from biochip_fva import io
from biochip_fva.assignment import assign_volumes
from biochip_fva.mixing import synthesize
from biochip_fva.pipeline import optimize


@pytest.mark.parametrize(
    "v, text",
    [(F(3), "3"), (F(5, 2), "2.5"), (F(1, 8), "0.125"), (F(1, 3), "1/3"), (F(-3, 4), "-0.75"), (F(7, 100), "0.07")],
)
def test_format_volume(v, text):
    assert io.format_volume(v) == text


@given(st.fractions())
def test_format_volume_round_trips(v):
    assert io.parse_rational(io.format_volume(v)) == v


def test_parse_volume_units():
    assert io.parse_volume("2.5 nl", "nl") == F(5, 2)
    assert io.parse_volume("5/2") == F(5, 2)
    with pytest.raises(io.ParseError):
        io.parse_volume("2 ul", "nl")
    with pytest.raises(io.ParseError):
        io.parse_volume("-1")


def test_floats_rejected():
    with pytest.raises(io.ParseError):
        io.parse_rational(0.1)
    with pytest.raises(io.ParseError):
        io.parse_rational("abc")


def test_round_trip(six_ops):
    app, arch = six_ops
    out = assign_volumes(app, arch)
    again, arch2 = io.loads(io.dumps(out, arch))
    assert arch2 == arch
    assert again.nodes == out.nodes and again.edges == out.edges and again.inputs == out.inputs


def test_lof_flag_survives(glucose):
    res = optimize(*glucose)
    again, _ = io.loads(io.dumps(res.app, res.arch))
    assert {(e.src, e.dst) for e in again.edges if e.lof} == {("O2", "O4"), ("O3", "O4")}


def test_separate_files(tmp_path, glucose):
    app, arch = glucose
    (tmp_path / "app.json").write_text(json.dumps(io.application_to_dict(app)))
    (tmp_path / "arch.json").write_text(json.dumps(io.architecture_to_dict(arch)))
    app2, arch2 = io.load(tmp_path / "app.json", tmp_path / "arch.json")
    assert arch2 == arch and app2.edges == app.edges


def test_bad_documents():
    with pytest.raises(io.ParseError):
        io.loads("{")
    with pytest.raises(io.ParseError):
        io.loads('{"application": {}}')
    with pytest.raises(io.ParseError):
        io.loads('{"architecture": {"unit": "nl"}, "application": {}}')


def test_application_dot(glucose):
    res = optimize(*glucose)
    dot = io.application_to_dot(res.app, " nl")
    assert dot.startswith("digraph application {")
    assert '"InG" [shape=invhouse' in dot and '"Out1" [shape=house' in dot
    assert '"O2" -> "O4" [label="1 nl", style=dashed];' in dot
    assert dot.count("style=dashed") == 2


def test_tree_dot():
    t = synthesize(F(5, 16), 1)[0]
    dot = io.tree_to_dot(t)
    assert '"A" [shape=invhouse];' in dot and "out [shape=house" in dot
    assert dot.count("->") == 2 * len(t.steps) + 1
