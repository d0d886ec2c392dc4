from dataclasses import replace
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from biochip_fva.model import (
    ApplicationGraph,
    ArchitectureSpec,
    CycleDetected,
    FfuClass,
    FlowEdge,
    NodeKind,
    NotSatisfiable,
    OpNode,
    analyze_flow,
    mix_composition,
    scale_composition,
    share_deviation,
    shares,
    topo_order,
    validate,
)

ARCH = ArchitectureSpec("nl", F(1), (FfuClass("mixer", F(10)), FfuClass("detector", F(10), F(2))))


def codes(diags):
    return [d.code for d in diags]


def mix_graph(ratios=("1/4", "3/4")):
    nodes = (OpNode("A", NodeKind.INPUT), OpNode("B", NodeKind.INPUT), OpNode("M", NodeKind.MIX, "mixer"), OpNode("Z", NodeKind.OUTPUT))
    edges = (
        FlowEdge("A", "M", ratio=F(ratios[0])),
        FlowEdge("B", "M", ratio=F(ratios[1])),
        FlowEdge("M", "Z", required_volume=F(4)),
    )
    return ApplicationGraph(nodes, edges, {"A": "a", "B": "b"})


class TestValidate:
    def test_fixtures_are_valid(self, six_ops, glucose):
        assert validate(*six_ops) == []
        assert validate(*glucose) == []

    def test_self_loop(self):
        g = mix_graph()
        g = g.with_changes(edges=g.edges + (FlowEdge("M", "M", required_volume=F(1)),))
        assert "CycleDetected" in codes(validate(g, ARCH))

    def test_cycle(self):
        nodes = (OpNode("A", NodeKind.INPUT), OpNode("P", NodeKind.DETECT, "detector"), OpNode("Q", NodeKind.DETECT, "detector"), OpNode("Z", NodeKind.OUTPUT))
        edges = (
            FlowEdge("A", "P", required_volume=F(2)),
            FlowEdge("P", "Q", required_volume=F(2)),
            FlowEdge("Q", "P", required_volume=F(2)),
            FlowEdge("Q", "Z", required_volume=F(2)),
        )
        g = ApplicationGraph(nodes, edges, {"A": "a"})
        assert "CycleDetected" in codes(validate(g, ARCH))
        with pytest.raises(CycleDetected):
            topo_order(g)

    def test_ratio_sum(self):
        assert "RatioSumNotOne" in codes(validate(mix_graph(("1/4", "1/2")), ARCH))

    def test_missing_ratio_and_volume(self):
        g = mix_graph()
        edges = [replace(e, ratio=None) if e.src == "A" else e for e in g.edges]
        assert "MissingRatio" in codes(validate(g.with_changes(edges=edges), ARCH))
        edges = [replace(e, required_volume=None) if e.dst == "Z" else e for e in g.edges]
        assert "MissingRequiredVolume" in codes(validate(g.with_changes(edges=edges), ARCH))

    def test_detector_needs_required_volume(self):
        nodes = (OpNode("A", NodeKind.INPUT), OpNode("D", NodeKind.DETECT, "detector"), OpNode("Z", NodeKind.OUTPUT))
        edges = (FlowEdge("A", "D"), FlowEdge("D", "Z", required_volume=F(1)))
        assert "MissingRequiredVolume" in codes(validate(ApplicationGraph(nodes, edges, {"A": "a"}), ARCH))

    def test_polarity(self):
        g = mix_graph()
        g = g.with_changes(nodes=g.nodes + (OpNode("X", NodeKind.DETECT, "detector"),))
        assert "NotPolar" in codes(validate(g, ARCH))

    def test_unknown_references(self):
        g = mix_graph()
        assert "UnknownNode" in codes(validate(g.with_changes(edges=g.edges + (FlowEdge("M", "nowhere"),)), ARCH))
        bad = g.with_changes(nodes=[replace(n, ffu_class="heater") if n.id == "M" else n for n in g.nodes])
        assert "UnknownFfuClass" in codes(validate(bad, ARCH))

    def test_duplicates(self):
        g = mix_graph()
        assert "DuplicateEdge" in codes(validate(g.with_changes(edges=g.edges + (g.edges[0],)), ARCH))
        assert "DuplicateNode" in codes(validate(g.with_changes(nodes=g.nodes + (g.nodes[0],)), ARCH))

    def test_non_dispensable(self):
        g = mix_graph()
        edges = [replace(e, required_volume=F(3, 2)) if e.dst == "Z" else e for e in g.edges]
        assert "NotDispensable" in codes(validate(g.with_changes(edges=edges), ARCH))

    def test_architecture_problems(self):
        assert "BadHtr" in codes(validate(mix_graph(), replace(ARCH, htr=F(0))))
        assert "UnitMismatch" in codes(validate(replace(mix_graph(), unit="ul"), ARCH))


class TestTopoOrder:
    def test_six_ops_reverse_starts_at_sink_side(self, six_ops):
        app, _ = six_ops
        rev = topo_order(app, reverse=True)
        assert rev.index("O7") < rev.index("O6") < rev.index("O3")
        assert rev.index("O7") < min(rev.index(i) for i in ("In1", "In2", "In3"))

    def test_single_node(self):
        g = ApplicationGraph((OpNode("A", NodeKind.INPUT),), (), {"A": "a"})
        assert topo_order(g) == ["A"]

    def test_diamond(self):
        nodes = tuple(OpNode(i, NodeKind.GENERIC, "mixer") for i in ("O1", "O2", "O3", "O4"))
        edges = tuple(FlowEdge(a, b) for a, b in (("O1", "O2"), ("O1", "O3"), ("O2", "O4"), ("O3", "O4")))
        g = ApplicationGraph(nodes, edges, {})
        assert topo_order(g, reverse=True) == ["O4", "O2", "O3", "O1"]
        assert topo_order(g) == ["O1", "O2", "O3", "O4"]


class TestCompositions:
    def test_two_reagents(self):
        assert mix_composition({"G": F(1)}, {"R": F(1)}) == {"G": 1, "R": 1}

    def test_same_reagent(self):
        assert mix_composition({"G": F(2)}, {"G": F(2)}) == {"G": 4}

    def test_scale_keeps_proportions(self):
        assert scale_composition({"G": F(3, 2), "R": F(3, 2)}, F(2)) == {"G": 1, "R": 1}

    def test_deviation_is_absolute_share_difference(self):
        achieved = {"G": F(14, 15), "R": F(106, 15)}
        assert share_deviation(achieved, {"G": F(1), "R": F(8)}) == F(1, 180)

    @given(
        st.dictionaries(st.sampled_from("GRB"), st.fractions(min_value=0, max_value=20), min_size=1),
        st.dictionaries(st.sampled_from("GRB"), st.fractions(min_value=0, max_value=20), min_size=1),
    )
    def test_mixing_conserves_each_reagent(self, a, b):
        m = mix_composition(a, b)
        for k in set(a) | set(b):
            assert m[k] == a.get(k, 0) + b.get(k, 0)

    @given(
        st.dictionaries(st.sampled_from("GRB"), st.fractions(min_value=0, max_value=20), min_size=1),
        st.fractions(min_value=0, max_value=50),
    )
    def test_scaling_preserves_shares(self, c, v):
        s = scale_composition(c, v)
        if sum(c.values()) and v:
            assert sum(s.values()) == v
            assert shares(s) == shares(c)


class TestFlow:
    def test_glucose_leftovers(self, glucose):
        from biochip_fva.assignment import assign_volumes

        app, arch = glucose
        st_ = analyze_flow(assign_volumes(app, arch))
        assert st_.leftover["O3"] == {"G": F(3, 5), "R": F(12, 5)}
        assert st_.leftover["O1"] == {"G": 0, "R": 0}
        assert st_.dispensed == {"G": 4, "R": 15}

    def test_underflow_raises(self):
        g = mix_graph()
        edges = [replace(e, volume=F(1)) if e.dst == "M" else replace(e, volume=F(4)) for e in g.edges]
        with pytest.raises(NotSatisfiable):
            analyze_flow(g.with_changes(edges=edges))
