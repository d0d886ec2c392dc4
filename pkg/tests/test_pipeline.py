from dataclasses import replace
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from biochip_fva.bench import CCA, case_application, random_instance
from biochip_fva.model import NodeKind, NotSatisfiable, input_consumption, topo_order, underflows
from biochip_fva.pipeline import STORAGE, conservation_errors, expand_fixed, make_report, optimize


def test_glucose_arbitrary(glucose):
    app, arch = glucose
    res = optimize(app, arch)
    assert res.baseline.consumption == {"G": 4, "R": 15}
    assert res.report.consumption == {"G": 3, "R": 11}
    assert res.savings == {"G": 1, "R": 4}
    assert conservation_errors(res.app) == {}


def test_no_lof_keeps_baseline(glucose):
    app, arch = glucose
    res = optimize(app, arch, lof=False)
    assert res.report == res.baseline and res.reassignments == ()
    assert [l.source for l in res.report.leftovers] == ["O2", "O3", "O4"]


def test_report_counts_instances(six_ops):
    app, arch = six_ops
    res = optimize(app, arch, lof=False)
    mixes = [n for n in res.app.nodes if n.kind is NodeKind.MIX]
    assert res.report.op_count == sum(n.replication_factor for n in mixes)
    assert make_report(res.app).total == sum(input_consumption(res.app).values())


class TestFixed:
    def test_cca_m1(self):
        res = optimize(case_application(CCA), CCA.architectures["m1"], precision=CCA.precision)
        assert res.report.consumption == {"R": 75, "B": 225}
        assert res.baseline.consumption == {"R": 125, "B": 325}

    def test_storage_collectors(self):
        app, arch, trees = expand_fixed(case_application(CCA), CCA.architectures["m1"], precision=4)
        stores = [n for n in app.nodes if n.ffu_class == STORAGE]
        assert {n.id for n in stores} == {f"M{i}" for i in range(1, 6)} == set(trees)
        assert all(n.kind is NodeKind.GENERIC for n in stores)
        assert arch.ffu(STORAGE).mhc >= max(sum(n.fva.values()) for n in stores)

    def test_events_are_half_and_half(self):
        app = optimize(case_application(CCA), CCA.architectures["m1"]).app
        for n in app.nodes:
            if n.kind is NodeKind.MIX:
                assert list(n.fva.values()) == [25, 25]
                assert all(e.ratio == F(1, 2) for e in app.in_edges(n.id))

    def test_odd_capacity_rejected(self):
        arch = CCA.architectures["m1"]
        bad = replace(arch, ffu_classes=(replace(arch.ffu_classes[0], mhc=F(75)),))
        with pytest.raises(NotSatisfiable):
            optimize(case_application(CCA), bad)

    def test_all_modes_conserve(self):
        for mode in ("minmix", "exact", "pruned4"):
            res = optimize(case_application(CCA), CCA.architectures["m1"], mode=mode)
            assert conservation_errors(res.app) == {}
            assert underflows(res.app) == {}


@settings(max_examples=80)
@given(st.integers(0, 10**6))
def test_random_pipeline_invariants(seed):
    app, arch = random_instance(seed)
    res = optimize(app, arch)
    assert conservation_errors(res.app) == {}
    assert underflows(res.app) == {}
    assert len(topo_order(res.app)) == len(res.app.nodes)
    for r, v in res.report.consumption.items():
        assert v <= res.baseline.consumption.get(r, 0)
    for n in res.app.nodes:
        if n.fva:
            assert all(res.arch.dispensable(v / n.replication_factor) for v in n.fva.values())
            assert sum(n.fva.values()) / n.replication_factor <= res.arch.ffu(n.ffu_class).mhc
