from fractions import Fraction as F

import pytest

from biochip_fva import bench
from biochip_fva.mixing import all_odd_targets, approximate_ratio


def test_cca_minimal():
    assert bench.minimal_consumption(bench.CCA) == {"R": F(950, 16), "B": F(3050, 16)}


def test_cca_approximations():
    got = [(r.numer_a, r.numer_b) for r in (approximate_ratio(s, 4) for s, _ in bench.CCA.targets)]
    assert got == [(1, 3), (1, 15), (3, 13), (5, 11), (3, 5)]


def test_every_reference_is_tagged():
    for case in bench.CASES.values():
        for ref in case.references.values():
            assert ref.tag.startswith("[")


@pytest.mark.parametrize("units", [1, 2])
@pytest.mark.parametrize("target", [t for d in (1, 2, 3) for t in all_odd_targets(d)])
def test_oracles_agree(target, units):
    d = approximate_ratio(target, 3).depth
    assert bench.oracle_flows(d, target, units) == bench.milp_flows(d, target, units)


def test_oracle_small_cases():
    assert bench.oracle_flows(1, F(1, 2), 1) == 2
    assert bench.oracle_flows(2, F(1, 4), 1) == 3


def test_run_case_rows():
    row = bench.run_case(bench.CCA, "arbitrary")
    assert row.optimized == {"R": 60, "B": 200}
    row = bench.run_case(bench.GLUCOSE, "arbitrary")
    assert row.optimized == {"G": 3, "R": 11}
    with pytest.raises(ValueError):
        bench.run_case(bench.GLUCOSE, "m2")


def test_compare_orderings():
    rows = bench.compare(seed=3, count=5, precision=4)
    assert len(rows) == 5
    s = bench.compare_summary(rows)
    assert s["exact"]["cost"] <= s["pruned4"]["cost"] and s["exact"]["cost"] <= s["minmix"]["cost"]
    assert bench.compare_summary([]) == {}


def test_random_instance_is_deterministic():
    assert bench.random_instance(7) == bench.random_instance(7)
    a, _ = bench.random_instance(7, fixed=True)
    assert a.nodes
