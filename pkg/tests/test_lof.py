from fractions import Fraction as F

from biochip_fva.assignment import assign_volumes
from biochip_fva.lof import (
    Leftover,
    extract_leftovers,
    lof_edges,
    optimize_leftovers,
    reassign_leftovers,
    select_tree_variants,
    share_trees,
)
from biochip_fva.mixing import SearchMode, _network, approximate_ratio, nfb_search, synthesize
from biochip_fva.model import analyze_flow, input_consumption, share_deviation, topo_order, underflows


def _trees(shares, units=1, mode=SearchMode.PRUNED4):
    out = []
    for s in shares:
        r = approximate_ratio(F(s), 4)
        out.append(nfb_search(_network(r.depth), r, units, mode, reagents=("G", "R")))
    return out


GLUCOSE = ["1/2", "1/3", "1/5", "1/9"]


class TestExtract:
    def test_glucose_leftovers(self, glucose):
        app, arch = glucose
        lo = {l.source: l for l in extract_leftovers(assign_volumes(app, arch))}
        assert {k: v.volume for k, v in lo.items()} == {"O2": 1, "O3": 3, "O4": 7}
        assert lo["O3"].composition == {"G": F(3, 5), "R": F(12, 5)}

    def test_six_ops_has_leftovers_only_where_demand_rounds(self, six_ops):
        app, arch = six_ops
        lo = extract_leftovers(assign_volumes(app, arch))
        assert all(l.volume > 0 for l in lo)


class TestReassign:
    def test_glucose_plan(self, glucose):
        app, arch = glucose
        assigned = assign_volumes(app, arch)
        res = optimize_leftovers(assigned, arch)
        o4 = analyze_flow(res.app).content["O4"]
        assert o4 == {"G": F(14, 15), "R": F(106, 15)}
        nominal = analyze_flow(assigned).content["O4"]
        dev = share_deviation(o4, nominal)
        assert dev == F(1, 180) and dev <= F(1, 100)
        assert res.savings == {"G": 1, "R": 4}
        assert {(r.source, r.target, r.volume) for r in res.reassignments} == {("O2", "O4", 1), ("O3", "O4", 3)}

    def test_result_stays_valid(self, glucose):
        app, arch = glucose
        out = reassign_leftovers(assign_volumes(app, arch), arch)
        assert underflows(out) == {}
        assert len(topo_order(out)) == len(out.nodes)
        assert {(e["from"], e["to"]) for e in lof_edges(out)} == {("O2", "O4"), ("O3", "O4")}

    def test_zero_tolerance_keeps_exact_ratios(self, glucose):
        app, arch = glucose
        assigned = assign_volumes(app, arch)
        res = optimize_leftovers(assigned, arch, epsilon=F(0))
        assert all(r.deviation == 0 for r in res.reassignments)
        before, after = analyze_flow(assigned).content, analyze_flow(res.app).content
        for n in ("O1", "O2", "O3", "O4"):
            assert share_deviation(after[n], before[n]) == 0

    def test_foreign_reagent_is_rejected(self, glucose):
        app, arch = glucose
        assigned = assign_volumes(app, arch)
        alien = Leftover("O1", F(2), {"G": F(1), "X": F(1)})
        res = optimize_leftovers(assigned, arch, leftovers=[alien])
        assert res.reassignments == ()

    def test_never_raises_consumption(self, six_ops):
        app, arch = six_ops
        assigned = assign_volumes(app, arch)
        res = optimize_leftovers(assigned, arch)
        before = input_consumption(assigned)
        after = input_consumption(res.app)
        assert all(after.get(k, 0) <= v for k, v in before.items())


class TestSharing:
    def test_glucose_tree_set(self):
        chosen = tuple(o[0] for o in _trees(GLUCOSE))
        unshared = {"G": sum(t.leaves["G"] for t in chosen), "R": sum(t.leaves["R"] for t in chosen)}
        assert unshared == {"G": 4, "R": 9}
        pool = share_trees(select_tree_variants(_trees(GLUCOSE)))
        assert pool.leaves["G"] <= 2 and pool.leaves["R"] <= 6

    def test_single_tree_is_unchanged(self):
        (t,) = _trees(["1/3"])[0][:1]
        pool = share_trees([t])
        assert pool.leaves == t.leaves and pool.op_count == t.op_count

    def test_pool_balances(self):
        pool = share_trees(select_tree_variants(_trees(GLUCOSE)))
        b = pool.balance
        for v, need in b.demand.items():
            if v not in (0, 1):
                assert b.supply.get(v, 0) >= need

    def test_sharing_never_costs_more(self):
        for shares in (GLUCOSE, ["6/25", "2/25", "4/25", "8/25", "2/5"], ["1/4", "3/4"]):
            chosen = tuple(o[0] for o in _trees(shares, 2))
            assert share_trees(chosen).fluid_cost <= sum(t.fluid_cost for t in chosen)

    def test_cca_pool(self):
        opts = _trees(["6/25", "2/25", "4/25", "8/25", "2/5"], 2)
        pool = share_trees(select_tree_variants(opts))
        assert pool.leaves == {"G": 3, "R": 9}

    def test_variant_choice_follows_neighbours(self):
        opts = _trees(["1/4"]) + _trees(["1/8"])
        assert len(opts[0]) == 1
        best = select_tree_variants(opts)
        exhaustive = select_tree_variants(opts, exhaustive=True)
        assert share_trees(best).fluid_cost == share_trees(exhaustive).fluid_cost

    def test_identity_for_single_variants(self):
        opts = [[t] for t in synthesize(F(1, 2), 1)[:1]]
        assert select_tree_variants(opts) == (opts[0][0],)
        assert select_tree_variants([]) == ()
