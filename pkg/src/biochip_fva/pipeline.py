"""End-to-end volume management: assign, reuse leftovers, report."""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .assignment import MAX_REPLICATION, compute_mvr, scale_to_demand, _check
from .lof import (
    Leftover,
    Reassignment,
    extract_leftovers,
    optimize_leftovers,
    select_tree_variants,
    share_trees,
)
from .mixing import (
    MixingTree,
    SearchMode,
    approximate_ratio,
    min_mix_tree,
    nfb_search,
    _network,
)
from .model import (
    DEFAULT_EPSILON,
    ApplicationGraph,
    ArchitectureSpec,
    FfuClass,
    FlowEdge,
    MixerTechnology,
    NodeKind,
    NotSatisfiable,
    OpNode,
    analyze_flow,
    input_consumption,
    topo_order,
)

# FFU class given to the nodes that collect the output of a 1:1 mixing tree.
STORAGE = "storage"


@dataclass(frozen=True)
class Report:
    consumption: dict[str, Fraction]  # per reagent, drawn from input reservoirs
    delivered: dict[str, Fraction]
    waste: dict[str, Fraction]
    op_count: int  # mixer runs
    leftovers: tuple[Leftover, ...]

    @property
    def total(self) -> Fraction:
        return sum(self.consumption.values(), Fraction(0))


@dataclass(frozen=True)
class PipelineResult:
    app: ApplicationGraph
    arch: ArchitectureSpec
    report: Report
    baseline: Report  # the same assignment without leftover reuse
    reassignments: tuple[Reassignment, ...] = ()
    trees: dict[str, MixingTree] = field(default_factory=dict)

    @property
    def savings(self) -> dict[str, Fraction]:
        return {r: v - self.report.consumption.get(r, Fraction(0)) for r, v in self.baseline.consumption.items()}


def conservation_errors(app: ApplicationGraph) -> dict[str, tuple[Fraction, Fraction]]:
    """Reagents whose dispensed volume differs from delivered plus discarded."""
    st = analyze_flow(app)
    bad = {}
    for r in set(st.dispensed) | set(st.delivered) | set(st.discarded):
        d = st.dispensed.get(r, Fraction(0))
        out = st.delivered.get(r, Fraction(0)) + st.discarded.get(r, Fraction(0))
        if d != out:
            bad[r] = (d, out)
    return bad


def make_report(app: ApplicationGraph) -> Report:
    st = analyze_flow(app)
    ops = sum(n.replication_factor for n in app.nodes if n.kind is NodeKind.MIX)
    return Report(
        consumption=input_consumption(app),
        delivered={k: v for k, v in st.delivered.items()},
        waste={k: v for k, v in st.discarded.items()},
        op_count=ops,
        leftovers=tuple(extract_leftovers(app)),
    )


def _worse(a: Report, b: Report) -> bool:
    return any(v > b.consumption.get(r, Fraction(0)) for r, v in a.consumption.items())


def optimize(
    app: ApplicationGraph,
    arch: ArchitectureSpec,
    mode: SearchMode | str = SearchMode.PRUNED4,
    precision: int = 4,
    epsilon: Fraction = DEFAULT_EPSILON,
    lof: bool = True,
    max_replication: int = MAX_REPLICATION,
    exhaustive: bool = False,
) -> PipelineResult:
    """Validate, assign volumes and (unless ``lof`` is off) reuse leftovers.

    With arbitrary-ratio mixers every mix is one operation and leftovers are
    reassigned across the graph.  With fixed 1:1 mixers every mix becomes a
    mixing tree; trees over the same pair of fluids share their leftovers.
    If an optimization would raise any reagent's consumption it is dropped.
    """
    _check(app, arch)
    if arch.mixer_technology is MixerTechnology.FIXED_1TO1:
        base_app, base_arch, base_trees = expand_fixed(app, arch, mode, precision, False, max_replication, exhaustive)
        baseline = make_report(base_app)
        if not lof:
            return PipelineResult(base_app, base_arch, baseline, baseline, (), base_trees)
        opt_app, opt_arch, trees = expand_fixed(app, arch, mode, precision, True, max_replication, exhaustive)
        report = make_report(opt_app)
        if _worse(report, baseline):
            return PipelineResult(base_app, base_arch, baseline, baseline, (), base_trees)
        return PipelineResult(opt_app, opt_arch, report, baseline, (), trees)

    from .assignment import assign_volumes

    assigned = assign_volumes(app, arch, max_replication)
    baseline = make_report(assigned)
    if not lof:
        return PipelineResult(assigned, arch, baseline, baseline)
    res = optimize_leftovers(assigned, arch, epsilon)
    report = make_report(res.app)
    if _worse(report, baseline):
        return PipelineResult(assigned, arch, baseline, baseline)
    return PipelineResult(res.app, arch, report, baseline, res.reassignments)


# ------------------------------------------------------------ 1:1 mixers

def _tree_options(share: Fraction, precision: int, units: int, mode: SearchMode, reagents) -> list[MixingTree]:
    r = approximate_ratio(share, precision)
    if mode is SearchMode.MINMIX:
        return [min_mix_tree(r, units, reagents)]
    return nfb_search(_network(r.depth), r, units, mode, reagents=reagents)


def expand_fixed(
    app: ApplicationGraph,
    arch: ArchitectureSpec,
    mode: SearchMode | str = SearchMode.PRUNED4,
    precision: int = 4,
    share: bool = True,
    max_replication: int = MAX_REPLICATION,
    exhaustive: bool = False,
) -> tuple[ApplicationGraph, ArchitectureSpec, dict[str, MixingTree]]:
    """Replace every binary mix by 1:1 mixing events and assign all volumes.

    One metering unit is half a mixer's capacity: each event takes one unit
    from each parent and yields two.  The original mix node stays as a
    storage node collecting the tree's product.  Mixes drawing on the same
    two fluids are grouped; with ``share`` their trees are chosen jointly and
    pooled so leftovers of one feed another.
    """
    mode = SearchMode(mode)
    demand: dict[tuple[str, str], Fraction] = {}  # (producer, consumer) over original edges
    draw: dict[str, Fraction] = defaultdict(Fraction)  # tree groups' pull on a source node
    pending: dict[tuple[str, str, Fraction, str], list[tuple[str, Fraction, int]]] = {}
    pools: list[tuple] = []  # (name, group key, member ids, trees, events)
    nodes: dict[str, OpNode] = {}
    trees: dict[str, MixingTree] = {}

    def finalize(key) -> None:
        a, b, unit, cls = key
        members = pending.pop(key)
        reagents = (a, b)
        options = [_tree_options(s, precision, u, mode, reagents) for _, s, u in members]
        ids = [m[0] for m in members]
        if share:
            chosen = select_tree_variants(options, exhaustive=exhaustive)
            pools.append((f"{a}|{b}", key, ids, list(chosen), share_trees(chosen).steps))
        else:
            chosen = tuple(o[0] for o in options)
            pools.extend((nid, key, [nid], [t], t.steps) for nid, t in zip(ids, chosen))
        trees.update(zip(ids, chosen))
        lv = defaultdict(int)
        for t in chosen if not share else [share_trees(chosen)]:
            for p, c in t.balance.demand.items():
                lv[p] += c
        draw[a] += lv.get(Fraction(1), 0) * unit
        draw[b] += lv.get(Fraction(0), 0) * unit

    for nid in topo_order(app, reverse=True):
        for key in [k for k in pending if nid in k[:2]]:
            finalize(key)
        n = app.node(nid)
        if n.kind is NodeKind.OUTPUT:
            for e in app.in_edges(nid):
                demand[(e.src, nid)] = e.required_volume
            nodes[nid] = n
            continue
        if n.kind is NodeKind.INPUT:
            nodes[nid] = n
            continue
        rf = sum((demand[(nid, e.dst)] for e in app.out_edges(nid) if (nid, e.dst) in demand), Fraction(0)) + draw[nid]
        if n.kind is NodeKind.MIX:
            ins = sorted(app.in_edges(nid), key=lambda e: e.src)
            if len(ins) != 2:
                raise NotSatisfiable(f"{nid}: 1:1 mixers only realize two-fluid mixes")
            cls = arch.ffu(n.ffu_class)
            unit = cls.mhc / 2
            if not arch.dispensable(unit) or unit == 0:
                raise NotSatisfiable(f"{nid}: half of MHC {cls.mhc} is not an HTR multiple")
            units = max(1, math.ceil(rf / unit))
            pending.setdefault((ins[0].src, ins[1].src, unit, n.ffu_class), []).append((nid, ins[0].ratio, units))
            nodes[nid] = n
            continue
        mvr = compute_mvr(app, nid, arch)
        fva = scale_to_demand(mvr, n.kind, rf, arch, arch.ffu(n.ffu_class).mhc, max_replication)
        for src, v in fva.volumes.items():
            demand[(src, nid)] = v
        nodes[nid] = replace(n, fva=dict(fva.volumes), x=fva.x, replication_factor=fva.replication_factor)
    assert not pending

    mixes = {m for _, _, members, _, _ in pools for m in members}
    edges = [replace(e, volume=demand[(e.src, e.dst)]) for e in app.edges if e.dst not in mixes]
    new_nodes = [nodes[n.id] for n in app.nodes]
    collected: dict[str, Fraction] = {}
    for tag, key, members, chosen, steps in pools:
        ev_nodes, ev_edges = _events(tag, key, members, chosen, steps)
        new_nodes += ev_nodes
        edges += ev_edges
        for e in ev_edges:
            if e.dst in members:
                collected[e.dst] = collected.get(e.dst, Fraction(0)) + e.volume
    for i, n in enumerate(new_nodes):
        if n.id in mixes:
            fva = {e.src: e.volume for e in edges if e.dst == n.id}
            new_nodes[i] = replace(n, kind=NodeKind.GENERIC, ffu_class=STORAGE, fva=fva, x=trees[n.id].units_out, replication_factor=1)
    cap = max([sum(collected.values(), Fraction(0)), arch.htr])
    out_arch = replace(arch, ffu_classes=arch.ffu_classes + (FfuClass(STORAGE, cap, Fraction(0)),))
    return app.with_changes(new_nodes, edges), out_arch, trees


def _events(tag: str, key, members: list[str], chosen: list[MixingTree], steps) -> tuple[list[OpNode], list[FlowEdge]]:
    """One node per mixing event.

    Each vertex hands out its units round-robin over its events, so every
    event feeds at least one consumer whenever the vertex's spare is below
    its event count.
    """
    a, b, unit, cls = key
    supply: dict[Fraction, deque[list]] = defaultdict(deque)  # entries are [event id, units left]
    nodes: list[OpNode] = []
    flows: dict[tuple[str, str], int] = defaultdict(int)

    def take(c: Fraction) -> str:
        if c == 1:
            return a
        if c == 0:
            return b
        q = supply[c]
        entry = q.popleft()
        entry[1] -= 1
        if entry[1]:
            q.append(entry)
        return entry[0]

    counter: dict[Fraction, int] = defaultdict(int)
    for s in sorted(steps, key=lambda s: (s.level, s.vertex, s.left)):
        for _ in range(s.count):
            counter[s.vertex] += 1
            eid = f"{tag}@{s.vertex}#{counter[s.vertex]}"
            left, right = take(s.left), take(s.right)
            flows[(left, eid)] += 1
            flows[(right, eid)] += 1
            nodes.append(OpNode(eid, NodeKind.MIX, cls, {left: unit, right: unit}, 1, 1))
            supply[s.vertex].append([eid, 2])
    for nid, t in sorted(zip(members, chosen)):
        for _ in range(t.units_out):
            flows[(take(t.target), nid)] += 1
    edges = []
    for (src, dst), units in flows.items():
        if dst in members:
            edges.append(FlowEdge(src, dst, required_volume=units * unit, volume=units * unit))
        else:
            edges.append(FlowEdge(src, dst, ratio=Fraction(1, 2), volume=units * unit))
    return nodes, edges
