"""Leftover fluid extraction and reuse."""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Sequence

from .mixing import MixingTree, MixStep, VertexBalance, canonical_steps, level_of, vertex_balance
from .model import (
    DEFAULT_EPSILON,
    ApplicationGraph,
    ArchitectureSpec,
    FlowEdge,
    NodeKind,
    NotSatisfiable,
    analyze_flow,
    edge_volume,
    input_consumption,
    mix_composition,
    scale_composition,
    share_deviation,
    shares,
    topo_order,
    total,
)

# Input-volume combinations tried per target before giving up on it.
MAX_COMBINATIONS = 50_000


@dataclass(frozen=True)
class Leftover:
    source: str
    volume: Fraction
    composition: dict[str, Fraction]


@dataclass(frozen=True)
class Reassignment:
    source: str
    target: str
    volume: Fraction
    composition: dict[str, Fraction]
    residual: Fraction  # what remains at the source afterwards
    deviation: Fraction  # target's share deviation once this plan is in place


@dataclass(frozen=True)
class LofResult:
    app: ApplicationGraph
    reassignments: tuple[Reassignment, ...]
    before: dict[str, Fraction]
    after: dict[str, Fraction]

    @property
    def savings(self) -> dict[str, Fraction]:
        return {r: v - self.after.get(r, Fraction(0)) for r, v in self.before.items()}


def extract_leftovers(app: ApplicationGraph) -> list[Leftover]:
    state = analyze_flow(app)
    out = []
    for nid in topo_order(app):
        left = state.leftover.get(nid)
        if left and total(left) > 0:
            out.append(Leftover(nid, total(left), {k: v for k, v in left.items() if v}))
    return out


def _reagents(c: dict[str, Fraction]) -> set[str]:
    return {k for k, v in c.items() if v}


def _within(app: ApplicationGraph, nominal: dict[str, dict[str, Fraction]], eps: Fraction) -> bool:
    try:
        state = analyze_flow(app)
    except NotSatisfiable:
        return False
    return all(
        share_deviation(state.content[nid], nominal[nid]) <= eps
        for nid, c in state.content.items()
        if nid in nominal and total(c) > 0
    )


def _plan(
    app: ApplicationGraph,
    arch: ArchitectureSpec,
    target: str,
    sources: list[tuple[str, Fraction, dict[str, Fraction]]],
    nominal: dict[str, Fraction],
    eps: Fraction,
):
    """Choose leftover takes and reduced input volumes for one target.

    Leftovers are taken greedily (largest first, as much as still admits a
    feasible input setting); the input volumes then minimize what is drawn
    from the reservoirs.  Returns ``(takes, inputs)`` or ``None``.
    """
    node = app.node(target)
    k = node.replication_factor
    step = arch.htr * k
    cap = arch.ffu(node.ffu_class).mhc * k
    floor = max(
        sum((edge_volume(e) for e in app.out_edges(target)), Fraction(0)),
        arch.ffu(node.ffu_class).mvr * k,
    )
    fixed: dict[str, Fraction] = {}
    for e in app.in_edges(target):
        if app.node(e.src).kind is not NodeKind.INPUT:
            fixed[e.src] = edge_volume(e)
    inputs = sorted(
        (e.src, edge_volume(e)) for e in app.in_edges(target) if app.node(e.src).kind is NodeKind.INPUT
    )
    if not inputs:
        return None
    ranges = [[step * i for i in range(int(v / step) + 1)] for _, v in inputs]
    count = 1
    for r in ranges:
        count *= len(r)
    if count > MAX_COMBINATIONS:
        return None
    state = analyze_flow(app)
    pure = {src: {app.reagent(src): Fraction(1)} for src, _ in inputs}

    def base_content(takes: dict[str, Fraction]) -> dict[str, Fraction]:
        c: dict[str, Fraction] = {}
        for src, v in fixed.items():
            c = mix_composition(c, scale_composition(state.content[src], v))
        for src, v in takes.items():
            comp = next(s[2] for s in sources if s[0] == src)
            c = mix_composition(c, scale_composition(comp, v))
        return c

    # Combinations sorted once by reservoir draw so the first hit is optimal.
    combos = sorted(itertools.product(*ranges), key=lambda vs: (sum(vs), vs))

    def best_inputs(takes: dict[str, Fraction]):
        base = base_content(takes)
        tb = total(base)
        for vs in combos:
            t = tb + sum(vs)
            if t < floor or t > cap or t == 0:
                continue
            c = base
            for (src, _), v in zip(inputs, vs):
                if v:
                    c = mix_composition(c, scale_composition(pure[src], v))
            if share_deviation(c, nominal) <= eps:
                return vs
        return None

    takes: dict[str, Fraction] = {}
    for src, residual, _ in sources:
        for i in range(int(residual / step), 0, -1):
            trial = {**takes, src: step * i}
            if best_inputs(trial) is not None:
                takes = trial
                break
    if not takes:
        return None
    vs = best_inputs(takes)
    if sum(vs) >= sum(v for _, v in inputs):
        return None
    return takes, dict(zip((s for s, _ in inputs), vs))


def _apply(app: ApplicationGraph, target: str, takes: dict[str, Fraction], inputs: dict[str, Fraction]) -> ApplicationGraph:
    edges = []
    for e in app.edges:
        if e.dst == target and e.src in inputs:
            e = replace(e, volume=inputs[e.src])
        edges.append(e)
    edges += [FlowEdge(src, target, volume=v, lof=True) for src, v in sorted(takes.items())]
    node = app.node(target)
    fva = dict(node.fva or {})
    fva.update(inputs)
    fva.update(takes)
    nodes = [replace(n, fva=fva) if n.id == target else n for n in app.nodes]
    return app.with_changes(nodes, edges)


def optimize_leftovers(
    app: ApplicationGraph,
    arch: ArchitectureSpec,
    epsilon: Fraction = DEFAULT_EPSILON,
    leftovers: Iterable[Leftover] | None = None,
) -> LofResult:
    """Greedily replace reservoir fluid with leftovers of earlier operations.

    Targets are visited in forward topological order and may only draw on
    leftovers of operations that precede them in that order, so the graph
    stays acyclic.  A leftover qualifies when its reagents are a subset of
    the target's.  Every operation's composition must stay within
    ``epsilon`` (largest absolute share difference) of its unoptimized
    composition.  Passes repeat until nothing changes.
    """
    order = topo_order(app)
    pos = {nid: i for i, nid in enumerate(order)}
    start = analyze_flow(app)
    nominal = {nid: shares(c) for nid, c in start.content.items() if app.node(nid).kind is not NodeKind.INPUT and total(c) > 0}
    allowed = None if leftovers is None else {lo.source for lo in leftovers}
    before = input_consumption(app)
    cur = app
    log: list[tuple[str, str, Fraction]] = []
    changed = True
    while changed:
        changed = False
        for t in order:
            node = cur.node(t)
            if node.kind in (NodeKind.INPUT, NodeKind.OUTPUT) or t not in nominal:
                continue
            if any(e.lof for e in cur.out_edges(t)):
                continue  # someone already relies on this composition
            linked = {e.src for e in cur.in_edges(t)}
            want = _reagents(nominal[t])
            sources = []
            for lo in extract_leftovers(cur):
                s = lo.source
                if pos[s] >= pos[t] or s in linked or (allowed is not None and s not in allowed):
                    continue
                if not _reagents(lo.composition) <= want:
                    continue
                sources.append((s, lo.volume, lo.composition))
            sources.sort(key=lambda s: (-s[1], s[0]))
            if not sources:
                continue
            plan = _plan(cur, arch, t, sources, nominal[t], epsilon)
            if plan is None:
                continue
            nxt = _apply(cur, t, *plan)
            if not _within(nxt, nominal, epsilon):
                continue
            cur = nxt
            log += [(s, t, v) for s, v in sorted(plan[0].items())]
            changed = True

    state = analyze_flow(cur)
    rec = []
    for s, t, v in log:
        rec.append(
            Reassignment(
                source=s,
                target=t,
                volume=v,
                composition=scale_composition(state.content[s], v),
                residual=total(state.leftover[s]),
                deviation=share_deviation(state.content[t], nominal[t]),
            )
        )
    return LofResult(cur, tuple(rec), before, input_consumption(cur))


def reassign_leftovers(
    app: ApplicationGraph,
    arch: ArchitectureSpec,
    leftovers: Iterable[Leftover] | None = None,
    epsilon: Fraction = DEFAULT_EPSILON,
) -> ApplicationGraph:
    return optimize_leftovers(app, arch, epsilon, leftovers).app


def lof_edges(app: ApplicationGraph) -> list[dict]:
    """Leftover transfers with their exact compositions, for reports."""
    state = analyze_flow(app)
    return [
        {"from": e.src, "to": e.dst, "volume": e.volume, "composition": scale_composition(state.content[e.src], e.volume)}
        for e in app.edges
        if e.lof
    ]


# ------------------------------------------------------- 1:1 mixing trees

@dataclass(frozen=True)
class TreePool:
    """Merged 1:1 mixing events serving several targets built from the same two fluids."""

    steps: tuple[MixStep, ...]
    products: dict[Fraction, int]  # concentration -> units delivered
    reagents: tuple[str, str] = ("A", "B")

    @property
    def balance(self) -> VertexBalance:
        return vertex_balance(self.steps, self.products)

    @property
    def leaves(self) -> dict[str, int]:
        b = self.balance
        return {self.reagents[0]: b.demand.get(Fraction(1), 0), self.reagents[1]: b.demand.get(Fraction(0), 0)}

    @property
    def fluid_cost(self) -> int:
        return sum(self.leaves.values())

    @property
    def op_count(self) -> int:
        return sum(s.count for s in self.steps)

    def waste(self) -> dict[Fraction, int]:
        b = self.balance
        return {v: b.waste(v) for v in sorted(b.supply) if b.waste(v)}


def share_trees(trees: Sequence[MixingTree]) -> TreePool:
    """Pool the events of ``trees`` and drop the ones made redundant by leftovers.

    Vertices are visited from the deepest level up.  While a vertex holds at
    least two spare units one of its events is removed, which frees one unit
    at each parent.  Among a vertex's pairs the one freeing pure reagent, or
    pushing a parent to a removable surplus, goes first; wider pairs break ties.
    """
    if not trees:
        return TreePool((), {})
    reagents = trees[0].reagents
    counts: dict[tuple[Fraction, Fraction, Fraction], int] = defaultdict(int)
    products: dict[Fraction, int] = defaultdict(int)
    for t in trees:
        products[t.target] += t.units_out
        for s in t.steps:
            counts[(s.vertex, s.left, s.right)] += s.count

    def balance() -> VertexBalance:
        return vertex_balance([MixStep(v, l, r, c) for (v, l, r), c in counts.items() if c], products)

    for v in sorted({k[0] for k in counts}, key=lambda c: (-level_of(c), c)):
        bal = balance()
        while bal.waste(v) >= 2:
            live = [k for k, c in counts.items() if k[0] == v and c]
            if not live:
                break

            def useful(p: Fraction) -> bool:
                return p in (0, 1) or bal.waste(p) + 1 >= 2

            key = max(live, key=lambda k: (useful(k[1]) + useful(k[2]), k[2] - k[1], k))
            counts[key] -= 1
            bal = balance()
    steps = canonical_steps(MixStep(v, l, r, c) for (v, l, r), c in counts.items() if c)
    return TreePool(steps, dict(products), reagents)


def select_tree_variants(
    options: Sequence[Sequence[MixingTree]], beam: int = 32, exhaustive: bool = False
) -> tuple[MixingTree, ...]:
    """Pick one tree per target so the shared pool needs the least input.

    Ties go to fewer mixing events, then to the earliest variants.  Partial
    choices are kept in a beam of ``beam`` entries unless ``exhaustive``.
    """
    if not options:
        return ()

    def score(choice: tuple[int, ...]) -> tuple:
        pool = share_trees([options[i][j] for i, j in enumerate(choice)])
        return (pool.fluid_cost, pool.op_count, choice)

    partial: list[tuple[int, ...]] = [()]
    for i, opts in enumerate(options):
        grown = [p + (j,) for p in partial for j in range(len(opts))]
        grown.sort(key=score)
        partial = grown if exhaustive else grown[:beam]
    best = partial[0]
    return tuple(options[i][j] for i, j in enumerate(best))
