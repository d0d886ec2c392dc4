"""Minimal fluid volume assignment in reverse topological order."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Mapping

from .model import (
    DEFAULT_EPSILON,
    ApplicationGraph,
    ArchitectureSpec,
    Diagnostic,
    FvaError,
    NodeKind,
    NotSatisfiable,
    edge_volume,
    topo_order,
    validate,
)

MAX_REPLICATION = 16


class InvalidApplication(FvaError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class Mvr:
    volumes: Mapping[str, Fraction]  # source node id -> volume

    @property
    def total(self) -> Fraction:
        return sum(self.volumes.values(), Fraction(0))


@dataclass(frozen=True)
class Fva:
    volumes: Mapping[str, Fraction]  # total over all instances
    x: int
    required_output: Fraction
    replication_factor: int = 1

    @property
    def total(self) -> Fraction:
        return sum(self.volumes.values(), Fraction(0))

    @property
    def per_instance(self) -> dict[str, Fraction]:
        return {k: v / self.replication_factor for k, v in self.volumes.items()}


def ratio_numerators(ratios: Mapping[str, Fraction]) -> dict[str, int]:
    """Smallest integer numerators proportional to ``ratios``."""
    lcm = 1
    for r in ratios.values():
        lcm = lcm * r.denominator // math.gcd(lcm, r.denominator)
    ints = {k: int(r * lcm) for k, r in ratios.items()}
    g = 0
    for v in ints.values():
        g = math.gcd(g, v)
    return {k: v // g for k, v in ints.items()}


def compute_mvr(app: ApplicationGraph, node_id: str, arch: ArchitectureSpec) -> Mvr:
    """Smallest dispensable input volumes that let ``node_id`` execute.

    Mix nodes take ``HTR * numerator`` per input.  Other nodes take their
    edge requirement (or the FFU class MVR, if larger) rounded up to the HTR.
    """
    node = app.node(node_id)
    ins = sorted(app.in_edges(node_id), key=lambda e: e.src)
    if node.kind is NodeKind.MIX:
        nums = ratio_numerators({e.src: e.ratio for e in ins})
        return Mvr({k: arch.htr * n for k, n in nums.items()})
    vols = {e.src: arch.round_up(e.required_volume or Fraction(0)) for e in ins}
    if node.kind is not NodeKind.OUTPUT and ins:
        floor = arch.round_up(arch.ffu(node.ffu_class).mvr)
        short = floor - sum(vols.values(), Fraction(0))
        if short > 0:
            vols[ins[0].src] += short
    return Mvr(vols)


def static_replication(
    volumes: Mapping[str, Fraction], mhc: Fraction, htr: Fraction, max_k: int = MAX_REPLICATION
) -> int:
    """Smallest instance count ``k`` whose even split fits the hardware.

    Each of the ``k`` instances gets ``volume / k`` per input; those shares
    must stay positive HTR multiples and sum to at most ``mhc``.
    """
    tot = sum(volumes.values(), Fraction(0))
    for k in range(1, max_k + 1):
        if tot / k > mhc:
            continue
        if all(v > 0 and (v / k / htr).denominator == 1 for v in volumes.values()):
            return k
    raise NotSatisfiable(f"no split of {dict(volumes)} into <= {max_k} instances fits MHC {mhc} at HTR {htr}")


def scale_to_demand(
    mvr: Mvr, kind: NodeKind, required: Fraction, arch: ArchitectureSpec, mhc: Fraction | None,
    max_k: int = MAX_REPLICATION,
) -> Fva:
    """Grow the MVR until it covers ``required`` and can be replicated within MHC.

    Mix nodes multiply every input by ``x`` (ratio kept); other nodes add
    ``x * HTR`` to their first input.
    """
    keys = list(mvr.volumes)
    if kind is NodeKind.MIX:
        base = mvr.total
        x = max(1, math.ceil(required / base))

        def make(x: int) -> dict[str, Fraction]:
            return {k: v * x for k, v in mvr.volumes.items()}
    else:
        x = max(0, math.ceil((required - mvr.total) / arch.htr))

        def make(x: int) -> dict[str, Fraction]:
            out = dict(mvr.volumes)
            out[keys[0]] += arch.htr * x
            return out

    if mhc is None:
        return Fva(make(x), x, required)
    limit = mhc * max_k
    while True:
        vols = make(x)
        tot = sum(vols.values(), Fraction(0))
        if tot > limit:
            raise NotSatisfiable(f"needs {tot} to deliver {required}, beyond {max_k} x MHC {mhc}")
        try:
            k = static_replication(vols, mhc, arch.htr, max_k)
        except NotSatisfiable:
            x += 1
            continue
        return Fva(vols, x, required, k)


def _check(app: ApplicationGraph, arch: ArchitectureSpec) -> None:
    diags = validate(app, arch)
    if diags:
        raise InvalidApplication(diags)


def assign_volumes(
    app: ApplicationGraph, arch: ArchitectureSpec, max_replication: int = MAX_REPLICATION
) -> ApplicationGraph:
    """Single reverse-topological pass assigning an FVA to every operation.

    Each node sums what its successors draw from it, starts from its MVR
    and scales until that demand is met, then splits into parallel
    instances if one FFU cannot hold the result.
    """
    _check(app, arch)
    demand: dict[tuple[str, str], Fraction] = {}
    nodes = {}
    for nid in topo_order(app, reverse=True):
        n = app.node(nid)
        if n.kind is NodeKind.INPUT:
            nodes[nid] = n
            continue
        if n.kind is NodeKind.OUTPUT:
            for e in app.in_edges(nid):
                demand[(e.src, nid)] = e.required_volume
            nodes[nid] = n
            continue
        rf = sum((demand[(nid, e.dst)] for e in app.out_edges(nid)), Fraction(0))
        mvr = compute_mvr(app, nid, arch)
        fva = scale_to_demand(mvr, n.kind, rf, arch, arch.ffu(n.ffu_class).mhc, max_replication)
        for src, v in fva.volumes.items():
            demand[(src, nid)] = v
        nodes[nid] = replace(n, fva=dict(fva.volumes), x=fva.x, replication_factor=fva.replication_factor)
    edges = [replace(e, volume=demand[(e.src, e.dst)]) for e in app.edges]
    return app.with_changes([nodes[n.id] for n in app.nodes], edges)


def assign_mvr_only(app: ApplicationGraph, arch: ArchitectureSpec) -> ApplicationGraph:
    """Every operation gets exactly its MVR, ignoring downstream demand."""
    _check(app, arch)
    vols: dict[tuple[str, str], Fraction] = {}
    nodes = []
    for n in app.nodes:
        if n.kind is NodeKind.INPUT:
            nodes.append(n)
            continue
        mvr = compute_mvr(app, n.id, arch)
        for src, v in mvr.volumes.items():
            vols[(src, n.id)] = v
        nodes.append(n if n.kind is NodeKind.OUTPUT else replace(n, fva=dict(mvr.volumes), x=1 if n.kind is NodeKind.MIX else 0))
    return app.with_changes(nodes, [replace(e, volume=vols[(e.src, e.dst)]) for e in app.edges])


def shortages(app: ApplicationGraph) -> dict[str, Fraction]:
    """Fluid each consumer is missing because its producer holds too little.

    Producers serve their consumers in ascending id order.
    """
    short: dict[str, Fraction] = {}
    for n in app.nodes:
        if n.kind in (NodeKind.INPUT, NodeKind.OUTPUT):
            continue
        have = sum((edge_volume(e) for e in app.in_edges(n.id)), Fraction(0))
        for e in sorted(app.out_edges(n.id), key=lambda e: e.dst):
            need = edge_volume(e)
            got = min(have, need)
            have -= got
            if got < need:
                short[e.dst] = short.get(e.dst, Fraction(0)) + need - got
    return short


# --------------------------------------------------------- arbitrary mixers

@dataclass(frozen=True)
class MixTarget:
    reagent_a: str
    reagent_b: str
    share_a: Fraction
    required_output: Fraction

    @property
    def share_b(self) -> Fraction:
        return 1 - self.share_a


@dataclass(frozen=True)
class ArbitraryMix:
    target: MixTarget
    volume_a: Fraction
    volume_b: Fraction

    @property
    def total(self) -> Fraction:
        return self.volume_a + self.volume_b

    @property
    def error(self) -> Fraction:
        return abs(self.volume_a / self.total - self.target.share_a)


def assign_arbitrary(
    target: MixTarget,
    arch: ArchitectureSpec,
    epsilon: Fraction = DEFAULT_EPSILON,
    mixer: str = "mixer",
) -> ArbitraryMix:
    """One partially filled mixer run: smallest total, then smallest share error."""
    htr = arch.htr
    mhc = arch.ffu(mixer).mhc
    t = max(arch.round_up(target.required_output), 2 * htr)
    while t <= mhc:
        n = int(t / htr)
        best = None
        for a in range(1, n):
            va = a * htr
            err = abs(va / t - target.share_a)
            if err <= epsilon and (best is None or err < best[0]):
                best = (err, va)
        if best is not None:
            return ArbitraryMix(target, best[1], t - best[1])
        t += htr
    raise NotSatisfiable(f"no HTR-multiple split of {target.share_a} fits MHC {mhc} within {epsilon}")
