"""Exact-arithmetic domain model for biochip architectures and applications.

All volumes, ratios and concentrations are :class:`fractions.Fraction`.
Floating point is only used when rendering reports.
"""

from __future__ import annotations

import enum
import heapq
from collections import defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping

Rational = Fraction
Volume = Fraction
Composition = Mapping[str, Fraction]

DEFAULT_EPSILON = Fraction(1, 100)


class FvaError(Exception):
    """Base class for all errors raised by this package."""


class CycleDetected(FvaError):
    pass


class NotSatisfiable(FvaError):
    """No hardware-feasible volume assignment exists."""


class NodeKind(str, enum.Enum):
    INPUT = "Input"
    MIX = "Mix"
    DETECT = "Detect"
    GENERIC = "Generic"
    OUTPUT = "Output"


class MixerTechnology(str, enum.Enum):
    FIXED_1TO1 = "Fixed1to1"
    ARBITRARY = "ArbitraryRatio"


@dataclass(frozen=True)
class FfuClass:
    name: str
    mhc: Fraction
    mvr: Fraction = Fraction(0)
    chamber_count: int = 1


@dataclass(frozen=True)
class ArchitectureSpec:
    unit: str
    htr: Fraction
    ffu_classes: tuple[FfuClass, ...]
    mixer_technology: MixerTechnology = MixerTechnology.ARBITRARY

    def ffu(self, name: str) -> FfuClass:
        for c in self.ffu_classes:
            if c.name == name:
                return c
        raise KeyError(name)

    def has_ffu(self, name: str) -> bool:
        return any(c.name == name for c in self.ffu_classes)

    def dispensable(self, volume: Fraction) -> bool:
        return volume >= 0 and (volume / self.htr).denominator == 1

    def round_up(self, volume: Fraction) -> Fraction:
        """Smallest HTR multiple >= ``volume``."""
        q = volume / self.htr
        n = -(-q.numerator // q.denominator)
        return max(n, 0) * self.htr

    def diagnostics(self) -> list[Diagnostic]:
        out = []
        if self.htr <= 0:
            out.append(Diagnostic("BadHtr", f"htr must be positive, got {self.htr}"))
            return out
        for c in self.ffu_classes:
            if c.mhc <= 0 or not self.dispensable(c.mhc):
                out.append(Diagnostic("BadFfu", f"{c.name}: mhc {c.mhc} is not a positive HTR multiple"))
            if not 0 <= c.mvr <= c.mhc:
                out.append(Diagnostic("BadFfu", f"{c.name}: mvr {c.mvr} outside [0, mhc]"))
            if c.chamber_count < 1:
                out.append(Diagnostic("BadFfu", f"{c.name}: chamber_count must be positive"))
            if c.chamber_count == 2 and not self.dispensable(c.mhc / 2):
                out.append(Diagnostic("BadFfu", f"{c.name}: chamber volume {c.mhc / 2} is not an HTR multiple"))
        return out


@dataclass(frozen=True)
class OpNode:
    id: str
    kind: NodeKind
    ffu_class: str = ""
    fva: Mapping[str, Fraction] | None = None  # source node id -> volume
    x: int | None = None
    replication_factor: int = 1


@dataclass(frozen=True)
class FlowEdge:
    src: str
    dst: str
    ratio: Fraction | None = None
    required_volume: Fraction | None = None
    volume: Fraction | None = None  # assigned volume, total over all instances
    lof: bool = False


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    node: str | None = None
    edge: tuple[str, str] | None = None

    def __str__(self) -> str:
        where = self.node or (f"{self.edge[0]}->{self.edge[1]}" if self.edge else "")
        return f"{self.code}[{where}]: {self.message}" if where else f"{self.code}: {self.message}"


@dataclass(frozen=True, eq=False)
class ApplicationGraph:
    nodes: tuple[OpNode, ...]
    edges: tuple[FlowEdge, ...]
    inputs: Mapping[str, str] = field(default_factory=dict)  # input node id -> reagent label
    unit: str | None = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ApplicationGraph):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and self.edges == other.edges
            and dict(self.inputs) == dict(other.inputs)
            and self.unit == other.unit
        )

    @cached_property
    def _by_id(self) -> dict[str, OpNode]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def _in(self) -> dict[str, list[FlowEdge]]:
        d: dict[str, list[FlowEdge]] = defaultdict(list)
        for e in self.edges:
            d[e.dst].append(e)
        return d

    @cached_property
    def _out(self) -> dict[str, list[FlowEdge]]:
        d: dict[str, list[FlowEdge]] = defaultdict(list)
        for e in self.edges:
            d[e.src].append(e)
        return d

    def node(self, node_id: str) -> OpNode:
        return self._by_id[node_id]

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._by_id

    def in_edges(self, node_id: str) -> list[FlowEdge]:
        return list(self._in.get(node_id, ()))

    def out_edges(self, node_id: str) -> list[FlowEdge]:
        return list(self._out.get(node_id, ()))

    def edge(self, src: str, dst: str) -> FlowEdge:
        for e in self._out.get(src, ()):
            if e.dst == dst:
                return e
        raise KeyError((src, dst))

    def reagent(self, input_id: str) -> str:
        return self.inputs.get(input_id, input_id)

    def with_changes(self, nodes: Iterable[OpNode] | None = None, edges: Iterable[FlowEdge] | None = None) -> ApplicationGraph:
        return replace(
            self,
            nodes=tuple(self.nodes if nodes is None else nodes),
            edges=tuple(self.edges if edges is None else edges),
        )

    def ancestors(self, node_id: str) -> set[str]:
        seen: set[str] = set()
        stack = [node_id]
        while stack:
            for e in self._in.get(stack.pop(), ()):
                if e.src not in seen:
                    seen.add(e.src)
                    stack.append(e.src)
        return seen


def _kahn(ids: Iterable[str], edges: Iterable[tuple[str, str]]) -> list[str]:
    ids = list(ids)
    indeg = {i: 0 for i in ids}
    succ: dict[str, list[str]] = defaultdict(list)
    for a, b in edges:
        succ[a].append(b)
        indeg[b] += 1
    heap = [i for i, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        n = heapq.heappop(heap)
        order.append(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(heap, m)
    if len(order) != len(ids):
        stuck = sorted(i for i, d in indeg.items() if d > 0)
        raise CycleDetected(f"cycle through {', '.join(stuck)}")
    return order


def topo_order(app: ApplicationGraph, reverse: bool = False) -> list[str]:
    """Deterministic topological order; ties broken by ascending node id.

    With ``reverse=True`` every node appears after all of its successors,
    again picking the smallest id among the ready nodes.
    """
    pairs = [(e.src, e.dst) for e in app.edges]
    if reverse:
        pairs = [(b, a) for a, b in pairs]
    return _kahn((n.id for n in app.nodes), pairs)


def validate(app: ApplicationGraph, arch: ArchitectureSpec) -> list[Diagnostic]:
    diags = list(arch.diagnostics())
    if any(d.code == "BadHtr" for d in diags):
        return diags
    if app.unit is not None and app.unit != arch.unit:
        diags.append(Diagnostic("UnitMismatch", f"application unit {app.unit!r} != architecture unit {arch.unit!r}"))

    ids = [n.id for n in app.nodes]
    seen: set[str] = set()
    for i in ids:
        if i in seen:
            diags.append(Diagnostic("DuplicateNode", "node id used twice", node=i))
        seen.add(i)

    pairs = set()
    for e in app.edges:
        if e.src not in seen or e.dst not in seen:
            diags.append(Diagnostic("UnknownNode", "edge references an unknown node", edge=(e.src, e.dst)))
        if e.src == e.dst:
            diags.append(Diagnostic("CycleDetected", "self-loop", edge=(e.src, e.dst)))
        if (e.src, e.dst) in pairs:
            diags.append(Diagnostic("DuplicateEdge", "parallel edges are not supported", edge=(e.src, e.dst)))
        pairs.add((e.src, e.dst))
    if any(d.code in ("UnknownNode", "DuplicateNode") for d in diags):
        return diags

    if not any(d.code == "CycleDetected" for d in diags):
        try:
            topo_order(app)
        except CycleDetected as exc:
            diags.append(Diagnostic("CycleDetected", str(exc)))

    for n in app.nodes:
        ins, outs = app.in_edges(n.id), app.out_edges(n.id)
        if n.kind is not NodeKind.INPUT and n.kind is not NodeKind.OUTPUT and not arch.has_ffu(n.ffu_class):
            diags.append(Diagnostic("UnknownFfuClass", f"no FFU class {n.ffu_class!r}", node=n.id))
        if n.kind is NodeKind.INPUT:
            if ins:
                diags.append(Diagnostic("NotPolar", "input node has incoming edges", node=n.id))
            if not outs:
                diags.append(Diagnostic("NotPolar", "input node feeds nothing", node=n.id))
        elif not ins:
            diags.append(Diagnostic("NotPolar", "non-input node has no incoming edges", node=n.id))
        if n.kind is NodeKind.OUTPUT:
            if outs:
                diags.append(Diagnostic("NotPolar", "output node has outgoing edges", node=n.id))
        elif not outs:
            diags.append(Diagnostic("NotPolar", "non-output node has no outgoing edges", node=n.id))

        if n.kind is NodeKind.MIX:
            ratios = [e.ratio for e in ins if not e.lof]
            if any(r is None for r in ratios):
                diags.append(Diagnostic("MissingRatio", "mix input edge without ratio", node=n.id))
            else:
                if any(r <= 0 for r in ratios):
                    diags.append(Diagnostic("BadRatio", "ratios must be positive", node=n.id))
                if sum(ratios) != 1:
                    diags.append(Diagnostic("RatioSumNotOne", f"ratios sum to {sum(ratios)}", node=n.id))
        else:
            for e in ins:
                if e.lof:
                    continue
                if e.ratio is not None or e.required_volume is None:
                    diags.append(Diagnostic("MissingRequiredVolume", "non-mix input edge needs required_volume", edge=(e.src, e.dst)))
        if n.fva:
            for src, v in n.fva.items():
                if not arch.dispensable(v / n.replication_factor):
                    diags.append(Diagnostic("NotDispensable", f"fva {v} from {src} is not dispensable", node=n.id))
    for e in app.edges:
        for v in (e.required_volume, e.volume):
            if v is not None and not arch.dispensable(v):
                diags.append(Diagnostic("NotDispensable", f"{v} is not an HTR multiple", edge=(e.src, e.dst)))
    return diags


# ---------------------------------------------------------------- compositions

def total(c: Composition) -> Fraction:
    return sum(c.values(), Fraction(0))


def mix_composition(a: Composition, b: Composition) -> dict[str, Fraction]:
    """Component-wise sum of two fluid parcels."""
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, Fraction(0)) + v
    return out


def scale_composition(c: Composition, volume: Fraction) -> dict[str, Fraction]:
    """Take ``volume`` out of parcel ``c`` keeping its proportions."""
    t = total(c)
    if t == 0:
        return {k: Fraction(0) for k in c}
    f = Fraction(volume) / t
    return {k: v * f for k, v in c.items()}


def shares(c: Composition) -> dict[str, Fraction]:
    t = total(c)
    return {k: v / t for k, v in c.items()} if t else {}


def share_deviation(achieved: Composition, nominal: Composition) -> Fraction:
    """Largest absolute difference in reagent share between two parcels."""
    a, n = shares(achieved), shares(nominal)
    keys = set(a) | set(n)
    return max((abs(a.get(k, 0) - n.get(k, 0)) for k in keys), default=Fraction(0))


# ------------------------------------------------------------- flow analysis

@dataclass(frozen=True)
class FlowState:
    """Compositions of every node under an assigned graph."""

    content: dict[str, dict[str, Fraction]]  # fluid a node holds (inputs: what it dispenses)
    leftover: dict[str, dict[str, Fraction]]  # undelivered remainder per node
    dispensed: dict[str, Fraction]  # per reagent, from input reservoirs
    delivered: dict[str, Fraction]  # per reagent, collected by output nodes
    discarded: dict[str, Fraction]  # per reagent, leftovers never used


def edge_volume(e: FlowEdge) -> Fraction:
    if e.volume is not None:
        return e.volume
    return e.required_volume or Fraction(0)


def analyze_flow(app: ApplicationGraph) -> FlowState:
    content: dict[str, dict[str, Fraction]] = {}
    leftover: dict[str, dict[str, Fraction]] = {}
    dispensed: dict[str, Fraction] = defaultdict(Fraction)
    delivered: dict[str, Fraction] = defaultdict(Fraction)
    discarded: dict[str, Fraction] = defaultdict(Fraction)
    for nid in topo_order(app):
        n = app.node(nid)
        out_vol = sum((edge_volume(e) for e in app.out_edges(nid)), Fraction(0))
        if n.kind is NodeKind.INPUT:
            label = app.reagent(nid)
            content[nid] = {label: out_vol}
            dispensed[label] += out_vol
            continue
        c: dict[str, Fraction] = {}
        for e in app.in_edges(nid):
            c = mix_composition(c, scale_composition(content[e.src], edge_volume(e)))
        content[nid] = c
        if n.kind is NodeKind.OUTPUT:
            for k, v in c.items():
                delivered[k] += v
            continue
        rest = total(c) - out_vol
        if rest < 0:
            raise NotSatisfiable(f"underflow at {nid}: holds {total(c)}, must deliver {out_vol}")
        left = scale_composition(c, rest)
        leftover[nid] = left
        for k, v in left.items():
            discarded[k] += v
    return FlowState(content, leftover, dict(dispensed), dict(delivered), dict(discarded))


def underflows(app: ApplicationGraph) -> dict[str, Fraction]:
    """Shortage per node (received minus passed on, where negative)."""
    short = {}
    for n in app.nodes:
        if n.kind in (NodeKind.INPUT, NodeKind.OUTPUT):
            continue
        got = sum((edge_volume(e) for e in app.in_edges(n.id)), Fraction(0))
        need = sum((edge_volume(e) for e in app.out_edges(n.id)), Fraction(0))
        if need > got:
            short[n.id] = need - got
    return short


def input_consumption(app: ApplicationGraph) -> dict[str, Fraction]:
    used: dict[str, Fraction] = defaultdict(Fraction)
    for n in app.nodes:
        if n.kind is NodeKind.INPUT:
            used[app.reagent(n.id)] += sum((edge_volume(e) for e in app.out_edges(n.id)), Fraction(0))
    return dict(used)
