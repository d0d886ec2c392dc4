"""Ratio approximation and 1:1 mixing-tree synthesis.

Concentrations are the share of reagent A in a two-reagent fluid, so the
pure reagents sit at 1 (A) and 0 (B).  A 1:1 mixing event consumes one unit
(one mixer chamber) of each of two fluids and yields two units of their
average.  Every non-pure concentration reachable with at most ``d`` events in
sequence is ``k / 2**l`` with ``k`` odd and ``l <= d``.

The network graph used by the exact search is a reconstruction: vertex
``v`` at level ``l`` can be produced from any pair ``(v - delta, v + delta)``
of lower-level vertices.  The pruned variant keeps the nearest-concentration
pairs of each vertex until four distinct parent vertices are used.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

from .model import FvaError

DEFAULT_BUDGET = 10**7


class InvalidRatio(FvaError, ValueError):
    pass


class Unreachable(FvaError):
    pass


class SearchBudgetExceeded(FvaError):
    def __init__(self, expanded: int, budget: int):
        super().__init__(f"search expanded {expanded} states, budget is {budget}")
        self.expanded = expanded
        self.budget = budget


class SearchMode(str, enum.Enum):
    EXACT = "exact"
    PRUNED4 = "pruned4"
    MINMIX = "minmix"


def level_of(c: Fraction) -> int:
    """Number of sequential 1:1 mixes needed to reach concentration ``c``."""
    d = c.denominator
    if d & (d - 1):
        raise InvalidRatio(f"{c} is not a dyadic concentration")
    return d.bit_length() - 1


def parse_ratio(text: str) -> Fraction:
    """``"1:3"`` -> share of the first reagent, 1/4.  ``"1/4"`` is taken as a share."""
    text = text.strip()
    if ":" in text:
        a, b = (Fraction(p) for p in text.split(":"))
        if a <= 0 or b <= 0:
            raise InvalidRatio(f"ratio parts must be positive: {text!r}")
        return a / (a + b)
    s = Fraction(text)
    if not 0 < s < 1:
        raise InvalidRatio(f"share must lie in (0, 1): {text!r}")
    return s


@dataclass(frozen=True)
class ApproxRatio:
    numer_a: int
    numer_b: int
    depth: int
    error: Fraction = Fraction(0)

    @property
    def share_a(self) -> Fraction:
        return Fraction(self.numer_a, 2**self.depth)

    def __str__(self) -> str:
        return f"{self.numer_a}:{self.numer_b}"

    @classmethod
    def from_share(cls, share: Fraction, target: Fraction | None = None) -> ApproxRatio:
        d = level_of(share)
        a = share.numerator * (2**d // share.denominator)
        err = abs(share - target) if target is not None else Fraction(0)
        return cls(a, 2**d - a, d, err)


def approximate_ratio(share_a: Fraction, precision: int) -> ApproxRatio:
    """Closest ``k / 2**j`` (``j <= precision``) to ``share_a``.

    Ties go to the smaller depth, then the smaller numerator, so the result
    is always in lowest terms.
    """
    share_a = Fraction(share_a)
    if not 0 < share_a < 1:
        raise InvalidRatio(f"share must lie in (0, 1), got {share_a}")
    if precision < 1:
        raise InvalidRatio("precision must be at least 1")
    best = None
    for j in range(1, precision + 1):
        scale = 2**j
        lo = (share_a * scale).numerator // (share_a * scale).denominator
        for k in (lo, lo + 1):
            if 0 < k < scale:
                key = (abs(Fraction(k, scale) - share_a), j, k)
                if best is None or key < best:
                    best = key
    _, j, k = best
    return ApproxRatio.from_share(Fraction(k, 2**j), share_a)


# ----------------------------------------------------------------- trees

@dataclass(frozen=True, order=True)
class MixStep:
    """``count`` 1:1 mixing events producing ``vertex`` from ``left`` and ``right``."""

    vertex: Fraction
    left: Fraction
    right: Fraction
    count: int = 1

    @property
    def level(self) -> int:
        return level_of(self.vertex)


def _step_key(s: MixStep) -> tuple:
    return (-s.level, s.vertex, s.left)


def canonical_steps(steps: Iterable[MixStep]) -> tuple[MixStep, ...]:
    merged: dict[tuple[Fraction, Fraction, Fraction], int] = defaultdict(int)
    for s in steps:
        merged[(s.vertex, s.left, s.right)] += s.count
    out = [MixStep(v, l, r, c) for (v, l, r), c in merged.items() if c > 0]
    return tuple(sorted(out, key=_step_key))


@dataclass(frozen=True)
class VertexBalance:
    supply: dict[Fraction, int]
    demand: dict[Fraction, int]

    def waste(self, v: Fraction) -> int:
        return self.supply.get(v, 0) - self.demand.get(v, 0)


def vertex_balance(steps: Sequence[MixStep], products: Mapping[Fraction, int]) -> VertexBalance:
    supply: dict[Fraction, int] = defaultdict(int)
    demand: dict[Fraction, int] = defaultdict(int)
    for v, u in products.items():
        demand[v] += u
    for s in steps:
        supply[s.vertex] += 2 * s.count
        demand[s.left] += s.count
        demand[s.right] += s.count
    return VertexBalance(dict(supply), dict(demand))


@dataclass(frozen=True)
class WasteEntry:
    concentration: Fraction
    units: int
    step: int  # index into MixingTree.steps


@dataclass(frozen=True)
class MixingTree:
    """A set of 1:1 mixing steps delivering ``units_out`` units of ``target``.

    ``steps`` are kept in canonical order (deepest level first).
    """

    target: Fraction
    units_out: int
    steps: tuple[MixStep, ...]
    reagents: tuple[str, str] = ("A", "B")

    def __post_init__(self):
        object.__setattr__(self, "steps", canonical_steps(self.steps))

    @property
    def balance(self) -> VertexBalance:
        return vertex_balance(self.steps, {self.target: self.units_out})

    @property
    def leaves(self) -> dict[str, int]:
        b = self.balance
        return {self.reagents[0]: b.demand.get(Fraction(1), 0), self.reagents[1]: b.demand.get(Fraction(0), 0)}

    @property
    def fluid_cost(self) -> int:
        return sum(self.leaves.values())

    @property
    def op_count(self) -> int:
        """Number of mixing events (mixer fills)."""
        return sum(s.count for s in self.steps)

    @property
    def depth(self) -> int:
        return level_of(self.target)

    @property
    def surplus(self) -> int:
        return self.balance.waste(self.target)

    @property
    def waste_ledger(self) -> tuple[WasteEntry, ...]:
        b = self.balance
        out, seen = [], set()
        for i, s in enumerate(self.steps):
            if s.vertex in seen or s.vertex == self.target:
                continue
            seen.add(s.vertex)
            w = b.waste(s.vertex)
            if w:
                out.append(WasteEntry(s.vertex, w, i))
        return tuple(out)

    def encoding(self) -> tuple:
        return tuple((s.vertex, s.left, s.right, s.count) for s in self.steps)

    def check(self) -> None:
        """Raise ``InvalidRatio`` unless the tree is a consistent unit flow."""
        if not self.steps:
            raise InvalidRatio("empty tree")
        b = self.balance
        for s in self.steps:
            if s.left + s.right != 2 * s.vertex or not s.left < s.vertex < s.right:
                raise InvalidRatio(f"step {s} does not average its inputs")
            if not 0 <= s.left or not s.right <= 1 or s.count < 1:
                raise InvalidRatio(f"step {s} out of range")
            if max(level_of(s.left), level_of(s.right)) >= s.level:
                raise InvalidRatio(f"step {s} uses a parent at its own level")
        for v, need in b.demand.items():
            if v in (0, 1):
                continue
            if b.supply.get(v, 0) < need:
                raise InvalidRatio(f"vertex {v} supplies {b.supply.get(v, 0)} < {need}")


@dataclass(frozen=True)
class TreeMetrics:
    fluid_cost: int
    op_count: int
    waste_profile: dict[Fraction, int]
    surplus: int


def tree_metrics(t: MixingTree) -> TreeMetrics:
    profile: dict[Fraction, int] = defaultdict(int)
    for w in t.waste_ledger:
        profile[w.concentration] += w.units
    return TreeMetrics(t.fluid_cost, t.op_count, dict(profile), t.surplus)


def _as_approx(target: ApproxRatio | Fraction) -> ApproxRatio:
    if isinstance(target, ApproxRatio):
        return target
    return ApproxRatio.from_share(Fraction(target))


def min_mix_tree(r: ApproxRatio | Fraction, units_out: int = 1, reagents: tuple[str, str] = ("A", "B")) -> MixingTree:
    """Left-deep Min-Mix chain read off the binary expansion of the numerators.

    The deepest step mixes pure A with pure B; every later step ``j`` mixes the
    running chain with the pure reagent whose numerator has bit ``j`` set.  All
    steps run ``ceil(units_out / 2)`` times so the chain is uniformly scaled.
    """
    r = _as_approx(r)
    a, b, d = r.numer_a, r.numer_b, r.depth
    if units_out < 1:
        raise InvalidRatio("units_out must be positive")
    if d < 1 or a < 1 or b < 1 or a + b != 2**d or not (a & 1 and b & 1):
        raise InvalidRatio(f"{a}:{b} at depth {d} is not a reduced dyadic ratio")
    k = -(-units_out // 2)
    steps = [MixStep(Fraction(1, 2), Fraction(0), Fraction(1), k)]
    c = Fraction(1, 2)
    for j in range(1, d):
        pure = Fraction(1) if (a >> j) & 1 else Fraction(0)
        nxt = (c + pure) / 2
        steps.append(MixStep(nxt, min(c, pure), max(c, pure), k))
        c = nxt
    return MixingTree(c, units_out, tuple(steps), reagents)


# ---------------------------------------------------------------- network

@dataclass(frozen=True)
class NetworkGraph:
    depth: int
    pairs: Mapping[Fraction, tuple[tuple[Fraction, Fraction], ...]]
    pruned: bool = False

    @property
    def vertices(self) -> list[Fraction]:
        return [Fraction(0), Fraction(1), *sorted(self.pairs, key=lambda v: (level_of(v), v))]

    def parents(self, v: Fraction) -> set[Fraction]:
        return {p for pair in self.pairs[v] for p in pair}

    def prune(self, keep: int = 4) -> NetworkGraph:
        return NetworkGraph(self.depth, {v: _prune_pairs(p, keep) for v, p in self.pairs.items()}, True)


def _prune_pairs(pairs: Sequence[tuple[Fraction, Fraction]], keep: int) -> tuple[tuple[Fraction, Fraction], ...]:
    kept, used = [], set()
    for pair in pairs:
        if len(used | set(pair)) > keep:
            break
        kept.append(pair)
        used |= set(pair)
    return tuple(kept)


def build_network(d: int, prune: int | None = None) -> NetworkGraph:
    """All dyadic concentrations up to level ``d`` with their parent pairs.

    Pairs are listed by ascending distance from the vertex.
    """
    if not 1 <= d <= 12:
        raise ValueError("network depth must be in 1..12")
    if prune not in (None, 4):
        raise ValueError("only 4-vertex pruning is supported")
    pairs: dict[Fraction, tuple[tuple[Fraction, Fraction], ...]] = {}
    for lvl in range(1, d + 1):
        scale = 2**lvl
        for k in range(1, scale, 2):
            v = Fraction(k, scale)
            pairs[v] = tuple(
                (Fraction(k - j, scale), Fraction(k + j, scale))
                for j in range(1, min(k, scale - k) + 1, 2)
            )
    net = NetworkGraph(d, pairs)
    return net.prune(prune) if prune else net


# ----------------------------------------------------------------- search

def _compositions(m: int, n: int) -> Iterator[tuple[int, ...]]:
    """All ways to split ``m`` into ``n`` ordered parts, front-loaded first."""
    if n == 1:
        yield (m,)
        return
    for first in range(m, -1, -1):
        for rest in _compositions(m - first, n - 1):
            yield (first, *rest)


@dataclass
class _Search:
    scale: int
    order: list[int]
    pairs: dict[int, list[tuple[int, int]]]
    wa: Fraction
    wb: Fraction
    budget: int
    expanded: int = 0
    best: tuple | None = None
    solutions: list[dict[tuple[int, int, int], int]] = field(default_factory=list)

    def cost(self, pa: int, pb: int):
        return self.wa * pa + self.wb * pb

    def run(self, target: int, units: int) -> None:
        demand = defaultdict(int, {target: units})
        self._visit(0, demand, 0, 0, 0, {})

    def _bound(self, i: int, demand, pa: int, pb: int, ops: int):
        sa = sb = 0
        extra = 0
        for v in self.order[i:]:
            dv = demand.get(v, 0)
            if dv:
                # only demand committed by processed steps; a frontier vertex's
                # own production may be consumed by another frontier vertex
                extra += -(-dv // 2)
                sa += dv * v
                sb += dv * (self.scale - v)
        la = pa + -(-sa // self.scale)
        lb = pb + -(-sb // self.scale)
        return (self.cost(la, lb), ops + extra, la)

    def _visit(self, i: int, demand, pa: int, pb: int, ops: int, chosen) -> None:
        self.expanded += 1
        if self.expanded > self.budget:
            raise SearchBudgetExceeded(self.expanded, self.budget)
        while i < len(self.order) and not demand.get(self.order[i]):
            i += 1
        if self.best is not None and self._bound(i, demand, pa, pb, ops) > self.best:
            return
        if i == len(self.order):
            key = (self.cost(pa, pb), ops, pa)
            if self.best is None or key < self.best:
                self.best = key
                self.solutions = []
            self.solutions.append(dict(chosen))
            return
        v = self.order[i]
        m = -(-demand[v] // 2)
        cand = self.pairs[v]
        for split in _compositions(m, len(cand)):
            nd = dict(demand)
            npa, npb = pa, pb
            nc = dict(chosen)
            for (l, r), c in zip(cand, split):
                if not c:
                    continue
                nc[(v, l, r)] = c
                for p in (l, r):
                    if p == 0:
                        npb += c
                    elif p == self.scale:
                        npa += c
                    else:
                        nd[p] = nd.get(p, 0) + c
            self._visit(i + 1, nd, npa, npb, ops + m, nc)


def nfb_search(
    net: NetworkGraph,
    target: ApproxRatio | Fraction,
    units_out: int,
    mode: SearchMode | str = SearchMode.EXACT,
    weights: tuple[Fraction, Fraction] = (Fraction(1), Fraction(1)),
    budget: int = DEFAULT_BUDGET,
    reagents: tuple[str, str] = ("A", "B"),
) -> list[MixingTree]:
    """All minimum-input mixing trees for ``target`` over the network graph.

    Minimises the weighted number of pure-input units, then the number of
    mixing events, then the units of reagent A; every tree reaching that
    optimum is returned, ordered by their canonical encoding.  The search is a deterministic depth-first
    branch and bound whose lower bound is the reagent content of the demand
    committed so far, rounded up per reagent.
    """
    mode = SearchMode(mode)
    if mode is SearchMode.MINMIX:
        return [min_mix_tree(_as_approx(target), units_out, reagents)]
    share = _as_approx(target).share_a
    if units_out < 1:
        raise InvalidRatio("units_out must be positive")
    if share not in net.pairs:
        raise Unreachable(f"{share} is not representable within depth {net.depth}")
    if mode is SearchMode.PRUNED4 and not net.pruned:
        net = net.prune(4)
    scale = 2**net.depth

    def ii(f: Fraction) -> int:
        return int(f * scale)

    order = sorted(net.pairs, key=lambda v: (-level_of(v), v))
    s = _Search(
        scale=scale,
        order=[ii(v) for v in order],
        pairs={ii(v): [(ii(l), ii(r)) for l, r in net.pairs[v]] for v in order},
        wa=Fraction(weights[0]),
        wb=Fraction(weights[1]),
        budget=budget,
    )
    if mode is SearchMode.EXACT:
        mm = min_mix_tree(_as_approx(share), units_out)
        s.best = (s.cost(mm.leaves["A"], mm.leaves["B"]), mm.op_count, mm.leaves["A"])
    s.run(ii(share), units_out)
    trees = []
    for sol in s.solutions:
        steps = tuple(MixStep(Fraction(v, scale), Fraction(l, scale), Fraction(r, scale), c) for (v, l, r), c in sol.items())
        trees.append(MixingTree(share, units_out, steps, reagents))
    trees.sort(key=lambda t: (t.op_count, t.encoding()))
    return trees


def synthesize(
    share: Fraction,
    units_out: int,
    mode: SearchMode | str = SearchMode.PRUNED4,
    precision: int = 4,
    budget: int = DEFAULT_BUDGET,
    reagents: tuple[str, str] = ("A", "B"),
) -> list[MixingTree]:
    """Approximate ``share`` at ``precision`` and return every optimal tree."""
    r = approximate_ratio(share, precision)
    mode = SearchMode(mode)
    if mode is SearchMode.MINMIX:
        return [min_mix_tree(r, units_out, reagents)]
    return nfb_search(_network(max(r.depth, 1)), r, units_out, mode, budget=budget, reagents=reagents)


_NETS: dict[int, NetworkGraph] = {}


def _network(d: int) -> NetworkGraph:
    if d not in _NETS:
        _NETS[d] = build_network(d)
    return _NETS[d]


def all_odd_targets(d: int) -> list[Fraction]:
    return [Fraction(k, 2**d) for k in range(1, 2**d, 2)]


__all__ = [
    "ApproxRatio", "InvalidRatio", "MixStep", "MixingTree", "NetworkGraph", "SearchBudgetExceeded",
    "SearchMode", "TreeMetrics", "Unreachable", "WasteEntry", "all_odd_targets", "approximate_ratio",
    "build_network", "canonical_steps", "level_of", "min_mix_tree", "nfb_search", "parse_ratio",
    "synthesize", "tree_metrics", "vertex_balance",
]
