"""JSON (de)serialization and Graphviz DOT export."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any

from .mixing import MixingTree, level_of
from .model import (
    ApplicationGraph,
    ArchitectureSpec,
    FfuClass,
    FlowEdge,
    FvaError,
    MixerTechnology,
    NodeKind,
    OpNode,
)


class ParseError(FvaError):
    pass


# ------------------------------------------------------------------ values

def parse_rational(value: Any) -> Fraction:
    try:
        if isinstance(value, float):
            raise ParseError(f"floats are not accepted, write {value!r} as a string")
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"not a rational: {value!r}") from exc


def parse_volume(value: Any, unit: str | None = None) -> Fraction:
    """``"2.5"``, ``"2.5 nl"`` or ``"5/2"``; a unit suffix must match ``unit``."""
    text = str(value).strip()
    parts = text.split()
    if len(parts) == 2:
        if unit is not None and parts[1] != unit:
            raise ParseError(f"volume {text!r} is not in the declared unit {unit!r}")
        text = parts[0]
    elif len(parts) != 1:
        raise ParseError(f"bad volume {value!r}")
    v = parse_rational(text)
    if v < 0:
        raise ParseError(f"negative volume {value!r}")
    return v


def format_volume(v: Fraction) -> str:
    """Exact decimal when the value has one, ``p/q`` otherwise."""
    v = Fraction(v)
    d = v.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{v.numerator}/{v.denominator}"
    places = max(twos, fives)
    if places == 0:
        return str(v.numerator)
    scaled = v * 10**places
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled.numerator)).rjust(places + 1, "0")
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


def format_rational(r: Fraction) -> str:
    return f"{r.numerator}/{r.denominator}"


def render(v: Fraction, digits: int = 2) -> str:
    return f"{float(v):.{digits}f}"


# ------------------------------------------------------------ architecture

def architecture_from_dict(d: dict) -> ArchitectureSpec:
    try:
        unit = d["unit"]
        classes = tuple(
            FfuClass(
                name=c["name"],
                mhc=parse_volume(c["mhc"], unit),
                mvr=parse_volume(c.get("mvr", "0"), unit),
                chamber_count=int(c.get("chambers", 1)),
            )
            for c in d["ffu_classes"]
        )
        return ArchitectureSpec(
            unit=unit,
            htr=parse_volume(d["htr"], unit),
            ffu_classes=classes,
            mixer_technology=MixerTechnology(d.get("mixer_technology", MixerTechnology.ARBITRARY.value)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad architecture: {exc}") from exc


def architecture_to_dict(a: ArchitectureSpec) -> dict:
    return {
        "unit": a.unit,
        "htr": format_volume(a.htr),
        "ffu_classes": [
            {"name": c.name, "mhc": format_volume(c.mhc), "mvr": format_volume(c.mvr), "chambers": c.chamber_count}
            for c in a.ffu_classes
        ],
        "mixer_technology": a.mixer_technology.value,
    }


# ------------------------------------------------------------- application

def application_from_dict(d: dict, unit: str | None = None) -> ApplicationGraph:
    unit = d.get("unit", unit)
    try:
        nodes = []
        for n in d.get("nodes", []):
            fva = n.get("fva")
            nodes.append(
                OpNode(
                    id=str(n["id"]),
                    kind=NodeKind(n["kind"]),
                    ffu_class=n.get("ffu_class", ""),
                    fva={k: parse_volume(v, unit) for k, v in fva.items()} if fva is not None else None,
                    x=n.get("x"),
                    replication_factor=int(n.get("replication_factor", 1)),
                )
            )
        edges = []
        for e in d.get("edges", []):
            edges.append(
                FlowEdge(
                    src=str(e["from"]),
                    dst=str(e["to"]),
                    ratio=parse_rational(e["ratio"]) if e.get("ratio") is not None else None,
                    required_volume=parse_volume(e["required_volume"], unit) if e.get("required_volume") is not None else None,
                    volume=parse_volume(e["volume"], unit) if e.get("volume") is not None else None,
                    lof=bool(e.get("lof", False)),
                )
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad application: {exc}") from exc
    return ApplicationGraph(tuple(nodes), tuple(edges), dict(d.get("inputs", {})), d.get("unit"))


def application_to_dict(app: ApplicationGraph) -> dict:
    nodes = []
    for n in app.nodes:
        nd: dict[str, Any] = {"id": n.id, "kind": n.kind.value}
        if n.ffu_class:
            nd["ffu_class"] = n.ffu_class
        if n.fva is not None:
            nd["fva"] = {k: format_volume(v) for k, v in n.fva.items()}
        if n.x is not None:
            nd["x"] = n.x
        if n.replication_factor != 1 or n.fva is not None:
            nd["replication_factor"] = n.replication_factor
        nodes.append(nd)
    edges = []
    for e in app.edges:
        ed: dict[str, Any] = {"from": e.src, "to": e.dst}
        if e.ratio is not None:
            ed["ratio"] = format_rational(e.ratio)
        if e.required_volume is not None:
            ed["required_volume"] = format_volume(e.required_volume)
        if e.volume is not None:
            ed["volume"] = format_volume(e.volume)
        if e.lof:
            ed["lof"] = True
        edges.append(ed)
    out: dict[str, Any] = {"nodes": nodes, "edges": edges}
    if app.inputs:
        out["inputs"] = dict(app.inputs)
    if app.unit is not None:
        out["unit"] = app.unit
    return out


def loads(text: str) -> tuple[ApplicationGraph, ArchitectureSpec]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc)) from exc
    return load_document(doc)


def load_document(doc: dict) -> tuple[ApplicationGraph, ArchitectureSpec]:
    if "architecture" not in doc or "application" not in doc:
        raise ParseError("document needs 'architecture' and 'application'")
    arch = architecture_from_dict(doc["architecture"])
    return application_from_dict(doc["application"], arch.unit), arch


def load(path: str | Path, arch_path: str | Path | None = None) -> tuple[ApplicationGraph, ArchitectureSpec]:
    """Read one combined document, or an application file plus an architecture file."""
    doc = _read(path)
    if arch_path is not None:
        adoc = _read(arch_path)
        arch = architecture_from_dict(adoc.get("architecture", adoc))
        return application_from_dict(doc.get("application", doc), arch.unit), arch
    return load_document(doc)


def _read(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def dumps(app: ApplicationGraph, arch: ArchitectureSpec, **extra: Any) -> str:
    doc = {"architecture": architecture_to_dict(arch), "application": application_to_dict(app), **extra}
    return json.dumps(doc, indent=2)


# --------------------------------------------------------------------- dot

_SHAPES = {
    NodeKind.INPUT: "invhouse",
    NodeKind.OUTPUT: "house",
    NodeKind.MIX: "box",
    NodeKind.DETECT: "ellipse",
    NodeKind.GENERIC: "ellipse",
}


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def application_to_dot(app: ApplicationGraph, unit: str = "") -> str:
    lines = ["digraph application {", "  rankdir=TB;"]
    for n in app.nodes:
        label = [n.id]
        ins = sorted(app.in_edges(n.id), key=lambda e: e.src)
        if n.kind is NodeKind.MIX and ins and all(e.ratio is not None for e in ins):
            label.append(":".join(str(e.ratio) for e in ins))
        if n.fva:
            label.append(", ".join(f"{format_volume(v)}{unit}" for _, v in sorted(n.fva.items())))
        if n.replication_factor > 1:
            label.append(f"x{n.replication_factor} instances")
        lines.append(f"  {_q(n.id)} [shape={_SHAPES[n.kind]}, label={_q(chr(10).join(label))}];")
    for e in app.edges:
        attrs = []
        if e.volume is not None:
            attrs.append(f"label={_q(format_volume(e.volume) + unit)}")
        elif e.ratio is not None:
            attrs.append(f"label={_q(str(e.ratio))}")
        elif e.required_volume is not None:
            attrs.append(f"label={_q(format_volume(e.required_volume) + unit)}")
        if e.lof:
            attrs.append("style=dashed")
        lines.append(f"  {_q(e.src)} -> {_q(e.dst)}" + (f" [{', '.join(attrs)}]" if attrs else "") + ";")
    lines.append("}")
    return "\n".join(lines) + "\n"


def tree_to_dot(t: MixingTree, name: str = "tree") -> str:
    def vid(c: Fraction) -> str:
        if c == 1:
            return _q(t.reagents[0])
        if c == 0:
            return _q(t.reagents[1])
        return _q(f"c{c.numerator}_{c.denominator}")

    bal = t.balance
    lines = [f"digraph {_q(name)} {{", "  rankdir=BT;"]
    lines.append(f"  {vid(Fraction(1))} [shape=invhouse];")
    lines.append(f"  {vid(Fraction(0))} [shape=invhouse];")
    for v in sorted({s.vertex for s in t.steps}, key=lambda c: (level_of(c), c)):
        units = bal.supply.get(v, 0)
        lines.append(f"  {vid(v)} [shape=box, label={_q(f'{v} @ {level_of(v)}, {units}u')}];")
    for s in t.steps:
        for p in (s.left, s.right):
            lines.append(f"  {vid(p)} -> {vid(s.vertex)} [label={_q(str(s.count))}];")
    lines.append(f"  out [shape=house, label={_q(f'{t.target}: {t.units_out}u')}];")
    lines.append(f"  {vid(t.target)} -> out;")
    lines.append("}")
    return "\n".join(lines) + "\n"
