"""Workflow nets: conversion from POWL models, state-space exploration, export."""
from __future__ import annotations

import time
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable
from xml.etree import ElementTree as ET

from . import graphs
from .errors import ContractError, Powl2Error
from .model import (
    END,
    START,
    Activity,
    ChoiceGraph,
    Loop,
    PartialOrder,
    PowlNode,
    Silent,
    TraceSet,
    ref_key,
    validate_model,
)


@dataclass(frozen=True)
class WFNet:
    places: tuple[str, ...]
    transitions: tuple[tuple[str, str | None], ...]  # (id, label); label None = silent
    arcs: frozenset[tuple[str, str]]
    source: str
    sink: str

    @property
    def labels(self) -> dict[str, str | None]:
        return dict(self.transitions)

    def preset(self, node: str) -> list[str]:
        return sorted(a for a, b in self.arcs if b == node)

    def postset(self, node: str) -> list[str]:
        return sorted(b for a, b in self.arcs if a == node)


@dataclass(frozen=True)
class Limits:
    max_states: int = 100_000
    max_seconds: float = 5.0


@dataclass(frozen=True)
class Verdict:
    status: str  # "sound" | "unsound" | "inconclusive"
    reason: str | None = None
    states: int = 0

    @property
    def sound(self) -> bool:
        return self.status == "sound"


# -- conversion -------------------------------------------------------------------

class _Builder:
    def __init__(self):
        self.places: list[str] = []
        self.transitions: list[tuple[str, str | None]] = []
        self.arcs: set[tuple[str, str]] = set()

    def place(self) -> str:
        pid = f"p{len(self.places)}"
        self.places.append(pid)
        return pid

    def transition(self, label: str | None, inputs: Iterable[str], outputs: Iterable[str]) -> str:
        tid = f"t{len(self.transitions)}"
        self.transitions.append((tid, label))
        self.arcs.update((p, tid) for p in inputs)
        self.arcs.update((tid, p) for p in outputs)
        return tid

    def build(self, node: PowlNode) -> tuple[str, str]:
        src = self.place()
        if isinstance(node, (Activity, Silent)):
            snk = self.place()
            self.transition(node.label if isinstance(node, Activity) else None, [src], [snk])
            return src, snk
        if isinstance(node, Loop):
            snk = self.place()
            do_src, do_snk = self.build(node.do)
            redo_src, redo_snk = self.build(node.redo)
            self.transition(None, [src], [do_src])
            self.transition(None, [do_snk], [snk])
            self.transition(None, [do_snk], [redo_src])
            self.transition(None, [redo_snk], [do_src])
            return src, snk
        if isinstance(node, ChoiceGraph):
            snk = self.place()
            subs = [self.build(c) for c in node.children]
            exits = {START: src, **{i: s[1] for i, s in enumerate(subs)}}
            entries = {END: snk, **{i: s[0] for i, s in enumerate(subs)}}
            for a, b in sorted(node.edges, key=lambda e: (ref_key(e[0]), ref_key(e[1]))):
                self.transition(None, [exits[a]], [entries[b]])
            return src, snk
        if isinstance(node, PartialOrder):
            snk = self.place()
            n = len(node.children)
            subs = [self.build(c) for c in node.children]
            ctrl_in = [self.place() for _ in range(n)]
            ctrl_out = [self.place() for _ in range(n)]
            sync = {e: self.place() for e in sorted(graphs.transitive_reduction(node.order))}
            self.transition(None, [src], ctrl_in)
            for k, (c_src, c_snk) in enumerate(subs):
                self.transition(None, [ctrl_in[k]] + [p for (i, j), p in sync.items() if j == k], [c_src])
                self.transition(None, [c_snk], [ctrl_out[k]] + [p for (i, j), p in sync.items() if i == k])
            self.transition(None, ctrl_out, [snk])
            return src, snk
        raise ContractError(f"cannot convert {node!r}")


def powl_to_wfnet(m: PowlNode) -> WFNet:
    problems = validate_model(m)
    if problems:
        raise ContractError("invalid model: " + "; ".join(map(str, problems)))
    b = _Builder()
    src, snk = b.build(m)
    return WFNet(tuple(b.places), tuple(b.transitions), frozenset(b.arcs), src, snk)


def validate_wfnet(net: WFNet) -> list[str]:
    out = []
    places, trans = set(net.places), {t for t, _ in net.transitions}
    if places & trans:
        out.append(f"ids shared by places and transitions: {sorted(places & trans)}")
    for a, b in sorted(net.arcs):
        if not ((a in places and b in trans) or (a in trans and b in places)):
            out.append(f"arc {a}->{b} does not connect a place and a transition")
    has_in = {b for _, b in net.arcs}
    has_out = {a for a, _ in net.arcs}
    sources = sorted(p for p in net.places if p not in has_in)
    sinks = sorted(p for p in net.places if p not in has_out)
    if sources != [net.source]:
        out.append(f"source not unique: places without input {sources}")
    if sinks != [net.sink]:
        out.append(f"sink not unique: places without output {sinks}")
    fwd = graphs.reachable(graphs.adjacency(net.arcs), [net.source])
    bwd = graphs.reachable(graphs.adjacency((b, a) for a, b in net.arcs), [net.sink])
    for node in list(net.places) + [t for t, _ in net.transitions]:
        if node not in fwd or node not in bwd:
            out.append(f"not on source-sink path: {node}")
    return out


# -- token game ---------------------------------------------------------------------

Marking = tuple  # sorted tuple of place indices, repeated per token


class TokenGame:
    """Firing rule over integer-indexed places; markings are sorted index tuples.

    Exploration is reduced with two kinds of persistent sets, each of which
    can only be resolved by its own members:

    * an *eager* transition is the only consumer of every place in its preset
      and lies on no cycle of eager transitions;
    * a *local choice* is the set of all consumers of a place ``p`` when each
      of them has preset exactly ``{p}`` and none lies on a cycle of the net.

    Expanding just one enabled set per marking keeps reachability of the
    final marking, improper completion and dead transitions intact (the
    acyclicity conditions rule out postponing other work forever) while
    collapsing independent interleavings.  With ``reduce=False`` every
    enabled transition is expanded.
    """

    def __init__(self, net: WFNet, reduce: bool = True):
        self.net = net
        pidx = {p: i for i, p in enumerate(net.places)}
        self.tids = [t for t, _ in net.transitions]
        self.labels = [lab for _, lab in net.transitions]
        tidx = {t: i for i, t in enumerate(self.tids)}
        pre = defaultdict(list)
        post = defaultdict(list)
        for a, b in net.arcs:
            if a in pidx:
                pre[tidx[b]].append(pidx[a])
            else:
                post[tidx[a]].append(pidx[b])
        self.pre = [Counter(pre[t]) for t in range(len(self.tids))]
        self.post = [tuple(post[t]) for t in range(len(self.tids))]
        self.consumers = defaultdict(list)
        for t, inputs in enumerate(self.pre):
            for p in inputs:
                self.consumers[p].append(t)
        self.eager: frozenset[int] = frozenset()
        self.choice: dict[int, tuple[int, ...]] = {}
        if reduce:
            self._find_persistent_sets()
        self.initial: Marking = (pidx[net.source],)
        self.final: Marking = (pidx[net.sink],)
        self.sink = pidx[net.sink]

    def _feeds(self, ts) -> list[tuple[int, int]]:
        return [(t, u) for t in ts for p in set(self.post[t]) for u in self.consumers[p] if u in ts]

    def _on_cycles(self, ts) -> set[int]:
        ts = set(ts)
        feeds = self._feeds(ts)
        cyclic = {t for t, u in feeds if t == u}
        for comp in graphs.strongly_connected_components(ts, feeds):
            if len(comp) > 1:
                cyclic |= comp
        return cyclic

    def _find_persistent_sets(self) -> None:
        free = {t for t, inputs in enumerate(self.pre)
                if inputs and all(self.consumers[p] == [t] for p in inputs)}
        self.eager = frozenset(free - self._on_cycles(free))
        cyclic = self._on_cycles(range(len(self.tids)))
        for p, group in self.consumers.items():
            if len(group) > 1 and all(self.pre[t] == {p: 1} and t not in cyclic for t in group):
                for t in group:
                    self.choice[t] = tuple(group)

    def expand(self, m: Marking, silent_only: bool = False) -> list[int]:
        """Transitions to explore from ``m``: one enabled persistent set if any, else all enabled."""
        ts = self.enabled(m)
        if silent_only:
            ts = [t for t in ts if self.labels[t] is None]
        group = None
        for t in ts:
            if t in self.eager:
                return [t]
            if group is None and t in self.choice:
                members = self.choice[t]
                if not silent_only or all(self.labels[u] is None for u in members):
                    group = list(members)
        return group if group is not None else ts

    def enabled(self, m: Marking) -> list[int]:
        tokens = Counter(m)
        cands = sorted({t for p in tokens for t in self.consumers[p]})
        return [t for t in cands if all(tokens[p] >= k for p, k in self.pre[t].items())]

    def fire(self, m: Marking, t: int) -> Marking:
        tokens = Counter(m)
        tokens.subtract(self.pre[t])
        tokens.update(self.post[t])
        return tuple(sorted(tokens.elements()))

    def silent_closure(self, markings: Iterable[Marking], budget: "_Budget") -> set[Marking]:
        budget = budget.fresh()
        seen = set(markings)
        todo = list(seen)
        while todo:
            m = todo.pop()
            for t in self.expand(m, silent_only=True):
                nxt = self.fire(m, t)
                if nxt not in seen:
                    budget.spend()
                    seen.add(nxt)
                    todo.append(nxt)
        return seen


class LimitReached(Powl2Error):
    """A state-space exploration exceeded its marking or time budget."""


@dataclass
class _Budget:
    limits: Limits
    used: int = 0
    deadline: float = field(default=0.0)

    def __post_init__(self):
        if not self.deadline:
            self.deadline = time.monotonic() + self.limits.max_seconds

    def fresh(self) -> "_Budget":
        """A new marking allowance that shares this budget's deadline."""
        return _Budget(self.limits, deadline=self.deadline)

    def spend(self, n: int = 1):
        self.used += n
        if self.used > self.limits.max_states:
            raise LimitReached(f"more than {self.limits.max_states} markings")
        if time.monotonic() > self.deadline:
            raise LimitReached(f"time budget of {self.limits.max_seconds}s exceeded")


def check_soundness(net: WFNet, limits: Limits = Limits(), reduce: bool = True) -> Verdict:
    """Classical soundness by exploring the reachability graph from one token on the source.

    ``reduce`` enables the persistent-set reduction (see :class:`TokenGame`); the verdict is
    the same either way, only the number of stored markings differs.
    """
    game = TokenGame(net, reduce)
    budget = _Budget(limits)
    seen = {game.initial}
    edges: dict[Marking, list[Marking]] = defaultdict(list)
    fired: set[int] = set()
    todo = deque([game.initial])
    try:
        while todo:
            m = todo.popleft()
            if game.sink in m and m != game.final:
                return Verdict("unsound", f"improper completion: marking {_show(net, m)}", len(seen))
            for t in game.expand(m):
                fired.add(t)
                nxt = game.fire(m, t)
                edges[m].append(nxt)
                if nxt not in seen:
                    budget.spend()
                    seen.add(nxt)
                    todo.append(nxt)
    except LimitReached as exc:
        return Verdict("inconclusive", str(exc), len(seen))

    if game.final not in seen:
        return Verdict("unsound", "final marking unreachable", len(seen))
    back = defaultdict(list)
    for m, succs in edges.items():
        for s in succs:
            back[s].append(m)
    can_finish = graphs.reachable(back, [game.final])
    stuck = sorted(seen - can_finish)
    if stuck:
        return Verdict("unsound", f"final marking unreachable from {_show(net, stuck[0])}", len(seen))
    dead = [game.tids[t] for t in range(len(game.tids)) if t not in fired]
    if dead:
        return Verdict("unsound", f"dead transition {dead[0]}", len(seen))
    return Verdict("sound", None, len(seen))


def _show(net: WFNet, m: Marking) -> str:
    return "[" + ", ".join(net.places[p] for p in m) + "]"


class Replayer:
    """Follows label sequences through the net, tracking every silent-reachable marking."""

    def __init__(self, net: WFNet, limits: Limits = Limits(), reduce: bool = True):
        self.game = TokenGame(net, reduce)
        self.budget = _Budget(limits)

    def initial(self) -> frozenset[Marking]:
        return frozenset(self.game.silent_closure([self.game.initial], self.budget))

    def successors(self, states: Iterable[Marking]) -> dict[str, frozenset[Marking]]:
        nxt = defaultdict(set)
        for m in states:
            for t in self.game.enabled(m):
                label = self.game.labels[t]
                if label is not None:
                    nxt[label].add(self.game.fire(m, t))
        return {label: frozenset(self.game.silent_closure(ms, self.budget))
                for label, ms in sorted(nxt.items())}

    def enabled_labels(self, states: Iterable[Marking]) -> set[str]:
        return {self.game.labels[t] for m in states for t in self.game.enabled(m)
                if self.game.labels[t] is not None}

    def step(self, states: Iterable[Marking], label: str) -> frozenset[Marking]:
        moved = set()
        for m in states:
            for t in self.game.enabled(m):
                if self.game.labels[t] == label:
                    moved.add(self.game.fire(m, t))
        return frozenset(self.game.silent_closure(moved, self.budget)) if moved else frozenset()

    def accepts(self, states: Iterable[Marking]) -> bool:
        return self.game.final in states


def net_language(net: WFNet, max_len: int, limits: Limits = Limits(), reduce: bool = True) -> TraceSet:
    """Visible traces from the initial to the final marking, up to ``max_len`` labels."""
    rep = Replayer(net, limits, reduce)
    result: set[tuple[str, ...]] = set()
    truncated = False
    try:
        frontier = {(): rep.initial()}
        for depth in range(max_len + 1):
            nxt = {}
            for prefix, states in frontier.items():
                if rep.accepts(states):
                    result.add(prefix)
                succ = rep.successors(states)
                if depth == max_len:
                    truncated |= bool(succ)
                    continue
                for label, ms in succ.items():
                    nxt[prefix + (label,)] = ms
            frontier = nxt
            if not frontier:
                break
    except LimitReached:
        truncated = True
    return TraceSet(frozenset(result), truncated)


# -- export ---------------------------------------------------------------------------

def _ordered_places(net: WFNet) -> list[str]:
    rest = [p for p in net.places if p not in (net.source, net.sink)]
    return [net.source] + rest + [net.sink]


def to_pnml(net: WFNet) -> str:
    root = ET.Element("pnml")
    net_el = ET.SubElement(root, "net", id="net1",
                           type="http://www.pnml.org/version-2009/grammar/ptnet")
    page = ET.SubElement(net_el, "page", id="page1")
    for p in _ordered_places(net):
        el = ET.SubElement(page, "place", id=p)
        ET.SubElement(ET.SubElement(el, "name"), "text").text = p
        if p == net.source:
            ET.SubElement(ET.SubElement(el, "initialMarking"), "text").text = "1"
    for tid, label in net.transitions:
        el = ET.SubElement(page, "transition", id=tid)
        ET.SubElement(ET.SubElement(el, "name"), "text").text = label or ""
    for k, (a, b) in enumerate(sorted(net.arcs, key=_arc_key)):
        ET.SubElement(page, "arc", id=f"a{k}", source=a, target=b)
    final = ET.SubElement(ET.SubElement(net_el, "finalmarkings"), "marking")
    ET.SubElement(ET.SubElement(final, "place", idref=net.sink), "text").text = "1"
    ET.indent(root)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


def _arc_key(arc):
    def k(node):
        return (node[0], int(node[1:])) if node[1:].isdigit() else (node, 0)
    return (k(arc[0]), k(arc[1]))


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(net: WFNet) -> str:
    lines = ["digraph wfnet {", "  rankdir=LR;", '  node [fontname="Helvetica"];']
    for p in _ordered_places(net):
        extra = ""
        if p == net.source:
            extra = ', label="●"'
        elif p == net.sink:
            extra = ', label="■"'
        else:
            extra = ', label=""'
        lines.append(f"  {p} [shape=circle, width=0.3{extra}];")
    for tid, label in net.transitions:
        if label is None:
            lines.append(f'  {tid} [shape=box, style=filled, fillcolor=black, width=0.08, '
                         f'height=0.4, label=""];')
        else:
            lines.append(f"  {tid} [shape=box, label={_q(label)}];")
    for a, b in sorted(net.arcs, key=_arc_key):
        lines.append(f"  {a} -> {b};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_net(net: WFNet, fmt: str = "pnml") -> str:
    if fmt == "pnml":
        return to_pnml(net)
    if fmt == "dot":
        return to_dot(net)
    raise ContractError(f"unknown net format {fmt!r}")
