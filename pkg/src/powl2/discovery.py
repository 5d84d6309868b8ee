"""Recursive inductive miner producing POWL 2.0 models with choice graphs.

Each recursion step works on one (sub-)log and tries, in order: a base
case, a choice-graph cut, the empty-trace fall-through, a loop cut, a
partial-order cut, and the remaining fall-throughs.  The chosen cut splits
the log into sub-logs, the miner recurses on each, and the results are
assembled into the matching operator node.
"""
from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence, Union

from . import graphs
from .errors import ContractError, InvariantError
from .log import EventLog, LogStats, filter_noise, log_stats, project
from .model import (
    END,
    START,
    Activity,
    ChoiceGraph,
    Loop,
    PartialOrder,
    PowlNode,
    Silent,
    reduce_model,
    xor,
)

log = logging.getLogger(__name__)

Partition = list  # list[frozenset[int]], parts sorted by smallest activity id
PartRef = Union[int, str]


@dataclass(frozen=True)
class DiscoveryConfig:
    noise_threshold: float = 0.0
    apply_reductions: bool = True

    def __post_init__(self):
        if not 0.0 <= self.noise_threshold <= 1.0:
            raise ContractError(f"noise threshold {self.noise_threshold} outside [0, 1]")


@dataclass(frozen=True)
class ChoiceGraphCut:
    parts: tuple[frozenset[int], ...]
    edges: frozenset[tuple[PartRef, PartRef]]


@dataclass(frozen=True)
class LoopCut:
    body: frozenset[int]
    redo: frozenset[int]


@dataclass(frozen=True)
class PartialOrderCut:
    parts: tuple[frozenset[int], ...]
    order: frozenset[tuple[int, int]]


@dataclass(frozen=True)
class BaseCase:
    node: PowlNode


@dataclass(frozen=True)
class FallThrough:
    kind: str  # "empty_traces" | "once_per_trace" | "tau_loop" | "flower"


Cut = Union[ChoiceGraphCut, LoopCut, PartialOrderCut, BaseCase, FallThrough]


def _sorted_parts(parts) -> list[frozenset[int]]:
    return sorted((frozenset(p) for p in parts), key=min)


# -- base case --------------------------------------------------------------------

def find_base_case(stats: LogStats, event_log: EventLog) -> PowlNode | None:
    if not stats.alphabet:
        return Silent()
    if len(stats.alphabet) == 1:
        (a,) = stats.alphabet
        if all(t == (a,) for t in event_log.traces):
            return Activity(event_log.activities[a])
    return None


# -- choice-graph cut ------------------------------------------------------------

def mine_choice_partition(stats: LogStats) -> Partition:
    """Group activities that are mutually reachable in the DFG; everything else stays apart."""
    comps = graphs.strongly_connected_components(sorted(stats.alphabet), stats.dfg.keys())
    return _sorted_parts(comps)


def build_choice_graph_cut(stats: LogStats, partition: Partition) -> ChoiceGraphCut | None:
    """The unique part graph induced by the DFG, start/end sets and empty traces.

    Returns ``None`` for fewer than two parts.  When the part graph leaves a
    part off every Start -> End path, filtered statistics make the cut
    unusable (``None``) while unfiltered statistics indicate a bug.
    """
    if len(partition) < 2:
        return None
    part_of = {a: i for i, part in enumerate(partition) for a in part}
    edges: set[tuple[PartRef, PartRef]] = set()
    for a, b in stats.dfg:
        i, j = part_of[a], part_of[b]
        if i != j:
            edges.add((i, j))
    for i, part in enumerate(partition):
        if part & stats.starts:
            edges.add((START, i))
        if part & stats.ends:
            edges.add((i, END))
    if stats.empty_traces:
        edges.add((START, END))

    fwd = graphs.reachable(graphs.adjacency(edges), [START])
    bwd = graphs.reachable(graphs.adjacency((b, a) for a, b in edges), [END])
    stranded = [i for i in range(len(partition)) if i not in fwd or i not in bwd]
    if stranded:
        if stats.filtered:
            log.debug("choice-graph cut rejected under noise filtering: parts %s stranded", stranded)
            return None
        raise InvariantError(f"choice-graph parts {stranded} not on a Start-End path")
    if not graphs.is_acyclic(range(len(partition)), [(a, b) for a, b in edges
                                                     if a not in (START, END) and b not in (START, END)]):
        raise InvariantError("choice-graph part graph is cyclic")
    return ChoiceGraphCut(tuple(partition), frozenset(edges))


def choice_graph_path(trace: Sequence[int], cut: ChoiceGraphCut) -> list[int] | None:
    """The Start -> End path of part indices a trace walks through, if the cut admits it."""
    part_of = {a: i for i, part in enumerate(cut.parts) for a in part}
    if not trace:
        return [] if (START, END) in cut.edges else None
    path = [part_of[trace[0]]]
    if (START, path[0]) not in cut.edges:
        return None
    for a in trace[1:]:
        i = part_of[a]
        if i != path[-1]:
            if (path[-1], i) not in cut.edges:
                return None
            path.append(i)
    if (path[-1], END) not in cut.edges:
        return None
    return path


# -- loop cut ---------------------------------------------------------------------

def _undirected_components(nodes, edges) -> list[frozenset[int]]:
    nodes = set(nodes)
    adj = defaultdict(set)
    for a, b in edges:
        if a in nodes and b in nodes:
            adj[a].add(b)
            adj[b].add(a)
    comps, seen = [], set()
    for v in sorted(nodes):
        if v in seen:
            continue
        comp = graphs.reachable(adj, [v])
        seen |= comp
        comps.append(frozenset(comp))
    return comps


def find_loop_cut(stats: LogStats) -> LoopCut | None:
    starts, ends = stats.starts, stats.ends
    body = set(starts | ends)
    if not body:
        return None
    redo = _undirected_components(stats.alphabet - body, stats.dfg.keys())
    dfg = stats.dfg.keys()
    changed = True
    while changed:
        changed = False
        for comp in list(redo):
            into = [(a, b) for a, b in dfg if a in body and b in comp]
            out = [(a, b) for a, b in dfg if a in comp and b in body]
            bad = (
                not into
                or not out
                or any(a not in ends for a, _ in into)
                or any(b not in starts for _, b in out)
            )
            if not bad:
                for c in comp:
                    to_starts = {b for a, b in out if a == c and b in starts}
                    if to_starts and to_starts != starts:
                        bad = True
                        break
                    from_ends = {a for a, b in into if b == c and a in ends}
                    if from_ends and from_ends != ends:
                        bad = True
                        break
            if bad:
                body |= comp
                redo.remove(comp)
                changed = True
    if not redo or body == stats.alphabet:
        return None
    return LoopCut(frozenset(body), frozenset().union(*redo))


# -- partial-order cut ------------------------------------------------------------

def find_partial_order_cut(stats: LogStats) -> PartialOrderCut | None:
    """Fixpoint over parts classified by the eventually-follows relation.

    Parts related in both directions are concurrent, in one direction
    ordered, and in neither direction merged.  Orders whose closure clashes
    with concurrency or forms a cycle merge their endpoints.
    """
    parts = [frozenset([a]) for a in sorted(stats.alphabet)]
    ef = stats.ef
    while len(parts) >= 2:
        n = len(parts)
        fwd = [[i != j and any((a, b) in ef for a in parts[i] for b in parts[j])
                for j in range(n)] for i in range(n)]
        unrelated = [(i, j) for i in range(n) for j in range(i + 1, n)
                     if not fwd[i][j] and not fwd[j][i]]
        if unrelated:
            parts = _merge_parts(parts, unrelated)
            continue
        order = {(i, j) for i in range(n) for j in range(n) if fwd[i][j] and not fwd[j][i]}
        closure = graphs.transitive_closure(order)
        # a cycle shows up as both (i, j) and (j, i) in the closure
        clashes = [(i, j) for i, j in closure
                   if i != j and ((j, i) in closure or (fwd[i][j] and fwd[j][i]))]
        if not clashes:
            break
        parts = _merge_parts(parts, clashes)
    if len(parts) < 2:
        return None
    for i, j in closure:
        if any((b, a) in ef for a in parts[i] for b in parts[j]):
            raise InvariantError(f"partial-order cut orders parts {i}<{j} against observed behaviour")
    return PartialOrderCut(tuple(parts), frozenset(closure))


def _merge_parts(parts, pairs) -> list[frozenset[int]]:
    parent = list(range(len(parts)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in pairs:
        parent[find(i)] = find(j)
    groups = defaultdict(set)
    for i, part in enumerate(parts):
        groups[find(i)] |= part
    return _sorted_parts(groups.values())


# -- splitting ------------------------------------------------------------------

def split_by_cut(event_log: EventLog, cut: Cut, tolerant: bool = False) -> list[tuple[EventLog, object]]:
    """Sub-logs for each slot of the cut: part index, or ``"do"``/``"redo"`` for loops.

    ``tolerant`` lets loop splitting accept traces that start or end in the
    redo part (possible once start/end sets were noise-filtered); such traces
    contribute an empty do-segment.
    """
    if isinstance(cut, ChoiceGraphCut):
        return [(project(event_log, part, keep_empty=False), i) for i, part in enumerate(cut.parts)]
    if isinstance(cut, PartialOrderCut):
        return [(project(event_log, part, keep_empty=True), i) for i, part in enumerate(cut.parts)]
    if isinstance(cut, LoopCut):
        do, redo = Counter(), Counter()
        for trace, n in event_log.traces.items():
            segments = _segments(trace, cut.body)
            if segments[0][0] is False:
                if not tolerant:
                    raise InvariantError(f"trace {event_log.labels(trace)} starts outside the loop body")
                segments.insert(0, (True, ()))
            if segments[-1][0] is False:
                if not tolerant:
                    raise InvariantError(f"trace {event_log.labels(trace)} ends outside the loop body")
                segments.append((True, ()))
            for in_body, seg in segments:
                (do if in_body else redo)[seg] += n
        return [(event_log.with_traces(do), "do"), (event_log.with_traces(redo), "redo")]
    raise ContractError(f"cannot split by {cut!r}")


def _segments(trace, body) -> list[tuple[bool, tuple[int, ...]]]:
    if not trace:
        return [(True, ())]
    out = []
    cur = [trace[0]]
    flag = trace[0] in body
    for a in trace[1:]:
        if (a in body) == flag:
            cur.append(a)
        else:
            out.append((flag, tuple(cur)))
            cur, flag = [a], a in body
    out.append((flag, tuple(cur)))
    return out


# -- miner ------------------------------------------------------------------------

class _Miner:
    def __init__(self, cfg: DiscoveryConfig):
        self.cfg = cfg

    def stats(self, event_log: EventLog) -> tuple[LogStats, LogStats]:
        raw = log_stats(event_log)
        return raw, filter_noise(raw, self.cfg.noise_threshold)

    def mine(self, event_log: EventLog) -> PowlNode:
        raw, stats = self.stats(event_log)
        base = find_base_case(raw, event_log)
        if base is not None:
            return base

        cut = build_choice_graph_cut(stats, mine_choice_partition(stats))
        if cut is not None:
            subs = split_by_cut(event_log, cut)
            children = tuple(self.mine(sub) for sub, _ in subs)
            return ChoiceGraph(children, cut.edges)

        if raw.empty_traces:
            return fall_through(event_log, stats, self.cfg, self)

        loop = find_loop_cut(stats)
        if loop is not None:
            (do, _), (redo, _) = split_by_cut(event_log, loop, tolerant=stats.filtered)
            return Loop(self.mine(do), self.mine(redo))

        po = find_partial_order_cut(stats)
        if po is not None:
            subs = split_by_cut(event_log, po)
            return PartialOrder(tuple(self.mine(sub) for sub, _ in subs), po.order)

        return fall_through(event_log, stats, self.cfg, self)


def fall_through(event_log: EventLog, stats: LogStats, cfg: DiscoveryConfig,
                 miner: _Miner | None = None) -> PowlNode:
    """First applicable fall-through: empty traces, once-per-trace activity, tau loop, flower."""
    miner = miner or _Miner(cfg)
    acts = event_log.activities

    if any(not t for t in event_log.traces):
        rest = {t: n for t, n in event_log.traces.items() if t}
        return xor(Silent(), miner.mine(event_log.with_traces(rest)))

    for a in sorted(stats.alphabet):
        if all(t.count(a) == 1 for t in event_log.traces):
            rest = project(event_log, stats.alphabet - {a}, keep_empty=True)
            return PartialOrder((Activity(acts[a]), miner.mine(rest)), frozenset())

    split: Counter = Counter()
    for trace, n in event_log.traces.items():
        start = 0
        for i in range(len(trace) - 1):
            if trace[i] in stats.ends and trace[i + 1] in stats.starts:
                split[trace[start:i + 1]] += n
                start = i + 1
        split[trace[start:]] += n
    if split != Counter(event_log.traces):
        return Loop(miner.mine(event_log.with_traces(split)), Silent())

    labels = [Activity(acts[a]) for a in sorted(stats.alphabet)]
    body = labels[0] if len(labels) == 1 else xor(*labels)
    return Loop(Silent(), body)


def discover(event_log: EventLog, cfg: DiscoveryConfig = DiscoveryConfig()) -> PowlNode:
    """Mine a POWL 2.0 model.  With no noise filtering every log trace fits the result."""
    if len(event_log) == 0:
        raise ContractError("cannot discover a model from an empty event log")
    model = _Miner(cfg).mine(event_log)
    return reduce_model(model) if cfg.apply_reductions else model
