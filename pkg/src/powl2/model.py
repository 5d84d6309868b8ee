"""POWL 2.0 process models.

A model is a tree of immutable nodes: :class:`Activity`, :class:`Silent`,
:class:`Loop`, :class:`PartialOrder` and :class:`ChoiceGraph`.  Choice-graph
edges connect child indices and the two artificial nodes :data:`START` and
:data:`END`.  Partial-order pairs are child indices ``(i, j)`` meaning every
event of child ``i`` precedes every event of child ``j``.

Traces at this level are tuples of label strings.
"""
from __future__ import annotations

import json
import random
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterable, Sequence, Union

from . import graphs
from .errors import ContractError, SchemaError
from .log import EventLog

START = "start"
END = "end"

Ref = Union[int, str]


class PowlNode:
    """Common base of all model nodes; every node exposes ``children``."""

    __slots__ = ()


@dataclass(frozen=True)
class Activity(PowlNode):
    label: str

    children = ()


@dataclass(frozen=True)
class Silent(PowlNode):
    children = ()


@dataclass(frozen=True)
class Loop(PowlNode):
    do: PowlNode
    redo: PowlNode

    @property
    def children(self):
        return (self.do, self.redo)


@dataclass(frozen=True)
class PartialOrder(PowlNode):
    children: tuple[PowlNode, ...]
    order: frozenset[tuple[int, int]] = frozenset()

    def predecessors(self, j: int) -> list[int]:
        return sorted(i for i, k in self.order if k == j)


@dataclass(frozen=True)
class ChoiceGraph(PowlNode):
    children: tuple[PowlNode, ...]
    edges: frozenset[tuple[Ref, Ref]] = frozenset()

    def successors(self, ref: Ref) -> list[Ref]:
        return sorted((b for a, b in self.edges if a == ref), key=ref_key)

    def predecessors(self, ref: Ref) -> list[Ref]:
        return sorted((a for a, b in self.edges if b == ref), key=ref_key)


def ref_key(ref: Ref) -> tuple[int, int]:
    if ref == START:
        return (0, 0)
    if ref == END:
        return (2, 0)
    return (1, ref)


@dataclass(frozen=True)
class TraceSet:
    traces: frozenset[tuple[str, ...]]
    truncated: bool = False

    def __contains__(self, trace):
        return tuple(trace) in self.traces

    def __len__(self):
        return len(self.traces)

    def sorted(self) -> list[tuple[str, ...]]:
        return sorted(self.traces, key=lambda t: (len(t), t))


# -- constructors ---------------------------------------------------------------

def partial_order(children: Sequence[PowlNode], order: Iterable[tuple[int, int]] = ()) -> PartialOrder:
    """Build a partial order, closing ``order`` transitively; cycles are rejected."""
    children = tuple(children)
    closed = graphs.transitive_closure(order)
    for i, j in closed:
        if not (0 <= i < len(children) and 0 <= j < len(children)):
            raise ContractError(f"order pair {(i, j)} out of range")
        if i == j:
            raise ContractError(f"order is cyclic through child {i}")
    return PartialOrder(children, closed)


def sequence(*children: PowlNode) -> PartialOrder:
    return partial_order(children, [(i, i + 1) for i in range(len(children) - 1)])


def xor(*children: PowlNode) -> ChoiceGraph:
    """Exclusive choice: every child on its own Start -> child -> End path."""
    edges = set()
    for i in range(len(children)):
        edges |= {(START, i), (i, END)}
    return ChoiceGraph(tuple(children), frozenset(edges))


def choice_graph(children: Sequence[PowlNode], edges: Iterable[tuple[Ref, Ref]]) -> ChoiceGraph:
    return ChoiceGraph(tuple(children), frozenset(edges))


def flower(labels: Sequence[str]) -> PowlNode:
    """Loop over a free choice of activities: accepts any sequence over ``labels``."""
    acts = [Activity(a) for a in labels]
    body = acts[0] if len(acts) == 1 else xor(*acts)
    return Loop(Silent(), body)


def iter_nodes(m: PowlNode, path: str = "$"):
    """Pre-order walk yielding ``(path, node)``."""
    yield path, m
    if isinstance(m, Loop):
        yield from iter_nodes(m.do, path + ".do")
        yield from iter_nodes(m.redo, path + ".redo")
    elif isinstance(m, (PartialOrder, ChoiceGraph)):
        for i, c in enumerate(m.children):
            yield from iter_nodes(c, f"{path}.children[{i}]")


def labels_of(m: PowlNode) -> frozenset[str]:
    return frozenset(n.label for _, n in iter_nodes(m) if isinstance(n, Activity))


# -- validation -------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"


def validate_model(m: PowlNode) -> list[Violation]:
    out: list[Violation] = []
    for path, node in iter_nodes(m):
        def bad(msg, path=path):
            out.append(Violation(path, msg))

        if isinstance(node, Activity):
            if not isinstance(node.label, str) or not node.label:
                bad("activity label must be a non-empty string")
        elif isinstance(node, (Silent, Loop)):
            pass
        elif isinstance(node, PartialOrder):
            _check_order(node, bad)
        elif isinstance(node, ChoiceGraph):
            _check_choice_graph(node, bad)
        else:
            bad(f"unknown node type {type(node).__name__}")
    return out


def _check_order(node: PartialOrder, bad) -> None:
    n = len(node.children)
    if n < 2:
        bad(f"partial order needs at least 2 children, has {n}")
    order = set(node.order)
    for i, j in sorted(order):
        if not (isinstance(i, int) and isinstance(j, int) and 0 <= i < n and 0 <= j < n):
            bad(f"order pair {(i, j)} references a missing child")
            return
    if any(i == j for i, j in order):
        bad("order not irreflexive")
    if any((j, i) in order for i, j in order if i != j):
        bad("order not asymmetric")
    if graphs.transitive_closure(order) != order:
        bad("order not transitive")


def _check_choice_graph(node: ChoiceGraph, bad) -> None:
    n = len(node.children)
    if n < 2:
        bad(f"choice graph needs at least 2 children, has {n}")
    valid_refs = {START, END, *range(n)}
    for a, b in sorted(node.edges, key=lambda e: (ref_key(e[0]), ref_key(e[1]))):
        if a not in valid_refs or b not in valid_refs or isinstance(a, bool) or isinstance(b, bool):
            bad(f"edge {(a, b)} references a missing node")
            return
    if any(b == START for _, b in node.edges):
        bad("Start has an incoming edge")
    if any(a == END for a, _ in node.edges):
        bad("End has an outgoing edge")
    if not any(a == START for a, _ in node.edges):
        bad("Start has no outgoing edge")
    if not any(b == END for _, b in node.edges):
        bad("End has no incoming edge")
    fwd = graphs.reachable(graphs.adjacency(node.edges), [START])
    bwd = graphs.reachable(graphs.adjacency((b, a) for a, b in node.edges), [END])
    for i in range(n):
        if i not in fwd:
            bad(f"child {i} unreachable from Start")
        if i not in bwd:
            bad(f"child {i} cannot reach End")


def is_valid(m: PowlNode) -> bool:
    return not validate_model(m)


# -- shuffle and bounded language ------------------------------------------------------

def shuffle(traces: Sequence[Sequence], order: Iterable[tuple[int, int]] = ()) -> TraceSet:
    """All interleavings keeping each trace's own order and ``order`` between traces."""
    traces = [tuple(t) for t in traces]
    k = len(traces)
    closed = graphs.transitive_closure(order)
    for i, j in closed:
        if i == j:
            raise ContractError("shuffle order is not a strict partial order (cycle)")
        if not (0 <= i < k and 0 <= j < k):
            raise ContractError(f"shuffle order pair {(i, j)} out of range")
    return TraceSet(frozenset(_interleave(traces, closed)))


def _interleave(traces: list[tuple], order: frozenset) -> set[tuple]:
    preds = [[i for i, j in order if j == k] for k in range(len(traces))]
    lens = [len(t) for t in traces]
    out: set[tuple] = set()

    @lru_cache(maxsize=None)
    def suffixes(state: tuple) -> frozenset:
        if all(s == n for s, n in zip(state, lens)):
            return frozenset([()])
        result = set()
        for k, t in enumerate(traces):
            if state[k] < lens[k] and all(state[i] == lens[i] for i in preds[k]):
                nxt = state[:k] + (state[k] + 1,) + state[k + 1:]
                result.update((t[state[k]],) + rest for rest in suffixes(nxt))
        return frozenset(result)

    out.update(suffixes(tuple(0 for _ in traces)))
    return out


def _concat(left, right, max_len):
    out, pruned = set(), False
    for a in left:
        for b in right:
            if len(a) + len(b) <= max_len:
                out.add(a + b)
            else:
                pruned = True
    return out, pruned


def enumerate_language(m: PowlNode, max_len: int, max_loop_unroll: int) -> TraceSet:
    """Traces of the model up to ``max_len`` events and ``max_loop_unroll`` repetitions.

    ``truncated`` is set when either bound cut off at least one candidate.
    """
    if max_len < 0 or max_loop_unroll < 0:
        raise ContractError("bounds must be non-negative")
    memo: dict[int, tuple[set, bool]] = {}

    def lang(node) -> tuple[set, bool]:
        key = id(node)
        if key not in memo:
            memo[key] = _lang(node)
        return memo[key]

    def _lang(node):
        if isinstance(node, Silent):
            return {()}, False
        if isinstance(node, Activity):
            return ({(node.label,)}, False) if max_len >= 1 else (set(), True)
        if isinstance(node, Loop):
            do, t1 = lang(node.do)
            redo, t2 = lang(node.redo)
            result, trunc = set(do), t1 or t2
            frontier = set(do)
            for rounds in range(max_loop_unroll + 1):
                mid, p1 = _concat(frontier, redo, max_len)
                nxt, p2 = _concat(mid, do, max_len)
                new = nxt - result
                if rounds == max_loop_unroll:
                    # one probing round past the bound decides truncation
                    trunc |= bool(new) or p1 or p2
                    break
                trunc |= p1 or p2
                if not new:
                    break
                result |= new
                frontier = new
            return result, trunc
        if isinstance(node, PartialOrder):
            parts = [lang(c) for c in node.children]
            trunc = any(t for _, t in parts)
            result = set()
            langs = [sorted(s) for s, _ in parts]
            for combo in product(*langs):
                if sum(map(len, combo)) > max_len:
                    trunc = True
                    continue
                result |= _interleave(list(combo), node.order)
            return result, trunc
        if isinstance(node, ChoiceGraph):
            return _graph_lang(node)
        raise ContractError(f"unknown node {node!r}")

    def _graph_lang(node: ChoiceGraph):
        succ = {ref: node.successors(ref) for ref in [START, *range(len(node.children))]}
        result: set = set()
        trunc = False
        limit = 1 + max_loop_unroll

        def walk(ref, prefixes, visits):
            nonlocal trunc
            for nxt in succ[ref]:
                if nxt == END:
                    result.update(prefixes)
                    continue
                if visits[nxt] >= limit:
                    trunc = True
                    continue
                sub, t = lang(node.children[nxt])
                trunc |= t
                ext, pruned = _concat(prefixes, sub, max_len)
                trunc |= pruned
                if ext:
                    visits[nxt] += 1
                    walk(nxt, ext, visits)
                    visits[nxt] -= 1

        walk(START, {()}, Counter())
        return result, trunc

    traces, truncated = lang(m)
    return TraceSet(frozenset(traces), truncated)


# -- membership -----------------------------------------------------------------------

class _Matcher:
    """Decides ``trace in L(model)`` with memoisation on (node, segment)."""

    def __init__(self):
        self.memo: dict[tuple[int, tuple], bool] = {}
        self.alpha: dict[int, frozenset] = {}
        self.succ: dict[int, dict] = {}

    def alphabet(self, node) -> frozenset:
        key = id(node)
        if key not in self.alpha:
            if isinstance(node, Activity):
                self.alpha[key] = frozenset([node.label])
            else:
                self.alpha[key] = frozenset().union(*(self.alphabet(c) for c in node.children))
        return self.alpha[key]

    def match(self, node, seg: tuple) -> bool:
        key = (id(node), seg)
        hit = self.memo.get(key)
        if hit is None:
            if not self.alphabet(node).issuperset(seg):
                hit = False
            else:
                hit = self._match(node, seg)
            self.memo[key] = hit
        return hit

    def _spans(self, child, seg, pos):
        """End positions ``j`` with ``seg[pos:j]`` in the child's language."""
        alpha = self.alphabet(child)
        j = pos
        while True:
            if self.match(child, seg[pos:j]):
                yield j
            if j == len(seg) or seg[j] not in alpha:
                return
            j += 1

    def _match(self, node, seg) -> bool:
        if isinstance(node, Silent):
            return not seg
        if isinstance(node, Activity):
            return seg == (node.label,)
        if isinstance(node, Loop):
            return self._match_loop(node, seg)
        if isinstance(node, PartialOrder):
            return self._match_order(node, seg)
        if isinstance(node, ChoiceGraph):
            return self._match_graph(node, seg)
        raise ContractError(f"unknown node {node!r}")

    def _match_loop(self, node: Loop, seg) -> bool:
        # phase 0: a do-part is due; phase 1: a do-part just finished
        n = len(seg)
        seen = {(0, 0)}
        todo = [(0, 0)]
        while todo:
            pos, phase = todo.pop()
            child = node.do if phase == 0 else node.redo
            for j in self._spans(child, seg, pos):
                state = (j, 1 - phase)
                if state == (n, 1):
                    return True
                if state not in seen:
                    seen.add(state)
                    todo.append(state)
        return False

    def _match_graph(self, node: ChoiceGraph, seg) -> bool:
        key = id(node)
        if key not in self.succ:
            succ = defaultdict(list)
            for a, b in node.edges:
                succ[a].append(b)
            self.succ[key] = succ
        succ = self.succ[key]
        n = len(seg)
        seen = {(0, START)}
        todo = [(0, START)]
        while todo:
            pos, ref = todo.pop()
            for nxt in succ.get(ref, ()):
                if nxt == END:
                    if pos == n:
                        return True
                    continue
                for j in self._spans(node.children[nxt], seg, pos):
                    state = (j, nxt)
                    if state not in seen:
                        seen.add(state)
                        todo.append(state)
        return False

    def _match_order(self, node: PartialOrder, seg) -> bool:
        kids = node.children
        alphas = [self.alphabet(c) for c in kids]
        owners = []
        for label in seg:
            cand = [k for k, a in enumerate(alphas) if label in a]
            if not cand:
                return False
            owners.append(cand)
        succs = defaultdict(set)
        for i, j in node.order:
            succs[i].add(j)

        if all(len(c) == 1 for c in owners):
            return self._check_assignment(node, seg, [c[0] for c in owners], succs)

        assign: list[int] = []
        started: Counter = Counter()

        def search(pos):
            if pos == len(seg):
                return self._check_assignment(node, seg, assign, succs)
            for k in owners[pos]:
                if any(started[s] for s in succs[k]):
                    continue
                assign.append(k)
                started[k] += 1
                ok = search(pos + 1)
                started[k] -= 1
                assign.pop()
                if ok:
                    return True
            return False

        return search(0)

    def _check_assignment(self, node, seg, assign, succs) -> bool:
        first: dict[int, int] = {}
        last: dict[int, int] = {}
        for pos, k in enumerate(assign):
            first.setdefault(k, pos)
            last[k] = pos
        for i, js in succs.items():
            if i in last:
                for j in js:
                    if j in first and first[j] < last[i]:
                        return False
        for k, child in enumerate(node.children):
            sub = tuple(seg[p] for p, owner in enumerate(assign) if owner == k)
            if not self.match(child, sub):
                return False
        return True


def is_member(m: PowlNode, trace: Sequence[str]) -> bool:
    return _Matcher().match(m, tuple(trace))


class MembershipOracle:
    """Reusable membership checker sharing its memo across many traces."""

    def __init__(self, model: PowlNode):
        self.model = model
        self._matcher = _Matcher()

    def __call__(self, trace: Sequence[str]) -> bool:
        return self._matcher.match(self.model, tuple(trace))


# -- reduction ------------------------------------------------------------------

def reduce_model(m: PowlNode) -> PowlNode:
    """Apply the language-preserving simplifications bottom-up until nothing changes.

    * a choice graph that is a single Start -> ... -> End chain becomes a
      total partial order (or its only child);
    * choice-graph children with identical predecessor and successor sets are
      grouped into a nested exclusive choice;
    * a nested partial order comparable to all of its siblings is flattened.
    """
    while True:
        nxt = _reduce_once(m)
        if nxt == m:
            return m
        m = nxt


def _reduce_once(m: PowlNode) -> PowlNode:
    if isinstance(m, Loop):
        return Loop(_reduce_once(m.do), _reduce_once(m.redo))
    if isinstance(m, PartialOrder):
        m = PartialOrder(tuple(_reduce_once(c) for c in m.children), m.order)
        return _flatten_orders(m)
    if isinstance(m, ChoiceGraph):
        m = ChoiceGraph(tuple(_reduce_once(c) for c in m.children), m.edges)
        chain = _as_chain(m)
        if chain is not None:
            if len(chain) == 1:
                return m.children[chain[0]]
            return sequence(*(m.children[i] for i in chain))
        return _group_equivalent(m)
    return m


def _as_chain(g: ChoiceGraph) -> list[int] | None:
    n = len(g.children)
    if len(g.edges) != n + 1:
        return None
    succ = defaultdict(list)
    for a, b in g.edges:
        succ[a].append(b)
    chain, ref, seen = [], START, set()
    while True:
        nxt = succ.get(ref, [])
        if len(nxt) != 1:
            return None
        ref = nxt[0]
        if ref == END:
            break
        if ref in seen:
            return None
        seen.add(ref)
        chain.append(ref)
    return chain if len(chain) == n else None


def _group_equivalent(g: ChoiceGraph) -> ChoiceGraph:
    n = len(g.children)
    sig = defaultdict(list)
    for i in range(n):
        preds = frozenset(a for a, b in g.edges if b == i)
        succs = frozenset(b for a, b in g.edges if a == i)
        sig[(preds, succs)].append(i)
    groups = []
    for members in sig.values():
        if len(members) < 2 or len(members) == n:
            continue
        ms = set(members)
        if any(a in ms and b in ms for a, b in g.edges):
            continue
        groups.append(sorted(members))
    if not groups:
        return g
    groups.sort()
    rep = {}  # old index -> representative old index
    for members in groups:
        for i in members:
            rep[i] = members[0]
    survivors = [i for i in range(n) if rep.get(i, i) == i]
    new_index = {old: k for k, old in enumerate(survivors)}
    children = []
    for old in survivors:
        members = next((ms for ms in groups if ms[0] == old), None)
        if members is None:
            children.append(g.children[old])
        else:
            children.append(xor(*(g.children[i] for i in members)))

    def remap(ref):
        return ref if ref in (START, END) else new_index[rep.get(ref, ref)]

    edges = frozenset((remap(a), remap(b)) for a, b in g.edges)
    return ChoiceGraph(tuple(children), edges)


def _flatten_orders(p: PartialOrder) -> PartialOrder:
    for q, child in enumerate(p.children):
        if not isinstance(child, PartialOrder):
            continue
        siblings = [s for s in range(len(p.children)) if s != q]
        if not all((s, q) in p.order or (q, s) in p.order for s in siblings):
            continue
        inner = len(child.children)
        # new layout: siblings before q, child's children, siblings after q
        def pos(old):
            return old if old < q else old + inner - 1
        children = p.children[:q] + child.children + p.children[q + 1:]
        order = set()
        for a, b in p.order:
            if a != q and b != q:
                order.add((pos(a), pos(b)))
            elif a == q:
                order.update((q + k, pos(b)) for k in range(inner))
            else:
                order.update((pos(a), q + k) for k in range(inner))
        order.update((q + a, q + b) for a, b in child.order)
        return partial_order(children, order)
    return p


# -- sampling ---------------------------------------------------------------------

_EXACT_INTERLEAVE_LIMIT = 200_000


def sample_traces(m: PowlNode, n: int, seed: int, p_redo: float = 0.3) -> EventLog:
    """Draw ``n`` traces by a random walk through the model.

    Choice graphs pick uniformly among outgoing edges, loops repeat the
    redo-part a geometric(``p_redo``) number of times, and partial orders
    pick an interleaving uniformly among all valid ones (falling back to a
    uniform choice of the next child on very large instances).
    """
    if not 0.0 <= p_redo < 1.0:
        raise ContractError(f"p_redo {p_redo} outside [0, 1)")
    rng = random.Random(seed)
    labels = sorted(labels_of(m))
    return EventLog.from_traces((_walk(m, rng, p_redo) for _ in range(n)), activities=labels)


def _walk(node, rng: random.Random, p_redo: float) -> list[str]:
    if isinstance(node, Activity):
        return [node.label]
    if isinstance(node, Silent):
        return []
    if isinstance(node, Loop):
        out = _walk(node.do, rng, p_redo)
        while rng.random() < p_redo:
            out += _walk(node.redo, rng, p_redo)
            out += _walk(node.do, rng, p_redo)
        return out
    if isinstance(node, ChoiceGraph):
        out, ref = [], START
        while True:
            ref = rng.choice(node.successors(ref))
            if ref == END:
                return out
            out += _walk(node.children[ref], rng, p_redo)
    if isinstance(node, PartialOrder):
        parts = [_walk(c, rng, p_redo) for c in node.children]
        return _random_interleaving(parts, node.order, rng)
    raise ContractError(f"unknown node {node!r}")


def _random_interleaving(parts: list[list[str]], order, rng: random.Random) -> list[str]:
    preds = [[i for i, j in order if j == k] for k in range(len(parts))]
    lens = [len(p) for p in parts]
    states = 1
    for n in lens:
        states *= n + 1

    def enabled(state):
        return [k for k in range(len(parts))
                if state[k] < lens[k] and all(state[i] == lens[i] for i in preds[k])]

    @lru_cache(maxsize=None)
    def count(state) -> int:
        ks = enabled(state)
        if not ks:
            return 1
        return sum(count(state[:k] + (state[k] + 1,) + state[k + 1:]) for k in ks)

    exact = states <= _EXACT_INTERLEAVE_LIMIT
    state = tuple(0 for _ in parts)
    out = []
    while True:
        ks = enabled(state)
        if not ks:
            return out
        if exact:
            nexts = [state[:k] + (state[k] + 1,) + state[k + 1:] for k in ks]
            weights = [count(s) for s in nexts]
            pick = rng.randrange(sum(weights))
            for k, w in zip(ks, weights):
                if pick < w:
                    break
                pick -= w
        else:
            k = rng.choice(ks)
        out.append(parts[k][state[k]])
        state = state[:k] + (state[k] + 1,) + state[k + 1:]


# -- JSON -------------------------------------------------------------------------

def to_json(m: PowlNode) -> dict:
    if isinstance(m, Activity):
        return {"type": "activity", "label": m.label}
    if isinstance(m, Silent):
        return {"type": "silent"}
    if isinstance(m, Loop):
        return {"type": "loop", "do": to_json(m.do), "redo": to_json(m.redo)}
    if isinstance(m, PartialOrder):
        return {"type": "partial_order",
                "children": [to_json(c) for c in m.children],
                "order": [list(p) for p in sorted(m.order)]}
    if isinstance(m, ChoiceGraph):
        edges = sorted(m.edges, key=lambda e: (ref_key(e[0]), ref_key(e[1])))
        return {"type": "choice_graph",
                "children": [to_json(c) for c in m.children],
                "edges": [list(e) for e in edges]}
    raise ContractError(f"cannot serialise {m!r}")


def from_json(obj, path: str = "$") -> PowlNode:
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: expected an object, got {type(obj).__name__}")
    kind = obj.get("type")

    def field(name, types):
        if name not in obj:
            raise SchemaError(f"{path}: {kind} node lacks {name!r}")
        value = obj[name]
        if not isinstance(value, types):
            raise SchemaError(f"{path}.{name}: wrong type {type(value).__name__}")
        return value

    if kind == "activity":
        return Activity(field("label", str))
    if kind == "silent":
        return Silent()
    if kind == "loop":
        return Loop(from_json(field("do", dict), path + ".do"),
                    from_json(field("redo", dict), path + ".redo"))
    if kind in ("partial_order", "choice_graph"):
        children = tuple(from_json(c, f"{path}.children[{i}]")
                         for i, c in enumerate(field("children", list)))
        pairs_name = "order" if kind == "partial_order" else "edges"
        pairs = []
        for i, pair in enumerate(field(pairs_name, list)):
            where = f"{path}.{pairs_name}[{i}]"
            if not isinstance(pair, list) or len(pair) != 2:
                raise SchemaError(f"{where}: expected a pair")
            for ref in pair:
                ok = (isinstance(ref, int) and not isinstance(ref, bool)) or \
                    (kind == "choice_graph" and ref in (START, END))
                if not ok:
                    raise SchemaError(f"{where}: bad reference {ref!r}")
            pairs.append(tuple(pair))
        if kind == "partial_order":
            return PartialOrder(children, frozenset(pairs))
        return ChoiceGraph(children, frozenset(pairs))
    raise SchemaError(f"{path}.type: unknown node kind {kind!r}")


def serialize(m: PowlNode) -> str:
    return json.dumps(to_json(m), separators=(",", ":"), ensure_ascii=False)


def deserialize(text: str | bytes) -> PowlNode:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return from_json(obj)


# -- DOT --------------------------------------------------------------------------

def _dot_str(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(m: PowlNode) -> str:
    """Graphviz rendering: partial-order edges solid black, choice-graph edges dashed blue."""
    lines = ["digraph powl {", "  compound=true;", "  rankdir=LR;",
             '  node [fontname="Helvetica"];']
    counter = iter(range(10**9))

    def emit(node, indent) -> tuple[str, str | None]:
        pad = "  " * indent
        nid = f"n{next(counter)}"
        if isinstance(node, Activity):
            lines.append(f"{pad}{nid} [shape=box, style=rounded, label={_dot_str(node.label)}];")
            return nid, None
        if isinstance(node, Silent):
            lines.append(f'{pad}{nid} [shape=box, style=filled, fillcolor=black, '
                         f'width=0.2, height=0.2, label=""];')
            return nid, None
        cluster = f"cluster_{nid}"
        lines.append(f"{pad}subgraph {cluster} {{")
        inner = pad + "  "
        if isinstance(node, Loop):
            lines.append(f'{inner}label="loop"; style=solid;')
            lines.append(f'{inner}{nid} [shape=circle, label="⟲", width=0.3];')
            for role, child in (("do", node.do), ("redo", node.redo)):
                cid, ccl = emit(child, indent + 1)
                lines.append(f"{inner}{nid} -> {cid} [label={role}{_lhead(ccl)}];")
            lines.append(f"{pad}}}")
            return nid, cluster
        if isinstance(node, PartialOrder):
            lines.append(f'{inner}label="partial order"; style=solid;')
            ids = [emit(c, indent + 1) for c in node.children]
            for i, j in sorted(graphs.transitive_reduction(node.order)):
                (a, acl), (b, bcl) = ids[i], ids[j]
                lines.append(f"{inner}{a} -> {b} [color=black, style=solid"
                             f"{_ltail(acl)}{_lhead(bcl)}];")
            lines.append(f"{pad}}}")
            return ids[0][0], cluster
        if isinstance(node, ChoiceGraph):
            lines.append(f'{inner}label="choice graph"; style=dashed; color=blue;')
            start, end = f"{nid}_start", f"{nid}_end"
            lines.append(f'{inner}{start} [shape=circle, style=filled, fillcolor=green, '
                         f'width=0.15, label=""];')
            lines.append(f'{inner}{end} [shape=square, style=filled, fillcolor=red, '
                         f'width=0.15, label=""];')
            ids = {START: (start, None), END: (end, None)}
            for i, c in enumerate(node.children):
                ids[i] = emit(c, indent + 1)
            for a, b in sorted(node.edges, key=lambda e: (ref_key(e[0]), ref_key(e[1]))):
                (x, xcl), (y, ycl) = ids[a], ids[b]
                lines.append(f"{inner}{x} -> {y} [color=blue, style=dashed"
                             f"{_ltail(xcl)}{_lhead(ycl)}];")
            lines.append(f"{pad}}}")
            return start, cluster
        raise ContractError(f"cannot render {node!r}")

    emit(m, 1)
    lines.append("}")
    return "\n".join(lines) + "\n"


def _lhead(cluster):
    return f", lhead={cluster}" if cluster else ""


def _ltail(cluster):
    return f", ltail={cluster}" if cluster else ""
