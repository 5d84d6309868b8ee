"""Shared generators and independent oracles for the test-suite."""
from __future__ import annotations

import itertools
import random
from xml.etree import ElementTree as ET

from powl2.log import EventLog
from powl2.model import (
    END,
    START,
    Activity,
    ChoiceGraph,
    Loop,
    PartialOrder,
    Silent,
    iter_nodes,
    partial_order,
)
from powl2.wfnet import WFNet

LETTERS = "abcdefgh"


def random_dag(rng: random.Random, n: int, p: float) -> set[tuple[int, int]]:
    perm = list(range(n))
    rng.shuffle(perm)
    return {(perm[i], perm[j]) for i in range(n) for j in range(i + 1, n) if rng.random() < p}


def random_choice_edges(rng: random.Random, n: int, p_skip: float = 0.1) -> set:
    """Acyclic choice-graph edges with every child on some Start -> End path."""
    perm = list(range(n))
    rng.shuffle(perm)
    edges = set()
    for pos, v in enumerate(perm):
        earlier = perm[:pos]
        later = perm[pos + 1:]
        src = rng.choice([START] + earlier) if earlier and rng.random() < 0.7 else START
        edges.add((src, v))
        dst = rng.choice(later + [END]) if later and rng.random() < 0.7 else END
        edges.add((v, dst))
        for w in later:
            if rng.random() < 0.2:
                edges.add((v, w))
    if rng.random() < p_skip:
        edges.add((START, END))
    return edges


def random_model(rng: random.Random, labels, loops: bool = True, silents: bool = True):
    """Random valid POWL 2.0 model using every label exactly once."""
    labels = list(labels)
    if len(labels) == 1:
        leaf = Activity(labels[0])
        r = rng.random()
        if loops and r < 0.1:
            return Loop(leaf, Silent())
        if silents and r < 0.2:
            return ChoiceGraph((Silent(), leaf), frozenset({(START, 0), (START, 1), (0, END), (1, END)}))
        return leaf
    kinds = ["po", "cg"] + (["loop"] if loops else [])
    kind = rng.choice(kinds)
    rng.shuffle(labels)
    if kind == "loop":
        cut = rng.randint(1, len(labels) - 1)
        redo = random_model(rng, labels[cut:], loops, silents)
        return Loop(random_model(rng, labels[:cut], loops, silents), redo)
    k = rng.randint(2, min(4, len(labels)))
    cuts = sorted(rng.sample(range(1, len(labels)), k - 1))
    groups = [labels[a:b] for a, b in zip([0] + cuts, cuts + [len(labels)])]
    children = [random_model(rng, g, loops, silents) for g in groups]
    if silents and rng.random() < 0.15:
        children.append(Silent())
    if kind == "po":
        return partial_order(children, random_dag(rng, len(children), 0.4))
    return ChoiceGraph(tuple(children), frozenset(random_choice_edges(rng, len(children))))


def random_log(rng: random.Random, max_alphabet: int = 8, max_traces: int = 50, max_len: int = 8) -> EventLog:
    letters = LETTERS[: rng.randint(1, max_alphabet)]
    traces = [
        [rng.choice(letters) for _ in range(rng.randint(0, max_len))]
        for _ in range(rng.randint(1, max_traces))
    ]
    return EventLog.from_traces(traces)


def choice_graphs(model):
    return [n for _, n in iter_nodes(model) if isinstance(n, ChoiceGraph)]


def partial_orders(model):
    return [n for _, n in iter_nodes(model) if isinstance(n, PartialOrder)]


def brute_shuffle(traces, order) -> set[tuple]:
    """Order-preserving shuffle by permuting tagged events and filtering."""
    tagged = [(k, i, e) for k, t in enumerate(traces) for i, e in enumerate(t)]
    out = set()
    for perm in itertools.permutations(tagged):
        ok = True
        pos = {(k, i): p for p, (k, i, _) in enumerate(perm)}
        for k, t in enumerate(traces):
            if any(pos[(k, i)] > pos[(k, i + 1)] for i in range(len(t) - 1)):
                ok = False
                break
        if ok:
            for a, b in order:
                if traces[a] and traces[b] and max(pos[(a, i)] for i in range(len(traces[a]))) > \
                        min(pos[(b, i)] for i in range(len(traces[b]))):
                    ok = False
                    break
        if ok:
            out.add(tuple(e for _, _, e in perm))
    return out


def read_pnml(text: str) -> WFNet:
    """Test-only PNML reader for round-trip checks."""
    root = ET.fromstring(text)
    page = root.find("net/page")
    places, transitions, arcs = [], [], set()
    source = None
    for el in page:
        if el.tag == "place":
            places.append(el.get("id"))
            if el.find("initialMarking/text") is not None:
                source = el.get("id")
        elif el.tag == "transition":
            name = el.findtext("name/text") or None
            transitions.append((el.get("id"), name))
        elif el.tag == "arc":
            arcs.add((el.get("source"), el.get("target")))
    sink = root.find("net/finalmarkings/marking/place").get("idref")
    return WFNet(tuple(places), tuple(transitions), frozenset(arcs), source, sink)


def _cat(left, right, max_len):
    return {x + y for x in left for y in right if len(x) + len(y) <= max_len}


def _merge(parts, order, max_len):
    """Interleavings of ``parts`` that finish every predecessor before a successor starts."""
    out = set()

    def go(pos, acc):
        if len(acc) > max_len:
            return
        if all(pos[k] == len(p) for k, p in enumerate(parts)):
            out.add(acc)
            return
        for k, p in enumerate(parts):
            if pos[k] < len(p) and all(pos[i] == len(parts[i]) for i, j in order if j == k):
                nxt = list(pos)
                nxt[k] += 1
                go(tuple(nxt), acc + (p[pos[k]],))

    go(tuple(0 for _ in parts), ())
    return out


def naive_language(m, max_len: int) -> set[tuple]:
    """All traces of length <= max_len, by length-bounded fixpoint iteration."""
    if isinstance(m, Activity):
        return {(m.label,)} if max_len >= 1 else set()
    if isinstance(m, Silent):
        return {()}
    if isinstance(m, Loop):
        do, redo = naive_language(m.do, max_len), naive_language(m.redo, max_len)
        lang = set(do)
        while True:
            grown = lang | _cat(_cat(lang, redo, max_len), do, max_len)
            if grown == lang:
                return lang
            lang = grown
    if isinstance(m, PartialOrder):
        langs = [sorted(naive_language(c, max_len)) for c in m.children]
        out = set()
        for combo in itertools.product(*langs):
            if sum(map(len, combo)) <= max_len:
                out |= _merge(list(combo), m.order, max_len)
        return out
    langs = [naive_language(c, max_len) for c in m.children]
    tail = {END: {()}}
    tail.update({i: set() for i in range(len(m.children))})
    while True:
        changed = False
        for i in range(len(m.children)):
            after = set().union(*(tail[j] for s, j in m.edges if s == i))
            new = _cat(langs[i], after, max_len)
            if new != tail[i]:
                tail[i], changed = new, True
        if not changed:
            return set().union(*(tail[j] for s, j in m.edges if s == START))
