"""Small directed-graph utilities over hashable nodes and edge sets."""
from __future__ import annotations

from collections import defaultdict, deque
from typing import Hashable, Iterable


def adjacency(edges: Iterable[tuple]) -> dict:
    adj = defaultdict(set)
    for a, b in edges:
        adj[a].add(b)
    return adj


def transitive_closure(edges: Iterable[tuple]) -> frozenset:
    adj = adjacency(edges)
    closure = set()
    for src in list(adj):
        seen = set()
        todo = list(adj[src])
        while todo:
            v = todo.pop()
            if v in seen:
                continue
            seen.add(v)
            todo.extend(adj.get(v, ()))
        closure.update((src, v) for v in seen)
    return frozenset(closure)


def transitive_reduction(order: Iterable[tuple]) -> frozenset:
    """Reduction of a strict partial order (assumed transitively closed)."""
    order = frozenset(order)
    succ = adjacency(order)
    return frozenset(
        (a, b) for a, b in order
        if not any(b in succ.get(c, ()) for c in succ[a] if c != b)
    )


def reachable(adj, roots: Iterable) -> set:
    seen = set()
    todo = deque(roots)
    while todo:
        v = todo.popleft()
        if v in seen:
            continue
        seen.add(v)
        todo.extend(adj.get(v, ()))
    return seen


def strongly_connected_components(nodes: Iterable[Hashable], edges: Iterable[tuple]) -> list[frozenset]:
    """Tarjan's algorithm, iterative so deep graphs do not hit the recursion limit.

    Components come out in reverse topological order of the condensation.
    """
    adj = adjacency(edges)
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    result: list[frozenset] = []
    counter = 0

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(sorted(adj.get(root, ()))))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(sorted(adj.get(w, ())))))
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[v])
                if low[v] == index[v]:
                    comp = set()
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        comp.add(w)
                        if w == v:
                            break
                    result.append(frozenset(comp))
    return result


def is_acyclic(nodes: Iterable[Hashable], edges: Iterable[tuple]) -> bool:
    edges = list(edges)
    if any(a == b for a, b in edges):
        return False
    return all(len(c) == 1 for c in strongly_connected_components(nodes, edges))
