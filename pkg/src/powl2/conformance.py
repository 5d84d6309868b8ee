"""Model/log agreement: membership fitness, escaping-edges precision, f-score."""
from __future__ import annotations

from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .errors import UndefinedPrecisionError
from .log import EventLog
from .model import MembershipOracle, PowlNode
from .wfnet import Limits, Replayer, WFNet, powl_to_wfnet


@dataclass(frozen=True)
class TraceFit:
    trace: tuple[str, ...]
    count: int
    fits: bool


@dataclass(frozen=True)
class PrecisionResult:
    precision: float
    skipped_prefixes: int
    escaping: int
    enabled: int


@dataclass
class ConformanceReport:
    fitness: float
    precision: float
    f_score: float
    skipped_prefixes: int = 0
    per_trace: list[TraceFit] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "fitness": self.fitness,
            "precision": self.precision,
            "f_score": self.f_score,
            "skipped_prefixes": self.skipped_prefixes,
            "per_trace": [{"trace": list(t.trace), "count": t.count, "fits": t.fits}
                          for t in self.per_trace],
        }


def _check_chunk(args):
    model, traces = args
    oracle = MembershipOracle(model)
    return [oracle(t) for t in traces]


def trace_fitness(log: EventLog, m: PowlNode, jobs: int = 1) -> list[TraceFit]:
    variants = log.variants()
    traces = [t for t, _ in variants]
    if jobs > 1 and len(traces) > 1:
        chunks = [traces[k::jobs] for k in range(jobs)]
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_check_chunk, [(m, c) for c in chunks]))
        fits = [None] * len(traces)
        for k, res in enumerate(results):
            fits[k::jobs] = res
    else:
        fits = _check_chunk((m, traces))
    return [TraceFit(t, n, ok) for (t, n), ok in zip(variants, fits)]


def fitness(log: EventLog, m: PowlNode, jobs: int = 1) -> float:
    """Share of traces (by multiplicity) that the model can reproduce exactly."""
    return _fitness_of(trace_fitness(log, m, jobs))


def _fitness_of(per_trace: list[TraceFit]) -> float:
    total = sum(t.count for t in per_trace)
    if total == 0:
        return 1.0
    return sum(t.count for t in per_trace if t.fits) / total


def precision_details(log: EventLog, net: WFNet, limits: Limits = Limits()) -> PrecisionResult:
    """Escaping-edges precision over the log's prefix automaton.

    Every distinct prefix (the empty one included) is weighted by the number
    of traces passing through it.  Prefixes the net cannot replay are
    skipped and counted.
    """
    weight: dict[tuple, int] = defaultdict(int)
    follows: dict[tuple, set] = defaultdict(set)
    for trace, n in log.variants():
        for k in range(len(trace) + 1):
            prefix = trace[:k]
            weight[prefix] += n
            if k < len(trace):
                follows[prefix].add(trace[k])

    children: dict[tuple, list] = defaultdict(list)
    for prefix in weight:
        if prefix:
            children[prefix[:-1]].append(prefix)

    rep = Replayer(net, limits)
    escaping = enabled = 0
    skipped = 0
    todo = [((), rep.initial())]
    while todo:
        prefix, states = todo.pop()
        if not states:
            skipped += _subtree_size(prefix, children)
            continue
        model_next = rep.enabled_labels(states)
        w = weight[prefix]
        enabled += w * len(model_next)
        escaping += w * len(model_next - follows[prefix])
        for child in sorted(children[prefix]):
            todo.append((child, rep.step(states, child[-1])))
    if enabled == 0:
        raise UndefinedPrecisionError("no replayable prefix enables any activity")
    return PrecisionResult(1.0 - escaping / enabled, skipped, escaping, enabled)


def _subtree_size(prefix, children) -> int:
    count, todo = 0, [prefix]
    while todo:
        p = todo.pop()
        count += 1
        todo.extend(children[p])
    return count


def precision(log: EventLog, net: WFNet, limits: Limits = Limits()) -> float:
    return precision_details(log, net, limits).precision


def f_score(fit: float, prec: float) -> float:
    if fit + prec == 0:
        return 0.0
    return 2 * fit * prec / (fit + prec)


def conformance_report(log: EventLog, m: PowlNode, limits: Limits = Limits(),
                       jobs: int = 1) -> ConformanceReport:
    per_trace = trace_fitness(log, m, jobs)
    fit = _fitness_of(per_trace)
    prec = precision_details(log, powl_to_wfnet(m), limits)
    return ConformanceReport(fit, prec.precision, f_score(fit, prec.precision),
                             prec.skipped_prefixes, per_trace)
