"""Event logs: ingestion, behavioural abstractions, noise filtering, projection.

Activities are interned: a log holds a table of label strings and every
trace is a tuple of integer ids into that table.  Sub-logs created by
:func:`project` share the table of their parent, so ids stay comparable
through a whole discovery run.
"""
from __future__ import annotations

import csv
import io
import os
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Iterable, Mapping, Sequence
from xml.etree import ElementTree as ET

from .errors import ContractError, LogParseError, SchemaError

Trace = tuple  # tuple[int, ...] inside a log, tuple[str, ...] at the API edge


@dataclass(frozen=True, eq=False)
class EventLog:
    """Multiset of traces over an interned activity table."""

    activities: tuple[str, ...]
    traces: Mapping[tuple[int, ...], int] = field(default_factory=dict)

    def __post_init__(self):
        for trace, count in self.traces.items():
            if count < 1:
                raise ContractError(f"multiplicity {count} < 1 for trace {trace}")
            for a in trace:
                if not 0 <= a < len(self.activities):
                    raise ContractError(f"activity id {a} outside interning table")

    @classmethod
    def from_traces(cls, traces: Iterable, activities: Sequence[str] = ()) -> "EventLog":
        """Build a log from label sequences.

        Items may be plain sequences of labels or ``(sequence, count)`` pairs.
        Labels are interned in order of first appearance, after any labels
        given in ``activities``.
        """
        table = list(activities)
        index = {label: i for i, label in enumerate(table)}
        counts: Counter = Counter()
        for item in traces:
            if isinstance(item, tuple) and len(item) == 2 and isinstance(item[1], int):
                seq, n = item
            else:
                seq, n = item, 1
            ids = []
            for label in seq:
                if label not in index:
                    index[label] = len(table)
                    table.append(label)
                ids.append(index[label])
            counts[tuple(ids)] += n
        return cls(tuple(table), dict(counts))

    def __len__(self) -> int:
        return sum(self.traces.values())

    def __eq__(self, other):
        if not isinstance(other, EventLog):
            return NotImplemented
        return self.as_counter() == other.as_counter()

    __hash__ = None

    @property
    def num_events(self) -> int:
        return sum(len(t) * n for t, n in self.traces.items())

    def id_of(self, label: str) -> int:
        return self.activities.index(label)

    def labels(self, trace: Sequence[int]) -> tuple[str, ...]:
        return tuple(self.activities[a] for a in trace)

    def variants(self) -> list[tuple[tuple[str, ...], int]]:
        """Distinct label traces with counts, in a stable (id-sorted) order."""
        return [(self.labels(t), n) for t, n in sorted(self.traces.items())]

    def as_counter(self) -> Counter:
        return Counter({self.labels(t): n for t, n in self.traces.items()})

    def with_traces(self, traces: Mapping[tuple[int, ...], int]) -> "EventLog":
        return EventLog(self.activities, dict(traces))


@dataclass(frozen=True)
class LogStats:
    """Directly-follows abstraction of a log, the input to every cut."""

    alphabet: frozenset[int]
    starts: frozenset[int]
    ends: frozenset[int]
    dfg: Mapping[tuple[int, int], int]
    ef: frozenset[tuple[int, int]]
    empty_traces: int
    start_freq: Mapping[int, int]
    end_freq: Mapping[int, int]
    total_traces: int
    filtered: bool = False

    def successors(self, a: int) -> list[int]:
        return sorted(b for (x, b) in self.dfg if x == a)

    def to_dict(self, activities: Sequence[str]) -> dict:
        """JSON-ready summary with activity labels instead of ids."""
        name = activities.__getitem__
        return {
            "alphabet": sorted(map(name, self.alphabet)),
            "starts": sorted(map(name, self.starts)),
            "ends": sorted(map(name, self.ends)),
            "dfg": [[name(a), name(b), n] for (a, b), n in sorted(self.dfg.items())],
            "start_freq": {name(a): n for a, n in sorted(self.start_freq.items())},
            "end_freq": {name(a): n for a, n in sorted(self.end_freq.items())},
            "empty_traces": self.empty_traces,
            "total_traces": self.total_traces,
        }


def log_stats(log: EventLog) -> LogStats:
    alphabet: set[int] = set()
    dfg: Counter = Counter()
    ef: set[tuple[int, int]] = set()
    start_freq: Counter = Counter()
    end_freq: Counter = Counter()
    empty = 0
    for trace, n in log.traces.items():
        if not trace:
            empty += n
            continue
        alphabet.update(trace)
        start_freq[trace[0]] += n
        end_freq[trace[-1]] += n
        for a, b in zip(trace, trace[1:]):
            dfg[(a, b)] += n
        seen: set[int] = set()
        for b in trace:
            for a in seen:
                ef.add((a, b))
            seen.add(b)
    return LogStats(
        alphabet=frozenset(alphabet),
        starts=frozenset(start_freq),
        ends=frozenset(end_freq),
        dfg=dict(dfg),
        ef=frozenset(ef),
        empty_traces=empty,
        start_freq=dict(start_freq),
        end_freq=dict(end_freq),
        total_traces=len(log),
    )


def filter_noise(stats: LogStats, threshold: float) -> LogStats:
    """Drop infrequent DFG edges and start/end activities.

    An edge ``a -> b`` survives iff its frequency reaches ``threshold`` times
    the most frequent edge leaving ``a``.  Start and end activities are
    thresholded against the most frequent start (end) activity.  The
    eventually-follows relation is left untouched.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ContractError(f"noise threshold {threshold} outside [0, 1]")
    if threshold == 0.0:
        return stats
    out_max: dict[int, int] = {}
    for (a, _), n in stats.dfg.items():
        out_max[a] = max(out_max.get(a, 0), n)
    dfg = {e: n for e, n in stats.dfg.items() if n >= threshold * out_max[e[0]]}

    def keep(freq: Mapping[int, int]) -> dict[int, int]:
        if not freq:
            return {}
        top = max(freq.values())
        return {a: n for a, n in freq.items() if n >= threshold * top}

    start_freq = keep(stats.start_freq)
    end_freq = keep(stats.end_freq)
    return replace(
        stats,
        dfg=dfg,
        starts=frozenset(start_freq),
        ends=frozenset(end_freq),
        start_freq=start_freq,
        end_freq=end_freq,
        filtered=True,
    )


def project(log: EventLog, keep: Iterable[int], keep_empty: bool) -> EventLog:
    """Project every trace onto ``keep``; optionally discard emptied traces."""
    keep = frozenset(keep)
    out: Counter = Counter()
    for trace, n in log.traces.items():
        sub = tuple(a for a in trace if a in keep)
        if sub or keep_empty:
            out[sub] += n
    return log.with_traces(out)


# -- XES ---------------------------------------------------------------------

def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _string_attrs(elem) -> dict[str, str]:
    return {
        child.get("key"): child.get("value")
        for child in elem
        if _local(child.tag) == "string" and child.get("key") is not None
    }


def parse_xes(data: bytes | str) -> EventLog:
    """Parse the XES subset: ``<log>/<trace>/<event>`` with string attributes.

    If any event carries ``lifecycle:transition``, only ``complete`` events
    (case-insensitive) are kept; events without the attribute are kept.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise LogParseError(f"malformed XML: {exc}", line=exc.position[0]) from exc
    if _local(root.tag) != "log":
        raise SchemaError(f"root element is <{_local(root.tag)}>, expected <log>")

    raw: list[list[tuple[str, str | None]]] = []
    has_lifecycle = False
    for ti, trace in enumerate(e for e in root if _local(e.tag) == "trace"):
        events = []
        for ei, event in enumerate(e for e in trace if _local(e.tag) == "event"):
            attrs = _string_attrs(event)
            name = attrs.get("concept:name")
            if name is None:
                raise SchemaError(f"trace {ti} event {ei}: missing concept:name")
            life = attrs.get("lifecycle:transition")
            has_lifecycle |= life is not None
            events.append((name, life))
        raw.append(events)

    def keep(life):
        return not has_lifecycle or life is None or life.lower() == "complete"

    return EventLog.from_traces([name for name, life in events if keep(life)] for events in raw)


def write_xes(log: EventLog) -> bytes:
    """Serialise a log as XES, one ``<trace>`` per trace instance."""
    root = ET.Element("log", {"xes.version": "1.0"})
    case = 0
    for labels, n in log.variants():
        for _ in range(n):
            trace = ET.SubElement(root, "trace")
            ET.SubElement(trace, "string", key="concept:name", value=f"case_{case}")
            case += 1
            for label in labels:
                event = ET.SubElement(trace, "event")
                ET.SubElement(event, "string", key="concept:name", value=label)
                ET.SubElement(event, "string", key="lifecycle:transition", value="complete")
    ET.indent(root)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"


# -- CSV ---------------------------------------------------------------------

@dataclass(frozen=True)
class CsvColumns:
    case: str = "case_id"
    activity: str = "activity"
    timestamp: str | None = "timestamp"


def parse_timestamp(text: str) -> datetime:
    """RFC 3339 timestamp or integer epoch seconds, as an aware UTC datetime."""
    text = text.strip()
    if text.lstrip("-").isdigit():
        return datetime.fromtimestamp(int(text), tz=timezone.utc)
    iso = text[:-1] + "+00:00" if text.endswith(("Z", "z")) else text
    if "T" not in iso and "t" not in iso and " " not in iso:
        raise ValueError(f"not an RFC 3339 timestamp: {text!r}")
    stamp = datetime.fromisoformat(iso.replace("t", "T"))
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp


def parse_csv(data: bytes | str, columns: CsvColumns = CsvColumns()) -> EventLog:
    """Group CSV rows into traces by case id.

    Events are ordered by timestamp (stable, so ties keep file order) when
    the timestamp column is present in the header, else by file order.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    reader = csv.DictReader(io.StringIO(data))
    header = reader.fieldnames or []
    for col in (columns.case, columns.activity):
        if col not in header:
            raise SchemaError(f"missing CSV column {col!r} (header: {header})")
    ts_col = columns.timestamp if columns.timestamp in header else None

    cases: dict[str, list] = {}
    for rowno, row in enumerate(reader, start=2):
        stamp = None
        if ts_col is not None:
            try:
                stamp = parse_timestamp(row[ts_col] or "")
            except (ValueError, OverflowError, OSError) as exc:
                raise LogParseError(f"row {rowno}: bad timestamp {row[ts_col]!r}: {exc}",
                                    line=rowno) from exc
        cases.setdefault(row[columns.case], []).append((stamp, row[columns.activity]))

    traces = []
    for events in cases.values():
        if ts_col is not None:
            events = sorted(events, key=lambda e: e[0])
        traces.append([label for _, label in events])
    return EventLog.from_traces(traces)


def write_csv(log: EventLog, columns: CsvColumns = CsvColumns()) -> bytes:
    """One row per event; timestamps are synthetic epoch seconds per case."""
    buf = io.StringIO()
    fields = [columns.case, columns.activity] + ([columns.timestamp] if columns.timestamp else [])
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fields)
    case = 0
    for labels, n in log.variants():
        for _ in range(n):
            for i, label in enumerate(labels):
                row = [f"case_{case}", label]
                if columns.timestamp:
                    row.append(str(i))
                writer.writerow(row)
            case += 1
    return buf.getvalue().encode("utf-8")


def read_log(path: str | os.PathLike, fmt: str | None = None,
             columns: CsvColumns = CsvColumns()) -> EventLog:
    """Load a log file, picking the format from ``fmt`` or the file suffix."""
    path = os.fspath(path)
    if fmt is None:
        fmt = "csv" if path.lower().endswith(".csv") else "xes"
    with open(path, "rb") as fh:
        data = fh.read()
    if fmt == "csv":
        return parse_csv(data, columns)
    if fmt == "xes":
        return parse_xes(data)
    raise ContractError(f"unknown log format {fmt!r}")
