"""Relational event ingestion, validation, and cumulative network state.

Events are directed, time-stamped interactions ``sender -> receiver``.
External actor labels are mapped to dense integer ids at ingestion so that
every downstream structure can be array-indexed. Histories are immutable
after construction and hold strictly increasing times; ties in the raw data
are broken deterministically (stable order plus a small additive jitter).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Iterator, Sequence, TextIO, Union

import numpy as np

from .errors import EventDataError

#: Additive spacing used to break exact time ties, in time units.
TIE_EPSILON = 1e-6

RawRow = tuple[str, str, float]
TextSource = Union[str, TextIO]


@dataclass(frozen=True)
class RelationalEvent:
    """A single directed interaction at a point in time."""

    sender: int
    receiver: int
    time: float


class SymbolTable:
    """Bijection between external actor labels and dense ids ``0..n-1``."""

    __slots__ = ("labels", "_index")

    def __init__(self, labels: Iterable[str] = ()):
        self.labels: list[str] = [str(lab) for lab in labels]
        self._index = {lab: i for i, lab in enumerate(self.labels)}
        if len(self._index) != len(self.labels):
            raise EventDataError("duplicate actor labels in symbol table")

    @classmethod
    def identity(cls, n_actors: int) -> "SymbolTable":
        return cls(str(i) for i in range(n_actors))

    def add(self, label: str) -> int:
        label = str(label)
        if label in self._index:
            return self._index[label]
        self._index[label] = len(self.labels)
        self.labels.append(label)
        return self._index[label]

    def id_of(self, label: str) -> int:
        return self._index[str(label)]

    def label_of(self, actor_id: int) -> str:
        return self.labels[actor_id]

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: object) -> bool:
        return str(label) in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SymbolTable) and self.labels == other.labels


class EventHistory:
    """Immutable, validated, time-ordered sequence of relational events.

    Parameters
    ----------
    senders, receivers : integer arrays of equal length
        Dense actor ids, each in ``0..n_actors-1``.
    times : float array
        Strictly increasing nonnegative event times. Use `build_history`
        when the raw times may contain ties.
    n_actors : int
        Number of actors; every referenced id must be smaller.
    symbols : SymbolTable, optional
        Mapping back to external labels. Defaults to the identity table.
    """

    __slots__ = ("senders", "receivers", "times", "n_actors", "symbols")

    def __init__(self, senders, receivers, times, n_actors: int,
                 symbols: SymbolTable | None = None, validate: bool = True):
        self.senders = np.ascontiguousarray(senders, dtype=np.int32)
        self.receivers = np.ascontiguousarray(receivers, dtype=np.int32)
        self.times = np.ascontiguousarray(times, dtype=np.float64)
        self.n_actors = int(n_actors)
        self.symbols = symbols if symbols is not None else SymbolTable.identity(n_actors)
        if validate:
            self._validate()
        for arr in (self.senders, self.receivers, self.times):
            arr.setflags(write=False)

    def _validate(self) -> None:
        n = len(self.times)
        if len(self.senders) != n or len(self.receivers) != n:
            raise EventDataError("senders, receivers and times must have equal length")
        if len(self.symbols) != self.n_actors:
            raise EventDataError("symbol table size does not match n_actors")
        if n == 0:
            return
        if self.times[0] < 0:
            raise EventDataError("negative event time")
        if np.any(np.diff(self.times) <= 0):
            raise EventDataError("event times must be strictly increasing "
                                 "(apply tie-breaking via build_history first)")
        for name, arr in (("sender", self.senders), ("receiver", self.receivers)):
            if arr.min(initial=0) < 0 or arr.max(initial=-1) >= self.n_actors:
                raise EventDataError(f"{name} id out of range 0..{self.n_actors - 1}")
        if np.any(self.senders == self.receivers):
            k = int(np.argmax(self.senders == self.receivers))
            raise EventDataError(f"self-loop at event index {k}")

    @property
    def n_events(self) -> int:
        return len(self.times)

    def event(self, k: int) -> RelationalEvent:
        return RelationalEvent(int(self.senders[k]), int(self.receivers[k]),
                               float(self.times[k]))

    def __len__(self) -> int:
        return self.n_events

    def __getitem__(self, k: int) -> RelationalEvent:
        return self.event(k)

    def __iter__(self) -> Iterator[RelationalEvent]:
        for k in range(self.n_events):
            yield self.event(k)

    def to_csv(self, stream: TextIO | None = None) -> str | None:
        """Serialize to the event CSV format (header ``sender,receiver,time``).

        Times are written with full float precision so a parse round-trip
        reproduces them exactly.
        """
        out = stream if stream is not None else io.StringIO()
        out.write("sender,receiver,time\n")
        for s, r, t in zip(self.senders, self.receivers, self.times):
            out.write(f"{self.symbols.label_of(s)},{self.symbols.label_of(r)},{float(t)!r}\n")
        if stream is None:
            return out.getvalue()
        return None


def break_ties(times: np.ndarray) -> np.ndarray:
    """Make nondecreasing times strictly increasing by deterministic jitter.

    Within each group of equal times, entry ``k`` (0-based, original order)
    receives ``k * TIE_EPSILON``. Raises if the jitter would overtake the
    next distinct timestamp, which indicates the data need rescaled time
    units rather than silent reordering.
    """
    times = np.asarray(times, dtype=np.float64)
    if times.size == 0:
        return times.copy()
    if np.any(np.diff(times) < 0):
        raise EventDataError("times must be nondecreasing before tie-breaking")
    out = times.copy()
    start = 0
    for i in range(1, len(times) + 1):
        if i == len(times) or times[i] != times[start]:
            width = i - start
            if width > 1:
                out[start:i] += TIE_EPSILON * np.arange(width)
            start = i
    if np.any(np.diff(out) <= 0):
        raise EventDataError(
            "tie-breaking jitter collides with neighbouring timestamps; "
            "rescale times to coarser units")
    return out


def build_history(senders, receivers, times, n_actors: int,
                  symbols: SymbolTable | None = None) -> EventHistory:
    """Stable-sort events by time, break ties, and validate into a history."""
    senders = np.asarray(senders, dtype=np.int32)
    receivers = np.asarray(receivers, dtype=np.int32)
    times = np.asarray(times, dtype=np.float64)
    order = np.argsort(times, kind="stable")
    return EventHistory(senders[order], receivers[order],
                        break_ties(times[order]), n_actors, symbols)


def _parse_time_column(values: list[str], time_format: str,
                       line_numbers: list[int]) -> np.ndarray:
    if time_format == "seconds":
        out = np.empty(len(values))
        for k, v in enumerate(values):
            try:
                out[k] = float(v)
            except ValueError:
                raise EventDataError(
                    f"malformed row at line {line_numbers[k]}: bad time {v!r}") from None
        return out
    if time_format == "iso8601":
        stamps = []
        for k, v in enumerate(values):
            try:
                stamps.append(datetime.fromisoformat(v.strip().replace("Z", "+00:00")))
            except ValueError:
                raise EventDataError(
                    f"malformed row at line {line_numbers[k]}: bad datetime {v!r}") from None
        aware = [s.tzinfo is not None for s in stamps]
        if any(aware) and not all(aware):
            raise EventDataError("mixed timezone-aware and naive datetimes")
        origin = min(stamps)
        return np.array([(s - origin).total_seconds() for s in stamps])
    raise EventDataError(f"unknown time format {time_format!r}")


def read_event_rows(source: TextSource, time_format: str = "seconds") -> list[RawRow]:
    """Read raw ``(sender_label, receiver_label, time)`` rows from CSV text.

    No validation beyond row shape and time parsing is applied; use
    `parse_events` for a fully validated history or `preprocess_email`
    for data that needs the duplicate/multi-recipient reductions first.
    """
    stream = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise EventDataError("empty input: missing header") from None
    header = [h.strip() for h in header]
    required = ["sender", "receiver", "time"]
    for col in header:
        if col not in required:
            raise EventDataError(f"unknown column {col!r}")
    for col in required:
        if col not in header:
            raise EventDataError(f"missing column {col!r}")
    idx = {col: header.index(col) for col in required}

    senders, receivers, raw_times, lines = [], [], [], []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise EventDataError(f"malformed row at line {line_no}: "
                                 f"expected {len(header)} fields, got {len(row)}")
        senders.append(row[idx["sender"]].strip())
        receivers.append(row[idx["receiver"]].strip())
        raw_times.append(row[idx["time"]])
        lines.append(line_no)

    times = _parse_time_column(raw_times, time_format, lines)
    for k, t in enumerate(times):
        if t < 0:
            raise EventDataError(f"negative time at line {lines[k]}")
    return list(zip(senders, receivers, times.tolist()))


def rows_to_history(rows: Sequence[RawRow]) -> EventHistory:
    """Map labels to dense ids and build a validated history from raw rows."""
    symbols = SymbolTable()
    senders = np.empty(len(rows), dtype=np.int32)
    receivers = np.empty(len(rows), dtype=np.int32)
    times = np.empty(len(rows))
    for k, (s, r, t) in enumerate(rows):
        senders[k] = symbols.add(s)
        receivers[k] = symbols.add(r)
        times[k] = t
    return build_history(senders, receivers, times, len(symbols), symbols)


def parse_events(source: TextSource, time_format: str = "seconds") -> EventHistory:
    """Parse event CSV into a validated `EventHistory`.

    Parameters
    ----------
    source : str or file-like
        CSV content with header ``sender,receiver,time``.
    time_format : {"seconds", "iso8601"}
        Interpret the time column as nonnegative seconds, or as ISO-8601
        datetimes converted to seconds since the earliest event.

    Raises
    ------
    EventDataError
        On malformed rows (with line number), negative times, unknown
        columns, or self-loops.
    """
    return rows_to_history(read_event_rows(source, time_format))


@dataclass
class PreprocessPolicy:
    """Reductions applied to raw communication logs before modelling."""

    drop_multi_recipient: bool = True
    drop_self_loops: bool = True


@dataclass
class PreprocessReport:
    rows_in: int
    dropped_self_loops: int
    dropped_multi_recipient: int
    rows_out: int

    def to_json(self) -> str:
        return json.dumps({
            "rows_in": self.rows_in,
            "dropped_self_loops": self.dropped_self_loops,
            "dropped_multi_recipient": self.dropped_multi_recipient,
            "rows_out": self.rows_out,
        })


def preprocess_email(rows: Sequence[RawRow],
                     policy: PreprocessPolicy | None = None,
                     ) -> tuple[EventHistory, PreprocessReport]:
    """Drop multi-recipient send groups and self-loops from raw rows.

    A "send group" is the set of rows sharing ``(sender, timestamp)``; a
    group whose rows name more than one distinct receiver is removed
    entirely. Reductions are reported, never fatal.
    """
    policy = policy or PreprocessPolicy()
    rows = list(rows)
    n_in = len(rows)

    dropped_multi = 0
    if policy.drop_multi_recipient:
        receivers_by_group: dict[tuple[str, float], set[str]] = {}
        for s, r, t in rows:
            receivers_by_group.setdefault((s, t), set()).add(r)
        kept = [row for row in rows
                if len(receivers_by_group[(row[0], row[2])]) == 1]
        dropped_multi = len(rows) - len(kept)
        rows = kept

    dropped_self = 0
    if policy.drop_self_loops:
        kept = [row for row in rows if row[0] != row[1]]
        dropped_self = len(rows) - len(kept)
        rows = kept

    report = PreprocessReport(rows_in=n_in, dropped_self_loops=dropped_self,
                              dropped_multi_recipient=dropped_multi,
                              rows_out=len(rows))
    return rows_to_history(rows), report


class NetworkState:
    """Cumulative directed event counts with neighbour indexes and a clock.

    Mutation is single-writer: `apply` advances the clock and increments one
    dyad count. A `copy` can be taken for concurrent read-only queries.
    """

    __slots__ = ("n_actors", "counts", "out_neighbors", "in_neighbors",
                 "clock", "n_applied")

    def __init__(self, n_actors: int):
        self.n_actors = int(n_actors)
        self.counts = np.zeros((n_actors, n_actors), dtype=np.int64)
        self.out_neighbors: list[set[int]] = [set() for _ in range(n_actors)]
        self.in_neighbors: list[set[int]] = [set() for _ in range(n_actors)]
        self.clock = 0.0
        self.n_applied = 0

    def apply(self, sender: int, receiver: int, time: float) -> bool:
        """Apply one event; returns True when the arc is new (count 0 -> 1)."""
        if time < self.clock:
            raise EventDataError(
                f"time regression: event at {time} behind clock {self.clock}")
        new_arc = self.counts[sender, receiver] == 0
        self.counts[sender, receiver] += 1
        if new_arc:
            self.out_neighbors[sender].add(receiver)
            self.in_neighbors[receiver].add(sender)
        self.clock = float(time)
        self.n_applied += 1
        return bool(new_arc)

    def copy(self) -> "NetworkState":
        dup = NetworkState(self.n_actors)
        dup.counts = self.counts.copy()
        dup.out_neighbors = [set(s) for s in self.out_neighbors]
        dup.in_neighbors = [set(s) for s in self.in_neighbors]
        dup.clock = self.clock
        dup.n_applied = self.n_applied
        return dup

    @classmethod
    def replay(cls, history: EventHistory, upto: int | None = None) -> "NetworkState":
        """State after applying the first ``upto`` events (all by default)."""
        state = cls(history.n_actors)
        stop = history.n_events if upto is None else upto
        for k in range(stop):
            state.apply(int(history.senders[k]), int(history.receivers[k]),
                        float(history.times[k]))
        return state


def apply_event(state: NetworkState, event: RelationalEvent) -> NetworkState:
    """Apply ``event`` to ``state`` in place and return the state."""
    state.apply(event.sender, event.receiver, event.time)
    return state
