"""Dyadic and triadic indicator statistics and time-varying stratum labels.

Every ordered dyad carries one of four labels at any time: spontaneous,
reciprocal, triadic, or reciprocal+triadic. Labels depend only on whether
certain arcs exist strictly before the query time, so they are permanent
once earned and only move up the partial order

    spontaneous -> {reciprocal, triadic} -> reciprocal+triadic.

An event at time t is judged against the state of all events with time
strictly below t; the event never witnesses its own stratum.
"""

from __future__ import annotations

import io
from bisect import bisect_left
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import TextIO

import numpy as np

from .errors import EventDataError
from .events import EventHistory, NetworkState


class TriadicKind(str, Enum):
    """The single triadic closure pattern a model fit conditions on."""

    CYCLIC = "cyclic"
    TRANSITIVE = "transitive"
    SENDING_BALANCE = "sending_balance"
    RECEIVING_BALANCE = "receiving_balance"

    @classmethod
    def parse(cls, text: str) -> "TriadicKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            options = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown triadic kind {text!r}; expected one of {options}") from None


class StratumLabel(IntEnum):
    SPONTANEOUS = 0
    RECIPROCAL = 1
    TRIADIC = 2
    RECIPROCAL_TRIADIC = 3

    @property
    def tag(self) -> str:
        return _LABEL_TAGS[self]

    @classmethod
    def from_tag(cls, tag: str) -> "StratumLabel":
        for label, t in _LABEL_TAGS.items():
            if t == tag:
                return label
        raise ValueError(f"unknown stratum tag {tag!r}")


_LABEL_TAGS = {
    StratumLabel.SPONTANEOUS: "spontaneous",
    StratumLabel.RECIPROCAL: "reciprocal",
    StratumLabel.TRIADIC: "triadic",
    StratumLabel.RECIPROCAL_TRIADIC: "reciprocal_triadic",
}

#: Label moves permitted as history grows (plus staying put).
ALLOWED_UPGRADES = {
    (StratumLabel.SPONTANEOUS, StratumLabel.RECIPROCAL),
    (StratumLabel.SPONTANEOUS, StratumLabel.TRIADIC),
    (StratumLabel.SPONTANEOUS, StratumLabel.RECIPROCAL_TRIADIC),
    (StratumLabel.RECIPROCAL, StratumLabel.RECIPROCAL_TRIADIC),
    (StratumLabel.TRIADIC, StratumLabel.RECIPROCAL_TRIADIC),
}


def label_from_flags(reciprocal: bool, triadic: bool) -> StratumLabel:
    if reciprocal and triadic:
        return StratumLabel.RECIPROCAL_TRIADIC
    if reciprocal:
        return StratumLabel.RECIPROCAL
    if triadic:
        return StratumLabel.TRIADIC
    return StratumLabel.SPONTANEOUS


def _check_dyad(i: int, j: int) -> None:
    if i == j:
        raise EventDataError(f"self-dyad ({i}, {j}) has no stratum")


def has_reciprocal(state: NetworkState, i: int, j: int) -> bool:
    """True when a ``j -> i`` event occurred strictly before now."""
    _check_dyad(i, j)
    return bool(state.counts[j, i] > 0)


def has_triad(kind: TriadicKind, state: NetworkState, i: int, j: int) -> bool:
    """True when some third actor k completes ``kind`` for candidate ``i -> j``.

    With prior arcs written ``a -> b``, the patterns are:

    ==================  =======================================
    cyclic              exists k with  j -> k  and  k -> i
    transitive          exists k with  i -> k  and  k -> j
    sending_balance     exists k with  i -> k  and  j -> k
    receiving_balance   exists k with  k -> i  and  k -> j
    ==================  =======================================

    k ranges over actors other than i and j.
    """
    _check_dyad(i, j)
    if kind is TriadicKind.CYCLIC:
        common = state.out_neighbors[j] & state.in_neighbors[i]
    elif kind is TriadicKind.TRANSITIVE:
        common = state.out_neighbors[i] & state.in_neighbors[j]
    elif kind is TriadicKind.SENDING_BALANCE:
        common = state.out_neighbors[i] & state.out_neighbors[j]
    elif kind is TriadicKind.RECEIVING_BALANCE:
        common = state.in_neighbors[i] & state.in_neighbors[j]
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown kind {kind!r}")
    return any(k != i and k != j for k in common)


def stratum_of(state: NetworkState, i: int, j: int, kind: TriadicKind) -> StratumLabel:
    """Current stratum label of the ordered dyad ``(i, j)``."""
    return label_from_flags(has_reciprocal(state, i, j), has_triad(kind, state, i, j))


@dataclass
class StratumTimeline:
    """Transition list ``(time, label)`` for one ordered dyad.

    The label recorded at time t applies to query times strictly greater
    than t, matching the strictly-prior semantics of event strata.
    """

    dyad: tuple[int, int]
    times: list[float]
    labels: list[StratumLabel]

    @property
    def transitions(self) -> list[tuple[float, StratumLabel]]:
        return list(zip(self.times, self.labels))

    def label_at(self, t: float) -> StratumLabel:
        """Label in force for an event occurring at time ``t``."""
        k = bisect_left(self.times, t)
        if k == 0:
            return StratumLabel.SPONTANEOUS
        return self.labels[k - 1]


class StratumTracker:
    """Incrementally maintained stratum labels for all ordered dyads.

    Feed events in time order through `advance`; it applies the event to
    the underlying `NetworkState` and returns the dyads whose label rose,
    found by joining the new arc against the neighbour indexes instead of
    rescanning all O(n^2) dyads.

    ``labels`` is a flat ``n*n`` int8 array indexed by ``i * n + j``; the
    diagonal holds -1 so it never matches a real label.
    """

    def __init__(self, n_actors: int, kind: TriadicKind):
        self.kind = kind
        self.state = NetworkState(n_actors)
        self.labels = np.zeros(n_actors * n_actors, dtype=np.int8)
        self.labels[:: n_actors + 1] = -1

    @property
    def n_actors(self) -> int:
        return self.state.n_actors

    def _candidates(self, s: int, r: int) -> set[tuple[int, int]]:
        """Dyads whose label can change when arc ``s -> r`` first appears."""
        out_nb, in_nb = self.state.out_neighbors, self.state.in_neighbors
        cand: set[tuple[int, int]] = {(r, s)}
        if self.kind is TriadicKind.TRANSITIVE:
            cand.update((s, y) for y in out_nb[r])
            cand.update((x, r) for x in in_nb[s])
        elif self.kind is TriadicKind.CYCLIC:
            cand.update((y, s) for y in out_nb[r])
            cand.update((r, x) for x in in_nb[s])
        elif self.kind is TriadicKind.SENDING_BALANCE:
            cand.update((s, x) for x in in_nb[r])
            cand.update((x, s) for x in in_nb[r])
        else:
            cand.update((r, y) for y in out_nb[s])
            cand.update((y, r) for y in out_nb[s])
        return cand

    def advance(self, sender: int, receiver: int, time: float,
                ) -> list[tuple[int, StratumLabel]]:
        """Apply one event; return ``(dyad_id, new_label)`` upgrades it caused."""
        new_arc = self.state.apply(sender, receiver, time)
        if not new_arc:
            return []
        n = self.n_actors
        upgrades: list[tuple[int, StratumLabel]] = []
        for f, t in self._candidates(sender, receiver):
            if f == t:
                continue
            d = f * n + t
            old = StratumLabel(self.labels[d])
            new = stratum_of(self.state, f, t, self.kind)
            if new != old:
                if (old, new) not in ALLOWED_UPGRADES:  # pragma: no cover
                    raise AssertionError(f"label moved down the partial order: {old} -> {new}")
                self.labels[d] = int(new)
                upgrades.append((d, new))
        return upgrades


def build_timelines(history: EventHistory, kind: TriadicKind,
                    ) -> dict[tuple[int, int], StratumTimeline]:
    """Stratum timeline for every ordered dyad of the history's actor set.

    Single pass over the history; the result agrees with `stratum_of`
    recomputed from scratch at every event time. Untouched dyads keep the
    single transition ``(0, spontaneous)``.
    """
    n = history.n_actors
    times: dict[int, list[float]] = {}
    labels: dict[int, list[StratumLabel]] = {}
    tracker = StratumTracker(n, kind)
    for k in range(history.n_events):
        t = float(history.times[k])
        for d, new in tracker.advance(int(history.senders[k]),
                                      int(history.receivers[k]), t):
            ts = times.setdefault(d, [0.0])
            ls = labels.setdefault(d, [StratumLabel.SPONTANEOUS])
            if ts[-1] == t:
                # Only possible for an event at exactly t=0 upgrading the
                # initial entry; coalesce rather than duplicate the knot.
                ls[-1] = new
            else:
                ts.append(t)
                ls.append(new)

    out: dict[tuple[int, int], StratumTimeline] = {}
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d = i * n + j
            out[(i, j)] = StratumTimeline(
                (i, j),
                times.get(d, [0.0]),
                labels.get(d, [StratumLabel.SPONTANEOUS]),
            )
    return out


def timelines_to_csv(timelines: dict[tuple[int, int], StratumTimeline],
                     stream: TextIO | None = None,
                     symbols=None) -> str | None:
    """Export timelines as CSV ``from,to,time,label`` (debug/analysis aid)."""
    out = stream if stream is not None else io.StringIO()
    out.write("from,to,time,label\n")
    for (i, j) in sorted(timelines):
        tl = timelines[(i, j)]
        src = symbols.label_of(i) if symbols is not None else i
        dst = symbols.label_of(j) if symbols is not None else j
        for t, lab in zip(tl.times, tl.labels):
            out.write(f"{src},{dst},{t!r},{lab.tag}\n")
    if stream is None:
        return out.getvalue()
    return None
