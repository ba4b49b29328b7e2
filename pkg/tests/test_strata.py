import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from remfrail.errors import EventDataError
from remfrail.events import NetworkState, build_history
from remfrail.strata import (ALLOWED_UPGRADES, StratumLabel, TriadicKind,
                             build_timelines, has_reciprocal, has_triad,
                             stratum_of, timelines_to_csv)

from oracles import (arcs_before, brute_force_stratum, brute_force_triad,
                     random_history, scratch_labels_at_event)

KINDS = list(TriadicKind)


def history_from_arcs(arcs, n_actors):
    senders, receivers = zip(*arcs)
    times = np.arange(1.0, len(arcs) + 1.0)
    return build_history(senders, receivers, times, n_actors)


class TestReciprocal:
    def test_empty_state(self):
        assert not has_reciprocal(NetworkState(3), 1, 2)

    def test_definitional(self):
        state = NetworkState(3)
        state.apply(2, 1, 0.5)
        assert has_reciprocal(state, 1, 2)

    def test_own_past_sends_do_not_reciprocate(self):
        state = NetworkState(3)
        state.apply(1, 2, 0.5)
        assert not has_reciprocal(state, 1, 2)

    def test_self_dyad_rejected(self):
        with pytest.raises(EventDataError):
            has_reciprocal(NetworkState(3), 1, 1)


class TestTriadExamples:
    """Fixed examples, each checked against the brute-force oracle too."""

    def check(self, arcs, kind, i, j, n=4):
        state = NetworkState.replay(history_from_arcs(arcs, n))
        got = has_triad(kind, state, i, j)
        assert got == brute_force_triad(set(arcs), kind, i, j, n)
        return got

    def test_transitive_via_middleman(self):
        assert self.check([(1, 3), (3, 2)], TriadicKind.TRANSITIVE, 1, 2)

    def test_cyclic_needs_reverse_path(self):
        assert not self.check([(1, 3), (3, 2)], TriadicKind.CYCLIC, 1, 2)
        assert self.check([(1, 3), (3, 2)], TriadicKind.CYCLIC, 2, 1)

    def test_shared_target_is_sending_balance(self):
        assert self.check([(1, 3), (2, 3)], TriadicKind.SENDING_BALANCE, 1, 2)
        assert not self.check([(1, 3), (2, 3)], TriadicKind.RECEIVING_BALANCE, 1, 2)

    def test_prior_candidate_arc_is_not_a_witness(self):
        # the candidate dyad's own earlier arc provides no third party
        assert not self.check([(1, 2)], TriadicKind.TRANSITIVE, 1, 2)
        assert not self.check([(1, 2)], TriadicKind.SENDING_BALANCE, 1, 2)

    def test_self_dyad_rejected(self):
        with pytest.raises(EventDataError):
            has_triad(TriadicKind.CYCLIC, NetworkState(3), 2, 2)


class TestStratumOf:
    def test_empty_state_spontaneous(self):
        assert stratum_of(NetworkState(3), 1, 2,
                          TriadicKind.TRANSITIVE) is StratumLabel.SPONTANEOUS

    def test_both_conditions_give_rt(self):
        state = NetworkState.replay(history_from_arcs([(2, 1), (1, 3), (3, 2)], 4))
        assert stratum_of(state, 1, 2, TriadicKind.TRANSITIVE) is \
            StratumLabel.RECIPROCAL_TRIADIC

    def test_triadic_only(self):
        state = NetworkState.replay(history_from_arcs([(1, 3), (3, 2)], 4))
        assert stratum_of(state, 1, 2, TriadicKind.TRANSITIVE) is StratumLabel.TRIADIC


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10_000),
       st.sampled_from(KINDS))
def test_indicator_oracle_equivalence(seed, kind):
    """has_triad equals exhaustive enumeration on every prefix and dyad."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 13))
    history = random_history(rng, n, int(rng.integers(1, 61)))
    probe = rng.integers(0, history.n_events, size=min(6, history.n_events))
    state = NetworkState(n)
    k = 0
    for stop in sorted(set(int(q) for q in probe)):
        while k < stop:
            state.apply(int(history.senders[k]), int(history.receivers[k]),
                        float(history.times[k]))
            k += 1
        arcs = arcs_before(history, stop)
        for i in range(n):
            for j in range(n):
                if i != j:
                    assert has_triad(kind, state, i, j) == \
                        brute_force_triad(arcs, kind, i, j, n)


class TestTimelines:
    def test_single_event_reciprocal_transition(self):
        history = build_history([1], [2], [1.0], 3)
        timelines = build_timelines(history, TriadicKind.TRANSITIVE)
        assert timelines[(2, 1)].transitions == [
            (0.0, StratumLabel.SPONTANEOUS), (1.0, StratumLabel.RECIPROCAL)]

    def test_untouched_dyad_single_transition(self):
        history = build_history([1], [2], [1.0], 4)
        timelines = build_timelines(history, TriadicKind.TRANSITIVE)
        assert timelines[(0, 3)].transitions == [(0.0, StratumLabel.SPONTANEOUS)]

    def test_label_at_is_strictly_prior(self):
        history = build_history([1], [2], [1.0], 3)
        timelines = build_timelines(history, TriadicKind.TRANSITIVE)
        tl = timelines[(2, 1)]
        assert tl.label_at(1.0) is StratumLabel.SPONTANEOUS
        assert tl.label_at(1.0 + 1e-9) is StratumLabel.RECIPROCAL

    def test_event_at_time_zero_coalesces(self):
        history = build_history([1, 2], [2, 1], [0.0, 1.0], 3)
        timelines = build_timelines(history, TriadicKind.TRANSITIVE)
        tl = timelines[(2, 1)]
        assert tl.times == [0.0]
        assert tl.labels == [StratumLabel.RECIPROCAL]
        assert np.all(np.diff(tl.times) > 0) if len(tl.times) > 1 else True

    def test_csv_export_shape(self):
        history = build_history([1], [2], [1.0], 3)
        timelines = build_timelines(history, TriadicKind.TRANSITIVE)
        text = timelines_to_csv(timelines)
        lines = text.strip().split("\n")
        assert lines[0] == "from,to,time,label"
        assert len(lines) == 1 + sum(len(t.times) for t in timelines.values())


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.sampled_from(KINDS))
def test_timelines_match_scratch_recomputation(seed, kind):
    """Incremental timelines equal from-scratch labels at every event time."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 10))
    history = random_history(rng, n, int(rng.integers(1, 45)))
    timelines = build_timelines(history, kind)
    for k in range(history.n_events):
        expected = scratch_labels_at_event(history, kind, k)
        t = float(history.times[k])
        for dyad, label in expected.items():
            assert timelines[dyad].label_at(t) is label, (dyad, k)
    # and after the full history
    final = scratch_labels_at_event(history, kind, history.n_events)
    t_end = float(history.times[-1]) + 1.0
    for dyad, label in final.items():
        assert timelines[dyad].label_at(t_end) is label


def test_large_history_timeline_probes_match_scratch():
    """Simulation-study scale: 200 random (dyad, time) probes against a
    from-scratch recomputation of the label at that time."""
    from remfrail.simulate import SimulationConfig, simulate

    config = SimulationConfig(100, 10_000, 0.9, 1.3, seed=33)
    history, _ = simulate(config)
    kind = TriadicKind.TRANSITIVE
    timelines = build_timelines(history, kind)

    rng = np.random.default_rng(8)
    probe_events = np.sort(rng.integers(0, history.n_events, size=200))
    arcs = set()
    k = 0
    for e in probe_events:
        while k < e:
            arcs.add((int(history.senders[k]), int(history.receivers[k])))
            k += 1
        i = int(rng.integers(100))
        j = int(rng.integers(99))
        j = j if j < i else j + 1
        t = float(history.times[e])
        expected = brute_force_stratum(arcs, kind, i, j, 100)
        assert timelines[(i, j)].label_at(t) is expected


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.sampled_from(KINDS))
def test_timeline_monotonicity(seed, kind):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 10))
    history = random_history(rng, n, int(rng.integers(1, 60)))
    for tl in build_timelines(history, kind).values():
        assert np.all(np.diff(tl.times) > 0)
        for old, new in zip(tl.labels, tl.labels[1:]):
            assert (old, new) in ALLOWED_UPGRADES


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.sampled_from(KINDS))
def test_relabeling_equivariance(seed, kind):
    """Permuting actor ids permutes the timeline map exactly."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    history = random_history(rng, n, int(rng.integers(1, 40)))
    perm = rng.permutation(n)
    permuted = build_history(perm[history.senders], perm[history.receivers],
                             history.times, n)
    base = build_timelines(history, kind)
    mapped = build_timelines(permuted, kind)
    for (i, j), tl in base.items():
        other = mapped[(int(perm[i]), int(perm[j]))]
        assert other.times == tl.times
        assert other.labels == tl.labels
