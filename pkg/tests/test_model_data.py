import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from remfrail.events import build_history
from remfrail.model_data import (FULL_POLICY_MAX_ACTORS, RiskPolicy,
                                 build_model_data)
from remfrail.simulate import SimulationConfig, simulate
from remfrail.strata import StratumLabel, TriadicKind, build_timelines

from oracles import random_history


class TestTwoActorExample:
    """Hand-enumerated risk sets for the minimal reciprocal history."""

    def setup_method(self):
        history = build_history([0, 1], [1, 0], [1.0, 2.0], 2)
        self.data = build_model_data(history, TriadicKind.TRANSITIVE)

    def test_event_one_spontaneous_full_risk_set(self):
        records = list(self.data.records())
        assert records[0].stratum is StratumLabel.SPONTANEOUS
        assert set(records[0].risk_set) == {(0, 1), (1, 0)}

    def test_event_two_reciprocal_singleton(self):
        records = list(self.data.records())
        assert records[1].stratum is StratumLabel.RECIPROCAL
        assert records[1].risk_set == [(1, 0)]
        assert self.data.n_singleton_risk_sets == 1

    def test_event_dyad_in_own_risk_set(self):
        for record in self.data.records():
            assert record.event_dyad in record.risk_set


class TestPolicies:
    def test_full_risk_set_bound(self):
        config = SimulationConfig(20, 300, 0.5, 0.5, seed=1)
        history, _ = simulate(config)
        data = build_model_data(history, TriadicKind.TRANSITIVE,
                                RiskPolicy.full())
        sizes = np.diff(data.indptr)
        assert sizes.max() <= 20 * 19
        assert np.array_equal(sizes, data.pool_sizes)

    def test_sampled_risk_set_bound(self):
        config = SimulationConfig(20, 300, 0.5, 0.5, seed=1)
        history, _ = simulate(config)
        data = build_model_data(history, TriadicKind.TRANSITIVE,
                                RiskPolicy.sampled(5, seed=3))
        sizes = np.diff(data.indptr)
        assert sizes.max() <= 6
        assert np.all(data.pool_sizes >= sizes)

    def test_sampled_with_huge_m_equals_full(self):
        config = SimulationConfig(10, 200, 0.7, 0.7, seed=2)
        history, _ = simulate(config)
        full = build_model_data(history, TriadicKind.CYCLIC, RiskPolicy.full())
        sampled = build_model_data(history, TriadicKind.CYCLIC,
                                   RiskPolicy.sampled(10 * 9, seed=0))
        assert np.array_equal(np.sort(full.risk_dyads[full.indptr[0]:full.indptr[1]]),
                              sampled.risk_dyads[sampled.indptr[0]:sampled.indptr[1]])
        for e in range(full.n_events):
            assert np.array_equal(np.sort(full.risk_set(e)),
                                  np.sort(sampled.risk_set(e)))

    def test_sampled_deterministic_by_seed(self):
        config = SimulationConfig(15, 150, 0.7, 0.7, seed=2)
        history, _ = simulate(config)
        a = build_model_data(history, TriadicKind.TRANSITIVE,
                             RiskPolicy.sampled(4, seed=9))
        b = build_model_data(history, TriadicKind.TRANSITIVE,
                             RiskPolicy.sampled(4, seed=9))
        assert np.array_equal(a.risk_dyads, b.risk_dyads)

    def test_default_policy_switch(self):
        assert RiskPolicy.default_for(FULL_POLICY_MAX_ACTORS).name == "full"
        assert RiskPolicy.default_for(FULL_POLICY_MAX_ACTORS + 1).name == "sampled"


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10_000),
       st.sampled_from(list(TriadicKind)))
def test_risk_sets_agree_with_timelines(seed, kind):
    """Every risk-set member's timeline label equals the record's stratum."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    history = random_history(rng, n, int(rng.integers(2, 50)))
    data = build_model_data(history, kind, RiskPolicy.full())
    timelines = build_timelines(history, kind)
    for record in data.records():
        t = record.time
        assert timelines[record.event_dyad].label_at(t) is record.stratum
        for dyad in record.risk_set:
            assert timelines[dyad].label_at(t) is record.stratum
        # and the risk set is exactly the same-stratum pool
        pool = {d for d, tl in timelines.items()
                if tl.label_at(t) is record.stratum}
        assert set(record.risk_set) == pool
        assert len(set(record.risk_set)) == len(record.risk_set)


def test_covariates_flattened_and_validated():
    history = build_history([0, 1], [1, 0], [1.0, 2.0], 2)
    x = np.arange(4.0).reshape(2, 2)
    data = build_model_data(history, TriadicKind.TRANSITIVE, covariates=x)
    assert data.covariates.shape == (4, 1)
    assert data.n_covariates == 1
    rec = next(iter(data.records()))
    assert rec.covariates.shape == (2, 1)

    with pytest.raises(Exception, match="shape"):
        build_model_data(history, TriadicKind.TRANSITIVE,
                         covariates=np.ones((3, 3)))
