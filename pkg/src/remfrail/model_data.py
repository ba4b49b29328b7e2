"""Per-event risk sets with stratum labels: the input to all likelihood code.

Ordered dyads are flattened to integer ids ``i * n_actors + j``. For each
event the risk set holds every dyad whose stratum, computed from the
strictly-prior state, equals the event dyad's stratum (Full policy), or the
event dyad plus ``m`` uniformly sampled same-stratum controls (Sampled
policy). Risk sets are stored back to back in a single index array with
per-event offsets, which is what the likelihood kernels consume.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import EventDataError
from .events import EventHistory
from .strata import StratumLabel, StratumTracker, TriadicKind

logger = logging.getLogger(__name__)

#: Above this actor count the default risk policy switches to sampling.
FULL_POLICY_MAX_ACTORS = 120
DEFAULT_SAMPLE_SIZE = 50


@dataclass(frozen=True)
class RiskPolicy:
    """Full risk sets, or nested case-control sampling of ``m`` controls."""

    name: str = "full"
    m: int | None = None
    seed: int | None = None

    @classmethod
    def full(cls) -> "RiskPolicy":
        return cls("full")

    @classmethod
    def sampled(cls, m: int = DEFAULT_SAMPLE_SIZE, seed: int = 0) -> "RiskPolicy":
        if m < 1:
            raise ValueError("sample size m must be >= 1")
        return cls("sampled", m=m, seed=seed)

    @classmethod
    def default_for(cls, n_actors: int) -> "RiskPolicy":
        if n_actors <= FULL_POLICY_MAX_ACTORS:
            return cls.full()
        return cls.sampled()

    def describe(self) -> str:
        if self.name == "full":
            return "full"
        return f"sampled(m={self.m},seed={self.seed})"


@dataclass(frozen=True)
class EventRecord:
    """One event's modelling record, in (sender, receiver) pair form."""

    event_index: int
    time: float
    stratum: StratumLabel
    event_dyad: tuple[int, int]
    risk_set: list[tuple[int, int]]
    covariates: np.ndarray | None


@dataclass
class ModelData:
    """Flattened per-event risk sets plus the design information.

    ``risk_dyads[indptr[e]:indptr[e + 1]]`` are the dyad ids at risk for
    event ``e``; the event's own dyad is always among them. ``pool_sizes``
    holds the full same-stratum pool size at each event time, used to
    rescale Breslow increments under sampled risk sets.
    """

    n_actors: int
    kind: TriadicKind
    risk_policy: RiskPolicy
    times: np.ndarray
    event_dyads: np.ndarray
    event_strata: np.ndarray
    indptr: np.ndarray
    risk_dyads: np.ndarray
    pool_sizes: np.ndarray
    covariates: np.ndarray | None = None
    covariate_names: tuple[str, ...] = ()
    n_singleton_risk_sets: int = 0

    @property
    def n_events(self) -> int:
        return len(self.times)

    @property
    def n_covariates(self) -> int:
        return 0 if self.covariates is None else self.covariates.shape[1]

    @property
    def n_params(self) -> int:
        return self.n_covariates + 2 * self.n_actors

    def risk_set(self, e: int) -> np.ndarray:
        return self.risk_dyads[self.indptr[e]:self.indptr[e + 1]]

    def dyad_pair(self, dyad_id: int) -> tuple[int, int]:
        return divmod(int(dyad_id), self.n_actors)

    def event_senders(self) -> np.ndarray:
        return self.event_dyads // self.n_actors

    def event_receivers(self) -> np.ndarray:
        return self.event_dyads % self.n_actors

    def records(self) -> Iterator[EventRecord]:
        """Materialize per-event records; meant for inspection and tests."""
        for e in range(self.n_events):
            dyads = self.risk_set(e)
            x = None
            if self.covariates is not None:
                x = self.covariates[dyads]
            yield EventRecord(
                event_index=e,
                time=float(self.times[e]),
                stratum=StratumLabel(self.event_strata[e]),
                event_dyad=self.dyad_pair(self.event_dyads[e]),
                risk_set=[self.dyad_pair(d) for d in dyads],
                covariates=x,
            )


def _flatten_covariates(covariates, n_actors: int) -> np.ndarray | None:
    if covariates is None:
        return None
    x = np.asarray(covariates, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.shape[:2] != (n_actors, n_actors):
        raise EventDataError(
            f"covariates must have shape (n_actors, n_actors[, p]); got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise EventDataError("covariates contain non-finite values")
    return np.ascontiguousarray(x.reshape(n_actors * n_actors, -1))


def build_model_data(history: EventHistory, kind: TriadicKind,
                     risk_policy: RiskPolicy | None = None,
                     covariates=None,
                     covariate_names: tuple[str, ...] = ()) -> ModelData:
    """Replay the history once, labelling events and collecting risk sets.

    Parameters
    ----------
    history : EventHistory
        Validated history with strictly increasing times.
    kind : TriadicKind
        Triadic closure pattern defining the stratum scheme.
    risk_policy : RiskPolicy, optional
        Defaults to full risk sets up to 120 actors and to nested
        case-control sampling with 50 controls above.
    covariates : array (n_actors, n_actors[, p]), optional
        Time-constant dyadic covariates.
    """
    n = history.n_actors
    policy = risk_policy or RiskPolicy.default_for(n)
    if policy.name not in ("full", "sampled"):
        raise ValueError(f"unknown risk policy {policy.name!r}")
    rng = np.random.default_rng(policy.seed) if policy.name == "sampled" else None

    tracker = StratumTracker(n, kind)
    n_events = history.n_events
    event_dyads = (history.senders.astype(np.int64) * n
                   + history.receivers).astype(np.int32)
    strata = np.empty(n_events, dtype=np.int8)
    pool_sizes = np.empty(n_events, dtype=np.int64)
    indptr = np.zeros(n_events + 1, dtype=np.int64)
    chunks: list[np.ndarray] = []
    singletons = 0

    for e in range(n_events):
        d = int(event_dyads[e])
        lab = tracker.labels[d]
        strata[e] = lab
        pool = np.flatnonzero(tracker.labels == lab).astype(np.int32)
        pool_sizes[e] = len(pool)
        if len(pool) == 1:
            singletons += 1
        if policy.name == "full":
            risk = pool
        else:
            controls = pool[pool != d]
            m = min(policy.m, len(controls))
            if m > 0:
                chosen = rng.choice(controls, size=m, replace=False)
            else:
                chosen = controls[:0]
            risk = np.sort(np.concatenate([[d], chosen]).astype(np.int32))
        chunks.append(risk)
        indptr[e + 1] = indptr[e] + len(risk)
        tracker.advance(int(history.senders[e]), int(history.receivers[e]),
                        float(history.times[e]))

    if singletons:
        logger.info("%d events had an empty control pool (risk set of size 1)",
                    singletons)

    return ModelData(
        n_actors=n,
        kind=kind,
        risk_policy=policy,
        times=history.times.copy(),
        event_dyads=event_dyads,
        event_strata=strata,
        indptr=indptr,
        risk_dyads=(np.concatenate(chunks) if chunks
                    else np.empty(0, dtype=np.int32)),
        pool_sizes=pool_sizes,
        covariates=_flatten_covariates(covariates, n),
        covariate_names=covariate_names,
        n_singleton_risk_sets=singletons,
    )
