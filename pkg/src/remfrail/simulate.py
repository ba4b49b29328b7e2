"""Synthetic relational event histories from the nodal-frailty hazard model.

Rates are constant through time: dyad ``i -> j`` fires at
``baseline_rate * exp(b_exp[i] + b_pop[j])`` with no feedback from past
events, so any reciprocity or triadic structure in the simulated history
arises purely from actor heterogeneity. Waiting times are drawn from the
total-rate exponential clock and the event dyad from the matching
categorical distribution, which is equivalent to competing exponential
clocks per dyad.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .errors import SimulationError
from .events import EventHistory, SymbolTable


@dataclass(frozen=True)
class SimulationConfig:
    n_actors: int
    n_events: int
    sigma_exp: float
    sigma_pop: float
    baseline_rate: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_actors < 2:
            raise SimulationError("need at least two actors")
        if self.n_events < 1:
            raise SimulationError("need at least one event")
        if self.baseline_rate <= 0:
            raise SimulationError("baseline rate must be positive")
        if self.sigma_exp < 0 or self.sigma_pop < 0:
            raise SimulationError("effect standard deviations must be nonnegative")


@dataclass
class FrailtyVector:
    """Per-actor expansiveness and popularity effects on the log-rate scale."""

    b_exp: np.ndarray
    b_pop: np.ndarray

    def __post_init__(self):
        self.b_exp = np.asarray(self.b_exp, dtype=np.float64)
        self.b_pop = np.asarray(self.b_pop, dtype=np.float64)
        if len(self.b_exp) != len(self.b_pop):
            raise SimulationError("effect vectors must have equal length")
        if not (np.all(np.isfinite(self.b_exp)) and np.all(np.isfinite(self.b_pop))):
            raise SimulationError("effect vectors must be finite")

    @property
    def n_actors(self) -> int:
        return len(self.b_exp)

    def to_csv(self, stream: TextIO | None = None, symbols=None) -> str | None:
        out = stream if stream is not None else io.StringIO()
        out.write("actor,b_exp,b_pop\n")
        for i, (be, bp) in enumerate(zip(self.b_exp, self.b_pop)):
            label = symbols.label_of(i) if symbols is not None else i
            out.write(f"{label},{float(be)!r},{float(bp)!r}\n")
        if stream is None:
            return out.getvalue()
        return None


def draw_frailties(config: SimulationConfig,
                   rng: np.random.Generator) -> FrailtyVector:
    """I.i.d. centered normal effects with the configured deviations."""
    return FrailtyVector(
        b_exp=rng.normal(0.0, config.sigma_exp, size=config.n_actors),
        b_pop=rng.normal(0.0, config.sigma_pop, size=config.n_actors),
    )


def dyad_rates(frailties: FrailtyVector, baseline_rate: float) -> np.ndarray:
    """Rate table over ordered dyads; the self-dyad diagonal is zero."""
    rates = baseline_rate * np.exp(np.add.outer(frailties.b_exp,
                                                frailties.b_pop))
    np.fill_diagonal(rates, 0.0)
    if not np.all(np.isfinite(rates)):
        raise SimulationError("non-finite dyad rate (effects too large)")
    return rates


def simulate(config: SimulationConfig,
             rng: np.random.Generator | None = None,
             ) -> tuple[EventHistory, FrailtyVector]:
    """Draw a history of exactly ``n_events`` events plus its ground truth.

    Fully determined by ``(config, seed)``; pass an explicit generator to
    share a stream across calls.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    frailties = draw_frailties(config, rng)
    rates = dyad_rates(frailties, config.baseline_rate)
    flat = rates.ravel()
    total = float(flat.sum())
    if not (np.isfinite(total) and total > 0):
        raise SimulationError("total event rate must be positive and finite")

    waits = rng.exponential(1.0 / total, size=config.n_events)
    while np.any(waits <= 0.0):  # zero-width waits would break strict ordering
        bad = waits <= 0.0
        waits[bad] = rng.exponential(1.0 / total, size=int(bad.sum()))
    times = np.cumsum(waits)

    dyads = rng.choice(len(flat), size=config.n_events, p=flat / total)
    senders, receivers = np.divmod(dyads, config.n_actors)
    history = EventHistory(senders, receivers, times, config.n_actors,
                           SymbolTable.identity(config.n_actors))
    return history, frailties
