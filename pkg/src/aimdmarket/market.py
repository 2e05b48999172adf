"""The market center: per-round aggregation, capacity signals, advancement.

Each round the center compares last round's total supply with total
consumption and broadcasts at most one one-bit signal: the supplier side
is signaled on excess supply, the consumer side on excess consumption,
nobody on an exact tie.  All agents then step synchronously.  Randomness
is organized as one independent stream per agent with one uniform draw
per round, so results do not depend on any execution schedule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agent import AgentState, Role, RoleParams, initial_state, step
from .metrics import AgentRoundEntry, RoundRecord, RunSummary, mean_derivative_series, summarize
from .scenario import MarketConfig, ScenarioSpec, validate_config, validate_scenario


@dataclass(frozen=True)
class CapacitySignals:
    """The two one-bit broadcasts; never both set in the same round."""

    supplier_signal: int
    consumer_signal: int


@dataclass(frozen=True)
class MarketState:
    suppliers: tuple[AgentState, ...]
    consumers: tuple[AgentState, ...]
    round: int
    last_total_supply: float
    last_total_consumption: float


@dataclass(frozen=True)
class RunResult:
    """Full trajectory (rounds 1..horizon), its summary, and the round-0
    initialization snapshot (useful as the t=0 reference point)."""

    records: list[RoundRecord]
    summary: RunSummary
    initial_record: RoundRecord


def compute_signals(
    total_supply: float,
    total_consumption: float,
    flip_semantics: bool = False,
) -> CapacitySignals:
    """Signal the side that was in excess last round; neither on a tie.

    ``flip_semantics`` selects the inverted variant (supplier signal on
    excess consumption and vice versa) for comparison studies.
    """
    if total_supply < 0 or total_consumption < 0:
        raise ValueError("totals must be nonnegative")
    s = 1 if total_supply > total_consumption else 0
    c = 1 if total_consumption > total_supply else 0
    if flip_semantics:
        s, c = c, s
    return CapacitySignals(s, c)


def _round_record(
    round_index: int,
    suppliers: tuple[AgentState, ...],
    consumers: tuple[AgentState, ...],
    traces: list,
    signals: CapacitySignals,
    total_supply: float,
    total_consumption: float,
) -> RoundRecord:
    entries = []
    sum_of_utilities = 0.0
    for state, trace in zip(list(suppliers) + list(consumers), traces):
        value = state.utility.evaluate(state.running_average)
        derivative = state.utility.derivative(state.running_average)
        sum_of_utilities += value
        entries.append(
            AgentRoundEntry(
                agent_id=state.agent_id,
                role=state.role,
                quantity=state.quantity,
                running_average=state.running_average,
                utility_value=value,
                utility_derivative=derivative,
                trace=trace,
            )
        )
    return RoundRecord(
        round=round_index,
        per_agent=tuple(entries),
        total_supply=total_supply,
        total_consumption=total_consumption,
        signals=signals,
        sum_of_utilities=sum_of_utilities,
    )


def initialize_market(config: MarketConfig, scenario: ScenarioSpec) -> tuple[MarketState, RoundRecord]:
    """Round 0: agents take one signal-free step from the configured
    initial quantity; no signals exist yet."""
    suppliers, supplier_traces = [], []
    for i, utility in enumerate(scenario.supplier_utilities):
        state, trace = initial_state(
            f"s{i}", Role.SUPPLIER, utility, config.initial_quantity, config.supplier_params
        )
        suppliers.append(state)
        supplier_traces.append(trace)
    consumers, consumer_traces = [], []
    for j, utility in enumerate(scenario.consumer_utilities):
        state, trace = initial_state(
            f"c{j}", Role.CONSUMER, utility, config.initial_quantity, config.consumer_params
        )
        consumers.append(state)
        consumer_traces.append(trace)

    total_supply = sum(a.quantity for a in suppliers)
    total_consumption = sum(a.quantity for a in consumers)
    state = MarketState(
        suppliers=tuple(suppliers),
        consumers=tuple(consumers),
        round=0,
        last_total_supply=total_supply,
        last_total_consumption=total_consumption,
    )
    record = _round_record(
        0,
        state.suppliers,
        state.consumers,
        supplier_traces + consumer_traces,
        CapacitySignals(0, 0),
        total_supply,
        total_consumption,
    )
    return state, record


def advance_round(
    state: MarketState,
    supplier_params: RoleParams,
    consumer_params: RoleParams,
    supplier_draws,
    consumer_draws,
    flip_semantics: bool = False,
) -> tuple[MarketState, RoundRecord]:
    """One transition of the market chain.

    Signals are computed from last round's totals, every agent steps with
    its side's signal and its own uniform draw, and the new totals are
    recorded.  Deterministic given (state, params, draws).
    """
    signals = compute_signals(state.last_total_supply, state.last_total_consumption, flip_semantics)

    suppliers, traces = [], []
    for agent, draw in zip(state.suppliers, supplier_draws):
        new_agent, trace = step(agent, signals.supplier_signal, supplier_params, draw)
        suppliers.append(new_agent)
        traces.append(trace)
    consumers = []
    for agent, draw in zip(state.consumers, consumer_draws):
        new_agent, trace = step(agent, signals.consumer_signal, consumer_params, draw)
        consumers.append(new_agent)
        traces.append(trace)

    total_supply = sum(a.quantity for a in suppliers)
    total_consumption = sum(a.quantity for a in consumers)
    new_state = MarketState(
        suppliers=tuple(suppliers),
        consumers=tuple(consumers),
        round=state.round + 1,
        last_total_supply=total_supply,
        last_total_consumption=total_consumption,
    )
    record = _round_record(
        new_state.round, new_state.suppliers, new_state.consumers, traces, signals, total_supply, total_consumption
    )
    return new_state, record


def agent_rng_streams(seed: int, num_suppliers: int, num_consumers: int):
    """One PCG64 stream per agent, keyed on (seed, role, index).

    Each stream is consumed at exactly one draw per round, so the round-t
    variate of an agent is fixed by the seed alone.
    """
    suppliers = [
        np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0, i)))
        for i in range(num_suppliers)
    ]
    consumers = [
        np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1, j)))
        for j in range(num_consumers)
    ]
    return suppliers, consumers


def run(
    config: MarketConfig,
    scenario: ScenarioSpec,
    *,
    flip_signal_semantics: bool = False,
) -> RunResult:
    """Initialize agents, advance ``horizon`` rounds, return the trajectory.

    Invalid configs or scenarios are rejected before any round executes.
    """
    violations = validate_config(config) + validate_scenario(scenario, config)
    if violations:
        raise ValueError("invalid run inputs: " + "; ".join(violations))

    state, initial_record = initialize_market(config, scenario)
    supplier_rngs, consumer_rngs = agent_rng_streams(
        config.seed, config.num_suppliers, config.num_consumers
    )

    records: list[RoundRecord] = []
    for _ in range(config.horizon):
        supplier_draws = [rng.random() for rng in supplier_rngs]
        consumer_draws = [rng.random() for rng in consumer_rngs]
        state, record = advance_round(
            state,
            config.supplier_params,
            config.consumer_params,
            supplier_draws,
            consumer_draws,
            flip_signal_semantics,
        )
        records.append(record)

    summary = summarize(records if records else [initial_record], scenario)
    return RunResult(records=records, summary=summary, initial_record=initial_record)


def replicate_series(
    config: MarketConfig,
    scenario: ScenarioSpec,
    replicates: int,
    *,
    flip_signal_semantics: bool = False,
    role: Role = Role.SUPPLIER,
) -> tuple[list[list[float]], list[RunSummary]]:
    """Run ``replicates`` seeds (seed+0..R-1) against one fixed scenario.

    Returns the per-replicate mean utility-derivative series for ``role``
    plus each run's summary.  Replicate k depends only on (config, k), so
    execution order cannot change any result.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    series, summaries = [], []
    for k in range(replicates):
        result = run(
            config.with_overrides(seed=config.seed + k),
            scenario,
            flip_signal_semantics=flip_signal_semantics,
        )
        series.append(mean_derivative_series(result.records, role))
        summaries.append(result.summary)
    return series, summaries
