"""One agent's per-round AIMD update with probabilistic back-off.

Suppliers and consumers run the same rule, differing only in parameters:
on a capacity signal the agent backs off (quantity *= beta) with
probability lambda = Gamma * u'(avg) / avg, where avg is its long-term
running average; otherwise it moves additively by +alpha while at or
below its private optimum and by -alpha above it.  Utilities without a
finite optimum always take the increase branch when not backed off.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .utility import UnboundedDerivativeError, UtilitySpec

# Below this running average the back-off probability is defined as 0:
# an agent with no history does not back off (avoids 0/0 at cold start).
EPS_AVG = 1e-9


class Role(str, Enum):
    SUPPLIER = "supplier"
    CONSUMER = "consumer"


class Branch(str, Enum):
    MULTIPLICATIVE_DECREASE = "multiplicative_decrease"
    ADDITIVE_INCREASE = "additive_increase"
    ADDITIVE_DECREASE = "additive_decrease"


@dataclass(frozen=True)
class RoleParams:
    """AIMD constants for one side of the market.

    alpha: additive step (> 0).
    beta: multiplicative back-off factor in (0, 1).
    gamma: network constant scaling the back-off probability (>= 0).
    """

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")


@dataclass(frozen=True)
class AgentState:
    """Snapshot of one agent after round ``rounds_elapsed``.

    ``running_average`` is the arithmetic mean of the agent's quantities
    over rounds 0..rounds_elapsed (rounds_elapsed + 1 samples).
    """

    agent_id: str
    role: Role
    quantity: float
    running_average: float
    rounds_elapsed: int
    utility: UtilitySpec


@dataclass(frozen=True)
class AgentStepTrace:
    """What one step did: the back-off probability used (0 when the agent
    received no signal), the realized Bernoulli bit, and the branch taken."""

    backoff_probability: float
    bernoulli: int
    branch: Branch


def update_running_average(prev_average: float, prev_rounds: int, new_quantity: float) -> float:
    """Extend a running mean of ``prev_rounds`` samples by one more sample."""
    return (prev_average * prev_rounds + new_quantity) / (prev_rounds + 1)


def compute_backoff_probability(state: AgentState, params: RoleParams) -> float:
    """Back-off probability lambda = Gamma * u'(avg) / avg, clamped to [0, 1].

    Negative raw values (past the optimum) map to 0; an unbounded
    derivative maps to 1; a near-zero average maps to 0.
    """
    avg = state.running_average
    if avg < EPS_AVG:
        return 0.0
    try:
        marginal = state.utility.derivative(avg)
    except UnboundedDerivativeError:
        return 1.0
    raw = params.gamma * marginal / avg
    return min(max(raw, 0.0), 1.0)


def _move(quantity: float, utility: UtilitySpec, params: RoleParams) -> tuple[float, Branch]:
    # Additive branch of the update: the optimum comparison uses the
    # current quantity, not the running average.
    optimum = utility.argmax()
    if optimum is None or quantity <= optimum:
        return quantity + params.alpha, Branch.ADDITIVE_INCREASE
    return max(0.0, quantity - params.alpha), Branch.ADDITIVE_DECREASE


def initial_state(
    agent_id: str,
    role: Role,
    utility: UtilitySpec,
    initial_quantity: float,
    params: RoleParams,
) -> tuple[AgentState, AgentStepTrace]:
    """Round-0 state: the update body runs once with no signal (b = 0).

    With the default initial quantity of 0 this is a single forced
    additive increase, so every agent starts round 1 with a positive
    quantity and running average.
    """
    if initial_quantity < 0:
        raise ValueError("initial quantity must be nonnegative")
    quantity, branch = _move(initial_quantity, utility, params)
    state = AgentState(
        agent_id=agent_id,
        role=role,
        quantity=quantity,
        running_average=quantity,
        rounds_elapsed=0,
        utility=utility,
    )
    return state, AgentStepTrace(0.0, 0, branch)


def step(
    state: AgentState,
    signal: int,
    params: RoleParams,
    draw: float,
) -> tuple[AgentState, AgentStepTrace]:
    """Advance one agent by one round.

    ``draw`` is a uniform variate in [0, 1) deciding the Bernoulli trial;
    the step is a pure function of its inputs, so identical inputs give
    identical outputs regardless of scheduling.
    """
    lam = 0.0
    bernoulli = 0
    if signal:
        lam = compute_backoff_probability(state, params)
        if draw < lam:
            bernoulli = 1

    if bernoulli:
        quantity = state.quantity * params.beta
        branch = Branch.MULTIPLICATIVE_DECREASE
    else:
        quantity, branch = _move(state.quantity, state.utility, params)

    samples = state.rounds_elapsed + 1
    new_state = AgentState(
        agent_id=state.agent_id,
        role=state.role,
        quantity=quantity,
        running_average=update_running_average(state.running_average, samples, quantity),
        rounds_elapsed=state.rounds_elapsed + 1,
        utility=state.utility,
    )
    return new_state, AgentStepTrace(lam, bernoulli, branch)
