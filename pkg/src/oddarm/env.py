"""Rested K-armed Markov environment and observation counters.

Pulling an arm advances only that arm's chain by one step; unobserved
arms stay frozen at their last state. Each arm owns an independent
random substream derived from (seed, arm index), so removing other-arm
pulls from a trajectory never changes a given arm's observations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .markov import (
    InitialDistribution,
    TransitionMatrix,
    make_initial_distribution,
    sample_from_cumulative,
)

MATRIX_DIFF_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ArmConfiguration:
    """Ground truth: odd-arm index plus the odd and common transition laws."""

    num_arms: int
    odd_index: int
    odd_matrix: TransitionMatrix
    common_matrix: TransitionMatrix
    initial: InitialDistribution

    def __post_init__(self):
        if self.num_arms < 3:
            raise ConfigError(f"need at least 3 arms, got {self.num_arms}")
        if not 0 <= self.odd_index < self.num_arms:
            raise ConfigError(f"odd index {self.odd_index} out of range for {self.num_arms} arms")
        if self.odd_matrix.size != self.common_matrix.size:
            raise ConfigError("odd and common matrices must share the state space")
        if np.max(np.abs(self.odd_matrix.rows - self.common_matrix.rows)) <= MATRIX_DIFF_TOL:
            raise ConfigError("odd matrix must differ from the common matrix")
        if self.initial.probs.shape[0] != self.odd_matrix.size:
            raise ConfigError("initial distribution size does not match the state space")

    @property
    def num_states(self) -> int:
        return self.odd_matrix.size


def make_config(num_arms, odd_index, odd_matrix, common_matrix, initial=None) -> ArmConfiguration:
    """Build a configuration; the initial distribution defaults to uniform."""
    size = odd_matrix.size
    if initial is None:
        initial = InitialDistribution(probs=np.full(size, 1.0 / size))
    elif not isinstance(initial, InitialDistribution):
        initial = make_initial_distribution(initial)
    return ArmConfiguration(
        num_arms=num_arms,
        odd_index=odd_index,
        odd_matrix=odd_matrix,
        common_matrix=common_matrix,
        initial=initial,
    )


class EnvState:
    """Mutable state of one trial's environment.

    Owned by a single trial worker; distinct trials use disjoint states
    and seeds.
    """

    def __init__(self, config: ArmConfiguration, seed: int):
        self.config = config
        self.seed = int(seed)
        K = config.num_arms
        self.last_state = np.full(K, -1, dtype=np.int64)
        self.pull_counts = np.zeros(K, dtype=np.int64)
        self.step_index = -1
        self._arm_rngs = [
            np.random.Generator(np.random.PCG64(np.random.SeedSequence((self.seed, a))))
            for a in range(K)
        ]
        # cumulative rows cached once; sampling consumes one uniform per pull
        self._cum_odd = np.cumsum(config.odd_matrix.rows, axis=1)
        self._cum_common = np.cumsum(config.common_matrix.rows, axis=1)
        self._cum_initial = np.cumsum(config.initial.probs)

    def policy_seed_sequences(self):
        """Seed sequences reserved for the policy layer (exploration, selection).

        Arm substreams use spawn keys (seed, 0..K-1); the two policy streams
        use (seed, K) and (seed, K+1) so they are independent of observation
        randomness.
        """
        K = self.config.num_arms
        return (
            np.random.SeedSequence((self.seed, K)),
            np.random.SeedSequence((self.seed, K + 1)),
        )


def create_env(config: ArmConfiguration, seed: int) -> EnvState:
    """Fresh environment: no arm observed yet, all counters zero."""
    return EnvState(config, seed)


def pull(env: EnvState, arm: int) -> int:
    """Observe the given arm once and return its new state.

    The first pull of an arm draws its initial state (no transition is
    implied); later pulls advance the arm one step under its true law.
    Other arms stay frozen.
    """
    rng = env._arm_rngs[arm]
    prev = env.last_state[arm]
    if prev < 0:
        state = sample_from_cumulative(env._cum_initial, rng.random())
    else:
        cum = env._cum_odd if arm == env.config.odd_index else env._cum_common
        state = sample_from_cumulative(cum[prev], rng.random())
    env.last_state[arm] = state
    env.pull_counts[arm] += 1
    env.step_index += 1
    return int(state)


class CountTables:
    """Per-arm pull, exit and transition counters.

    pulls[a] counts selections of arm a; exits[a, i] counts observations
    of arm a in state i prior to a transition; trans[a, i, j] counts
    observed i -> j transitions. Pooled totals over all arms are kept
    alongside so pooled-minus-one-arm sums are O(1).
    """

    def __init__(self, num_arms: int, num_states: int):
        self.num_arms = num_arms
        self.num_states = num_states
        self.pulls = np.zeros(num_arms, dtype=np.int64)
        self.exits = np.zeros((num_arms, num_states), dtype=np.int64)
        self.trans = np.zeros((num_arms, num_states, num_states), dtype=np.int64)
        self.total_exits = np.zeros(num_states, dtype=np.int64)
        self.total_trans = np.zeros((num_states, num_states), dtype=np.int64)

    @property
    def total_pulls(self) -> int:
        return int(self.pulls.sum())

    def pooled_trans(self, excluded_arm: int) -> np.ndarray:
        """Transition counts summed over all arms except one."""
        return self.total_trans - self.trans[excluded_arm]

    def pooled_exits(self, excluded_arm: int) -> np.ndarray:
        return self.total_exits - self.exits[excluded_arm]

    def copy(self) -> "CountTables":
        out = CountTables(self.num_arms, self.num_states)
        out.pulls = self.pulls.copy()
        out.exits = self.exits.copy()
        out.trans = self.trans.copy()
        out.total_exits = self.total_exits.copy()
        out.total_trans = self.total_trans.copy()
        return out


def update_counts(tables: CountTables, arm: int, prev, new: int) -> CountTables:
    """Record one pull of ``arm``; prev is None on the arm's first observation.

    Mutates ``tables`` in place and returns it.
    """
    tables.pulls[arm] += 1
    if prev is not None:
        tables.exits[arm, prev] += 1
        tables.trans[arm, prev, new] += 1
        tables.total_exits[prev] += 1
        tables.total_trans[prev, new] += 1
    return tables
