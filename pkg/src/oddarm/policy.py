"""Sequential arm-selection policies with a modified-GLR stopping rule.

The adaptive policy pulls every arm once, then repeatedly scores each
hypothesis by its nearest-alternative GLR, stops once the best score
clears log((K-1) L), and otherwise samples the next arm from a forced
exploration mixture: with probability delta a uniform arm, else the
optimal odd-vs-rest split computed from running ML estimates. The
known-parameters baseline is identical except the split is computed once
from the true matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .env import ArmConfiguration, CountTables, EnvState, pull, update_counts
from .errors import (
    DegenerateDenominatorError,
    SingularSystemError,
    StepCapExceeded,
    ValidationError,
)
from .glr import IncrementalGlr, argmax_with_ties, ml_estimates
from .hardness import lambda_opt, solve_dstar
from .markov import sample_from_cumulative

ADAPTIVE = "adaptive"
KNOWN_PARAMS = "known"

LAW_FLOOR_TOL = 1e-12


@dataclass(frozen=True)
class PolicyParams:
    """Threshold and exploration parameters.

    The runtime stop threshold is log((K-1) * threshold_L). resolve_every
    controls how often the sampling split is recomputed from fresh
    estimates; 1 recomputes every step, 16 is a documented speed option.
    """

    threshold_L: float
    delta: float
    max_steps: int = 10_000_000
    resolve_every: int = 1

    def __post_init__(self):
        if self.threshold_L < 1.0:
            raise ValidationError(f"threshold_L must be >= 1, got {self.threshold_L!r}")
        if not 0.0 < self.delta < 1.0:
            raise ValidationError(f"delta must lie in (0, 1), got {self.delta!r}")
        if self.max_steps < 1 or self.resolve_every < 1:
            raise ValidationError("max_steps and resolve_every must be positive")

    def threshold(self, num_arms: int) -> float:
        return math.log((num_arms - 1) * self.threshold_L)


@dataclass(frozen=True)
class Pull:
    arm: int


@dataclass(frozen=True)
class Stop:
    declared: int


@dataclass
class RunResult:
    """Outcome of one trial: pulls until stopping, declaration, correctness."""

    stopping_time: int
    declared: int
    correct: bool
    final_glr: float
    solve_failures: int = 0
    trace: list | None = None


class PolicyState:
    """Per-trial mutable policy state: tables, GLR caches and rng streams.

    The exploration Bernoulli has its own stream, independent of both the
    observation streams and the selection stream used for tie-breaks,
    zero-row repairs and arm draws.
    """

    def __init__(self, config: ArmConfiguration, mode: str, exploration_seq, selection_seq):
        if mode not in (ADAPTIVE, KNOWN_PARAMS):
            raise ValidationError(f"unknown policy mode {mode!r}")
        self.mode = mode
        self.config = config
        self.K = config.num_arms
        self.S = config.num_states
        self.tables = CountTables(self.K, self.S)
        self.inc = IncrementalGlr(self.K, self.S)
        self.exploration_rng = np.random.Generator(np.random.PCG64(exploration_seq))
        self.selection_rng = np.random.Generator(np.random.PCG64(selection_seq))
        self.n_pulls = 0
        self.lambda_vec = None
        self.steps_since_solve = 0
        self.solve_failures = 0
        self._known_lambda_star = None

    @classmethod
    def for_env(cls, env: EnvState, mode: str) -> "PolicyState":
        exploration_seq, selection_seq = env.policy_seed_sequences()
        return cls(env.config, mode, exploration_seq, selection_seq)

    def record(self, arm: int, prev, new: int) -> None:
        # incremental GLR update reads pre-increment counts, so it runs first
        if prev is not None:
            self.inc.apply_transition(self.tables, arm, prev, new)
        update_counts(self.tables, arm, prev, new)
        self.n_pulls += 1

    def _known_split(self) -> float:
        if self._known_lambda_star is None:
            sol = solve_dstar(self.config.odd_matrix, self.config.common_matrix, self.K)
            self._known_lambda_star = sol.lambda_star
        return self._known_lambda_star

    def refresh_sampling_law(self, params: PolicyParams, h_star: int) -> None:
        if self.mode == KNOWN_PARAMS:
            self.lambda_vec = lambda_opt(self._known_split(), h_star, self.K)
            return
        self.steps_since_solve += 1
        if self.lambda_vec is not None and self.steps_since_solve < params.resolve_every:
            return
        est = ml_estimates(self.tables, h_star, self.selection_rng)
        try:
            sol = solve_dstar(est.odd_hat, est.common_hat, self.K, h_star)
            self.lambda_vec = sol.lambda_opt
        except (SingularSystemError, DegenerateDenominatorError):
            # degenerate running estimates (possible in early steps even
            # after zero-row repair); fall back to uniform for this step
            self.lambda_vec = np.full(self.K, 1.0 / self.K)
            self.solve_failures += 1
        self.steps_since_solve = 0


def policy_step(state: PolicyState, params: PolicyParams):
    """Next action: round-robin pull, a sampled pull, or a stop declaration."""
    K = state.K
    if state.n_pulls < K:
        return Pull(state.n_pulls)
    scores = state.inc.scores()
    h_star = argmax_with_ties(scores, state.selection_rng)
    if scores[h_star] >= params.threshold(K):
        return Stop(h_star)
    state.refresh_sampling_law(params, h_star)
    law = params.delta / K + (1.0 - params.delta) * state.lambda_vec
    assert law.min() >= params.delta / K - LAW_FLOOR_TOL
    if state.exploration_rng.random() < params.delta:
        arm = int(state.selection_rng.integers(K))
    else:
        arm = sample_from_cumulative(np.cumsum(state.lambda_vec), state.selection_rng.random())
    return Pull(arm)


def _apply_pull(env: EnvState, state: PolicyState, arm: int) -> int:
    prev = int(env.last_state[arm])
    obs = pull(env, arm)
    state.record(arm, None if prev < 0 else prev, obs)
    return obs


def run_to_stop(env: EnvState, params: PolicyParams, mode: str = ADAPTIVE,
                record_trace: bool = False) -> RunResult:
    """Drive one trial to its stopping declaration.

    Raises StepCapExceeded if max_steps pulls happen without stopping.
    """
    state = PolicyState.for_env(env, mode)
    trace = [] if record_trace else None
    while True:
        action = policy_step(state, params)
        if isinstance(action, Stop):
            return RunResult(
                stopping_time=state.n_pulls,
                declared=action.declared,
                correct=action.declared == env.config.odd_index,
                final_glr=float(state.inc.scores()[action.declared]),
                solve_failures=state.solve_failures,
                trace=trace,
            )
        if state.n_pulls >= params.max_steps:
            raise StepCapExceeded(state.n_pulls)
        obs = _apply_pull(env, state, action.arm)
        if record_trace:
            trace.append((action.arm, obs, state.inc.scores()))


def run_nonstop(env: EnvState, params: PolicyParams, mode: str, n_steps: int,
                checkpoints=()) -> dict:
    """Run the never-stopping version of the policy for a fixed step budget.

    At each checkpoint (a pull count) records the pair GLR values of the
    true hypothesis against every alternative, the per-arm pull
    fractions, and the max-abs estimation errors of the running ML
    estimates. Used by drift and convergence diagnostics.
    """
    nonstop = replace(params, threshold_L=math.inf, max_steps=n_steps + 1)
    state = PolicyState.for_env(env, mode)
    marks = set(int(c) for c in checkpoints)
    h_true = env.config.odd_index
    out = {"pairs": {}, "fractions": {}, "estimate_errors": {}, "solve_failures": 0}
    while state.n_pulls < n_steps:
        action = policy_step(state, nonstop)
        _apply_pull(env, state, action.arm)
        if state.n_pulls in marks:
            out["pairs"][state.n_pulls] = state.inc.pair_values(h_true)
            out["fractions"][state.n_pulls] = state.tables.pulls / state.n_pulls
            out["estimate_errors"][state.n_pulls] = _estimate_errors(state.tables, env.config)
    out["solve_failures"] = state.solve_failures
    return out


def _estimate_errors(tables: CountTables, config: ArmConfiguration) -> tuple[float, float]:
    h = config.odd_index
    err1 = _matrix_error(tables.trans[h], tables.exits[h], config.odd_matrix.rows)
    err2 = _matrix_error(tables.pooled_trans(h), tables.pooled_exits(h), config.common_matrix.rows)
    return err1, err2


def _matrix_error(trans, exits, truth) -> float:
    err = 0.0
    for i in range(truth.shape[0]):
        if exits[i] > 0:
            err = max(err, float(np.max(np.abs(trans[i] / exits[i] - truth[i]))))
        else:
            err = math.inf
    return err


def known_ll_ratio(tables: CountTables, config: ArmConfiguration, h: int, h_prime: int) -> float:
    """Log-likelihood ratio of configuration h versus h' under the true laws.

    Diagnostic statistic: sums count-weighted log ratios of the true
    transition probabilities; +inf when a realized transition is
    impossible under the alternative.
    """
    if h == h_prime:
        raise ValidationError("h and h_prime must differ")
    p1 = config.odd_matrix.rows
    p2 = config.common_matrix.rows
    total = 0.0
    impossible_alt = False
    impossible_null = False
    for a in range(tables.num_arms):
        num = p1 if a == h else p2
        den = p1 if a == h_prime else p2
        counts = tables.trans[a]
        for i, j in zip(*np.nonzero(counts)):
            if den[i, j] == 0.0 and num[i, j] == 0.0:
                continue
            if den[i, j] == 0.0:
                impossible_alt = True
            elif num[i, j] == 0.0:
                impossible_null = True
            else:
                total += counts[i, j] * math.log(num[i, j] / den[i, j])
    if impossible_alt and not impossible_null:
        return math.inf
    if impossible_null and not impossible_alt:
        return -math.inf
    if impossible_alt and impossible_null:
        return math.nan
    return total
