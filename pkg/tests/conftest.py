"""Shared fixtures.

The expensive Monte Carlo fixtures (drift runs, error-control trials and
the mode-comparison trials) are session-scoped: module tests and the
acceptance suite assert against the same computed results.
"""

import math
import multiprocessing
import os
import time

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")  # tiny arrays; fork-safe pools

import numpy as np
import pytest

import oddarm as oa
from oddarm.experiment import ExperimentConfig, run_trials

import oracles

VI_P1 = [[0.5, 0.5], [0.5, 0.5]]
VI_P2 = [[0.1, 0.9], [0.9, 0.1]]
VI_K = 8
VI_H = 0

DRIFT_DELTA = 0.1
DRIFT_STEPS = 200_000
DRIFT_MID = 100_000
DRIFT_SEEDS = list(range(20))


@pytest.fixture(scope="session")
def vi_matrices():
    return (
        oa.validate_transition_matrix(VI_P1),
        oa.validate_transition_matrix(VI_P2),
    )


@pytest.fixture(scope="session")
def vi_config(vi_matrices):
    P1, P2 = vi_matrices
    return oa.make_config(VI_K, VI_H, P1, P2)


@pytest.fixture(scope="session")
def vi_arms_doc():
    return {"K": VI_K, "h": VI_H, "P1": VI_P1, "P2": VI_P2}


def _drift_worker(seed):
    P1 = oa.validate_transition_matrix(VI_P1)
    P2 = oa.validate_transition_matrix(VI_P2)
    config = oa.make_config(VI_K, VI_H, P1, P2)
    env = oa.create_env(config, seed)
    params = oa.PolicyParams(threshold_L=1.0, delta=DRIFT_DELTA)
    out = oa.run_nonstop(env, params, oa.ADAPTIVE, DRIFT_STEPS,
                         checkpoints=[DRIFT_MID, DRIFT_STEPS])
    return {
        "seed": seed,
        "pairs_final": out["pairs"][DRIFT_STEPS],
        "fractions_final": out["fractions"][DRIFT_STEPS],
        "estimate_errors_mid": out["estimate_errors"][DRIFT_MID],
    }


@pytest.fixture(scope="session")
def drift_runs():
    """Non-stopping policy on the reference configuration, 20 seeds.

    Records the pair GLR values at the final step, final pull fractions,
    and ML estimation errors at the halfway checkpoint.
    """
    t0 = time.time()
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(processes=2) as pool:
        results = pool.map(_drift_worker, DRIFT_SEEDS, chunksize=1)
    print(f"\n[drift fixture] {len(DRIFT_SEEDS)} seeds x {DRIFT_STEPS} steps "
          f"in {time.time() - t0:.0f}s")
    return results


@pytest.fixture(scope="session")
def error_control_records(vi_config):
    """1000 adaptive trials at L = 10, delta = 0.1 on the reference config."""
    cfg = ExperimentConfig(arms=vi_config, l_values=(10.0,), deltas=(0.1,),
                           trials=1000, seed=0, mode=oa.ADAPTIVE, parallelism=2)
    t0 = time.time()
    records = run_trials(cfg)
    print(f"\n[error-control fixture] 1000 trials in {time.time() - t0:.0f}s")
    return records


@pytest.fixture(scope="session")
def baseline_taus(vi_config):
    """Paired adaptive/known stopping times at L = 1e4, delta = 0.1, 500 trials."""
    cfg = ExperimentConfig(arms=vi_config, l_values=(10_000.0,), deltas=(0.1,),
                           trials=500, seed=0, mode="both", parallelism=2)
    t0 = time.time()
    records = run_trials(cfg)
    adaptive = np.array([r.tau for r in records if r.mode == oa.ADAPTIVE], dtype=float)
    known = np.array([r.tau for r in records if r.mode == oa.KNOWN_PARAMS], dtype=float)
    print(f"\n[baseline fixture] 2x500 trials in {time.time() - t0:.0f}s")
    return adaptive, known


# ---------------------------------------------------------------------------
# Invariant suites shared by module tests and the acceptance gate.


@pytest.fixture(scope="session")
def count_identity_report():
    """Replay 1e4 random pulls on a random config; check the count identities each step."""
    gen = np.random.default_rng(11)
    K, S = 5, 3
    config = oa.make_config(
        K, 2,
        oa.validate_transition_matrix(oracles.random_ergodic_rows(gen, S)),
        oa.validate_transition_matrix(oracles.random_ergodic_rows(gen, S)),
    )
    env = oa.create_env(config, 1234)
    tables = oa.CountTables(K, S)
    rng = np.random.default_rng(5)
    worst = 0
    sandwich_worst = 0
    for n in range(10_000):
        arm = int(rng.integers(K))
        prev = int(env.last_state[arm])
        obs = oa.pull(env, arm)
        oa.update_counts(tables, arm, None if prev < 0 else prev, obs)
        worst = max(worst, abs(int(tables.pulls.sum()) - (n + 1)))
        worst = max(worst, int(np.abs(tables.trans.sum(axis=2) - tables.exits).max()))
        worst = max(worst, int(np.abs(tables.exits.sum(axis=1) - np.maximum(tables.pulls - 1, 0)).max()))
        arrivals = tables.trans.sum(axis=1)
        sandwich_worst = max(sandwich_worst, int(np.abs(tables.exits - arrivals).max()))
    return {"identity_violation": worst, "sandwich_gap": sandwich_worst}


@pytest.fixture(scope="session")
def glr_table_report():
    """Bounds on 1000 random count tables: pair-sum, step bound, classical GLR."""
    rng = np.random.default_rng(77)
    worst_pair_sum = -math.inf
    worst_step_bound = -math.inf
    worst_vs_classical = -math.inf
    for _ in range(1000):
        K = int(rng.integers(3, 6))
        S = int(rng.integers(2, 4))
        n_pulls = int(rng.integers(K + 1, 400))
        tables = oracles.random_replay_tables(rng, K, S, n_pulls)
        cap = n_pulls * math.log(S)
        for h in range(K):
            for hp in range(K):
                if h == hp:
                    continue
                m = oa.modified_glr(tables, h, hp).value
                m_rev = oa.modified_glr(tables, hp, h).value
                worst_pair_sum = max(worst_pair_sum, m + m_rev)
                worst_step_bound = max(worst_step_bound, m - cap)
                worst_vs_classical = max(
                    worst_vs_classical, m - oracles.classical_glr(tables, h, hp)
                )
    return {
        "pair_sum": worst_pair_sum,
        "step_bound": worst_step_bound,
        "vs_classical": worst_vs_classical,
    }


@pytest.fixture(scope="session")
def info_centre_report():
    """Information-centre closed form versus a simplex grid, 50 instances."""
    rng = np.random.default_rng(21)
    worst_slack = -math.inf
    for _ in range(50):
        size = int(rng.integers(2, 4))
        nu1 = rng.dirichlet(np.ones(size))
        nu2 = rng.dirichlet(np.ones(size))
        w1 = float(rng.random())
        _, closed = oa.information_centre(nu1, nu2, w1)
        grid = oracles.information_centre_grid(tuple(nu1), tuple(nu2), w1)
        # the grid minimum can only be >= the true minimum (minus fp slack)
        worst_slack = max(worst_slack, closed - grid - 0.0)
    return {"max_closed_minus_grid": worst_slack}


@pytest.fixture(scope="session")
def dstar_oracle_report():
    """Solver versus a 1e4-point dense-grid oracle on 50 random instances."""
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(50):
        S = int(rng.integers(2, 4))
        K = int(rng.choice([3, 5, 8]))
        p1 = oracles.random_ergodic_rows(rng, S)
        p2 = oracles.random_ergodic_rows(rng, S)
        sol = oa.solve_dstar(p1, p2, K)
        _, grid_val = oracles.dense_grid_dstar(p1, p2, K)
        worst = max(worst, abs(sol.d_star - grid_val))
    return {"max_abs_gap": worst}


@pytest.fixture(scope="session")
def stationary_residual_report():
    """Fixed-point residuals of 100 random validated matrices."""
    rng = np.random.default_rng(41)
    worst_residual = 0.0
    worst_sum = 0.0
    for _ in range(100):
        S = int(rng.integers(2, 7))
        P = oa.validate_transition_matrix(oracles.random_ergodic_rows(rng, S))
        mu = oa.stationary_distribution(P)
        worst_residual = max(worst_residual, float(np.abs(mu.probs @ P.rows - mu.probs).max()))
        worst_sum = max(worst_sum, abs(float(mu.probs.sum()) - 1.0))
    return {"max_residual": worst_residual, "max_sum_gap": worst_sum}
