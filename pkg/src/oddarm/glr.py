"""Dirichlet-averaged (modified) GLR statistic and ML transition estimates.

The statistic for hypothesis h against h' is the log ratio of the
Dirichlet(1,...,1)-averaged likelihood under h to the maximized
likelihood under h'. It decomposes into five terms: a constant T1, two
log-Beta terms T2/T3 over the counts of the hypothesised odd arm and of
the pooled rest, and two negative empirical-entropy terms T4/T5 for the
alternative. Terms that would evaluate 0 log 0 or 0 log(0/0) are skipped.

Because T2/T3 depend only on h and T4/T5 only on h', any pair statistic
is a sum of one per-h quantity and one per-h' quantity; the incremental
cache below maintains both families under single-transition updates so a
policy pays O(K) per pull instead of recomputing every log-Beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import CountTables
from .errors import DomainError


def log_beta(alphas) -> float:
    """log of the Dirichlet normalization constant B(alphas)."""
    total = 0.0
    s = 0.0
    for a in np.asarray(alphas, dtype=float).ravel():
        if a <= 0:
            raise DomainError(f"Dirichlet parameters must be positive, got {a!r}")
        total += math.lgamma(a)
        s += a
    return total - math.lgamma(s)


def xlogx(x: np.ndarray) -> np.ndarray:
    """x log x elementwise for nonnegative integer-valued counts; 0 at x = 0."""
    x = np.asarray(x, dtype=float)
    return x * np.log(np.maximum(x, 1.0))


def t1_constant(num_states: int) -> float:
    """2|S| log(1/B(1,...,1)); exactly 0 for |S| = 2."""
    return 2.0 * num_states * math.lgamma(num_states)


def _log_beta_rows_plus_one(counts: np.ndarray) -> float:
    # sum over rows i of log B((counts[i, j] + 1)_j)
    total = 0.0
    S = counts.shape[1]
    for i in range(counts.shape[0]):
        row = counts[i]
        acc = 0.0
        for c in row:
            acc += math.lgamma(float(c) + 1.0)
        total += acc - math.lgamma(float(row.sum()) + S)
    return total


def _entropy_term(trans: np.ndarray, exits: np.ndarray) -> float:
    # -sum_{i,j} n_ij log(n_ij / n_i) written via x log x, zero-count terms skipped
    return float(xlogx(exits).sum() - xlogx(trans).sum())


def avg_loglik_terms(tables: CountTables, h: int) -> tuple[float, float]:
    """(T2, T3) of hypothesis h computed from scratch."""
    t2 = _log_beta_rows_plus_one(tables.trans[h])
    t3 = _log_beta_rows_plus_one(tables.pooled_trans(h))
    return t2, t3


def max_loglik_terms(tables: CountTables, h_prime: int) -> tuple[float, float]:
    """(T4, T5) against alternative h' computed from scratch."""
    t4 = _entropy_term(tables.trans[h_prime], tables.exits[h_prime])
    t5 = _entropy_term(tables.pooled_trans(h_prime), tables.pooled_exits(h_prime))
    return t4, t5


@dataclass(frozen=True)
class GlrValue:
    """Value and components of one pair statistic, in nats."""

    t1: float
    t2: float
    t3: float
    t4: float
    t5: float
    value: float


def modified_glr(tables: CountTables, h: int, h_prime: int) -> GlrValue:
    """Modified GLR of hypothesis h with respect to h' from the count tables."""
    if h == h_prime:
        raise DomainError("h and h_prime must differ")
    t1 = t1_constant(tables.num_states)
    t2, t3 = avg_loglik_terms(tables, h)
    t4, t5 = max_loglik_terms(tables, h_prime)
    return GlrValue(t1=t1, t2=t2, t3=t3, t4=t4, t5=t5, value=t1 + t2 + t3 + t4 + t5)


def _hypothesis_scores(tables: CountTables) -> np.ndarray:
    # M_h = min over h' != h of M_{hh'}; uses the per-h/per-h' decomposition
    K = tables.num_arms
    t1 = t1_constant(tables.num_states)
    a = np.empty(K)
    b = np.empty(K)
    for h in range(K):
        t2, t3 = avg_loglik_terms(tables, h)
        t4, t5 = max_loglik_terms(tables, h)
        a[h] = t2 + t3
        b[h] = t4 + t5
    return _min_over_alternatives(t1, a, b)


def _min_over_alternatives(t1: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    i1 = int(np.argmin(b))
    masked = b.copy()
    masked[i1] = np.inf
    b_second = float(masked.min())
    out = t1 + a + b[i1]
    out[i1] = t1 + a[i1] + b_second
    return out


def glr_min(tables: CountTables, h: int) -> float:
    """min over h' != h of the pair statistic: the nearest-alternative GLR."""
    return float(_hypothesis_scores(tables)[h])


def best_hypothesis(tables: CountTables, rng: np.random.Generator) -> int:
    """argmax over h of the nearest-alternative GLR; ties broken uniformly."""
    scores = _hypothesis_scores(tables)
    return argmax_with_ties(scores, rng)


def argmax_with_ties(scores: np.ndarray, rng: np.random.Generator) -> int:
    ties = np.flatnonzero(scores == scores.max())
    if ties.shape[0] == 1:
        return int(ties[0])
    return int(ties[rng.integers(ties.shape[0])])


@dataclass(frozen=True, eq=False)
class MlEstimates:
    """Row-normalized transition estimates under one hypothesis.

    Rows with no observed exits are replaced by a unit row at a uniformly
    random position; the indices of repaired rows are kept for diagnostics.
    """

    odd_hat: np.ndarray
    common_hat: np.ndarray
    repaired_odd_rows: tuple[int, ...]
    repaired_common_rows: tuple[int, ...]


def _normalize_with_repair(trans: np.ndarray, exits: np.ndarray, rng) -> tuple[np.ndarray, tuple[int, ...]]:
    S = trans.shape[0]
    out = np.empty((S, S))
    repaired = []
    for i in range(S):
        if exits[i] > 0:
            out[i] = trans[i] / exits[i]
        else:
            out[i] = 0.0
            out[i, int(rng.integers(S))] = 1.0
            repaired.append(i)
    return out, tuple(repaired)


def ml_estimates(tables: CountTables, hypothesis: int, rng: np.random.Generator) -> MlEstimates:
    """Maximum-likelihood estimates of the odd and pooled common matrices.

    Repairs, when needed, consume rng draws in a fixed order: odd-matrix
    rows in state order first, then common-matrix rows.
    """
    odd, rep_odd = _normalize_with_repair(tables.trans[hypothesis], tables.exits[hypothesis], rng)
    common, rep_common = _normalize_with_repair(
        tables.pooled_trans(hypothesis), tables.pooled_exits(hypothesis), rng
    )
    return MlEstimates(
        odd_hat=odd,
        common_hat=common,
        repaired_odd_rows=rep_odd,
        repaired_common_rows=rep_common,
    )


class IncrementalGlr:
    """Running T2..T5 families updated one observed transition at a time.

    ``apply_transition`` must be called with the tables as they were
    *before* the corresponding ``update_counts`` call; the update only
    needs the pre-increment counts at the affected (arm, i, j) cell.
    A from-scratch rebuild is available for cross-checking.
    """

    def __init__(self, num_arms: int, num_states: int):
        self.num_arms = num_arms
        self.num_states = num_states
        self.t1 = t1_constant(num_states)
        base = -num_states * math.lgamma(num_states)
        self.t2 = np.full(num_arms, base)
        self.t3 = np.full(num_arms, base)
        self.t4 = np.zeros(num_arms)
        self.t5 = np.zeros(num_arms)

    @classmethod
    def from_tables(cls, tables: CountTables) -> "IncrementalGlr":
        inc = cls(tables.num_arms, tables.num_states)
        for h in range(tables.num_arms):
            inc.t2[h], inc.t3[h] = avg_loglik_terms(tables, h)
            inc.t4[h], inc.t5[h] = max_loglik_terms(tables, h)
        return inc

    def apply_transition(self, tables: CountTables, arm: int, i: int, j: int) -> None:
        S = float(self.num_states)
        log = math.log
        c = float(tables.trans[arm, i, j])
        r = float(tables.exits[arm, i])
        self.t2[arm] += log((c + 1.0) / (r + S))
        d4 = (r + 1.0) * log(r + 1.0) - (c + 1.0) * log(c + 1.0)
        if r > 0.0:
            d4 -= r * log(r)
        if c > 0.0:
            d4 += c * log(c)
        self.t4[arm] += d4
        tot_c = int(tables.total_trans[i, j])
        tot_r = int(tables.total_exits[i])
        arm_c = tables.trans[:, i, j].tolist()
        arm_r = tables.exits[:, i].tolist()
        t3 = self.t3
        t5 = self.t5
        for h in range(self.num_arms):
            if h == arm:
                continue
            pc = float(tot_c - arm_c[h])
            pr = float(tot_r - arm_r[h])
            t3[h] += log((pc + 1.0) / (pr + S))
            d5 = (pr + 1.0) * log(pr + 1.0) - (pc + 1.0) * log(pc + 1.0)
            if pr > 0.0:
                d5 -= pr * log(pr)
            if pc > 0.0:
                d5 += pc * log(pc)
            t5[h] += d5

    def pair(self, h: int, h_prime: int) -> float:
        return float(self.t1 + self.t2[h] + self.t3[h] + self.t4[h_prime] + self.t5[h_prime])

    def pair_values(self, h: int) -> np.ndarray:
        """M_{h h'} for all h'; the h-th entry is meaningless and set to +inf."""
        out = self.t1 + self.t2[h] + self.t3[h] + self.t4 + self.t5
        out[h] = np.inf
        return out

    def scores(self) -> np.ndarray:
        """Nearest-alternative GLR of every hypothesis."""
        return _min_over_alternatives(self.t1, self.t2 + self.t3, self.t4 + self.t5)
