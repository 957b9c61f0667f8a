"""Finite-state Markov chain primitives.

Validated row-stochastic transition matrices with ergodicity checks,
stationary distributions via a direct linear solve, conditional KL
divergence between transition laws, binary relative entropy, and
single-step sampling. All logarithms are natural (nats).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    DomainError,
    NegativeEntryError,
    PeriodicError,
    ReducibleError,
    RowSumError,
    SingularSystemError,
)

# Input rows may deviate from 1 by up to this much before rejection;
# accepted rows are renormalized so stored matrices sum to 1 within 1e-12.
ROW_SUM_INPUT_ATOL = 1e-9
STATIONARY_RESIDUAL_ATOL = 1e-10


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """A validated row-stochastic |S|x|S| matrix of an ergodic chain.

    Construct through :func:`validate_transition_matrix`; rows are stored
    renormalized so each sums to 1 within 1e-12.
    """

    rows: np.ndarray

    @property
    def size(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    """Stationary probability vector of a validated transition matrix."""

    probs: np.ndarray


@dataclass(frozen=True, eq=False)
class InitialDistribution:
    """Common distribution of each arm's initial state."""

    probs: np.ndarray


def as_rows(P) -> np.ndarray:
    """Return the underlying (S, S) float array of a matrix-like argument."""
    if isinstance(P, TransitionMatrix):
        return P.rows
    return np.asarray(P, dtype=float)


def as_probs(mu) -> np.ndarray:
    """Return the underlying probability vector of a distribution-like argument."""
    if isinstance(mu, (StationaryDistribution, InitialDistribution)):
        return mu.probs
    return np.asarray(mu, dtype=float)


def make_initial_distribution(probs) -> InitialDistribution:
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise DimensionMismatchError("initial distribution must be a vector of length >= 2")
    if np.any(p < 0):
        raise NegativeEntryError("initial distribution has a negative entry")
    s = p.sum()
    if abs(s - 1.0) > ROW_SUM_INPUT_ATOL:
        raise RowSumError(f"initial distribution sums to {s!r}, not 1")
    return InitialDistribution(probs=p / s)


def _strongly_connected(support: np.ndarray) -> bool:
    # BFS reachability from node 0 in the support digraph and its transpose.
    n = support.shape[0]
    for adj in (support, support.T):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            nxt = []
            for u in frontier:
                for v in np.flatnonzero(adj[u]):
                    if not seen[v]:
                        seen[v] = True
                        nxt.append(int(v))
            frontier = nxt
        if not seen.all():
            return False
    return True


def _period_gcd(support: np.ndarray) -> int:
    # BFS levels from node 0; gcd over edges (u, v) of level[u] + 1 - level[v].
    # For a strongly connected digraph this equals the chain period.
    n = support.shape[0]
    level = np.full(n, -1, dtype=int)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(support[u]):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(int(v))
        frontier = nxt
    g = 0
    for u in range(n):
        for v in np.flatnonzero(support[u]):
            g = math.gcd(g, level[u] + 1 - level[v])
    return abs(g)


def validate_transition_matrix(raw) -> TransitionMatrix:
    """Validate a square matrix as row-stochastic, irreducible and aperiodic.

    Raises RowSumError, NegativeEntryError, ReducibleError or PeriodicError
    naming the offending row or structure.
    """
    rows = np.asarray(raw, dtype=float)
    if rows.ndim != 2 or rows.shape[0] != rows.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {rows.shape}")
    if rows.shape[0] < 2:
        raise DimensionMismatchError("state space must have at least 2 states")
    neg = np.argwhere(rows < 0)
    if neg.size:
        i, j = neg[0]
        raise NegativeEntryError(f"entry ({i}, {j}) is negative: {rows[i, j]!r}")
    sums = rows.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_INPUT_ATOL)
    if bad.size:
        i = int(bad[0])
        raise RowSumError(f"row {i} sums to {sums[i]!r}, deviates from 1 by more than {ROW_SUM_INPUT_ATOL}")
    support = rows > 0
    if not _strongly_connected(support):
        raise ReducibleError("positive-entry digraph is not strongly connected")
    period = _period_gcd(support)
    if period != 1:
        raise PeriodicError(f"chain has period {period}")
    return TransitionMatrix(rows=rows / sums[:, None])


def stationary_rows(rows: np.ndarray) -> np.ndarray:
    """Stationary vector of a row-stochastic array via a direct linear solve.

    Solves (P^T - I) mu = 0 with the last equation replaced by the
    normalization sum(mu) = 1; the replaced equation is redundant for any
    chain with a unique stationary distribution, so the solve is exact to
    solver precision.
    """
    n = rows.shape[0]
    if n == 2:
        # the 2x2 system solved in closed form: -p mu0 + q mu1 = 0, mu0 + mu1 = 1
        p = rows[0, 1]
        q = rows[1, 0]
        if p + q <= 0.0:
            raise SingularSystemError("stationary solve failed: two closed classes")
        return np.array([q / (p + q), p / (p + q)])
    A = rows.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        mu = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"stationary solve failed: {exc}") from exc
    if not np.all(np.isfinite(mu)) or np.any(mu < -1e-9):
        raise SingularSystemError("stationary solve produced an invalid vector")
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    return mu


def stationary_distribution(P) -> StationaryDistribution:
    """Stationary distribution of a validated matrix, mu P = mu, sum(mu) = 1."""
    rows = as_rows(P)
    mu = stationary_rows(rows)
    residual = np.max(np.abs(mu @ rows - mu))
    if residual > STATIONARY_RESIDUAL_ATOL:
        raise SingularSystemError(f"stationary fixed-point residual {residual!r} exceeds tolerance")
    return StationaryDistribution(probs=mu)


def conditional_kl(P, Q, mu) -> float:
    """Occupancy-weighted KL divergence between transition laws, in nats.

    Returns sum_i mu(i) sum_j P(j|i) log(P(j|i)/Q(j|i)) with the
    0 log 0 = 0 log(0/0) = 0 convention; +inf when some P(j|i) > 0,
    Q(j|i) = 0 with mu(i) > 0.
    """
    p = as_rows(P)
    q = as_rows(Q)
    m = as_probs(mu)
    if p.shape != q.shape or p.shape[0] != m.shape[0]:
        raise DimensionMismatchError(
            f"incompatible shapes: P {p.shape}, Q {q.shape}, mu {m.shape}"
        )
    weight = m[:, None] * p
    mask = weight > 0
    if np.any(mask & (q == 0)):
        return math.inf
    out = 0.0
    if np.any(mask):
        out = float(np.sum(weight[mask] * np.log(p[mask] / q[mask])))
    return out


def binary_relative_entropy(eps: float) -> float:
    """d(eps, 1-eps) = eps log(eps/(1-eps)) + (1-eps) log((1-eps)/eps)."""
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in the open interval (0, 1), got {eps!r}")
    return eps * math.log(eps / (1.0 - eps)) + (1.0 - eps) * math.log((1.0 - eps) / eps)


def sample_from_cumulative(cum: np.ndarray, u: float) -> int:
    """Map a uniform draw to a state index via a cumulative row."""
    idx = int(np.searchsorted(cum, u, side="right"))
    return min(idx, cum.shape[0] - 1)


def sample_step(P, state: int, rng: np.random.Generator) -> int:
    """Advance one step from ``state``; consumes exactly one draw from rng."""
    rows = as_rows(P)
    cum = np.cumsum(rows[state])
    return sample_from_cumulative(cum, rng.random())
