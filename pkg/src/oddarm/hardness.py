"""Instance-hardness oracle for the odd-arm problem.

The hardness constant is the maximum over a scalar weight of a
two-term conditional-KL objective evaluated against an
occupancy-weighted mixture of the odd and common transition laws. Its
maximizer induces the optimal odd-vs-rest sampling split, and a
perturbed variant accounts for forced exploration at rate delta.

The objective is not assumed concave: the solver scans a 1024-point
uniform grid and refines the best bracket by golden-section search.
When the objective is flat to within 1e-12 the smallest weight wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDenominatorError, DimensionMismatchError, DomainError
from .markov import as_probs, as_rows, conditional_kl, stationary_rows

GRID_POINTS = 1024
FLAT_TOL = 1e-12
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_DENOM_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class HardnessSolution:
    """Solved hardness instance: constant, maximizer, mixture and sampling law.

    lambda_opt places lambda_star on the odd index and spreads the rest
    uniformly; mu1/mu2 are cached so repeated solves stay allocation-light.
    """

    d_star: float
    lambda_star: float
    mixture: np.ndarray
    lambda_opt: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    odd_index: int


def _rest_weight(K: int) -> float:
    return (K - 2) / (K - 1)


def mixture_transition(lambda1, P1, P2, mu1, mu2, K) -> np.ndarray:
    """Occupancy-weighted mixture of the two transition laws at weight lambda1.

    Row i is the convex combination of P1(.|i) and P2(.|i) with weights
    proportional to lambda1*mu1(i) and (1-lambda1)*(K-2)/(K-1)*mu2(i).
    """
    rows1 = as_rows(P1)
    rows2 = as_rows(P2)
    m1 = as_probs(mu1)
    m2 = as_probs(mu2)
    if rows1.shape != rows2.shape or rows1.shape[0] != m1.shape[0] or m1.shape != m2.shape:
        raise DimensionMismatchError("mixture arguments must share one state space")
    c = _rest_weight(K)
    w1 = lambda1 * m1
    w2 = (1.0 - lambda1) * c * m2
    den = w1 + w2
    if np.any(den < _DENOM_FLOOR):
        i = int(np.argmin(den))
        raise DegenerateDenominatorError(f"mixture row {i} has zero total weight")
    return (w1[:, None] * rows1 + w2[:, None] * rows2) / den[:, None]


def dstar_objective(lambda1, P1, P2, mu1, mu2, K) -> float:
    """The hardness objective at weight lambda1, evaluated at the mixture.

    Endpoint weights kill the corresponding KL term outright, so the
    objective is exactly 0 at lambda1 in {0, 1} even when the other law
    has zero entries there.
    """
    P = mixture_transition(lambda1, P1, P2, mu1, mu2, K)
    val = 0.0
    if lambda1 > 0.0:
        val += lambda1 * conditional_kl(P1, P, mu1)
    if lambda1 < 1.0:
        val += (1.0 - lambda1) * _rest_weight(K) * conditional_kl(P2, P, mu2)
    return val


def lambda_opt(lambda_star: float, h: int, K: int) -> np.ndarray:
    """Sampling law over arms: lambda_star on arm h, the rest split evenly."""
    out = np.full(K, (1.0 - lambda_star) / (K - 1))
    out[h] = lambda_star
    return out


class _ObjectivePieces:
    """Precomputed ingredients of the hardness objective for one (P1, P2) pair.

    With f1 = mu1 P1 (entrywise) and f2 = (K-2)/(K-1) mu2 P2, the objective
    at weight lam is

        lam E1 + (1-lam) E2 - sum_k xlogx(f2_k + lam (f1_k - f2_k))
                            + sum_i xlogx(W2_i + lam (W1_i - W2_i)),

    where W1/W2 are the row sums of f1/f2 and E1/E2 the cross terms
    sum f log(law). Entry positions where both f1 and f2 vanish never
    contribute and are dropped up front.
    """

    __slots__ = ("f2", "df", "w2", "dw", "e1", "e2")

    def __init__(self, rows1, rows2, mu1, mu2, K):
        c = _rest_weight(K)
        f1 = (mu1[:, None] * rows1).ravel()
        f2 = (c * mu2[:, None] * rows2).ravel()
        m1 = f1 > 0
        m2 = f2 > 0
        self.e1 = float(np.sum(f1[m1] * np.log(rows1.ravel()[m1])))
        self.e2 = float(np.sum(f2[m2] * np.log(rows2.ravel()[m2])))
        live = m1 | m2
        self.f2 = f2[live]
        self.df = f1[live] - f2[live]
        w1 = mu1
        w2 = c * mu2
        self.w2 = w2
        self.dw = w1 - w2


def _xlogx_sum_rows(a: np.ndarray) -> np.ndarray:
    # row-wise sum of a log a with the 0 log 0 = 0 convention; entries are
    # clamped to the smallest positive double, which contributes ~1e-297
    np.maximum(a, 1e-300, out=a)
    logs = np.log(a)
    logs *= a
    return logs.sum(axis=1)


def _objective_grid(lams, pieces: _ObjectivePieces) -> np.ndarray:
    A = np.multiply.outer(lams, pieces.df)
    A += pieces.f2
    W = np.multiply.outer(lams, pieces.dw)
    W += pieces.w2
    out = lams * (pieces.e1 - pieces.e2)
    out += pieces.e2
    out -= _xlogx_sum_rows(A)
    out += _xlogx_sum_rows(W)
    return out


def _make_scalar_objective(pieces: _ObjectivePieces):
    f2 = pieces.f2.tolist()
    df = pieces.df.tolist()
    w2 = pieces.w2.tolist()
    dw = pieces.dw.tolist()
    e1, e2 = pieces.e1, pieces.e2

    def obj(lam: float) -> float:
        total = lam * (e1 - e2) + e2
        for b, d in zip(f2, df):
            w = b + lam * d
            if w > 0.0:
                total -= w * math.log(w)
        for b, d in zip(w2, dw):
            w = b + lam * d
            if w > 0.0:
                total += w * math.log(w)
        return total

    return obj


_GRID = np.linspace(0.0, 1.0, GRID_POINTS)


def _maximize_objective(rows1, rows2, mu1, mu2, K):
    pieces = _ObjectivePieces(rows1, rows2, mu1, mu2, K)
    grid = _GRID
    vals = _objective_grid(grid, pieces)
    best = int(np.argmax(vals))
    champ = int(np.flatnonzero(vals >= vals[best] - FLAT_TOL)[0])
    champ_lam, champ_val = float(grid[champ]), float(vals[champ])

    obj = _make_scalar_objective(pieces)
    lo = float(grid[max(best - 1, 0)])
    hi = float(grid[min(best + 1, GRID_POINTS - 1)])
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc = obj(c)
    fd = obj(d)
    while hi - lo > 1e-7:
        if fc >= fd:  # ties move the bracket leftward
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = obj(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = obj(d)
    refined_lam = 0.5 * (lo + hi)
    refined_val = obj(refined_lam)
    if refined_val > champ_val + FLAT_TOL:
        return refined_lam, refined_val
    return champ_lam, champ_val


def solve_dstar(P1, P2, K: int, h: int = 0) -> HardnessSolution:
    """Maximize the hardness objective for the pair (P1, P2) with K arms.

    The constant and maximizer do not depend on the odd-arm index; ``h``
    only orients the returned sampling law. Accepts validated matrices or
    raw row-stochastic arrays (the policy passes running estimates).
    """
    if K < 3:
        raise DomainError(f"need at least 3 arms, got K={K}")
    rows1 = as_rows(P1)
    rows2 = as_rows(P2)
    if rows1.shape != rows2.shape:
        raise DimensionMismatchError("P1 and P2 must share the state space")
    mu1 = stationary_rows(rows1)
    mu2 = stationary_rows(rows2)
    lam, val = _maximize_objective(rows1, rows2, mu1, mu2, K)
    mix = mixture_transition(lam, rows1, rows2, mu1, mu2, K)
    return HardnessSolution(
        d_star=float(val),
        lambda_star=float(lam),
        mixture=mix,
        lambda_opt=lambda_opt(float(lam), h, K),
        mu1=mu1,
        mu2=mu2,
        odd_index=h,
    )


def perturbed_lambda(lambda_star: float, K: int, delta: float) -> float:
    """Exploration-perturbed maximizer delta/K + (1-delta) lambda_star."""
    return delta / K + (1.0 - delta) * lambda_star


def dstar_delta(P1, P2, K: int, delta: float) -> float:
    """Hardness constant seen by the policy when it explores at rate delta."""
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta!r}")
    sol = solve_dstar(P1, P2, K)
    lam_d = perturbed_lambda(sol.lambda_star, K, delta)
    rows1 = as_rows(P1)
    rows2 = as_rows(P2)
    return dstar_objective(lam_d, rows1, rows2, sol.mu1, sol.mu2, K)


def _kl_vector(p: np.ndarray, q: np.ndarray) -> float:
    m = p > 0
    return float(np.sum(p[m] * np.log(p[m] / q[m])))


def information_centre(nu1, nu2, w1: float) -> tuple[np.ndarray, float]:
    """Minimizer and minimum of w1 D(nu1||psi) + (1-w1) D(nu2||psi) over psi.

    The minimizer is the mixture w1 nu1 + (1-w1) nu2.
    """
    p1 = as_probs(nu1)
    p2 = as_probs(nu2)
    if p1.shape != p2.shape:
        raise DimensionMismatchError("nu1 and nu2 must live on the same alphabet")
    centre = w1 * p1 + (1.0 - w1) * p2
    val = 0.0
    if w1 > 0.0:
        val += w1 * _kl_vector(p1, centre)
    if w1 < 1.0:
        val += (1.0 - w1) * _kl_vector(p2, centre)
    return centre, val
