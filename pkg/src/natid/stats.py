"""Two-sample tests and the distribution functions behind them.

All p-values are two-sided. ``TestResult.direction`` says which sample is
larger (by mean for Welch, by rank sum for Mann-Whitney).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Hashable, Mapping, Optional, Sequence

import numpy as np
from scipy.special import betainc
from scipy.stats import rankdata

EXACT_MWW_MAX_CELLS = 64


class Direction(str, enum.Enum):
    GROUP_A = "GroupA"
    GROUP_B = "GroupB"
    NONE = "None"


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    statistic: float
    p_value: float
    direction: Direction
    df: Optional[float] = None
    method: str = ""

    def stars(self) -> str:
        if self.p_value < 0.01:
            return "**"
        if self.p_value < 0.05:
            return "*"
        return ""


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def student_t_cdf(t: float, df: float) -> float:
    """Student-t CDF through the regularized incomplete beta function."""
    if not df > 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if t == 0:
        return 0.5
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    tail = 0.5 * float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return 1.0 - tail if t > 0 else tail


def student_t_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|), computed directly so small p-values keep precision."""
    if not df > 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if math.isinf(t):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def _direction(sign: float) -> Direction:
    if sign > 0:
        return Direction.GROUP_A
    if sign < 0:
        return Direction.GROUP_B
    return Direction.NONE


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> TestResult:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("Welch's t-test needs at least two observations per sample")
    na, nb = a.size, b.size
    va, vb = a.var(ddof=1) / na, b.var(ddof=1) / nb
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0:
        if diff == 0:
            return TestResult(0.0, 1.0, Direction.NONE, None, "welch")
        # both samples constant but different: the separation is certain
        return TestResult(math.copysign(math.inf, diff), 0.0, _direction(diff), None, "welch")
    t = float(diff / math.sqrt(se2))
    df = float(se2 ** 2 / (va ** 2 / (na - 1) + vb ** 2 / (nb - 1)))
    p = min(1.0, student_t_two_sided(t, df))
    return TestResult(t, p, _direction(t), df, "welch")


def _tie_term(values: np.ndarray) -> float:
    _, counts = np.unique(values, return_counts=True)
    return float((counts ** 3 - counts).sum())


def _exact_mww_p(ranks2: np.ndarray, na: int, observed2: int) -> float:
    """Exact two-sided p from the permutation distribution of the rank sum.

    ``ranks2`` are doubled midranks (integers even with ties). Counts of
    size-``na`` subsets per rank sum are built by dynamic programming.
    """
    n = ranks2.size
    total = int(ranks2.sum())
    ways = np.zeros((na + 1, total + 1))
    ways[0, 0] = 1.0
    for r in ranks2:
        r = int(r)
        # iterate k downward so each item is used at most once
        for k in range(na, 0, -1):
            ways[k, r:] += ways[k - 1, : total + 1 - r]
    dist = ways[na]
    sums2 = np.nonzero(dist)[0]
    mean2 = na * (n + 1)  # doubled expected rank sum
    extreme = np.abs(sums2 - mean2) >= abs(observed2 - mean2)
    return float(dist[sums2[extreme]].sum() / dist.sum())


def mann_whitney_u(a: Sequence[float], b: Sequence[float], exact: Optional[bool] = None) -> TestResult:
    """Mann-Whitney U for sample ``a`` with midranks for ties.

    The p-value is exact (full permutation distribution, ties respected)
    when ``len(a) * len(b) <= 64``, otherwise from the normal
    approximation with tie and continuity corrections. ``exact`` forces
    either branch.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise ValueError("Mann-Whitney U needs non-empty samples")
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    rank_sum = float(ranks[:na].sum())
    u = rank_sum - na * (na + 1) / 2.0
    mu = na * nb / 2.0
    direction = _direction(u - mu)
    if exact is None:
        exact = na * nb <= EXACT_MWW_MAX_CELLS
    if exact:
        ranks2 = np.rint(2 * ranks).astype(np.int64)
        p = _exact_mww_p(ranks2, na, int(round(2 * rank_sum)))
        return TestResult(u, min(1.0, p), direction, None, "mann-whitney exact")
    n = na + nb
    var = na * nb / 12.0 * ((n + 1) - _tie_term(pooled) / (n * (n - 1)))
    if var <= 0:
        return TestResult(u, 1.0, direction, None, "mann-whitney normal")
    z = (abs(u - mu) - 0.5) / math.sqrt(var)
    p = 1.0 if z <= 0 else min(1.0, 2.0 * normal_sf(z))
    return TestResult(u, p, direction, None, "mann-whitney normal")


def percentile_cutoff(counts: Mapping[Hashable, int], q: float) -> set:
    """Items whose count reaches the nearest-rank ``q``-quantile of all counts.

    The threshold is the ``ceil(q * n)``-th smallest count, so at least one
    item is always returned and ties at the threshold are all kept.
    """
    if not counts:
        raise ValueError("percentile_cutoff needs at least one item")
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    values = sorted(counts.values())
    rank = max(1, math.ceil(q * len(values) - 1e-9))
    threshold = values[rank - 1]
    return {item for item, c in counts.items() if c >= threshold}
