"""Nonparametric comparison machinery and rank-archive instrumentation.

Implements the Wilcoxon signed-rank test (exact tail enumeration for small
samples, normal approximation with tie and continuity corrections above
that), per-problem sign outcomes with their -/=/+ and P-N summaries,
Friedman mean ranks, and the archive that records which fitness ranks
produce new best solutions during a run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

# Largest sample for which the exact two-sided tail is enumerated; beyond
# this the normal approximation is used.
EXACT_LIMIT = 20


class AllZero(ValueError):
    """Every paired difference is zero; the test is vacuous ('=' outcome)."""


class EmptyArchive(ValueError):
    """Average rank requested from an archive with no recorded events."""


@dataclass
class WilcoxonResult:
    r_plus: float
    r_minus: float
    p_value: float
    significant: bool
    n_nonzero: int
    exact: bool


@dataclass
class SignSummary:
    """Counts of the per-problem table symbols for one pairing.

    ``minus``/``equal``/``plus`` count the symbols describing the compared
    algorithm against the considered one, so ``p_n = minus - plus`` is the
    number of problems the considered algorithm wins minus the number it
    loses.
    """

    minus: int
    equal: int
    plus: int

    @property
    def p_n(self) -> int:
        return self.minus - self.plus

    @classmethod
    def from_signs(cls, signs: Sequence[str]) -> "SignSummary":
        signs = list(signs)
        return cls(signs.count("-"), signs.count("="), signs.count("+"))


def midranks(values) -> np.ndarray:
    """Ranks 1..n with tied values sharing their average rank."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_two_sided_p(ranks: np.ndarray, r_plus: float, r_minus: float) -> float:
    """Tail probability by counting all 2^n sign assignments.

    Midranks are doubled so every achievable positive-rank sum is an integer;
    a subset-sum table then counts assignments per sum.
    """
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for d in doubled:
        shifted = np.zeros_like(counts)
        shifted[d:] = counts[: total + 1 - d]
        counts += shifted
    w_lo = int(np.rint(2.0 * min(r_plus, r_minus)))
    w_hi = int(np.rint(2.0 * max(r_plus, r_minus)))
    n_assignments = 2.0 ** len(ranks)
    p = (counts[: w_lo + 1].sum() + counts[w_hi:].sum()) / n_assignments
    return min(p, 1.0)


def _approx_two_sided_p(abs_d: np.ndarray, r_plus: float, r_minus: float) -> float:
    """Normal approximation with tie correction and continuity correction."""
    n = len(abs_d)
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(abs_d, return_counts=True)
    var -= np.sum(tie_counts.astype(float) ** 3 - tie_counts) / 48.0
    t = min(r_plus, r_minus)
    z = (t - mean + 0.5) / math.sqrt(var)
    p = 2.0 * 0.5 * math.erfc(-z / math.sqrt(2.0))
    return min(p, 1.0)


def wilcoxon_signed_rank(differences, alpha: float = 0.05) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test over paired differences.

    Zero differences are discarded (raising AllZero if none remain) and the
    remaining absolute differences midranked.  The p-value is exact for up
    to EXACT_LIMIT nonzero differences and approximated above that.
    """
    d = np.asarray(differences, dtype=float)
    if d.size == 0:
        raise ValueError("at least one difference is required")
    d = d[d != 0.0]
    if d.size == 0:
        raise AllZero("all differences are zero")
    abs_d = np.abs(d)
    ranks = midranks(abs_d)
    r_plus = float(ranks[d > 0].sum())
    r_minus = float(ranks[d < 0].sum())
    exact = d.size <= EXACT_LIMIT
    if exact:
        p = float(_exact_two_sided_p(ranks, r_plus, r_minus))
    else:
        p = float(_approx_two_sided_p(abs_d, r_plus, r_minus))
    return WilcoxonResult(r_plus, r_minus, p, bool(p < alpha), int(d.size), exact)


def single_problem_compare(errors_considered, errors_compared, alpha: float = 0.05) -> str:
    """Table symbol for one problem: the compared algorithm against the
    considered one over paired per-run errors.

    '-' means the compared algorithm is significantly worse, '+' that it is
    significantly better, '=' that the test is inconclusive.
    """
    a = np.asarray(errors_considered, dtype=float)
    b = np.asarray(errors_compared, dtype=float)
    if a.shape != b.shape:
        raise ValueError("paired samples need equal run counts")
    d = b - a
    try:
        res = wilcoxon_signed_rank(d, alpha)
    except AllZero:
        return "="
    if not res.significant:
        return "="
    direction = float(np.median(d))
    if direction == 0.0:
        direction = res.r_plus - res.r_minus
    return "-" if direction > 0 else "+"


def multi_problem_wilcoxon(mean_errors_considered, mean_errors_compared,
                           alpha: float = 0.05) -> WilcoxonResult:
    """Wilcoxon over one mean-error difference per problem.

    R+ collects the ranks of the problems where the considered algorithm is
    better (lower mean error).
    """
    a = np.asarray(mean_errors_considered, dtype=float)
    b = np.asarray(mean_errors_compared, dtype=float)
    if a.shape != b.shape:
        raise ValueError("both algorithms must cover the same problems")
    return wilcoxon_signed_rank(b - a, alpha)


def friedman_mean_ranks(error_matrix) -> np.ndarray:
    """Mean rank per algorithm over a (problems x algorithms) error matrix.

    Within each problem the algorithms are ranked 1 = smallest error, tied
    values sharing their midrank; the result is the per-column average.
    """
    mat = np.asarray(error_matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[1] < 2:
        raise ValueError("need a 2-D matrix with at least two algorithms")
    ranks = np.vstack([midranks(row) for row in mat])
    return ranks.mean(axis=0)


@dataclass
class RankArchive:
    """Ranks of the individuals whose trials became new best solutions."""

    np_size: int
    records: List[int] = field(default_factory=list)
    frequency: np.ndarray = None

    def __post_init__(self):
        if self.frequency is None:
            self.frequency = np.zeros(self.np_size, dtype=np.int64)


def nbs_record(rank_of_target: int, archive: RankArchive) -> None:
    """Record one new-best-solution event produced by the given rank (1-based)."""
    if not 1 <= rank_of_target <= archive.np_size:
        raise ValueError(f"rank {rank_of_target} outside 1..{archive.np_size}")
    archive.records.append(int(rank_of_target))
    archive.frequency[rank_of_target - 1] += 1


def ar_statistic(archive: RankArchive) -> float:
    """Average recorded rank; the uniform expectation is (NP + 1) / 2."""
    if not archive.records:
        raise EmptyArchive("no new-best-solution events recorded")
    return float(np.mean(archive.records))


def expected_average_rank(np_size: int) -> float:
    return (np_size + 1) / 2.0
