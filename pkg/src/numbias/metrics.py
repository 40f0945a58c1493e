"""Kurtosis, score histograms and Pearson correlation with a t-test."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import ScoreRange
from .scoring import round_half_up
from .special import student_t_sf2

SIGNIFICANCE_LEVEL = 0.01


class DegenerateDistributionError(ValueError):
    """Zero variance: the scores are fully concentrated on one value."""


class UndefinedCorrelationError(ValueError):
    """Correlation is undefined because one side has zero variance."""


def excess_kurtosis(xs: Sequence[float]) -> float:
    """Population (moment) excess kurtosis ``m4 / m2**2 - 3``."""
    x = np.asarray(xs, dtype=float)
    if x.size < 4:
        raise ValueError(f"kurtosis needs at least 4 values, got {x.size}")
    d = x - x.mean()
    m2 = np.mean(d * d)
    # relative cutoff keeps float noise on a constant vector from passing as variance
    if m2 <= (np.finfo(float).eps * max(1.0, float(np.max(np.abs(x))))) ** 2:
        raise DegenerateDistributionError("zero variance: fully concentrated")
    m4 = np.mean(d**4)
    return float(m4 / (m2 * m2) - 3.0)


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    p_value: float
    n: int

    @property
    def significant(self) -> bool:
        return significance_star(self.p_value)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> CorrelationResult:
    """Product-moment correlation with a two-tailed t-test on ``n - 2`` degrees of freedom."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    n = x.size
    if n < 3:
        raise ValueError(f"correlation needs at least 3 pairs, got {n}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("zero variance in one input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    # |r| can overshoot 1 by a few ulps on exactly linear data
    if abs(abs(r) - 1.0) <= 8 * np.finfo(float).eps:
        r = math.copysign(1.0, r)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        p = 0.0
    else:
        t = r * math.sqrt((n - 2) / (1.0 - r * r))
        p = student_t_sf2(t, n - 2)
    return CorrelationResult(r, p, n)


def significance_star(p: float) -> bool:
    return p < SIGNIFICANCE_LEVEL


@dataclass(frozen=True)
class ScoreDistribution:
    support: list[int]
    counts: list[int]

    @property
    def n(self) -> int:
        return sum(self.counts)

    def as_dict(self) -> dict[str, int]:
        return {str(s): c for s, c in zip(self.support, self.counts)}

    def argmax(self) -> int:
        return self.support[max(range(len(self.counts)), key=lambda i: (self.counts[i], self.support[i]))]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["support", "count"])
            w.writerows(zip(self.support, self.counts))


def histogram(scores: Sequence[float], score_range: ScoreRange) -> ScoreDistribution:
    support = score_range.support
    counts = [0] * len(support)
    for s in scores:
        k = round_half_up(s) - score_range.min
        if not 0 <= k < len(support):
            raise ValueError(f"score {s} lies outside {score_range}")
        counts[k] += 1
    return ScoreDistribution(support, counts)
