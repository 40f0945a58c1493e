"""Importance-weighted calibration of sampled judge scores.

The judge's label marginal ``p(y)`` is estimated from pooled samples, a Beta
prior fitted to gold scores gives the target marginal ``q(y)``, and each
example's samples are averaged with weights proportional to ``q(y)/p(y)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import digamma, polygamma

from .dataset import ScoreRange
from .scoring import FinalScore, SampleSet, mean
from .special import ConvergenceError, betainc

logger = logging.getLogger(__name__)

EDGE_EPS = 1e-6
MIN_GOLD_POINTS = 10
MAX_NEWTON_ITER = 200


class CalibrationError(ValueError):
    pass


class ZeroMarginalError(CalibrationError):
    """A sampled score has zero estimated marginal probability."""


@dataclass(frozen=True)
class LabelMarginal:
    support: list[int]
    prob: list[float]

    def __getitem__(self, y: int) -> float:
        return self.prob[y - self.support[0]]

    def as_dict(self) -> dict[str, float]:
        return {str(y): p for y, p in zip(self.support, self.prob)}


# q(y) has the same shape as p(y): one mass per integer score.
GoldPrior = LabelMarginal


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float
    domain_lo: float
    domain_hi: float
    converged: bool = True

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and self.beta > 0 and math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise CalibrationError(f"invalid Beta parameters alpha={self.alpha}, beta={self.beta}")
        if not self.domain_lo < self.domain_hi:
            raise CalibrationError("Beta domain needs domain_lo < domain_hi")


def estimate_marginal(pooled: Sequence[int], support: Sequence[int], smoothing: float = 1.0) -> LabelMarginal:
    """Smoothed relative frequencies of ``pooled`` over ``support``."""
    if smoothing < 0:
        raise CalibrationError("smoothing must be >= 0")
    support = list(support)
    index = {y: i for i, y in enumerate(support)}
    counts = [0] * len(support)
    for y in pooled:
        if y not in index:
            raise CalibrationError(f"pooled score {y} is outside the support")
        counts[index[y]] += 1
    denom = len(pooled) + smoothing * len(support)
    if denom == 0:
        raise CalibrationError("cannot estimate a marginal from an empty pool without smoothing")
    prob = [(c + smoothing) / denom for c in counts]
    if smoothing == 0 and any(p == 0 for p in prob):
        logger.warning("label marginal has zero-probability scores; calibration will fail on them")
    return LabelMarginal(support, prob)


def pool_samples(sample_sets: Sequence[SampleSet], size: int, rng: np.random.Generator) -> list[int]:
    """Draw ``size`` rounded samples: a uniform example, then a uniform sample from it."""
    usable = [s.rounded for s in sample_sets if s.n_valid]
    if not usable:
        return []
    picks = rng.integers(0, len(usable), size=size)
    out = []
    for k in picks:
        row = usable[int(k)]
        out.append(row[int(rng.integers(0, len(row)))])
    return out


def _normalize(values: Iterable[float], score_range: ScoreRange) -> np.ndarray:
    width = score_range.max + 1 - score_range.min
    return (np.asarray(list(values), dtype=float) - score_range.min) / width


def moment_estimate(u: np.ndarray) -> tuple[float, float]:
    m = float(u.mean())
    v = float(u.var())
    if v <= 0 or u.min() == u.max():
        raise CalibrationError("gold scores have zero variance; Beta fit undefined")
    common = m * (1 - m) / v - 1
    if common <= 0:
        # variance too large for any Beta; fall back to a flat-ish start
        common = 1.0
    return m * common, (1 - m) * common


def fit_beta(gold: Sequence[float], score_range: ScoreRange) -> BetaParams:
    """Maximum-likelihood Beta fit to gold scores on ``[min, max + 1]``."""
    if len(gold) < MIN_GOLD_POINTS:
        raise CalibrationError(f"Beta fit needs at least {MIN_GOLD_POINTS} gold values, got {len(gold)}")
    u = np.clip(_normalize(gold, score_range), EDGE_EPS, 1 - EDGE_EPS)
    a0, b0 = moment_estimate(u)
    s1 = float(np.mean(np.log(u)))
    s2 = float(np.mean(np.log1p(-u)))

    def loglik(a: float, b: float) -> float:
        return (a - 1) * s1 + (b - 1) * s2 - (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))

    a, b = a0, b0
    for _ in range(MAX_NEWTON_ITER):
        dab = float(digamma(a + b))
        g = np.array([s1 - float(digamma(a)) + dab, s2 - float(digamma(b)) + dab])
        tab = float(polygamma(1, a + b))
        hess = np.array([[tab - float(polygamma(1, a)), tab], [tab, tab - float(polygamma(1, b))]])
        try:
            step = np.linalg.solve(hess, -g)
        except np.linalg.LinAlgError:
            break
        # halve until the step stays positive and does not lower the likelihood
        t = 1.0
        base = loglik(a, b)
        while t > 1e-10:
            na, nb = a + t * step[0], b + t * step[1]
            if na > 0 and nb > 0 and loglik(na, nb) >= base - 1e-12:
                break
            t /= 2
        else:
            break
        a, b = na, nb
        if abs(t * step[0]) <= 1e-10 * a and abs(t * step[1]) <= 1e-10 * b:
            return BetaParams(float(a), float(b), score_range.min, score_range.max + 1)
    logger.warning("Beta MLE did not converge; using method-of-moments estimate")
    return BetaParams(float(a0), float(b0), score_range.min, score_range.max + 1, converged=False)


def interval_masses(params: BetaParams, score_range: ScoreRange) -> GoldPrior:
    """Integer-score masses: the Beta CDF differenced over ``(y, y+1]``."""
    width = params.domain_hi - params.domain_lo
    cdf = []
    for t in range(score_range.min, score_range.max + 2):
        x = min(max((t - params.domain_lo) / width, 0.0), 1.0)
        try:
            cdf.append(betainc(params.alpha, params.beta, x))
        except ConvergenceError as exc:
            raise CalibrationError(str(exc)) from exc
    return LabelMarginal(score_range.support, [hi - lo for lo, hi in zip(cdf, cdf[1:])])


def calibration_weights(samples: Sequence[int], p: LabelMarginal, q: GoldPrior) -> list[float]:
    ratios = []
    for y in samples:
        py = p[y]
        if py <= 0:
            raise ZeroMarginalError(f"p({y}) is zero; enable smoothing")
        ratios.append(q[y] / py)
    total = math.fsum(ratios)
    if total <= 0:
        raise CalibrationError("all calibration weights are zero (q vanishes on every sample)")
    return [r / total for r in ratios]


def calibrate_score(samples: Sequence[int], p: LabelMarginal, q: GoldPrior) -> float:
    """Weighted average of ``samples`` with weights ``q(y)/p(y)`` normalised to 1."""
    if not samples:
        raise CalibrationError("calibration needs at least one sample")
    weights = calibration_weights(samples, p, q)
    if len(set(weights)) == 1:
        # equal weights: return the plain mean bit-for-bit
        return mean(samples)
    value = math.fsum(w * y for w, y in zip(weights, samples))
    return min(max(value, min(samples)), max(samples))


def calibrate_dataset(
    sample_sets: Sequence[SampleSet], p: LabelMarginal, q: GoldPrior
) -> list[FinalScore]:
    out = []
    for s in sample_sets:
        if not s.n_valid:
            out.append(FinalScore(s.example_id, None, 0))
        else:
            out.append(FinalScore(s.example_id, calibrate_score(s.rounded, p, q), s.n_valid))
    return out


def model_marginal_as_prior(p: LabelMarginal) -> GoldPrior:
    """Use ``p`` itself as the target (identity calibration, for smoke checks)."""
    return LabelMarginal(list(p.support), list(p.prob))
