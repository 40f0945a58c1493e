"""Mitigation sweeps and input-feature analysis against the mode ratio."""

from __future__ import annotations

import enum
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence, Union

from . import metrics
from .dataset import Example, ScoreRange, Task
from .judge import GenerationConfig, Judge
from .pipeline import DEGENERATE, UNDEFINED, Run, generate, score_metrics
from .prompting import PromptTemplate

logger = logging.getLogger(__name__)

DEFAULT_TEMPERATURES = (0.4, 0.7, 1.0, 1.3)
DEFAULT_RANGES = (ScoreRange(1, 5), ScoreRange(0, 9), ScoreRange(1, 100))


class Axis(str, enum.Enum):
    TEMPERATURE = "temperature"
    RANGE = "range"


@dataclass(frozen=True)
class SweepSpec:
    axis: Axis = Axis.TEMPERATURE
    temperatures: tuple[float, ...] = DEFAULT_TEMPERATURES
    ranges: tuple[ScoreRange, ...] = DEFAULT_RANGES
    fixed_temperature: float = 0.7
    fixed_range: ScoreRange = ScoreRange(0, 9)

    def __post_init__(self) -> None:
        if not self.settings():
            raise ValueError(f"sweep over {self.axis.value} has no settings")

    def settings(self) -> list[tuple[ScoreRange, float]]:
        if self.axis is Axis.TEMPERATURE:
            return [(self.fixed_range, t) for t in self.temperatures]
        return [(r, self.fixed_temperature) for r in self.ranges]

    def label(self, score_range: ScoreRange, temperature: float) -> str:
        if self.axis is Axis.TEMPERATURE:
            return f"T={temperature:g}"
        return f"range={score_range}"


@dataclass
class SettingResult:
    setting: str
    score_range: ScoreRange
    temperature: float
    kurtosis: float | str = UNDEFINED
    r: float | str = UNDEFINED
    p: float | str = UNDEFINED
    n_valid: int = 0
    error: Optional[str] = None
    run: Optional[Run] = field(default=None, repr=False)


@dataclass
class SweepResult:
    spec: SweepSpec
    settings: list[SettingResult]
    best_setting_by_r: Optional[str]


def best_by_r(settings: Sequence[SettingResult]) -> Optional[str]:
    best = None
    for s in settings:
        if isinstance(s.r, float) and (best is None or s.r > best.r):
            best = s
    return None if best is None else best.setting


JudgeSource = Union[Judge, Callable[[ScoreRange], Judge]]


def run_sweep(
    examples: Sequence[Example],
    template: PromptTemplate,
    judge: JudgeSource,
    spec: SweepSpec,
    gold_span: tuple[float, float],
    n_samples: int = 10,
    max_tokens: int = 5,
    parallelism: int = 1,
) -> SweepResult:
    """Run the full pipeline once per setting.

    ``judge`` may be a factory called with each setting's range, for backends
    whose behaviour depends on the range (the synthetic judge's mode).
    """
    results = []
    for score_range, temperature in spec.settings():
        label = spec.label(score_range, temperature)
        res = SettingResult(label, score_range, temperature)
        try:
            backend = judge if hasattr(judge, "sample") else judge(score_range)
            cfg = GenerationConfig(n_samples=n_samples, temperature=temperature, max_tokens=max_tokens)
            run = generate(examples, template, backend, score_range, cfg, gold_span, parallelism)
            m = score_metrics(run.gold, run.finals)
            res.kurtosis, res.r, res.p, res.n_valid = m["kurtosis_model"], m["r"], m["p"], m["n_valid"]
            res.run = run
        except Exception as exc:  # one bad setting must not abort the sweep
            logger.warning("sweep setting %s failed: %s", label, exc)
            res.error = f"{type(exc).__name__}: {exc}"
        results.append(res)
    return SweepResult(spec, results, best_by_r(results))


def _tokens(text: str) -> list[str]:
    return text.lower().split()


def word_overlap(a: str, b: str) -> float:
    """Jaccard ratio of the lowercased whitespace token sets."""
    ta, tb = set(_tokens(a)), set(_tokens(b))
    if not ta and not tb:
        return 1.0
    return len(ta & tb) / len(ta | tb)


class LogprobProvider(Protocol):
    def token_logprobs(self, text: str) -> Sequence[float]: ...


class ConstantLogprobProvider:
    """Every whitespace token gets the same log-probability."""

    def __init__(self, logprob: float):
        self.logprob = logprob

    def token_logprobs(self, text: str) -> list[float]:
        return [self.logprob] * len(text.split())


class UnigramLogprobProvider:
    """Add-one unigram model over lowercased whitespace tokens of a corpus."""

    def __init__(self, corpus: Sequence[str]):
        self.counts = Counter(tok for text in corpus for tok in _tokens(text))
        self.total = sum(self.counts.values())
        self.vocab = len(self.counts) + 1  # +1 for unseen tokens

    def token_logprobs(self, text: str) -> list[float]:
        denom = self.total + self.vocab
        return [math.log((self.counts.get(tok, 0) + 1) / denom) for tok in _tokens(text)]


def perplexity(text: str, provider: Optional[LogprobProvider]) -> Optional[float]:
    if provider is None or not text.strip():
        return None
    try:
        lps = list(provider.token_logprobs(text))
    except Exception as exc:
        logger.warning("perplexity provider failed: %s", exc)
        return None
    if not lps:
        return None
    return math.exp(-math.fsum(lps) / len(lps))


@dataclass(frozen=True)
class FeatureVector:
    source_length: int
    word_overlap: float
    source_ppl: Optional[float] = None
    target_ppl: Optional[float] = None
    overall_ppl: Optional[float] = None


FEATURE_NAMES = ("source_length", "word_overlap", "source_ppl", "target_ppl", "overall_ppl")

_SIDES = {
    Task.MTQE: ("source", "hypothesis"),
    Task.GECQE: ("original", "corrected"),
    Task.LCP: ("sentence", "word"),
}


def text_pair(example: Example) -> tuple[str, str]:
    src, tgt = _SIDES[example.task]
    return example.fields[src], example.fields[tgt]


def compute_features(example: Example, provider: Optional[LogprobProvider] = None) -> FeatureVector:
    src, tgt = text_pair(example)
    return FeatureVector(
        source_length=len(src.split()),
        word_overlap=word_overlap(src, tgt),
        source_ppl=perplexity(src, provider),
        target_ppl=perplexity(tgt, provider),
        overall_ppl=perplexity(src + " " + tgt, provider),
    )


@dataclass(frozen=True)
class FeatureCorrelation:
    feature: str
    r: float | str
    p: float | str
    n: int

    @property
    def significant(self) -> bool:
        return isinstance(self.p, float) and metrics.significance_star(self.p)


def feature_correlation(
    features: Sequence[FeatureVector], mode_ratios: Sequence[Optional[float]]
) -> list[FeatureCorrelation]:
    """Pearson r of each feature against the mode ratio, dropping missing pairs per feature."""
    if len(features) != len(mode_ratios):
        raise ValueError("features and mode ratios must be aligned")
    table = []
    for name in FEATURE_NAMES:
        xs, ys = [], []
        for fv, mr in zip(features, mode_ratios):
            x = getattr(fv, name)
            if x is not None and mr is not None:
                xs.append(float(x))
                ys.append(mr)
        try:
            res = metrics.pearson(xs, ys)
            table.append(FeatureCorrelation(name, res.r, res.p_value, res.n))
        except ValueError:
            table.append(FeatureCorrelation(name, UNDEFINED, UNDEFINED, len(xs)))
    return table


def kurtosis_rank(value: float | str) -> float:
    """Order key for kurtosis values where full concentration counts as infinite."""
    if value == DEGENERATE:
        return math.inf
    if isinstance(value, str):
        return math.nan
    return value


__all__ = [
    "Axis",
    "SweepSpec",
    "SweepResult",
    "SettingResult",
    "run_sweep",
    "word_overlap",
    "perplexity",
    "compute_features",
    "feature_correlation",
    "FeatureVector",
    "FeatureCorrelation",
    "ConstantLogprobProvider",
    "UnigramLogprobProvider",
    "kurtosis_rank",
]
