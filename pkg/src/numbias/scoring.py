"""Parse, clip and average judge generations into per-example scores."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .dataset import ScoreRange

_NUMBER = re.compile(r"[-+]?(?:\d+(?:\.\d+)?|\.\d+)")


def parse_score(text: str) -> Optional[float]:
    """Return the first decimal number in ``text``, or None if there is none."""
    match = _NUMBER.search(text.strip())
    if match is None:
        return None
    return float(match.group(0))


def clip(score: float, score_range: ScoreRange) -> float:
    if not math.isfinite(score):
        raise ValueError(f"cannot clip non-finite score {score!r}")
    return min(max(score, score_range.min), score_range.max)


def round_half_up(x: float) -> int:
    # half-up rounding; Python's round() is half-to-even
    return math.floor(x + 0.5)


@dataclass(frozen=True)
class SampleSet:
    example_id: str
    parsed: list[float]
    n_raw: int
    clipped: list[float]

    @classmethod
    def from_texts(cls, example_id: str, texts: Sequence[str], score_range: ScoreRange) -> "SampleSet":
        parsed = [v for v in map(parse_score, texts) if v is not None and math.isfinite(v)]
        return cls(example_id, parsed, len(texts), [clip(v, score_range) for v in parsed])

    @property
    def n_valid(self) -> int:
        return len(self.clipped)

    @property
    def rounded(self) -> list[int]:
        return [round_half_up(v) for v in self.clipped]


@dataclass(frozen=True)
class FinalScore:
    example_id: str
    value: Optional[float]
    n_valid: int

    @property
    def absent(self) -> bool:
        return self.value is None


def mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def aggregate(samples: SampleSet) -> FinalScore:
    if not samples.clipped:
        return FinalScore(samples.example_id, None, 0)
    return FinalScore(samples.example_id, mean(samples.clipped), samples.n_valid)


def pooled_counts(sample_sets: Iterable[SampleSet]) -> Counter[int]:
    counts: Counter[int] = Counter()
    for s in sample_sets:
        counts.update(s.rounded)
    return counts


def dataset_mode(sample_sets: Iterable[SampleSet]) -> int:
    """Most frequent rounded score across all examples; ties go to the larger value."""
    counts = pooled_counts(sample_sets)
    if not counts:
        raise ValueError("no valid scores in any example; mode is undefined")
    return max(counts, key=lambda v: (counts[v], v))


def mode_ratio(samples: SampleSet, mode: int) -> Optional[float]:
    if not samples.clipped:
        return None
    hits = sum(1 for v in samples.rounded if v == mode)
    return hits / samples.n_valid
