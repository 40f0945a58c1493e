"""Generate -> score -> metrics for one setting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import metrics
from .dataset import Example, ScoreRange, rescale_gold_report
from .judge import GenerationConfig, Judge, JudgeError, JudgeRequest, sample_all
from .prompting import PromptTemplate, render_prompt
from .scoring import FinalScore, SampleSet, aggregate, dataset_mode, mode_ratio

DEGENERATE = "DEGENERATE"
UNDEFINED = "UNDEFINED"


@dataclass
class Run:
    """Scored generations for one (range, temperature) setting."""

    score_range: ScoreRange
    cfg: GenerationConfig
    examples: list[Example]
    gold: list[float]  # rescaled into score_range
    n_clamped_gold: int
    raw_texts: dict[str, list[str]]
    sample_sets: list[SampleSet]
    finals: list[FinalScore]
    errors: dict[str, str] = field(default_factory=dict)

    @property
    def valid_pairs(self) -> tuple[list[float], list[float]]:
        gold, model = [], []
        for g, f in zip(self.gold, self.finals):
            if f.value is not None:
                gold.append(g)
                model.append(f.value)
        return gold, model

    def mode(self) -> Optional[int]:
        try:
            return dataset_mode(self.sample_sets)
        except ValueError:
            return None

    def mode_ratios(self, mode: Optional[int] = None) -> list[Optional[float]]:
        mode = self.mode() if mode is None else mode
        if mode is None:
            return [None] * len(self.sample_sets)
        return [mode_ratio(s, mode) for s in self.sample_sets]


def generate(
    examples: Sequence[Example],
    template: PromptTemplate,
    judge: Judge,
    score_range: ScoreRange,
    cfg: GenerationConfig,
    gold_span: tuple[float, float],
    parallelism: int = 1,
) -> Run:
    rescaled = rescale_gold_report([ex.gold for ex in examples], gold_span[0], gold_span[1], score_range)
    requests = [
        JudgeRequest(ex.id, render_prompt(template, ex, score_range), g, score_range)
        for ex, g in zip(examples, rescaled.values)
    ]
    results = sample_all(judge, requests, cfg, parallelism)
    raw: dict[str, list[str]] = {}
    errors: dict[str, str] = {}
    sample_sets = []
    for ex, res in zip(examples, results):
        if isinstance(res, JudgeError):
            errors[ex.id] = str(res)
            texts: list[str] = []
        else:
            texts = res.texts
        raw[ex.id] = texts
        sample_sets.append(SampleSet.from_texts(ex.id, texts, score_range))
    return Run(
        score_range=score_range,
        cfg=cfg,
        examples=list(examples),
        gold=rescaled.values,
        n_clamped_gold=rescaled.n_clamped,
        raw_texts=raw,
        sample_sets=sample_sets,
        finals=[aggregate(s) for s in sample_sets],
        errors=errors,
    )


def kurtosis_or_flag(xs: Sequence[float]) -> float | str:
    try:
        return metrics.excess_kurtosis(xs)
    except metrics.DegenerateDistributionError:
        return DEGENERATE
    except ValueError:
        return UNDEFINED


def correlation_or_flag(gold: Sequence[float], model: Sequence[float]) -> dict:
    try:
        res = metrics.pearson(gold, model)
    except ValueError:
        return {"r": UNDEFINED, "p": UNDEFINED, "significant": False}
    return {"r": res.r, "p": res.p_value, "significant": res.significant}


def score_metrics(gold: Sequence[float], finals: Sequence[FinalScore]) -> dict:
    """Kurtosis of model and gold scores plus their correlation, over valid examples."""
    g, m = [], []
    for gv, f in zip(gold, finals):
        if f.value is not None:
            g.append(gv)
            m.append(f.value)
    out = {
        "n_valid": len(m),
        "kurtosis_model": kurtosis_or_flag(m),
        "kurtosis_gold": kurtosis_or_flag(list(gold)),
    }
    out.update(correlation_or_flag(g, m))
    return out
