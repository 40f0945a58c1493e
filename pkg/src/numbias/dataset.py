"""Task datasets and gold-score rescaling."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence


class DatasetError(ValueError):
    """Raised for unreadable or invalid dataset files."""


class Task(str, enum.Enum):
    MTQE = "mtqe"
    GECQE = "gecqe"
    LCP = "lcp"

    @property
    def fields(self) -> tuple[str, ...]:
        return TASK_FIELDS[self]


TASK_FIELDS: dict[Task, tuple[str, ...]] = {
    Task.MTQE: ("source", "hypothesis", "source_lang", "target_lang"),
    Task.GECQE: ("original", "corrected"),
    Task.LCP: ("sentence", "word"),
}

# Gold spans the rescaling maps from when the user does not override them.
DEFAULT_GOLD_SPAN: dict[Task, tuple[float, float]] = {
    Task.MTQE: (0.0, 100.0),
    Task.GECQE: (1.0, 4.0),
    Task.LCP: (0.0, 1.0),
}


@dataclass(frozen=True)
class ScoreRange:
    min: int
    max: int

    def __post_init__(self) -> None:
        if self.min < 0:
            raise ValueError(f"score range minimum must be >= 0, got {self.min}")
        if self.min >= self.max:
            raise ValueError(f"score range needs min < max, got {self.min}-{self.max}")

    @classmethod
    def parse(cls, text: str) -> "ScoreRange":
        """Parse ``"MIN:MAX"`` (``"MIN-MAX"`` is accepted too)."""
        sep = ":" if ":" in text else "-"
        lo, _, hi = text.partition(sep)
        try:
            return cls(int(lo), int(hi))
        except ValueError as exc:
            raise ValueError(f"invalid score range {text!r}: {exc}") from None

    @property
    def support(self) -> list[int]:
        return list(range(self.min, self.max + 1))

    def __str__(self) -> str:
        return f"{self.min}-{self.max}"


@dataclass(frozen=True)
class Example:
    id: str
    gold: float
    task: Task
    fields: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not math.isfinite(self.gold):
            raise DatasetError(f"example {self.id}: gold score must be finite")
        for name in self.task.fields:
            if not self.fields.get(name):
                raise DatasetError(f"example {self.id}: missing required field {name!r}")

    def __getattr__(self, name: str) -> str:
        # task fields read as attributes: ex.source, ex.word, ...
        try:
            return self.__dict__["fields"][name]
        except KeyError:
            raise AttributeError(name) from None


def load_dataset(path: str | Path, task: Task | str) -> list[Example]:
    """Read a JSON-lines dataset file for ``task``.

    Records need ``gold`` and the task's text fields; ``id`` is optional and
    defaults to the 1-based line number. Blank lines are skipped.
    """
    task = Task(task)
    path = Path(path)
    examples: list[Example] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed record ({exc.msg})") from None
            if not isinstance(record, dict):
                raise DatasetError(f"{path}:{lineno}: record is not an object")
            ex_id = str(record["id"]) if record.get("id") is not None else str(lineno)
            if ex_id in seen:
                raise DatasetError(f"{path}:{lineno}: duplicate id {ex_id!r}")
            seen.add(ex_id)
            if "gold" not in record:
                raise DatasetError(f"{path}:{lineno}: missing required field 'gold'")
            try:
                gold = float(record["gold"])
            except (TypeError, ValueError):
                raise DatasetError(f"{path}:{lineno}: gold is not a number") from None
            for name in task.fields:
                value = record.get(name)
                if not isinstance(value, str) or not value:
                    raise DatasetError(f"{path}:{lineno}: missing required field {name!r}")
            fields = {name: record[name] for name in task.fields}
            try:
                examples.append(Example(ex_id, gold, task, fields))
            except DatasetError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
    return examples


def load_gold(path: str | Path) -> list[float]:
    """Read only the ``gold`` column of a JSON-lines file (any task)."""
    path = Path(path)
    golds = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                golds.append(float(json.loads(line)["gold"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                raise DatasetError(f"{path}:{lineno}: no numeric gold value") from None
    if not golds:
        raise DatasetError(f"{path}: contains no gold scores")
    return golds


@dataclass(frozen=True)
class RescaledGold:
    values: list[float]
    n_clamped: int


def rescale_gold_report(
    gold: Iterable[float], source_lo: float, source_hi: float, score_range: ScoreRange
) -> RescaledGold:
    """Like :func:`rescale_gold` but also counts values clamped into the span."""
    if source_lo == source_hi:
        raise ValueError("degenerate gold span: source_lo == source_hi")
    if source_lo > source_hi:
        raise ValueError("gold span must satisfy source_lo < source_hi")
    scale = (score_range.max - score_range.min) / (source_hi - source_lo)
    out = []
    n_clamped = 0
    for g in gold:
        if g < source_lo or g > source_hi:
            n_clamped += 1
            g = min(max(g, source_lo), source_hi)
        v = score_range.min + (g - source_lo) * scale
        out.append(min(max(v, score_range.min), score_range.max))
    return RescaledGold(out, n_clamped)


def rescale_gold(
    gold: Sequence[float], source_lo: float, source_hi: float, score_range: ScoreRange
) -> list[float]:
    """Linearly map gold scores from ``[source_lo, source_hi]`` onto ``score_range``.

    Values outside the source span are clamped to it first.
    """
    return rescale_gold_report(gold, source_lo, source_hi, score_range).values
