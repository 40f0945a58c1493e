"""Evaluation prompt templates and rendering."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .dataset import Example, ScoreRange, Task


class TemplateError(ValueError):
    """Raised when a template placeholder cannot be resolved."""


_PLACEHOLDER = re.compile(r"\{\{([^{}]+)\}\}")

MTQE_TEMPLATE = """\
Please analyze the given source and translated sentences and output a translation quality score on a continuous scale ranging from {{min score}} to {{max score}}.
Translation quality should be evaluated based on both fluency and adequacy.
A score close to {{min score}} indicates a low quality translation, while a score close to {{max score}} indicates a high quality translation.
Do not provide any explanations or text apart from the score.

{{source language}} Sentence: {{source}}
{{target language}} Sentence: {{hypothesis}}
Score:"""

GECQE_TEMPLATE = """\
Please analyze the given original and corrected sentences and output a grammatical error correction quality score on a integer scale ranging from {{min score}} to {{max score}}.
A score close to {{min score}} indicates a low quality correction , while a score close to {{max score}} indicates a high quality correction.
Do not provide any explanations or text apart from the score.

Original sentence: {{original}}
Corrected sentence: {{corrected}}
Score:"""

LCP_TEMPLATE = """\
Please analyze the given sentence and word included in the sentence and output a complexity score on a integer scale ranging from {{min score}} to {{max score}}.
The complexity score should be evaluated based on the difficulty of the word included in the sentence.
A score closer to {{min score}} indicates that the word is easy, while a score closer to {{max score}} indicates that the word is difficult.
Do not provide any explanations or text apart from the score.

Sentence: {{sentence}}
Word: {{word}}
Score:"""


@dataclass(frozen=True)
class PromptTemplate:
    task: Task
    body: str

    def __post_init__(self) -> None:
        if self.body.rstrip().splitlines()[-1:] != ["Score:"]:
            raise TemplateError("template must end with the line 'Score:'")

    @property
    def placeholders(self) -> list[str]:
        return sorted({m.group(1).strip() for m in _PLACEHOLDER.finditer(self.body)})

    @classmethod
    def from_file(cls, path: str | Path, task: Task | str) -> "PromptTemplate":
        return cls(Task(task), Path(path).read_text(encoding="utf-8"))


BUILTIN_TEMPLATES = {
    Task.MTQE: PromptTemplate(Task.MTQE, MTQE_TEMPLATE),
    Task.GECQE: PromptTemplate(Task.GECQE, GECQE_TEMPLATE),
    Task.LCP: PromptTemplate(Task.LCP, LCP_TEMPLATE),
}

# Alternative spellings accepted for the task fields.
_ALIASES = {
    "source language": "source_lang",
    "target language": "target_lang",
    "src": "source",
    "hyp": "hypothesis",
    "org": "original",
    "cor": "corrected",
    "sent": "sentence",
}


def builtin_template(task: Task | str) -> PromptTemplate:
    return BUILTIN_TEMPLATES[Task(task)]


def _format_bound(value: int) -> str:
    return str(int(value))


def render_prompt(template: PromptTemplate, example: Example, score_range: ScoreRange) -> str:
    if template.task is not example.task:
        raise TemplateError(
            f"template is for {template.task.value} but example {example.id} is {example.task.value}"
        )
    values = {
        "min score": _format_bound(score_range.min),
        "max score": _format_bound(score_range.max),
    }

    def substitute(match: re.Match[str]) -> str:
        name = match.group(1).strip()
        if name in values:
            return values[name]
        key = _ALIASES.get(name, name)
        if key in example.fields:
            return example.fields[key]
        raise TemplateError(f"unresolved placeholder {{{{{name}}}}}")

    text = _PLACEHOLDER.sub(substitute, template.body)
    return text.rstrip()
