"""Seeded synthetic MTQE data for smoke runs and tests."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import Example, Task

_WORDS = (
    "the a cat dog house river city book letter garden window market road teacher child "
    "music morning evening table light green old new small large quiet fast slow bright "
    "reads writes opens walks sees finds keeps builds carries watches"
).split()


def make_examples(n: int, seed: int, gold_scale: float = 100.0) -> list[Example]:
    """``n`` MTQE examples with gold ~ Beta(2, 5) * ``gold_scale``.

    Hypotheses reuse a random share of the source tokens, so word overlap
    varies across examples.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        length = int(rng.integers(4, 16))
        src = [_WORDS[k] for k in rng.integers(0, len(_WORDS), size=length)]
        keep = rng.random()
        hyp = [w if rng.random() < keep else _WORDS[int(rng.integers(0, len(_WORDS)))] for w in src]
        gold = float(rng.beta(2.0, 5.0)) * gold_scale
        out.append(
            Example(
                id=f"ex{i:04d}",
                gold=round(gold, 6),
                task=Task.MTQE,
                fields={
                    "source": " ".join(src),
                    "hypothesis": " ".join(hyp),
                    "source_lang": "German",
                    "target_lang": "English",
                },
            )
        )
    return out


def write_jsonl(examples: list[Example], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            rec = {"id": ex.id, "gold": ex.gold, **ex.fields}
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


BUNDLED = Path(__file__).with_name("data") / "synthetic_mtqe.jsonl"
