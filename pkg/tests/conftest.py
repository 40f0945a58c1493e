import json

import numpy as np
import pytest

from numbias.dataset import Example, ScoreRange, Task

R09 = ScoreRange(0, 9)


def mtqe(ex_id, gold, source="a b", hypothesis="c d"):
    return Example(
        ex_id,
        float(gold),
        Task.MTQE,
        {"source": source, "hypothesis": hypothesis, "source_lang": "German", "target_lang": "English"},
    )


@pytest.fixture
def beta_gold_examples():
    """1,000 MTQE examples with gold ~ Beta(2, 5) on [0, 10] (score units)."""
    rng = np.random.default_rng(0)
    return [mtqe(str(i), g) for i, g in enumerate(rng.beta(2, 5, 1000) * 10)]


@pytest.fixture
def write_jsonl(tmp_path):
    def _write(records, name="data.jsonl"):
        path = tmp_path / name
        with open(path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write((rec if isinstance(rec, str) else json.dumps(rec)) + "\n")
        return path

    return _write


# acceptance criteria: one PASS/FAIL line each in the terminal summary
_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or rep.failed:
        _criteria[number] = (title, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status = _criteria[number]
        terminalreporter.write_line(f"[{status}] AC{number:<2} {title}")
