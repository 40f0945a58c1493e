import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from numbias.dataset import DatasetError, ScoreRange, Task, load_dataset, rescale_gold, rescale_gold_report
from numbias.metrics import excess_kurtosis

MT = {"source": "Hallo Welt", "hypothesis": "Hello world", "source_lang": "German", "target_lang": "English"}


def test_load_one_mtqe_line(write_jsonl):
    path = write_jsonl([{**MT, "gold": 77.0}])
    [ex] = load_dataset(path, Task.MTQE)
    assert ex.gold == 77.0
    assert ex.id == "1"
    assert ex.source == "Hallo Welt"


def test_empty_file(write_jsonl):
    assert load_dataset(write_jsonl([]), "mtqe") == []


def test_duplicate_ids_rejected(write_jsonl):
    path = write_jsonl([{**MT, "id": "a", "gold": 1}, {**MT, "id": "a", "gold": 2}])
    with pytest.raises(DatasetError, match="duplicate id"):
        load_dataset(path, Task.MTQE)


def test_malformed_line_names_line_number(write_jsonl):
    path = write_jsonl([{**MT, "gold": 1}, "{not json"])
    with pytest.raises(DatasetError, match=":2:"):
        load_dataset(path, Task.MTQE)


def test_missing_field_named(write_jsonl):
    path = write_jsonl([{"original": "x", "gold": 3}])
    with pytest.raises(DatasetError, match="'corrected'"):
        load_dataset(path, Task.GECQE)


def test_lcp_and_ids_kept(write_jsonl):
    path = write_jsonl([{"id": 5, "sentence": "A cat sat.", "word": "cat", "gold": 0.25}])
    [ex] = load_dataset(path, "lcp")
    assert (ex.id, ex.word, ex.gold) == ("5", "cat", 0.25)


def test_non_finite_gold_rejected(write_jsonl):
    path = write_jsonl(['{"sentence": "s", "word": "w", "gold": NaN}'])
    with pytest.raises(DatasetError):
        load_dataset(path, "lcp")


def test_rescale_examples():
    assert rescale_gold([0, 50, 100], 0, 100, ScoreRange(0, 9)) == [0, 4.5, 9]
    assert rescale_gold([77], 0, 100, ScoreRange(1, 5)) == pytest.approx([4.08], abs=1e-12)
    vals = [0.0, 3.5, 9.0, 7.25]
    assert rescale_gold(vals, 0, 9, ScoreRange(0, 9)) == vals


def test_rescale_clamps_and_counts():
    res = rescale_gold_report([-5, 50, 130], 0, 100, ScoreRange(0, 9))
    assert res.values == [0, 4.5, 9]
    assert res.n_clamped == 2


def test_degenerate_span():
    with pytest.raises(ValueError, match="degenerate"):
        rescale_gold([1], 3, 3, ScoreRange(0, 9))


def test_score_range_validation():
    with pytest.raises(ValueError):
        ScoreRange(5, 5)
    with pytest.raises(ValueError):
        ScoreRange(-1, 5)
    assert ScoreRange.parse("1:100") == ScoreRange(1, 100)


golds = st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=50)
ranges = st.sampled_from([ScoreRange(1, 5), ScoreRange(0, 9), ScoreRange(1, 100)])


@given(st.floats(0, 100), st.floats(0, 100), ranges)
def test_rescale_monotone(a, b, r):
    lo, hi = sorted((a, b))
    out = rescale_gold([lo, hi], 0, 100, r)
    assert out[0] <= out[1]


@given(golds, ranges)
def test_rescale_inverse_roundtrip(gold, r):
    out = rescale_gold(gold, 0, 100, r)
    back = [(v - r.min) * 100 / (r.max - r.min) for v in out]
    assert np.allclose(back, gold, rtol=0, atol=1e-12)


def test_kurtosis_unchanged_by_rescale():
    gold = np.random.default_rng(3).beta(2, 5, 500) * 100
    out = rescale_gold(list(gold), 0, 100, ScoreRange(0, 9))
    assert excess_kurtosis(out) == pytest.approx(excess_kurtosis(gold), abs=1e-9)
