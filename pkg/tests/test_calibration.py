import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from numbias.calibration import (
    CalibrationError,
    LabelMarginal,
    ZeroMarginalError,
    calibrate_dataset,
    calibrate_score,
    calibration_weights,
    estimate_marginal,
    fit_beta,
    interval_masses,
    moment_estimate,
    pool_samples,
    BetaParams,
)
from numbias.dataset import ScoreRange
from numbias.judge import GenerationConfig, SyntheticJudge, SyntheticJudgeParams
from numbias.metrics import excess_kurtosis
from numbias.pipeline import generate
from numbias.prompting import builtin_template
from numbias.scoring import SampleSet, aggregate

from oracles import adaptive_simpson, beta_pdf, grid_search_beta_mle

R = ScoreRange(0, 9)
SUPPORT = R.support


def marginal(d):
    return LabelMarginal(SUPPORT, [d.get(y, 0.0) for y in SUPPORT])


def test_marginal_direct_frequencies():
    p = estimate_marginal([8] * 900 + [9] * 100, SUPPORT, smoothing=0)
    assert p[8] == 0.9 and p[9] == 0.1 and p[0] == 0.0


def test_marginal_add_one():
    p = estimate_marginal([8] * 900 + [9] * 100, SUPPORT, smoothing=1)
    assert p[0] == pytest.approx(1 / 1010, abs=1e-15)
    assert p[8] == pytest.approx(901 / 1010, abs=1e-15)
    assert sum(p.prob) == pytest.approx(1, abs=1e-9)


def test_marginal_empty_pool():
    assert estimate_marginal([], SUPPORT, 1).prob == [0.1] * 10
    with pytest.raises(CalibrationError):
        estimate_marginal([], SUPPORT, 0)
    with pytest.raises(CalibrationError):
        estimate_marginal([12], SUPPORT, 1)


def test_pool_samples_deterministic():
    sets = [SampleSet(str(i), [float(i)] * 3, 3, [float(i)] * 3) for i in range(10)]
    a = pool_samples(sets, 1000, np.random.default_rng(1))
    assert a == pool_samples(sets, 1000, np.random.default_rng(1))
    assert len(a) == 1000 and set(a) <= set(range(10))


def beta_draws(n=5000, seed=0):
    # Beta(2, 5) mapped onto the [0, 10) domain of the 0-9 range
    return np.random.default_rng(seed).beta(2, 5, n) * 10


def test_fit_beta_recovers_parameters_and_matches_grid_oracle():
    gold = beta_draws()
    fit = fit_beta(gold, R)
    assert 1.8 <= fit.alpha <= 2.2
    assert 4.5 <= fit.beta <= 5.5
    assert fit.converged and (fit.domain_lo, fit.domain_hi) == (0, 10)
    a, b = grid_search_beta_mle(np.clip(gold / 10, 1e-6, 1 - 1e-6))
    assert abs(fit.alpha - a) < 0.05 and abs(fit.beta - b) < 0.05


def test_fit_beta_symmetric_data():
    half = np.random.default_rng(4).beta(3, 3, 1000) * 10
    gold = np.concatenate([half, 10 - half])
    fit = fit_beta(np.clip(gold, 0, 9.999999), R)
    assert abs(fit.alpha - fit.beta) < 0.1


def test_moment_estimate_closed_form():
    u = np.random.default_rng(2).beta(2, 5, 300)
    mu, v = u.mean(), u.var()
    a0, b0 = moment_estimate(u)
    assert a0 == pytest.approx(mu * (mu * (1 - mu) / v - 1), rel=1e-12)
    assert b0 == pytest.approx((1 - mu) * (mu * (1 - mu) / v - 1), rel=1e-12)


def test_fit_beta_errors():
    with pytest.raises(CalibrationError, match="at least 10"):
        fit_beta([1.0] * 9, R)
    with pytest.raises(CalibrationError, match="zero variance"):
        fit_beta([4.0] * 20, R)


def test_interval_masses_uniform():
    q = interval_masses(BetaParams(1, 1, 0, 10), R)
    assert q.prob == pytest.approx([0.1] * 10, abs=1e-12)


@given(st.floats(0.2, 30), st.floats(0.2, 30))
def test_interval_masses_sum_to_one(a, b):
    q = interval_masses(BetaParams(a, b, 0, 10), R)
    assert abs(sum(q.prob) - 1) <= 1e-9
    assert all(m >= -1e-15 for m in q.prob)


def test_interval_masses_match_quadrature():
    q = interval_masses(BetaParams(2, 5, 0, 10), R)
    pdf = beta_pdf(2, 5)
    for y in SUPPORT:
        expected = adaptive_simpson(pdf, y / 10, (y + 1) / 10, tol=1e-10)
        assert q[y] == pytest.approx(expected, abs=1e-8)


def test_interval_masses_other_ranges():
    for r in (ScoreRange(1, 5), ScoreRange(1, 100)):
        q = interval_masses(BetaParams(2, 5, r.min, r.max + 1), r)
        assert len(q.prob) == r.max - r.min + 1
        assert sum(q.prob) == pytest.approx(1, abs=1e-9)


def test_calibrate_hand_case():
    p = marginal({8: 0.7, 9: 0.1})
    q = marginal({8: 0.2, 9: 0.3})
    w = calibration_weights([8, 8, 9], p, q)
    ratios = np.array([0.2 / 0.7, 0.2 / 0.7, 3.0])
    assert w == pytest.approx(list(ratios / ratios.sum()), abs=1e-15)
    # 221/25 by hand: (2/7 * 8 * 2 + 3 * 9) / (4/7 + 3)
    assert calibrate_score([8, 8, 9], p, q) == pytest.approx(8.84, abs=1e-4)
    assert calibrate_score([8, 8, 9], p, q) == pytest.approx(221 / 25, abs=1e-12)


def test_calibrate_identity_and_fixed_point():
    p = estimate_marginal([3, 4, 5, 8, 8, 8], SUPPORT, 1)
    assert calibrate_score([8, 3, 5], p, p) == aggregate(SampleSet("e", [8, 3, 5], 3, [8, 3, 5])).value
    q = interval_masses(BetaParams(2, 5, 0, 10), R)
    assert calibrate_score([6, 6, 6], p, q) == 6


def test_calibrate_zero_marginal():
    p = marginal({8: 1.0})
    with pytest.raises(ZeroMarginalError):
        calibrate_score([8, 9], p, marginal({8: 0.5, 9: 0.5}))


samples = st.lists(st.integers(0, 9), min_size=1, max_size=15)
probs = st.lists(st.floats(0.01, 1), min_size=10, max_size=10)


def normalized(xs):
    s = sum(xs)
    return LabelMarginal(SUPPORT, [x / s for x in xs])


@given(samples, probs, probs, st.randoms())
def test_calibration_properties(ys, pr, qr, rnd):
    p, q = normalized(pr), normalized(qr)
    w = calibration_weights(ys, p, q)
    assert all(x >= 0 for x in w) and abs(sum(w) - 1) <= 1e-12
    value = calibrate_score(ys, p, q)
    assert min(ys) <= value <= max(ys)
    shuffled = list(ys)
    rnd.shuffle(shuffled)
    assert calibrate_score(shuffled, p, q) == pytest.approx(value, abs=1e-12)


@given(st.lists(samples, min_size=1, max_size=10), probs)
def test_q_equals_p_reproduces_aggregate(rows, pr):
    p = normalized(pr)
    sets = [SampleSet(str(i), [float(v) for v in r], len(r), [float(v) for v in r]) for i, r in enumerate(rows)]
    assert [f.value for f in calibrate_dataset(sets, p, p)] == [aggregate(s).value for s in sets]


def test_calibrate_dataset_absent_and_uniform():
    sets = [SampleSet("a", [], 10, []), SampleSet("b", [2.0, 7.0], 10, [2.0, 7.0])]
    uniform = LabelMarginal(SUPPORT, [0.1] * 10)
    out = calibrate_dataset(sets, uniform, uniform)
    assert out[0].value is None and out[0].n_valid == 0
    assert out[1].value == 4.5


def test_single_value_examples_unchanged():
    sets = [SampleSet(str(v), [float(v)] * 5, 5, [float(v)] * 5) for v in range(10)]
    p = estimate_marginal([1, 8, 8], SUPPORT, 1)
    q = interval_masses(BetaParams(2, 5, 0, 10), R)
    assert [f.value for f in calibrate_dataset(sets, p, q)] == [aggregate(s).value for s in sets]


def test_calibration_lowers_kurtosis_on_biased_judge(beta_gold_examples):
    judge = SyntheticJudge(SyntheticJudgeParams(mode_value=8, base_concentration=0.9, seed=0))
    run = generate(beta_gold_examples, builtin_template("mtqe"), judge, R, GenerationConfig(), (0, 9))
    p = estimate_marginal(pool_samples(run.sample_sets, 1000, np.random.default_rng(0)), SUPPORT, 1)
    q = interval_masses(fit_beta(run.gold, R), R)
    raw = excess_kurtosis([f.value for f in run.finals])
    cal = excess_kurtosis([f.value for f in calibrate_dataset(run.sample_sets, p, q)])
    assert cal < raw
