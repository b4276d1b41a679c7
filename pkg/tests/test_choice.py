from __future__ import annotations

import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crosslab import synth
from crosslab.choice import (
    ChoiceFit,
    ChoiceObservation,
    SizeBin,
    Weighting,
    _softmax,
    build_observations,
    choice_probabilities,
    counterfactual,
    crossover_points,
    empirical_quarterly_distribution,
    fit_conditional_logit,
    log_likelihood,
    make_weights,
    predicted_quarterly_distribution,
    size_bin,
    utilities,
)
from crosslab.dataset import BoatType, DepartureCountry, IncidentRecord
from crosslab.errors import (
    CrossLabError,
    DegenerateWeights,
    NotIdentified,
    RescueProbabilityZero,
    Separation,
)
from crosslab.periods import Quarter
from crosslab.series import QuarterPoint

PUBLISHED_FIT = ChoiceFit.from_coefficients(1.786, 3.849, -3.587, -6.511)

# Rubber-boat incidents per quarter 2016Q1..2019Q4 in the (1-50, 51-100, 101+) bins
RUBBER_COUNTS_BY_QUARTER = [
    (0, 16, 118), (9, 15, 243), (16, 45, 308), (20, 30, 250),
    (12, 22, 120), (6, 48, 278), (7, 11, 92), (5, 17, 42),
    (5, 13, 17), (4, 8, 33), (0, 0, 1), (3, 0, 0),
    (3, 0, 0), (4, 4, 0), (5, 6, 1), (3, 8, 3),
]


def _quarters(n, start=Quarter(2016, 1)):
    idx = start.year * 4 + start.quarter - 1
    return [Quarter((idx + i) // 4, (idx + i) % 4 + 1) for i in range(n)]


def rubber_count_observations():
    obs = []
    for q, counts in zip(_quarters(16), RUBBER_COUNTS_BY_QUARTER):
        p = 0.1 + 0.04 * (q.year - 2016) * 4 + 0.01 * q.quarter  # any p: alpha-only fits ignore it
        for b, c in zip(SizeBin, counts):
            obs += [ChoiceObservation(f"{q}-{b.value}-{j}", q, b, p) for j in range(c)]
    return obs


def test_size_bins_closed_on_right():
    assert [size_bin(n) for n in (1, 50, 51, 100, 101, 500)] == [
        SizeBin.SMALL, SizeBin.SMALL, SizeBin.MID, SizeBin.MID, SizeBin.LARGE, SizeBin.LARGE]
    with pytest.raises(CrossLabError):
        size_bin(0)


def test_choice_probability_examples():
    np.testing.assert_allclose(choice_probabilities({1: 0, 2: 0}, {1: 0, 2: 0}, 0.3), [1 / 3] * 3, rtol=1e-15)
    p0 = PUBLISHED_FIT.probabilities(0.0)
    expected = np.array([1, math.exp(1.786), math.exp(3.849)])
    np.testing.assert_allclose(p0, expected / expected.sum(), rtol=1e-12)
    assert np.argmax(p0) == SizeBin.LARGE
    assert np.argmax(PUBLISHED_FIT.probabilities(0.75)) == SizeBin.SMALL
    with pytest.raises(CrossLabError):
        PUBLISHED_FIT.probabilities(1.2)


def test_probabilities_are_overflow_safe():
    big = choice_probabilities({1: 800.0, 2: 900.0}, {1: 0.0, 2: 0.0}, 0.5)
    assert np.all(np.isfinite(big))
    np.testing.assert_allclose(big, [math.exp(-900) / 1, math.exp(-100), 1.0], rtol=1e-12, atol=1e-320)


@given(st.lists(st.floats(-20, 20), min_size=4, max_size=4), st.sampled_from([0, 0.25, 0.5, 0.75, 1.0]),
       st.floats(-500, 500))
@settings(max_examples=1000, deadline=None)
def test_probability_vectors_sum_to_one_and_shift_invariant(c, p, shift):
    a = {SizeBin.MID: c[0], SizeBin.LARGE: c[1]}
    b = {SizeBin.MID: c[2], SizeBin.LARGE: c[3]}
    pr = choice_probabilities(a, b, p)
    assert abs(pr.sum() - 1.0) <= 1e-12
    assert np.all((pr >= 0) & (pr <= 1))
    v = utilities(a, b, p)
    np.testing.assert_allclose(_softmax(v + shift), pr, rtol=1e-9, atol=1e-300)


def test_crossovers_from_published_fit():
    cx = crossover_points(PUBLISHED_FIT)
    assert cx[(SizeBin.SMALL, SizeBin.LARGE)] == pytest.approx(3.849 / 6.511)
    assert cx[(SizeBin.SMALL, SizeBin.MID)] == pytest.approx(1.786 / 3.587)
    assert cx[(SizeBin.MID, SizeBin.LARGE)] == pytest.approx((3.849 - 1.786) / (6.511 - 3.587))
    par = ChoiceFit.from_coefficients(1.0, 2.0, -1.0, -1.0)
    assert crossover_points(par)[(SizeBin.MID, SizeBin.LARGE)] is None
    far = ChoiceFit.from_coefficients(5.0, 6.0, -1.0, -1.5)
    assert crossover_points(far)[(SizeBin.SMALL, SizeBin.MID)] is None


def test_make_weights():
    q1, q2 = Quarter(2016, 1), Quarter(2016, 2)
    obs = [ChoiceObservation(str(i), q1, SizeBin.SMALL, 0.5) for i in range(137)]
    obs.append(ChoiceObservation("x", q2, SizeBin.MID, 0.2))
    freq = make_weights(obs, "frequency")
    assert freq[0].weight == pytest.approx(1 / 137) and freq[-1].weight == 1.0
    resc = make_weights(obs, Weighting.INVERSE_RESCUE)
    assert resc[0].weight == 2.0 and resc[-1].weight == pytest.approx(1.25)
    assert all(o.weight == 1.0 for o in make_weights(freq, "none"))
    table = [QuarterPoint(q1, 1.0, 0, 0, 0.0), QuarterPoint(q2, 1.0, 0, 0, 1.0)]
    with pytest.raises(RescueProbabilityZero):
        make_weights(obs, "rescue", table)


def test_build_observations_from_incidents():
    incs = [IncidentRecord("a", dt.date(2016, 2, 1), DepartureCountry.LIBYA, BoatType.RUBBER, 120, 0, 1, None),
            IncidentRecord("b", dt.date(2016, 5, 1), DepartureCountry.LIBYA, BoatType.RUBBER, 40, 0, 1, None)]
    table = [QuarterPoint(Quarter(2016, 1), 1.0, 0, 0, 0.2), QuarterPoint(Quarter(2016, 2), 1.0, 0, 0, 0.3)]
    obs = build_observations(incs, table)
    assert [(o.chosen_bin, o.p_interception) for o in obs] == [(SizeBin.LARGE, 0.2), (SizeBin.SMALL, 0.3)]
    with pytest.raises(CrossLabError):
        build_observations(incs, table[:1])


def test_quarterly_counts_reproduce_alpha_only_fits():
    obs = rubber_count_observations()
    assert len(obs) == 1851
    col1 = fit_conditional_logit(obs, weighting="none", model="alpha")
    assert col1.alpha[SizeBin.MID] == pytest.approx(0.868, abs=5e-4)
    assert col1.alpha[SizeBin.LARGE] == pytest.approx(2.692, abs=5e-4)
    assert col1.standard_errors["alpha_mid"] == pytest.approx(0.118, abs=5e-4)
    assert col1.standard_errors["alpha_large"] == pytest.approx(0.102, abs=5e-4)
    assert col1.pseudo_r2 == pytest.approx(0.459, abs=5e-4)
    assert col1.n_alternatives == 3 * 1851 == 5553
    col3 = fit_conditional_logit(obs, weighting="frequency", model="alpha", vce="robust")
    assert col3.alpha[SizeBin.MID] == pytest.approx(-0.166, abs=5e-4)
    assert col3.alpha[SizeBin.LARGE] == pytest.approx(0.886, abs=5e-4)
    assert col3.standard_errors["alpha_mid"] == pytest.approx(0.270, abs=5e-4)
    assert col3.standard_errors["alpha_large"] == pytest.approx(0.264, abs=5e-4)
    assert col3.pseudo_r2 == pytest.approx(0.106, abs=5e-4)


def test_model_vs_robust_standard_errors_same_point_estimate():
    obs = rubber_count_observations()
    a = fit_conditional_logit(obs, weighting="frequency", model="alpha")
    b = fit_conditional_logit(obs, weighting="frequency", model="alpha", vce="robust")
    np.testing.assert_allclose(a.params, b.params)
    assert a.standard_errors["alpha_mid"] > b.standard_errors["alpha_mid"]


def _synthetic(n=3000, seed=1, coefs=(1.5, 3.5, -3.0, -6.0)):
    a, b = synth.coefficients(*coefs)
    return synth.generate_choice_data(synth.ChoiceDgpSpec.uniform_p(a, b, n, seed=seed))


def test_newton_ascent_and_convergence():
    fit = fit_conditional_logit(_synthetic())
    h = fit.ll_history
    assert all(b >= a - 1e-12 * abs(a) for a, b in zip(h, h[1:]))
    assert fit.gradient_norm < 1e-8
    assert fit.n_alternatives == 3 * fit.n_choices
    cov = fit.covariance
    np.testing.assert_allclose(cov, cov.T)
    assert np.all(np.linalg.eigvalsh(cov) >= -1e-12)
    assert 0 < fit.pseudo_r2 < 1


def test_weighted_fit_matches_replicated_data():
    obs = _synthetic(n=400, seed=2)
    doubled = [ChoiceObservation(o.incident_id, o.quarter, o.chosen_bin, o.p_interception, 2.0) for o in obs]
    a = fit_conditional_logit(obs + obs)
    b = fit_conditional_logit(doubled)
    np.testing.assert_allclose(a.params, b.params, rtol=1e-9)
    np.testing.assert_allclose(a.covariance, b.covariance, rtol=1e-8)
    assert b.weighting is None


def test_fit_errors():
    q = Quarter(2016, 1)
    one_p = [ChoiceObservation(str(i), q, SizeBin(i % 3), 0.4) for i in range(30)]
    with pytest.raises(NotIdentified):
        fit_conditional_logit(one_p)
    fit_conditional_logit(one_p, model="alpha")
    no_mid = [o for o in _synthetic(300) if o.chosen_bin != SizeBin.MID]
    with pytest.raises(Separation):
        fit_conditional_logit(no_mid)
    bad = [ChoiceObservation(o.incident_id, o.quarter, o.chosen_bin, o.p_interception, 0.0) for o in _synthetic(60)]
    with pytest.raises(DegenerateWeights):
        fit_conditional_logit(bad)


def test_perfect_separation_detected():
    # Small always chosen at high p, Large at low p, Mid in between: no finite MLE
    obs = []
    for i in range(60):
        p = i / 60
        b = SizeBin.LARGE if p < 0.3 else SizeBin.MID if p < 0.6 else SizeBin.SMALL
        obs.append(ChoiceObservation(str(i), Quarter(2016, 1), b, p))
    with pytest.raises(Separation):
        fit_conditional_logit(obs)


def test_counterfactual_examples():
    table = [QuarterPoint(q, 1.0, 0, 0, p) for q, p in zip(_quarters(4), (0.1, 0.4, 0.7, 0.95))]
    same = counterfactual(PUBLISHED_FIT, table, 0.0)
    for r in same.rows:
        assert np.array_equal(r.baseline_shares, r.counterfactual_shares)
    up = counterfactual(PUBLISHED_FIT, table, 0.10)
    for r in up.rows:
        assert r.counterfactual_shares[0] >= r.baseline_shares[0]
        assert r.counterfactual_shares[2] <= r.baseline_shares[2]
    assert up.rows[-1].p_counterfactual == 1.0 and up.rows[-1].clamped
    assert not up.rows[0].clamped and up.any_clamped


def test_predicted_distribution():
    flat = [QuarterPoint(q, 1.0, 0, 0, 0.3) for q in _quarters(3)]
    shares = [s for _, s in predicted_quarterly_distribution(PUBLISHED_FIT, flat)]
    assert all(np.array_equal(shares[0], s) for s in shares)
    rising = [QuarterPoint(q, 1.0, 0, 0, p) for q, p in zip(_quarters(11), np.linspace(0, 1, 11))]
    small = [s[0] for _, s in predicted_quarterly_distribution(PUBLISHED_FIT, rising)]
    assert all(b >= a for a, b in zip(small, small[1:]))
    p_star = crossover_points(PUBLISHED_FIT)[(SizeBin.SMALL, SizeBin.LARGE)]
    (_, s), = predicted_quarterly_distribution(PUBLISHED_FIT, [QuarterPoint(Quarter(2018, 1), 1.0, 0, 0, p_star)])
    assert abs(s[0] - s[2]) < 1e-9


def test_empirical_distribution():
    q1, q2 = Quarter(2016, 1), Quarter(2016, 2)
    obs = [ChoiceObservation("a", q1, SizeBin.SMALL, 0.1), ChoiceObservation("b", q1, SizeBin.LARGE, 0.1),
           ChoiceObservation("c", q2, SizeBin.MID, 0.2)]
    out = dict(empirical_quarterly_distribution(obs))
    np.testing.assert_allclose(out[q1], [0.5, 0, 0.5])
    np.testing.assert_allclose(out[q2], [0, 1, 0])


def test_log_likelihood_helper_matches_fit():
    obs = _synthetic(500, seed=4)
    fit = fit_conditional_logit(obs)
    ll, g, _ = log_likelihood(fit.params, obs)
    assert ll == pytest.approx(fit.log_likelihood)
    assert np.max(np.abs(g)) < 1e-8
