from __future__ import annotations

import numpy as np
import pytest

from crosslab import synth
from crosslab.choice import SizeBin, build_observations, fit_conditional_logit
from crosslab.dataset import filter_choice_sample, ingest_flows, ingest_incidents, write_flows, write_incidents
from crosslab.errors import CrossLabError, UnstableSpec
from crosslab.periods import Quarter
from crosslab.series import derive_series, interception_series


def test_ecm_generation_is_deterministic():
    spec = synth.EcmDgpSpec(length=80, seed=7)
    a, b = synth.generate_ecm_data(spec), synth.generate_ecm_data(spec)
    assert np.array_equal(a.n_cross_thousands, b.n_cross_thousands)
    assert np.array_equal(a.p_rescue, b.p_rescue)
    c = synth.generate_ecm_data(synth.EcmDgpSpec(length=80, seed=8))
    assert not np.array_equal(a.n_cross_thousands, c.n_cross_thousands)
    assert len(a.months) == 80 and str(a.months[0]) == "2016-01"


@pytest.mark.parametrize("kwargs", [
    {"alpha1": 0.0}, {"alpha1": 0.1}, {"alpha1": -2.0}, {"noise_sd": 0.0}, {"length": 2},
    {"rescue_process": synth.RescueProcess.AR1, "rescue_phi": 1.0}, {"rescue_start": 1.2},
])
def test_unstable_specs_rejected(kwargs):
    with pytest.raises(UnstableSpec):
        synth.generate_ecm_data(synth.EcmDgpSpec(**kwargs))


def test_deviation_decays_geometrically():
    spec = synth.EcmDgpSpec(alpha1=-0.4)
    p = np.full(30, 0.6)
    eq = spec.beta0 + spec.beta1 * 0.6
    y = synth.simulate_ecm_path(p, spec, y0=eq + 5.0)
    np.testing.assert_allclose(y - eq, 5.0 * 0.6 ** np.arange(30), atol=1e-12)


def test_zero_noise_stays_on_equilibrium():
    spec = synth.EcmDgpSpec()
    p = np.linspace(0.5, 0.9, 20)
    y = synth.simulate_ecm_path(p, spec)
    assert y[0] == pytest.approx(spec.beta0 + spec.beta1 * 0.5)


def test_rescue_path_bounds_and_ar1():
    lo, hi = synth.RESCUE_BOUNDS
    spec = synth.EcmDgpSpec(rescue_sd=0.5, seed=3)
    p = synth.rescue_path(spec, synth.make_rng(3), 500)
    assert p.min() >= lo and p.max() <= hi
    assert (p == lo).any() and (p == hi).any()
    ar = synth.EcmDgpSpec(rescue_process=synth.RescueProcess.AR1, rescue_phi=0.5, rescue_sd=0.01)
    q = synth.rescue_path(ar, synth.make_rng(4), 4000)
    assert abs(q[100:].mean() - 0.7) < 0.005


def test_equal_utilities_give_equal_shares():
    a, b = synth.coefficients(0, 0, 0, 0)
    obs = synth.generate_choice_data(synth.ChoiceDgpSpec.uniform_p(a, b, 30000, seed=1))
    shares = np.bincount([int(o.chosen_bin) for o in obs], minlength=3) / len(obs)
    # three binomial SEs at n=30000 is about 0.008
    np.testing.assert_allclose(shares, 1 / 3, atol=0.01)


def test_large_boats_most_common_at_low_interception():
    a, b = synth.coefficients(1.786, 3.849, -3.587, -6.511)
    spec = synth.ChoiceDgpSpec(a, b, ((Quarter(2016, 1), 0.2, 5000),), seed=2)
    counts = np.bincount([int(o.chosen_bin) for o in synth.generate_choice_data(spec)], minlength=3)
    assert counts.argmax() == SizeBin.LARGE


def test_choice_generation_is_deterministic():
    a, b = synth.coefficients(1.5, 3.5, -3, -6)
    spec = synth.ChoiceDgpSpec.uniform_p(a, b, 200, seed=9)
    assert synth.generate_choice_data(spec) == synth.generate_choice_data(spec)


def test_grid_oracle_flags():
    a, b = synth.coefficients(1.0, 1.0, -2.0, -2.0)
    one_p = synth.generate_choice_data(synth.ChoiceDgpSpec(a, b, ((Quarter(2016, 1), 0.4, 60),), seed=1))
    r = synth.brute_force_logit_mle(one_p, step=1.0)
    assert r.nonunique and r.flagged
    all_small = [o for o in synth.generate_choice_data(synth.ChoiceDgpSpec.uniform_p(a, b, 40, seed=2))]
    all_small = [type(o)(o.incident_id, o.quarter, SizeBin.SMALL, o.p_interception) for o in all_small]
    r = synth.brute_force_logit_mle(all_small, step=1.0)
    assert r.at_bound[0] and r.at_bound[1] and r.flagged


def test_grid_oracle_finds_interior_optimum():
    a, b = synth.coefficients(0.5, 1.0, -1.0, -2.0)
    obs = synth.generate_choice_data(synth.ChoiceDgpSpec.uniform_p(a, b, 400, seed=5))
    newton = fit_conditional_logit(obs)
    grid = synth.brute_force_logit_mle(obs, step=0.5, bounds=(-4.0, 4.0))
    assert not grid.flagged
    assert np.max(np.abs(np.array(grid.coefficients) - newton.params)) <= 0.5
    assert grid.log_likelihood <= newton.log_likelihood + 1e-9


def test_bad_grid_bounds():
    with pytest.raises(CrossLabError):
        synth.brute_force_logit_mle([], step=0.3, bounds=(-1.0, 1.0))


def test_flow_export_round_trip(tmp_path):
    spec = synth.EcmDgpSpec(length=60, noise_sd=0.5, rescue_process=synth.RescueProcess.AR1, seed=4)
    data = synth.generate_ecm_data(spec)
    flows = synth.ecm_to_flows(data)
    path = tmp_path / "flows.csv"
    write_flows([flows], path)
    back = ingest_flows(path)
    derived = derive_series(next(iter(back.values())))
    np.testing.assert_allclose([pt.n_cross_thousands for pt in derived.points], data.n_cross_thousands, atol=5e-4)
    np.testing.assert_allclose([pt.p_rescue for pt in derived.points], data.p_rescue, atol=2e-3)


def test_choice_export_round_trip(tmp_path):
    a, b = synth.coefficients(1.5, 3.5, -3, -6)
    quarters = tuple((Quarter(2016 + i // 4, i % 4 + 1), 0.1 + 0.04 * i, 30) for i in range(8))
    obs = synth.generate_choice_data(synth.ChoiceDgpSpec(a, b, quarters, seed=3))
    incs = synth.choice_to_incidents(obs, seed=3)
    write_incidents(incs, tmp_path / "inc.csv")
    back, report = ingest_incidents(tmp_path / "inc.csv")
    assert report.n_dropped == 0
    table = interception_series(synth.choice_flows(quarters), back)
    np.testing.assert_allclose([r.p_interception for r in table], [q[1] for q in quarters], atol=1e-4)
    rebuilt = build_observations(filter_choice_sample(back), table)
    assert [o.chosen_bin for o in rebuilt] == [o.chosen_bin for o in obs]
