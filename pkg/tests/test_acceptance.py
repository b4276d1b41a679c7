"""Acceptance criteria. Each test records one PASS/FAIL/SKIP line in the terminal summary."""

from __future__ import annotations

import itertools
import json
import os
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import normal_equations_oracle, record_criterion
from crosslab import synth
from crosslab.choice import (
    ChoiceFit,
    SizeBin,
    counterfactual,
    crossover_points,
    fit_conditional_logit,
    log_likelihood,
)
from crosslab.econometrics import adf_test, equilibrium_delta, equilibrium_fit, fit_ecm, ols
from crosslab.periods import Quarter
from crosslab.series import QuarterPoint
from crosslab.stats import welch_ttest

pytestmark = pytest.mark.acceptance

PUBLISHED_FIT = (1.786, 3.849, -3.587, -6.511)


def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def test_criterion_01_equilibrium_delta():
    central = equilibrium_fit(-10.58, 28.01)
    western = equilibrium_fit(0.0, -4.31)
    equilibrium_delta(central, 0.9, 0.5)  # warm-up
    (dc, dw), secs = _timed(lambda: (equilibrium_delta(central, 0.9, 0.5), equilibrium_delta(western, 0.9, 0.5)))
    ok = (Fraction(dc).limit_denominator(10**6) == 11204 and Fraction(dw).limit_denominator(10**6) == -1724
          and abs(dc - 11204) < 1e-9 and abs(dw + 1724) < 1e-9 and secs < 1e-3)
    record_criterion(1, ok, f"central {dc:.6f}, western {dw:.6f} persons/month, {secs * 1e6:.0f} us")
    assert ok


def test_criterion_02_crossover_points():
    fit = ChoiceFit.from_coefficients(*PUBLISHED_FIT)
    crossover_points(fit)
    t0 = time.perf_counter()
    cx = crossover_points(fit)
    probs = fit.probabilities(np.round(np.arange(0, 1001) / 1000, 3))
    secs = time.perf_counter() - t0
    sl = cx[(SizeBin.SMALL, SizeBin.LARGE)]
    sm = cx[(SizeBin.SMALL, SizeBin.MID)]
    ml = cx[(SizeBin.MID, SizeBin.LARGE)]
    mid_never = bool(np.all(probs.argmax(axis=1) != SizeBin.MID))
    ok = (abs(sl - 0.5912) <= 5e-4 and abs(sm - 0.4979) <= 5e-4 and abs(ml - 0.7055) <= 5e-4
          and mid_never and secs < 0.01)
    record_criterion(2, ok, f"S/L {sl:.4f}, S/M {sm:.4f}, M/L {ml:.4f}, mid never dominant={mid_never}, "
                            f"{secs * 1e3:.2f} ms")
    assert ok


def test_criterion_03_ecm_recovery():
    def one(seed):
        data = synth.generate_ecm_data(synth.EcmDgpSpec(beta0=-10, beta1=28, alpha1=-0.4, length=500, seed=seed))
        return fit_ecm(data.series, list(zip(data.months, data.p_rescue)))

    one(0)
    t0 = time.perf_counter()
    fits = [one(s) for s in range(100)]
    secs = time.perf_counter() - t0
    a_err = np.abs(np.array([f.alpha1 for f in fits]) + 0.4)
    b_err = np.abs(np.array([f.beta1 for f in fits]) - 28.0)
    within_a = float(np.mean(a_err <= 0.1))
    within_b = float(np.mean(b_err <= 1.0))
    ok = a_err.mean() < 0.05 and within_a >= 0.95 and within_b >= 0.95 and secs < 10
    record_criterion(3, ok, f"mean|a1 err| {a_err.mean():.4f}, a1 within 0.1: {within_a:.0%}, "
                            f"b1 within 1.0: {within_b:.0%}, {secs:.2f} s")
    assert ok


def test_criterion_04_logit_recovery():
    a, b = synth.coefficients(*(1.5, 3.5, -3.0, -6.0))
    truth = np.array([1.5, 3.5, -3.0, -6.0])
    fit_conditional_logit(synth.generate_choice_data(synth.ChoiceDgpSpec.uniform_p(a, b, 200, seed=99)))
    t0 = time.perf_counter()
    fits = [fit_conditional_logit(synth.generate_choice_data(synth.ChoiceDgpSpec.uniform_p(a, b, 5000, seed=s)))
            for s in range(50)]
    secs = time.perf_counter() - t0
    mae = np.mean([np.abs(f.params - truth) for f in fits], axis=0)
    converged = all(f.gradient_norm < 1e-8 and f.iterations <= 30 for f in fits)
    max_iter = max(f.iterations for f in fits)
    ok = bool(np.all(mae < 0.15)) and converged and secs < 30
    record_criterion(4, ok, "MAE a_mid {:.3f} a_large {:.3f} b_mid {:.3f} b_large {:.3f}; converged={} "
                            "(max {} iterations), {:.1f} s".format(*mae, converged, max_iter, secs))
    assert ok


def test_criterion_05_gradient():
    a, b = synth.coefficients(1.5, 3.5, -3.0, -6.0)
    obs = synth.generate_choice_data(synth.ChoiceDgpSpec.uniform_p(a, b, 200, seed=5))
    rng = np.random.Generator(np.random.PCG64(5))
    log_likelihood(np.zeros(4), obs)
    t0 = time.perf_counter()
    worst = 0.0
    h = 1e-5
    for _ in range(20):
        theta = rng.uniform(-5, 5, 4)
        _, g, _ = log_likelihood(theta, obs)
        fd = np.empty(4)
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            fd[j] = (log_likelihood(theta + e, obs)[0] - log_likelihood(theta - e, obs)[0]) / (2 * h)
        # relative error, guarded against near-zero components
        worst = max(worst, float(np.max(np.abs(g - fd) / np.maximum(np.abs(g), 1.0))))
    secs = time.perf_counter() - t0
    ok = worst < 1e-6 and secs < 1.0
    record_criterion(5, ok, f"max relative error {worst:.2e} over 20 points, {secs:.3f} s")
    assert ok


def test_criterion_06_grid_oracle():
    a, b = synth.coefficients(1.5, 3.5, -3.0, -6.0)
    synth.brute_force_logit_mle(synth.generate_choice_data(synth.ChoiceDgpSpec.uniform_p(a, b, 10, seed=0)),
                                step=4.0)
    t0 = time.perf_counter()
    gaps, skipped = [], []
    seed = 1000
    while len(gaps) < 5:
        obs = synth.generate_choice_data(synth.ChoiceDgpSpec.uniform_p(a, b, 50, seed=seed))
        grid = synth.brute_force_logit_mle(obs, step=0.25)
        # the oracle needs the optimum inside the grid; its own flags reject datasets that break this
        if grid.flagged:
            skipped.append(seed)
        else:
            newton = fit_conditional_logit(obs)
            gaps.append(float(np.max(np.abs(np.array(grid.coefficients) - newton.params))))
        seed += 1
    secs = time.perf_counter() - t0
    ok = max(gaps) <= 0.25 and secs < 60
    record_criterion(6, ok, "coordinate gaps " + ", ".join(f"{g:.3f}" for g in gaps)
                     + f" (step 0.25); seeds failing the in-bounds precondition {skipped}; {secs:.1f} s")
    assert ok


def test_criterion_07_adf_calibration():
    rng = np.random.Generator(np.random.PCG64(7))
    t0 = time.perf_counter()
    null = alt = 0
    for _ in range(2000):
        null += adf_test(np.cumsum(rng.normal(size=500))).reject_at_5pct
        alt += adf_test(rng.normal(size=500)).reject_at_5pct
    secs = time.perf_counter() - t0
    size, power = null / 2000, alt / 2000
    ok = 0.03 <= size <= 0.07 and power > 0.9 and secs < 30
    record_criterion(7, ok, f"size {size:.3f}, power {power:.3f}, {secs:.1f} s")
    assert ok


def test_criterion_08_ols_exactness():
    rng = np.random.Generator(np.random.PCG64(8))
    worst_rel = worst_orth = 0.0
    for trial in range(20):
        n, k = int(rng.integers(8, 60)), int(rng.integers(1, 6))
        X = rng.normal(size=(n, k)) * rng.uniform(0.1, 10, k)
        y = X @ rng.normal(size=k) + rng.normal(size=n)
        fit = ols(y, X)
        Xc = np.column_stack([np.ones(n), X])
        exact = normal_equations_oracle(y, Xc)
        worst_rel = max(worst_rel, float(np.max(np.abs(fit.coefficients - exact) / np.maximum(np.abs(exact), 1e-300))))
        worst_orth = max(worst_orth, float(np.max(np.abs(Xc.T @ fit.residuals))))
    ok = worst_rel < 1e-10 and worst_orth < 1e-8
    record_criterion(8, ok, f"max relative coefficient error {worst_rel:.1e}, max |X'e| {worst_orth:.1e}")
    assert ok


def test_criterion_09_counterfactual_monotone():
    fit = ChoiceFit.from_coefficients(*PUBLISHED_FIT)
    rng = np.random.Generator(np.random.PCG64(9))
    violations = 0
    worst_sum = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 20))
        table = [QuarterPoint(Quarter(2016 + i // 4, i % 4 + 1), 1.0, 0, 0, float(p))
                 for i, p in enumerate(rng.uniform(0, 1, n))]
        res = counterfactual(fit, table, float(rng.uniform(1e-6, 0.5)))
        for r in res.rows:
            violations += r.counterfactual_shares[0] < r.baseline_shares[0]
            violations += r.counterfactual_shares[2] > r.baseline_shares[2]
            for s in (r.baseline_shares, r.counterfactual_shares):
                worst_sum = max(worst_sum, abs(float(np.sum(s)) - 1.0))
    ok = violations == 0 and worst_sum <= 1e-12
    record_criterion(9, ok, f"{violations} monotonicity violations, max |sum-1| {worst_sum:.1e}")
    assert ok


def test_criterion_10_conditional_reproduction(tmp_path):
    flows = os.environ.get("CROSSLAB_REFERENCE_FLOWS")
    incidents = os.environ.get("CROSSLAB_REFERENCE_INCIDENTS")
    if not (flows and incidents):
        record_criterion(10, None, "data-dependent; set CROSSLAB_REFERENCE_FLOWS and CROSSLAB_REFERENCE_INCIDENTS")
        pytest.skip("original flow and incident data not supplied")
    from crosslab.cli import main

    assert main(["ecm", "--input", flows, "--out", str(tmp_path)]) == 0
    assert main(["choice", "--input", flows, "--incidents", incidents, "--out", str(tmp_path)]) == 0
    ecm = json.loads((tmp_path / "ecm_central.json").read_text())["fits"][0]
    got = {c["name"]: c["estimate"] for c in ecm["coefficients"]}
    s1 = {c["name"]: c["estimate"] for c in ecm["stage1"]["coefficients"]}
    want = {"ec_lag": -0.402, "d_p_rescue_lag": -3.249, "const": 0.060}
    ecm_gap = max(max(abs(got[k] - v) for k, v in want.items()),
                  abs(s1["const"] + 10.58), abs(s1["p_rescue"] - 28.01))
    choice = json.loads((tmp_path / "choice_frequency_full.json").read_text())["fits"][0]
    est = [c["estimate"] for c in choice["coefficients"]]
    choice_gap = float(np.max(np.abs(np.array(est) - PUBLISHED_FIT)))
    ok = ecm["n_obs"] == 46 and choice["n_choices"] == 1851 and ecm_gap <= 0.01 and choice_gap <= 0.05
    record_criterion(10, ok, f"ECM max gap {ecm_gap:.4f} (n={ecm['n_obs']}), logit max gap {choice_gap:.4f} "
                             f"(n={choice['n_choices']})")
    assert ok


def _permutation_p(a, b):
    pooled = list(a) + list(b)
    obs = abs(Fraction(sum(a), len(a)) - Fraction(sum(b), len(b)))
    hits = total = 0
    for idx in itertools.combinations(range(len(pooled)), len(a)):
        rest = [pooled[i] for i in range(len(pooled)) if i not in idx]
        d = abs(Fraction(sum(pooled[i] for i in idx), len(a)) - Fraction(sum(rest), len(rest)))
        hits += d >= obs
        total += 1
    return hits / total


# published phase means and their printed differences
PHASE_MEANS = [(134.857, 108.978, 25.878), (0.844, 0.731, 0.113), (0.009, 0.052, -0.043),
               (0.053, 0.039, 0.014), (0.331, 0.187, 0.144), (0.004, 0.004, -0.001)]


def test_criterion_11_welch_oracle():
    samples = [([0, 0, 1, 1], [1, 1, 2, 2]), ([0, 1, 2, 3], [1, 2, 3, 4]), ([0, 1, 2, 3], [2, 4, 6, 9]),
               ([1, 2, 3, 5], [4, 6, 7, 8]), ([0, 0, 0, 1], [0, 1, 1, 1])]
    perm_gaps = []
    for a, b in samples:
        perm_gaps.append(abs(welch_ttest(a, b).p_value - _permutation_p(a, b)))
    diff_gaps = []
    for ma, mb, printed in PHASE_MEANS:
        base = np.linspace(-1, 1, 40)
        r = welch_ttest(ma + base, mb + base[:31] - base[:31].mean())
        diff_gaps.append(max(abs(r.difference - (ma - mb)), abs(round(r.difference, 3) - printed) - 0.001))
    perm_ok = max(perm_gaps) <= 0.02
    diff_ok = max(diff_gaps) <= 1e-9
    ok = perm_ok and diff_ok
    record_criterion(11, ok, "permutation |dp| " + ", ".join(f"{g:.3f}" for g in perm_gaps)
                     + f" (tol 0.02, {'pass' if perm_ok else 'fail'}); difference column "
                       f"{'exact' if diff_ok else 'mismatch'}")
    assert ok
