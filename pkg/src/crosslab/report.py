"""Rendering of fits and scenarios as aligned text, JSON-ready dicts and CSV."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from crosslab.choice import ChoiceFit, ScenarioResult, SizeBin, crossover_points
from crosslab.econometrics import BacktestReport, EcmFit, OlsFit, WindowEstimate
from crosslab.stats import PhaseRow

STAR_LEVELS = ((0.01, "***"), (0.05, "**"), (0.10, "*"))

ECM_ROW_LABELS = {
    "ec_lag": "Lagged equilibrium deviation",
    "d_p_rescue_lag": "Lagged change in P_rescue",
    "d_dep_lag": "Lagged change in dep. variable",
    "const": "Constant",
}

CHOICE_ROW_LABELS = {
    "alpha_mid": "Mid fixed effect",
    "alpha_large": "Large fixed effect",
    "beta_mid": "Mid x p_interception",
    "beta_large": "Large x p_interception",
}


def stars(p_value: float) -> str:
    if p_value is None or math.isnan(p_value):
        return ""
    for level, mark in STAR_LEVELS:
        if p_value < level:
            return mark
    return ""


def normal_two_sided_p(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))


def _num(x: float | None, digits: int = 3) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.{digits}f}"


def _finite(x):
    """JSON-safe float: NaN and infinities become None."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _grid(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(h.ljust(widths[0]) if i == 0 else h.rjust(widths[i]) for i, h in enumerate(header))]
    lines.append("-" * len(lines[0]))
    for r in rows:
        lines.append("  ".join(c.ljust(widths[0]) if i == 0 else c.rjust(widths[i]) for i, c in enumerate(r)))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# ECM
# ---------------------------------------------------------------------------


def _ols_json(fit: OlsFit) -> dict:
    return {
        "coefficients": [
            {"name": n, "estimate": _finite(b), "se": _finite(s)}
            for n, b, s in zip(fit.names, fit.coefficients, fit.standard_errors)
        ],
        "r2": _finite(fit.r_squared),
        "adj_r2": _finite(fit.adj_r_squared),
        "n_obs": int(fit.n_obs),
    }


def ecm_json(fit: EcmFit) -> dict:
    body = _ols_json(fit.stage2)
    return {
        "spec": {
            "label": fit.spec.label,
            "dep": fit.spec.dep.value,
            "short_run": fit.spec.include_short_run,
            "lagged_dep": fit.spec.include_lagged_dep,
        },
        **body,
        "mean_dep_var": _finite(fit.mean_dep_var),
        "first_month": str(fit.months[0]) if fit.months else None,
        "last_month": str(fit.months[-1]) if fit.months else None,
        "stage1": _ols_json(fit.stage1),
    }


def ecm_table(fits: Sequence[EcmFit], titles: Sequence[str] | None = None) -> str:
    """Coefficient table with one column per fit; stage-2 terms then fit statistics."""
    titles = list(titles or [f.spec.label for f in fits])
    names = [n for n in ECM_ROW_LABELS if any(n in f.stage2.names for f in fits)]
    rows = []
    for name in names:
        est, se = [ECM_ROW_LABELS[name]], [""]
        for f in fits:
            if name in f.stage2.names:
                i = f.stage2.names.index(name)
                est.append(_num(f.stage2.coefficients[i]) + stars(f.stage2.pvalues[i]))
                se.append(f"({_num(f.stage2.standard_errors[i])})")
            else:
                est.append("")
                se.append("")
        rows += [est, se]
    rows.append(["R-squared", *[_num(f.stage2.r_squared) for f in fits]])
    rows.append(["Adjusted R-squared", *[_num(f.stage2.adj_r_squared) for f in fits]])
    rows.append(["Observations", *[str(f.stage2.n_obs) for f in fits]])
    rows.append(["Mean of dep. variable", *[_num(f.mean_dep_var, 2) for f in fits]])
    rows.append(["Equilibrium", *[f"{_num(f.beta0, 2)} + {_num(f.beta1, 2)}P" for f in fits]])
    return _grid(["", *titles], rows) + "Standard errors in parentheses. *** p<0.01, ** p<0.05, * p<0.1\n"


# ---------------------------------------------------------------------------
# choice
# ---------------------------------------------------------------------------


def _choice_pvalue(est: float, se: float | None) -> float:
    if se is None or not se > 0:
        return math.nan
    return normal_two_sided_p(est / se)


def choice_json(fit: ChoiceFit) -> dict:
    cross = crossover_points(fit) if fit.beta is not None else {}
    return {
        "model": fit.model,
        "weighting": fit.weighting.value if fit.weighting is not None else None,
        "vce": fit.vce,
        "coefficients": [
            {"name": n, "estimate": _finite(v), "se": _finite(fit.standard_errors.get(n))}
            for n, v in zip(fit.param_names, fit.params)
        ],
        "log_likelihood": _finite(fit.log_likelihood),
        "null_log_likelihood": _finite(fit.null_log_likelihood),
        "pseudo_r2": _finite(fit.pseudo_r2),
        "n_choices": int(fit.n_choices),
        "n_alternatives": int(fit.n_alternatives),
        "iterations": int(fit.iterations),
        "gradient_norm": _finite(fit.gradient_norm),
        "crossovers": [
            {"low": lo.label, "high": hi.label, "p": _finite(p)} for (lo, hi), p in cross.items()
        ],
    }


def choice_table(fits: Sequence[ChoiceFit], titles: Sequence[str] | None = None) -> str:
    titles = list(titles or [f"({i + 1})" for i in range(len(fits))])
    rows = []
    for name, label in CHOICE_ROW_LABELS.items():
        est, se = [label], [""]
        for f in fits:
            if name in f.param_names:
                v = float(f.params[f.param_names.index(name)])
                s = f.standard_errors.get(name)
                est.append(_num(v) + stars(_choice_pvalue(v, s)))
                se.append(f"({_num(s)})" if s is not None and math.isfinite(s) else "")
            else:
                est.append("")
                se.append("")
        rows += [est, se]
    rows.append(["Weighting", *[f.weighting.value if f.weighting else "custom" for f in fits]])
    rows.append(["Pseudo R-squared", *[_num(f.pseudo_r2) for f in fits]])
    rows.append(["Log-likelihood", *[_num(f.log_likelihood) for f in fits]])
    rows.append(["Choices", *[f"{f.n_choices:,}" for f in fits]])
    rows.append(["Alternatives", *[f"{f.n_alternatives:,}" for f in fits]])
    return _grid(["", *titles], rows) + "Standard errors in parentheses. *** p<0.01, ** p<0.05, * p<0.1\n"


def crossover_text(fit: ChoiceFit) -> str:
    lines = []
    for (lo, hi), p in crossover_points(fit).items():
        where = "none in [0, 1]" if p is None else f"{p:.4f}"
        lines.append(f"{lo.label}/{hi.label} crossover p*: {where}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CSV writers
# ---------------------------------------------------------------------------


def _writer(path: str | Path):
    fh = Path(path).open("w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def write_json(path: str | Path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n", encoding="utf-8")


BACKTEST_COLUMNS = ("month", "observed", "predicted", "naive")


def write_backtest_predictions(report: BacktestReport, path: str | Path) -> None:
    write_csv(path, (*BACKTEST_COLUMNS, "window"),
              ((str(r.month), r.observed, r.predicted, r.naive, r.window) for r in report.predictions))


def backtest_json(report: BacktestReport) -> dict:
    return {
        "spec": report.fit.spec.label if report.fit else None,
        "train_window": [str(m) for m in report.train_window],
        "test_window": [str(m) for m in report.test_window],
        "train": {"model_mae": _finite(report.train_model_mae_persons),
                  "naive_mae": _finite(report.train_naive_mae_persons)},
        "test": {"model_mae": _finite(report.model_mae_persons),
                 "naive_mae": _finite(report.naive_mae_persons)},
    }


def write_backtest_summary(report: BacktestReport, path: str | Path) -> None:
    write_csv(path, ("window", "first_month", "last_month", "model_mae", "naive_mae"), [
        ("train", str(report.train_window[0]), str(report.train_window[1]),
         report.train_model_mae_persons, report.train_naive_mae_persons),
        ("test", str(report.test_window[0]), str(report.test_window[1]),
         report.model_mae_persons, report.naive_mae_persons),
    ])


def write_window_csv(estimates: Sequence[WindowEstimate], path: str | Path) -> None:
    write_csv(path, ("window_end", "n_months", "alpha1", "reason"),
              ((str(e.window_end), e.n_months, e.alpha1, e.reason) for e in estimates))


SCENARIO_COLUMNS = (
    "quarter", "p_base", "p_cf",
    "share_small_base", "share_mid_base", "share_large_base",
    "share_small_cf", "share_mid_cf", "share_large_cf", "clamped",
)


def write_scenario_csv(result: ScenarioResult, path: str | Path) -> None:
    write_csv(path, SCENARIO_COLUMNS, (
        (str(r.quarter), r.p_baseline, r.p_counterfactual,
         *map(float, r.baseline_shares), *map(float, r.counterfactual_shares), int(r.clamped))
        for r in result.rows))


def write_share_csv(predicted, empirical, path: str | Path) -> None:
    """Per-quarter predicted and observed bin shares side by side."""
    emp = dict(empirical)
    rows = []
    for q, pred in predicted:
        obs = emp.get(q)
        rows.append((str(q), *map(float, pred),
                     *(map(float, obs) if obs is not None else (None, None, None))))
    write_csv(path, ("quarter", *(f"pred_{b.label.lower()}" for b in SizeBin),
                     *(f"obs_{b.label.lower()}" for b in SizeBin)), rows)


# ---------------------------------------------------------------------------
# t-tests
# ---------------------------------------------------------------------------

PHASE_LABELS = {
    "people_per_boat": "Number of people per transport means",
    "rubber_boat": "Boat type = rubber (vs. wooden)",
    "in_operational_area": "In Frontex operational area",
    "any_dead_or_missing": "Incident involved dead or missing",
    "n_dead_or_missing": "Number of dead or missing",
    "share_dead_or_missing": "Fraction of dead or missing",
}


def ttest_table(rows: Sequence[PhaseRow], names: tuple[str, str] = ("Phase 2", "Phase 3")) -> str:
    body = []
    for r in rows:
        label = PHASE_LABELS.get(r.variable, r.variable)
        t = r.result
        if t is None:
            body.append([label, "", "", "", r.reason or "undefined"])
            continue
        body.append([label, _num(t.mean_a), _num(t.mean_b), _num(t.difference) + stars(t.p_value),
                     f"{t.p_value:.4f}"])
    return _grid(["Variable", f"{names[0]} mean", f"{names[1]} mean", "Difference", "P-value"], body)


_TTEST_FIELDS = ("mean_a", "mean_b", "difference", "t_statistic", "degrees_of_freedom", "p_value")


def ttest_json(rows: Sequence[PhaseRow]) -> list[dict]:
    out = []
    for r in rows:
        t = r.result
        vals = [None] * 6 if t is None else [_finite(getattr(t, f)) for f in _TTEST_FIELDS]
        rec = dict(zip(("mean_a", "mean_b", "difference", "t_statistic", "df", "p_value"), vals))
        rec["variable"] = r.variable
        rec["n_a"] = t.n_a if t else 0
        rec["n_b"] = t.n_b if t else 0
        rec["note"] = r.reason
        out.append(rec)
    return out


def write_ttest_csv(rows: Sequence[PhaseRow], path: str | Path) -> None:
    write_csv(path, ("variable", "mean_a", "mean_b", "difference", "t_statistic", "df", "p_value",
                     "n_a", "n_b", "note"),
              ((r.variable, *(getattr(r.result, f) if r.result else None for f in _TTEST_FIELDS),
                r.result.n_a if r.result else 0, r.result.n_b if r.result else 0, r.reason) for r in rows))


__all__ = [
    "stars", "ecm_json", "ecm_table", "choice_json", "choice_table", "crossover_text",
    "backtest_json", "write_backtest_predictions", "write_backtest_summary", "write_window_csv",
    "write_scenario_csv", "write_share_csv", "ttest_table", "ttest_json", "write_ttest_csv",
    "write_csv", "write_json",
]
