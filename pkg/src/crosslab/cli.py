"""Command-line front end.

Every command reads CSV inputs, writes its outputs under ``--out`` with fixed
file names, and prints a short text summary. Validation and estimation
errors exit with status 2.
"""

from __future__ import annotations

import argparse
import datetime as dt
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from crosslab import __version__, report, svg
from crosslab.choice import (
    SizeBin,
    Weighting,
    build_observations,
    counterfactual,
    empirical_quarterly_distribution,
    fit_conditional_logit,
    predicted_quarterly_distribution,
)
from crosslab.dataset import (
    Route,
    filter_choice_sample,
    ingest_flows,
    ingest_incidents,
    write_flows,
    write_incidents,
)
from crosslab.econometrics import (
    ALL_SPECS,
    DepVariable,
    EcmSpec,
    backtest,
    expanding_window,
    fit_ecm,
)
from crosslab.errors import CrossLabError
from crosslab.periods import Month, Quarter, parse_month_range
from crosslab.series import (
    coverage_diagnostic,
    derive_series,
    interception_series,
    write_derived_csv,
    write_quarter_csv,
)
from crosslab.stats import phase_comparison

logger = logging.getLogger("crosslab")

FORMATS = ("csv", "json", "svg")
DEFAULT_FORMATS = "csv,json"


class UsageError(CrossLabError):
    pass


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------


def _month(text: str) -> Month:
    try:
        return Month.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _month_range(text: str) -> tuple[Month, Month]:
    try:
        return parse_month_range(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _formats(text: str) -> frozenset[str]:
    out = frozenset(s.strip().lower() for s in text.split(",") if s.strip())
    bad = out - set(FORMATS)
    if bad:
        raise argparse.ArgumentTypeError(f"unknown format(s): {', '.join(sorted(bad))}")
    return out


def _month_dates(rng: tuple[Month, Month]) -> tuple[dt.date, dt.date]:
    lo, hi = rng
    nxt = hi.shift(1)
    return dt.date(lo.year, lo.month, 1), dt.date(nxt.year, nxt.month, 1) - dt.timedelta(days=1)


def _require(args, *names: str) -> None:
    for n in names:
        if getattr(args, n, None) is None:
            raise UsageError(f"--{n.replace('_', '-')} is required for '{args.command}'")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _route_series(args, route: Route):
    flows = ingest_flows(args.input)
    if route not in flows:
        raise CrossLabError(f"no {route.value} rows in {args.input}")
    return flows, derive_series(flows[route])


def _ecm_spec(args) -> EcmSpec:
    return EcmSpec(DepVariable.parse(args.dep), not args.no_short_run, args.lagged_dep)


def _quarter_table(args, flows):
    incidents, rep = ingest_incidents(args.incidents)
    if rep.n_dropped:
        logger.warning("%d incident rows dropped while parsing %s", rep.n_dropped, args.incidents)
    if Route.CENTRAL not in flows:
        raise CrossLabError("interception probabilities need Central-route flows")
    return incidents, interception_series(flows[Route.CENTRAL], incidents)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_derive(args) -> list[Path]:
    _require(args, "input")
    out = _out_dir(args)
    flows = ingest_flows(args.input)
    written = []
    derived = {}
    for route, fs in sorted(flows.items(), key=lambda kv: kv[0].value):
        derived[route] = derive_series(fs)
        path = out / f"derived_{route.value.lower()}.csv"
        write_derived_csv(derived[route], path)
        written.append(path)
    if args.incidents:
        _, table = _quarter_table(args, flows)
        path = out / "quarters_central.csv"
        write_quarter_csv(table, path)
        written.append(path)
    if "svg" in args.format:
        for route, s in derived.items():
            path = out / f"derived_{route.value.lower()}.svg"
            svg.write_line_chart(path, [str(m) for m in s.months],
                                 [svg.Line("crossings (thousands)", [pt.n_cross_thousands for pt in s])],
                                 title=f"{route.value} crossing attempts", y_label="thousands")
            written.append(path)
    for route, s in derived.items():
        print(f"{route.value}: {len(s)} months {s.months[0]}..{s.months[-1]}")
    return written


def cmd_ecm(args) -> list[Path]:
    _require(args, "input")
    out = _out_dir(args)
    route = Route.parse(args.route)
    _, series = _route_series(args, route)
    if args.window:
        series = series.window(*args.window)
    specs = ALL_SPECS if args.all_specs else (_ecm_spec(args),)
    fits = [fit_ecm(series, series, spec) for spec in specs]
    stem = f"ecm_{route.value.lower()}" + ("_all" if args.all_specs else "")
    text = report.ecm_table(fits)
    written = []
    path = out / f"{stem}.txt"
    path.write_text(text, encoding="utf-8")
    written.append(path)
    if "json" in args.format:
        path = out / f"{stem}.json"
        report.write_json(path, {"route": route.value, "fits": [report.ecm_json(f) for f in fits]})
        written.append(path)
    print(text, end="")
    return written


def _choice_observations(args, flows):
    incidents, table = _quarter_table(args, flows)
    start = dt.date(args.start.year, args.start.month, 1) if args.start else None
    end = None
    if args.end:
        nxt = args.end.shift(1)
        end = dt.date(nxt.year, nxt.month, 1) - dt.timedelta(days=1)
    sample = filter_choice_sample(incidents, window=(start, end))
    quarters = {Quarter.of(r.date) for r in sample}
    table = [q for q in table if q.quarter in quarters]
    return build_observations(sample, table), table


def cmd_choice(args) -> list[Path]:
    _require(args, "input", "incidents")
    out = _out_dir(args)
    flows = ingest_flows(args.input)
    obs, table = _choice_observations(args, flows)
    if args.all_weightings:
        combos = [(m, w) for m in ("alpha", "full") for w in (Weighting.NONE, Weighting.INVERSE_RESCUE, Weighting.FREQUENCY)]
    else:
        combos = [(args.model, Weighting.parse(args.weighting))]
    fits = [fit_conditional_logit(obs, weighting=w, model=m, vce=args.vce, quarter_table=table) for m, w in combos]
    main = fits[-1]
    stem = "choice_all" if args.all_weightings else f"choice_{main.weighting.value}_{main.model}"
    text = report.choice_table(fits)
    if main.beta is not None:
        text += "\n" + report.crossover_text(main)
    written = []
    path = out / f"{stem}.txt"
    path.write_text(text, encoding="utf-8")
    written.append(path)
    if "json" in args.format:
        path = out / f"{stem}.json"
        report.write_json(path, {"fits": [report.choice_json(f) for f in fits]})
        written.append(path)
    predicted = predicted_quarterly_distribution(main, table)
    empirical = empirical_quarterly_distribution(obs)
    if "csv" in args.format:
        path = out / "choice_shares.csv"
        report.write_share_csv(predicted, empirical, path)
        written.append(path)
    scenario = None
    if args.delta_pp is not None:
        scenario = counterfactual(main, table, args.delta_pp / 100.0)
        if scenario.any_clamped:
            logger.warning("counterfactual p clamped to [0, 1] in at least one quarter")
        path = out / f"counterfactual_{args.delta_pp:+g}pp.csv"
        report.write_scenario_csv(scenario, path)
        written.append(path)
    if "svg" in args.format:
        labels = [str(q) for q, _ in predicted]
        emp = dict(empirical)
        lines = []
        for b in SizeBin:
            lines.append(svg.Line(f"{b.label} predicted", [float(s[b]) for _, s in predicted]))
            lines.append(svg.Line(f"{b.label} observed", [float(emp[q][b]) if q in emp else float("nan")
                                                          for q, _ in predicted], dashed=True))
        path = out / "choice_shares.svg"
        svg.write_line_chart(path, labels, lines, title="Boat-size shares by quarter", y_label="share")
        written.append(path)
        if scenario is not None:
            lines = []
            for b in SizeBin:
                lines.append(svg.Line(f"{b.label} baseline", [float(r.baseline_shares[b]) for r in scenario.rows]))
                lines.append(svg.Line(f"{b.label} {args.delta_pp:+g}pp",
                                      [float(r.counterfactual_shares[b]) for r in scenario.rows], dashed=True))
            path = out / f"counterfactual_{args.delta_pp:+g}pp.svg"
            svg.write_line_chart(path, labels, lines, title="Counterfactual boat-size shares", y_label="share")
            written.append(path)
    print(text, end="")
    return written


def cmd_backtest(args) -> list[Path]:
    _require(args, "input", "split")
    out = _out_dir(args)
    route = Route.parse(args.route)
    _, series = _route_series(args, route)
    rep = backtest(series, series, args.split, _ecm_spec(args), min_months=args.min_months)
    stem = f"backtest_{route.value.lower()}"
    written = []
    if "csv" in args.format:
        written += [out / f"{stem}_summary.csv", out / f"{stem}_predictions.csv"]
        report.write_backtest_summary(rep, written[-2])
        report.write_backtest_predictions(rep, written[-1])
    if "json" in args.format:
        path = out / f"{stem}.json"
        report.write_json(path, {"route": route.value, **report.backtest_json(rep)})
        written.append(path)
    if "svg" in args.format:
        path = out / f"{stem}.svg"
        rows = rep.predictions
        svg.write_line_chart(path, [str(r.month) for r in rows], [
            svg.Line("observed", [r.observed for r in rows]),
            svg.Line("ECM one-step", [r.predicted for r in rows]),
            svg.Line("naive", [r.naive for r in rows], dashed=True),
        ], title=f"{route.value} one-step-ahead predictions", y_label="persons")
        written.append(path)
    print(f"train {rep.train_window[0]}..{rep.train_window[1]}: model MAE {rep.train_model_mae_persons:,.0f}, "
          f"naive MAE {rep.train_naive_mae_persons:,.0f}")
    print(f"test  {rep.test_window[0]}..{rep.test_window[1]}: model MAE {rep.model_mae_persons:,.0f}, "
          f"naive MAE {rep.naive_mae_persons:,.0f}")
    return written


def cmd_window(args) -> list[Path]:
    _require(args, "input")
    out = _out_dir(args)
    route = Route.parse(args.route)
    _, series = _route_series(args, route)
    est = expanding_window(series, series, _ecm_spec(args), start_len=args.start_len)
    stem = f"window_{route.value.lower()}"
    path = out / f"{stem}.csv"
    report.write_window_csv(est, path)
    written = [path]
    if "svg" in args.format:
        path = out / f"{stem}.svg"
        svg.write_line_chart(path, [str(e.window_end) for e in est],
                             [svg.Line("alpha1", [e.alpha1 if e.alpha1 is not None else float("nan") for e in est])],
                             title=f"{route.value} expanding-window adjustment speed", y_label="alpha1")
        written.append(path)
    ok = [e for e in est if e.alpha1 is not None]
    print(f"{len(ok)} of {len(est)} windows estimated")
    return written


def cmd_ttest(args) -> list[Path]:
    _require(args, "incidents")
    out = _out_dir(args)
    incidents, rep = ingest_incidents(args.incidents)
    rows = phase_comparison(incidents, _month_dates(args.phase2), _month_dates(args.phase3))
    text = report.ttest_table(rows)
    written = [out / "ttest.txt"]
    written[0].write_text(text, encoding="utf-8")
    if "csv" in args.format:
        written.append(out / "ttest.csv")
        report.write_ttest_csv(rows, written[-1])
    if "json" in args.format:
        written.append(out / "ttest.json")
        rng = lambda r: f"{r[0]}:{r[1]}"  # noqa: E731
        report.write_json(written[-1], {"phase_a": rng(args.phase2), "phase_b": rng(args.phase3),
                                        "rows": report.ttest_json(rows)})
    print(text, end="")
    return written


def cmd_synth(args) -> list[Path]:
    from crosslab import synth

    if args.seed is None:
        raise UsageError("synth needs an explicit --seed")
    out = _out_dir(args)
    written = []
    if args.ecm:
        spec = synth.EcmDgpSpec(beta0=args.beta0, beta1=args.beta1, alpha0=args.alpha0, alpha1=args.alpha1,
                                alpha2=args.alpha2, noise_sd=args.noise_sd, length=args.length, seed=args.seed,
                                start_month=args.start_month,
                                rescue_process=synth.RescueProcess(args.rescue_process))
        data = synth.generate_ecm_data(spec)
        path = out / "synth_ecm_flows.csv"
        write_flows([synth.ecm_to_flows(data)], path)
        written.append(path)
    if args.choice:
        a_m, a_l, b_m, b_l = args.coef
        alpha, beta = synth.coefficients(a_m, a_l, b_m, b_l)
        n_q = args.quarters
        first = args.start_month.quarter
        quarters = []
        for i in range(n_q):
            idx = first.year * 4 + first.quarter - 1 + i
            p = args.p_low + (args.p_high - args.p_low) * (i / (n_q - 1) if n_q > 1 else 0.0)
            quarters.append((Quarter(idx // 4, idx % 4 + 1), round(p, 6), args.per_quarter))
        spec = synth.ChoiceDgpSpec(alpha, beta, tuple(quarters), args.seed)
        obs = synth.generate_choice_data(spec)
        written += [out / "synth_choice_incidents.csv", out / "synth_choice_flows.csv"]
        write_incidents(synth.choice_to_incidents(obs, args.seed), written[-2])
        write_flows([synth.choice_flows(quarters)], written[-1])
    if not written:
        raise UsageError("choose --ecm and/or --choice")
    for p in written:
        print(p)
    return written


def cmd_coverage(args) -> list[Path]:
    _require(args, "input", "incidents")
    out = _out_dir(args)
    flows = ingest_flows(args.input)
    route = Route.parse(args.route)
    if route not in flows:
        raise CrossLabError(f"no {route.value} rows in {args.input}")
    incidents, _ = ingest_incidents(args.incidents)
    rows = coverage_diagnostic(flows[route], incidents, args.low, args.high)
    path = out / f"coverage_{route.value.lower()}.csv"
    report.write_csv(path, ("quarter", "incident_persons", "flow_arrivals", "ratio", "flagged"),
                     ((str(r.quarter), r.incident_persons, r.flow_arrivals, r.ratio, int(r.flagged)) for r in rows))
    n_flag = sum(r.flagged for r in rows)
    print(f"{n_flag} of {len(rows)} quarters outside [{args.low}, {args.high}]")
    return [path]


COMMANDS = {
    "derive": cmd_derive,
    "ecm": cmd_ecm,
    "choice": cmd_choice,
    "backtest": cmd_backtest,
    "window": cmd_window,
    "ttest": cmd_ttest,
    "synth": cmd_synth,
    "coverage": cmd_coverage,
}


def _coef4(text: str) -> tuple[float, float, float, float]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad coefficient list {text!r}") from None
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("expected alpha_mid,alpha_large,beta_mid,beta_large")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="monthly flow CSV")
    common.add_argument("--incidents", help="incident CSV")
    common.add_argument("--out", default=os.environ.get("CROSSLAB_OUT", "crosslab_out"),
                        help="output directory (default: $CROSSLAB_OUT or ./crosslab_out)")
    common.add_argument("--format", type=_formats, default=_formats(DEFAULT_FORMATS),
                        help="comma list of csv,json,svg (default: csv,json)")
    common.add_argument("--seed", type=int, help="random seed (synth only)")
    common.add_argument("-v", "--verbose", action="store_true")

    ecm_flags = argparse.ArgumentParser(add_help=False)
    ecm_flags.add_argument("--route", default="central")
    ecm_flags.add_argument("--dep", default="level", choices=[d.value for d in DepVariable])
    ecm_flags.add_argument("--no-short-run", action="store_true", help="drop the lagged change in P_rescue")
    ecm_flags.add_argument("--lagged-dep", action="store_true", help="add the lagged change in the outcome")

    parser = argparse.ArgumentParser(prog="crosslab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("derive", parents=[common], help="derived monthly series and quarter table")

    p = sub.add_parser("ecm", parents=[common, ecm_flags], help="two-step error-correction fit")
    p.add_argument("--all-specs", action="store_true", help="fit all nine dependent-variable/regressor sets")
    p.add_argument("--window", type=_month_range, help="restrict to START:END months")

    p = sub.add_parser("choice", parents=[common], help="conditional logit of boat size")
    p.add_argument("--weighting", default="frequency", choices=[w.value for w in Weighting])
    p.add_argument("--model", default="full", choices=["full", "alpha"])
    p.add_argument("--vce", default="model", choices=["model", "robust"])
    p.add_argument("--all-weightings", action="store_true",
                   help="six fits: fixed-effects-only and full model under each weighting")
    p.add_argument("--delta-pp", type=float, help="counterfactual shift of p in percentage points")
    p.add_argument("--start", type=_month, default=Month(2016, 1), help="first month of the choice sample")
    p.add_argument("--end", type=_month, help="last month of the choice sample")

    p = sub.add_parser("backtest", parents=[common, ecm_flags], help="train/test one-step-ahead evaluation")
    p.add_argument("--split", type=_month, help="last training month, YYYY-MM")
    p.add_argument("--min-months", type=int, default=12)

    p = sub.add_parser("window", parents=[common, ecm_flags], help="expanding-window adjustment speed")
    p.add_argument("--start-len", type=int, default=5)

    p = sub.add_parser("ttest", parents=[common], help="incident characteristics across two phases")
    p.add_argument("--phase2", type=_month_range, default=_month_range("2015-05:2017-04"))
    p.add_argument("--phase3", type=_month_range, default=_month_range("2017-05:2019-12"))

    p = sub.add_parser("synth", parents=[common], help="write synthetic inputs")
    p.add_argument("--ecm", action="store_true", help="monthly flows from the error-correction process")
    p.add_argument("--choice", action="store_true", help="incidents and flows from the logit process")
    p.add_argument("--length", type=int, default=120)
    p.add_argument("--beta0", type=float, default=-10.0)
    p.add_argument("--beta1", type=float, default=28.0)
    p.add_argument("--alpha0", type=float, default=0.0)
    p.add_argument("--alpha1", type=float, default=-0.4)
    p.add_argument("--alpha2", type=float, default=0.0)
    p.add_argument("--noise-sd", type=float, default=0.5)
    p.add_argument("--rescue-process", choices=["ar1", "random_walk"], default="ar1",
                   help="clamped process for P_rescue (AR(1) keeps long paths away from the bounds)")
    p.add_argument("--start-month", type=_month, default=Month(2016, 1))
    p.add_argument("--coef", type=_coef4, default=(1.786, 3.849, -3.587, -6.511),
                   help="alpha_mid,alpha_large,beta_mid,beta_large")
    p.add_argument("--quarters", type=int, default=16)
    p.add_argument("--per-quarter", type=int, default=100)
    p.add_argument("--p-low", type=float, default=0.1)
    p.add_argument("--p-high", type=float, default=0.8)

    p = sub.add_parser("coverage", parents=[common], help="incident persons against flow arrivals")
    p.add_argument("--route", default="central")
    p.add_argument("--low", type=float, default=0.7)
    p.add_argument("--high", type=float, default=1.1)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except CrossLabError as exc:
        print(f"crosslab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"crosslab {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
