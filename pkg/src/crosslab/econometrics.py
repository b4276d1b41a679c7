"""OLS, unit-root and cointegration tests, and the two-step error-correction model.

The ECM is estimated in two stages. Stage 1 regresses the crossing measure
on the rescue probability (the long-run equilibrium); stage 2 regresses the
first difference of the crossing measure on a constant, the lagged stage-1
residual, and optionally the lagged differenced rescue probability and the
lagged differenced dependent variable.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from crosslab.errors import (
    CrossLabError,
    DegenerateResiduals,
    InsufficientOverlap,
    RankDeficient,
    SeriesTooShort,
    TooFewObservations,
    WrongDepVariable,
)
from crosslab.periods import Month
from crosslab.series import DerivedSeries
from crosslab.stats import student_t_sf

#: residual variance below this is treated as an exact fit
DEGENERATE_VARIANCE = 1e-12


# --------------------------------------------------------------------------
# OLS
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray
    standard_errors: np.ndarray
    residuals: np.ndarray
    r_squared: float
    adj_r_squared: float
    n_obs: int
    names: tuple[str, ...] = ()
    covariance: np.ndarray | None = None
    fitted: np.ndarray | None = None
    has_constant: bool = True

    @property
    def df_resid(self) -> int:
        return self.n_obs - len(self.coefficients)

    @property
    def tvalues(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.coefficients / self.standard_errors

    @property
    def pvalues(self) -> np.ndarray:
        return np.array([2.0 * student_t_sf(abs(t), self.df_resid) if np.isfinite(t) else 0.0
                         for t in self.tvalues])

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def se(self, name: str) -> float:
        return float(self.standard_errors[self.names.index(name)])


def ols(y, X=None, add_constant: bool = True, names: Sequence[str] | None = None,
        robust: bool = False) -> OlsFit:
    """Least squares of ``y`` on the columns of ``X`` (plus a leading constant).

    Standard errors are classical unless ``robust`` is set (HC1). R-squared
    is centred when a constant is present; a constant-only fit has R-squared 0.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if X is None:
        X = np.empty((n, 0))
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != n:
        raise CrossLabError(f"y has {n} rows, X has {X.shape[0]}")
    if add_constant:
        X = np.column_stack([np.ones(n), X])
    k = X.shape[1]
    if names is None:
        names = (["const"] if add_constant else []) + [f"x{i}" for i in range(1, X.shape[1] + 1 - add_constant)]
    names = tuple(names)
    if len(names) != k:
        raise CrossLabError(f"{len(names)} names for {k} regressors")
    if n <= k:
        raise TooFewObservations(f"{n} observations for {k} regressors")
    if k == 0:
        raise CrossLabError("no regressors")
    if np.linalg.matrix_rank(X) < k:
        raise RankDeficient(f"design matrix ({n}x{k}) is not of full column rank")

    q, r = np.linalg.qr(X)
    beta = np.linalg.solve(r, q.T @ y)
    # one round of iterative refinement
    beta += np.linalg.solve(r, q.T @ (y - X @ beta))
    fitted = X @ beta
    resid = y - fitted
    rss = float(resid @ resid)
    df = n - k
    rinv = np.linalg.inv(r)
    xtx_inv = rinv @ rinv.T
    if robust:
        meat = (X * resid[:, None] ** 2).T @ X
        cov = xtx_inv @ meat @ xtx_inv * (n / df)
    else:
        cov = xtx_inv * (rss / df)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    has_const = add_constant or bool(np.any(np.all(X == X[0], axis=0) & (X[0] != 0)))
    if has_const:
        tss = float(((y - y.mean()) ** 2).sum())
        if k == 1:
            r2 = 0.0
        elif tss == 0.0:
            r2 = 1.0
        else:
            r2 = 1.0 - rss / tss
        adj = 1.0 - (1.0 - r2) * (n - 1) / df
    else:
        tss = float(y @ y)
        r2 = 1.0 - rss / tss if tss > 0 else 1.0
        adj = 1.0 - (1.0 - r2) * n / df
    return OlsFit(beta, se, resid, r2, adj, n, names, cov, fitted, has_const)


# --------------------------------------------------------------------------
# unit roots
# --------------------------------------------------------------------------


class Deterministic(str, enum.Enum):
    NONE = "n"
    CONSTANT = "c"
    CONSTANT_TREND = "ct"

    @classmethod
    def parse(cls, text: "str | Deterministic") -> "Deterministic":
        if isinstance(text, Deterministic):
            return text
        key = text.strip().lower()
        aliases = {"n": cls.NONE, "none": cls.NONE, "nc": cls.NONE,
                   "c": cls.CONSTANT, "constant": cls.CONSTANT,
                   "ct": cls.CONSTANT_TREND, "constanttrend": cls.CONSTANT_TREND,
                   "constant_trend": cls.CONSTANT_TREND, "trend": cls.CONSTANT_TREND}
        try:
            return aliases[key]
        except KeyError:
            raise CrossLabError(f"unknown deterministic specification {text!r}") from None


# MacKinnon (2010) "Critical Values for Cointegration Tests", Queen's
# Economics Department Working Paper 1227, Table 2: response-surface
# coefficients (tau_inf, tau_1, tau_2, tau_3); crit = sum tau_j / T**j.
_MACKINNON_2010 = {
    # one variable (unit-root test on an observed series)
    ("n", 1): {"1%": (-2.56574, -2.2358, -3.627, 0.0),
               "5%": (-1.94100, -0.2686, -3.365, 31.223),
               "10%": (-1.61682, 0.2656, -2.714, 25.364)},
    ("c", 1): {"1%": (-3.43035, -6.5393, -16.786, -79.433),
               "5%": (-2.86154, -2.8903, -4.234, -40.040),
               "10%": (-2.56677, -1.5384, -2.809, 0.0)},
    ("ct", 1): {"1%": (-3.95877, -9.0531, -28.428, -134.155),
                "5%": (-3.41049, -4.3904, -9.036, -45.374),
                "10%": (-3.12705, -2.5856, -3.925, -22.380)},
    # two variables, constant in the cointegrating regression (Engle-Granger)
    ("c", 2): {"1%": (-3.89644, -10.9519, -33.527, 0.0),
               "5%": (-3.33613, -6.1101, -6.823, 0.0),
               "10%": (-3.04445, -4.2412, -2.720, 0.0)},
}


def mackinnon_critical_values(case: str, n_vars: int, nobs: int) -> dict[str, float]:
    coefs = _MACKINNON_2010[(case, n_vars)]
    return {level: c[0] + c[1] / nobs + c[2] / nobs ** 2 + c[3] / nobs ** 3
            for level, c in coefs.items()}


@dataclass(frozen=True)
class AdfResult:
    test_statistic: float
    lags: int
    deterministic: Deterministic
    critical_values: dict[str, float]
    n_obs: int
    coefficient: float = math.nan

    @property
    def reject_at_5pct(self) -> bool:
        return self.test_statistic < self.critical_values["5%"]


def _adf_statistic(y: np.ndarray, lags: int, det: Deterministic) -> tuple[float, float, int]:
    dy = np.diff(y)
    rows = np.arange(lags, dy.shape[0])
    dep = dy[rows]
    cols = [y[rows]]
    for j in range(1, lags + 1):
        cols.append(dy[rows - j])
    if det is Deterministic.CONSTANT_TREND:
        cols.append(rows + 1.0)
    X = np.column_stack(cols)
    fit = ols(dep, X, add_constant=det is not Deterministic.NONE)
    i = 1 if det is not Deterministic.NONE else 0
    gamma = float(fit.coefficients[i])
    rss = float(fit.residuals @ fit.residuals)
    scale = float(dep @ dep) + float(y[rows] @ y[rows])
    if rss <= 1e-20 * max(scale, 1e-300):
        # exact fit: no sampling noise, so no evidence of mean reversion unless gamma is clearly negative
        stat = 0.0 if abs(gamma) <= 1e-10 else math.copysign(math.inf, gamma)
    else:
        stat = gamma / float(fit.standard_errors[i])
    return stat, gamma, fit.n_obs


def adf_test(series, lags: int = 0, deterministic: "str | Deterministic" = Deterministic.CONSTANT) -> AdfResult:
    """Augmented Dickey-Fuller t-test on the lagged level."""
    y = np.asarray(series, dtype=float)
    det = Deterministic.parse(deterministic)
    if lags < 0:
        raise CrossLabError("lags must be nonnegative")
    if y.shape[0] <= lags + 3:
        raise SeriesTooShort(f"{y.shape[0]} points for {lags} lags")
    stat, gamma, nobs = _adf_statistic(y, lags, det)
    return AdfResult(stat, lags, det, mackinnon_critical_values(det.value, 1, nobs), nobs, gamma)


def engle_granger_test(y, x, lags: int = 0) -> AdfResult:
    """ADF without deterministic terms on the residuals of ``y = a + b x``."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if y.shape != x.shape:
        raise CrossLabError("y and x must have equal length")
    if y.shape[0] <= 10:
        raise SeriesTooShort(f"{y.shape[0]} points; need more than 10")
    fit = ols(y, x)
    if float(np.var(fit.residuals)) < DEGENERATE_VARIANCE:
        raise DegenerateResiduals("cointegrating regression fits exactly; residual variance is zero")
    if y.shape[0] - 1 <= lags + 2:
        raise SeriesTooShort(f"{y.shape[0]} points for {lags} lags")
    stat, gamma, nobs = _adf_statistic(fit.residuals, lags, Deterministic.NONE)
    return AdfResult(stat, lags, Deterministic.NONE, mackinnon_critical_values("c", 2, nobs), nobs, gamma)


# --------------------------------------------------------------------------
# error-correction model
# --------------------------------------------------------------------------


class DepVariable(str, enum.Enum):
    LEVEL = "level"
    LOG = "log"
    LOG_ODDS = "logodds"

    @classmethod
    def parse(cls, text: "str | DepVariable") -> "DepVariable":
        if isinstance(text, DepVariable):
            return text
        key = text.strip().lower().replace("_", "").replace("-", "")
        for d in cls:
            if d.value == key:
                return d
        raise CrossLabError(f"unknown dependent variable {text!r}")


@dataclass(frozen=True)
class EcmSpec:
    dep: DepVariable = DepVariable.LEVEL
    include_short_run: bool = True
    include_lagged_dep: bool = False

    def __post_init__(self):
        object.__setattr__(self, "dep", DepVariable.parse(self.dep))

    @property
    def label(self) -> str:
        parts = [self.dep.value]
        parts.append("sr" if self.include_short_run else "nosr")
        if self.include_lagged_dep:
            parts.append("lagdep")
        return "_".join(parts)


#: the nine dependent-variable x regressor-set combinations of the robustness grid
ALL_SPECS = tuple(
    EcmSpec(dep, sr, lag)
    for dep in DepVariable
    for sr, lag in ((False, False), (True, False), (True, True))
)


@dataclass(frozen=True)
class EcmFit:
    stage1: OlsFit
    stage2: OlsFit | None
    spec: EcmSpec
    months: tuple[Month, ...] = ()
    mean_dep_var: float = math.nan

    @property
    def dep_variable(self) -> DepVariable:
        return self.spec.dep

    @property
    def beta0(self) -> float:
        return float(self.stage1.coefficients[0])

    @property
    def beta1(self) -> float:
        return float(self.stage1.coefficients[1])

    @property
    def alpha0(self) -> float:
        return self.stage2.coef("const")

    @property
    def alpha1(self) -> float:
        return self.stage2.coef("ec_lag")

    @property
    def alpha2(self) -> float | None:
        return self.stage2.coef("d_p_rescue_lag") if self.spec.include_short_run else None

    @property
    def lagged_dep_coef(self) -> float | None:
        return self.stage2.coef("d_dep_lag") if self.spec.include_lagged_dep else None


def equilibrium_fit(beta0: float, beta1: float, dep: "str | DepVariable" = DepVariable.LEVEL) -> EcmFit:
    """An EcmFit carrying only published equilibrium coefficients."""
    nan2 = np.array([math.nan, math.nan])
    stage1 = OlsFit(np.array([beta0, beta1], dtype=float), nan2, np.empty(0), math.nan, math.nan, 0,
                    ("const", "p_rescue"))
    return EcmFit(stage1, None, EcmSpec(DepVariable.parse(dep)))


def dependent_values(series: DerivedSeries, dep: DepVariable) -> np.ndarray:
    attr = {DepVariable.LEVEL: "n_cross_thousands", DepVariable.LOG: "log_n_cross",
            DepVariable.LOG_ODDS: "log_odds"}[dep]
    return np.array([getattr(p, attr) for p in series], dtype=float)


def to_persons(values, dep: DepVariable, potential: float) -> np.ndarray:
    """Map dependent-variable values back to monthly persons."""
    v = np.asarray(values, dtype=float)
    if dep is DepVariable.LEVEL:
        return v * 1000.0
    if dep is DepVariable.LOG:
        return np.exp(v) * 1000.0
    return potential / (1.0 + np.exp(-v))


def align(series: DerivedSeries, rescue: DerivedSeries | Sequence[tuple[Month, float]]
          ) -> tuple[list[Month], np.ndarray, DerivedSeries]:
    """Intersect months of the dependent series and the rescue-probability series."""
    if isinstance(rescue, DerivedSeries):
        pmap = {pt.month: pt.p_rescue for pt in rescue}
    else:
        pmap = dict(rescue)
    pts = [pt for pt in series if pt.month in pmap]
    months = [pt.month for pt in pts]
    for a, b in zip(months, months[1:]):
        if b.index != a.index + 1:
            raise InsufficientOverlap(f"aligned months are not contiguous at {a.shift(1)}")
    sub = DerivedSeries(series.route, series.potential, tuple(pts))
    return months, np.array([pmap[m] for m in months], dtype=float), sub


def _fit_arrays(y: np.ndarray, p: np.ndarray, spec: EcmSpec, months=(), min_months: int = 12) -> EcmFit:
    n = y.shape[0]
    if n < min_months:
        raise InsufficientOverlap(f"{n} aligned months; need at least {min_months}")
    stage1 = ols(y, p, names=("const", "p_rescue"))
    if float(np.var(stage1.residuals)) < DEGENERATE_VARIANCE:
        raise DegenerateResiduals("stage-1 residual variance is zero")
    e = stage1.residuals
    dy = np.diff(y)            # dy[t-1] = y[t] - y[t-1]
    dp = np.diff(p)
    start = 2 if (spec.include_short_run or spec.include_lagged_dep) else 1
    t = np.arange(start, n)
    dep = dy[t - 1]
    cols = [e[t - 1]]
    names = ["const", "ec_lag"]
    if spec.include_short_run:
        cols.append(dp[t - 2])
        names.append("d_p_rescue_lag")
    if spec.include_lagged_dep:
        cols.append(dy[t - 2])
        names.append("d_dep_lag")
    stage2 = ols(dep, np.column_stack(cols), names=names)
    return EcmFit(stage1, stage2, spec, tuple(months), float(dep.mean()))


def fit_ecm(series: DerivedSeries, rescue, spec: EcmSpec | None = None, min_months: int = 12) -> EcmFit:
    """Engle-Granger two-step ECM of the chosen crossing measure on the rescue probability.

    ``rescue`` is the derived Central-route series (its ``p_rescue`` is used)
    or a sequence of ``(month, p_rescue)``.
    """
    spec = spec or EcmSpec()
    months, p, sub = align(series, rescue)
    y = dependent_values(sub, spec.dep)
    return _fit_arrays(y, p, spec, months, min_months)


def equilibrium_delta(fit: EcmFit, p_from: float, p_to: float) -> float:
    """Long-run change in monthly persons when the rescue probability moves ``p_from -> p_to``."""
    if fit.dep_variable is not DepVariable.LEVEL:
        raise WrongDepVariable(f"equilibrium_delta needs a level fit, got {fit.dep_variable.value}")
    return fit.beta1 * (p_from - p_to) * 1000.0


@dataclass(frozen=True)
class WindowEstimate:
    window_end: Month | int
    n_months: int
    alpha1: float | None
    fit: EcmFit | None = None
    reason: str | None = None


def expanding_window(series: DerivedSeries, rescue, spec: EcmSpec | None = None,
                     start_len: int = 5) -> list[WindowEstimate]:
    """Re-fit the ECM on every prefix of length ``start_len..N``.

    Windows whose fit fails keep ``alpha1=None`` and the error text in ``reason``.
    """
    spec = spec or EcmSpec()
    if start_len < 5:
        raise CrossLabError("start_len must be at least 5")
    months, p, sub = align(series, rescue)
    y = dependent_values(sub, spec.dep)
    out = []
    for n in range(start_len, len(months) + 1):
        try:
            fit = _fit_arrays(y[:n], p[:n], spec, months[:n], min_months=start_len)
        except CrossLabError as exc:
            out.append(WindowEstimate(months[n - 1], n, None, None, f"{type(exc).__name__}: {exc}"))
        else:
            out.append(WindowEstimate(months[n - 1], n, fit.alpha1, fit))
    return out


@dataclass(frozen=True)
class BacktestRow:
    month: Month
    observed: float
    predicted: float
    naive: float
    window: str


@dataclass(frozen=True)
class BacktestReport:
    train_window: tuple[Month, Month]
    test_window: tuple[Month, Month]
    model_mae_persons: float
    naive_mae_persons: float
    train_model_mae_persons: float
    train_naive_mae_persons: float
    predictions: tuple[BacktestRow, ...] = field(default_factory=tuple)
    fit: EcmFit | None = None


def backtest(series: DerivedSeries, rescue, split: Month, spec: EcmSpec | None = None,
             min_months: int = 12) -> BacktestReport:
    """Train on months up to ``split`` and predict each later month one step ahead.

    A month's prediction is the observed previous value plus the change the
    trained stage-2 equation implies from observed lagged regressors. The
    naive predictor repeats the observed previous value. MAE is in persons.
    """
    spec = spec or EcmSpec()
    months, p, sub = align(series, rescue)
    y = dependent_values(sub, spec.dep)
    n_train = sum(1 for m in months if m <= split)
    if len(months) - n_train < 1:
        raise InsufficientOverlap(f"no months after split {split}")
    if len(months) - n_train < min_months:
        raise InsufficientOverlap(
            f"{len(months) - n_train} months after split {split}; need at least {min_months}")
    fit = _fit_arrays(y[:n_train], p[:n_train], spec, months[:n_train], min_months)
    persons = to_persons(y, spec.dep, series.potential)
    start = 2 if (spec.include_short_run or spec.include_lagged_dep) else 1
    rows = []
    for t in range(start, len(months)):
        e = y[t - 1] - fit.beta0 - fit.beta1 * p[t - 1]
        d = fit.alpha0 + fit.alpha1 * e
        if spec.include_short_run:
            d += fit.alpha2 * (p[t - 1] - p[t - 2])
        if spec.include_lagged_dep:
            d += fit.lagged_dep_coef * (y[t - 1] - y[t - 2])
        pred = float(to_persons(y[t - 1] + d, spec.dep, series.potential))
        rows.append(BacktestRow(months[t], float(persons[t]), pred, float(persons[t - 1]),
                                "train" if t < n_train else "test"))

    def mae(window: str, attr: str) -> float:
        errs = [abs(getattr(r, attr) - r.observed) for r in rows if r.window == window]
        return float(np.mean(errs)) if errs else math.nan

    return BacktestReport(
        train_window=(months[0], months[n_train - 1]),
        test_window=(months[n_train], months[-1]),
        model_mae_persons=mae("test", "predicted"),
        naive_mae_persons=mae("test", "naive"),
        train_model_mae_persons=mae("train", "predicted"),
        train_naive_mae_persons=mae("train", "naive"),
        predictions=tuple(rows),
        fit=fit,
    )
