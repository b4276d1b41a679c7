"""Weighted conditional logit for the smuggler's boat-size choice.

Each incident chooses one of three size bins. Deterministic utility is
``alpha_n + beta_n * p`` where ``p`` is the quarter's interception
probability; the Small bin is the base with ``alpha = beta = 0``.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from crosslab import kernels
from crosslab.dataset import IncidentRecord
from crosslab.errors import (
    CrossLabError,
    DegenerateWeights,
    NoConvergence,
    NotIdentified,
    RescueProbabilityZero,
    Separation,
    ZeroQuarterCount,
)
from crosslab.periods import Quarter
from crosslab.series import QuarterPoint

GRADIENT_TOL = 1e-8
MAX_ITER = 100
MAX_HALVINGS = 30
# |theta| beyond this means the likelihood is climbing towards a boundary
DIVERGENCE_BOUND = 50.0


class SizeBin(enum.IntEnum):
    SMALL = 0   # 1-50 persons
    MID = 1     # 51-100
    LARGE = 2   # 101+

    @property
    def label(self) -> str:
        return {0: "1-50", 1: "51-100", 2: "101+"}[self.value]


BIN_EDGES = (50, 100)


def size_bin(n_people: int) -> SizeBin:
    """Bin a head count; bins are closed on the right (<=50, <=100)."""
    if n_people is None or n_people <= 0:
        raise CrossLabError(f"cannot bin a boat with {n_people} people")
    if n_people <= BIN_EDGES[0]:
        return SizeBin.SMALL
    if n_people <= BIN_EDGES[1]:
        return SizeBin.MID
    return SizeBin.LARGE


class Weighting(str, enum.Enum):
    NONE = "none"
    INVERSE_RESCUE = "rescue"
    FREQUENCY = "frequency"

    @classmethod
    def parse(cls, text: "str | Weighting | None") -> "Weighting":
        if text is None:
            return cls.NONE
        if isinstance(text, Weighting):
            return text
        key = text.strip().lower().replace("_", "").replace("-", "")
        aliases = {"none": cls.NONE, "unweighted": cls.NONE, "rescue": cls.INVERSE_RESCUE,
                   "inverserescue": cls.INVERSE_RESCUE, "frequency": cls.FREQUENCY,
                   "freq": cls.FREQUENCY}
        try:
            return aliases[key]
        except KeyError:
            raise CrossLabError(f"unknown weighting {text!r}") from None


@dataclass(frozen=True)
class ChoiceObservation:
    incident_id: str
    quarter: Quarter
    chosen_bin: SizeBin
    p_interception: float
    weight: float = 1.0


def build_observations(incidents: Iterable[IncidentRecord],
                       quarter_table: Sequence[QuarterPoint]) -> list[ChoiceObservation]:
    """One observation per incident, carrying its quarter's interception probability."""
    p_of = {q.quarter: q.p_interception for q in quarter_table}
    out = []
    for inc in incidents:
        q = Quarter.of(inc.date)
        if q not in p_of:
            raise CrossLabError(f"incident {inc.incident_id}: no interception probability for {q}")
        out.append(ChoiceObservation(inc.incident_id, q, size_bin(inc.n_people), p_of[q]))
    return out


def make_weights(observations: Sequence[ChoiceObservation], weighting: "Weighting | str",
                 quarter_table: Sequence[QuarterPoint] | None = None) -> list[ChoiceObservation]:
    """Attach likelihood weights.

    ``frequency``: 1 / (observations in the same quarter), so every quarter
    counts equally. ``rescue``: 1 / (1 - p_interception). ``none``: 1.
    The quarter table, when given, supplies p for the rescue weights.
    """
    weighting = Weighting.parse(weighting)
    if weighting is Weighting.NONE:
        return [replace(o, weight=1.0) for o in observations]
    if weighting is Weighting.FREQUENCY:
        counts = Counter(o.quarter for o in observations)
        out = []
        for o in observations:
            if counts[o.quarter] == 0:  # pragma: no cover - a counted quarter is never empty
                raise ZeroQuarterCount(f"{o.quarter}: no observations")
            out.append(replace(o, weight=1.0 / counts[o.quarter]))
        return out
    p_of = {q.quarter: q.p_interception for q in quarter_table} if quarter_table is not None else {}
    out = []
    for o in observations:
        p = p_of.get(o.quarter, o.p_interception)
        if p >= 1.0:
            raise RescueProbabilityZero(f"{o.quarter}: interception probability is 1")
        out.append(replace(o, weight=1.0 / (1.0 - p)))
    return out


def _softmax(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    e = np.exp(v - v.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def utilities(alpha: Mapping, beta: Mapping | None, p) -> np.ndarray:
    """Deterministic utilities (Small, Mid, Large) at interception probability ``p``."""
    p = np.asarray(p, dtype=float)
    v = np.zeros(p.shape + (3,))
    for b in (SizeBin.MID, SizeBin.LARGE):
        v[..., b] = alpha[b] + (beta[b] * p if beta else 0.0)
    return v


def choice_probabilities(alpha: Mapping, beta: Mapping | None, p_interception) -> np.ndarray:
    """Logit shares (Small, Mid, Large); vectorises over an array of p."""
    p = np.asarray(p_interception, dtype=float)
    if np.any((p < 0.0) | (p > 1.0)):
        raise CrossLabError("interception probability must lie in [0, 1]")
    return _softmax(utilities(alpha, beta, p))


PARAM_NAMES = ("alpha_mid", "alpha_large", "beta_mid", "beta_large")


@dataclass(frozen=True)
class ChoiceFit:
    alpha: dict
    beta: dict | None
    standard_errors: dict
    covariance: np.ndarray
    log_likelihood: float
    null_log_likelihood: float
    n_choices: int
    n_alternatives: int
    weighting: Weighting | None = Weighting.NONE
    vce: str = "model"
    iterations: int = 0
    gradient_norm: float = 0.0
    ll_history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def pseudo_r2(self) -> float:
        return 1.0 - self.log_likelihood / self.null_log_likelihood

    @property
    def model(self) -> str:
        return "full" if self.beta is not None else "alpha"

    @property
    def param_names(self) -> tuple[str, ...]:
        return PARAM_NAMES if self.beta is not None else PARAM_NAMES[:2]

    @property
    def params(self) -> np.ndarray:
        vals = [self.alpha[SizeBin.MID], self.alpha[SizeBin.LARGE]]
        if self.beta is not None:
            vals += [self.beta[SizeBin.MID], self.beta[SizeBin.LARGE]]
        return np.array(vals)

    def probabilities(self, p) -> np.ndarray:
        return choice_probabilities(self.alpha, self.beta, p)

    @classmethod
    def from_coefficients(cls, alpha_mid: float, alpha_large: float,
                          beta_mid: float | None = None, beta_large: float | None = None,
                          standard_errors: Mapping[str, float] | None = None) -> "ChoiceFit":
        """A fit holding externally supplied coefficients (no likelihood attached)."""
        beta = None if beta_mid is None else {SizeBin.MID: beta_mid, SizeBin.LARGE: beta_large}
        k = 2 if beta is None else 4
        return cls({SizeBin.MID: alpha_mid, SizeBin.LARGE: alpha_large}, beta,
                   dict(standard_errors or {}), np.full((k, k), np.nan), math.nan, math.nan, 0, 0)


def _arrays(observations: Sequence[ChoiceObservation], model: str):
    p = np.array([o.p_interception for o in observations], dtype=float)
    chosen = np.array([int(o.chosen_bin) for o in observations], dtype=np.int64)
    w = np.array([o.weight for o in observations], dtype=float)
    feats = np.ones((len(observations), 1)) if model == "alpha" else np.column_stack([np.ones_like(p), p])
    return np.ascontiguousarray(feats), chosen, w, p


def scores(theta: np.ndarray, feats: np.ndarray, chosen: np.ndarray) -> np.ndarray:
    """Per-observation (unweighted) gradient contributions, shape (n, 2k)."""
    n, k = feats.shape
    v = np.zeros((n, 3))
    v[:, 1:] = feats @ theta.reshape(k, 2)
    prob = _softmax(v)
    d = np.zeros((n, 3))
    d[np.arange(n), chosen] = 1.0
    resid = (d - prob)[:, 1:]
    return (feats[:, :, None] * resid[:, None, :]).reshape(n, 2 * k)


def log_likelihood(theta, observations: Sequence[ChoiceObservation], model: str = "full"):
    """Weighted log-likelihood, gradient and Hessian at ``theta``."""
    feats, chosen, w, _ = _arrays(observations, model)
    return kernels.logit_llgh(np.asarray(theta, dtype=float), feats, chosen, w)


def fit_conditional_logit(observations: Sequence[ChoiceObservation],
                          weighting: "Weighting | str | None" = None,
                          model: str = "full", vce: str = "model",
                          tol: float = GRADIENT_TOL, max_iter: int = MAX_ITER,
                          quarter_table: Sequence[QuarterPoint] | None = None) -> ChoiceFit:
    """Maximum-likelihood fit by Newton's method with step halving, from zero.

    ``weighting=None`` keeps the weights already attached to the
    observations; otherwise they are recomputed with :func:`make_weights`.
    ``model="alpha"`` drops the interception terms. ``vce="model"`` takes
    the covariance from the inverse weighted negative Hessian (weights as
    frequency weights); ``vce="robust"`` uses the sandwich form with the
    n/(n-1) small-sample factor (weights as sampling weights).
    """
    if model not in ("full", "alpha"):
        raise CrossLabError(f"unknown model {model!r}")
    if vce not in ("model", "robust"):
        raise CrossLabError(f"unknown vce {vce!r}")
    observations = list(observations)
    if weighting is not None:
        observations = make_weights(observations, weighting, quarter_table)
        weighting = Weighting.parse(weighting)
    else:
        # custom weights carry no named scheme
        weighting = Weighting.NONE if all(o.weight == 1.0 for o in observations) else None
    if not observations:
        raise CrossLabError("no observations")
    feats, chosen, w, p = _arrays(observations, model)
    if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
        raise DegenerateWeights("weights must be finite and positive")
    missing = [b.label for b in SizeBin if not np.any(chosen == b)]
    if missing:
        raise Separation(f"bins never chosen: {', '.join(missing)}")
    if model == "full" and np.unique(p).size < 2:
        raise NotIdentified("interception coefficients need at least two distinct p values")

    k = 2 * feats.shape[1]
    theta = np.zeros(k)
    ll, grad, hess = kernels.logit_llgh(theta, feats, chosen, w)
    history = [ll]
    converged = False
    it = 0
    for it in range(max_iter + 1):
        gnorm = float(np.max(np.abs(grad)))
        if gnorm < tol:
            converged = True
            break
        if it == max_iter:
            break
        try:
            step = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError:
            raise Separation("Hessian is singular; a bin is perfectly predicted") from None
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = theta + t * step
            ll_c, g_c, h_c = kernels.logit_llgh(cand, feats, chosen, w)
            # equal-within-rounding steps are accepted only if they shrink the gradient
            flat = ll_c >= ll - 1e-12 * max(1.0, abs(ll)) and np.max(np.abs(g_c)) < gnorm
            if ll_c > ll or flat:
                break
            t *= 0.5
        else:
            raise NoConvergence(f"no ascent step found at iteration {it} (gradient {gnorm:.3g})")
        theta, ll, grad, hess = cand, ll_c, g_c, h_c
        history.append(ll_c)
        if np.max(np.abs(theta)) > DIVERGENCE_BOUND:
            raise Separation("coefficients diverge; a bin is (quasi-)perfectly predicted by p")
    if not converged:
        raise NoConvergence(f"gradient {float(np.max(np.abs(grad))):.3g} after {max_iter} iterations")

    neg_h = -hess
    if np.linalg.cond(neg_h) > 1e12:
        raise Separation("information matrix is singular at the optimum")
    cov = np.linalg.inv(neg_h)
    if vce == "robust":
        s = scores(theta, feats, chosen) * w[:, None]
        n = len(observations)
        cov = cov @ (s.T @ s) @ cov * (n / (n - 1))
    cov = 0.5 * (cov + cov.T)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    names = PARAM_NAMES if model == "full" else PARAM_NAMES[:2]
    alpha = {SizeBin.MID: float(theta[0]), SizeBin.LARGE: float(theta[1])}
    beta = {SizeBin.MID: float(theta[2]), SizeBin.LARGE: float(theta[3])} if model == "full" else None
    ll_final, _, _ = kernels.logit_llgh(theta, feats, chosen, w)
    return ChoiceFit(
        alpha=alpha,
        beta=beta,
        standard_errors=dict(zip(names, map(float, se))),
        covariance=cov,
        log_likelihood=float(ll_final),
        null_log_likelihood=float(w.sum() * math.log(1.0 / 3.0)),
        n_choices=len(observations),
        n_alternatives=3 * len(observations),
        weighting=weighting,
        vce=vce,
        iterations=it,
        gradient_norm=float(np.max(np.abs(grad))),
        ll_history=tuple(history),
    )


def crossover_points(fit: ChoiceFit) -> dict[tuple[SizeBin, SizeBin], float | None]:
    """Interception probability at which two bins have equal utility.

    ``None`` when the utilities are parallel or the crossing lies outside [0, 1].
    """
    if fit.beta is None:
        raise CrossLabError("crossover points need the interception coefficients")
    a = {SizeBin.SMALL: 0.0, **fit.alpha}
    b = {SizeBin.SMALL: 0.0, **fit.beta}
    if not all(math.isfinite(v) for v in list(a.values()) + list(b.values())):
        raise CrossLabError("non-finite coefficients")
    out = {}
    for lo, hi in ((SizeBin.SMALL, SizeBin.MID), (SizeBin.SMALL, SizeBin.LARGE), (SizeBin.MID, SizeBin.LARGE)):
        slope = b[hi] - b[lo]
        if slope == 0.0:
            out[(lo, hi)] = None
            continue
        p_star = (a[lo] - a[hi]) / slope
        out[(lo, hi)] = p_star if 0.0 <= p_star <= 1.0 else None
    return out


@dataclass(frozen=True)
class ScenarioRow:
    quarter: Quarter
    p_baseline: float
    p_counterfactual: float
    baseline_shares: np.ndarray
    counterfactual_shares: np.ndarray
    clamped: bool = False


@dataclass(frozen=True)
class ScenarioResult:
    delta: float
    rows: tuple[ScenarioRow, ...]

    @property
    def any_clamped(self) -> bool:
        return any(r.clamped for r in self.rows)


def counterfactual(fit: ChoiceFit, quarter_table: Sequence[QuarterPoint], delta: float) -> ScenarioResult:
    """Shares at each quarter's p and at ``p + delta`` (clamped to [0, 1]).

    ``delta`` is a probability difference: 0.10 is ten percentage points.
    """
    rows = []
    for q in quarter_table:
        raw = q.p_interception + delta
        p_cf = min(1.0, max(0.0, raw))
        rows.append(ScenarioRow(q.quarter, q.p_interception, p_cf,
                                fit.probabilities(q.p_interception), fit.probabilities(p_cf),
                                clamped=p_cf != raw))
    return ScenarioResult(delta, tuple(rows))


def predicted_quarterly_distribution(fit: ChoiceFit, quarter_table: Sequence[QuarterPoint]
                                     ) -> list[tuple[Quarter, np.ndarray]]:
    return [(q.quarter, fit.probabilities(q.p_interception)) for q in quarter_table]


def empirical_quarterly_distribution(observations: Iterable[ChoiceObservation]
                                     ) -> list[tuple[Quarter, np.ndarray]]:
    """Observed (unweighted) bin shares per quarter."""
    counts: dict[Quarter, np.ndarray] = {}
    for o in observations:
        counts.setdefault(o.quarter, np.zeros(3))[int(o.chosen_bin)] += 1
    return [(q, c / c.sum()) for q, c in sorted(counts.items())]
