"""Benchmark nowcasters: AR(3) discount DLM, unrestricted MIDAS, equal-weight pools."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .dlm import DiscountPair, DlmState, filter_step, predict_one_step
from .errors import BoundaryError, DegeneracyError, ValidationError
from .projection import PROJECTION_DISCOUNTS, ProjectionSheet, default_projection_prior
from .timegrid import DEFAULT_LAGS, MixedFrequencyPanel, build_regressor_vector, first_feasible_quarter

MIDAS_WINDOW = 40


# ---------------------------------------------------------------------------
# AR(p) DLM


def ar_regressor(y, t: int, order: int, intercept: bool = True) -> np.ndarray:
    """(1, y_{t-1}, ..., y_{t-order}) for 1-based quarter t."""
    if t - order < 1:
        raise BoundaryError(f"quarter {t} lacks {order} lagged targets")
    lags = np.asarray(y[t - order - 1 : t - 1], dtype=float)[::-1]
    return np.concatenate(([1.0], lags)) if intercept else lags


def ar_dlm_nowcast(
    y,
    order: int = 3,
    prior: DlmState | None = None,
    discounts: DiscountPair = PROJECTION_DISCOUNTS,
    quarters: range | None = None,
    label: str | None = None,
) -> ProjectionSheet:
    """One-step Student-t predictives of an AR(order) discount DLM with intercept.

    Quarter ``len(y) + 1`` may be included to get the out-of-sample density.
    The result is a projection sheet, so it can also enter the synthesis as
    an extra agent.
    """
    y = np.asarray(y, dtype=float)
    if len(y) < order + 1:
        raise BoundaryError(f"AR({order}) needs at least {order + 1} observations, got {len(y)}")
    if quarters is None:
        quarters = range(order + 1, len(y) + 1)
    if quarters.start < order + 1 or quarters.stop - 1 > len(y) + 1:
        raise BoundaryError(f"AR({order}) quarters must lie in {order + 1}..{len(y) + 1}")
    state = prior if prior is not None else default_projection_prior(order + 1)
    out = np.empty((len(quarters), 3))
    history = []
    for i, t in enumerate(quarters):
        F = ar_regressor(y, t, order)
        if t <= len(y):
            rec = filter_step(state, F, y[t - 1], discounts)
            out[i] = rec.dof, rec.f, rec.q
            history.append(rec)
            state = rec.post
        else:
            d = predict_one_step(state, F, discounts)
            out[i] = d.dof, d.location, d.scale
    return ProjectionSheet(
        label or f"AR({order})", np.array(quarters), out[:, 0], out[:, 1], out[:, 2], state, discounts, None, history
    )


# ---------------------------------------------------------------------------
# unrestricted MIDAS


@dataclass(frozen=True)
class Gaussian:
    mean: float
    variance: float

    def logpdf(self, y):
        return -0.5 * np.log(2 * np.pi * self.variance) - 0.5 * (np.asarray(y, dtype=float) - self.mean) ** 2 / self.variance

    def pdf(self, y):
        return np.exp(self.logpdf(y))


@dataclass(frozen=True)
class MidasFit:
    coefficients: np.ndarray  # intercept, AR lags, high-frequency lags
    residual_variance: float
    ar_order: int
    lags: int
    window: tuple[int, int] = (0, 0)

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])


def midas_design(hf_lags, ar_order: int, y_lags=None) -> np.ndarray:
    hf_lags = np.atleast_2d(np.asarray(hf_lags, dtype=float))
    cols = [np.ones((len(hf_lags), 1))]
    if ar_order:
        y_lags = np.atleast_2d(np.asarray(y_lags, dtype=float))
        if y_lags.shape != (len(hf_lags), ar_order):
            raise ValidationError(f"AR lag matrix must be {len(hf_lags)}x{ar_order}")
        cols.append(y_lags)
    cols.append(hf_lags)
    return np.hstack(cols)


def fit_unrestricted_midas(y, hf_lags, ar_order: int = 0, y_lags=None, window: tuple[int, int] = (0, 0)) -> MidasFit:
    """OLS of y on (1, AR lags, one free coefficient per monthly lag)."""
    if ar_order not in (0, 1, 3):
        raise ValidationError(f"ar_order must be 0, 1 or 3, got {ar_order}")
    y = np.asarray(y, dtype=float)
    X = midas_design(hf_lags, ar_order, y_lags)
    n, k = X.shape
    if n <= k:
        raise ValidationError(f"MIDAS window of {n} observations cannot identify {k} coefficients")
    if np.linalg.matrix_rank(X) < k:
        raise DegeneracyError("MIDAS design matrix is rank deficient")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    return MidasFit(coef, float(resid @ resid / (n - k)), ar_order, X.shape[1] - 1 - ar_order, window)


def midas_nowcast(fit: MidasFit, hf_lags, y_lags=None) -> Gaussian:
    """Plug-in Gaussian predictive: fitted linear predictor with the residual variance."""
    x = midas_design(np.atleast_2d(hf_lags), fit.ar_order, None if y_lags is None else np.atleast_2d(y_lags))[0]
    if len(x) != len(fit.coefficients):
        raise ValidationError(f"regressor has {len(x)} entries, fit has {len(fit.coefficients)}")
    return Gaussian(float(x @ fit.coefficients), fit.residual_variance)


def midas_first_quarter(panel: MixedFrequencyPanel, lead: int, ar_order: int, lags: int = DEFAULT_LAGS) -> int:
    return max(first_feasible_quarter(panel.ratio, lead, lags), ar_order + 1)


def _midas_rows(panel, j, quarters, lead, ar_order, lags):
    hf = np.array([build_regressor_vector(panel, j, t, lead, lags).values for t in quarters]).reshape(-1, lags)
    yl = np.array([panel.target[t - ar_order - 1 : t - 1][::-1] for t in quarters]).reshape(-1, ar_order) if ar_order else None
    return hf, yl


def rolling_midas(
    panel: MixedFrequencyPanel,
    j: int,
    lead: int,
    ar_order: int,
    quarters: Sequence[int],
    window: int = MIDAS_WINDOW,
    lags: int = DEFAULT_LAGS,
) -> list[tuple[MidasFit, Gaussian]]:
    """Nowcast each quarter from a fit on the preceding ``window`` targets.

    Until ``window`` quarters are available the fit uses every feasible
    quarter so far.
    """
    first = midas_first_quarter(panel, lead, ar_order, lags)
    out = []
    for t in quarters:
        lo = max(first, t - window)
        fit_q = range(lo, t)
        hf, yl = _midas_rows(panel, j, fit_q, lead, ar_order, lags)
        fit = fit_unrestricted_midas(panel.target[lo - 1 : t - 1], hf, ar_order, yl, (lo, t - 1))
        hf_t, yl_t = _midas_rows(panel, j, [t], lead, ar_order, lags)
        out.append((fit, midas_nowcast(fit, hf_t, yl_t)))
    return out


# ---------------------------------------------------------------------------
# equal-weight pooling


@dataclass(frozen=True)
class PooledDensity:
    components: tuple

    def __post_init__(self):
        if len(self.components) == 0:
            raise ValidationError("cannot pool an empty list of densities")

    @property
    def weights(self) -> np.ndarray:
        return np.full(len(self.components), 1.0 / len(self.components))

    def logpdf(self, y):
        comps = np.array([np.asarray(c.logpdf(y), dtype=float) for c in self.components])
        return logsumexp(comps, axis=0) - math.log(len(self.components))

    def pdf(self, y):
        return np.mean([np.asarray(c.pdf(y), dtype=float) for c in self.components], axis=0)

    @property
    def mean(self) -> float:
        return float(np.mean([c.mean for c in self.components]))

    @property
    def variance(self) -> float:
        means = np.array([c.mean for c in self.components])
        variances = np.array([float(c.variance) for c in self.components])
        return float(np.mean(variances + means**2) - np.mean(means) ** 2)


def equal_weight_pool(densities) -> PooledDensity:
    return PooledDensity(tuple(densities))


def pooled_midas_nowcasts(
    panel: MixedFrequencyPanel, lead: int, ar_order: int, quarters: Sequence[int], window: int = MIDAS_WINDOW
) -> list[PooledDensity]:
    """Equal-weight pool of one rolling MIDAS regression per indicator."""
    per_series = [rolling_midas(panel, j, lead, ar_order, quarters, window) for j in range(panel.J)]
    return [equal_weight_pool([fits[i][1] for fits in per_series]) for i in range(len(quarters))]
