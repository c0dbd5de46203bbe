"""Sequential out-of-sample nowcasting: refit the synthesis each test quarter."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .baselines import ar_dlm_nowcast
from .dlm import DiscountPair, DlmState
from .errors import BoundaryError, ValidationError
from .projection import PROJECTION_DISCOUNTS, ProjectionSheet, ProjectionSpec, run_projection
from .synthesis import GibbsConfig, NowcastResult, SynthesisPrior, default_synthesis_prior, gibbs_fit, nowcast_simulate
from .timegrid import DEFAULT_LAGS, MixedFrequencyPanel, PeriodSplit, first_feasible_quarter, split_periods

log = logging.getLogger(__name__)

AR_AGENT_ORDER = 3


@dataclass
class QuarterFit:
    quarter: int
    theta_final: np.ndarray  # (K, 1 + J) draws of theta at the last fitted quarter
    x_final: np.ndarray  # (K, J) latent draws at the last fitted quarter
    nowcast: NowcastResult


@dataclass
class SequentialRun:
    lead: int
    labels: list[str]
    fits: list[QuarterFit]
    sheets: list[ProjectionSheet] = field(repr=False, default_factory=list)

    @property
    def quarters(self) -> np.ndarray:
        return np.array([f.quarter for f in self.fits])

    @property
    def results(self) -> list[NowcastResult]:
        return [f.nowcast for f in self.fits]

    @property
    def means(self) -> np.ndarray:
        return np.array([f.nowcast.mean for f in self.fits])

    @property
    def errors(self) -> np.ndarray:
        return np.array([f.nowcast.error for f in self.fits], dtype=float)

    @property
    def logpdfs(self) -> np.ndarray:
        return np.array([f.nowcast.log_pred_density for f in self.fits], dtype=float)

    def coefficient_bands(self, lower: float = 0.05, upper: float = 0.95) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Posterior mean and equal-tailed band of the final-time coefficients, per refit."""
        draws = np.stack([f.theta_final for f in self.fits])  # (Q, K, d)
        return draws.mean(axis=1), np.quantile(draws, lower, axis=1), np.quantile(draws, upper, axis=1)


def quarter_rng(seed: int, lead: int, quarter: int, chain: int = 0) -> np.random.Generator:
    """Independent, order-free random stream for one (lead, quarter, chain) refit."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(lead, quarter, chain)))


def build_agents(
    panel: MixedFrequencyPanel,
    lead: int,
    lags: int = DEFAULT_LAGS,
    discounts: DiscountPair = PROJECTION_DISCOUNTS,
    ar_agent: bool = False,
    prior: DlmState | None = None,
) -> list[ProjectionSheet]:
    """Projection sheets for every indicator at ``lead``, optionally plus an AR(3) agent."""
    sheets = [run_projection(panel, ProjectionSpec(j, lead, lags, prior, discounts)) for j in range(panel.J)]
    if ar_agent:
        sheets.append(ar_dlm_nowcast(panel.target, AR_AGENT_ORDER, discounts=discounts, label="AR"))
    return sheets


def sequential_nowcast(
    panel: MixedFrequencyPanel,
    lead: int,
    split: PeriodSplit,
    prior: SynthesisPrior | None = None,
    config: GibbsConfig = GibbsConfig(),
    lags: int = DEFAULT_LAGS,
    projection_discounts: DiscountPair = PROJECTION_DISCOUNTS,
    projection_prior: DlmState | None = None,
    ar_agent: bool = False,
    chain: int = 0,
    progress: Callable[[int], None] | None = None,
) -> SequentialRun:
    """Nowcast every test quarter from a synthesis fitted on the data before it.

    Projections run from their first feasible quarter; the synthesis for
    test quarter t is fitted on quarters ``calib_start .. t - 1`` and then
    simulates quarter t from the projections' densities for t.
    """
    _, calib, test = split_periods(panel, split)
    start = first_feasible_quarter(panel.ratio, lead, lags)
    if ar_agent:
        start = max(start, AR_AGENT_ORDER + 1)
    if calib.start < start:
        raise BoundaryError(f"calibration starts at quarter {calib.start} but projections start at {start}")
    sheets = build_agents(panel, lead, lags, projection_discounts, ar_agent, projection_prior)
    n_agents = len(sheets)
    if prior is None:
        prior = default_synthesis_prior(n_agents)
    if prior.J != n_agents:
        raise ValidationError(f"synthesis prior is for {prior.J} agents, run has {n_agents}")
    fits = []
    for t in test:
        rng = quarter_rng(config.seed, lead, t, chain)
        fit_q = range(calib.start, t)
        post = gibbs_fit(panel.target[calib.start - 1 : t - 1], sheets, prior, config, rng, fit_q)
        res = nowcast_simulate(post, [s.density(t) for s in sheets], rng, panel.target[t - 1], t, lead)
        fits.append(QuarterFit(t, post.theta[:, -1, :].copy(), post.x[:, -1, :].copy(), res))
        if progress is not None:
            progress(t)
        log.debug("lead %d quarter %d nowcast %.4f", lead, t, res.mean)
    return SequentialRun(lead, [s.label for s in sheets], fits, sheets)


def ar_reference(panel: MixedFrequencyPanel, quarters: Sequence[int], discounts: DiscountPair = PROJECTION_DISCOUNTS):
    """AR(3) DLM one-step predictives, errors and log densities for the given quarters."""
    sheet = ar_dlm_nowcast(panel.target, AR_AGENT_ORDER, discounts=discounts)
    dens = [sheet.density(t) for t in quarters]
    y = panel.target[np.asarray(quarters) - 1]
    means = np.array([d.location for d in dens])
    logpdfs = np.array([float(d.logpdf(v)) for d, v in zip(dens, y)])
    return dens, y - means, logpdfs
