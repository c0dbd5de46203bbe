"""Frequency synthesis: latent-factor DLM over the projection densities.

The synthesis model is

    y_t = theta_t0 + sum_j theta_tj x_tj + nu_t,   x_tj ~ T_{n_tj}(h_tj, H_tj)

with theta_t and v_t evolving as a discount DLM. Posterior simulation
alternates forward-filtering backward-sampling of (theta, v) given the
latent states with a conditionally normal update of the latent states
given (theta, v) and their Student-t scale mixers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from . import _gibbs
from ._linalg import psd_cholesky
from .dlm import DiscountPair, DlmState, StateTrajectory, StudentT, backward_sample, forward_filter
from .errors import BoundaryError, DegeneracyError, NumericalError, ValidationError
from .projection import ProjectionSheet

log = logging.getLogger(__name__)

SYNTHESIS_DISCOUNTS = DiscountPair(0.95, 0.97)


@dataclass(frozen=True)
class SynthesisPrior:
    m0: np.ndarray
    C0: np.ndarray
    n0: float
    s0: float
    discounts: DiscountPair = SYNTHESIS_DISCOUNTS

    def __post_init__(self):
        m0 = np.atleast_1d(np.asarray(self.m0, dtype=float))
        C0 = np.atleast_2d(np.asarray(self.C0, dtype=float))
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "C0", C0)
        if C0.shape != (len(m0), len(m0)):
            raise ValidationError("synthesis prior C0 must be square and match m0")
        if not np.allclose(C0, C0.T) or np.linalg.eigvalsh(C0).min() < -1e-10:
            raise ValidationError("synthesis prior C0 must be symmetric PSD")
        if not (self.n0 > 0 and self.s0 > 0):
            raise ValidationError("synthesis prior needs n0 > 0 and s0 > 0")

    @property
    def J(self) -> int:
        return len(self.m0) - 1

    def state(self) -> DlmState:
        return DlmState(self.m0, self.C0, self.n0, self.s0)


def default_synthesis_prior(J: int, discounts: DiscountPair = SYNTHESIS_DISCOUNTS) -> SynthesisPrior:
    """theta_0 ~ N((0, 1/J, ..., 1/J), I) and 1/v_0 ~ G(5, 0.01)."""
    m0 = np.concatenate(([0.0], np.full(J, 1.0 / J)))
    return SynthesisPrior(m0, np.eye(J + 1), 10.0, 0.002, discounts)


@dataclass(frozen=True)
class GibbsConfig:
    burn_in: int = 2000
    keep: int = 3000
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.burn_in < 0 or self.keep < 1 or self.thin < 1:
            raise ValidationError("Gibbs config needs burn_in >= 0, keep >= 1, thin >= 1")


@dataclass(frozen=True)
class LatentStates:
    x: np.ndarray  # (T, J)
    phi: np.ndarray  # (T, J)

    def __post_init__(self):
        if self.x.shape != self.phi.shape:
            raise ValidationError("x and phi must share a shape")
        if np.any(self.phi <= 0):
            raise ValidationError("scale mixers must be positive")


@dataclass
class SynthesisPosterior:
    """Retained Gibbs draws. Index 0 of ``theta`` is time 0 (the prior time)."""

    theta: np.ndarray  # (K, T + 1, 1 + J)
    v: np.ndarray  # (K, T)
    x: np.ndarray  # (K, T, J)
    phi: np.ndarray  # (K, T, J)
    m_final: np.ndarray  # (K, 1 + J) filtered mean at T, per draw
    C_final: np.ndarray  # (K, 1 + J, 1 + J)
    s_final: np.ndarray  # (K,)
    n_final: float
    discounts: DiscountPair
    config: GibbsConfig
    quarters: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def draws(self) -> int:
        return self.theta.shape[0]

    @property
    def T(self) -> int:
        return self.v.shape[1]

    def draw(self, k: int) -> dict:
        return {"theta": self.theta[k], "v": self.v[k], "x": self.x[k], "phi": self.phi[k]}


@dataclass
class NowcastResult:
    samples: np.ndarray
    mean: float
    sd: float
    log_pred_density: float | None
    period: int
    lead: int
    realized: float | None = None

    @property
    def error(self) -> float | None:
        return None if self.realized is None else self.realized - self.mean


# ---------------------------------------------------------------------------
# sheet helpers


def _stack_sheets(sheets: Sequence[ProjectionSheet], quarters=None):
    if len(sheets) == 0:
        raise ValidationError("need at least one projection sheet")
    if quarters is not None:
        sheets = [s.window(quarters) for s in sheets]
    ref = sheets[0].quarters
    for s in sheets[1:]:
        if len(s.quarters) != len(ref) or np.any(s.quarters != ref):
            raise ValidationError("projection sheets are not aligned on the same quarters")
    h = np.column_stack([s.location for s in sheets]).astype(float)
    H = np.column_stack([s.scale for s in sheets]).astype(float)
    nd = np.column_stack([s.dof for s in sheets]).astype(float)
    if np.any(H < 0) or np.any(nd <= 0):
        raise ValidationError("projection scales must be non-negative and dofs positive")
    return np.asarray(ref, dtype=int), np.ascontiguousarray(h), np.ascontiguousarray(H), np.ascontiguousarray(nd)


# ---------------------------------------------------------------------------
# Gibbs blocks


def init_latent_states(sheets: Sequence[ProjectionSheet], rng: np.random.Generator, quarters=None) -> LatentStates:
    """Draw x_tj from its projection density via the normal/gamma mixture.

    The gamma mixer used for each x draw is returned as that cell's phi.
    """
    _, h, H, nd = _stack_sheets(sheets, quarters)
    return LatentStates(*_init_arrays(h, H, nd, rng))


def synthesis_regressors(x: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(len(x)), x])


def sample_synthesis_params(x: np.ndarray, y, prior: SynthesisPrior, rng: np.random.Generator) -> StateTrajectory:
    """One FFBS draw of (theta_0..T, v_1..T) treating x as known regressors."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(y) != len(x):
        raise ValidationError(f"{len(y)} targets but {len(x)} latent rows")
    if x.shape[1] != prior.J:
        raise ValidationError(f"prior expects {prior.J} agents, x has {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise NumericalError("latent states contain non-finite values")
    history = forward_filter(prior.state(), synthesis_regressors(x), y, prior.discounts)
    return backward_sample(history, prior.discounts, rng)


def latent_conditional(theta_t, v_t: float, y_t: float, h_t, H_t, phi_t):
    """Mean and covariance of x_t given (theta_t, v_t, y_t) and the mixers phi_t."""
    theta_t = np.asarray(theta_t, dtype=float)
    Ht = np.asarray(H_t, dtype=float) / np.asarray(phi_t, dtype=float)
    loading = theta_t[1:]
    g = v_t + float(loading @ (Ht * loading))
    if not g > 0:
        raise DegeneracyError(f"latent conditional variance g={g:.3g} is not positive")
    b = Ht * loading / g
    c = y_t - theta_t[0] - float(np.asarray(h_t) @ loading)
    return np.asarray(h_t) + b * c, np.diag(Ht) - np.outer(b, b) * g


def sample_latent_states(traj: StateTrajectory, y, sheets_or_arrays, phi: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Resample every x_t from its Gaussian full conditional.

    Draws a prior sample x0 ~ N(h_t, H~_t) and a pseudo-observation
    y0 | x0 ~ N(F(x0)' theta_t, v_t), then moves x0 by b_t (y_t - y0); the
    result has exactly the conditional mean h_t + b_t c_t and covariance
    H~_t - b_t b_t' g_t.
    """
    h, H = _moments(sheets_or_arrays)
    y = np.asarray(y, dtype=float)
    theta = traj.theta[1:]
    v = traj.v
    if np.any(v <= 0):
        raise DegeneracyError("synthesis volatilities must be positive")
    T, J = h.shape
    Ht = H / phi
    loading = theta[:, 1:]
    g = v + np.sum(loading**2 * Ht, axis=1)
    if np.any(g <= 0):
        raise DegeneracyError("latent conditional variance is not positive")
    z = rng.standard_normal((T, J + 1))
    x0 = h + np.sqrt(Ht) * z[:, :J]
    y0 = theta[:, 0] + np.sum(loading * x0, axis=1) + np.sqrt(v) * z[:, J]
    return x0 + Ht * loading / g[:, None] * (y - y0)[:, None]


def sample_phi_scales(x: np.ndarray, sheets_or_arrays, rng: np.random.Generator, dof=None) -> np.ndarray:
    """phi_tj | x_tj ~ G((n_tj + 1) / 2, (n_tj + d_tj) / 2) with d_tj = (x_tj - h_tj)^2 / H_tj."""
    if dof is None:
        _, h, H, nd = _stack_sheets(sheets_or_arrays)
    else:
        h, H = sheets_or_arrays
        nd = np.broadcast_to(np.asarray(dof, dtype=float), np.shape(h))
    if np.any(H <= 0):
        raise ValidationError("projection scales must be positive")
    return _phi_draw(x, h, H, nd, rng)


def _phi_draw(x, h, H, nd, rng):
    # H == 0 marks a point-mass projection: x sits on h and contributes no deviation
    dev = np.divide((x - h) ** 2, H, out=np.zeros_like(H), where=H > 0)
    return rng.standard_gamma((nd + 1) / 2) / ((nd + dev) / 2)


def _moments(sheets_or_arrays):
    if isinstance(sheets_or_arrays, tuple) and len(sheets_or_arrays) == 2:
        return np.asarray(sheets_or_arrays[0], dtype=float), np.asarray(sheets_or_arrays[1], dtype=float)
    _, h, H, _ = _stack_sheets(sheets_or_arrays)
    return h, H


def gibbs_fit(
    y,
    sheets: Sequence[ProjectionSheet],
    prior: SynthesisPrior,
    config: GibbsConfig,
    rng: np.random.Generator | None = None,
    quarters=None,
    engine: str = "compiled",
) -> SynthesisPosterior:
    """Two-block Gibbs sampler for the synthesis posterior.

    Each iteration draws (theta, v) by FFBS, then the latent states, then
    the scale mixers. ``quarters`` optionally restricts the sheets to the
    quarters matching ``y``. Both engines give the same chain for the same
    generator; ``"python"`` is the slow reference built on :mod:`mfsynth.dlm`.
    """
    q_idx, h, H, nd = _stack_sheets(sheets, quarters)
    y = np.ascontiguousarray(y, dtype=float)
    T, J = h.shape
    if len(y) != T:
        raise ValidationError(f"{len(y)} targets but sheets cover {T} quarters")
    if prior.J != J:
        raise ValidationError(f"prior is for {prior.J} agents, got {J} sheets")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    x, phi = _init_arrays(h, H, nd, rng)
    K = config.keep
    d = J + 1
    disc = prior.discounts
    theta_keep = np.empty((K, T + 1, d))
    v_keep = np.empty((K, T))
    x_keep = np.empty((K, T, J))
    phi_keep = np.empty((K, T, J))
    mT = np.empty((K, d))
    CT = np.empty((K, d, d))
    sT = np.empty(K)
    if engine == "compiled":
        status, it = _gibbs.run_chain(
            y, h, H, nd, x, phi, prior.m0, np.ascontiguousarray(prior.C0), float(prior.n0), float(prior.s0),
            disc.state_discount, disc.vol_discount, config.burn_in, K, config.thin, rng,
            theta_keep, v_keep, x_keep, phi_keep, mT, CT, sT,
        )
        if status == _gibbs.DEGENERATE_Q:
            raise DegeneracyError(f"synthesis filter degenerated at Gibbs iteration {it}")
        if status == _gibbs.NON_FINITE:
            raise NumericalError(f"non-finite draw at Gibbs iteration {it}")
    elif engine == "python":
        k = 0
        for it in range(config.burn_in + K * config.thin):
            history = forward_filter(prior.state(), synthesis_regressors(x), y, disc)
            traj = backward_sample(history, disc, rng)
            x = sample_latent_states(traj, y, (h, H), phi, rng)
            phi = _phi_draw(x, h, H, nd, rng)
            if not (np.all(np.isfinite(traj.theta)) and np.all(np.isfinite(x)) and np.all(np.isfinite(phi))):
                raise NumericalError(f"non-finite draw at Gibbs iteration {it}")
            if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
                theta_keep[k], v_keep[k], x_keep[k], phi_keep[k] = traj.theta, traj.v, x, phi
                last = history[-1].post
                mT[k], CT[k], sT[k] = last.m, last.C, last.s
                k += 1
    else:
        raise ValidationError(f"unknown engine {engine!r}")
    n_final = float(prior.n0)
    for _ in range(T):
        n_final = disc.vol_discount * n_final + 1.0
    return SynthesisPosterior(theta_keep, v_keep, x_keep, phi_keep, mT, CT, sT, n_final, disc, config, q_idx)


def _init_arrays(h, H, nd, rng):
    phi = rng.standard_gamma(nd / 2) / (nd / 2)
    x = h + np.sqrt(H / phi) * rng.standard_normal(h.shape)
    return np.ascontiguousarray(x), np.ascontiguousarray(phi)


# ---------------------------------------------------------------------------
# predictive simulation


def nowcast_simulate(
    posterior: SynthesisPosterior,
    next_densities: Sequence[StudentT],
    rng: np.random.Generator,
    realized: float | None = None,
    period: int = 0,
    lead: int = 0,
) -> NowcastResult:
    """Simulate y_{T+1} from every retained draw.

    Per draw: v_{T+1} = v_T * beta / gamma with gamma ~ Beta(beta n_T / 2,
    (1 - beta) n_T / 2); theta_{T+1} = theta_T + omega with the discount
    evolution variance; x_{T+1,j} from the next projection densities; then
    y from the conditional normal. The log predictive density at
    ``realized`` averages, over draws, the normal density of y given
    (theta_{T+1}, v_{T+1}, phi) with x integrated out.
    """
    if posterior.draws == 0:
        raise ValidationError("posterior has no draws")
    J = posterior.theta.shape[2] - 1
    if next_densities is None or len(next_densities) != J:
        raise BoundaryError(f"need {J} next-period projection densities")
    K = posterior.draws
    beta, delta = posterior.discounts.vol_discount, posterior.discounts.state_discount
    nT = posterior.n_final
    theta_T = posterior.theta[:, -1, :]
    v_T = posterior.v[:, -1]
    if beta < 1:
        gam = rng.beta(beta * nT / 2, (1 - beta) * nT / 2, size=K)
        v_next = v_T * beta / gam
    else:
        v_next = v_T.copy()
    z = rng.standard_normal((K, J + 1))
    theta_next = theta_T.copy()
    if delta < 1:
        scale = (1 - delta) / delta * v_next / posterior.s_final
        for k in range(K):
            L = _chol_psd(posterior.C_final[k] * scale[k])
            theta_next[k] += L @ z[k]
    h = np.array([d.location for d in next_densities], dtype=float)
    H = np.array([d.scale for d in next_densities], dtype=float)
    nd = np.array([d.dof for d in next_densities], dtype=float)
    phi = rng.standard_gamma(nd / 2, size=(K, J)) / (nd / 2)
    x = h + np.sqrt(H / phi) * rng.standard_normal((K, J))
    loading = theta_next[:, 1:]
    samples = theta_next[:, 0] + np.sum(loading * x, axis=1) + np.sqrt(v_next) * rng.standard_normal(K)
    lpd = None
    if realized is not None:
        mu = theta_next[:, 0] + loading @ h
        var = v_next + np.sum(loading**2 * H / phi, axis=1)
        terms = -0.5 * np.log(2 * np.pi * var) - 0.5 * (realized - mu) ** 2 / var
        lpd = float(logsumexp(terms) - np.log(K))
    return NowcastResult(
        samples, float(np.mean(samples)), float(np.std(samples, ddof=1)) if K > 1 else 0.0, lpd, period, lead,
        None if realized is None else float(realized),
    )


def _chol_psd(A):
    return psd_cholesky(0.5 * (A + A.T))
