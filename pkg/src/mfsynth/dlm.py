"""Conjugate discount dynamic linear models.

Model, for a regression vector F_t::

    y_t     = F_t' theta_t + nu_t,        nu_t ~ N(0, v_t)
    theta_t = theta_{t-1} + omega_t,      omega_t ~ N(0, v_t W_t)

with W_t implied by a state discount factor and v_t following a beta-gamma
random walk governed by a volatility discount factor. The posterior at t is
normal/inverse-gamma: theta_t | v_t ~ N(m_t, C_t v_t / s_t) and
1/v_t ~ G(n_t / 2, n_t s_t / 2), so ``C`` is a scale matrix expressed in
units of the point estimate ``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from ._linalg import psd_cholesky, symmetrize
from .errors import DegeneracyError, ValidationError

Q_FLOOR = 1e-12


@dataclass(frozen=True)
class DiscountPair:
    state_discount: float
    vol_discount: float

    def __post_init__(self):
        for name in ("state_discount", "vol_discount"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ValidationError(f"{name} must lie in (0, 1], got {v}")


@dataclass(frozen=True)
class DlmState:
    """Normal/inverse-gamma sufficient statistics (m, C, n, s)."""

    m: np.ndarray
    C: np.ndarray
    n: float
    s: float

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.m, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "C", C)
        if C.shape != (len(m), len(m)):
            raise ValidationError(f"C must be {len(m)}x{len(m)}, got {C.shape}")
        if not (self.n > 0 and self.s > 0):
            raise ValidationError(f"need n > 0 and s > 0, got n={self.n}, s={self.s}")

    @property
    def dim(self) -> int:
        return len(self.m)

    @classmethod
    def from_prior(cls, m0, C0, n0: float, s0: float) -> "DlmState":
        return cls(np.array(m0, dtype=float), np.array(C0, dtype=float), float(n0), float(s0))


@dataclass(frozen=True)
class StudentT:
    """Location/scale Student-t. ``scale`` is the squared scale (variance-like) parameter."""

    dof: float
    location: float
    scale: float

    def logpdf(self, y):
        return log_pdf(self, y)

    def pdf(self, y):
        return np.exp(log_pdf(self, y))

    @property
    def mean(self) -> float:
        return self.location

    @property
    def variance(self) -> float:
        return self.scale * self.dof / (self.dof - 2) if self.dof > 2 else math.inf

    def sample(self, rng: np.random.Generator, size=None):
        phi = rng.standard_gamma(self.dof / 2, size) / (self.dof / 2)
        return self.location + np.sqrt(self.scale / phi) * rng.standard_normal(size)


@dataclass(frozen=True)
class FilterRecord:
    prev: DlmState
    F: np.ndarray
    y: float
    R: np.ndarray
    f: float
    q: float
    dof: float
    e: float
    A: np.ndarray
    r: float
    post: DlmState

    def predictive(self) -> StudentT:
        return StudentT(self.dof, self.f, self.q)


@dataclass(frozen=True)
class StateTrajectory:
    theta: np.ndarray  # (T + 1, d): theta_0 .. theta_T
    v: np.ndarray  # (T,): v_1 .. v_T


def _regressor(state: DlmState, F) -> np.ndarray:
    F = np.atleast_1d(np.asarray(F, dtype=float))
    if F.shape != state.m.shape:
        raise ValidationError(f"regressor has dimension {F.shape[0]}, state has {state.dim}")
    return F


def predict_one_step(state: DlmState, F, disc: DiscountPair) -> StudentT:
    """One-step predictive for y given the posterior ``state`` and regressor F."""
    F = _regressor(state, F)
    R = symmetrize(state.C / disc.state_discount)
    q = float(F @ (R @ F)) + state.s
    if not q > Q_FLOOR:
        raise DegeneracyError(f"one-step predictive scale {q:.3g} is degenerate")
    return StudentT(disc.vol_discount * state.n, float(F @ state.m), q)


def filter_step(state: DlmState, F, y: float, disc: DiscountPair) -> FilterRecord:
    """Evolve ``state`` one step and update it with observation (F, y)."""
    F = _regressor(state, F)
    R = symmetrize(state.C / disc.state_discount)
    f = float(F @ state.m)
    RF = R @ F
    q = float(F @ RF) + state.s
    if not q > Q_FLOOR:
        raise DegeneracyError(f"one-step predictive scale {q:.3g} is degenerate")
    dof = disc.vol_discount * state.n
    e = float(y) - f
    A = RF / q
    n = dof + 1.0
    r = (dof + e * e / q) / n
    m = state.m + A * e
    C = symmetrize(r * (R - q * np.outer(A, A)))
    post = DlmState(m, C, n, r * state.s)
    return FilterRecord(state, F, float(y), R, f, q, dof, e, A, r, post)


def forward_filter(prior: DlmState, Fs, ys, disc: DiscountPair) -> list[FilterRecord]:
    history = []
    state = prior
    for F, y in zip(np.atleast_2d(Fs), ys):
        rec = filter_step(state, F, y, disc)
        history.append(rec)
        state = rec.post
    return history


def backward_sample(history: Sequence[FilterRecord], disc: DiscountPair, rng: np.random.Generator) -> StateTrajectory:
    """Draw (theta_0..T, v_1..T) jointly given a forward-filtering history.

    Random numbers are consumed in a fixed order: at time T one gamma then
    d normals; at each earlier time one gamma (skipped when its shape is
    zero) then d normals. The compiled Gibbs kernel follows the same order.
    """
    if len(history) == 0:
        raise ValidationError("backward sampling needs a non-empty history")
    beta, delta = disc.vol_discount, disc.state_discount
    T = len(history)
    states = [history[0].prev] + [rec.post for rec in history]
    d = states[0].dim
    theta = np.empty((T + 1, d))
    inv_v = np.empty(T + 1)

    last = states[T]
    inv_v[T] = rng.standard_gamma(last.n / 2) / (last.n * last.s / 2)
    cov = last.C / (inv_v[T] * last.s)
    theta[T] = last.m + psd_cholesky(symmetrize(cov)) @ rng.standard_normal(d)

    for t in range(T - 1, -1, -1):
        st = states[t]
        shape = (1.0 - beta) * st.n / 2
        gamma = rng.standard_gamma(shape) / (st.n * st.s / 2) if shape > 0 else 0.0
        inv_v[t] = beta * inv_v[t + 1] + gamma
        mean = st.m + delta * (theta[t + 1] - st.m)
        cov = st.C * ((1.0 - delta) / (inv_v[t] * st.s))
        theta[t] = mean + psd_cholesky(symmetrize(cov)) @ rng.standard_normal(d)
    return StateTrajectory(theta, 1.0 / inv_v[1:])


def log_pdf(dist: StudentT, y):
    """Exact log density of a location/scale Student-t."""
    nu, q = dist.dof, dist.scale
    z2 = (np.asarray(y, dtype=float) - dist.location) ** 2 / q
    return (
        gammaln((nu + 1) / 2)
        - gammaln(nu / 2)
        - 0.5 * np.log(nu * np.pi * q)
        - (nu + 1) / 2 * np.log1p(z2 / nu)
    )
