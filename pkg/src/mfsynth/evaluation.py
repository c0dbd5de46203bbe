"""Nowcast evaluation: cumulative MSNE, LPDR, nowcast SDs and latent dependence."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError


@dataclass
class MetricTrajectory:
    values: np.ndarray
    label: str = ""
    lead: int = 0
    quarters: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.quarters is None:
            self.quarters = np.arange(1, len(self.values) + 1)
        if len(self.quarters) != len(self.values):
            raise ValidationError("quarters and values differ in length")

    def __len__(self):
        return len(self.values)

    @property
    def final(self) -> float:
        return float(self.values[-1])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["quarter", "value"])
            for q, v in zip(self.quarters, self.values):
                w.writerow([int(q), repr(float(v))])


@dataclass
class DependencyTrajectory:
    """Per-quarter J x J paired R^2 matrices; NaN marks undefined entries."""

    matrices: np.ndarray  # (Q, J, J)
    quarters: np.ndarray
    labels: Sequence[str] = field(default_factory=tuple)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["quarter", "i", "j", "r2"])
            J = self.matrices.shape[1]
            for q, M in zip(self.quarters, self.matrices):
                for i in range(J):
                    for j in range(J):
                        w.writerow([int(q), i, j, repr(float(M[i, j]))])


def msne(errors, label: str = "", lead: int = 0, quarters=None) -> MetricTrajectory:
    """Running mean of squared nowcast errors."""
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise ValidationError("msne needs at least one error")
    return MetricTrajectory(np.cumsum(e**2) / np.arange(1, len(e) + 1), label, lead, quarters)


def lpdr(model_logpdfs, reference_logpdfs, label: str = "", lead: int = 0, quarters=None) -> MetricTrajectory:
    """Cumulative log predictive density ratio of a model against the reference."""
    a = np.asarray(model_logpdfs, dtype=float)
    b = np.asarray(reference_logpdfs, dtype=float)
    if a.shape != b.shape:
        raise ValidationError(f"log density sequences differ in length: {a.shape} vs {b.shape}")
    return MetricTrajectory(np.cumsum(a - b), label, lead, quarters)


def sd_trajectory(nowcasts, label: str = "MFS", lead: int = 0) -> MetricTrajectory:
    sds = [float(np.std(r.samples, ddof=1)) if len(r.samples) > 1 else 0.0 for r in nowcasts]
    return MetricTrajectory(sds, label, lead, np.array([r.period for r in nowcasts]))


def coefficient_trajectory(theta_draws: Sequence[np.ndarray]) -> np.ndarray:
    """Posterior mean of theta at the last fitted time, one row per refit.

    Each element is either a ``(K, 1 + J)`` array of final-time draws or a
    full ``(K, T + 1, 1 + J)`` trajectory array.
    """
    rows = []
    for draws in theta_draws:
        draws = np.asarray(draws, dtype=float)
        if draws.ndim == 3:
            draws = draws[:, -1, :]
        if draws.shape[0] == 0:
            raise ValidationError("empty posterior")
        # shifted mean: exact when every draw is identical
        rows.append(draws[0] + (draws - draws[0]).mean(axis=0))
    return np.array(rows)


def coefficient_labels(series_labels: Sequence[str]) -> list[str]:
    return ["intercept"] + list(series_labels)


def paired_r2(draws) -> np.ndarray:
    """Squared Monte Carlo correlations between latent states.

    ``draws`` is ``(K, J)``. Entries involving an agent with zero Monte
    Carlo variance are undefined and returned as NaN.
    """
    x = np.asarray(draws, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValidationError("paired R^2 needs (draws, agents) with at least 2 agents")
    V = np.cov(x, rowvar=False)
    var = np.diag(V)
    with np.errstate(divide="ignore", invalid="ignore"):
        R2 = V**2 / np.outer(var, var)
    bad = var <= 0
    R2[bad, :] = np.nan
    R2[:, bad] = np.nan
    good = ~bad
    R2[good, good] = 1.0
    return np.clip(R2, 0.0, 1.0)


def dependency_trajectory(latent_draws: Sequence[np.ndarray], quarters, labels=()) -> DependencyTrajectory:
    return DependencyTrajectory(np.array([paired_r2(d) for d in latent_draws]), np.asarray(quarters), tuple(labels))


def summary_row(errors, logpdfs, reference_logpdfs) -> dict:
    """Final MSNE and LPDR for one model."""
    return {
        "msne": msne(errors).final,
        "lpdr": lpdr(logpdfs, reference_logpdfs).final,
    }


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
