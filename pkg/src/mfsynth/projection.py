"""Frequency projection: one discount DLM per (indicator, lead) pair.

Each projection regresses the low-frequency target on a lag window of one
indicator and records, for every quarter, the Student-t one-step predictive
formed *before* that quarter's target is observed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dlm import DiscountPair, DlmState, FilterRecord, StudentT, filter_step, predict_one_step
from .errors import BoundaryError, ValidationError
from .timegrid import DEFAULT_LAGS, MixedFrequencyPanel, build_regressor_vector, first_feasible_quarter

# Projection prior: theta_0 | v_0 ~ N(0, v_0 I), 1/v_0 ~ G(1, 0.01); discounts (state 0.99, vol 0.95).
PROJECTION_DISCOUNTS = DiscountPair(0.99, 0.95)


def default_projection_prior(dim: int) -> DlmState:
    n0, s0 = 2.0, 0.01
    return DlmState(np.zeros(dim), s0 * np.eye(dim), n0, s0)


@dataclass(frozen=True)
class ProjectionSpec:
    series: int
    lead: int
    lags: int = DEFAULT_LAGS
    prior: DlmState | None = None
    discounts: DiscountPair = PROJECTION_DISCOUNTS
    intercept: bool = False

    @property
    def dim(self) -> int:
        return self.lags + int(self.intercept)

    def resolved_prior(self) -> DlmState:
        prior = self.prior if self.prior is not None else default_projection_prior(self.dim)
        if prior.dim != self.dim:
            raise ValidationError(f"projection prior has dimension {prior.dim}, expected {self.dim}")
        return prior

    def regressor(self, panel: MixedFrequencyPanel, t: int) -> np.ndarray:
        window = build_regressor_vector(panel, self.series, t, self.lead, self.lags).values
        return np.concatenate(([1.0], window)) if self.intercept else window


@dataclass
class ProjectionSheet:
    """Sequence of one-step predictive densities for consecutive quarters.

    ``history`` keeps the filter records of every quarter whose target was
    observed; ``state`` is the posterior after the last of them.
    """

    label: str
    quarters: np.ndarray
    dof: np.ndarray
    location: np.ndarray
    scale: np.ndarray
    state: DlmState
    discounts: DiscountPair
    spec: ProjectionSpec | None = None
    history: list[FilterRecord] = field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.quarters)

    def density(self, t: int) -> StudentT:
        i = self.index(t)
        return StudentT(float(self.dof[i]), float(self.location[i]), float(self.scale[i]))

    def index(self, t: int) -> int:
        i = int(t - self.quarters[0])
        if not 0 <= i < len(self.quarters) or self.quarters[i] != t:
            raise BoundaryError(f"sheet {self.label!r} has no density for quarter {t}")
        return i

    def window(self, quarters) -> "ProjectionSheet":
        """Sub-sheet restricted to the given contiguous quarters."""
        quarters = list(quarters)
        lo, hi = self.index(quarters[0]), self.index(quarters[-1]) + 1
        return ProjectionSheet(
            self.label, self.quarters[lo:hi], self.dof[lo:hi], self.location[lo:hi], self.scale[lo:hi],
            self.state, self.discounts, self.spec,
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["quarter", "dof", "location", "scale"])
            for row in zip(self.quarters, self.dof, self.location, self.scale):
                w.writerow([int(row[0])] + [repr(float(x)) for x in row[1:]])


def run_projection(
    panel: MixedFrequencyPanel, spec: ProjectionSpec, quarters: range | None = None, label: str | None = None
) -> ProjectionSheet:
    """Filter one projection DLM through ``quarters`` and collect its predictive densities.

    Quarters up to ``panel.T`` update the filter after their density is
    recorded; a final quarter ``T + 1`` (if requested) only emits a density.
    Default range: first feasible quarter through ``T`` (plus ``T + 1`` when
    the panel holds enough lead months).
    """
    if not 0 <= spec.series < panel.J:
        raise ValidationError(f"series index {spec.series} out of range")
    if quarters is None:
        start = first_feasible_quarter(panel.ratio, spec.lead, spec.lags)
        stop = panel.T + 1
        if panel.lead_months(spec.series) >= spec.lead:
            stop += 1
        quarters = range(start, stop)
    quarters = range(quarters.start, quarters.stop)
    if len(quarters) == 0:
        raise ValidationError("empty projection range")
    if quarters.stop - 1 > panel.T + 1:
        raise BoundaryError(f"projection cannot run past quarter {panel.T + 1}")
    state = spec.resolved_prior()
    disc = spec.discounts
    out = np.empty((len(quarters), 3))
    history = []
    for i, t in enumerate(quarters):
        F = spec.regressor(panel, t)
        if t <= panel.T:
            rec = filter_step(state, F, panel.target[t - 1], disc)
            out[i] = rec.dof, rec.f, rec.q
            history.append(rec)
            state = rec.post
        else:
            d = predict_one_step(state, F, disc)
            out[i] = d.dof, d.location, d.scale
    return ProjectionSheet(
        label or panel.labels[spec.series], np.array(quarters), out[:, 0], out[:, 1], out[:, 2],
        state, disc, spec, history,
    )


def projection_for_next_period(sheet: ProjectionSheet, regressor) -> StudentT:
    """Predictive density for the quarter after the sheet's last observed target."""
    return predict_one_step(sheet.state, regressor, sheet.discounts)


def projection_bank(panel: MixedFrequencyPanel, lead: int, quarters: range | None = None, **spec_kwargs) -> list[ProjectionSheet]:
    """Independent projection sheets for every indicator at one lead."""
    return [run_projection(panel, ProjectionSpec(j, lead, **spec_kwargs), quarters) for j in range(panel.J)]


def load_sheet_csv(path, label: str | None = None, discounts: DiscountPair = PROJECTION_DISCOUNTS) -> ProjectionSheet:
    """Read an exported sheet back (densities only, no filter state)."""
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    dummy = DlmState(np.zeros(1), np.zeros((1, 1)), 1.0, 1.0)
    return ProjectionSheet(
        label or Path(path).stem, rows[:, 0].astype(int), rows[:, 1], rows[:, 2], rows[:, 3], dummy, discounts
    )
