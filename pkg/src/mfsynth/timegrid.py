"""Mixed-frequency panels: ingestion, period bookkeeping and lag windows.

Everything downstream works on integer indices. Quarters are numbered
``1..T`` and months inside quarter ``t`` occupy the zero-based monthly
positions ``(t - 1) * ratio .. t * ratio - 1``. Calendar dates are kept only
as anchors for reading and writing CSV files.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import AlignmentError, BoundaryError, GapError, OrderingError, ValidationError

DEFAULT_LAGS = 3


@dataclass(frozen=True, order=True)
class PeriodIndex:
    """A position on the mixed-frequency grid: quarter ``t`` plus ``intra`` months."""

    quarter: int
    intra: int = 0

    def __post_init__(self):
        if self.quarter < 1 or self.intra < 0:
            raise ValidationError(f"invalid period index {self.quarter}:{self.intra}")


@dataclass(frozen=True)
class LagVector:
    """Most-recent-first window of monthly values feeding one projection."""

    values: np.ndarray
    lead: int

    def __len__(self):
        return len(self.values)


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class MixedFrequencyPanel:
    """Low-frequency target aligned with J high-frequency indicators.

    ``indicators[j]`` holds monthly observations starting in the first
    month of quarter 1. Observations past ``ratio * T`` are leads into
    quarter ``T + 1``.
    """

    target: np.ndarray
    indicators: tuple[np.ndarray, ...]
    labels: tuple[str, ...]
    ratio: int = 3
    start: tuple[int, int] = (1970, 1)
    target_label: str = "target"

    def __post_init__(self):
        object.__setattr__(self, "target", _readonly(self.target))
        object.__setattr__(self, "indicators", tuple(_readonly(z) for z in self.indicators))
        object.__setattr__(self, "labels", tuple(self.labels))
        if self.target.ndim != 1 or len(self.target) < 1:
            raise ValidationError("target must be a non-empty 1-d series")
        if len(self.indicators) < 1:
            raise ValidationError("panel needs at least one indicator")
        if len(self.labels) != len(self.indicators):
            raise ValidationError("one label per indicator required")
        if self.ratio < 1:
            raise ValidationError("frequency ratio must be positive")
        limit = self.ratio * (self.T + 1) - 1
        for label, z in zip(self.labels, self.indicators):
            if z.ndim != 1:
                raise ValidationError(f"indicator {label!r} must be 1-d")
            if len(z) > limit:
                raise AlignmentError(
                    f"indicator {label!r} has {len(z)} months; at most {limit} fit {self.T} quarters plus leads"
                )
            if not np.all(np.isfinite(z)):
                raise GapError(f"indicator {label!r} contains non-finite values")
        if not np.all(np.isfinite(self.target)):
            raise GapError(f"target {self.target_label!r} contains non-finite values")

    @property
    def T(self) -> int:
        return len(self.target)

    @property
    def J(self) -> int:
        return len(self.indicators)

    def lead_months(self, j: int) -> int:
        """Number of months of quarter ``T + 1`` already observed for series j."""
        return max(0, len(self.indicators[j]) - self.ratio * self.T)

    def with_target(self, target) -> "MixedFrequencyPanel":
        return MixedFrequencyPanel(target, self.indicators, self.labels, self.ratio, self.start, self.target_label)

    def truncated(self, T: int) -> "MixedFrequencyPanel":
        """Panel restricted to the first T quarters (indicator leads dropped)."""
        if not 1 <= T <= self.T:
            raise ValidationError(f"cannot truncate panel of {self.T} quarters to {T}")
        n = self.ratio * T
        return MixedFrequencyPanel(
            self.target[:T], [z[:n] for z in self.indicators], self.labels, self.ratio, self.start, self.target_label
        )

    # calendar anchors
    def month_date(self, k: int) -> dt.date:
        """Date of zero-based monthly position k."""
        y, m = self.start
        total = y * 12 + (m - 1) + k
        return dt.date(total // 12, total % 12 + 1, 1)

    def quarter_date(self, t: int) -> dt.date:
        return self.month_date((t - 1) * self.ratio)

    def quarter_label(self, t: int) -> str:
        d = self.quarter_date(t)
        if self.ratio == 3:
            return f"{d.year}Q{(d.month - 1) // 3 + 1}"
        return d.isoformat()

    def quarter_of(self, label: str) -> int:
        """Inverse of :meth:`quarter_label` (also accepts ISO dates)."""
        for t in range(1, self.T + 1):
            if label in (self.quarter_label(t), self.quarter_date(t).isoformat()):
                return t
        raise BoundaryError(f"period {label!r} is not on the panel grid")


# ---------------------------------------------------------------------------
# CSV ingestion


def _read_series(path) -> tuple[list[dt.date], list[float]]:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip().lower() for c in rows[0]] != ["date", "value"]:
        raise AlignmentError(f"{path.name}: expected header 'date,value'")
    dates, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise AlignmentError(f"{path.name}:{lineno}: expected 2 columns, got {len(row)}")
        try:
            dates.append(dt.date.fromisoformat(row[0].strip()))
        except ValueError as exc:
            raise AlignmentError(f"{path.name}:{lineno}: bad date {row[0]!r}") from exc
        text = row[1].strip()
        if text == "" or text.lower() in ("na", "nan"):
            raise GapError(f"{path.name}: missing value at {row[0].strip()}")
        values.append(float(text))
    if not dates:
        raise AlignmentError(f"{path.name}: no observations")
    return dates, values


def _month_number(d: dt.date) -> int:
    return d.year * 12 + d.month - 1


def _check_grid(name: str, dates: Sequence[dt.date], step: int) -> None:
    for d in dates:
        if d.day != 1:
            raise AlignmentError(f"series {name!r}: date {d} is not a period start")
    months = [_month_number(d) for d in dates]
    for prev, (cur, d) in zip(months, zip(months[1:], dates[1:])):
        if cur <= prev:
            raise OrderingError(f"series {name!r}: dates not increasing at {d}")
        gap = cur - prev
        if gap == step:
            continue
        if gap % step == 0:
            k = prev + step
            missing = dt.date(k // 12, k % 12 + 1, 1)
            raise GapError(f"series {name!r}: missing observation at {missing}")
        raise AlignmentError(f"series {name!r}: spacing of {gap} months at {d} does not match step {step}")


def load_panel(target_csv, indicator_csvs, ratio: int = 3, labels: Sequence[str] | None = None) -> MixedFrequencyPanel:
    """Read a target CSV and monthly indicator CSVs into an aligned panel.

    Target dates sit at low-frequency period starts spaced ``ratio`` months
    apart; indicator dates are consecutive month starts beginning in the
    first target month.
    """
    if ratio < 1:
        raise ValidationError("ratio must be positive")
    target_csv = Path(target_csv)
    tdates, tvals = _read_series(target_csv)
    _check_grid(target_csv.stem, tdates, ratio)
    start = _month_number(tdates[0])
    indicator_csvs = [Path(p) for p in indicator_csvs]
    if labels is None:
        labels = [p.stem for p in indicator_csvs]
    series = []
    for label, path in zip(labels, indicator_csvs):
        dates, vals = _read_series(path)
        _check_grid(label, dates, 1)
        if _month_number(dates[0]) != start:
            raise AlignmentError(f"series {label!r} starts {dates[0]}, target starts {tdates[0]}")
        if len(vals) > ratio * (len(tvals) + 1) - 1:
            raise AlignmentError(
                f"series {label!r}: {len(vals)} months inconsistent with {len(tvals)} periods at ratio {ratio}"
            )
        series.append(vals)
    return MixedFrequencyPanel(
        tvals, series, labels, ratio, (tdates[0].year, tdates[0].month), target_label=target_csv.stem
    )


def _write_series(path, dates, values) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("date,value\n")
        for d, v in zip(dates, values):
            fh.write(f"{d.isoformat()},{float(v)!r}\n")


def save_panel(panel: MixedFrequencyPanel, directory) -> tuple[Path, list[Path]]:
    """Write the panel as ``<target_label>.csv`` plus one CSV per indicator."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tpath = directory / f"{panel.target_label}.csv"
    _write_series(tpath, [panel.quarter_date(t) for t in range(1, panel.T + 1)], panel.target)
    paths = []
    for label, z in zip(panel.labels, panel.indicators):
        p = directory / f"{label}.csv"
        _write_series(p, [panel.month_date(k) for k in range(len(z))], z)
        paths.append(p)
    return tpath, paths


# ---------------------------------------------------------------------------
# regressor windows


def last_available_month(panel: MixedFrequencyPanel, t: int, lead: int) -> int:
    """Zero-based monthly position of the newest observation usable for quarter t."""
    return (t - 1) * panel.ratio + lead - 1


def build_regressor_vector(
    panel: MixedFrequencyPanel, j: int, t: int, lead: int, lags: int = DEFAULT_LAGS
) -> LagVector:
    """Return the ``lags`` newest monthly values of series j when nowcasting quarter t.

    With ``lead`` months of quarter t observed the window holds those months
    followed by the trailing months of quarter t - 1, most recent first.
    """
    if not 0 <= lead < panel.ratio:
        raise ValidationError(f"lead must lie in 0..{panel.ratio - 1}, got {lead}")
    if not 0 <= j < panel.J:
        raise ValidationError(f"series index {j} out of range")
    last = last_available_month(panel, t, lead)
    first = last - lags + 1
    z = panel.indicators[j]
    if t < 1 or first < 0:
        raise BoundaryError(f"quarter {t} with lead {lead} needs months before the sample start for {panel.labels[j]!r}")
    if last >= len(z):
        raise BoundaryError(f"series {panel.labels[j]!r} has no data for month {last + 1} (quarter {t}, lead {lead})")
    return LagVector(z[first : last + 1][::-1].copy(), lead)


def regressor_matrix(panel: MixedFrequencyPanel, j: int, quarters, lead: int, lags: int = DEFAULT_LAGS) -> np.ndarray:
    """Stack lag windows for several quarters, one row per quarter."""
    return np.array([build_regressor_vector(panel, j, t, lead, lags).values for t in quarters]).reshape(-1, lags)


def first_feasible_quarter(ratio: int, lead: int, lags: int = DEFAULT_LAGS) -> int:
    """Smallest quarter whose lag window starts inside the sample."""
    t = 1
    while (t - 1) * ratio + lead - lags < 0:
        t += 1
    return t


# ---------------------------------------------------------------------------
# period splits


@dataclass(frozen=True)
class PeriodSplit:
    """Last quarter (1-based, inclusive) of the training, calibration and test periods."""

    train_end: int
    calib_end: int
    test_end: int

    def __post_init__(self):
        for name in ("train_end", "calib_end", "test_end"):
            v = getattr(self, name)
            if isinstance(v, PeriodIndex):
                object.__setattr__(self, name, v.quarter)
        if not 1 <= self.train_end < self.calib_end < self.test_end:
            raise ValidationError(
                f"split boundaries must satisfy 1 <= train_end < calib_end < test_end, got "
                f"{self.train_end}, {self.calib_end}, {self.test_end}"
            )

    @property
    def calib_start(self) -> int:
        return self.train_end + 1

    @property
    def test_start(self) -> int:
        return self.calib_end + 1


def split_periods(panel: MixedFrequencyPanel, split: PeriodSplit) -> tuple[range, range, range]:
    """Contiguous training, calibration and test quarter ranges."""
    if split.test_end > panel.T:
        raise ValidationError(f"test_end {split.test_end} exceeds panel length {panel.T}")
    return (
        range(1, split.train_end + 1),
        range(split.train_end + 1, split.calib_end + 1),
        range(split.calib_end + 1, split.test_end + 1),
    )


# ---------------------------------------------------------------------------
# synthetic panels


@dataclass
class SimulationConfig:
    """Generator settings for :func:`simulate_panel`.

    ``loadings`` is either a length-J vector (constant coefficients) or a
    ``(T, J)`` array of per-quarter coefficients. Indicators are monthly
    AR(1) processes; ``factor_share`` of each one's variance comes from a
    common AR(1) factor. The target loads on a quarterly signal per series:
    the quarter's monthly mean, or, with ``signal_lead`` set, the mean of the
    lag window available at that lead.
    """

    T: int = 120
    J: int = 3
    ratio: int = 3
    loadings: object = (0.2, 0.5, 0.3)
    intercept: object = 0.0
    noise_sd: float = 0.5
    indicator_ar: float = 0.9
    indicator_sd: float = 1.0
    factor_share: float = 0.0
    signal_lead: int | None = None
    lags: int = DEFAULT_LAGS
    lead_months: int = 0
    labels: Sequence[str] | None = None


@dataclass(frozen=True)
class GroundTruth:
    """Generating quantities: y = intercept + sum(design * loadings, axis=1) + noise."""

    design: np.ndarray
    loadings: np.ndarray
    intercept: np.ndarray
    noise: np.ndarray
    innovation_variance: float = 0.0

    def signal(self) -> np.ndarray:
        return self.intercept + np.sum(self.design * self.loadings, axis=1)


def _broadcast_path(value, T: int, J: int | None, name: str) -> np.ndarray:
    a = np.asarray(value, dtype=float)
    shape = (T,) if J is None else (T, J)
    if a.ndim == 0 and J is None:
        return np.full(T, float(a))
    if J is not None and a.shape == (J,):
        return np.tile(a, (T, 1))
    if a.shape != shape:
        raise ValidationError(f"{name} must be scalar/per-series or shaped {shape}, got {a.shape}")
    return a.copy()


def _ar1(rng, rows: int, months: int, rho: float, sd: float) -> np.ndarray:
    z = np.empty((rows, months))
    z[:, 0] = rng.standard_normal(rows) * sd / np.sqrt(1 - rho**2)
    shocks = rng.standard_normal((rows, months - 1)) * sd
    for k in range(1, months):
        z[:, k] = rho * z[:, k - 1] + shocks[:, k - 1]
    return z


def simulate_panel(config: SimulationConfig, seed: int) -> tuple[MixedFrequencyPanel, GroundTruth]:
    """Draw a synthetic panel and the quantities that generated it."""
    if config.T < 4 or config.J < 1 or config.ratio < 1:
        raise ValidationError("simulation needs T >= 4, J >= 1 and a positive ratio")
    if config.noise_sd < 0 or config.indicator_sd <= 0:
        raise ValidationError("noise scales must be positive")
    if not 0 <= config.lead_months < config.ratio:
        raise ValidationError("lead_months must lie in 0..ratio-1")
    if not -1 < config.indicator_ar < 1 or not 0 <= config.factor_share <= 1:
        raise ValidationError("indicator_ar must be stationary and factor_share in [0, 1]")
    if config.signal_lead is not None and not 0 <= config.signal_lead < config.ratio:
        raise ValidationError("signal_lead must lie in 0..ratio-1")
    T, J, n = config.T, config.J, config.ratio
    rng = np.random.default_rng(seed)
    pre = config.lags  # unobserved months before the sample so every signal window exists
    months = pre + n * T + config.lead_months
    rho, sd = config.indicator_ar, config.indicator_sd
    idio = _ar1(rng, J, months, rho, sd)
    factor = _ar1(rng, 1, months, rho, sd)
    z = np.sqrt(config.factor_share) * factor + np.sqrt(1 - config.factor_share) * idio
    if config.signal_lead is None:
        design = z[:, pre : pre + n * T].reshape(J, T, n).mean(axis=2).T
    else:
        ends = pre + np.arange(T) * n + config.signal_lead  # exclusive end of each window
        design = np.stack([z[:, e - config.lags : e].mean(axis=1) for e in ends])
    loadings = _broadcast_path(config.loadings, T, J, "loadings")
    intercept = _broadcast_path(config.intercept, T, None, "intercept")
    noise = rng.standard_normal(T) * config.noise_sd
    truth = GroundTruth(design, loadings, intercept, noise, config.noise_sd**2)
    labels = config.labels or [f"x{j + 1}" for j in range(J)]
    panel = MixedFrequencyPanel(truth.signal() + noise, list(z[:, pre:]), labels, n, target_label="y")
    return panel, truth
