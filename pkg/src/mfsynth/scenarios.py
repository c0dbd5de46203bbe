"""Named synthetic scenarios and the end-to-end synthetic report."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .dlm import DiscountPair
from .errors import ValidationError
from .evaluation import msne
from .sequential import SequentialRun, ar_reference, sequential_nowcast
from .synthesis import SYNTHESIS_DISCOUNTS, GibbsConfig, default_synthesis_prior
from .timegrid import GroundTruth, MixedFrequencyPanel, PeriodSplit, SimulationConfig, simulate_panel


@dataclass(frozen=True)
class Scenario:
    name: str
    simulation: SimulationConfig
    split: PeriodSplit
    leads: tuple[int, ...] = (0,)
    discounts: DiscountPair = SYNTHESIS_DISCOUNTS
    description: str = ""


def _regime_loadings(T: int, switch: int, before, after) -> np.ndarray:
    path = np.tile(np.asarray(before, dtype=float), (T, 1))
    path[switch - 1 :] = after
    return path


def _scenarios() -> dict[str, Scenario]:
    T = 200
    return {
        "recovery": Scenario(
            "recovery",
            SimulationConfig(T=T, J=3, loadings=(0.2, 0.5, 0.3), noise_sd=0.2, factor_share=0.95, signal_lead=0),
            PeriodSplit(10, 66, T),
            description="constant loadings on lag-window signals of three strongly co-moving indicators",
        ),
        "regime-shift": Scenario(
            "regime-shift",
            SimulationConfig(
                T=T, J=3, loadings=_regime_loadings(T, 134, (0.2, 0.5, 0.3), (0.6, 0.1, 0.3)),
                noise_sd=0.5, factor_share=0.5, lead_months=2,
            ),
            PeriodSplit(10, 66, T),
            leads=(0, 2),
            description="loadings switch from (0.2, 0.5, 0.3) to (0.6, 0.1, 0.3) halfway through the test period",
        ),
        "zero-noise": Scenario(
            "zero-noise",
            SimulationConfig(T=100, J=1, loadings=(1.0,), noise_sd=0.0, signal_lead=0),
            PeriodSplit(10, 40, 100),
            description="target equals one indicator's lag-window mean exactly",
        ),
        "long-oracle": Scenario(
            "long-oracle",
            SimulationConfig(T=3000, J=3, noise_sd=0.5),
            PeriodSplit(10, 1000, 3000),
            leads=(),
            description="long panel for checking the oracle error against the generator",
        ),
    }


SCENARIOS = _scenarios()


def _only(section: str, raw, allowed: set[str]) -> dict:
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ValidationError(f"scenario {section} must be a mapping")
    extra = set(raw) - allowed
    if extra:
        raise ValidationError(f"unknown scenario {section} keys: {sorted(extra)}")
    return raw


def load_scenario(path) -> Scenario:
    """Read a scenario from YAML.

    Keys: ``name``, ``description``, ``simulation`` (any generator setting;
    ``loadings`` may be a (T, J) nested list), ``split`` with the three
    boundaries, ``leads`` and ``discounts`` with ``state_discount`` and
    ``vol_discount``.
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ValidationError(f"scenario file is not valid YAML: {str(exc).splitlines()[0]}") from None
    top = _only("file", raw, {"name", "description", "simulation", "split", "leads", "discounts"})
    sim = dict(_only("simulation", top.get("simulation"), {f.name for f in fields(SimulationConfig)}))
    for key in ("loadings", "intercept"):
        if isinstance(sim.get(key), list):
            sim[key] = np.asarray(sim[key], dtype=float)
    config = SimulationConfig(**sim)
    split = _only("split", top.get("split"), {"train_end", "calib_end", "test_end"})
    if set(split) != {"train_end", "calib_end", "test_end"}:
        raise ValidationError("scenario split needs train_end, calib_end and test_end")
    disc = _only("discounts", top.get("discounts"), {"state_discount", "vol_discount"})
    return Scenario(
        str(top.get("name", path.stem)),
        config,
        PeriodSplit(int(split["train_end"]), int(split["calib_end"]), int(split["test_end"])),
        tuple(int(l) for l in top.get("leads", [0])),
        DiscountPair(
            float(disc.get("state_discount", SYNTHESIS_DISCOUNTS.state_discount)),
            float(disc.get("vol_discount", SYNTHESIS_DISCOUNTS.vol_discount)),
        ),
        str(top.get("description", "")),
    )


def get_scenario(name) -> Scenario:
    """A built-in scenario by name, or one loaded from a YAML file path."""
    if name in SCENARIOS:
        return SCENARIOS[name]
    if Path(name).suffix in (".yaml", ".yml") and Path(name).is_file():
        return load_scenario(name)
    raise ValidationError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)} or give a YAML file")


@dataclass
class LeadReport:
    lead: int
    quarters: np.ndarray
    msne: float
    coverage: np.ndarray  # (Q, J) bool: 90% band of each loading covers the truth
    coverage_rate: np.ndarray  # (J,)
    run: SequentialRun = field(repr=False)


@dataclass
class SyntheticReport:
    scenario: str
    seed: int
    innovation_variance: float
    oracle_msne: float
    ar_msne: float
    leads: dict[int, LeadReport]
    truth: GroundTruth = field(repr=False)
    panel: MixedFrequencyPanel = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "innovation_variance": self.innovation_variance,
            "oracle_msne": self.oracle_msne,
            "ar_msne": self.ar_msne,
            "leads": {
                str(l): {
                    "msne": r.msne,
                    "coverage_rate": r.coverage_rate.tolist(),
                    "coverage": [[int(q)] + row.astype(int).tolist() for q, row in zip(r.quarters, r.coverage)],
                }
                for l, r in self.leads.items()
            },
        }


def run_synthetic(name, seed: int = 0, gibbs: GibbsConfig | None = None, leads=None) -> SyntheticReport:
    """Simulate a scenario (built-in name or YAML path) and score the full pipeline against the generator.

    The oracle nowcast knows the generating signal, so its test-period MSNE
    is the mean squared innovation over those quarters. Coverage compares the
    90% band of the loadings at the last fitted quarter with the generator's
    loadings for that quarter.
    """
    sc = get_scenario(name)
    gibbs = replace(gibbs or GibbsConfig(), seed=seed)
    panel, truth = simulate_panel(sc.simulation, seed)
    test = np.arange(sc.split.test_start, sc.split.test_end + 1)
    oracle = float(np.mean(truth.noise[test - 1] ** 2))
    _, ar_err, _ = ar_reference(panel, test)
    reports = {}
    for lead in sc.leads if leads is None else leads:
        prior = default_synthesis_prior(panel.J, sc.discounts)
        run = sequential_nowcast(panel, lead, sc.split, prior, gibbs)
        _, lo, hi = run.coefficient_bands(0.05, 0.95)
        true = truth.loadings[run.quarters - 2]
        cover = (lo[:, 1:] <= true) & (true <= hi[:, 1:])
        reports[lead] = LeadReport(lead, run.quarters, msne(run.errors).final, cover, cover.mean(axis=0), run)
    return SyntheticReport(
        sc.name, seed, float(truth.innovation_variance), oracle, float(np.mean(ar_err**2)), reports, truth, panel
    )
