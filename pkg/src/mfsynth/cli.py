"""Command-line pipeline: ingest, project, nowcast, evaluate, simulate, run."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .baselines import pooled_midas_nowcasts, rolling_midas
from .dlm import DiscountPair, DlmState
from .errors import ConfigError, DataError, MFSError, ValidationError
from .evaluation import DependencyTrajectory, coefficient_labels, lpdr, msne, paired_r2, write_json
from .projection import PROJECTION_DISCOUNTS, ProjectionSpec, run_projection
from .scenarios import SCENARIOS, run_synthetic
from .sequential import SequentialRun, ar_reference, sequential_nowcast
from .synthesis import SYNTHESIS_DISCOUNTS, GibbsConfig, SynthesisPrior, default_synthesis_prior
from .timegrid import DEFAULT_LAGS, MixedFrequencyPanel, PeriodSplit, load_panel, save_panel, split_periods

log = logging.getLogger("mfsynth")

NOWCAST_HEADER = ["quarter", "mean", "sd", "logpdf", "realized", "error"]
BASELINE_HEADER = ["quarter", "location", "variance", "logpdf_at_realized"]
METRIC_HEADER = ["quarter", "model", "msne", "lpdr"]
COEFFICIENT_HEADER = ["quarter", "coefficient", "mean", "lower", "upper"]


# ---------------------------------------------------------------------------
# configuration


def _strict(section: str, raw: Any, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{section} must be a mapping")
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(sorted(unknown))}")
    missing = set(required) - set(raw)
    if missing:
        raise ConfigError(f"missing key(s) in {section}: {', '.join(sorted(missing))}")
    return raw


def _discounts(section: str, raw, default: DiscountPair) -> DiscountPair:
    raw = _strict(section, raw, {"state_discount", "vol_discount"})
    try:
        return DiscountPair(
            float(raw.get("state_discount", default.state_discount)), float(raw.get("vol_discount", default.vol_discount))
        )
    except ValidationError as exc:
        raise ConfigError(f"{section}: {exc}") from None


@dataclass(frozen=True)
class PriorSettings:
    n0: float
    s0: float
    c0: float
    m0: tuple[float, ...] | None = None


@dataclass(frozen=True)
class BaselineSettings:
    ar3: bool = True
    midas: tuple[int, ...] = (0, 1, 3)
    pooling: bool = True
    midas_window: int = 40


@dataclass(frozen=True)
class RunConfig:
    target: Path
    indicators: tuple[Path, ...]
    split: PeriodSplit
    labels: tuple[str, ...] | None = None
    ratio: int = 3
    leads: tuple[int, ...] = (0, 2)
    lags: int = DEFAULT_LAGS
    projection_prior: PriorSettings = PriorSettings(2.0, 0.01, 0.01)
    projection_discounts: DiscountPair = PROJECTION_DISCOUNTS
    synthesis_prior: PriorSettings = PriorSettings(10.0, 0.002, 1.0)
    synthesis_discounts: DiscountPair = SYNTHESIS_DISCOUNTS
    ar_agent: bool = False
    gibbs: GibbsConfig = GibbsConfig()
    baselines: BaselineSettings = BaselineSettings()
    output: Path = Path("mfs-output")
    seed: int = 0
    dump_posterior: bool = False

    @property
    def n_agents(self) -> int:
        return len(self.indicators) + int(self.ar_agent)

    def projection_state(self) -> DlmState:
        p = self.projection_prior
        m0 = np.zeros(self.lags) if p.m0 is None else np.asarray(p.m0, dtype=float)
        if len(m0) != self.lags:
            raise ConfigError(f"projection m0 needs {self.lags} entries")
        return DlmState(m0, p.c0 * np.eye(self.lags), p.n0, p.s0)

    def synthesis(self) -> SynthesisPrior:
        J = self.n_agents
        p = self.synthesis_prior
        m0 = default_synthesis_prior(J).m0 if p.m0 is None else np.asarray(p.m0, dtype=float)
        if len(m0) != J + 1:
            raise ConfigError(f"synthesis m0 needs {J + 1} entries (intercept plus one per agent)")
        return SynthesisPrior(m0, p.c0 * np.eye(J + 1), p.n0, p.s0, self.synthesis_discounts)


def _prior(section, raw, default: PriorSettings) -> PriorSettings:
    raw = _strict(section, raw, {"n0", "s0", "c0", "m0"})
    out = PriorSettings(
        float(raw.get("n0", default.n0)), float(raw.get("s0", default.s0)), float(raw.get("c0", default.c0)),
        None if raw.get("m0") is None else tuple(float(v) for v in raw["m0"]),
    )
    if not (out.n0 > 0 and out.s0 > 0 and out.c0 >= 0):
        raise ConfigError(f"{section} needs n0 > 0, s0 > 0 and c0 >= 0")
    return out


def parse_config(raw: Any, base_dir: Path = Path(".")) -> RunConfig:
    """Validate a config mapping; relative paths resolve against ``base_dir``."""
    top = _strict(
        "config", raw,
        {"data", "ratio", "split", "leads", "projection", "synthesis", "gibbs", "baselines", "output", "seed",
         "dump_posterior"},
        {"data", "split"},
    )
    data = _strict("data", top["data"], {"target", "indicators", "labels"}, {"target", "indicators"})
    indicators = data["indicators"]
    if not isinstance(indicators, list) or not indicators:
        raise ConfigError("data.indicators must be a non-empty list of paths")
    paths = [(base_dir / p) for p in [data["target"], *indicators]]
    for p in paths:
        if not p.is_file():
            raise ConfigError(f"data file not found: {p}")
    split = _strict("split", top["split"], {"train_end", "calib_end", "test_end"}, {"train_end", "calib_end", "test_end"})
    try:
        period_split = PeriodSplit(int(split["train_end"]), int(split["calib_end"]), int(split["test_end"]))
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    ratio = int(top.get("ratio", 3))
    if ratio < 1:
        raise ConfigError("ratio must be positive")
    leads = tuple(int(l) for l in top.get("leads", [0, 2]))
    if not leads or any(not 0 <= l < ratio for l in leads) or len(set(leads)) != len(leads):
        raise ConfigError(f"leads must be distinct values in 0..{ratio - 1}")
    proj = _strict("projection", top.get("projection"), {"prior", "discounts", "lags"})
    syn = _strict("synthesis", top.get("synthesis"), {"prior", "discounts", "ar_agent"})
    gib = _strict("gibbs", top.get("gibbs"), {"burn_in", "keep", "thin"})
    base = _strict("baselines", top.get("baselines"), {"ar3", "midas", "pooling", "midas_window"})
    seed = int(top.get("seed", 0))
    try:
        gibbs = GibbsConfig(int(gib.get("burn_in", 2000)), int(gib.get("keep", 3000)), int(gib.get("thin", 1)), seed)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    midas = tuple(int(p) for p in base.get("midas", [0, 1, 3]))
    if any(p not in (0, 1, 3) for p in midas):
        raise ConfigError("baselines.midas entries must be 0, 1 or 3")
    labels = data.get("labels")
    if labels is not None and len(labels) != len(indicators):
        raise ConfigError("data.labels must match data.indicators in length")
    return RunConfig(
        target=paths[0],
        indicators=tuple(paths[1:]),
        split=period_split,
        labels=None if labels is None else tuple(str(l) for l in labels),
        ratio=ratio,
        leads=leads,
        lags=int(proj.get("lags", DEFAULT_LAGS)),
        projection_prior=_prior("projection.prior", proj.get("prior"), RunConfig.projection_prior),
        projection_discounts=_discounts("projection.discounts", proj.get("discounts"), PROJECTION_DISCOUNTS),
        synthesis_prior=_prior("synthesis.prior", syn.get("prior"), RunConfig.synthesis_prior),
        synthesis_discounts=_discounts("synthesis.discounts", syn.get("discounts"), SYNTHESIS_DISCOUNTS),
        ar_agent=bool(syn.get("ar_agent", False)),
        gibbs=gibbs,
        baselines=BaselineSettings(
            bool(base.get("ar3", True)), midas, bool(base.get("pooling", True)), int(base.get("midas_window", 40))
        ),
        output=base_dir / str(top.get("output", "mfs-output")),
        seed=seed,
        dump_posterior=bool(top.get("dump_posterior", False)),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {str(exc).splitlines()[0]}") from None
    return parse_config(raw, path.parent)


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    changes: dict[str, Any] = {}
    gibbs = cfg.gibbs
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
        gibbs = replace(gibbs, seed=args.seed)
    if getattr(args, "iters", None) is not None:
        gibbs = replace(gibbs, keep=args.iters)
    if getattr(args, "burnin", None) is not None:
        gibbs = replace(gibbs, burn_in=args.burnin)
    changes["gibbs"] = gibbs
    if getattr(args, "lead", None):
        leads = tuple(dict.fromkeys(args.lead))
        if any(not 0 <= l < cfg.ratio for l in leads):
            raise ConfigError(f"--lead must lie in 0..{cfg.ratio - 1}")
        changes["leads"] = leads
    if getattr(args, "out", None) is not None:
        changes["output"] = Path(args.out)
    return replace(cfg, **changes)


# ---------------------------------------------------------------------------
# stages


def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    return repr(v) if np.isfinite(v) else str(v)


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def stage_ingest(cfg: RunConfig) -> MixedFrequencyPanel:
    panel = load_panel(cfg.target, cfg.indicators, cfg.ratio, cfg.labels)
    split_periods(panel, cfg.split)
    return panel


def write_panel_summary(panel: MixedFrequencyPanel, out: Path) -> None:
    write_json(
        out / "panel.json",
        {
            "quarters": panel.T,
            "series": list(panel.labels),
            "first_quarter": panel.quarter_label(1),
            "last_quarter": panel.quarter_label(panel.T),
            "lead_months": [panel.lead_months(j) for j in range(panel.J)],
        },
    )


def stage_project(cfg: RunConfig, panel: MixedFrequencyPanel, out: Path) -> None:
    prior = cfg.projection_state()
    for lead in cfg.leads:
        for j in range(panel.J):
            sheet = run_projection(panel, ProjectionSpec(j, lead, cfg.lags, prior, cfg.projection_discounts))
            sheet.to_csv(out / f"projection_lead{lead}_{_safe(panel.labels[j])}.csv")


def _safe(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in label)


def stage_nowcast(cfg: RunConfig, panel: MixedFrequencyPanel, out: Path) -> dict[int, SequentialRun]:
    runs = {}
    for lead in cfg.leads:
        run = sequential_nowcast(
            panel, lead, cfg.split, cfg.synthesis(), cfg.gibbs, cfg.lags, cfg.projection_discounts,
            cfg.projection_state(), cfg.ar_agent,
            progress=lambda t, lead=lead: log.info("lead %d: quarter %d done", lead, t),
        )
        runs[lead] = run
        write_run(run, out, cfg.dump_posterior)
    return runs


def write_run(run: SequentialRun, out: Path, dump_posterior: bool = False) -> None:
    lead = run.lead
    _write_rows(
        out / f"nowcast_lead{lead}.csv", NOWCAST_HEADER,
        [[r.period, _fmt(r.mean), _fmt(r.sd), _fmt(r.log_pred_density), _fmt(r.realized), _fmt(r.error)]
         for r in run.results],
    )
    mean, lo, hi = run.coefficient_bands()
    names = coefficient_labels(run.labels)
    _write_rows(
        out / f"coefficients_lead{lead}.csv", COEFFICIENT_HEADER,
        [[int(q), names[i], _fmt(mean[k, i]), _fmt(lo[k, i]), _fmt(hi[k, i])]
         for k, q in enumerate(run.quarters) for i in range(len(names))],
    )
    if len(run.labels) >= 2:
        DependencyTrajectory(np.array([paired_r2(f.x_final) for f in run.fits]), run.quarters, run.labels).to_csv(
            out / f"dependency_lead{lead}.csv"
        )
    if dump_posterior:
        np.savez_compressed(
            out / f"posterior_lead{lead}.npz",
            quarters=run.quarters,
            theta_final=np.stack([f.theta_final for f in run.fits]),
            x_final=np.stack([f.x_final for f in run.fits]),
            nowcast_samples=np.stack([f.nowcast.samples for f in run.fits]),
        )


def read_nowcast_csv(path: Path) -> dict[str, np.ndarray]:
    if not path.is_file():
        raise DataError(f"missing nowcast file {path}; run the nowcast stage first")
    rows = np.genfromtxt(path, delimiter=",", names=True, ndmin=1)
    return {name: np.atleast_1d(rows[name]) for name in NOWCAST_HEADER}


def stage_evaluate(cfg: RunConfig, panel: MixedFrequencyPanel, out: Path) -> dict:
    """Score every lead's nowcasts and baselines; write metrics and summary.json."""
    _, _, test = split_periods(panel, cfg.split)
    quarters = np.arange(test.start, test.stop)
    y = panel.target[quarters - 1]
    ar_dens, ar_err, ar_lp = ar_reference(panel, quarters, cfg.projection_discounts)
    if cfg.baselines.ar3:
        _write_rows(
            out / "baseline_ar3.csv", BASELINE_HEADER,
            [[int(q), _fmt(d.location), _fmt(d.variance), _fmt(lp)] for q, d, lp in zip(quarters, ar_dens, ar_lp)],
        )
    summary: dict[str, Any] = {"seed": cfg.seed, "test_quarters": [int(quarters[0]), int(quarters[-1])], "models": {}}
    models = summary["models"]
    for lead in cfg.leads:
        nc = read_nowcast_csv(out / f"nowcast_lead{lead}.csv")
        if not np.array_equal(nc["quarter"].astype(int), quarters):
            raise DataError(f"nowcast_lead{lead}.csv does not cover the configured test period")
        scored = {"MFS": (nc["error"], nc["logpdf"])}
        if cfg.baselines.ar3:
            scored["AR(3)"] = (ar_err, ar_lp)
        for p in cfg.baselines.midas:
            scored.update(_midas_scores(cfg, panel, lead, p, quarters, y, out))
        rows = []
        for name, (err, lp) in scored.items():
            m = msne(err, name, lead, quarters)
            # competitor minus MFS at the same lead, so MFS is the zero line
            r = lpdr(lp, nc["logpdf"], name, lead, quarters)
            models.setdefault(name, {})[str(lead)] = {"msne": m.final, "lpdr": r.final}
            rows += [[int(q), name, _fmt(a), _fmt(b)] for q, a, b in zip(quarters, m.values, r.values)]
        _write_rows(out / f"metrics_lead{lead}.csv", METRIC_HEADER, rows)
    write_json(out / "summary.json", summary)
    return summary


def _midas_scores(cfg, panel, lead, p, quarters, y, out):
    scores = {}
    window = cfg.baselines.midas_window
    if cfg.baselines.pooling:
        groups = {(f"MIDAS-AR({p}) pool", f"midas_ar{p}_pool"): pooled_midas_nowcasts(panel, lead, p, quarters, window)}
    else:
        groups = {
            (f"MIDAS-AR({p}) {panel.labels[j]}", f"midas_ar{p}_{_safe(panel.labels[j])}"): [
                g for _, g in rolling_midas(panel, j, lead, p, quarters, window)
            ]
            for j in range(panel.J)
        }
    for (name, slug), dens in groups.items():
        lp = np.array([float(d.logpdf(v)) for d, v in zip(dens, y)])
        loc = np.array([d.mean for d in dens])
        _write_rows(
            out / f"baseline_{slug}_lead{lead}.csv", BASELINE_HEADER,
            [[int(q), _fmt(d.mean), _fmt(d.variance), _fmt(v)] for q, d, v in zip(quarters, dens, lp)],
        )
        scores[name] = (y - loc, lp)
    return scores


def stage_simulate(scenario: str, seed: int, gibbs: GibbsConfig, out: Path, leads=None) -> dict:
    report = run_synthetic(scenario, seed, gibbs, leads)
    save_panel(report.panel, out / "panel")
    truth = report.truth
    J = truth.loadings.shape[1]
    _write_rows(
        out / "truth.csv",
        ["quarter", "intercept"] + [f"loading_{j + 1}" for j in range(J)] + [f"signal_{j + 1}" for j in range(J)] + ["noise"],
        [[t + 1, _fmt(truth.intercept[t]), *map(_fmt, truth.loadings[t]), *map(_fmt, truth.design[t]), _fmt(truth.noise[t])]
         for t in range(len(truth.noise))],
    )
    for lr in report.leads.values():
        write_run(lr.run, out)
    payload = report.to_dict()
    write_json(out / "report.json", payload)
    return payload


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--lead", type=int, action="append", help="lead in months (repeatable)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--iters", type=int, help="retained Gibbs draws")
    common.add_argument("--burnin", type=int, help="Gibbs burn-in iterations")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="mfsynth", description="Dynamic mixed-frequency synthesis nowcasting")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("ingest", "validate and summarize the input panel"),
        ("project", "write projection density sheets"),
        ("nowcast", "sequential MFS nowcasts for the test period"),
        ("evaluate", "score nowcasts and baselines, write summary.json"),
        ("run", "ingest, project, nowcast and evaluate"),
    ]:
        sub.add_parser(name, parents=[common], help=text)
    sim = sub.add_parser("simulate", parents=[common], help="run a built-in synthetic scenario")
    sim.add_argument("--scenario", default="recovery", help=f"one of {', '.join(sorted(SCENARIOS))}, or a scenario YAML file")
    return parser


def _dispatch(args) -> None:
    if args.command == "simulate":
        gibbs = GibbsConfig(
            args.burnin if args.burnin is not None else 2000, args.iters if args.iters is not None else 3000
        )
        out = args.out or Path(f"mfs-{Path(args.scenario).stem}")
        out.mkdir(parents=True, exist_ok=True)
        payload = stage_simulate(args.scenario, args.seed or 0, gibbs, out, args.lead)
        print(json.dumps({k: payload[k] for k in ("scenario", "seed", "innovation_variance", "oracle_msne")}))
        return
    if args.config is None:
        raise ConfigError(f"{args.command} requires --config")
    cfg = apply_overrides(load_config(args.config), args)
    out = cfg.output
    out.mkdir(parents=True, exist_ok=True)
    panel = stage_ingest(cfg)
    if args.command in ("ingest", "run"):
        write_panel_summary(panel, out)
    if args.command in ("project", "run"):
        stage_project(cfg, panel, out)
    if args.command in ("nowcast", "run"):
        stage_nowcast(cfg, panel, out)
    if args.command in ("evaluate", "run"):
        stage_evaluate(cfg, panel, out)


def error_line(exc: BaseException) -> str:
    code = exc.exit_code if isinstance(exc, MFSError) else 1
    return json.dumps({"error": type(exc).__name__, "exit_code": code, "message": str(exc)})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _dispatch(args)
    except MFSError as exc:
        print(error_line(exc), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        err = DataError(str(exc))
        print(error_line(err), file=sys.stderr)
        return err.exit_code
    return 0
