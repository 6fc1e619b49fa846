"""Figure presets and the batch sweep runner.

Each preset fixes a base scenario, a list of curves (``series``) and a sweep
variable. A sweep point is turned into a :class:`SystemConfig`, simulated
with Monte Carlo and, where a closed form exists, evaluated analytically.
Downlink power only enters at evaluation time, so SNR sweeps reuse one set
of link samples per scenario.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import math
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .asymptotic import (corollary1_rate, iid_betas, theorem2_terms, theorem3_terms,
                         trace_moments)
from .channel import build_correlation_set
from .config import ConfigError, SystemConfig, db2lin
from .downlink import LinkSamples, run_link_trials

MC_SCHEMES = ("proposed", "contaminated_mf")
FORMULA_SCHEMES = ("theorem2", "theorem3", "corollary1")
# fields that change the correlation matrices
GEOMETRY_FIELDS = ("L", "K", "N_t", "N_e", "fading", "theta_b", "sigma", "beta")


@dataclass(frozen=True)
class Preset:
    """One figure: base values, curves and the swept parameter.

    ``base`` uses :meth:`SystemConfig.from_dict` keys (``rho_db`` and
    ``snr_db`` allowed). ``grid`` is the desk-scale sweep and ``full_grid``
    the complete one. ``T_per_antenna`` ties ``T`` to ``N_t``.
    """

    figure: str
    title: str
    base: dict
    sweep: str
    grid: Tuple[float, ...]
    full_grid: Tuple[float, ...]
    series: Tuple[dict, ...] = ({},)
    schemes: Tuple[str, ...] = ("proposed",)
    metrics: Tuple[str, ...] = ("R_sec", "C_eve_sum")
    T_per_antenna: Optional[int] = None

    def describe(self) -> dict:
        return {"figure": self.figure, "title": self.title, "base": dict(self.base),
                "sweep": self.sweep, "grid": list(self.grid),
                "full_grid": list(self.full_grid),
                "series": [dict(s) for s in self.series], "schemes": list(self.schemes),
                "metrics": list(self.metrics), "T_per_antenna": self.T_per_antenna}


def _span(lo, hi, step):
    return tuple(float(v) for v in np.arange(lo, hi + step / 2, step))


_CORR = dict(L=3, K=5, N_t=128, T=1024, tau=64, P0=10.0, N0=1.0, N_e=2,
             fading="correlated", theta_b=math.pi, sigma=math.pi / 2, beta=0.1)
_BLOCKS = ({"T": 128, "tau": 8}, {"T": 128, "tau": 64},
           {"T": 1024, "tau": 8}, {"T": 1024, "tau": 64})
_THETA_FULL = tuple(float(v) for v in np.linspace(math.pi / 20, math.pi, 20))

PRESETS: Dict[str, Preset] = {p.figure: p for p in [
    Preset("fig2", "estimation error vs block length",
           dict(_CORR, rho_db=1.0), "T", (128, 256, 512, 1024), (128, 256, 384, 512, 768, 1024),
           series=({"P0": 1.0}, {"P0": 10.0}, {"P0": 100.0}),
           metrics=("nmse", "eve_leakage")),
    Preset("fig2_rho0", "estimation error vs block length, attack at 0 dB",
           dict(_CORR, rho_db=0.0), "T", (128, 256, 512, 1024), (128, 256, 384, 512, 768, 1024),
           series=({"P0": 1.0}, {"P0": 10.0}, {"P0": 100.0}),
           metrics=("nmse", "eve_leakage")),
    Preset("fig3", "secrecy rate vs SNR, simulation and large-array formula",
           dict(_CORR, rho_db=20.0), "snr_db", (-20, -10, 0, 10, 20, 26), _span(-20, 26, 2),
           series=({"N_t": 128}, {"N_t": 64}), schemes=("proposed", "theorem2")),
    Preset("fig4", "single-user secrecy rate vs array size",
           dict(L=0, K=1, N_t=64, T=1024, tau=64, P0=10.0, N0=1.0, N_e=2, fading="iid",
                rho_db=20.0), "N_t", (64, 128, 256), (64, 128, 192, 256, 384, 512, 644),
           series=({"snr_db": 10.0}, {"snr_db": 20.0}),
           schemes=("proposed", "theorem3", "corollary1"), T_per_antenna=16),
    Preset("fig5", "secrecy rate vs attack power, correlated fading",
           dict(_CORR, snr_db=20.0), "rho_db", (0, 10, 20), _span(0, 20, 2),
           series=_BLOCKS, schemes=("proposed", "contaminated_mf", "theorem2")),
    Preset("fig6", "secrecy rate vs attack power, i.i.d. fading",
           dict(_CORR, fading="iid", snr_db=20.0), "rho_db", (0, 10, 20), _span(0, 20, 2),
           series=_BLOCKS, schemes=("proposed", "contaminated_mf", "theorem3")),
    Preset("fig7", "secrecy rate vs angular interval",
           dict(_CORR, tau=8, rho_db=10.0, snr_db=15.0), "theta_b",
           (math.pi / 20, math.pi / 4, math.pi / 2, math.pi), _THETA_FULL,
           schemes=("proposed", "contaminated_mf", "theorem2")),
    Preset("fig7_tau64", "secrecy rate vs angular interval, 64-symbol pilots",
           dict(_CORR, tau=64, rho_db=10.0, snr_db=15.0), "theta_b",
           (math.pi / 20, math.pi / 4, math.pi / 2, math.pi), _THETA_FULL,
           schemes=("proposed", "contaminated_mf", "theorem2")),
]}


def list_presets() -> List[dict]:
    """Description of every preset, validated against :class:`SystemConfig`."""
    out = []
    for p in PRESETS.values():
        for s in p.series:
            for v in (p.grid[0], p.grid[-1]):
                _point_config(p, s, v, {}, 1.0)
        out.append(p.describe())
    return out


@dataclass
class ExperimentSpec:
    figure: str
    trials: int = 50
    seed: int = 0
    scale: float = 1.0
    full: bool = False
    geometries: int = 1
    schemes: Optional[Tuple[str, ...]] = None
    grid: Optional[Tuple[float, ...]] = None
    overrides: dict = field(default_factory=dict)
    out: Optional[str] = None
    workers: int = 1

    def validate(self) -> Preset:
        if self.figure not in PRESETS:
            raise ConfigError(f"unknown figure {self.figure!r}; choose from {sorted(PRESETS)}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.geometries < 1:
            raise ConfigError("geometries must be >= 1")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ConfigError("scale must be a positive number")
        if self.full and self.scale != 1.0:
            raise ConfigError("--full uses the complete parameter values; drop --scale")
        preset = PRESETS[self.figure]
        for s in self.schemes or ():
            if s not in MC_SCHEMES + FORMULA_SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}")
        if self.grid is not None and len(self.grid) == 0:
            raise ConfigError("sweep grid must not be empty")
        return preset

    def resolved_grid(self, preset: Preset) -> Tuple[float, ...]:
        if self.grid is not None:
            return tuple(self.grid)
        return preset.full_grid if self.full else preset.grid


def _scaled(value: float, scale: float) -> int:
    return max(1, int(round(value * scale)))


def _point_config(preset: Preset, series: dict, value, overrides: dict,
                  scale: float) -> SystemConfig:
    data = dict(preset.base)
    # an override in one form replaces the other form of the same quantity
    for linear, db in (("Pe", "rho_db"), ("P", "snr_db")):
        if linear in overrides:
            data.pop(db, None)
        if db in overrides:
            data.pop(linear, None)
    data.update(overrides)
    data.update(series)
    data[preset.sweep] = value
    for key in ("L", "K", "N_t", "N_e", "T", "tau"):
        if key in data:
            data[key] = int(round(data[key]))
    if preset.T_per_antenna:
        data["T"] = preset.T_per_antenna * data["N_t"]
    if scale != 1.0:
        data["N_t"] = _scaled(data["N_t"], scale)
        data["T"] = _scaled(data["T"], scale)
    try:
        return SystemConfig.from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{preset.figure} {preset.sweep}={value} {series}: {exc}") from exc


def series_label(series: dict) -> str:
    return ",".join(f"{k}={v}" for k, v in series.items()) or "-"


def _geometry_key(cfg: SystemConfig) -> tuple:
    return tuple(getattr(cfg, f) for f in GEOMETRY_FIELDS)


def _mean_se(x: np.ndarray) -> Tuple[float, float]:
    x = np.asarray(x, float)
    se = float(np.std(x, ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0
    return float(np.mean(x)), se


@dataclass
class ResultRow:
    series: str
    sweep_value: float
    scheme: str
    metric: str
    mean: float
    std_error: float
    trials: int


@dataclass
class ResultTable:
    figure: str
    sweep: str
    rows: List[ResultRow]
    metadata: dict

    COLUMNS = ("series", "sweep_value", "scheme", "metric", "mean", "std_error", "trials")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.rows:
            w.writerow([r.series, repr(float(r.sweep_value)), r.scheme, r.metric,
                        repr(float(r.mean)), repr(float(r.std_error)), r.trials])
        return buf.getvalue()

    def write(self, path) -> Tuple[Path, Path]:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        side = path.with_suffix(path.suffix + ".json")
        side.write_text(json.dumps(self.metadata, indent=2, sort_keys=True) + "\n")
        return path, side

    def select(self, scheme: str, metric: str, series: Optional[str] = None):
        """``(sweep_values, means, std_errors)`` of one curve."""
        rows = [r for r in self.rows if r.scheme == scheme and r.metric == metric
                and (series is None or r.series == series)]
        return (np.array([r.sweep_value for r in rows]), np.array([r.mean for r in rows]),
                np.array([r.std_error for r in rows]))


def version_string() -> str:
    """``git describe``-style version, falling back to the package version."""
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _simulate_group(args):
    cfg, geometry_seed, scheme, trials, trial_seed = args
    corr = build_correlation_set(cfg, seed=geometry_seed)
    return run_link_trials(cfg, corr, scheme, trials, trial_seed)


def _formula_value(scheme: str, cfg: SystemConfig, corrs) -> List[float]:
    if scheme == "theorem2":
        return [theorem2_terms(trace_moments(c), cfg).secrecy_rate(cfg.P, cfg.N0d)
                for c in corrs]
    if scheme == "theorem3":
        return [theorem3_terms(cfg, iid_betas(cfg)).R_sec]
    if scheme == "corollary1":
        return [corollary1_rate(cfg, 1.0)]
    raise ConfigError(f"unknown scheme {scheme!r}")


def run_experiment(spec: ExperimentSpec) -> ResultTable:
    """Run every (series, sweep point, scheme) of a preset.

    Monte Carlo trials are split into ``spec.geometries`` independent
    correlation geometries with ``spec.trials`` trials each. Geometry ``g``
    uses the seed ``(seed, g)`` for both the geometry and its trial streams,
    so all sweep points share the same random numbers.
    """
    preset = spec.validate()
    schemes = tuple(spec.schemes or preset.schemes)
    grid = spec.resolved_grid(preset)
    points = []
    for s in preset.series:
        for v in grid:
            points.append((s, v, _point_config(preset, s, v, spec.overrides, spec.scale)))

    # one link simulation per (scenario without downlink power, scheme, geometry)
    jobs: Dict[tuple, tuple] = {}
    for _, _, cfg in points:
        base = replace(cfg, P=1.0)
        for scheme in schemes:
            if scheme in MC_SCHEMES:
                for g in range(spec.geometries):
                    key = (base, scheme, g)
                    if key not in jobs:
                        jobs[key] = (base, (spec.seed, g), scheme, spec.trials, (spec.seed, g))
    keys = list(jobs)
    if spec.workers > 1 and len(keys) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_simulate_group, [jobs[k] for k in keys]))
    else:
        results = [_simulate_group(jobs[k]) for k in keys]
    samples: Dict[tuple, LinkSamples] = dict(zip(keys, results))

    corr_cache: Dict[tuple, object] = {}

    def corrs_for(cfg):
        out = []
        for g in range(spec.geometries):
            key = (_geometry_key(cfg), g)
            if key not in corr_cache:
                corr_cache[key] = build_correlation_set(cfg, seed=(spec.seed, g))
            out.append(corr_cache[key])
        return out

    rows: List[ResultRow] = []
    for s, v, cfg in points:
        label = series_label(s)
        base = replace(cfg, P=1.0)
        for scheme in schemes:
            if scheme in MC_SCHEMES:
                runs = [samples[(base, scheme, g)] for g in range(spec.geometries)]
                rows.extend(_mc_rows(label, v, scheme, preset.metrics, runs, cfg))
            else:
                vals = _formula_value(scheme, cfg, corrs_for(cfg) if scheme == "theorem2" else ())
                m, se = _mean_se(vals)
                rows.append(ResultRow(label, float(v), scheme, "R_sec", m, se, 0))

    first = points[0][2]
    meta = {
        "figure": preset.figure, "title": preset.title, "sweep": preset.sweep,
        "grid": [float(v) for v in grid], "series": [dict(s) for s in preset.series],
        "schemes": list(schemes), "trials": spec.trials, "geometries": spec.geometries,
        "seed": spec.seed, "scale": spec.scale, "full": spec.full,
        "overrides": dict(spec.overrides), "base_config": first.to_dict(),
        "version": version_string(),
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "resampled_trials": int(sum(r.resampled for r in samples.values())),
    }
    meta["config_hash"] = _config_hash(meta)
    table = ResultTable(preset.figure, preset.sweep, rows, meta)
    if spec.out:
        table.write(spec.out)
    return table


def _config_hash(meta: dict) -> str:
    keys = ("figure", "grid", "series", "schemes", "trials", "geometries", "seed", "scale",
            "full", "overrides", "base_config")
    doc = json.dumps({k: meta[k] for k in keys}, sort_keys=True, default=str)
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


def _mc_rows(label, value, scheme, metrics, runs: Sequence[LinkSamples], cfg) -> List[ResultRow]:
    n = sum(r.trials for r in runs)
    rows = []
    evals = [r.evaluate(cfg.P, cfg.N0d) for r in runs]
    for metric in metrics:
        if metric == "R_sec":
            # ergodic rate per geometry; spread over trials gives the error bar
            m = float(np.mean([e.R_sec for e in evals]))
            se = float(np.sqrt(np.sum([e.R_sec_stderr ** 2 for e in evals]))) / len(evals)
        elif metric == "C_eve_sum":
            m, se = _mean_se(np.concatenate([e.c_eve_trials.sum(axis=1) for e in evals]))
        elif metric == "R_user_sum":
            m, se = _mean_se(np.concatenate([np.log2(1 + e.gamma_trials).sum(axis=1)
                                             for e in evals]))
        elif metric in ("nmse", "eve_leakage"):
            m, se = _mean_se(np.concatenate([getattr(r, metric) for r in runs]))
        else:
            raise ConfigError(f"unknown metric {metric!r}")
        rows.append(ResultRow(label, float(value), scheme, metric, m, se, n))
    return rows
