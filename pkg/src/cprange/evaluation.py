"""Multi-epoch experiments: RMSE metrics, error PDFs and parameter sweeps.

Sweeps vary one scenario axis (SNR, speed, Rician factor, or the time gap
of relative-range pairs), simulate a batch of seeded epochs per point, run
the requested estimators and pool the per-exchange errors into one RMSE per
(value, method).  Everything is deterministic given the sweep's base seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .estimator import RangeSeries, estimate_records
from .scenario import EpochTruth, ScenarioConfig, simulate_epoch
from .util import SPEED_OF_LIGHT

SWEEP_AXES = ("snr", "speed", "kfactor", "timegap")


@dataclass(frozen=True)
class SweepSpec:
    """One sweep: an axis, its values, and the common scenario/methods."""

    axis: str
    values: tuple
    epochs: int = 10
    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    methods: tuple[str, ...] = ("sumcp",)
    seed: int = 0
    theta_mode: str = "pair"

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"axis must be one of {SWEEP_AXES}, got {self.axis!r}")
        if len(self.values) == 0:
            raise ValueError("values must be non-empty")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class Histogram:
    """Normalized histogram: probs sums to 1 over ``edges`` bins."""

    edges: np.ndarray
    probs: np.ndarray
    count: int


@dataclass
class ReportRow:
    axis: str
    value: float
    method: str
    rmse_mm: float
    n: int
    seeds: list[int]


@dataclass
class Report:
    rows: list[ReportRow]
    histograms: dict[tuple[float, str], Histogram] = field(default_factory=dict)

    def rmse(self, value, method: str) -> float:
        for row in self.rows:
            if row.method == method and math.isclose(row.value, value):
                return row.rmse_mm
        raise KeyError(f"no row for value={value}, method={method}")


def rmse_differential(est: RangeSeries, truth: EpochTruth) -> float:
    """Pooled RMSE of the differential-range estimates, in millimeters."""
    if est.dhat.size != truth.d.size:
        raise ValueError(f"length mismatch: {est.dhat.size} estimates vs "
                         f"{truth.d.size} truth values")
    return float(np.sqrt(np.mean((est.dhat - truth.d) ** 2)) * 1e3)


def _gap_pairs(t1: np.ndarray, gap: float, tol: float):
    """Index pairs (q, p) with t1[p] - t1[q] within tol of gap."""
    lo = np.searchsorted(t1, t1 + gap - tol, side="left")
    hi = np.searchsorted(t1, t1 + gap + tol, side="right")
    qs = np.repeat(np.arange(t1.size), hi - lo)
    ps = np.concatenate([np.arange(a, b) for a, b in zip(lo, hi)]) if qs.size else np.array([], int)
    return qs, ps


def relative_range_errors(est: RangeSeries, truth: EpochTruth, gap: float,
                          tol: float | None = None) -> np.ndarray:
    """Relative-range errors over all exchange pairs separated by ~gap.

    Pairing tolerance defaults to half the median adjacent spacing.
    """
    t1 = est.t1
    if tol is None:
        tol = 0.5 * float(np.median(np.diff(t1)))
    cum = est.cumulative()
    resid = cum - (truth.a - truth.a[0])
    qs, ps = _gap_pairs(t1, gap, tol)
    return resid[ps] - resid[qs]


def relative_error_pdf(est: RangeSeries, truth: EpochTruth, gap: float,
                       n_rotation: int, fc: float, bins: int = 41,
                       tol: float | None = None) -> Histogram | None:
    """PDF of the relative-range error wrapped modulo c/(2*N*fc).

    Returns None when no exchange pair matches the requested gap.
    """
    errors = relative_range_errors(est, truth, gap, tol)
    if errors.size == 0:
        return None
    return wrapped_error_histogram(errors, n_rotation, fc, bins)


def wrapped_error_histogram(errors: np.ndarray, n_rotation: int, fc: float,
                            bins: int = 41) -> Histogram:
    period = SPEED_OF_LIGHT / (2.0 * n_rotation * fc)
    wrapped = np.mod(errors + period / 2.0, period) - period / 2.0
    counts, edges = np.histogram(wrapped, bins=bins, range=(-period / 2.0, period / 2.0))
    return Histogram(edges=edges, probs=counts / counts.sum(), count=int(errors.size))


def _scenario_for(spec: SweepSpec, value) -> ScenarioConfig:
    if spec.axis == "snr":
        return replace(spec.base, snr_db=float(value))
    if spec.axis == "speed":
        return replace(spec.base, speed=float(value))
    if spec.axis == "kfactor":
        return replace(spec.base, kappa=float(value))
    return spec.base  # timegap reuses the base scenario


def _epoch_seed(spec: SweepSpec, value_idx: int, epoch: int) -> int:
    if spec.axis == "timegap":  # all gap values score the same simulated epochs
        return spec.seed + epoch
    return spec.seed + 10_000 * value_idx + epoch


def run_sweep(spec: SweepSpec) -> Report:
    """Simulate, estimate and aggregate one sweep into a Report.

    For the scenario axes the row metric is the pooled differential-range
    RMSE; for the timegap axis it is the pooled relative-range RMSE at each
    requested gap, and the wrapped-error histograms are kept alongside.
    """
    rows: list[ReportRow] = []
    histograms: dict[tuple[float, str], Histogram] = {}
    if spec.axis == "timegap":
        seeds = [_epoch_seed(spec, 0, e) for e in range(spec.epochs)]
        runs = []
        for seed in seeds:
            records, truth = simulate_epoch(spec.base, np.random.default_rng(seed))
            chain = estimate_records(records, spec.base.ofdm, spec.base.n_rotation,
                                     spec.base.cfo_precision_hz, spec.methods,
                                     theta_mode=spec.theta_mode)
            runs.append((chain, truth))
        for value in spec.values:
            for method in spec.methods:
                pooled = [relative_range_errors(chain.ranges[method], truth, float(value))
                          for chain, truth in runs]
                errors = np.concatenate(pooled)
                if errors.size == 0:
                    raise ValueError(f"no exchange pairs at gap {value}s")
                rows.append(ReportRow(spec.axis, float(value), method,
                                      float(np.sqrt(np.mean(errors ** 2)) * 1e3),
                                      int(errors.size), list(seeds)))
                histograms[(float(value), method)] = wrapped_error_histogram(
                    errors, spec.base.n_rotation, spec.base.ofdm.fc)
        return Report(rows=rows, histograms=histograms)

    for vi, value in enumerate(spec.values):
        scenario = _scenario_for(spec, value)
        seeds = [_epoch_seed(spec, vi, e) for e in range(spec.epochs)]
        errors = {m: [] for m in spec.methods}
        for seed in seeds:
            records, truth = simulate_epoch(scenario, np.random.default_rng(seed))
            chain = estimate_records(records, scenario.ofdm, scenario.n_rotation,
                                     scenario.cfo_precision_hz, spec.methods,
                                     theta_mode=spec.theta_mode)
            for m in spec.methods:
                errors[m].append(chain.ranges[m].dhat - truth.d)
        for m in spec.methods:
            pooled = np.concatenate(errors[m])
            rows.append(ReportRow(spec.axis, float(value), m,
                                  float(np.sqrt(np.mean(pooled ** 2)) * 1e3),
                                  int(pooled.size), seeds))
    return Report(rows=rows)
