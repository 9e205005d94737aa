"""Epoch simulation: geometry, mobility, clocks, frame schedule, measurements.

An epoch is one simulated run of the two-station protocol: a stationary
access point (STA1) at the room center exchanges Request/Response frames
with a moving station (STA2) over a 5-path channel (line of sight plus one
image-method reflection per wall), while STA2's crystal drifts sinusoidally.
``simulate_epoch`` produces the per-exchange measurement records exactly as
an estimator would see them (quantized timestamps, noisy CSI, coarse CFO)
together with the ground truth needed for scoring.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .util import SPEED_OF_LIGHT
from .waveform import ImpairmentDraw, OfdmConfig, PathSet, apply_noise, synth_multipath_csi


@dataclass(frozen=True)
class ScenarioConfig:
    """All physical and protocol parameters for one simulated scenario.

    Defaults reproduce the reference desk-scale setup: 5x5 m room, 20 MHz
    channel at 5.2 GHz with 256 subcarriers, N=2 rotation ambiguity, 5 kHz
    coarse-CFO precision, 1 ns uplink asymmetry, 30 s of frame exchanges on
    the jittered nested-array schedule (24 per 0.5 s group: a 5-frame dense
    burst plus 19 frames at 25 ms spacing).
    """

    ofdm: OfdmConfig = field(default_factory=lambda: OfdmConfig(
        fc=5.2e9, n_subcarriers=256, ts=12.8e-6, tcy=3.2e-6))
    n_rotation: int = 2
    cfo_precision_hz: float = 5e3
    room_width: float = 5.0
    room_height: float = 5.0
    sta1_xy: tuple[float, float] = (2.5, 2.5)
    speed: float = 0.1
    duration: float = 30.0
    kappa: float = 1000.0
    delta_rho: float = 1e-9
    frame_duration: float = 100e-6
    sifs: float = 16e-6
    group_period: float = 0.5
    group_size: int = 24
    inner_count: int = 5
    inner_spacing: float = 300e-6
    outer_spacing: float = 25e-3
    jitter_bound: float = 100e-6
    osc_mean: float = 0.5e-5
    osc_amplitude: float = 0.1e-5
    osc_rate: float = 0.05 * math.pi
    snr_db: float = 30.0
    tau_range: tuple[float, float] = (-300e-9, -100e-9)
    timestamp_quantum: float = 1e-11

    def __post_init__(self):
        for name in ("duration", "frame_duration", "sifs", "group_period",
                     "inner_spacing", "outer_spacing", "room_width", "room_height"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.cfo_precision_hz <= 0.0:
            raise ValueError("cfo_precision_hz must be positive")
        if self.kappa < 0.0:
            raise ValueError("kappa must be >= 0 (or inf for a pure LoS channel)")
        if self.speed < 0.0:
            raise ValueError("speed must be >= 0")
        if not 0 < self.inner_count <= self.group_size:
            raise ValueError("inner_count must be in (0, group_size]")
        if self.jitter_bound < 0.0:
            raise ValueError("jitter_bound must be >= 0")
        if self.tau_range[0] > self.tau_range[1]:
            raise ValueError("tau_range must be (lo, hi) with lo <= hi")
        if self.timestamp_quantum <= 0.0:
            raise ValueError("timestamp_quantum must be positive")


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear motion through waypoints at one constant speed.

    ``times`` are the waypoint arrival times (starting at 0) and ``points``
    the waypoint coordinates; queries outside the covered span clamp to the
    endpoints.
    """

    times: np.ndarray
    points: np.ndarray

    def position(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        x = np.interp(t, self.times, self.points[:, 0])
        y = np.interp(t, self.times, self.points[:, 1])
        return np.stack([x, y], axis=-1)


@dataclass
class MeasurementRecord:
    """One frame exchange as observed by the two stations.

    t1/t4 are STA1-clock timestamps, t2/t3 STA2-clock timestamps.  CSI
    arrays are present for simulated or full captures; replayed logs that
    only carry extracted carrier-phase values populate psi2/psi4 instead.
    """

    p: int
    t1: float
    t2: float
    t3: float
    t4: float
    coarse_cfo: float
    csi_fwd: np.ndarray | None = None
    csi_bwd: np.ndarray | None = None
    psi2: float | None = None
    psi4: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.t1) and math.isfinite(self.t2)
                and math.isfinite(self.t3) and math.isfinite(self.t4)):
            raise ValueError(f"exchange {self.p}: timestamps must be finite")
        if self.t4 <= self.t1:
            raise ValueError(f"exchange {self.p}: t4 must exceed t1")
        if self.t3 <= self.t2:
            raise ValueError(f"exchange {self.p}: t3 must exceed t2")
        has_csi = self.csi_fwd is not None and self.csi_bwd is not None
        has_cp = self.psi2 is not None and self.psi4 is not None
        if not (has_csi or has_cp):
            raise ValueError(f"exchange {self.p}: needs CSI arrays or CP values")


@dataclass
class EpochTruth:
    """Ground truth per exchange: geometry, clock state and impairment draws."""

    t1: np.ndarray           # true (unquantized) Request transmit times [s]
    rho: np.ndarray          # LoS propagation delay [s]
    a: np.ndarray            # absolute range c*rho [m]
    d: np.ndarray            # differential range a[p]-a[p-1], length P-1
    eta: np.ndarray
    phi: np.ndarray
    tau2: np.ndarray
    tau4: np.ndarray
    n2: np.ndarray
    n4: np.ndarray
    path_delays: np.ndarray  # (P, n_paths) forward-channel delays [s]
    sta2_xy: np.ndarray      # (P, 2) positions [m]


def schedule_exchanges(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Transmit times of the Request frames on the jittered nested array.

    Within each group of ``group_size`` exchanges per ``group_period``, the
    first ``inner_count`` frames form a dense burst at ``inner_spacing`` with
    i.i.d. uniform jitter, and the rest sit on the sparse ``outer_spacing``
    grid.  Exchange p=1 is nominally at t=0.
    """
    if cfg.inner_spacing <= 2.0 * cfg.jitter_bound:
        raise ValueError("schedule error: jitter bound allows non-monotone burst times")
    t1 = []
    p0 = 0
    while True:
        g, r = divmod(p0, cfg.group_size)
        if r >= cfg.inner_count:
            t = cfg.group_period * g + cfg.outer_spacing * (r - (cfg.inner_count - 1))
        else:
            t = (cfg.group_period * g + cfg.inner_spacing * r
                 + rng.uniform(-cfg.jitter_bound, cfg.jitter_bound))
        nominal = cfg.group_period * g + (cfg.outer_spacing * (r - (cfg.inner_count - 1))
                                          if r >= cfg.inner_count else cfg.inner_spacing * r)
        if nominal >= cfg.duration:
            break
        t1.append(t)
        p0 += 1
    out = np.asarray(t1)
    if np.any(np.diff(out) <= 0.0):
        raise ValueError("schedule error: generated transmit times are not increasing")
    return out


def waypoint_trajectory(cfg: ScenarioConfig, rng: np.random.Generator) -> Trajectory:
    """Random-waypoint motion at constant speed, zero pause time."""
    if cfg.speed < 0.0:
        raise ValueError("speed must be >= 0")
    start = np.array([rng.uniform(0.0, cfg.room_width), rng.uniform(0.0, cfg.room_height)])
    if cfg.speed == 0.0:
        return Trajectory(times=np.array([0.0]), points=start[None, :])
    times = [0.0]
    points = [start]
    while times[-1] < cfg.duration:
        nxt = np.array([rng.uniform(0.0, cfg.room_width), rng.uniform(0.0, cfg.room_height)])
        leg = float(np.linalg.norm(nxt - points[-1]))
        if leg == 0.0:
            continue
        times.append(times[-1] + leg / cfg.speed)
        points.append(nxt)
    return Trajectory(times=np.asarray(times), points=np.asarray(points))


def oscillator_offset(t, cfg: ScenarioConfig, phase: float = 0.0):
    """Crystal offset of STA2 at time t: mean + amplitude*sin(rate*t + phase)."""
    return cfg.osc_mean + cfg.osc_amplitude * np.sin(cfg.osc_rate * np.asarray(t) + phase)


def realize_channel(sta2_xy, cfg: ScenarioConfig) -> PathSet:
    """LoS path plus one image-method reflection per wall.

    LoS power fraction is kappa/(kappa+1); the four reflections share the
    rest equally. kappa = inf collapses to a single-path set exactly.
    """
    sta1 = np.asarray(cfg.sta1_xy, dtype=float)
    sta2 = np.asarray(sta2_xy, dtype=float)
    if not (0.0 <= sta2[0] <= cfg.room_width and 0.0 <= sta2[1] <= cfg.room_height):
        raise ValueError(f"STA2 position {sta2} outside the room")
    d_los = float(np.linalg.norm(sta2 - sta1))
    if d_los == 0.0:
        raise ValueError("geometry error: coincident stations")
    if math.isinf(cfg.kappa):
        return PathSet.single(d_los / SPEED_OF_LIGHT)
    mirrors = np.array([
        [-sta2[0], sta2[1]],
        [2.0 * cfg.room_width - sta2[0], sta2[1]],
        [sta2[0], -sta2[1]],
        [sta2[0], 2.0 * cfg.room_height - sta2[1]],
    ])
    d_ref = np.linalg.norm(mirrors - sta1[None, :], axis=1)
    delays = np.concatenate([[d_los], d_ref]) / SPEED_OF_LIGHT
    gains = np.concatenate([
        [math.sqrt(cfg.kappa / (cfg.kappa + 1.0))],
        np.full(4, math.sqrt(1.0 / (4.0 * (cfg.kappa + 1.0)))),
    ]).astype(complex)
    return PathSet(delays=delays, gains=gains)


def _quantize(t, quantum: float):
    return np.round(np.asarray(t) / quantum) * quantum


def simulate_epoch(cfg: ScenarioConfig,
                   rng: np.random.Generator) -> tuple[list[MeasurementRecord], EpochTruth]:
    """Simulate one epoch of frame exchanges.

    Timestamp conventions: t1 marks the start of the Request transmission;
    t2, t3 and t4 mark the ends of Request reception, Response transmission
    and Response reception, so the round trip decomposes as
    t4 = t1 + 2*frame_duration + sifs + 2*rho + delta_rho.  STA2 timestamps
    run on its (1+eta)-scaled clock with an arbitrary per-epoch origin, and
    symbol-detection errors land on t2 and t4 before quantization.
    """
    fc = cfg.ofdm.fc
    t1 = schedule_exchanges(cfg, rng)
    n = t1.size
    traj = waypoint_trajectory(cfg, rng)
    osc_phase = rng.uniform(0.0, 2.0 * np.pi)
    eta = np.asarray(oscillator_offset(t1, cfg, osc_phase))

    phi = np.empty(n)
    phi[0] = rng.uniform(0.0, 2.0 * np.pi)
    for i in range(1, n):
        phi[i] = phi[i - 1] + np.pi * (eta[i] + eta[i - 1]) * fc * (t1[i] - t1[i - 1])

    tau2 = rng.uniform(cfg.tau_range[0], cfg.tau_range[1], n)
    tau4 = rng.uniform(cfg.tau_range[0], cfg.tau_range[1], n)
    n2 = rng.integers(0, cfg.n_rotation, n)
    n4 = rng.integers(0, cfg.n_rotation, n)
    coarse = eta * fc + rng.uniform(-cfg.cfo_precision_hz, cfg.cfo_precision_hz, n)
    sta2_clock_origin = rng.uniform(0.0, 1.0)

    pos = traj.position(t1)
    records: list[MeasurementRecord] = []
    rho = np.empty(n)
    n_paths = 1 if math.isinf(cfg.kappa) else 5
    path_delays = np.empty((n, n_paths))
    q = cfg.timestamp_quantum
    for i in range(n):
        paths = realize_channel(pos[i], cfg)
        rho[i] = paths.delays[0]
        path_delays[i] = paths.delays
        imp = ImpairmentDraw(eta=float(eta[i]), tau2=float(tau2[i]), tau4=float(tau4[i]),
                             n2=int(n2[i]), n4=int(n4[i]), phi=float(phi[i]),
                             delta_rho=cfg.delta_rho)
        t4_true = (t1[i] + 2.0 * cfg.frame_duration + cfg.sifs
                   + 2.0 * rho[i] + cfg.delta_rho)
        # STA1 references its receive processing (and the residual-CFO phase
        # of the Response CSI) to the perceived arrival, which carries the
        # detection error; the recorded t4 is the same perceived time.
        t4_perceived = t4_true + tau4[i]
        csi_fwd = synth_multipath_csi("forward", imp, paths, t1[i], t4_perceived,
                                      cfg.ofdm, cfg.n_rotation)
        csi_bwd = synth_multipath_csi("backward", imp, paths, t1[i], t4_perceived,
                                      cfg.ofdm, cfg.n_rotation)
        csi_fwd = apply_noise(csi_fwd, cfg.snr_db, rng)
        csi_bwd = apply_noise(csi_bwd, cfg.snr_db, rng)

        t2_true = t1[i] + cfg.frame_duration + rho[i]
        t3_true = t1[i] + 2.0 * cfg.frame_duration + cfg.sifs + rho[i]
        records.append(MeasurementRecord(
            p=i + 1,
            t1=float(_quantize(t1[i], q)),
            t2=float(_quantize((1.0 + eta[i]) * (t2_true + tau2[i]) + sta2_clock_origin, q)),
            t3=float(_quantize((1.0 + eta[i]) * t3_true + sta2_clock_origin, q)),
            t4=float(_quantize(t4_perceived, q)),
            coarse_cfo=float(coarse[i]),
            csi_fwd=csi_fwd,
            csi_bwd=csi_bwd,
        ))

    a = SPEED_OF_LIGHT * rho
    truth = EpochTruth(t1=t1, rho=rho, a=a, d=np.diff(a), eta=eta, phi=phi, tau2=tau2,
                       tau4=tau4, n2=n2, n4=n4, path_delays=path_delays, sta2_xy=pos)
    return records, truth
