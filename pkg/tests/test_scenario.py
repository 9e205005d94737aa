"""Schedule, mobility, oscillator, channel geometry and epoch simulation."""
import math
from dataclasses import replace

import numpy as np
import pytest

from cprange.scenario import (ScenarioConfig, oscillator_offset, realize_channel,
                              schedule_exchanges, simulate_epoch, waypoint_trajectory)
from cprange.util import SPEED_OF_LIGHT

BASE = ScenarioConfig()
NO_JITTER = replace(BASE, jitter_bound=0.0)


def test_schedule_first_exchange_at_zero():
    t1 = schedule_exchanges(NO_JITTER, np.random.default_rng(0))
    assert t1[0] == 0.0


def test_schedule_first_outer_exchange():
    t1 = schedule_exchanges(BASE, np.random.default_rng(0))
    assert t1[5] == pytest.approx(0.025, abs=1e-15)  # p=6, first sparse slot


def test_schedule_second_group():
    t1 = schedule_exchanges(BASE, np.random.default_rng(0))
    assert t1[29] == pytest.approx(0.525, abs=1e-15)  # p=30: group 1, first sparse slot


def test_schedule_count_and_monotonicity():
    for seed in range(3):
        t1 = schedule_exchanges(BASE, np.random.default_rng(seed))
        assert t1.size == 1440
        assert np.all(np.diff(t1) > 0.0)


def test_schedule_dense_samples_every_window():
    # every 0.5 s window must hold >= 3 exchanges spaced under 1 ms
    t1 = schedule_exchanges(BASE, np.random.default_rng(3))
    gaps_ok = np.concatenate([[False], np.diff(t1) < 1e-3])
    for w in range(60):
        mask = (t1 >= t1[0] + 0.5 * w) & (t1 < t1[0] + 0.5 * (w + 1))
        assert np.count_nonzero(gaps_ok & mask) >= 3


def test_schedule_rejects_non_monotone_jitter():
    cfg = replace(BASE, inner_spacing=100e-6, jitter_bound=100e-6)
    with pytest.raises(ValueError):
        schedule_exchanges(cfg, np.random.default_rng(0))


def test_waypoints_stay_in_room():
    traj = waypoint_trajectory(BASE, np.random.default_rng(5))
    t = np.linspace(0.0, BASE.duration, 2000)
    pos = traj.position(t)
    assert np.all(pos[:, 0] >= 0.0) and np.all(pos[:, 0] <= 5.0)
    assert np.all(pos[:, 1] >= 0.0) and np.all(pos[:, 1] <= 5.0)


def test_waypoints_zero_speed_is_stationary():
    traj = waypoint_trajectory(replace(BASE, speed=0.0), np.random.default_rng(1))
    assert np.array_equal(traj.position(0.0), traj.position(17.3))


def test_waypoint_speed_and_path_length():
    traj = waypoint_trajectory(BASE, np.random.default_rng(9))
    legs = np.linalg.norm(np.diff(traj.points, axis=0), axis=1)
    speeds = legs / np.diff(traj.times)
    assert np.max(np.abs(speeds - BASE.speed)) < 1e-12
    # constant speed => path length over 30 s is exactly S*30 = 3.0 m
    t = np.arange(0.0, BASE.duration + 1e-9, 1e-3)
    sampled = np.sum(np.linalg.norm(np.diff(traj.position(t), axis=0), axis=1))
    assert sampled == pytest.approx(3.0, abs=1e-3)


def test_oscillator_values_and_bounds():
    assert oscillator_offset(0.0, BASE, 0.0) == pytest.approx(0.5e-5, abs=1e-20)
    assert oscillator_offset(10.0, BASE, 0.0) == pytest.approx(0.6e-5, rel=1e-12)
    t = np.linspace(0.0, 120.0, 10001)
    eta = oscillator_offset(t, BASE, 1.234)
    assert np.all(np.abs(eta) <= 2e-5)
    assert np.all((eta >= 0.4e-5) & (eta <= 0.6e-5))


def test_channel_geometry():
    paths = realize_channel((2.5, 1.5), BASE)
    assert paths.delays[0] == pytest.approx(1.0 / SPEED_OF_LIGHT, rel=1e-12)
    # wall y=0: mirror image of STA2 at (2.5,-1.5), 4 m path
    assert paths.delays[3] == pytest.approx(4.0 / SPEED_OF_LIGHT, rel=1e-12)
    los_power = abs(paths.gains[0]) ** 2
    nlos_power = np.sum(np.abs(paths.gains[1:]) ** 2)
    assert los_power / nlos_power == pytest.approx(BASE.kappa, rel=1e-9)


def test_channel_infinite_kappa_is_single_path():
    paths = realize_channel((1.0, 1.0), replace(BASE, kappa=math.inf))
    assert paths.delays.size == 1
    assert paths.gains[0] == 1.0


def test_channel_rejects_coincident_stations():
    with pytest.raises(ValueError):
        realize_channel(BASE.sta1_xy, BASE)


def test_epoch_count_default_scenario():
    records, truth = simulate_epoch(replace(BASE, kappa=math.inf), np.random.default_rng(0))
    assert len(records) == 1440
    assert truth.rho.size == 1440


def test_epoch_zero_motion_zero_noise_has_zero_differential():
    cfg = replace(BASE, speed=0.0, kappa=math.inf, snr_db=math.inf, duration=3.0)
    _, truth = simulate_epoch(cfg, np.random.default_rng(4))
    assert np.all(truth.d == 0.0)


def test_epoch_deterministic_given_seed():
    cfg = replace(BASE, duration=2.0)
    rec_a, truth_a = simulate_epoch(cfg, np.random.default_rng(11))
    rec_b, truth_b = simulate_epoch(cfg, np.random.default_rng(11))
    assert np.array_equal(truth_a.a, truth_b.a)
    assert np.array_equal(truth_a.phi, truth_b.phi)
    for a, b in zip(rec_a, rec_b):
        assert (a.t1, a.t2, a.t3, a.t4, a.coarse_cfo) == (b.t1, b.t2, b.t3, b.t4, b.coarse_cfo)
        assert np.array_equal(a.csi_fwd, b.csi_fwd)
        assert np.array_equal(a.csi_bwd, b.csi_bwd)


def test_epoch_timestamp_invariants():
    cfg = replace(BASE, duration=5.0)
    records, _ = simulate_epoch(cfg, np.random.default_rng(2))
    for r in records:
        assert r.t1 < r.t4
        assert r.t2 < r.t3
        assert r.t4 - r.t1 < 1e-3


def test_epoch_coarse_cfo_bound():
    cfg = replace(BASE, duration=5.0)
    records, truth = simulate_epoch(cfg, np.random.default_rng(8))
    coarse = np.array([r.coarse_cfo for r in records])
    assert np.all(np.abs(coarse - truth.eta * BASE.ofdm.fc) <= BASE.cfo_precision_hz)


def test_epoch_phi_recursion_consistency():
    cfg = replace(BASE, duration=5.0)
    _, truth = simulate_epoch(cfg, np.random.default_rng(6))
    phi = np.empty_like(truth.phi)
    phi[0] = truth.phi[0]
    for i in range(1, phi.size):
        phi[i] = phi[i - 1] + (np.pi * (truth.eta[i] + truth.eta[i - 1])
                               * BASE.ofdm.fc * (truth.t1[i] - truth.t1[i - 1]))
    assert np.max(np.abs(phi - truth.phi)) < 1e-9


def test_epoch_inner_burst_motion_within_ambiguity():
    # adjacent dense-burst exchanges move the range far less than the
    # c/(4*N*fc) unwrap limit at any swept speed
    cfg = replace(BASE, speed=0.35, duration=5.0, kappa=math.inf)
    records, truth = simulate_epoch(cfg, np.random.default_rng(3))
    t1 = np.array([r.t1 for r in records])
    inner = np.diff(t1) < 1e-3
    limit = SPEED_OF_LIGHT / (4 * BASE.n_rotation * BASE.ofdm.fc)
    assert np.max(np.abs(truth.d[inner])) < limit
