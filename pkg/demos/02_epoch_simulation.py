"""Simulating a measurement campaign.

One epoch = 30 s of frame exchanges between a fixed access point and a
station wandering through a 5x5 m room on a random-waypoint path, with a
drifting crystal, per-frame timing errors and phase rotations, wall
reflections and receiver noise.  The output is a list of measurement
records (what a real capture would give you) plus the ground truth.
"""
from dataclasses import replace

import numpy as np

from cprange import ScenarioConfig, simulate_epoch
from cprange.io_cli import write_log, write_truth

cfg = replace(ScenarioConfig(), duration=10.0)  # trimmed for a quick demo
records, truth = simulate_epoch(cfg, np.random.default_rng(0))

t1 = np.array([r.t1 for r in records])
gaps = np.diff(t1)
print(f"exchanges: {len(records)} over {cfg.duration:.0f} s")
print(f"transmit spacing: min {gaps.min() * 1e3:.3f} ms, "
      f"median {np.median(gaps) * 1e3:.1f} ms, max {gaps.max() * 1e3:.1f} ms")
print(f"dense burst per 0.5 s group: {np.count_nonzero(gaps[:23] < 1e-3) + 1} frames")
rtt = np.array([r.t4 - r.t1 for r in records])
print(f"round trips: all within [{rtt.min() * 1e6:.1f}, {rtt.max() * 1e6:.1f}] us")

print()
print(f"true range: start {truth.a[0]:.3f} m, end {truth.a[-1]:.3f} m")
print(f"largest per-exchange range change: {np.max(np.abs(truth.d)) * 1e3:.3f} mm")
print(f"crystal offset span: [{truth.eta.min():.3e}, {truth.eta.max():.3e}]")
coarse_err = np.array([r.coarse_cfo for r in records]) - truth.eta * cfg.ofdm.fc
print(f"coarse CFO error span: [{coarse_err.min():.0f}, {coarse_err.max():.0f}] Hz "
      f"(advertised precision +/-{cfg.cfo_precision_hz:.0f} Hz)")

write_log(records, "/tmp/demo_epoch.jsonl")
write_truth(truth, "/tmp/demo_truth.jsonl")
print()
print("wrote /tmp/demo_epoch.jsonl and /tmp/demo_truth.jsonl")
