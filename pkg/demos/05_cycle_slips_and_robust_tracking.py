"""Cycle slips, and how the speed-aware estimator rides out gaps.

The sum carrier phase only resolves range changes within a quarter of the
effective wavelength between samples.  A long gap in the schedule breaks
that for the one-shot estimator; exploiting the short-term speed coherence
re-centers the unwrap and recovers the lost half-cycles.  Ongoing slips at
low Rician factor show up as slow error accumulation in the relative range.
"""
import math
from dataclasses import replace

import numpy as np

from cprange import (ScenarioConfig, SumCpSeries, differential_range,
                     differential_range_robust, estimate_records,
                     relative_range_errors, simulate_epoch, wrap_pm_pi)
from cprange.util import SPEED_OF_LIGHT

fc, n_rotation = 5.2e9, 2
print("== a single 200 ms outage at 0.2 m/s ==")
t1 = np.concatenate([np.arange(0.0, 3.0, 0.025), np.arange(3.2, 6.0, 0.025)])
speed = 0.2
k_c = 4 * np.pi * n_rotation * fc / SPEED_OF_LIGHT
series = SumCpSeries(psi=wrap_pm_pi(-k_c * speed * t1), t1=t1, t4=t1 + 216e-6)
truth_d = speed * np.diff(t1)
gap = int(np.argmax(np.diff(t1)))
one_shot = differential_range(series, n_rotation, fc)
robust = differential_range_robust(series, n_rotation, fc, theta_mode="pair")
print(f"true range change across the gap: {truth_d[gap] * 1e3:7.2f} mm")
print(f"one-shot estimate:                {one_shot.dhat[gap] * 1e3:7.2f} mm "
      "(lost half-cycles)")
print(f"speed-aware estimate:             {robust.dhat[gap] * 1e3:7.2f} mm "
      f"(local speed fit: {robust.shat[gap]:.3f} m/s)")

print()
print("== error accumulation at Rician factor 7, noiseless ==")
cfg = replace(ScenarioConfig(), kappa=7.0, snr_db=math.inf)
records, truth = simulate_epoch(cfg, np.random.default_rng(2))
chain = estimate_records(records, cfg.ofdm, cfg.n_rotation, cfg.cfo_precision_hz,
                         methods=("sumcp",))
for gap_s in (1.0, 5.0, 10.0, 20.0):
    errors = relative_range_errors(chain.ranges["sumcp"], truth, gap_s)
    print(f"  relative range over {gap_s:4.0f} s gaps: "
          f"RMSE {np.sqrt(np.mean(errors ** 2)) * 1e3:6.2f} mm  (n={errors.size})")
print("(reflections cause occasional half-cycle slips; the local error does not")
print(" grow, the slip count does)")
