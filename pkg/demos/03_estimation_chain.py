"""The full estimation chain, stage by stage.

Takes one simulated epoch and walks it through symbol-delay estimation,
carrier-phase extraction, CFO refinement and the sum-carrier-phase
differential range, then scores everything against ground truth and
against the round-trip-time baseline.
"""
import numpy as np

from cprange import ScenarioConfig, estimate_records, simulate_epoch

cfg = ScenarioConfig()
print(f"scenario: fc={cfg.ofdm.fc / 1e9:.1f} GHz, K={cfg.ofdm.n_subcarriers}, "
      f"kappa={cfg.kappa:.0f}, SNR={cfg.snr_db:.0f} dB, speed={cfg.speed} m/s")
records, truth = simulate_epoch(cfg, np.random.default_rng(1))
print(f"simulated {len(records)} exchanges; estimating ...")

chain = estimate_records(records, cfg.ofdm, cfg.n_rotation, cfg.cfo_precision_hz,
                         methods=("sumcp", "sumcp-robust", "ftm"))

tau_err = np.concatenate([chain.tau2_hat - truth.tau2, chain.tau4_hat - truth.tau4])
print(f"symbol-delay estimation: RMSE {np.sqrt(np.mean(tau_err ** 2)) * 1e9:.3f} ns")

cfo_err = chain.cfo.f_hat - truth.eta * cfg.ofdm.fc
print(f"CFO refinement: median |error| {np.median(np.abs(cfo_err)):.2f} Hz "
      f"({np.count_nonzero(chain.cfo.in_window)} direct estimates, rest interpolated)")

for method in ("sumcp", "sumcp-robust", "ftm"):
    err = chain.ranges[method].dhat - truth.d
    print(f"differential range [{method:13s}]: RMSE "
          f"{np.sqrt(np.mean(err ** 2)) * 1e3:8.4f} mm, "
          f"max |err| {np.max(np.abs(err)) * 1e3:8.3f} mm")

err_s = chain.ranges["sumcp"].dhat - truth.d
err_f = chain.ranges["ftm"].dhat - truth.d
print(f"carrier phase vs round-trip time: "
      f"{np.sqrt(np.mean(err_f ** 2) / np.mean(err_s ** 2)):.0f}x lower RMSE")

cum = chain.ranges["sumcp"].cumulative()
rel_err = (cum - cum[0]) - (truth.a - truth.a[0])
print(f"relative range vs exchange 1: end-of-epoch error {rel_err[-1] * 1e3:.3f} mm "
      f"over a {truth.a[-1] - truth.a[0]:+.3f} m net range change")
