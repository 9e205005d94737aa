"""Carrier-phase differential ranging over Wi-Fi frame exchanges.

Simulates impaired per-exchange CSI for a two-station ranging protocol,
runs the carrier-phase estimation chain (symbol-delay estimation, phase
extraction, CFO refinement, sum carrier phase, differential and relative
range) and compares it against the round-trip-time baseline.
"""
from .estimator import (CfoTrack, ChainResult, CpPair, RangeSeries, SumCpSeries,
                        differential_range, differential_range_robust,
                        estimate_records, estimate_symbol_delay, extract_cp,
                        ftm_range, max_unambiguous_speed, refine_cfo,
                        relative_range, sum_cp, sum_cp_series)
from .evaluation import (Histogram, Report, ReportRow, SweepSpec,
                         relative_error_pdf, relative_range_errors,
                         rmse_differential, run_sweep)
from .scenario import (EpochTruth, MeasurementRecord, ScenarioConfig, Trajectory,
                       oscillator_offset, realize_channel, schedule_exchanges,
                       simulate_epoch, waypoint_trajectory)
from .util import SPEED_OF_LIGHT, EstimationFailure, LogFormatError, wrap_pm_pi
from .waveform import (ImpairmentDraw, OfdmConfig, PathSet, apply_noise,
                       demodulate_numeric, synth_multipath_csi,
                       synth_request_csi, synth_response_csi)

__version__ = "0.1.0"
