"""Config loading, JSONL measurement logs, CSV reports and the CLI.

Log format (one JSON object per line)::

    {"p": 1, "t1_s": ..., "t2_s": ..., "t3_s": ..., "t4_s": ...,
     "coarse_cfo_hz": ...,
     "csi_fwd": [[re, im] * K], "csi_bwd": [[re, im] * K]}

Replayed logs that only carry extracted carrier-phase values use
``"psi2_rad"``/``"psi4_rad"`` in place of the two CSI arrays; a log must be
all-CSI or all-CP.  Config files are flat JSON with units encoded in the
key names (see CONFIG_KEYS); unknown keys are rejected.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import evaluation
from .estimator import KNOWN_METHODS, ChainResult, estimate_records
from .scenario import MeasurementRecord, ScenarioConfig, simulate_epoch
from .util import LogFormatError
from .waveform import (ImpairmentDraw, OfdmConfig, demodulate_numeric,
                       synth_request_csi, synth_response_csi)

# config key -> (ScenarioConfig attribute path, type)
CONFIG_KEYS = {
    "fc_hz": ("ofdm.fc", float),
    "subcarrier_count": ("ofdm.n_subcarriers", int),
    "symbol_duration_s": ("ofdm.ts", float),
    "cyclic_prefix_s": ("ofdm.tcy", float),
    "rotation_modulus": ("n_rotation", int),
    "cfo_precision_hz": ("cfo_precision_hz", float),
    "room_width_m": ("room_width", float),
    "room_height_m": ("room_height", float),
    "sta1_x_m": ("sta1_xy.0", float),
    "sta1_y_m": ("sta1_xy.1", float),
    "speed_mps": ("speed", float),
    "duration_s": ("duration", float),
    "kappa": ("kappa", float),
    "delta_rho_s": ("delta_rho", float),
    "frame_duration_s": ("frame_duration", float),
    "sifs_s": ("sifs", float),
    "group_period_s": ("group_period", float),
    "group_size": ("group_size", int),
    "inner_count": ("inner_count", int),
    "inner_spacing_s": ("inner_spacing", float),
    "outer_spacing_s": ("outer_spacing", float),
    "jitter_bound_s": ("jitter_bound", float),
    "osc_mean": ("osc_mean", float),
    "osc_amplitude": ("osc_amplitude", float),
    "osc_rate_rad_per_s": ("osc_rate", float),
    "snr_db": ("snr_db", float),
    "tau_min_s": ("tau_range.0", float),
    "tau_max_s": ("tau_range.1", float),
    "timestamp_quantum_s": ("timestamp_quantum", float),
}

RUN_KEYS = ("seed", "methods", "log_path", "truth_path", "report_path")


@dataclass
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    seed: int = 0
    methods: tuple[str, ...] = ("sumcp",)
    log_path: str | None = None
    truth_path: str | None = None
    report_path: str | None = None


def _coerce(value, typ, key):
    if typ is float:
        if isinstance(value, str) and value.lower() in ("inf", "+inf", "infinity"):
            return math.inf
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif typ is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    raise LogFormatError(f"config key {key!r}: expected {typ.__name__}, got {value!r}")


def scenario_from_dict(data: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from flat unit-suffixed keys; rejects unknowns."""
    base = ScenarioConfig()
    ofdm = {"fc": base.ofdm.fc, "n_subcarriers": base.ofdm.n_subcarriers,
            "ts": base.ofdm.ts, "tcy": base.ofdm.tcy}
    flat = {}
    sta1 = list(base.sta1_xy)
    tau = list(base.tau_range)
    for key, value in data.items():
        if key not in CONFIG_KEYS:
            raise LogFormatError(f"unknown config key {key!r}")
        path, typ = CONFIG_KEYS[key]
        value = _coerce(value, typ, key)
        if path.startswith("ofdm."):
            ofdm[path.split(".", 1)[1]] = value
        elif path.startswith("sta1_xy."):
            sta1[int(path[-1])] = value
        elif path.startswith("tau_range."):
            tau[int(path[-1])] = value
        else:
            flat[path] = value
    return ScenarioConfig(ofdm=OfdmConfig(**ofdm), sta1_xy=tuple(sta1),
                          tau_range=tuple(tau), **flat)


def load_run_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise LogFormatError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise LogFormatError(f"{path}: config must be a JSON object")
    scenario_keys = {k: v for k, v in data.items() if k not in RUN_KEYS}
    scenario = scenario_from_dict(scenario_keys)
    methods = tuple(data.get("methods", ("sumcp",)))
    for m in methods:
        if m not in KNOWN_METHODS:
            raise LogFormatError(f"unknown method {m!r} in {path}")
    return RunConfig(scenario=scenario, seed=int(data.get("seed", 0)), methods=methods,
                     log_path=data.get("log_path"), truth_path=data.get("truth_path"),
                     report_path=data.get("report_path"))


def _csi_to_json(csi: np.ndarray) -> list:
    return [[float(v.real), float(v.imag)] for v in csi]


def _csi_from_json(raw, key: str, lineno: int, k_count: int | None) -> np.ndarray:
    if (not isinstance(raw, list)
            or not all(isinstance(x, list) and len(x) == 2 for x in raw)):
        raise LogFormatError(f"line {lineno}: {key} must be a list of [re, im] pairs")
    if k_count is not None and len(raw) != k_count:
        raise LogFormatError(f"line {lineno}: {key} has length {len(raw)}, expected {k_count}")
    arr = np.array([complex(re, im) for re, im in raw])
    if not np.all(np.isfinite(arr)):
        raise LogFormatError(f"line {lineno}: {key} contains non-finite values")
    return arr


def read_log(path: str, n_subcarriers: int | None = None) -> list[MeasurementRecord]:
    """Parse a JSONL measurement log; validates per-line schema and
    consistency (CSI length, no mixing of CSI and CP-only lines)."""
    records: list[MeasurementRecord] = []
    mode = None  # "csi" | "cp"
    k_count = n_subcarriers
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            try:
                fields = {name: float(obj[name]) for name in
                          ("t1_s", "t2_s", "t3_s", "t4_s", "coarse_cfo_hz")}
                p = int(obj["p"])
            except (KeyError, TypeError, ValueError) as exc:
                raise LogFormatError(f"line {lineno}: bad or missing field ({exc})") from None
            has_csi = "csi_fwd" in obj or "csi_bwd" in obj
            has_cp = "psi2_rad" in obj or "psi4_rad" in obj
            if has_csi == has_cp:
                raise LogFormatError(
                    f"line {lineno}: need csi_fwd/csi_bwd or psi2_rad/psi4_rad, not both/neither")
            this_mode = "csi" if has_csi else "cp"
            if mode is None:
                mode = this_mode
            elif mode != this_mode:
                raise LogFormatError(f"line {lineno}: mixes CSI and CP-only records")
            kwargs = {}
            if has_csi:
                if "csi_fwd" not in obj or "csi_bwd" not in obj:
                    raise LogFormatError(f"line {lineno}: needs both csi_fwd and csi_bwd")
                fwd = _csi_from_json(obj["csi_fwd"], "csi_fwd", lineno, k_count)
                k_count = fwd.size
                kwargs["csi_fwd"] = fwd
                kwargs["csi_bwd"] = _csi_from_json(obj["csi_bwd"], "csi_bwd", lineno, k_count)
            else:
                if "psi2_rad" not in obj or "psi4_rad" not in obj:
                    raise LogFormatError(f"line {lineno}: needs both psi2_rad and psi4_rad")
                kwargs["psi2"] = float(obj["psi2_rad"])
                kwargs["psi4"] = float(obj["psi4_rad"])
            try:
                records.append(MeasurementRecord(
                    p=p, t1=fields["t1_s"], t2=fields["t2_s"], t3=fields["t3_s"],
                    t4=fields["t4_s"], coarse_cfo=fields["coarse_cfo_hz"], **kwargs))
            except ValueError as exc:
                raise LogFormatError(f"line {lineno}: {exc}") from None
    return records


def write_log(records: list[MeasurementRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            obj = {"p": r.p, "t1_s": r.t1, "t2_s": r.t2, "t3_s": r.t3, "t4_s": r.t4,
                   "coarse_cfo_hz": r.coarse_cfo}
            if r.csi_fwd is not None:
                obj["csi_fwd"] = _csi_to_json(r.csi_fwd)
                obj["csi_bwd"] = _csi_to_json(r.csi_bwd)
            else:
                obj["psi2_rad"] = r.psi2
                obj["psi4_rad"] = r.psi4
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def write_truth(truth, path: str) -> None:
    """Ground-truth JSONL companion to a simulated log."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(truth.rho.size):
            obj = {"p": i + 1, "t1_s": float(truth.t1[i]),
                   "rho_s": float(truth.rho[i]), "a_m": float(truth.a[i]),
                   "d_m": float(truth.d[i - 1]) if i > 0 else None,
                   "eta": float(truth.eta[i]), "phi_rad": float(truth.phi[i]),
                   "tau2_s": float(truth.tau2[i]), "tau4_s": float(truth.tau4[i]),
                   "n2": int(truth.n2[i]), "n4": int(truth.n4[i]),
                   "path_delays_s": [float(x) for x in truth.path_delays[i]],
                   "sta2_x_m": float(truth.sta2_xy[i, 0]),
                   "sta2_y_m": float(truth.sta2_xy[i, 1])}
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def write_report(report: evaluation.Report, path: str) -> None:
    """CSV report: one row per (axis value, method)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("axis,value,method,rmse_mm,n\n")
        for row in report.rows:
            fh.write(f"{row.axis},{_fmt(row.value)},{row.method},"
                     f"{_fmt(row.rmse_mm)},{row.n}\n")


def write_estimates(chain: ChainResult, method: str, path: str) -> None:
    """Per-exchange estimate CSV for one method.

    sumcp methods: p,t1_s,psi_rad,f_cfo_hz,dhat_m,rhat_m (dhat/rhat empty
    for p=1; rhat is relative to exchange 1).  ftm: p,t1_s,ahat_m,dhat_m.
    """
    series = chain.ranges[method]
    with open(path, "w", encoding="utf-8") as fh:
        if method == "ftm":
            fh.write("p,t1_s,ahat_m,dhat_m\n")
            for i in range(series.n_exchanges):
                d = _fmt(series.dhat[i - 1]) if i > 0 else ""
                fh.write(f"{i + 1},{_fmt(series.t1[i])},{_fmt(chain.ftm_abs[i])},{d}\n")
        else:
            fh.write("p,t1_s,psi_rad,f_cfo_hz,dhat_m,rhat_m\n")
            cum = series.cumulative()
            for i in range(series.n_exchanges):
                d = _fmt(series.dhat[i - 1]) if i > 0 else ""
                r = _fmt(cum[i]) if i > 0 else _fmt(0.0)
                fh.write(f"{i + 1},{_fmt(series.t1[i])},{_fmt(chain.sumcp.psi[i])},"
                         f"{_fmt(chain.cfo.f_hat[i])},{d},{r}\n")


# --- closed-form vs numerical-demodulation check -------------------------

ORACLE_GRID = {
    "eta": (0.0, 1e-5, 2e-5),
    "tau": (-300e-9, -100e-9),
    "m": (0, 4),
}
ORACLE_TOLERANCE_RAD = 1e-3


def oracle_check(ofdm: OfdmConfig | None = None, n_rotation: int = 2,
                 quadrature_steps: int | None = None, out=None) -> float:
    """Compare closed-form CSI with the numerical demodulation integral over
    the crystal-offset/timing-error/symbol-index grid; returns the largest
    per-subcarrier phase deviation (radians)."""
    out = out or sys.stdout
    cfg = ofdm or OfdmConfig(fc=5.2e9, n_subcarriers=256, ts=12.8e-6, tcy=3.2e-6)
    rho, t1 = 3.3357e-9, 0.0
    worst = 0.0
    for eta in ORACLE_GRID["eta"]:
        for tau in ORACLE_GRID["tau"]:
            for m in ORACLE_GRID["m"]:
                imp = ImpairmentDraw(eta=eta, tau2=tau, tau4=tau, n2=1, n4=0,
                                     phi=0.7, delta_rho=1e-9)
                t4 = t1 + 116e-6 + 2 * rho + imp.delta_rho
                closed = {
                    "forward": synth_request_csi(imp, rho, cfg, n_rotation),
                    "backward": synth_response_csi(imp, rho, t1, t4, cfg, n_rotation),
                }
                for direction, ref in closed.items():
                    num = demodulate_numeric(direction, imp, rho, t1, t4, m, cfg,
                                             n_rotation, quadrature_steps)
                    dev = float(np.max(np.abs(np.angle(num * np.conj(ref)))))
                    worst = max(worst, dev)
                    print(f"eta={eta:<7g} tau={tau * 1e9:>6.0f} ns  m={m}  "
                          f"{direction:8s}: max |phase dev| = {dev:.3e} rad", file=out)
    print(f"overall max phase deviation: {worst:.6e} rad "
          f"({'<' if worst < ORACLE_TOLERANCE_RAD else '>='} {ORACLE_TOLERANCE_RAD:g})",
          file=out)
    return worst


# --- CLI ------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    run = load_run_config(args.config) if args.config else RunConfig()
    seed = args.seed if args.seed is not None else run.seed
    records, truth = simulate_epoch(run.scenario, np.random.default_rng(seed))
    write_log(records, args.out)
    if args.truth:
        write_truth(truth, args.truth)
    print(f"wrote {len(records)} exchanges to {args.out}")
    return 0


def _cmd_estimate(args) -> int:
    run = load_run_config(args.config) if args.config else RunConfig()
    records = read_log(args.infile)
    if not records:
        raise LogFormatError(f"{args.infile}: no records")
    chain = estimate_records(records, run.scenario.ofdm, run.scenario.n_rotation,
                             run.scenario.cfo_precision_hz, (args.method,),
                             theta_mode=args.theta_mode,
                             subarray_len=args.subarray_len)
    write_estimates(chain, args.method, args.out)
    print(f"wrote {len(records)} estimates to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    with open(args.spec, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise LogFormatError(f"{args.spec}: invalid JSON ({exc})") from None
    known = {"axis", "values", "epochs", "methods", "seed", "scenario", "theta_mode"}
    unknown = set(data) - known
    if unknown:
        raise LogFormatError(f"unknown sweep keys: {sorted(unknown)}")
    scenario = scenario_from_dict(data.get("scenario", {}))
    spec = evaluation.SweepSpec(
        axis=data["axis"], values=tuple(data["values"]),
        epochs=int(data.get("epochs", 10)), base=scenario,
        methods=tuple(data.get("methods", ("sumcp",))),
        seed=int(data.get("seed", 0)),
        theta_mode=data.get("theta_mode", "pair"))
    report = evaluation.run_sweep(spec)
    write_report(report, args.out)
    if args.hist_out and report.histograms:
        payload = {f"{value}|{method}": {"edges": h.edges.tolist(),
                                         "probs": h.probs.tolist(), "count": h.count}
                   for (value, method), h in report.histograms.items()}
        with open(args.hist_out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)
    print(f"wrote {len(report.rows)} report rows to {args.out}")
    return 0


def _cmd_oracle_check(args) -> int:
    worst = oracle_check(quadrature_steps=args.quadrature_steps)
    return 0 if worst < ORACLE_TOLERANCE_RAD else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cprange",
        description="Carrier-phase differential ranging: simulate, estimate, sweep.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="simulate an epoch and write a JSONL log")
    p_sim.add_argument("--config", help="JSON scenario/run config")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--truth", help="also write ground truth JSONL")
    p_sim.set_defaults(func=_cmd_simulate)

    for name, help_text in (("estimate", "estimate ranges from a measurement log"),
                            ("replay", "alias of estimate for captured logs")):
        p_est = sub.add_parser(name, help=help_text)
        p_est.add_argument("--in", dest="infile", required=True)
        p_est.add_argument("--method", choices=KNOWN_METHODS, required=True)
        p_est.add_argument("--out", required=True)
        p_est.add_argument("--config", help="JSON scenario/run config")
        p_est.add_argument("--theta-mode", choices=("pair", "sum"), default="pair")
        p_est.add_argument("--subarray-len", dest="subarray_len", type=int, default=32)
        p_est.set_defaults(func=_cmd_estimate)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep and write a CSV report")
    p_sweep.add_argument("--spec", required=True, help="JSON sweep spec")
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--hist-out", help="JSON dump of timegap histograms")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_oracle = sub.add_parser(
        "oracle-check",
        help="compare closed-form CSI against the numerical demodulation integral")
    p_oracle.add_argument("--quadrature-steps", type=int, default=None)
    p_oracle.set_defaults(func=_cmd_oracle_check)
    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(cli_main())
