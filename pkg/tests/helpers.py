"""Shared builders for estimator-level tests: phase-exact synthetic data."""
from __future__ import annotations

import numpy as np

from cprange.estimator import CpPair
from cprange.util import wrap_pm_pi


def phi_track(t1: np.ndarray, eta: np.ndarray, fc: float, phi0: float) -> np.ndarray:
    """Carrier-phase offset recursion from the crystal-offset history."""
    phi = np.empty(t1.size)
    phi[0] = phi0
    for i in range(1, t1.size):
        phi[i] = phi[i - 1] + np.pi * (eta[i] + eta[i - 1]) * fc * (t1[i] - t1[i - 1])
    return phi


def synth_pairs(t1, t4, eta, rho, *, fc, n_rotation, delta_rho=0.0, phi0=0.0,
                coarse=None, rng=None, n2=None, n4=None) -> list[CpPair]:
    """Exchange-level carrier-phase values built directly from the simplified
    per-exchange phase expressions (no CSI, no delay estimation)."""
    t1 = np.asarray(t1, float)
    t4 = np.asarray(t4, float)
    eta = np.broadcast_to(np.asarray(eta, float), t1.shape)
    rho = np.broadcast_to(np.asarray(rho, float), t1.shape)
    n = t1.size
    rng = rng or np.random.default_rng(0)
    if n2 is None:
        n2 = rng.integers(0, n_rotation, n)
    if n4 is None:
        n4 = rng.integers(0, n_rotation, n)
    phi = phi_track(t1, eta, fc, phi0)
    psi2 = wrap_pm_pi(2 * np.pi * n2 / n_rotation - phi - 2 * np.pi * fc * (1 + eta) * rho)
    psi4 = wrap_pm_pi(2 * np.pi * n4 / n_rotation + phi
                      - 2 * np.pi * fc * (1 + eta) * (rho + delta_rho)
                      + 2 * np.pi * eta * fc * (t4 - t1))
    if coarse is None:
        coarse = eta * fc
    return [CpPair(p=i + 1, psi2=float(psi2[i]), psi4=float(psi4[i]), t1=float(t1[i]),
                   t4=float(t4[i]), coarse_cfo=float(coarse[i])) for i in range(n)]


def burst_schedule(duration: float, rng: np.random.Generator,
                   group_period: float = 0.5, inner: int = 5, outer: int = 19,
                   inner_spacing: float = 3e-4, outer_spacing: float = 25e-3,
                   jitter: float = 1e-4) -> np.ndarray:
    """Nested burst-plus-grid transmit times, mirroring the simulator's layout."""
    t1 = []
    g = 0
    while g * group_period < duration:
        base = g * group_period
        for r in range(inner):
            t1.append(base + inner_spacing * r + rng.uniform(-jitter, jitter))
        for r in range(outer):
            t1.append(base + outer_spacing * (r + 1))
        g += 1
    return np.array(t1)
