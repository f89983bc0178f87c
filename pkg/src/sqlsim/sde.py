"""Continuous-limit stochastic dynamics of the monitored free particle.

    dx  = p/m dt
    dp  = alpha dt + sqrt(hbar^2 / 2D) dW
    dxi = x dt + sqrt(D / 2) dW

One Wiener increment per step drives both the backaction kick and the
record noise. Paths are Euler-Maruyama with fixed step and start from
``x = p = xi = 0``; the constant-force drift of ``x`` over a step
(``alpha h^2 / 2m``) is added exactly so the mean motion has no step error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import map_chunks
from .errors import NonPositive, StepTooLarge, WindowTooShort
from .model import NoiseStream, PhysicalParams, validate_params

DEFAULT_STEPS = 2**14


@dataclass(frozen=True)
class SdeState:
    x: float
    p: float
    xi_integral: float
    time: float


@dataclass(frozen=True)
class Trajectory:
    """Sampled path(s). Arrays have the time axis last.

    ``dW`` holds the full-resolution increments of a single path, or ``None``
    when they were not kept.
    """

    times: np.ndarray
    x: np.ndarray
    p: np.ndarray
    xi_integral: np.ndarray
    step_h: float
    decimate: int = 1
    dW: np.ndarray | None = None
    params: PhysicalParams | None = None

    def state(self, k: int) -> SdeState:
        return SdeState(float(self.x[..., k]), float(self.p[..., k]), float(self.xi_integral[..., k]), float(self.times[k]))


def _force_drift(params, h):
    return 0.5 * params.force_alpha * h * h / params.mass


def em_step(s: SdeState, params: PhysicalParams, h: float, dW: float) -> SdeState:
    """One Euler-Maruyama step; the same ``dW`` enters ``dp`` and ``dxi``."""
    return SdeState(
        x=s.x + (s.p / params.mass * h + _force_drift(params, h)),
        p=s.p + (params.force_alpha * h + params.kick_scale * dW),
        xi_integral=s.xi_integral + (s.x * h + params.record_scale * dW),
        time=s.time + h,
    )


def step_count(t_final: float, h: float) -> int:
    if not (h > 0 and t_final > 0):
        raise NonPositive("step_h" if not h > 0 else "t_final", h if not h > 0 else t_final)
    if h > t_final * (1 + 1e-12):
        raise StepTooLarge(f"step {h!r} exceeds t_final {t_final!r}")
    return max(1, math.ceil(t_final / h * (1 - 1e-12)))


def em_paths(params: PhysicalParams, h: float, dW: np.ndarray):
    """Vectorized Euler-Maruyama from zero for increments ``dW`` (..., n).

    Bit-identical to repeated :func:`em_step`; returns ``(x, p, xi)`` with
    ``n + 1`` samples along the last axis.
    """
    lead = dW.shape[:-1]
    zero = np.zeros(lead + (1,))
    p = np.concatenate([zero, np.cumsum(params.force_alpha * h + params.kick_scale * dW, axis=-1)], axis=-1)
    x = np.concatenate([zero, np.cumsum(p[..., :-1] / params.mass * h + _force_drift(params, h), axis=-1)], axis=-1)
    xi = np.concatenate([zero, np.cumsum(x[..., :-1] * h + params.record_scale * dW, axis=-1)], axis=-1)
    return x, p, xi


def wiener_increments(seed: int, rows, n: int, h: float) -> np.ndarray:
    sq = math.sqrt(h)
    return np.stack([sq * NoiseStream(seed, k).normals(n) for k in rows])


def integrate(
    params: PhysicalParams,
    t_final: float,
    h: float | None = None,
    seed: int = 0,
    trajectory_index: int = 0,
    decimate: int = 1,
) -> Trajectory:
    """Integrate one path to ``t_final`` with ``ceil(t_final / h)`` steps.

    ``h`` defaults to ``t_final / 2**14``. The path is a pure function of
    ``(params, t_final, h, seed, trajectory_index)``.
    """
    params = validate_params(params)
    h = t_final / DEFAULT_STEPS if h is None else h
    n = step_count(t_final, h)
    dW = wiener_increments(seed, [trajectory_index], n, h)[0]
    x, p, xi = em_paths(params, h, dW)
    keep = np.arange(0, n + 1, decimate)
    return Trajectory(keep * h, x[keep], p[keep], xi[keep], h, decimate, dW, params)


def integrate_ensemble(
    params: PhysicalParams,
    t_final: float,
    h: float | None,
    n_traj: int,
    seed: int = 0,
    decimate: int = 1,
    threads=None,
) -> Trajectory:
    """Integrate ``n_traj`` independent paths; row ``k`` equals ``integrate(..., trajectory_index=k)``.

    Paths are computed at full resolution and only every ``decimate``-th
    sample is stored.
    """
    params = validate_params(params)
    h = t_final / DEFAULT_STEPS if h is None else h
    n = step_count(t_final, h)
    keep = np.arange(0, n + 1, decimate)

    def work(rows):
        x, p, xi = em_paths(params, h, wiener_increments(seed, rows, n, h))
        return x[:, keep], p[:, keep], xi[:, keep]

    parts = map_chunks(work, n_traj, threads)
    x, p, xi = (np.concatenate([part[i] for part in parts]) for i in range(3))
    return Trajectory(keep * h, x, p, xi, h, decimate, None, params)


def record_increments(traj: Trajectory) -> np.ndarray:
    """Per-step record increments ``dxi = x h + sqrt(D/2) dW``."""
    if traj.dW is None or traj.decimate != 1:
        raise WindowTooShort("record increments need a full-resolution path with its noise")
    return traj.x[..., :-1] * traj.step_h + traj.params.record_scale * traj.dW


def band_limited_signal(traj: Trajectory, B: float):
    """Boxcar-average the broadband record ``dxi/dt`` over windows of ``1/B``.

    Returns ``(times, signal)`` with window end times.
    """
    if not B > 0:
        raise NonPositive("bandwidth_B", B)
    h = traj.step_h * traj.decimate
    N = int(round(1.0 / (B * h)))
    if N < 1:
        raise WindowTooShort(f"bandwidth {B!r} Hz is above the sample rate {1 / h!r} Hz")
    idx = np.arange(0, traj.times.shape[0], N)
    xi = traj.xi_integral[..., idx]
    return traj.times[idx[1:]], np.diff(xi, axis=-1) / (N * h)


# -- exact-in-distribution oracle -----------------------------------------


def _increment_cov(dt):
    # (dW, int (t-s) dW, int (t-s)^2/2 dW) over an interval of length dt
    return np.array([
        [dt, dt**2 / 2, dt**3 / 6],
        [dt**2 / 2, dt**3 / 3, dt**4 / 8],
        [dt**3 / 6, dt**4 / 8, dt**5 / 20],
    ])


def exact_moments(params: PhysicalParams, t: float):
    """Exact mean and covariance of ``(x, p, xi_integral)`` at time ``t``."""
    params = validate_params(params)
    c, r, m, a = params.kick_scale, params.record_scale, params.mass, params.force_alpha
    L = np.array([[0.0, c / m, 0.0], [c, 0.0, 0.0], [r, 0.0, c / m]])
    mean = np.array([a * t**2 / (2 * m), a * t, a * t**3 / (6 * m)])
    return mean, L @ _increment_cov(t) @ L.T


def sample_exact(params: PhysicalParams, times, n_traj: int, seed: int = 0) -> Trajectory:
    """Sample paths on ``times`` from the exact transition law (no step error).

    Uses stream ``(seed, k)`` for row ``k``; the draws differ from those of
    :func:`integrate`, so this is a distributional cross-check only.
    """
    params = validate_params(params)
    times = np.asarray(times, dtype=float)
    c, r, m, a = params.kick_scale, params.record_scale, params.mass, params.force_alpha
    dts = np.diff(np.concatenate([[0.0], times]))
    unit = np.linalg.cholesky(_increment_cov(1.0))
    chol = [np.diag([dt**0.5, dt**1.5, dt**2.5]) @ unit for dt in dts]
    W = np.zeros(n_traj)
    U = np.zeros(n_traj)
    V = np.zeros(n_traj)
    out = np.empty((3, n_traj, len(times)))
    z = np.stack([NoiseStream(seed, k).normals(3 * len(times)).reshape(len(times), 3) for k in range(n_traj)])
    for j, dt in enumerate(dts):
        inc = z[:, j, :] @ chol[j].T
        V = V + U * dt + W * dt**2 / 2 + inc[:, 2]
        U = U + W * dt + inc[:, 1]
        W = W + inc[:, 0]
        t = times[j]
        out[0, :, j] = c / m * U + a * t**2 / (2 * m)
        out[1, :, j] = c * W + a * t
        out[2, :, j] = c / m * V + r * W + a * t**3 / (6 * m)
    return Trajectory(times, out[0], out[1], out[2], float("nan"), 1, None, params)
