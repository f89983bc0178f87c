"""Recursive position/momentum estimation and weak-force detection.

The estimator runs the force-free model on the measurement record and
tracks the innovation ``eta`` (outcome minus predicted position). Without
an external force and with matched initialization the innovation is pure
meter noise; a constant force ``alpha`` makes the estimation error
``e = x - x_hat`` oscillate at ``omega0 = sqrt(hbar / (m D))`` around
``alpha D / hbar``, and the integrated innovation carries the signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import map_chunks
from .chain import MeasurementRecord, chain_gains
from .errors import RecordTooShort
from .model import PhysicalParams, validate_params
from .sde import DEFAULT_STEPS, em_paths, step_count, wiener_increments


@dataclass(frozen=True)
class FilterState:
    x_hat: float = 0.0
    p_hat: float = 0.0
    e: float | None = None
    eta_integral: float = 0.0
    time: float = 0.0


# -- discrete chain filter ------------------------------------------------


def filter_step_discrete(f: FilterState, xi: float, params: PhysicalParams, C: float):
    """Update the estimators with one meter outcome; returns ``(state, eta)``.

    Uses the chain gains with no force term. ``eta = xi - x_hat'``.
    """
    drift, gain, kick = chain_gains(params, C)
    xp = f.x_hat + f.p_hat * drift
    eta = xi - xp
    new = FilterState(
        x_hat=xp + gain * eta,
        p_hat=f.p_hat + kick * eta,
        eta_integral=f.eta_integral + eta,
        time=f.time + params.tau,
    )
    return new, eta


def run_filter_discrete(record: MeasurementRecord, params: PhysicalParams, C: float, x0=0.0, p0=0.0):
    """Filter a whole record (leading axes are independent runs).

    Returns ``(x_hat, p_hat, x_hat_pre, eta)``; the first two include the
    initial value.
    """
    params = validate_params(params)
    drift, gain, kick = chain_gains(params, C)
    xi = np.asarray(record.outcomes, dtype=float)
    n = xi.shape[-1]
    xh = np.empty(xi.shape[:-1] + (n + 1,))
    ph = np.empty_like(xh)
    pre = np.empty_like(xi)
    eta = np.empty_like(xi)
    x = np.broadcast_to(np.asarray(x0, dtype=float), xi.shape[:-1]).copy()
    p = np.broadcast_to(np.asarray(p0, dtype=float), xi.shape[:-1]).copy()
    xh[..., 0], ph[..., 0] = x, p
    for r in range(n):
        xp = x + p * drift
        d = xi[..., r] - xp
        x = xp + gain * d
        p = p + kick * d
        pre[..., r], eta[..., r] = xp, d
        xh[..., r + 1], ph[..., r + 1] = x, p
    return xh, ph, pre, eta


# -- continuous filter ----------------------------------------------------


def filter_step_continuous(f: FilterState, d_xi: float, params: PhysicalParams, h: float) -> FilterState:
    """Euler step of dx_hat = p_hat/m dt, dp_hat = (hbar/D)(dxi - x_hat dt)."""
    d_eta = d_xi - f.x_hat * h
    return FilterState(
        x_hat=f.x_hat + f.p_hat / params.mass * h,
        p_hat=f.p_hat + params.hbar / params.coupling_D * d_eta,
        e=None,
        eta_integral=f.eta_integral + d_eta,
        time=f.time + h,
    )


def run_filter_continuous(d_xi: np.ndarray, params: PhysicalParams, h: float, x0=0.0, p0=0.0):
    """Filter record increments ``d_xi`` (..., n).

    Returns ``(x_hat, p_hat, eta_integral)`` with ``n + 1`` samples.
    """
    params = validate_params(params)
    d_xi = np.asarray(d_xi, dtype=float)
    n = d_xi.shape[-1]
    gain = params.hbar / params.coupling_D
    out = np.empty((3,) + d_xi.shape[:-1] + (n + 1,))
    x = np.broadcast_to(np.asarray(x0, dtype=float), d_xi.shape[:-1]).copy()
    p = np.broadcast_to(np.asarray(p0, dtype=float), d_xi.shape[:-1]).copy()
    s = np.zeros(d_xi.shape[:-1])
    out[0, ..., 0], out[1, ..., 0], out[2, ..., 0] = x, p, s
    for k in range(n):
        d_eta = d_xi[..., k] - x * h
        x = x + p / params.mass * h
        p = p + gain * d_eta
        s = s + d_eta
        out[0, ..., k + 1], out[1, ..., k + 1], out[2, ..., k + 1] = x, p, s
    return out[0], out[1], out[2]


def filtered_paths(params: PhysicalParams, h: float, dW: np.ndarray) -> dict:
    """Truth, record and filter for increments ``dW`` with matched initialization."""
    x, p, xi = em_paths(params, h, dW)
    d_xi = x[..., :-1] * h + params.record_scale * dW
    x_hat, p_hat, eta_int = run_filter_continuous(d_xi, params, h)
    return {"x": x, "p": p, "xi_integral": xi, "x_hat": x_hat, "p_hat": p_hat,
            "e": x - x_hat, "eta_integral": eta_int}


def filter_ensemble(params, t_final, h, n_traj, seed=0, decimate=1, threads=None):
    """Filtered SDE ensemble; returns ``(times, dict of arrays)`` decimated on output."""
    params = validate_params(params)
    h = t_final / DEFAULT_STEPS if h is None else h
    n = step_count(t_final, h)
    keep = np.arange(0, n + 1, decimate)

    def work(rows):
        res = filtered_paths(params, h, wiener_increments(seed, rows, n, h))
        return {k: v[:, keep] for k, v in res.items()}

    parts = map_chunks(work, n_traj, threads)
    return keep * h, {k: np.concatenate([part[k] for part in parts]) for k in parts[0]}


def error_oscillator_analytic(t, params: PhysicalParams):
    """Estimation error e(t) = (alpha D / hbar)(1 - cos(omega0 t)) for x_hat = x, p_hat = p at t = 0."""
    t = np.asarray(t, dtype=float)
    amp = params.force_alpha * params.coupling_D / params.hbar
    return amp * (1.0 - np.cos(params.omega0 * t))


def integrate_innovation(etas, h: float) -> np.ndarray:
    """Running integral of the innovation rate ``d_eta/dt`` sampled every ``h``."""
    etas = np.asarray(etas, dtype=float)
    zero = np.zeros(etas.shape[:-1] + (1,))
    return np.concatenate([zero, np.cumsum(etas * h, axis=-1)], axis=-1)


def detect_force(d_xi: np.ndarray, params: PhysicalParams, t: float, h: float):
    """Normalized integrated innovation |int d_eta| / sqrt(D t / 2) and the decision statistic >= 1."""
    params = validate_params(params)
    d_xi = np.asarray(d_xi, dtype=float)
    n_t = int(round(t / h))
    if n_t < 1 or d_xi.shape[-1] < n_t:
        raise RecordTooShort(f"record of {d_xi.shape[-1]} steps does not span t = {t!r} s")
    _, _, eta_int = run_filter_continuous(d_xi[..., :n_t], params, h)
    stat = np.abs(eta_int[..., n_t]) / math.sqrt(params.coupling_D * t / 2.0)
    return stat, stat >= 1.0


def force_trials(params: PhysicalParams, t: float, h: float | None, n_trials: int, seed: int = 0, threads=None):
    """Detection statistics of ``n_trials`` independent records of length ``t``.

    Returns ``(statistic, signed_integral)``; trial ``k`` uses stream ``(seed, k)``.
    """
    params = validate_params(params)
    h = t / DEFAULT_STEPS if h is None else h
    n = step_count(t, h)
    noise = math.sqrt(params.coupling_D * n * h / 2.0)

    def work(rows):
        res = filtered_paths(params, h, wiener_increments(seed, rows, n, h))
        return res["eta_integral"][:, -1]

    signed = np.concatenate(map_chunks(work, n_trials, threads))
    return np.abs(signed) / noise, signed
