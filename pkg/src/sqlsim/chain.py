"""Discrete measurement chain.

A free particle in a pure Gaussian state is measured every ``tau`` seconds
by a fresh meter of width parameter ``sigma``. Between measurements the
packet spreads freely; each measurement shifts the centroid towards the
meter outcome ``xi`` and divides the width by the contraction factor
``C = 1 + delta_pre / sigma``.

In the stationary regime the means obey

    x[r+1] = x[r] + p[r] tau/m + (C-1)/C * (xi[r] - x'[r])
    p[r+1] = p[r] + alpha tau + hbar/(sigma sqrt(C)) * (xi[r] - x'[r])

with ``x'[r] = x[r] + p[r] tau/m`` and innovations ``xi[r] - x'[r]`` that
are i.i.d. normal with variance ``sigma C / 2``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from ._parallel import map_chunks
from .errors import NoConvergence, NonPositive, WindowTooShort
from .model import HBAR, GaussianMoments, NoiseStream, PhysicalParams, validate_params


@dataclass(frozen=True)
class ChainState:
    """Means just after a measurement, plus ``x'`` for the next one."""

    moments: GaussianMoments
    premeasure_x: float
    step_index: int = 0
    time: float = 0.0


@dataclass(frozen=True)
class MeasurementRecord:
    outcomes: np.ndarray
    innovations_true: np.ndarray
    times: np.ndarray
    tau: float

    def __len__(self):
        return self.outcomes.shape[-1]


@dataclass(frozen=True)
class ChainTrajectory:
    """Post-measurement means at ``times = k tau``, k = 0..n.

    ``delta`` and ``contraction`` hold the post-measurement width and the
    contraction factor of each step (constant in the stationary regime).
    """

    times: np.ndarray
    x: np.ndarray
    p: np.ndarray
    premeasure_x: np.ndarray
    delta: np.ndarray
    contraction: np.ndarray


def _discrete(params):
    params = validate_params(params)
    if not params.discrete:
        raise NonPositive("tau", None)
    return params


# -- Gaussian state maps --------------------------------------------------


def free_evolution(m: GaussianMoments, tau: float, params: PhysicalParams) -> GaussianMoments:
    """Evolve a pure Gaussian state for ``tau`` under a uniform force."""
    if tau < 0:
        raise NonPositive("tau", tau)
    if tau == 0:
        return m
    hbar, mass, alpha = params.hbar, params.mass, params.force_alpha
    d, e = m.delta, m.epsilon
    u = hbar * tau / mass
    return GaussianMoments(
        x_mean=m.x_mean + m.p_mean * tau / mass + 0.5 * alpha * tau * tau / mass,
        p_mean=m.p_mean + alpha * tau,
        delta=d + 2.0 * e * u + (1.0 + e * e) * u * u / d,
        epsilon=e + (1.0 + e * e) * u / d,
        contraction_C=m.contraction_C,
    )


def gaussian_conditioning_update(
    m: GaussianMoments, sigma: float, xi: float, hbar: float = HBAR
) -> GaussianMoments:
    """Condition a pure Gaussian state on the meter outcome ``xi``.

    The meter multiplies the wavefunction by exp(-(x - xi)^2 / 2 sigma),
    which adds ``1/(2 sigma)`` to the real part of the Gaussian exponent.
    The imaginary part (the x-p correlation) is untouched, which turns the
    position shift into a momentum kick ``hbar epsilon' / (sigma C)`` per
    unit innovation.
    """
    if not sigma > 0:
        raise NonPositive("sigma", sigma)
    C = 1.0 + m.delta / sigma
    innov = xi - m.x_mean
    return GaussianMoments(
        x_mean=m.x_mean + (m.delta / (m.delta + sigma)) * innov,
        p_mean=m.p_mean + hbar * m.epsilon / (sigma * C) * innov,
        delta=m.delta / C,
        epsilon=m.epsilon / C,
        contraction_C=C,
    )


def _cycle_coefficients(params):
    # The cycle (free flight, then meter) acts on a = (1 - i eps) / (2 delta)
    # as the Moebius map a -> (a + s (1 + i kappa a)) / (1 + i kappa a).
    return 0.5 / params.sigma, 2.0 * params.hbar * params.tau / params.mass


def stationary_widths(params: PhysicalParams, rtol: float = 1e-12, max_iter: int = 100_000) -> GaussianMoments:
    """Post-measurement widths that repeat from one measurement cycle to the next.

    Solves the fixed-point equation a = F(a) of the cycle map by Newton
    iteration on F(a) - a. The residual is formed from ``s = 1/(2 sigma)``
    and ``kappa = 2 hbar tau / m`` directly, so it keeps full precision
    when one cycle changes the state by as little as 1e-12 (tau -> 0),
    where plain iteration would need ~1e12 cycles. Iteration starts from
    the small-tau root sqrt(-i s / kappa) + s. Returned means are zero.
    """
    params = _discrete(params)
    s, kappa = _cycle_coefficients(params)
    a = cmath.sqrt(-1j * s / kappa) + s
    for _ in range(max_iter):
        ika = 1j * kappa * a
        resid = s + 1j * kappa * (s * a - a * a)  # (F(a) - a) (1 + i kappa a)
        step = resid * (1.0 + ika) / (ika * (2.0 + ika))
        a = a + step
        if not cmath.isfinite(a):
            break
        if abs(step) <= rtol * abs(a):
            break
    else:
        raise NoConvergence(f"stationary widths not reached in {max_iter} iterations")
    if not (cmath.isfinite(a) and a.real > s):
        raise NoConvergence(f"cycle map has no admissible fixed point (a={a!r})")
    pre = a - s
    return GaussianMoments(
        x_mean=0.0,
        p_mean=0.0,
        delta=0.5 / a.real,
        epsilon=-a.imag / a.real,
        contraction_C=1.0 + s / pre.real,
    )


def sample_innovation(rng: np.random.Generator, sigma: float, C: float) -> float:
    """One draw of ``xi - x'``: normal with variance ``sigma C / 2``."""
    return rng.normal(0.0, math.sqrt(0.5 * sigma * C))


# -- stationary chain -----------------------------------------------------


def chain_gains(params: PhysicalParams, C: float):
    """Return ``(drift, gain, kick)``: tau/m, (C-1)/C and hbar/(sigma sqrt C)."""
    return params.tau / params.mass, (C - 1.0) / C, params.hbar / (params.sigma * math.sqrt(C))


def step_stationary(state: ChainState, innovation: float, params: PhysicalParams) -> ChainState:
    """Advance the means by one measurement. ``innovation`` is ``xi - x'``."""
    mo = state.moments
    drift, gain, kick = chain_gains(params, mo.contraction_C)
    x = state.premeasure_x + gain * innovation
    p = mo.p_mean + params.force_alpha * params.tau + kick * innovation
    r = state.step_index + 1
    return ChainState(
        moments=GaussianMoments(x, p, mo.delta, mo.epsilon, mo.contraction_C),
        premeasure_x=x + p * drift,
        step_index=r,
        time=r * params.tau,
    )


def _run_stationary(x, p, draws, params, C, record=True):
    """Vectorized stationary recursion over rows of ``draws`` (std-normal)."""
    drift, gain, kick = chain_gains(params, C)
    at = params.force_alpha * params.tau
    w = draws * math.sqrt(0.5 * params.sigma * C)
    n_traj, n = w.shape
    if record:
        xs = np.empty((n_traj, n + 1))
        ps = np.empty((n_traj, n + 1))
        pre = np.empty((n_traj, n))
        out = np.empty((n_traj, n))
        inn = np.empty((n_traj, n))
        xs[:, 0], ps[:, 0] = x, p
    for r in range(n):
        xp = x + p * drift
        xi = xp + w[:, r]
        d = xi - xp
        x = xp + gain * d
        p = p + at + kick * d
        if record:
            pre[:, r], out[:, r], inn[:, r] = xp, xi, d
            xs[:, r + 1], ps[:, r + 1] = x, p
    if record:
        return xs, ps, pre, out, inn
    return x, p


def _run_general(m0, draws, params):
    """Full Gaussian-state chain from arbitrary initial moments."""
    n = draws.shape[-1]
    xs, ps = np.empty(n + 1), np.empty(n + 1)
    deltas, cs = np.empty(n + 1), np.empty(n + 1)
    pre, out, inn = np.empty(n), np.empty(n), np.empty(n)
    m = m0
    xs[0], ps[0], deltas[0], cs[0] = m.x_mean, m.p_mean, m.delta, m.contraction_C
    for r in range(n):
        mp = free_evolution(m, params.tau, params)
        var = 0.5 * (mp.delta + params.sigma)
        xi = mp.x_mean + math.sqrt(var) * draws[r]
        m = gaussian_conditioning_update(mp, params.sigma, xi, params.hbar)
        pre[r], out[r], inn[r] = mp.x_mean, xi, xi - mp.x_mean
        xs[r + 1], ps[r + 1], deltas[r + 1], cs[r + 1] = m.x_mean, m.p_mean, m.delta, m.contraction_C
    return xs, ps, pre, out, inn, deltas, cs


def simulate_chain(
    params: PhysicalParams,
    n_steps: int,
    seed: int,
    trajectory_index: int = 0,
    initial: GaussianMoments | None = None,
):
    """Simulate one realization of the chain.

    Starts at the stationary widths with zero means unless ``initial`` is
    given, in which case the full Gaussian-state update runs from those
    moments so the approach to stationarity can be observed.

    Returns ``(ChainTrajectory, MeasurementRecord)``.
    """
    params = _discrete(params)
    if n_steps < 1:
        raise NonPositive("n_steps", n_steps)
    draws = NoiseStream(seed, trajectory_index).normals(n_steps)
    times = np.arange(n_steps + 1) * params.tau
    if initial is None:
        st = stationary_widths(params)
        xs, ps, pre, out, inn = (a[0] for a in _run_stationary(
            np.zeros(1), np.zeros(1), draws[None, :], params, st.contraction_C))
        deltas = np.full(n_steps + 1, st.delta)
        cs = np.full(n_steps + 1, st.contraction_C)
    else:
        xs, ps, pre, out, inn, deltas, cs = _run_general(initial, draws, params)
    traj = ChainTrajectory(times, xs, ps, pre, deltas, cs)
    rec = MeasurementRecord(out, inn, times[1:], params.tau)
    return traj, rec


def chain_ensemble(params: PhysicalParams, n_steps: int, n_traj: int, seed: int, decimate: int = 1, threads=None):
    """Stationary chain ensemble; returns ``(times, x, p)`` keeping every ``decimate``-th state.

    Row ``k`` uses trajectory stream ``(seed, k)`` and is identical to
    ``simulate_chain(params, n_steps, seed, k)``.
    """
    params = _discrete(params)
    C = stationary_widths(params).contraction_C
    keep = np.arange(0, n_steps + 1, decimate)

    def work(rows):
        draws = np.stack([NoiseStream(seed, k).normals(n_steps) for k in rows])
        xs, ps, *_ = _run_stationary(np.zeros(len(rows)), np.zeros(len(rows)), draws, params, C)
        return xs[:, keep], ps[:, keep]

    parts = map_chunks(work, n_traj, threads)
    return keep * params.tau, np.concatenate([a for a, _ in parts]), np.concatenate([b for _, b in parts])


def ensemble_covariance(params: PhysicalParams, n_steps: int):
    """Exact ensemble second moments of the stationary chain started at x = p = 0.

    Returns arrays ``(var_x, cov_xp, var_p)`` of length ``n_steps + 1``.
    """
    params = _discrete(params)
    C = stationary_widths(params).contraction_C
    drift, g, c = chain_gains(params, C)
    q = 0.5 * params.sigma * C
    vx, cxp, vp = np.zeros(n_steps + 1), np.zeros(n_steps + 1), np.zeros(n_steps + 1)
    a = b = d = 0.0
    for r in range(n_steps):
        a, b, d = (
            a + 2.0 * drift * b + drift * drift * d + g * g * q,
            b + drift * d + g * c * q,
            d + c * c * q,
        )
        vx[r + 1], cxp[r + 1], vp[r + 1] = a, b, d
    return vx, cxp, vp


def boxcar_filter(record: MeasurementRecord, B: float) -> MeasurementRecord:
    """Average non-overlapping windows of ``N = round(1/(B tau))`` samples.

    Trailing samples that do not fill a window are dropped; output times are
    the window end times.
    """
    if not B > 0:
        raise NonPositive("bandwidth_B", B)
    prod = B * record.tau
    N = int(round(1.0 / prod)) if prod <= 1.0 else 0
    if N < 1:
        raise WindowTooShort(f"B*tau = {prod!r} > 1: window holds no sample")
    n = len(record) // N
    if n < 1:
        raise WindowTooShort(f"record of {len(record)} samples shorter than window N={N}")

    def avg(a):
        a = a[..., : n * N]
        return a.reshape(a.shape[:-1] + (n, N)).mean(axis=-1)

    return MeasurementRecord(
        outcomes=avg(record.outcomes),
        innovations_true=avg(record.innovations_true),
        times=record.times[N - 1 : n * N : N],
        tau=N * record.tau,
    )
