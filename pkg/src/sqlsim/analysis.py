"""Closed-form standard-quantum-limit quantities and ensemble statistics.

Formula helpers accept numpy arrays so parameter sweeps vectorize.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDenominator, TooFewTrajectories
from .model import HBAR, PhysicalParams, validate_params

SQRT3 = math.sqrt(3.0)


# -- broadband position SQL ------------------------------------------------


def xrms_analytic(t, params: PhysicalParams):
    """Backaction-driven rms wander hbar t^{3/2} / (m sqrt(6 D))."""
    t = np.asarray(t, dtype=float)
    return params.hbar / (params.mass * np.sqrt(6.0 * params.coupling_D)) * t**1.5


def noise_floor(D, B):
    """Rms record noise sqrt(D B / 2) after low-pass filtering to bandwidth ``B``."""
    return np.sqrt(np.asarray(D, dtype=float) * B / 2.0)


def t_star(D, B, mass, hbar=HBAR):
    """Time at which the rms wander reaches the noise floor."""
    return (np.sqrt(3.0 * np.asarray(B, dtype=float)) * D * mass / hbar) ** (2.0 / 3.0)


def crossing_time(params: PhysicalParams):
    return float(t_star(params.coupling_D, params.bandwidth_B, params.mass, params.hbar))


def sensitivity_bound(m, hbar=HBAR):
    """Largest S/t = sqrt(D)/t for which backaction dominates a single integration of length t."""
    return 3.0**-0.25 * np.sqrt(hbar / np.asarray(m, dtype=float))


def inference_disturbance_product(D, t, params: PhysicalParams):
    """Return ``(noise_floor * x_rms, hbar t / (2 sqrt(3) m))`` with ``B = 1/t``."""
    p = params.replace(coupling_D=D)
    lhs = noise_floor(D, 1.0 / t) * xrms_analytic(t, p)
    rhs = params.hbar * np.asarray(t, dtype=float) / (2.0 * SQRT3 * params.mass)
    return lhs, rhs


# -- weak-force SQL -------------------------------------------------------


def _u_minus_sin(u):
    """u - sin(u) without cancellation for small u."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 0.1
    us = np.where(small, u, 0.0)
    u2 = us * us
    series = us * u2 / 6.0 * (1.0 - u2 / 20.0 * (1.0 - u2 / 42.0 * (1.0 - u2 / 72.0 * (1.0 - u2 / 110.0))))
    return np.where(small, series, u - np.sin(u))


def _bracket(D, t, mass, hbar):
    # t - sqrt(mD/hbar) sin(sqrt(hbar/mD) t)
    w0 = np.sqrt(hbar / (mass * np.asarray(D, dtype=float)))
    return _u_minus_sin(w0 * t) / w0


def signal_noise(alpha, D, t, params: PhysicalParams):
    """Signal and rms noise of the integrated innovation at time ``t``.

    Sigma = (alpha D / hbar)[t - sqrt(mD/hbar) sin(sqrt(hbar/mD) t)],
    N = sqrt(D t / 2).
    """
    t = np.asarray(t, dtype=float)
    sig = alpha * D / params.hbar * _bracket(D, t, params.mass, params.hbar)
    return sig, np.sqrt(D * t / 2.0)


def alpha_min_at_D(D, t, params: PhysicalParams):
    """Force giving unit signal-to-noise after integrating for ``t`` at coupling ``D``."""
    br = _bracket(D, t, params.mass, params.hbar)
    if np.any(np.abs(br) <= 1e-30 * np.abs(t)):
        raise DegenerateDenominator(f"signal bracket vanishes at D={D!r}, t={t!r}")
    return params.hbar * np.sqrt(t / (2.0 * D)) / br


def g_eta(eta):
    """Dimensionless sensitivity eta - eta^2 sin(1/eta) for D = eta^2 hbar t^2 / m."""
    eta = np.asarray(eta, dtype=float)
    return eta - eta * eta * np.sin(1.0 / eta)


INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f, a, b, tol=1e-8):
    """Maximize a unimodal ``f`` on [a, b]; returns ``(x, f(x))`` with bracket width <= tol."""
    a, b = min(a, b), max(a, b)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


@functools.lru_cache(maxsize=None)
def optimize_eta(lo: float = 0.02, hi: float = 5.0, step: float = 1e-3, tol: float = 1e-8):
    """Maximize eta - eta^2 sin(1/eta): grid scan, then golden-section refinement.

    Returns ``(eta_star, g_max)``.
    """
    grid = lo + step * np.arange(int(round((hi - lo) / step)) + 1)
    k = int(np.argmax(g_eta(grid)))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    eta, g = golden_section_max(lambda e: float(g_eta(e)), a, b, tol)
    return eta, g


def alpha_min_sql(m, t, hbar=HBAR):
    """Weak-force limit sqrt(hbar m / 2 t^3) / g_max at the optimal coupling."""
    _, g = optimize_eta()
    return np.sqrt(hbar * np.asarray(m, dtype=float) / (2.0 * np.asarray(t, dtype=float) ** 3)) / g


def optimal_coupling(m, t, hbar=HBAR):
    """D = eta*^2 hbar t^2 / m."""
    eta, _ = optimize_eta()
    return eta * eta * hbar * t * t / m


def folded_normal_mean(mu, s=1.0):
    """E|X| for X ~ Normal(mu, s^2)."""
    z = mu / s
    return s * math.sqrt(2.0 / math.pi) * math.exp(-0.5 * z * z) + mu * math.erf(z / math.sqrt(2.0))


def normal_tail_two_sided(k):
    """P(|Z| >= k) for a standard normal Z."""
    return math.erfc(k / math.sqrt(2.0))


# -- ensemble statistics --------------------------------------------------


@dataclass
class EnsembleStats:
    times: np.ndarray
    xrms: np.ndarray
    var_p: np.ndarray
    xrms_ci: np.ndarray
    var_p_ci: np.ndarray
    n: int


def _fsum_cols(a):
    return np.array([math.fsum(col) for col in a.T])


def ensemble_stats(trajectories, t_grid=None, n_boot: int = 200, level: float = 0.95, seed: int = 0):
    """Rms position and momentum variance across an ensemble, with bootstrap bands.

    ``trajectories`` is an ensemble :class:`~sqlsim.sde.Trajectory` (rows are
    paths). ``t_grid`` selects the nearest stored samples; ``None`` keeps all.
    Column sums are compensated (``math.fsum``); confidence bands resample
    whole trajectories with multinomial weights.
    """
    x = np.atleast_2d(trajectories.x)
    p = np.atleast_2d(trajectories.p)
    times = np.asarray(trajectories.times)
    n = x.shape[0]
    if n < 2:
        raise TooFewTrajectories(f"need at least 2 trajectories, got {n}")
    if t_grid is not None:
        idx = np.clip(np.searchsorted(times, np.asarray(t_grid, dtype=float) * (1 - 1e-12)), 0, times.size - 1)
        x, p, times = x[:, idx], p[:, idx], times[idx]

    ms = _fsum_cols(x * x) / n
    pm = _fsum_cols(p) / n
    var_p = _fsum_cols((p - pm) ** 2) / (n - 1)

    rng = np.random.default_rng(seed)
    w = rng.multinomial(n, np.full(n, 1.0 / n), size=n_boot) / n
    boot_x = np.sqrt(w @ (x * x))
    m1 = w @ p
    boot_p = (w @ (p * p) - m1 * m1) * n / (n - 1)
    q = [(1 - level) / 2 * 100, (1 + level) / 2 * 100]
    return EnsembleStats(
        times=times,
        xrms=np.sqrt(ms),
        var_p=var_p,
        xrms_ci=np.percentile(boot_x, q, axis=0),
        var_p_ci=np.percentile(boot_p, q, axis=0),
        n=n,
    )


def empirical_crossing_time(times, xrms, floor):
    """First time the rms curve reaches ``floor``, interpolated on log-log axes; NaN if never."""
    times = np.asarray(times, dtype=float)
    xrms = np.asarray(xrms, dtype=float)
    above = np.nonzero(xrms >= floor)[0]
    if above.size == 0:
        return float("nan")
    k = int(above[0])
    if k == 0 or xrms[k - 1] <= 0 or times[k - 1] <= 0:
        return float(times[k])
    lt = np.log(times[k - 1 : k + 1])
    lx = np.log(xrms[k - 1 : k + 1])
    return float(np.exp(lt[0] + (math.log(floor) - lx[0]) * (lt[1] - lt[0]) / (lx[1] - lx[0])))


def fit_power_law(t, y):
    """Least-squares line through (log t, log y); returns ``(exponent, prefactor)``."""
    slope, icpt = np.polyfit(np.log(t), np.log(y), 1)
    return float(slope), float(math.exp(icpt))


# -- report ---------------------------------------------------------------


@dataclass
class SqlReport:
    """Derived quantities for one parameter set evaluated at time ``t``."""

    params: PhysicalParams
    t: float
    noise_floor: float
    t_star: float
    sensitivity_ratio_bound: float
    id_product_bound: float
    sigma_signal: float
    noise_N: float
    alpha_min: float
    eta_star: float
    g_max: float
    alpha_min_sql: float
    omega0: float
    notes: list = field(default_factory=list)

    def x_rms(self, t):
        return xrms_analytic(t, self.params)

    def signal(self, t):
        return signal_noise(self.params.force_alpha, self.params.coupling_D, t, self.params)[0]

    def noise(self, t):
        return np.sqrt(self.params.coupling_D * np.asarray(t, dtype=float) / 2.0)

    def items(self):
        return [
            ("t_s", self.t),
            ("noise_floor_m", self.noise_floor),
            ("t_star_s", self.t_star),
            ("x_rms_at_t_m", float(self.x_rms(self.t))),
            ("sensitivity_ratio_bound", self.sensitivity_ratio_bound),
            ("id_product_bound", self.id_product_bound),
            ("sigma_signal", self.sigma_signal),
            ("noise_N", self.noise_N),
            ("alpha_min_at_D_N", self.alpha_min),
            ("eta_star", self.eta_star),
            ("g_max", self.g_max),
            ("alpha_min_sql_N", self.alpha_min_sql),
            ("omega0_rad_s", self.omega0),
        ]


def sql_report(params: PhysicalParams, t: float) -> SqlReport:
    params = validate_params(params)
    D = params.coupling_D
    eta, g = optimize_eta()
    sig, N = signal_noise(params.force_alpha, D, t, params)
    try:
        amin = float(alpha_min_at_D(D, t, params))
    except DegenerateDenominator:
        amin = float("inf")
    return SqlReport(
        params=params,
        t=t,
        noise_floor=float(noise_floor(D, params.bandwidth_B)),
        t_star=crossing_time(params),
        sensitivity_ratio_bound=float(sensitivity_bound(params.mass, params.hbar)),
        id_product_bound=float(inference_disturbance_product(D, t, params)[1]),
        sigma_signal=float(sig),
        noise_N=float(N),
        alpha_min=amin,
        eta_star=eta,
        g_max=g,
        alpha_min_sql=float(alpha_min_sql(params.mass, t, params.hbar)),
        omega0=params.omega0,
        notes=["detection statistic is |int d_eta| / N; SNR=1 calibration compares against the folded-normal mean"],
    )
