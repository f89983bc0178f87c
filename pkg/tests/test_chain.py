import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqlsim.chain import (
    ChainState, boxcar_filter, chain_ensemble, chain_gains, ensemble_covariance, free_evolution,
    gaussian_conditioning_update, sample_innovation, simulate_chain, stationary_widths, step_stationary,
)
from sqlsim.errors import NonPositive, WindowTooShort
from sqlsim.model import GaussianMoments, PhysicalParams, validate_params

from conftest import mc_sigma_var


# -- wavefunction oracle (hbar = m = 1) -----------------------------------

X = np.linspace(-40, 40, 8192, endpoint=False)
DX = X[1] - X[0]
K = 2 * np.pi * np.fft.fftfreq(X.size, DX)


def packet(m: GaussianMoments):
    a = (1 - 1j * m.epsilon) / (2 * m.delta)
    psi = np.exp(-a * (X - m.x_mean) ** 2 + 1j * m.p_mean * X)
    return psi / np.sqrt(np.sum(abs(psi) ** 2) * DX)


def grid_moments(psi):
    psi = psi / np.sqrt(np.sum(abs(psi) ** 2) * DX)
    dpsi = np.fft.ifft(1j * K * np.fft.fft(psi))
    rho = abs(psi) ** 2 * DX
    xm = np.sum(X * rho)
    pm = np.real(np.sum(np.conj(psi) * (-1j) * dpsi) * DX)
    vx = np.sum((X - xm) ** 2 * rho)
    xp = np.real(np.sum(np.conj(psi) * X * (-1j) * dpsi) * DX)
    pp = np.real(np.sum(abs(dpsi) ** 2) * DX)
    return xm, pm, vx, xp - xm * pm, pp - pm * pm


def evolve(psi, t):
    return np.fft.ifft(np.exp(-0.5j * K * K * t) * np.fft.fft(psi))


UNIT = PhysicalParams(mass=1.0, coupling_D=1.0, hbar=1.0)


# -- free evolution -------------------------------------------------------


def test_free_evolution_zero_time_identity():
    m = GaussianMoments(0.3, -1.2, 2.0, 0.4)
    assert free_evolution(m, 0.0, UNIT) == m


def test_free_spreading_closed_form():
    m = GaussianMoments(0.0, 0.0, 3.0)
    for t in (0.1, 1.0, 7.0):
        out = free_evolution(m, t, UNIT)
        assert math.isclose(out.delta, 3.0 + t * t / 3.0, rel_tol=1e-14)


def test_free_evolution_matches_wavefunction():
    m = GaussianMoments(0.5, 0.8, 1.3, -0.6)
    t = 1.7
    xm, pm, vx, cxp, vp = grid_moments(evolve(packet(m), t))
    out = free_evolution(m, t, UNIT)
    assert math.isclose(out.x_mean, xm, abs_tol=1e-9)
    assert math.isclose(out.p_mean, pm, abs_tol=1e-9)
    assert math.isclose(out.position_variance, vx, rel_tol=1e-9)
    assert math.isclose(out.epsilon, 2 * cxp, rel_tol=1e-8)
    assert math.isclose(out.momentum_variance(1.0), vp, rel_tol=1e-8)


def test_free_evolution_force_terms():
    p = UNIT.replace(force_alpha=2.0)
    out = free_evolution(GaussianMoments(1.0, 0.5, 1.0), 3.0, p)
    assert math.isclose(out.p_mean, 0.5 + 6.0)
    assert math.isclose(out.x_mean, 1.0 + 1.5 + 9.0)


# -- conditioning ---------------------------------------------------------


def test_conditioning_matches_wavefunction():
    m = GaussianMoments(0.2, -0.4, 2.2, 0.9)
    sigma, xi = 1.5, 1.1
    psi = packet(m) * np.exp(-((X - xi) ** 2) / (2 * sigma))
    xm, pm, vx, cxp, vp = grid_moments(psi)
    out = gaussian_conditioning_update(m, sigma, xi, hbar=1.0)
    assert math.isclose(out.x_mean, xm, abs_tol=1e-10)
    assert math.isclose(out.p_mean, pm, abs_tol=1e-9)
    assert math.isclose(out.position_variance, vx, rel_tol=1e-10)
    assert math.isclose(out.epsilon, 2 * cxp, rel_tol=1e-9)
    assert math.isclose(math.sqrt(vx * vp), 0.5 * math.sqrt(1 + out.epsilon**2), rel_tol=1e-8)


def test_conditioning_on_mean_outcome_only_narrows():
    m = GaussianMoments(0.7, 1.1, 4.0, 0.3)
    out = gaussian_conditioning_update(m, 2.0, 0.7, hbar=1.0)
    assert out.x_mean == 0.7 and out.p_mean == 1.1
    assert out.delta < m.delta


def test_conditioning_equal_widths():
    out = gaussian_conditioning_update(GaussianMoments(0.0, 0.0, 2.0), 2.0, 1.0, hbar=1.0)
    assert out.contraction_C == 2.0
    assert out.x_mean == 0.5
    assert out.delta == 1.0


def test_conditioning_sharp_prior_ignores_outcome():
    out = gaussian_conditioning_update(GaussianMoments(1.0, 0.0, 1e-12), 1.0, 50.0, hbar=1.0)
    assert abs(out.x_mean - 1.0) < 1e-10


@given(
    d=st.floats(1e-3, 1e3), e=st.floats(-10, 10), sigma=st.floats(1e-3, 1e3), xi=st.floats(-10, 10)
)
def test_conditioning_keeps_pure_state(d, e, sigma, xi):
    out = gaussian_conditioning_update(GaussianMoments(0.0, 0.0, d, e), sigma, xi, hbar=1.0)
    assert math.isclose(out.uncertainty_product(1.0), 0.25, rel_tol=1e-9)
    assert out.delta <= d and out.contraction_C >= 1.0


# -- stationary widths ----------------------------------------------------


def closed_form_exponent(tau, D, hbar=1.0, m=1.0):
    s = 0.5 * tau / D
    kappa = 2 * hbar * tau / m
    z = np.sqrt(complex(s * s, -4 * s / kappa))
    a = 0.5 * (s + z)
    return a if a.real > 0 else 0.5 * (s - z)


@pytest.mark.parametrize("tau", [1e-1, 1e-3, 1e-6, 1e-9, 1e-12, 1e-15])
def test_stationary_widths_closed_form(tau):
    p = validate_params(PhysicalParams(mass=1.0, coupling_D=1.0, hbar=1.0, tau=tau))
    st_ = stationary_widths(p)
    a = closed_form_exponent(tau, 1.0)
    assert math.isclose(st_.delta, 0.5 / a.real, rel_tol=1e-12)
    assert math.isclose(st_.epsilon, -a.imag / a.real, rel_tol=1e-12)
    assert math.isclose(st_.contraction_C, 1 + (0.5 * tau) / (a.real - 0.5 * tau), rel_tol=1e-12)


def test_stationary_widths_plain_iteration():
    p = validate_params(PhysicalParams(mass=1.0, coupling_D=1.0, hbar=1.0, tau=0.3))
    m = GaussianMoments(0.0, 0.0, 1.0)
    for _ in range(2000):
        m = gaussian_conditioning_update(free_evolution(m, p.tau, p), p.sigma, 0.0, hbar=1.0)
    st_ = stationary_widths(p)
    assert math.isclose(st_.delta, m.delta, rel_tol=1e-12)
    assert math.isclose(st_.epsilon, m.epsilon, rel_tol=1e-12)
    assert math.isclose(st_.contraction_C, m.contraction_C, rel_tol=1e-12)


def test_stationary_widths_repeat_after_one_cycle(fig1_chain):
    st_ = stationary_widths(fig1_chain)
    nxt = gaussian_conditioning_update(free_evolution(st_, fig1_chain.tau, fig1_chain), fig1_chain.sigma, 0.0,
                                       fig1_chain.hbar)
    assert math.isclose(nxt.delta, st_.delta, rel_tol=1e-9)
    assert math.isclose(nxt.contraction_C, st_.contraction_C, rel_tol=1e-12)


def test_stationary_contraction_fig1_regression(fig1_chain):
    # frozen value of the closed-form fixed point at tau = 1 ns
    assert math.isclose(stationary_widths(fig1_chain).contraction_C, 1.0002586953297008, rel_tol=1e-12)


def test_contraction_decreases_with_tau(fig1):
    cs = [stationary_widths(fig1.replace(tau=1e-6 / 2**k)).contraction_C - 1 for k in range(12)]
    assert all(b < a for a, b in zip(cs, cs[1:]))
    assert cs[-1] > 0


def test_kick_gain_equals_conditioning_kick(fig1_chain):
    # hbar eps'/(sigma C) from the Gaussian update equals hbar/(sigma sqrt C) at stationarity
    st_ = stationary_widths(fig1_chain)
    pre = free_evolution(st_, fig1_chain.tau, fig1_chain)
    _, gain, kick = chain_gains(fig1_chain, st_.contraction_C)
    C = 1 + pre.delta / fig1_chain.sigma
    assert math.isclose(C, st_.contraction_C, rel_tol=1e-12)
    assert math.isclose(pre.delta / (pre.delta + fig1_chain.sigma), gain, rel_tol=1e-8)
    assert math.isclose(fig1_chain.hbar * pre.epsilon / (fig1_chain.sigma * C), kick, rel_tol=1e-9)


# -- sampling and stepping ------------------------------------------------


def test_sample_innovation_variance():
    rng = np.random.default_rng(3)
    draws = np.array([sample_innovation(rng, 2.0, 1.0) for _ in range(100_000)])
    assert abs(draws.var() - 1.0) < 0.02
    rng = np.random.default_rng(3)
    assert sample_innovation(rng, 2.0, 1.0) == draws[0]


def test_step_zero_innovation(fig1_chain):
    st_ = stationary_widths(fig1_chain)
    s0 = ChainState(GaussianMoments(1e-12, 3e-24, st_.delta, st_.epsilon, st_.contraction_C),
                    premeasure_x=1e-12 + 3e-24 * fig1_chain.tau / fig1_chain.mass)
    s1 = step_stationary(s0, 0.0, fig1_chain)
    assert s1.moments.p_mean == 3e-24
    assert s1.moments.x_mean == s0.premeasure_x
    assert s1.step_index == 1 and s1.time == fig1_chain.tau


def test_step_accumulates_force(fig1_chain):
    p = fig1_chain.replace(force_alpha=1e-21)
    st_ = stationary_widths(p)
    s = ChainState(st_, 0.0)
    for _ in range(100):
        s = step_stationary(s, 0.0, p)
    assert math.isclose(s.moments.p_mean, 100 * 1e-21 * p.tau, rel_tol=1e-12)


def test_kick_variance(fig1_chain):
    p = fig1_chain
    C = stationary_widths(p).contraction_C
    _, _, kick = chain_gains(p, C)
    d = np.random.default_rng(0).normal(0, math.sqrt(0.5 * p.sigma * C), 100_000)
    v = (kick * d).var()
    ref = p.hbar**2 * p.tau / (2 * p.coupling_D)
    assert abs(v / ref - 1) < 4 * math.sqrt(2 / 100_000)


# -- trajectories ---------------------------------------------------------


def test_single_step_chain(fig1_chain):
    traj, rec = simulate_chain(fig1_chain, 1, seed=1)
    assert len(rec) == 1 and traj.x.shape == (2,)
    assert rec.times[0] == fig1_chain.tau


def test_chain_reproducible(fig1_chain):
    a, ra = simulate_chain(fig1_chain, 500, seed=9, trajectory_index=3)
    b, rb = simulate_chain(fig1_chain, 500, seed=9, trajectory_index=3)
    assert np.array_equal(a.x, b.x) and np.array_equal(ra.outcomes, rb.outcomes)


def test_chain_requires_discrete(fig1):
    with pytest.raises(NonPositive):
        simulate_chain(fig1, 10, seed=0)


def test_ensemble_rows_match_single_runs(fig1_chain):
    times, x, p = chain_ensemble(fig1_chain, 300, 5, seed=4, threads=2)
    for k in (0, 4):
        traj, _ = simulate_chain(fig1_chain, 300, seed=4, trajectory_index=k)
        assert np.array_equal(x[k], traj.x) and np.array_equal(p[k], traj.p)


def test_innovation_variance_and_whiteness(fig1_chain):
    _, rec = simulate_chain(fig1_chain, 50_000, seed=2)
    C = stationary_widths(fig1_chain).contraction_C
    q = 0.5 * fig1_chain.sigma * C
    inn = rec.innovations_true
    assert abs(inn.var() / q - 1) < 4 * math.sqrt(2 / inn.size)
    for lag in range(1, 11):
        r = np.corrcoef(inn[:-lag], inn[lag:])[0, 1]
        assert abs(r) < 4 / math.sqrt(inn.size)


def test_innovation_is_outcome_minus_prediction(fig1_chain):
    traj, rec = simulate_chain(fig1_chain, 100, seed=0)
    assert np.array_equal(rec.outcomes - traj.premeasure_x, rec.innovations_true)


def test_momentum_diffusion_ensemble(fig1_chain):
    n_steps, n = 10_000, 1000
    _, _, p = chain_ensemble(fig1_chain, n_steps, n, seed=11, decimate=n_steps)
    t = n_steps * fig1_chain.tau
    ref = fig1_chain.hbar**2 * t / (2 * fig1_chain.coupling_D)
    assert abs(p[:, -1].var() / ref - 1) < 0.1


def test_ensemble_covariance_matches_sampling(fig1_chain):
    n_steps = 2000
    vx, cxp, vp = ensemble_covariance(fig1_chain, n_steps)
    _, x, p = chain_ensemble(fig1_chain, n_steps, 4000, seed=5, decimate=n_steps)
    assert abs(np.mean(x[:, -1] ** 2) / vx[-1] - 1) < 4 * math.sqrt(2 / 4000)
    assert abs(np.mean(p[:, -1] ** 2) / vp[-1] - 1) < 4 * math.sqrt(2 / 4000)


def test_momentum_variance_linear_exactly(fig1_chain):
    _, _, vp = ensemble_covariance(fig1_chain, 100)
    ref = fig1_chain.hbar**2 * fig1_chain.tau / (2 * fig1_chain.coupling_D) * np.arange(101)
    np.testing.assert_allclose(vp, ref, rtol=1e-12)


def test_chain_limit_includes_position_gain_noise(fig1):
    # Continuum limit of the chain keeps the gain-noise terms:
    # <x^2> / (hbar^2 t^3 / (6 m^2 D)) -> 1 + 3 sqrt2/(w0 t) + 6/(w0 t)^2
    t = 3e-5
    w0t = fig1.omega0 * t
    limit = 1 + 3 * math.sqrt(2) / w0t + 6 / w0t**2
    n = 2**13
    vx, _, _ = ensemble_covariance(fig1.replace(tau=t / n), n)
    sde = fig1.hbar**2 * t**3 / (6 * fig1.mass**2 * fig1.coupling_D)
    assert abs(vx[-1] / sde / limit - 1) < 2e-3


def test_general_chain_relaxes_to_stationary(unit):
    st_ = stationary_widths(unit)
    traj, _ = simulate_chain(unit, 3000, seed=0, initial=GaussianMoments(0.0, 0.0, 50.0))
    assert traj.delta[0] == pytest.approx(50.0 / traj.contraction[0])
    assert math.isclose(traj.delta[-1], st_.delta, rel_tol=1e-9)
    assert math.isclose(traj.contraction[-1], st_.contraction_C, rel_tol=1e-9)


def test_general_chain_matches_stationary_path(unit):
    st_ = stationary_widths(unit)
    a, _ = simulate_chain(unit, 200, seed=6, initial=st_)
    b, _ = simulate_chain(unit, 200, seed=6)
    np.testing.assert_allclose(a.x, b.x, rtol=1e-6, atol=1e-9 * np.abs(b.x).max())


# -- boxcar ---------------------------------------------------------------


def test_boxcar_identity_window(fig1_chain):
    _, rec = simulate_chain(fig1_chain, 64, seed=0)
    out = boxcar_filter(rec, 1.0 / fig1_chain.tau)
    assert np.array_equal(out.outcomes, rec.outcomes)


def test_boxcar_trailing_dropped_and_times(fig1_chain):
    _, rec = simulate_chain(fig1_chain, 1050, seed=0)
    out = boxcar_filter(rec, 1e7)  # N = 100
    assert len(out) == 10
    assert math.isclose(out.times[0], 100 * fig1_chain.tau)
    assert math.isclose(out.tau, 100 * fig1_chain.tau)


def test_boxcar_noise_variance(fig1_chain):
    _, rec = simulate_chain(fig1_chain, 400_000, seed=1)
    out = boxcar_filter(rec, 1e7)
    C = stationary_widths(fig1_chain).contraction_C
    ref = 0.5 * fig1_chain.sigma * C / 100
    v = out.innovations_true.var()
    assert abs(v / ref - 1) < 4 * math.sqrt(2 / len(out))
    # band-limited noise floor sqrt(D B / 2) in the limit
    assert math.isclose(math.sqrt(ref), math.sqrt(fig1_chain.coupling_D * 1e7 / 2), rel_tol=1e-3)


def test_boxcar_window_too_short(fig1_chain):
    _, rec = simulate_chain(fig1_chain, 10, seed=0)
    with pytest.raises(WindowTooShort):
        boxcar_filter(rec, 2.0 / fig1_chain.tau)
    with pytest.raises(WindowTooShort):
        boxcar_filter(rec, 1e6)
