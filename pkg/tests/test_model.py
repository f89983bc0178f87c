import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqlsim.errors import InconsistentDTS, NonPositive
from sqlsim.model import HBAR, GaussianMoments, NoiseStream, PhysicalParams, natural_units, validate_params

pos = st.floats(min_value=1e-30, max_value=1e30, allow_nan=False, allow_infinity=False)


def test_fig1_params_accepted():
    p = validate_params(PhysicalParams(coupling_D=1.42e-20, bandwidth_B=1e7, mass=2.22e-25))
    assert p.hbar == HBAR == 1.054571817e-34
    assert not p.discrete


def test_sigma_filled_from_tau():
    p = validate_params(PhysicalParams(coupling_D=1.0, tau=0.25))
    assert p.sigma == 4.0
    assert p.discrete


def test_tau_filled_from_sigma():
    p = validate_params(PhysicalParams(coupling_D=1.0, sigma=8.0))
    assert p.tau == 0.125


@pytest.mark.parametrize("field", ["mass", "coupling_D", "bandwidth_B", "hbar"])
def test_nonpositive_rejected(field):
    with pytest.raises(NonPositive) as err:
        validate_params(PhysicalParams(**{field: 0.0}))
    assert err.value.field == field


def test_nonfinite_force_rejected():
    with pytest.raises(NonPositive):
        validate_params(PhysicalParams(force_alpha=float("nan")))


def test_inconsistent_triple():
    with pytest.raises(InconsistentDTS):
        validate_params(PhysicalParams(coupling_D=1.0, tau=0.25, sigma=4.0 * (1 + 1e-9)))
    validate_params(PhysicalParams(coupling_D=1.0, tau=0.25, sigma=4.0 * (1 + 1e-14)))


@given(D=pos, tau=pos)
def test_fill_in_exact_and_idempotent(D, tau):
    try:
        p = validate_params(PhysicalParams(coupling_D=D, tau=tau))
    except NonPositive:
        return  # D/tau under- or overflowed
    assert p.sigma * p.tau == p.coupling_D
    assert math.isclose(p.coupling_D, D, rel_tol=1e-15)
    assert validate_params(p) == p


@given(m=pos, D=pos, B=pos)
def test_continuous_idempotent(m, D, B):
    p = validate_params(PhysicalParams(mass=m, coupling_D=D, bandwidth_B=B))
    assert validate_params(validate_params(p)) == p


def test_natural_units_fig1():
    p = validate_params(PhysicalParams(force_alpha=1e-20))
    scaled, sc = natural_units(p)
    assert scaled.hbar == 1.0 and scaled.mass == 1.0
    assert math.isclose(scaled.coupling_D, 1.0, rel_tol=1e-12)
    assert math.isclose(sc["time"], 1.0 / p.omega0, rel_tol=1e-14)
    # a derived time expressed in natural units maps back to SI
    from sqlsim.analysis import crossing_time
    assert math.isclose(crossing_time(scaled) * sc["time"], crossing_time(p), rel_tol=1e-12)


def test_natural_units_discrete():
    scaled, sc = natural_units(PhysicalParams(tau=1e-9))
    assert scaled.sigma * scaled.tau == scaled.coupling_D
    assert math.isclose(scaled.tau * sc["time"], 1e-9, rel_tol=1e-14)


def test_gaussian_moments_pure_state_product():
    m = GaussianMoments(0.0, 0.0, delta=2.5, epsilon=0.7)
    assert math.isclose(m.uncertainty_product(1.0), 0.25, rel_tol=1e-14)
    with pytest.raises(NonPositive):
        GaussianMoments(0.0, 0.0, delta=0.0)


def test_noise_stream_reproducible_and_independent():
    a = NoiseStream(42, 0).normals(1000)
    assert np.array_equal(a, NoiseStream(42, 0).normals(1000))
    b = NoiseStream(42, 1).normals(1000)
    assert not np.array_equal(a, b)
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(1000)


def test_noise_stream_increment_variance():
    dW = NoiseStream(7).increments(200_000, 0.25)
    assert abs(dW.var() - 0.25) < 4 * 0.25 * math.sqrt(2 / 200_000)


def test_noise_stream_accepts_full_u64_seed():
    NoiseStream(2**64 - 1, 3).normals(3)
