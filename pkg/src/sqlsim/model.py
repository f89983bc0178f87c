"""Parameter and state types shared by the simulators.

All quantities are SI doubles. The measurement strength is carried by the
coupling ``D = sigma * tau`` (m^2 s); discrete-chain runs additionally carry
the inter-measurement interval ``tau`` and the meter width ``sigma``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import InconsistentDTS, NonPositive

HBAR = 1.054571817e-34  # J s

# Figure-scale defaults (SI): coupling D, bandwidth B, mass m.
FIG1_D = 1.42e-20
FIG1_B = 1e7
FIG1_MASS = 2.22e-25

_DTS_RTOL = 1e-12


@dataclass(frozen=True)
class PhysicalParams:
    """Model constants.

    ``tau`` and ``sigma`` are ``None`` in continuous mode.
    """

    mass: float = FIG1_MASS
    coupling_D: float = FIG1_D
    bandwidth_B: float = FIG1_B
    hbar: float = HBAR
    tau: float | None = None
    sigma: float | None = None
    force_alpha: float = 0.0

    @property
    def discrete(self) -> bool:
        return self.tau is not None

    @property
    def omega0(self) -> float:
        """Natural frequency sqrt(hbar / (m D)) of the estimation error."""
        return math.sqrt(self.hbar / (self.mass * self.coupling_D))

    @property
    def kick_scale(self) -> float:
        """Backaction diffusion amplitude sqrt(hbar^2 / 2D) multiplying dW in dp."""
        return math.sqrt(self.hbar**2 / (2.0 * self.coupling_D))

    @property
    def record_scale(self) -> float:
        """Record noise amplitude sqrt(D / 2) multiplying dW in d(xi)."""
        return math.sqrt(self.coupling_D / 2.0)

    def replace(self, **changes) -> "PhysicalParams":
        return dataclasses.replace(self, **changes)


def _check_positive(name, value):
    if value is None or not math.isfinite(value) or value <= 0:
        raise NonPositive(name, value)


def validate_params(raw: PhysicalParams) -> PhysicalParams:
    """Check positivity and complete the discrete-mode triple (D, tau, sigma).

    When only ``tau`` (or only ``sigma``) is given, the missing member is
    filled from ``D`` and then ``D`` is re-derived as ``sigma * tau`` so the
    product holds exactly in floating point. The operation is idempotent.
    """
    for name in ("hbar", "mass", "coupling_D", "bandwidth_B"):
        _check_positive(name, getattr(raw, name))
    if not math.isfinite(raw.force_alpha):
        raise NonPositive("force_alpha", raw.force_alpha)

    tau, sigma, D = raw.tau, raw.sigma, raw.coupling_D
    if tau is None and sigma is None:
        return raw
    if tau is not None:
        _check_positive("tau", tau)
    if sigma is not None:
        _check_positive("sigma", sigma)

    if sigma is None:
        sigma = D / tau
        D = sigma * tau
    elif tau is None:
        tau = D / sigma
        D = sigma * tau
    elif abs(sigma * tau - D) > _DTS_RTOL * D:
        raise InconsistentDTS(
            f"sigma*tau = {sigma * tau!r} differs from D = {D!r}",
            sigma=sigma, tau=tau, D=D,
        )
    return raw.replace(tau=tau, sigma=sigma, coupling_D=D)


def natural_units(params: PhysicalParams):
    """Rescale to units where hbar = m = D = 1.

    Returns ``(scaled, scales)``; ``scales`` maps ``"time"``, ``"length"``
    and ``"mass"`` to the SI size of one natural unit. The time unit is
    1/omega0.
    """
    params = validate_params(params)
    T = 1.0 / params.omega0
    M = params.mass
    L = math.sqrt(params.hbar * T / M)
    scaled = params.replace(
        hbar=1.0,
        mass=1.0,
        coupling_D=params.coupling_D / (L * L * T),
        bandwidth_B=params.bandwidth_B * T,
        force_alpha=params.force_alpha * T * T / (M * L),
        tau=None if params.tau is None else params.tau / T,
        sigma=None if params.sigma is None else params.sigma / (L * L),
    )
    if scaled.discrete:
        scaled = scaled.replace(coupling_D=scaled.sigma * scaled.tau)
    return scaled, {"time": T, "length": L, "mass": M}


@dataclass(frozen=True)
class GaussianMoments:
    """Four-parameter description of a pure Gaussian state.

    ``delta`` is twice the position variance. ``epsilon`` is the symmetrized
    covariance <dx dp + dp dx> / hbar, so a pure state has momentum variance
    hbar^2 (1 + epsilon^2) / (2 delta). ``contraction_C`` records the factor
    by which the last measurement divided the width.
    """

    x_mean: float
    p_mean: float
    delta: float
    epsilon: float = 0.0
    contraction_C: float = 1.0

    def __post_init__(self):
        if not self.delta > 0:
            raise NonPositive("delta", self.delta)

    @property
    def position_variance(self) -> float:
        return 0.5 * self.delta

    def momentum_variance(self, hbar: float = HBAR) -> float:
        return hbar**2 * (1.0 + self.epsilon**2) / (2.0 * self.delta)

    def covariance(self, hbar: float = HBAR) -> float:
        """Symmetrized x-p covariance <dx dp + dp dx> / 2."""
        return 0.5 * hbar * self.epsilon

    def uncertainty_product(self, hbar: float = HBAR) -> float:
        """Var(x) Var(p) - Cov(x,p)^2; equals hbar^2 / 4 for a pure state."""
        return self.position_variance * self.momentum_variance(hbar) - self.covariance(hbar) ** 2


@dataclass(frozen=True)
class NoiseStream:
    """Reproducible Gaussian stream for one trajectory of an ensemble.

    The stream for ``(seed, index)`` comes from a ``SeedSequence`` spawn key,
    so trajectory ``k`` draws the same numbers whatever order or thread the
    ensemble is computed in.
    """

    seed: int
    index: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(self.index),))
        return np.random.Generator(np.random.PCG64(ss))

    def normals(self, n: int) -> np.ndarray:
        return self.generator().standard_normal(n)

    def increments(self, n: int, dt: float) -> np.ndarray:
        """``n`` Wiener increments of variance ``dt``."""
        return math.sqrt(dt) * self.normals(n)


def ensemble_normals(seed: int, indices, n: int) -> np.ndarray:
    """Stack the first ``n`` standard normals of each trajectory stream."""
    out = np.empty((len(indices), n))
    for row, k in enumerate(indices):
        out[row] = NoiseStream(seed, k).normals(n)
    return out
