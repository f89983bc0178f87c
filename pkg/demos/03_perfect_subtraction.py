"""
Subtracting the estimated position
==================================

In the discrete measurement chain, an estimator that runs the same
stationary recursion on the outcomes reproduces the true means exactly,
so outcome minus prediction is nothing but meter noise.
"""

import numpy as np

from sqlsim import PhysicalParams, validate_params
from sqlsim.chain import boxcar_filter, simulate_chain, stationary_widths
from sqlsim.estimator import run_filter_discrete

p = validate_params(PhysicalParams(tau=1e-9))
st = stationary_widths(p)
print(f"sigma = {p.sigma:.3e} m^2,  stationary C = {st.contraction_C:.12f}")

traj, rec = simulate_chain(p, 300_000, seed=0)
x_hat, p_hat, pre, eta = run_filter_discrete(rec, p, st.contraction_C)

print("innovations identical to meter noise:", np.array_equal(eta, rec.innovations_true))
print(f"var(eta) / (sigma C / 2) = {eta.var() / (0.5 * p.sigma * st.contraction_C):.4f}")

# band-limited: the outcomes wander with the particle, eta stays flat
fx = boxcar_filter(rec, p.bandwidth_B)
print(f"boxcar rms of outcomes {np.sqrt(np.mean(fx.outcomes**2)):.3e} m, "
      f"of innovations {np.sqrt(np.mean(fx.innovations_true**2)):.3e} m, "
      f"sqrt(C D B/2) = {np.sqrt(st.contraction_C * p.coupling_D * p.bandwidth_B / 2):.3e} m")
