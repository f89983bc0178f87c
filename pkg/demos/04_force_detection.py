"""
Detecting a weak constant force
===============================

With a force present and a force-free estimator, the estimation error
oscillates at omega0 and the integrated innovation carries a signal.
At the force that gives unit signal-to-noise, the statistic |int d eta|/N
averages to the folded-normal mean E|N(1, 1)|.
"""

import numpy as np

from sqlsim import PhysicalParams, validate_params
from sqlsim import analysis as an
from sqlsim.estimator import error_oscillator_analytic, filtered_paths, force_trials

p0 = validate_params(PhysicalParams())
t = 1e-4
D = an.optimal_coupling(p0.mass, t)
p = p0.replace(coupling_D=D)
alpha = float(an.alpha_min_at_D(D, t, p))
p = p.replace(force_alpha=alpha)
print(f"t = {t} s, optimal D = {D:.4e}, alpha_min = {alpha:.4e} N, omega0 t = {p.omega0 * t:.4f}")

# noise-free run: the error follows (alpha D/hbar)(1 - cos omega0 t)
n = 2**12
res = filtered_paths(p, t / n, np.zeros((1, n)))
ref = error_oscillator_analytic(np.arange(n + 1) * t / n, p)
print(f"max |e - e_analytic| / max e = {np.max(np.abs(res['e'][0] - ref)) / ref.max():.2e}")

stat, _ = force_trials(p, t, t / 2048, 1000, seed=3)
print(f"mean statistic {stat.mean():.4f}   folded-normal oracle {an.folded_normal_mean(1.0):.4f}")
print(f"detection rate {np.mean(stat >= 1):.3f}")

stat0, _ = force_trials(p.replace(force_alpha=0.0), t, t / 2048, 1000, seed=4)
print(f"false alarms at alpha = 0: {np.mean(stat0 >= 1):.3f} (expected {an.normal_tail_two_sided(1.0):.3f})")
