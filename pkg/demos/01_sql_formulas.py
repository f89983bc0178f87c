"""
Standard quantum limit in closed form
=====================================

Crossing time, noise floor and the weak-force limit for the heavy-atom
parameters (m = 2.22e-25 kg, D = 1.42e-20 m^2 s, B = 10 MHz).
"""

import numpy as np

from sqlsim import PhysicalParams, validate_params
from sqlsim import analysis as an

p = validate_params(PhysicalParams())

# the record noise after low-pass filtering, and when backaction catches up
floor = an.noise_floor(p.coupling_D, p.bandwidth_B)
ts = an.crossing_time(p)
print(f"noise floor   sqrt(DB/2) = {floor:.4e} m")
print(f"crossing time t*         = {ts:.4e} s")
print(f"x_rms(t*) / floor        = {an.xrms_analytic(ts, p) / floor:.12f}")

# rms wander grows as t^(3/2)
for t in ts * np.array([0.1, 0.5, 1.0, 2.0]):
    print(f"  t = {t:.3e} s   x_rms = {an.xrms_analytic(t, p):.3e} m")

# inference times disturbance, evaluated with B = 1/t, sits exactly on its bound
lhs, rhs = an.inference_disturbance_product(p.coupling_D, 1e-4, p)
print(f"floor * x_rms = {lhs:.6e},  hbar t/(2 sqrt3 m) = {rhs:.6e}")

# weak force: maximise eta - eta^2 sin(1/eta) over the coupling
eta, g = an.optimize_eta()
print(f"eta* = {eta:.8f}   1/g_max = {1 / g:.8f}  (compare pi = {np.pi:.8f})")
t = 1e-4
print(f"alpha_min at t = {t} s: {an.alpha_min_sql(p.mass, t):.4e} N "
      f"with D = {an.optimal_coupling(p.mass, t):.4e} m^2 s")
