"""
Backaction diffusion in an ensemble
===================================

A thousand Euler-Maruyama paths of the continuously measured free mass.
The rms position should cross the record noise floor near t*.
"""

import numpy as np

from sqlsim import PhysicalParams, validate_params
from sqlsim import analysis as an
from sqlsim.sde import integrate_ensemble

p = validate_params(PhysicalParams())
ts = an.crossing_time(p)
floor = an.noise_floor(p.coupling_D, p.bandwidth_B)

ens = integrate_ensemble(p, 2 * ts, None, 1000, seed=1, decimate=64)
st = an.ensemble_stats(ens)

# momentum performs a random walk: Var[p] = hbar^2 t / (2D)
k = -1
print(f"Var[p]/t = {st.var_p[k] / st.times[k]:.4e}   hbar^2/2D = {p.hbar**2 / (2 * p.coupling_D):.4e}")

# position then integrates it, giving the cubic law (fit on log-spaced samples)
sel = np.unique(np.searchsorted(st.times, np.logspace(np.log10(st.times[-1] / 100), np.log10(st.times[-1]), 30)))
slope, pref = an.fit_power_law(st.times[sel], st.xrms[sel] ** 2)
print(f"<x^2> ~ t^{slope:.3f}, prefactor ratio {pref / (p.hbar**2 / (6 * p.mass**2 * p.coupling_D)):.3f}")

t_emp = an.empirical_crossing_time(st.times, st.xrms, floor)
print(f"empirical crossing {t_emp:.4e} s vs t* = {ts:.4e} s")

# a few rows of the curve, with bootstrap bands
for j in np.linspace(1, st.times.size - 1, 6).astype(int):
    lo, hi = st.xrms_ci[:, j]
    print(f"  t={st.times[j]:.2e}  x_rms={st.xrms[j]:.3e}  [{lo:.3e}, {hi:.3e}]  "
          f"theory {an.xrms_analytic(st.times[j], p):.3e}")
