"""
Checking a solver against exact l1 minimisation
===============================================

For N = 12 every basic solution of F x = y can be enumerated, which gives the
exact l1 minimiser.  A dual certificate then confirms optimality of any
candidate, including AMP's answer.  At this size AMP often fails to
converge (its averages assume large N), so the loop looks for a case where
it does.
"""

import numpy as np

from l1bp import EnsembleSpec, RngSeed, brute_force_l1, make_instance, run_amp
from l1bp.l1_oracle import certificate_details

for s in range(200):
    F, x0, y = make_instance(EnsembleSpec.dense(12, 0.5), 0.2, RngSeed(3, s))
    if np.count_nonzero(x0.values) < 2:
        continue
    res = run_amp(F, y, truth=x0)
    if res.converged:
        break
    print(f"seed {s}: AMP did not converge")
orc = brute_force_l1(F, y)
print("truth  ", np.round(x0.values, 4))
print("oracle ", np.round(orc.x_star, 4), f"l1={orc.l1_value:.4f} unique={orc.unique}")
cert = certificate_details(F, y, res.x_hat)
print("AMP    ", np.round(res.x_hat, 4), f"converged={res.converged}")
print(f"certificate ok={cert['ok']} dual max={cert['dual_max']:.3f} "
      f"support={cert['support'].tolist()}")
