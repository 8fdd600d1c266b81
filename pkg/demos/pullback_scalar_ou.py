"""Pullback convergence for the scalar Ornstein-Uhlenbeck preset.

Starts the solution further and further in the past along one frozen noise
path, prints the Cauchy residuals, and compares the limit with the closed-form
stochastic integral sum_j exp(s_j) dB_j evaluated on the same increments.
"""

import numpy as np

from randeq import estimate_equilibrium, preset, pullback_state, sample_path

spec = preset("scalar-ou")
path = sample_path(0, 25.0, 0.0, 1e-3)

run = estimate_equilibrium(spec, path, [3.0], method="exponential")
print(f"{'depth':>8}  {'state':>12}  {'residual':>10}")
for t, x, r in zip(run.schedule[1:], run.states[1:], run.cauchy_residuals):
    print(f"{t:8.3f}  {x[0]:12.8f}  {r:10.2e}")
print("converged:", run.converged, f"(envelope slope {run.envelope_slope:.3f}, r^2 {run.envelope_r2:.3f})")

dB = path.increments(-20.0, 0.0)[:, 0]
s = -20.0 + 1e-3 * np.arange(dB.size)
oracle = float(np.sum(np.exp(s) * dB))
u = pullback_state(spec, path, [0.0], 20.0, method="exponential")[0]
em = pullback_state(spec, path, [0.0], 20.0, method="em")[0]
print(f"closed form {oracle:.15f}\nexponential {u:.15f}\neuler       {em:.15f}")
