"""Three routes to the same Stratonovich solution.

For dx = -x dt + 0.5 x o dB the solution is x exp(-t + 0.5 B(t)).  The Heun
scheme integrates the SDE directly; the conjugation pipeline turns it into a
random ODE through exp(u^c), integrates that with RK4 and maps back.
"""

import math

from randeq import conjugate_pipeline, integrate_stratonovich, preset, sample_path

spec = preset("gbm-strat")
for seed in range(5):
    path = sample_path(seed, 20.0, 5.0, 1e-3)
    heun = integrate_stratonovich(spec, path, 0.0, 5.0, [1.0]).final[0]
    pipe = conjugate_pipeline(spec, path, 0.0, 5.0, [1.0])[0]
    exact = math.exp(-5.0 + 0.5 * path(5.0)[0])
    print(f"seed {seed}: heun {heun:.6e}  pipeline {pipe:.6e}  closed form {exact:.6e}")
