"""Lyapunov exponents of two linear systems.

The rotating 2x2 matrix [[0, -2], [3, -1]] has eigenvalues -1/2 +- i sqrt(23)/2
but is not contracting in the Euclidean norm at every instant; its fundamental
matrix still decays like exp(-t/2).  Geometric Brownian motion
dx = a x dt + s x dB has exponent a - s^2/2.
"""

import numpy as np

from randeq import matrix_exponential, preset, sample_path, top_lyapunov
from randeq.systems import remark5_norm, spec_from_config

spec = preset("remark5")
for t in (0.0, 0.5, 1.0, 2.0, 5.0):
    print(f"t={t:4.1f}  |exp(At)|_F = {np.linalg.norm(matrix_exponential(spec.A, t)):.10f}"
          f"  closed form {float(remark5_norm(t)):.10f}")
print("rotating system exponent:", top_lyapunov(spec, sample_path(0, 0.0, 100.0, 1e-3, dim=2), T=100.0))

gbm = spec_from_config({"class": "multiplicative-lipschitz", "A": [[-1.0]], "h": ["0"], "sigma": [[[0.5]]],
                        "lambda": 0.75, "Rbar_L1": 1.5, "L": 0.0})
paths = [sample_path(s, 0.0, 100.0, 1e-3) for s in range(10)]
print("GBM exponent:", top_lyapunov(gbm, paths, T=100.0), "expected", -1 - 0.5**2 / 2)
