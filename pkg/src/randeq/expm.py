"""Matrix exponential by scaling and squaring with Pade approximants.

Follows Higham's 2005 variant: pick the lowest Pade degree m in {3, 5, 7, 9, 13}
whose backward-error threshold covers the 1-norm of the matrix, otherwise
scale by 2**-s so degree 13 applies and square s times.
"""

from __future__ import annotations

import numpy as np

__all__ = ["expm", "rowmat"]

# backward-error thresholds theta_m for double precision
_THETA = {3: 1.495585217958292e-2, 5: 2.539398330063230e-1, 7: 9.504178996162932e-1,
          9: 2.097847961257068e0, 13: 5.371920351148152e0}

_B = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
         33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0),
}


def _pade(A, m):
    b = _B[m]
    n = A.shape[0]
    ident = np.eye(n)
    A2 = A @ A
    if m == 13:
        A4 = A2 @ A2
        A6 = A4 @ A2
        U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
                 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
        V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
             + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    else:
        powers = [ident, A2]
        for _ in range(2, (m + 1) // 2):
            powers.append(powers[-1] @ A2)
        U = A @ sum(b[2 * k + 1] * powers[k] for k in range(len(powers)))
        V = sum(b[2 * k] * powers[k] for k in range(len(powers)))
    return U, V


def expm(A) -> np.ndarray:
    """exp(A) for a square real matrix."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("expm: matrix has non-finite entries")
    if A.shape[0] == 0:
        return A.copy()
    norm = np.linalg.norm(A, 1)
    for m in (3, 5, 7, 9):
        if norm <= _THETA[m]:
            U, V = _pade(A, m)
            return np.linalg.solve(V - U, V + U)
    s = max(0, int(np.ceil(np.log2(norm / _THETA[13]))))
    U, V = _pade(A / 2.0**s, 13)
    X = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        X = X @ X
    return X


def rowmat(x, M) -> np.ndarray:
    """``x @ M.T`` row by row in a fixed summation order.

    Works for a single state ``(n,)`` or a batch ``(N, n)`` and gives the
    same bits for a row whatever the batch size, which BLAS does not promise.
    """
    x = np.asarray(x, dtype=float)
    out = x[..., 0:1] * M[:, 0]
    for b in range(1, M.shape[1]):
        out = out + x[..., b : b + 1] * M[:, b]
    return out
