"""Stationary Ornstein-Uhlenbeck processes driven by a stored path.

The stationary OU process ``z(t) = int_{-inf}^t exp(A (t - s)) Sigma dB(s)``
is discretised as the left-point stochastic convolution over a finite
window of length ``burn_in``::

    z(t) = sum_j exp(A h)^(j+1) Sigma dB(t - (j+1) h),   j = 0 .. burn_in/h - 1

evaluated by the recursion ``z <- P z + P Sigma dB`` with ``P = exp(A h)``
started from zero at ``t - burn_in``.  With the default ``method="window"``
every output time runs its own recursion over exactly its own window, so the
value at ``t`` computed from ``omega`` and the value at ``0`` computed from
``theta_t omega`` are the same arithmetic on the same numbers.  The
``"recursive"`` method runs one recursion over the whole range; it is much
faster but only the first output has a window of exactly ``burn_in``.

The neglected tail is ``exp(A burn_in) z(t - burn_in)``; ``truncation_bound``
records six standard deviations of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .expm import expm, rowmat
from .noise import HorizonError, as_view, grid_count

__all__ = [
    "OUBundle",
    "ConjugationTransform",
    "ou_z1",
    "ou_z2",
    "ou_u",
    "conjugate",
    "inverse_conjugate",
    "conjugate_pipeline",
    "default_burn_in",
]

TAIL = 1e-8
SIGMAS = 6.0


def default_burn_in(rate: float, step: float) -> float:
    """Smallest grid multiple with ``exp(-rate * burn_in) <= 1e-8``."""
    k = math.ceil(-math.log(TAIL) / rate / step - 1e-9)
    return k * step


@dataclass(frozen=True, eq=False)
class OUBundle:
    """An OU trajectory on ``[t_lo, t_hi]`` in the time coordinates of the
    drive it was built on (a path shifted by ``offset``)."""

    which: str
    t_lo: float
    t_hi: float
    step: float
    offset: float
    base: dict
    trajectory: np.ndarray = field(repr=False)
    burn_in: float
    truncation_bound: float
    u_c: np.ndarray | None = field(default=None, repr=False)
    weights: tuple | None = None

    @property
    def times(self) -> np.ndarray:
        return self.t_lo + np.arange(self.trajectory.shape[0]) * self.step

    def index(self, t: float) -> int:
        k = grid_count(t - self.t_lo, self.step)
        if not 0 <= k < self.trajectory.shape[0]:
            raise HorizonError(f"time {t!r} outside bundle range [{self.t_lo!r}, {self.t_hi!r}]")
        return k

    def at(self, t: float) -> np.ndarray:
        return self.trajectory[self.index(t)]

    def u_c_at(self, t: float) -> float:
        if self.u_c is None:
            raise ValueError(f"{self.which} bundle has no u^c component")
        return float(self.u_c[self.index(t)])

    def u_c_window(self, drive, t0: float, t1: float) -> np.ndarray:
        """u^c at the grid times ``t0..t1`` of ``drive`` (any shift of the same base path)."""
        view = as_view(drive)
        base = view.base.identity()
        if base != self.base:
            raise ValueError(f"bundle was built on path {self.base}, drive is {base}")
        shift = view.offset - self.offset
        i0 = self.index(t0 + shift)
        i1 = self.index(t1 + shift)
        return self.u_c[i0 : i1 + 1]

    def to_csv(self, fname) -> None:
        from .integrators import Trajectory

        Trajectory(self.t_lo, self.t_hi, self.step, self.trajectory).to_csv(fname, process=self.which)


def _apply(M, X):
    return rowmat(X, M)


def _window(P, K, dB, n_out, W):
    state = np.zeros((n_out, P.shape[0]))
    for j in range(W):
        state = _apply(P, state) + _apply(K, dB[j : j + n_out])
    return state


def _recursive(P, K, dB, n_out, W):
    if np.count_nonzero(P - np.diag(np.diag(P))) == 0 and np.count_nonzero(K - np.diag(np.diag(K))) == 0 \
            and K.shape[0] == K.shape[1]:
        # diagonal case: one linear filter per coordinate
        out = np.empty((n_out, P.shape[0]))
        for i in range(P.shape[0]):
            y = lfilter([0.0, K[i, i]], [1.0, -P[i, i]], np.append(dB[:, i], 0.0))
            out[:, i] = y[W : W + n_out]
        return out
    state = np.zeros(P.shape[0])
    out = np.empty((n_out, P.shape[0]))
    for j in range(W + n_out - 1):
        if j >= W:
            out[j - W] = state
        state = P @ state + K @ dB[j]
    out[n_out - 1] = state
    return out


def _convolve(A, Sigma, drive, t_lo, t_hi, burn_in, method):
    view = as_view(drive)
    h = view.step
    if t_hi < t_lo:
        raise ValueError(f"need t_lo <= t_hi, got {t_lo!r} > {t_hi!r}")
    W = grid_count(burn_in, h, "burn_in")
    n_out = grid_count(t_hi - t_lo, h, "t_hi - t_lo") + 1
    start = t_lo - W * h
    if not view.covers(start, t_hi):
        raise HorizonError(
            f"OU bundle on [{t_lo!r}, {t_hi!r}] with burn-in {burn_in!r} needs "
            f"T- >= {-(view.offset + start)!r}; path has T- = {view.base.past_horizon!r}"
        )
    dB = view.increments(start, t_hi)
    P = expm(A * h)
    K = P @ Sigma
    if method == "window":
        vals = _window(P, K, dB, n_out, W)
    elif method == "recursive":
        vals = _recursive(P, K, dB, n_out, W)
    else:
        raise ValueError(f"method must be 'window' or 'recursive', got {method!r}")
    return view, vals


def _decay_constants(A):
    eig = np.linalg.eigvals(A)
    rate = -float(np.max(eig.real))
    if rate <= 0:
        raise ValueError(f"OU drift matrix is not stable (eigenvalues {eig})")
    ts = np.linspace(0.0, 40.0 / rate, 801)
    C = max(float(np.linalg.norm(expm(A * t)) * math.exp(rate * t)) for t in ts)
    return rate, C


def ou_z1(A, Sigma, drive, t_lo: float, t_hi: float, burn_in: float | None = None,
          lam: float | None = None, C: float | None = None, method: str = "window",
          which: str = "z1") -> OUBundle:
    """Stationary solution of ``dz = A z dt + Sigma dB`` on ``[t_lo, t_hi]``.

    ``lam`` and ``C`` are the decay constants with ``|exp(A t)| <= C exp(-lam t)``;
    when omitted they are taken from the spectrum of ``A`` and a sampled
    supremum.  They set the default burn-in and the truncation bound.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if Sigma.shape[0] != A.shape[0]:
        raise ValueError(f"Sigma has {Sigma.shape[0]} rows, A is {A.shape}")
    view = as_view(drive)
    if Sigma.shape[1] != view.dim:
        raise ValueError(f"Sigma has {Sigma.shape[1]} columns, path dimension is {view.dim}")
    if lam is None or C is None:
        rate, Cs = _decay_constants(A)
        lam = rate if lam is None else lam
        C = Cs if C is None else C
    if burn_in is None:
        burn_in = default_burn_in(lam, view.step)
    view, vals = _convolve(A, Sigma, view, t_lo, t_hi, burn_in, method)
    prefactor = SIGMAS * C * C * np.linalg.norm(Sigma) / math.sqrt(2 * lam)
    return OUBundle(which, t_lo, t_hi, view.step, view.offset, view.base.identity(), vals, burn_in,
                    prefactor * math.exp(-lam * burn_in))


def ou_z2(Sigma, drive, t_lo: float, t_hi: float, burn_in: float | None = None,
          method: str = "window") -> OUBundle:
    """Stationary solution of ``dz = -z dt + Sigma dB``."""
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    n = Sigma.shape[0]
    return ou_z1(-np.eye(n), Sigma, drive, t_lo, t_hi, burn_in, lam=1.0, C=math.sqrt(n),
                 method=method, which="z2")


def ou_u(drive, c, t_lo: float, t_hi: float, burn_in: float | None = None,
         method: str = "window") -> OUBundle:
    """m independent scalar OU processes ``du_k = -u_k dt + dB_k`` and ``u^c = sum_k c_k u_k``."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    view = as_view(drive)
    if c.shape != (view.dim,):
        raise ValueError(f"need {view.dim} weights c_k, got {c.shape[0]}")
    m = view.dim
    if burn_in is None:
        burn_in = default_burn_in(1.0, view.step)
    view, vals = _convolve(-np.eye(m), np.eye(m), view, t_lo, t_hi, burn_in, method)
    uc = vals[:, 0] * c[0]
    for k in range(1, m):
        uc = uc + vals[:, k] * c[k]
    bound = SIGMAS * float(np.linalg.norm(c)) / math.sqrt(2) * math.exp(-burn_in)
    return OUBundle("u", t_lo, t_hi, view.step, view.offset, view.base.identity(), vals, burn_in,
                    bound, uc, tuple(c.tolist()))


@dataclass(frozen=True)
class ConjugationTransform:
    """``T(theta_t omega, y) = y exp(u^c(theta_t omega))`` read from a bundle."""

    bundle: OUBundle

    def u_c_at(self, t: float) -> float:
        return self.bundle.u_c_at(t)

    def __call__(self, t, y):
        return conjugate(self, t, y)

    def inverse(self, t, x):
        return inverse_conjugate(self, t, x)


def conjugate(transform: ConjugationTransform, t: float, y) -> np.ndarray:
    return np.asarray(y, dtype=float) * math.exp(transform.u_c_at(t))


def inverse_conjugate(transform: ConjugationTransform, t: float, x) -> np.ndarray:
    return np.asarray(x, dtype=float) * math.exp(-transform.u_c_at(t))


def conjugate_pipeline(spec, drive, t0: float, t1: float, x0, burn_in: float | None = None,
                       bundle: OUBundle | None = None, method: str = "window") -> np.ndarray:
    """Solve the Stratonovich system over ``[t0, t1]`` through the random ODE.

    Maps ``x0`` to ``y0 = T^{-1}(t0, x0)``, integrates the random ODE with RK4
    and maps back with ``T(t1, .)``.  ``method`` selects how the OU bundle is
    built when none is passed.
    """
    from .integrators import integrate_random_ode

    view = as_view(drive)
    if bundle is None:
        bundle = ou_u(view, spec.c, t0, t1, burn_in, method)
    T = ConjugationTransform(bundle)
    shift = view.offset - bundle.offset
    y0 = T.inverse(t0 + shift, x0)
    traj = integrate_random_ode(spec, bundle, view, t0, t1, y0)
    if traj.blown_up:
        raise FloatingPointError(f"random ODE blew up at grid index {traj.first_nonfinite}")
    return T(t1 + shift, traj.final)
