"""Time stepping along a frozen noise path.

Every scheme steps on the grid of the driving path and reads its increments
from the path; nothing here draws random numbers.  Integrating over
``[t0, t2]`` therefore performs exactly the same floating point operations
as integrating over ``[t0, t1]`` and restarting from the intermediate state
over ``[t1, t2]``.

Strong orders quoted in docstrings are the usual textbook expectations for
these schemes, verified empirically by :func:`self_convergence`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expm import expm, rowmat
from .noise import HorizonError, ShiftedPathView, as_view, grid_count, refine
from .systems import AdditiveLipschitz, MultiplicativeLipschitz, StratonovichDissipative, SystemSpec

__all__ = [
    "Trajectory",
    "FundamentalMatrixPath",
    "matrix_exponential",
    "em_step",
    "exponential_step",
    "heun_step",
    "rk4_step",
    "integrate_ito",
    "integrate_exponential",
    "integrate_stratonovich",
    "integrate_random_ode",
    "fundamental_matrix",
    "self_convergence",
    "fit_order",
    "ORDER_BANDS",
]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States on the grid ``t0, t0 + step, ..., t1``.

    If the solution left the floating point range, ``blown_up`` is set,
    ``first_nonfinite`` is the grid index where it happened, and ``states``
    stops just before it.
    """

    t0: float
    t1: float
    step: float
    states: np.ndarray = field(repr=False)
    driving: dict = field(default_factory=dict)
    blown_up: bool = False
    first_nonfinite: int | None = None

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.states.shape[0]) * self.step

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, fname, process: str | None = None) -> None:
        """Write ``t, x0, ..., x{n-1}`` rows with 17 significant digits."""
        n = self.states.shape[1]
        with open(fname, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["t"] + [f"x{i}" for i in range(n)]
            w.writerow((["process"] if process else []) + head)
            for t, x in zip(self.times, self.states):
                row = [f"{t:.17g}"] + [f"{v:.17g}" for v in x]
                w.writerow(([process] if process else []) + row)


@dataclass(frozen=True, eq=False)
class FundamentalMatrixPath:
    times: np.ndarray
    matrices: np.ndarray = field(repr=False)
    blown_up: bool = False
    singular_index: int | None = None


def matrix_exponential(A, t: float = 1.0) -> np.ndarray:
    """``exp(A t)`` by scaling and squaring."""
    if not math.isfinite(t):
        raise ValueError(f"non-finite time {t!r}")
    return expm(np.asarray(A, dtype=float) * t)


def _span(drive, t0, t1):
    view = as_view(drive)
    if t1 < t0:
        raise ValueError(f"need t0 <= t1, got {t0!r} > {t1!r}")
    if not view.covers(t0, t1):
        need_past = max(0.0, -(view.offset + t0))
        need_future = max(0.0, view.offset + t1)
        raise HorizonError(
            f"[{t0!r}, {t1!r}] shifted by {view.offset!r} needs T- >= {need_past!r} and "
            f"T+ >= {need_future!r}; path has T- = {view.base.past_horizon!r}, "
            f"T+ = {view.base.future_horizon!r}"
        )
    grid_count(t0, view.step, "t0")
    grid_count(t1, view.step, "t1")
    return view, view.increments(t0, t1)


def _start(spec: SystemSpec, x0) -> np.ndarray:
    x = np.array(x0, dtype=float).reshape(-1)
    if x.shape != (spec.n,):
        raise ValueError(f"initial state has shape {x.shape}, system dimension is {spec.n}")
    return x


def _run(step_fn, x, dB, view, t0, t1):
    states = np.empty((dB.shape[0] + 1, x.shape[0]))
    states[0] = x
    # overflow is detected and flagged below, not warned about
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(dB.shape[0]):
            x = step_fn(x, dB[j], j)
            if not np.all(np.isfinite(x)):
                return Trajectory(t0, t1, view.step, states[: j + 1], view.identity(), True, j + 1)
            states[j + 1] = x
    return Trajectory(t0, t1, view.step, states, view.identity())


def em_step(spec: SystemSpec, h: float):
    """Euler-Maruyama step ``x + b(x) h + noise(x, dB)`` for a state or a batch of states."""
    drift, noise = spec.drift, spec.noise

    def step(x, db):
        return x + drift(x) * h + noise(x, db)

    return step


def exponential_step(spec: AdditiveLipschitz, h: float):
    """Exponential Euler step ``exp(A h) (x + f(x) h + Sigma dB)``."""
    E = matrix_exponential(spec.A, h)
    f, noise = spec.f, spec.noise

    def step(x, db):
        return rowmat(x + f(x) * h + noise(x, db), E)

    return step


def heun_step(spec: StratonovichDissipative, h: float):
    """Stochastic Heun predictor-corrector step."""
    g, noise = spec.drift, spec.noise

    def step(x, db):
        gx, nx = g(x), noise(x, db)
        xp = x + gx * h + nx
        return x + 0.5 * (gx + g(xp)) * h + 0.5 * (nx + noise(xp, db))

    return step


def rk4_step(spec: StratonovichDissipative, h: float):
    """RK4 step of the random ODE between grid values ``ua``, ``ub`` of ``u^c``."""
    g = spec.drift

    def G(u, y):
        e = math.exp(u)
        return g(y * e) / e + y * u

    def step(y, ua, ub):
        um = 0.5 * (ua + ub)
        k1 = G(ua, y)
        k2 = G(um, y + 0.5 * h * k1)
        k3 = G(um, y + 0.5 * h * k2)
        k4 = G(ub, y + h * k3)
        return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return step


def integrate_ito(spec: SystemSpec, drive, t0: float, t1: float, x0) -> Trajectory:
    """Euler-Maruyama for the three Ito classes.

    Strong order 1 for additive noise, 1/2 for multiplicative noise.
    """
    if spec.stratonovich:
        raise TypeError(f"{spec.name} is a Stratonovich system; use integrate_stratonovich")
    view, dB = _span(drive, t0, t1)
    step = em_step(spec, view.step)
    return _run(lambda x, db, j: step(x, db), _start(spec, x0), dB, view, t0, t1)


def integrate_exponential(spec: AdditiveLipschitz, drive, t0: float, t1: float, x0) -> Trajectory:
    """Exponential Euler: ``x <- exp(A h) (x + f(x) h + Sigma dB)``.

    Exact for ``f == 0`` (the discrete stochastic convolution with left-point
    weights), first order otherwise.
    """
    if not isinstance(spec, AdditiveLipschitz):
        raise TypeError("exponential Euler needs an additive system with a linear part")
    view, dB = _span(drive, t0, t1)
    step = exponential_step(spec, view.step)
    return _run(lambda x, db, j: step(x, db), _start(spec, x0), dB, view, t0, t1)


def integrate_stratonovich(spec: StratonovichDissipative, drive, t0: float, t1: float, x0) -> Trajectory:
    """Stochastic Heun scheme, consistent with the Stratonovich integral."""
    if not spec.stratonovich:
        raise TypeError(f"{spec.name} is an Ito system; use integrate_ito")
    view, dB = _span(drive, t0, t1)
    step = heun_step(spec, view.step)
    return _run(lambda x, db, j: step(x, db), _start(spec, x0), dB, view, t0, t1)


def integrate_random_ode(spec: StratonovichDissipative, ou, drive, t0: float, t1: float, y0) -> Trajectory:
    """Classical RK4 for ``dy/dt = exp(-u) g(y exp(u)) + y u`` with ``u = u^c(theta_t omega)``.

    ``u^c`` is read from the bundle on the grid and linearly interpolated at
    half steps, which limits the order to one.
    """
    view, _ = _span(drive, t0, t1)
    if ou.u_c is None:
        raise ValueError("bundle carries no u^c; build it with ou_u")
    uc = ou.u_c_window(view, t0, t1)
    step = rk4_step(spec, view.step)
    steps = np.empty((uc.shape[0] - 1, 0))
    return _run(lambda y, _db, j: step(y, uc[j], uc[j + 1]), _start(spec, y0), steps, view, t0, t1)


def fundamental_matrix(spec, drive, t1: float, t0: float = 0.0) -> FundamentalMatrixPath:
    """Matrix Euler-Maruyama for ``dPsi = A Psi dt + sum_k sigma_k Psi dB_k``, ``Psi(t0) = I``.

    An :class:`AdditiveLipschitz` system is treated as the noise-free case
    ``Psi(t) = exp(A t)``.
    """
    view, dB = _span(drive, t0, t1)
    h = view.step
    A = spec.A
    n = A.shape[0]
    if isinstance(spec, MultiplicativeLipschitz):
        sig = spec._stack
    elif isinstance(spec, AdditiveLipschitz):
        sig = np.zeros((dB.shape[1], n, n))
    else:
        raise TypeError("fundamental_matrix needs a system with a linear part A")
    if sig.shape[0] != dB.shape[1]:
        raise ValueError(f"system has {sig.shape[0]} noise matrices, path has dimension {dB.shape[1]}")
    mats = np.empty((dB.shape[0] + 1, n, n))
    mats[0] = np.eye(n)
    P = mats[0]
    Ah = np.eye(n) + A * h
    for j in range(dB.shape[0]):
        P = (Ah + np.tensordot(dB[j], sig, axes=1)) @ P
        if not np.all(np.isfinite(P)):
            return FundamentalMatrixPath(t0 + np.arange(j + 1) * h, mats[: j + 1], True, None)
        mats[j + 1] = P
    singular = None
    dets = np.linalg.det(mats)
    zero = np.flatnonzero(dets == 0.0)
    if zero.size:
        singular = int(zero[0])
    return FundamentalMatrixPath(t0 + np.arange(mats.shape[0]) * h, mats, False, singular)


# ---------------------------------------------------------------------------
# convergence studies

# fitted strong-order bands per scheme
ORDER_BANDS = {
    "em-additive": (0.8, 1.2),
    "em-multiplicative": (0.3, 0.7),
    "heun": (0.4, math.inf),
    "rk4": (0.7, 1.3),
    "exponential": (0.8, 1.2),
}


def _endpoint(op, spec, view, t0, t1, x0, burn_in):
    if op == "em":
        tr = integrate_ito(spec, view, t0, t1, x0)
    elif op == "exponential":
        tr = integrate_exponential(spec, view, t0, t1, x0)
    elif op == "heun":
        tr = integrate_stratonovich(spec, view, t0, t1, x0)
    elif op == "rk4":
        from .stationary import conjugate_pipeline

        return conjugate_pipeline(spec, view, t0, t1, x0, burn_in=burn_in, method="recursive")
    else:
        raise ValueError(f"unknown integrator {op!r}; choose em, exponential, heun or rk4")
    if tr.blown_up:
        raise FloatingPointError(f"{op} blew up at grid index {tr.first_nonfinite}")
    return tr.final


def self_convergence(op: str, spec: SystemSpec, drive, x0, levels: int = 4, t0: float = 0.0,
                     t1: float = 1.0, extra: int = 4, burn_in: float = 10.0) -> list[tuple[float, float]]:
    """Strong errors at ``levels`` successive refinements against a finer reference.

    ``drive`` may be a single path or a sequence of paths; with several paths
    the error at each level is the root-mean-square over them.  The
    reference solution is computed ``extra`` refinements below the finest
    reported level; since the measured error at step ``h`` behaves like
    ``h - h_ref``, too small an ``extra`` inflates the fitted order.
    """
    if levels < 2 or extra < 1:
        raise ValueError("self_convergence needs levels >= 2 and extra >= 1")
    drives = [drive] if not isinstance(drive, Sequence) else list(drive)
    sq = np.zeros(levels)
    steps = []
    for d in drives:
        view = as_view(d)
        if view.offset != 0.0:
            raise ValueError("self_convergence refines stored paths; pass unshifted paths")
        path = view.base
        ends = []
        for lev in range(levels - 1 + extra):
            if lev < levels:
                ends.append(_endpoint(op, spec, path, t0, t1, x0, burn_in))
                if len(steps) < levels:
                    steps.append(path.step)
            path = refine(path)
        ref = _endpoint(op, spec, path, t0, t1, x0, burn_in)
        sq += np.array([np.sum((e - ref) ** 2) for e in ends])
    err = np.sqrt(sq / len(drives))
    return list(zip(steps, err.tolist()))


def fit_order(results: list[tuple[float, float]]) -> float:
    """Least-squares slope of log error against log step."""
    h = np.log([r[0] for r in results])
    e = np.log([max(r[1], 1e-300) for r in results])
    return float(np.polyfit(h, e, 1)[0])
