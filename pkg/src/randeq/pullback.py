"""Pullback trajectories, random equilibria and numerical hypothesis checks.

The pullback state ``phi(t, theta_{-t} omega, x)`` is the solution started at
time ``-t`` in ``x`` and observed at time ``0``, always along one stored
path ``omega``.  As ``t`` grows it converges to the random equilibrium
``U(omega)`` when the system contracts (``verify_h1``) and its distance from
``x`` grows subexponentially (``verify_h2``).

Everything here works on sampled realizations and finite horizons, so a
passing check means "consistent with the hypothesis on this path", never a
proof.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .integrators import (em_step, exponential_step, heun_step, integrate_exponential, integrate_ito,
                          integrate_stratonovich, rk4_step)
from .noise import HorizonError, ShiftedPathView, as_view, grid_count, shift
from .stationary import OUBundle, conjugate_pipeline, ou_u
from .systems import (AdditiveDissipative, AdditiveLipschitz, MultiplicativeLipschitz,
                      StratonovichDissipative, SystemSpec)

__all__ = [
    "BlowUpError",
    "PullbackRun",
    "RateFit",
    "TemperednessReport",
    "EquilibriumEstimate",
    "contraction_rates",
    "default_schedule",
    "pullback_state",
    "pullback_states",
    "estimate_equilibrium",
    "equilibrium",
    "verify_h1",
    "verify_h2",
    "verify_invariance",
    "verify_uniqueness",
    "birkhoff_average",
    "bound_check",
    "lyapunov_check",
    "top_lyapunov",
    "IIDStream",
    "affine_map",
    "discrete_pullback",
    "fit_log_linear",
]

UNDERFLOW = 1e-300
# separations below this fraction of the state size are rounding noise
PRECISION_FLOOR = 1e-12


class BlowUpError(FloatingPointError):
    """The solution left the floating point range; carries the partial trajectory."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


def _methods(spec: SystemSpec) -> tuple[str, ...]:
    if isinstance(spec, StratonovichDissipative):
        return ("heun", "conjugate")
    if isinstance(spec, AdditiveLipschitz):
        return ("em", "exponential")
    return ("em",)


def _solve(spec, drive, t0, t1, x, method=None, burn_in=None):
    """Terminal state of the solution on ``[t0, t1]`` of ``drive``."""
    method = _check_method(spec, method)
    if method == "conjugate":
        return conjugate_pipeline(spec, drive, t0, t1, x, burn_in=burn_in)
    if method == "heun":
        tr = integrate_stratonovich(spec, drive, t0, t1, x)
    elif method == "exponential":
        tr = integrate_exponential(spec, drive, t0, t1, x)
    else:
        tr = integrate_ito(spec, drive, t0, t1, x)
    if tr.blown_up:
        raise BlowUpError(f"{spec.name}: solution from t={t0!r} blew up at grid index {tr.first_nonfinite}", tr)
    return tr.final


def _check_method(spec, method):
    method = method or _methods(spec)[0]
    if method not in _methods(spec):
        raise ValueError(f"method {method!r} not available for {spec.kind}; use one of {_methods(spec)}")
    return method


def pullback_states(spec: SystemSpec, path, xs, depths: Sequence[float], method: str | None = None,
                    end: float = 0.0, burn_in: float | None = None) -> np.ndarray:
    """Pullback states for every depth and every initial point in one sweep.

    Returns an array of shape ``(len(depths), len(xs), n)`` whose entry
    ``[d, p]`` is ``phi(depths[d], theta_{end - depths[d]} omega, xs[p])``.
    All runs advance together along the path; each starts when the sweep
    reaches its own start time.  Rows use position-independent arithmetic,
    so every entry equals the corresponding single run bit for bit.
    """
    method = _check_method(spec, method)
    view = as_view(path)
    h = view.step
    xs = np.array([np.asarray(x, dtype=float).reshape(-1) for x in xs])
    if xs.ndim != 2 or xs.shape[1] != spec.n:
        raise ValueError(f"initial points must have dimension {spec.n}")
    depths = [float(t) for t in depths]
    if any(t < 0 for t in depths):
        raise ValueError("pullback depths must be nonnegative")
    ks = np.array([grid_count(t, h, "pullback depth") for t in depths], dtype=int)
    K = int(ks.max()) if ks.size else 0
    T = K * h
    if not view.covers(end - T, end):
        raise HorizonError(f"pullback of depth {T!r} ending at {end!r} needs T- >= "
                           f"{-(view.offset + end - T)!r}; path has T- = {view.base.past_horizon!r}")
    order = np.argsort(-ks, kind="stable")
    P = xs.shape[0]
    X = np.repeat(xs[None], len(depths), axis=0)[order].reshape(-1, spec.n).copy()
    # run r becomes active at sweep step K - ks[order[r // P]]
    begin = np.repeat(K - ks[order], P)
    dB = view.increments(end - T, end) if K else np.empty((0, view.dim))
    if method == "conjugate":
        bundle = ou_u(view, spec.c, end - T, end, burn_in)
        uc = bundle.u_c
        step = rk4_step(spec, h)
        for r in range(X.shape[0]):
            X[r] = X[r] * math.exp(-uc[begin[r]])
    else:
        step = {"em": em_step, "exponential": exponential_step, "heun": heun_step}[method](spec, h)
    with np.errstate(over="ignore", invalid="ignore"):
        _sweep(X, begin, K, step, uc if method == "conjugate" else None, dB, spec, depths, order, P, xs, end - T, h)
    if method == "conjugate" and K:
        X = X * math.exp(uc[K])
    out = np.empty((len(depths), P, spec.n))
    out[order] = X.reshape(len(depths), P, spec.n)
    return out


def _sweep(X, begin, K, step, uc, dB, spec, depths, order, P, xs, t_start, h):
    active = 0
    for j in range(K):
        while active < X.shape[0] and begin[active] <= j:
            active += 1
        if uc is not None:
            X[:active] = step(X[:active], uc[j], uc[j + 1])
        else:
            X[:active] = step(X[:active], dB[j])
        if not np.all(np.isfinite(X[:active])):
            bad = int(np.flatnonzero(~np.all(np.isfinite(X[:active]), axis=1))[0])
            raise BlowUpError(f"{spec.name}: pullback of depth {depths[order[bad // P]]!r} from "
                              f"{xs[bad % P].tolist()} blew up at t={t_start + (j + 1) * h:g}")


def pullback_state(spec: SystemSpec, path, x, t: float, method: str | None = None,
                   end: float = 0.0, burn_in: float | None = None) -> np.ndarray:
    """``phi(t, theta_{end - t} omega, x)``: start at ``end - t`` in ``x``, observe at ``end``.

    Identical, bit for bit, to integrating over ``[0, t]`` driven by
    ``shift(path, end - t)``.
    """
    return pullback_states(spec, path, [x], [t], method, end, burn_in)[0, 0]


def default_schedule(t_max: float, step: float, t0: float = 1.0, rho: float = 1.3) -> list[float]:
    """Geometric pullback depths ``t0 * rho**k`` rounded to the grid, capped at ``t_max``."""
    out = []
    t = t0
    while t <= t_max + 1e-12:
        k = max(1, round(t / step))
        v = k * step
        if not out or v > out[-1]:
            out.append(v)
        t *= rho
    return out


def fit_log_linear(t, v) -> tuple[float, float, float]:
    """Least-squares fit ``log v = intercept + slope * t``; returns (slope, intercept, r^2)."""
    t = np.asarray(t, dtype=float)
    y = np.log(np.asarray(v, dtype=float))
    if t.size < 2:
        return float("nan"), float("nan"), float("nan")
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (intercept + slope * t)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return float(slope), float(intercept), float(r2)


# ---------------------------------------------------------------------------
# rates


def contraction_rates(spec: SystemSpec, eps0: float | None = None, eps2: float | None = None) -> dict:
    """Guaranteed and nominal contraction rates of a system class.

    ``predicted`` is the exponent the contraction estimate guarantees (after
    the margins ``eps0``/``eps2`` for the two noise-multiplied classes);
    ``nominal`` is the rate before any margin is taken.
    """
    if isinstance(spec, AdditiveLipschitz):
        r = spec.lam - spec.L * spec.C
        return {"predicted": r, "nominal": r, "provenance": "lambda - L*C", "eps0": None, "eps2": None}
    if isinstance(spec, AdditiveDissipative):
        return {"predicted": spec.L, "nominal": spec.L, "provenance": "L", "eps0": None, "eps2": None}
    if isinstance(spec, MultiplicativeLipschitz):
        gap = spec.lam - spec.L * spec.Rbar_L1
        e0 = gap / 4 if eps0 is None else eps0
        if not 0 < e0 < gap / 2:
            raise ValueError(f"eps0 must lie in (0, {gap / 2!r}), got {e0!r}")
        return {"predicted": e0, "nominal": gap, "provenance": "eps0 margin, eps0 < (lambda - L*|Rbar|)/2",
                "eps0": e0, "eps2": None}
    if isinstance(spec, StratonovichDissipative):
        e2 = spec.L / 2 if eps2 is None else eps2
        if not 0 < e2 < spec.L:
            raise ValueError(f"eps2 must lie in (0, {spec.L!r}), got {e2!r}")
        return {"predicted": spec.L - e2, "nominal": spec.L, "provenance": "L - eps2", "eps0": None, "eps2": e2}
    raise TypeError(f"unknown system class {type(spec).__name__}")


# ---------------------------------------------------------------------------
# result types


@dataclass
class PullbackRun:
    spec: str
    seed: int
    initial: list
    schedule: list
    states: list
    cauchy_residuals: list
    distances: list
    equilibrium: list
    converged: bool
    tol: float
    envelope_slope: float
    envelope_r2: float
    note: str = ""

    def to_dict(self):
        return asdict(self)


@dataclass
class RateFit:
    window: tuple
    slope: float
    prefactor: float
    r_squared: float
    predicted_rate: float
    nominal_rate: float
    provenance: str
    eps0: float | None
    eps2: float | None
    schedule: list = field(default_factory=list)
    separations: list = field(default_factory=list)
    note: str = ""

    @property
    def decay_rate(self) -> float:
        return -self.slope

    def passed(self, slack: float = 0.1) -> bool:
        """Observed decay at least ``(1 - slack)`` times the guaranteed rate."""
        return math.isfinite(self.slope) and self.decay_rate >= (1 - slack) * self.predicted_rate

    def to_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        d["passed"] = self.passed()
        return d


@dataclass
class TemperednessReport:
    quantity: str
    gamma_grid: list
    sup_stats: list
    growth_exponent: float
    lambda0: float
    schedule: list
    values: list
    blown_up: bool = False
    note: str = ""

    @property
    def passed(self) -> bool:
        return (not self.blown_up and math.isfinite(self.growth_exponent)
                and self.growth_exponent < self.lambda0 and all(map(math.isfinite, self.sup_stats)))

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


@dataclass
class EquilibriumEstimate:
    value: list
    seed: int
    depth: float
    initial: list
    invariance_residuals: list = field(default_factory=list)
    uniqueness_spread: float = 0.0
    initial_diameter: float = 0.0
    bound_check: dict | None = None
    note: str = ""

    @property
    def relative_spread(self) -> float:
        return self.uniqueness_spread / self.initial_diameter if self.initial_diameter > 0 else 0.0

    def to_dict(self):
        d = asdict(self)
        d["relative_spread"] = self.relative_spread
        return d


def log_envelope(t, r) -> np.ndarray:
    """Least concave majorant of ``log r`` against ``t``, evaluated at ``t``.

    Zero residuals are skipped when building the hull; ``-inf`` is returned
    if every residual is zero.
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    pos = r > 0
    if not pos.any():
        return np.full(t.shape, -math.inf)
    pt, py = t[pos], np.log(r[pos])
    hull = []
    for p in zip(pt, py):
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point if it lies on or below the chord
            if (y2 - y1) * (p[0] - x1) <= (p[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(p)
    hx, hy = zip(*hull)
    return np.interp(t, hx, hy)


def _envelope_fit(t, res, tol, fit_points, min_r2):
    """Converged flag and log-linear fit of the residual envelope over the last points."""
    if len(res) < 2:
        return False, math.nan, math.nan, "fewer than two residuals"
    res = np.asarray(res, dtype=float)
    if np.all(res[-fit_points:] == 0):
        return True, -math.inf, 1.0, "residuals exactly zero"
    env = log_envelope(t, res)[-fit_points:]
    tt = np.asarray(t, dtype=float)[-fit_points:]
    slope, _, r2 = fit_log_linear(tt, np.exp(env))
    converged = bool(res[-1] < tol and slope < 0 and r2 >= min_r2)
    return converged, slope, r2, ""


def _norm(v) -> float:
    return float(np.linalg.norm(v))


# ---------------------------------------------------------------------------
# operations


def estimate_equilibrium(spec: SystemSpec, path, x, schedule: Sequence[float] | None = None,
                         tol: float = 1e-6, method: str | None = None, fit_points: int = 5,
                         min_r2: float = 0.9) -> PullbackRun:
    """Pullback states along ``schedule`` and their Cauchy residuals.

    ``converged`` requires the last residual below ``tol`` and a decaying
    exponential fit (negative slope, ``r^2 >= min_r2``) to the last
    ``fit_points`` values of the residual envelope (:func:`log_envelope`).
    The envelope ignores lucky dips but always passes through the last
    residual, so a single coincidentally small value does not pass.
    """
    view = as_view(path)
    if schedule is None:
        schedule = default_schedule(view.past_horizon, view.step)
    schedule = [float(t) for t in schedule]
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing")
    x = np.array(x, dtype=float).reshape(-1)
    states = list(pullback_states(spec, view, [x], schedule, method)[:, 0])
    res = [_norm(b - a) for a, b in zip(states, states[1:])]
    dists = [_norm(s - x) for s in states]
    converged, slope, r2, note = _envelope_fit(schedule[1:], res, tol, fit_points, min_r2)
    return PullbackRun(spec.name, view.seed, x.tolist(), schedule, [s.tolist() for s in states], res, dists,
                       states[-1].tolist(), bool(converged), tol, slope, r2, note)


def verify_h1(spec: SystemSpec, path, x, y, schedule: Sequence[float] | None = None,
              transient: float = 1.0, method: str | None = None, eps0: float | None = None,
              eps2: float | None = None) -> RateFit:
    """Fit the exponential decay of pullback separations ``|phi(t, theta_{-t} omega, x) - phi(..., y)|``.

    Points with ``t < transient`` are ignored, as are separations below
    ``1e-300`` or below ``1e-12`` times the state size (rounding floor);
    dropping points is recorded in ``note``.
    """
    x = np.array(x, dtype=float).reshape(-1)
    y = np.array(y, dtype=float).reshape(-1)
    if np.array_equal(x, y):
        raise ValueError("verify_h1 needs two distinct initial points")
    view = as_view(path)
    if schedule is None:
        schedule = default_schedule(view.past_horizon, view.step)
    schedule = [float(t) for t in schedule]
    seps, keep, notes = [], [], []
    both = pullback_states(spec, view, [x, y], schedule, method)
    for t, (a, b) in zip(schedule, both):
        d = _norm(a - b)
        seps.append(d)
        if t < transient:
            continue
        if d < UNDERFLOW:
            notes.append(f"separation underflow at t={t:g}; window truncated")
            break
        if d < PRECISION_FLOOR * max(1.0, _norm(a), _norm(b)):
            notes.append(f"separation at rounding floor at t={t:g}; window truncated")
            break
        keep.append((t, d))
    rates = contraction_rates(spec, eps0, eps2)
    if len(keep) < 5:
        notes.append(f"only {len(keep)} points in fit window")
    if len(keep) >= 2:
        ts, ds = zip(*keep)
        slope, intercept, r2 = fit_log_linear(ts, ds)
        window = (ts[0], ts[-1])
    else:
        slope, intercept, r2, window = float("nan"), float("nan"), float("nan"), (math.nan, math.nan)
    return RateFit(window, slope, math.exp(intercept) if math.isfinite(intercept) else math.nan, r2,
                   rates["predicted"], rates["nominal"], rates["provenance"], rates["eps0"], rates["eps2"],
                   schedule, seps, "; ".join(notes))


def verify_h2(spec: SystemSpec, path, x, schedule: Sequence[float] | None = None,
              gamma_grid: Sequence[float] | None = None, lambda0: float | None = None,
              method: str | None = None) -> TemperednessReport:
    """Growth of ``R_x(t) = |phi(t, theta_{-t} omega, x) - x|`` along the schedule.

    ``growth_exponent`` is the fitted slope of the log running maximum of
    ``R_x`` against ``t``; the check passes if it stays below ``lambda0``
    (default: half the guaranteed contraction rate).
    """
    rate = contraction_rates(spec)["predicted"]
    lambda0 = rate / 2 if lambda0 is None else float(lambda0)
    if gamma_grid is None:
        gamma_grid = sorted({lambda0, 0.01, 0.1, 0.5, 1.0})
    gamma_grid = sorted(float(g) for g in gamma_grid)
    if any(g <= 0 for g in gamma_grid):
        raise ValueError("gamma grid must be positive")
    view = as_view(path)
    if schedule is None:
        schedule = default_schedule(view.past_horizon, view.step)
    schedule = [float(t) for t in schedule]
    x = np.array(x, dtype=float).reshape(-1)
    vals, note = [], ""
    blown = False
    try:
        vals = [_norm(u - x) for u in pullback_states(spec, view, [x], schedule, method)[:, 0]]
    except BlowUpError:
        # redo depth by depth to keep the values before the blow-up
        for t in schedule:
            try:
                vals.append(_norm(pullback_state(spec, view, x, t, method) - x))
            except BlowUpError as exc:
                blown, note = True, str(exc)
                break
    ts = np.array(schedule[: len(vals)])
    v = np.array(vals)
    if blown:
        sup = [math.inf] * len(gamma_grid)
        growth = math.inf
    else:
        sup = [float(np.max(np.exp(-g * ts) * v)) for g in gamma_grid]
        run = np.maximum.accumulate(v)
        pos = run > 0
        growth = fit_log_linear(ts[pos], run[pos])[0] if pos.sum() >= 2 else 0.0
    return TemperednessReport("R_x", gamma_grid, sup, float(growth), lambda0, schedule, vals, blown, note)


def equilibrium(spec: SystemSpec, path, x, T: float, method: str | None = None,
                end: float = 0.0) -> EquilibriumEstimate:
    """Depth-``T`` pullback estimate of ``U(theta_end omega)``."""
    view = as_view(path)
    x = np.array(x, dtype=float).reshape(-1)
    u = pullback_state(spec, view, x, T, method, end)
    return EquilibriumEstimate(u.tolist(), view.seed, T, x.tolist())


def verify_invariance(spec: SystemSpec, path, est: EquilibriumEstimate, s_values: Sequence[float],
                      method: str | None = None) -> EquilibriumEstimate:
    """Residuals ``|phi(s, omega, U(omega)) - U(theta_s omega)|``.

    ``U(theta_s omega)`` is re-estimated by a fresh pullback of the same depth
    ending at ``s``, never by pushing ``U(omega)`` forward.
    """
    view = as_view(path)
    u = np.array(est.value, dtype=float)
    for s in s_values:
        s = float(s)
        if s < 0:
            raise ValueError("invariance times must be nonnegative")
        if not view.covers(s - est.depth, s):
            raise HorizonError(f"invariance at s={s!r} needs the path to cover [{s - est.depth!r}, {s!r}]")
        pushed = u if s == 0 else _solve(spec, view, 0.0, s, u, method)
        repulled = pullback_state(spec, view, est.initial, est.depth, method, end=s)
        est.invariance_residuals.append((s, _norm(pushed - repulled)))
    return est


def verify_uniqueness(spec: SystemSpec, path, xs: Sequence, T: float, tol: float = 1e-6,
                      method: str | None = None, relative: bool = False) -> tuple[EquilibriumEstimate, bool]:
    """Largest pairwise distance between depth-``T`` pullback limits of several starts.

    With ``relative=True`` the spread is compared with ``tol`` times the
    diameter of the initial set.  Returns the estimate and the verdict.
    """
    pts = [np.array(p, dtype=float).reshape(-1) for p in xs]
    if len(pts) < 2:
        raise ValueError("verify_uniqueness needs at least two initial points")
    view = as_view(path)
    try:
        limits = list(pullback_states(spec, view, pts, [T], method)[0])
    except BlowUpError as exc:
        est = EquilibriumEstimate([], view.seed, T, pts[0].tolist(), note=str(exc))
        est.uniqueness_spread = math.inf
        return est, False
    spread = max(_norm(a - b) for i, a in enumerate(limits) for b in limits[i + 1:])
    diam = max(_norm(a - b) for i, a in enumerate(pts) for b in pts[i + 1:])
    est = EquilibriumEstimate(limits[0].tolist(), view.seed, T, pts[0].tolist(),
                              uniqueness_spread=spread, initial_diameter=diam)
    limit = tol * diam if relative else tol
    return est, bool(spread < limit) if diam > 0 or not relative else True


def bound_check(run: PullbackRun, tol: float = 0.0) -> dict:
    """Compare ``d(U, x)`` with the sup of the measured ``R_x(t)`` over the run's schedule."""
    u = np.asarray(run.equilibrium, dtype=float)
    x = np.asarray(run.initial, dtype=float)
    d = _norm(u - x)
    sup = max(run.distances)
    return {"distance": d, "sup_R_x": sup, "tol": tol, "holds": bool(d <= sup + tol)}


def lyapunov_check(spec: SystemSpec, estimate: float, band: float = 0.05) -> dict:
    """Sign check ``lambda_top <= -lambda + band`` against the declared decay rate."""
    lam = float(spec.lam)
    return {"estimate": float(estimate), "declared_lambda": lam, "band": band,
            "holds": bool(math.isfinite(estimate) and estimate <= -lam + band)}


def birkhoff_average(bundle: OUBundle, t: float) -> float:
    """Trapezoid time average ``(1/t) int_{-t}^0 u^c ds`` of a bundle."""
    if t <= 0:
        raise ValueError("averaging time must be positive")
    if bundle.u_c is None:
        raise ValueError(f"{bundle.which} bundle carries no u^c")
    i0, i1 = bundle.index(-t), bundle.index(0.0)
    vals = bundle.u_c[i0 : i1 + 1]
    h = bundle.step
    return float(h * (vals.sum() - 0.5 * (vals[0] + vals[-1])) / t)


def _lyapunov_one(spec, drive, T, renorm):
    view = as_view(drive)
    A = spec.A
    n = A.shape[0]
    if isinstance(spec, MultiplicativeLipschitz):
        sig = spec._stack
    else:
        sig = np.zeros((view.dim, n, n))
    dB = view.increments(0.0, T)
    h = view.step
    per = grid_count(renorm, h, "renormalization interval")
    if n == 1:
        factors = 1.0 + A[0, 0] * h + dB @ sig[:, 0, 0]
        total = 0.0
        for k in range(0, factors.size, per):
            total += float(np.sum(np.log(np.abs(factors[k : k + per]))))
        return total / T
    Ah = np.eye(n) + A * h
    # unit Frobenius norm at t = 0 so that log |X(0)| contributes nothing
    X = np.eye(n) / math.sqrt(n)
    total = 0.0
    for j in range(dB.shape[0]):
        X = (Ah + np.tensordot(dB[j], sig, axes=1)) @ X
        if (j + 1) % per == 0 or j == dB.shape[0] - 1:
            nrm = np.linalg.norm(X)
            if not math.isfinite(nrm) or nrm == 0:
                raise FloatingPointError(f"fundamental matrix norm {nrm!r} at t={(j + 1) * h:g} "
                                         f"despite renormalization every {renorm:g}")
            total += math.log(nrm)
            X = X / nrm
    return total / T


def top_lyapunov(spec: SystemSpec, paths, T: float = 100.0, renorm: float = 1.0) -> float:
    """Top Lyapunov exponent of the linear part, averaged over paths.

    The fundamental matrix is propagated by matrix Euler-Maruyama on
    ``[0, T]`` and rescaled to unit Frobenius norm every ``renorm`` time
    units; the exponent is the summed log growth divided by ``T``.
    """
    if not isinstance(spec, (MultiplicativeLipschitz, AdditiveLipschitz)):
        raise TypeError("top_lyapunov needs a system with a linear part")
    if isinstance(paths, (ShiftedPathView,)) or not isinstance(paths, Sequence):
        paths = [paths]
    return float(np.mean([_lyapunov_one(spec, p, T, renorm) for p in paths]))


# ---------------------------------------------------------------------------
# discrete time


class IIDStream:
    """Two-sided iid standard normal sequence ``xi(theta_k omega)``, ``k`` in Z, keyed by seed."""

    def __init__(self, seed: int, dim: int = 1):
        self.seed = int(seed)
        self.dim = int(dim)

    def __call__(self, k: int) -> np.ndarray:
        return self.window(k, k + 1)[0]

    def window(self, k0: int, k1: int) -> np.ndarray:
        """Samples for ``k0 <= k < k1``."""
        from .noise import _normals

        out = np.empty((k1 - k0, self.dim))
        if k1 > 0:
            lo = max(k0, 0)
            out[lo - k0 :] = _normals(self.seed, 0, 2, k1, self.dim)[lo:]
        if k0 < 0:
            hi = min(k1, 0)
            neg = _normals(self.seed, 0, 3, -k0, self.dim)  # index j holds k = -(j + 1)
            ks = np.arange(k0, hi)
            out[: hi - k0] = neg[-ks - 1]
        return out


class PathIncrements:
    """``xi(theta_k omega) = omega(k + 1) - omega(k)`` read from a stored path."""

    def __init__(self, path):
        self.view = as_view(path)
        self.seed = self.view.seed

    def __call__(self, k: int) -> np.ndarray:
        return self.view(k + 1.0) - self.view(float(k))

    def window(self, k0, k1):
        return np.array([self(k) for k in range(k0, k1)])


def affine_map(a, name: str = "affine") -> Callable:
    """Random affine map ``x -> a x + xi``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))

    def F(xi, x):
        return a @ x + xi

    F.__name__ = name
    return F


def discrete_pullback(F: Callable, noise, x, n: int, tol: float = 1e-10) -> PullbackRun:
    """Pullback iteration ``x_{j+1} = F(xi(theta_{-n+j} omega), x_j)`` for depths ``1..n``.

    ``noise`` is an :class:`IIDStream`, :class:`PathIncrements`, or a stored path.
    """
    if n < 1:
        raise ValueError("need at least one step")
    if not isinstance(noise, (IIDStream, PathIncrements)):
        noise = PathIncrements(noise)
    x = np.array(x, dtype=float).reshape(-1)
    xis = noise.window(-n, 0)  # row i is k = -n + i
    states = []
    for depth in range(1, n + 1):
        z = x
        for k in range(-depth, 0):
            z = np.asarray(F(xis[k + n], z), dtype=float)
        if not np.all(np.isfinite(z)):
            raise BlowUpError(f"discrete pullback of depth {depth} left the floating point range")
        states.append(z)
    res = [_norm(b - a) for a, b in zip(states, states[1:])]
    converged, slope, r2, note = _envelope_fit(np.arange(2, n + 1), res, tol, 5, 0.9)
    return PullbackRun(getattr(F, "__name__", "map"), getattr(noise, "seed", -1), x.tolist(),
                       list(range(1, n + 1)), [s.tolist() for s in states], res,
                       [_norm(s - x) for s in states], states[-1].tolist(), converged, tol, slope, r2, note)
