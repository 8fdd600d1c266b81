"""Two-sided Brownian paths on a uniform grid.

A path stores the values of an m-dimensional Brownian motion at the grid
times ``-T_minus, ..., 0, ..., T_plus`` with ``omega(0) = 0``.  Random numbers
are drawn in fixed-size blocks whose generator is keyed by
``(seed, refinement level, side, block index)``, so extending either horizon
never changes values that were already generated.  This is what lets a
pullback run go deeper into the past along one fixed realization.

Shifts are views: ``shift(path, t)(s) = omega(t + s) - omega(t)``.  Increments
of a view are always read as differences of the stored base values, never as
differences of shifted values, so that driving an integrator with
``shift(path, -t)`` over ``[0, t]`` consumes bit-identical numbers to driving
it with ``path`` over ``[-t, 0]``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "HorizonError",
    "GridError",
    "TwoSidedWienerPath",
    "ShiftedPathView",
    "sample_path",
    "shift",
    "increment",
    "refine",
    "extend",
    "dump_path",
    "load_path",
    "grid_count",
]

BLOCK = 4096
FORMAT_VERSION = 1
_MAGIC = b"TSWP"
_HEADER = struct.Struct("<4sIqIIdddd")
# side tags for the key of each block stream
_FORWARD, _BACKWARD = 0, 1


class GridError(ValueError):
    """A time or horizon is not an integer multiple of the grid step."""


class HorizonError(ValueError):
    """An evaluation falls outside the stored horizon of a path."""


def grid_count(t: float, step: float, what: str = "time") -> int:
    """Return ``t / step`` as an int, rejecting values off the grid."""
    q = t / step
    k = round(q)
    if abs(q - k) > 1e-9 * max(1.0, abs(q)):
        raise GridError(f"{what} {t!r} is not a multiple of the step {step!r} (ratio {q!r})")
    return int(k)


def _normals(seed: int, level: int, side: int, count: int, dim: int) -> np.ndarray:
    """First ``count`` standard normal rows of the stream keyed by (seed, level, side)."""
    if count == 0:
        return np.empty((0, dim))
    nblocks = -(-count // BLOCK)
    blocks = []
    for b in range(nblocks):
        ss = np.random.SeedSequence([seed & 0xFFFFFFFF, seed >> 32, level, side, b])
        rng = np.random.Generator(np.random.PCG64(ss))
        blocks.append(rng.standard_normal((BLOCK, dim)))
    return np.concatenate(blocks)[:count]


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    return seed


@dataclass(frozen=True, eq=False)
class TwoSidedWienerPath:
    """Sampled two-sided Brownian motion.

    ``values[i]`` is the path at time ``(i - n_past) * step``.  ``level``
    counts how many times the path has been refined from its base step
    ``base_step``; ``step == base_step / 2**level``.
    """

    seed: int
    dim: int
    step: float
    n_past: int
    n_future: int
    values: np.ndarray = field(repr=False)
    level: int = 0
    base_step: float | None = None

    def __post_init__(self):
        if self.base_step is None:
            object.__setattr__(self, "base_step", self.step)
        self.values.setflags(write=False)

    @property
    def past_horizon(self) -> float:
        return self.n_past * self.step

    @property
    def future_horizon(self) -> float:
        return self.n_future * self.step

    @property
    def times(self) -> np.ndarray:
        return np.arange(-self.n_past, self.n_future + 1) * self.step

    def __len__(self) -> int:
        return self.values.shape[0]

    def index(self, t: float) -> int:
        """Array index of grid time ``t``."""
        k = grid_count(t, self.step)
        if not -self.n_past <= k <= self.n_future:
            raise HorizonError(
                f"time {t!r} outside stored horizon [{-self.past_horizon!r}, {self.future_horizon!r}]"
            )
        return k + self.n_past

    def __call__(self, t: float) -> np.ndarray:
        return self.values[self.index(t)]

    def increments(self, t0: float, t1: float) -> np.ndarray:
        """Grid increments ``omega(s_{j+1}) - omega(s_j)`` over ``[t0, t1]``, shape (K, m)."""
        i0, i1 = self.index(t0), self.index(t1)
        if i1 < i0:
            raise ValueError(f"t0={t0!r} > t1={t1!r}")
        return np.diff(self.values[i0 : i1 + 1], axis=0)

    def covers(self, t0: float, t1: float) -> bool:
        return -self.past_horizon - 1e-9 * self.step <= t0 and t1 <= self.future_horizon + 1e-9 * self.step

    def identity(self) -> dict:
        return {"seed": self.seed, "dim": self.dim, "step": self.step, "level": self.level,
                "base_step": self.base_step}


@dataclass(frozen=True)
class ShiftedPathView:
    """The Wiener shift of a stored path by a grid-aligned ``offset``."""

    base: TwoSidedWienerPath
    offset: float

    @property
    def step(self) -> float:
        return self.base.step

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def seed(self) -> int:
        return self.base.seed

    def __call__(self, s: float) -> np.ndarray:
        return self.base(self.offset + s) - self.base(self.offset)

    def increments(self, s0: float, s1: float) -> np.ndarray:
        return self.base.increments(self.offset + s0, self.offset + s1)

    def covers(self, s0: float, s1: float) -> bool:
        return self.base.covers(self.offset + s0, self.offset + s1)

    def shift(self, t: float) -> "ShiftedPathView":
        return shift(self, t)

    @property
    def past_horizon(self) -> float:
        return self.base.past_horizon + self.offset

    @property
    def future_horizon(self) -> float:
        return self.base.future_horizon - self.offset

    def identity(self) -> dict:
        return {**self.base.identity(), "offset": self.offset}


def as_view(drive) -> ShiftedPathView:
    """Wrap a bare path as the zero shift; pass views through."""
    if isinstance(drive, ShiftedPathView):
        return drive
    if isinstance(drive, TwoSidedWienerPath):
        return ShiftedPathView(drive, 0.0)
    raise TypeError(f"expected a path or a shifted view, got {type(drive).__name__}")


def _build_values(seed, dim, step, n_past, n_future, level):
    dt = np.sqrt(step)
    base_step = step * 2**level
    if level == 0:
        fwd = _normals(seed, 0, _FORWARD, n_future, dim) * dt
        bwd = _normals(seed, 0, _BACKWARD, n_past, dim) * dt
        values = np.empty((n_past + n_future + 1, dim))
        values[n_past] = 0.0
        values[n_past + 1 :] = np.cumsum(fwd, axis=0)
        # backward increments run outward from 0: omega(-k h) = -(dV_0 + ... + dV_{k-1})
        values[:n_past] = -np.cumsum(bwd, axis=0)[::-1]
        return values
    coarse = _build_values(seed, dim, 2 * step, -(-n_past // 2), -(-n_future // 2), level - 1)
    fine = _bridge(coarse, -(-n_past // 2), seed, level, 2 * step, dim)
    np2 = 2 * (-(-n_past // 2))
    return fine[np2 - n_past : np2 + n_future + 1]


def _bridge(coarse, n_past_coarse, seed, level, coarse_step, dim):
    """Insert Brownian-bridge midpoints between neighbouring coarse values."""
    n = coarse.shape[0]
    n_future_coarse = n - 1 - n_past_coarse
    # midpoint j (j >= 0) sits in [j H, (j+1) H]; backward midpoint j in [-(j+1) H, -j H]
    zf = _normals(seed, level, _FORWARD, n_future_coarse, dim)
    zb = _normals(seed, level, _BACKWARD, n_past_coarse, dim)
    z = np.concatenate([zb[::-1], zf])
    sd = np.sqrt(coarse_step / 4.0)
    mids = 0.5 * (coarse[:-1] + coarse[1:]) + sd * z
    fine = np.empty((2 * n - 1, dim))
    fine[0::2] = coarse
    fine[1::2] = mids
    return fine


def sample_path(seed: int, past_horizon: float, future_horizon: float, step: float,
                dim: int = 1) -> TwoSidedWienerPath:
    """Sample a two-sided Brownian path with ``omega(0) = 0``.

    Both horizons must be integer multiples of ``step``.  The result depends
    only on ``seed``, ``step`` and ``dim``; a longer horizon reproduces the
    shorter one on the shared grid exactly.
    """
    if not step > 0 or not np.isfinite(step):
        raise ValueError(f"step must be positive and finite, got {step!r}")
    if past_horizon < 0 or future_horizon < 0:
        raise ValueError("horizons must be nonnegative")
    if past_horizon == 0 and future_horizon == 0:
        raise ValueError("at least one horizon must be positive")
    if int(dim) < 1:
        raise ValueError(f"dim must be a positive integer, got {dim!r}")
    seed = _check_seed(seed)
    n_past = grid_count(past_horizon, step, "past_horizon")
    n_future = grid_count(future_horizon, step, "future_horizon")
    values = _build_values(seed, int(dim), float(step), n_past, n_future, 0)
    return TwoSidedWienerPath(seed, int(dim), float(step), n_past, n_future, values)


def extend(path: TwoSidedWienerPath, past_horizon: float | None = None,
           future_horizon: float | None = None) -> TwoSidedWienerPath:
    """Regenerate ``path`` on a larger horizon; stored values are unchanged."""
    past = path.past_horizon if past_horizon is None else max(past_horizon, path.past_horizon)
    future = path.future_horizon if future_horizon is None else max(future_horizon, path.future_horizon)
    n_past = grid_count(past, path.step, "past_horizon")
    n_future = grid_count(future, path.step, "future_horizon")
    values = _build_values(path.seed, path.dim, path.step, n_past, n_future, path.level)
    return TwoSidedWienerPath(path.seed, path.dim, path.step, n_past, n_future, values,
                              path.level, path.base_step)


def refine(path: TwoSidedWienerPath) -> TwoSidedWienerPath:
    """Halve the step, filling midpoints by Brownian-bridge sampling.

    Midpoint noise is keyed to ``(seed, level + 1)``, so refining the same
    path twice gives identical results and the old grid values are kept
    bit for bit.
    """
    level = path.level + 1
    fine = _bridge(path.values, path.n_past, path.seed, level, path.step, path.dim)
    return TwoSidedWienerPath(path.seed, path.dim, path.step / 2.0, 2 * path.n_past,
                              2 * path.n_future, fine, level, path.base_step)


def shift(path, t: float) -> ShiftedPathView:
    """Wiener shift ``theta_t``; composes additively on views."""
    if isinstance(path, ShiftedPathView):
        base, offset = path.base, path.offset
    else:
        base, offset = path, 0.0
    grid_count(t, base.step, "shift")
    new = offset + t
    # keep offsets on the exact grid so composition order cannot matter
    return ShiftedPathView(base, grid_count(new, base.step, "shift") * base.step)


def increment(path, s: float, t: float) -> np.ndarray:
    """``omega(t) - omega(s)`` for grid times ``s <= t``."""
    if s > t:
        raise ValueError(f"increment needs s <= t, got s={s!r}, t={t!r}")
    if isinstance(path, ShiftedPathView):
        return path.base(path.offset + t) - path.base(path.offset + s)
    return path(t) - path(s)


def dump_path(path: TwoSidedWienerPath, fname) -> None:
    """Write a path as a fixed little-endian header followed by row-major float64 values."""
    header = _HEADER.pack(_MAGIC, FORMAT_VERSION, path.seed, path.dim, path.level, path.step,
                          path.past_horizon, path.future_horizon, path.base_step)
    with open(fname, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(path.values, dtype="<f8").tobytes())


def load_path(fname) -> TwoSidedWienerPath:
    data = Path(fname).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{fname}: truncated header")
    magic, version, seed, dim, level, step, past, future, base_step = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValueError(f"{fname}: not a path file (bad magic {magic!r})")
    if version != FORMAT_VERSION:
        raise ValueError(f"{fname}: unsupported format version {version}")
    n_past = grid_count(past, step, "past_horizon")
    n_future = grid_count(future, step, "future_horizon")
    count = (n_past + n_future + 1) * dim
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if values.size != count:
        raise ValueError(f"{fname}: expected {count} values, found {values.size}")
    values = values.astype(np.float64).reshape(n_past + n_future + 1, dim)
    return TwoSidedWienerPath(seed, dim, step, n_past, n_future, values, level, base_step)
