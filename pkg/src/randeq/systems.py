"""The four SDE classes, their hypothesis constants, and a preset catalog.

=========================  ==================================================
class                      equation
=========================  ==================================================
``AdditiveLipschitz``      dx = (A x + f(x)) dt + Sigma dB
``AdditiveDissipative``    dx = g(x) dt + Sigma dB
``MultiplicativeLipschitz`` dx = (A x + h(x)) dt + sum_k sigma_k x dB_k
``StratonovichDissipative`` dx = g(x) dt + sum_k c_k x o dB_k
=========================  ==================================================

The first three are Ito equations, the last is Stratonovich.  Functional
hypotheses (Lipschitz bounds, one-sided dissipativity, polynomial growth)
cannot be proved numerically; :func:`validate_spec` tries to falsify them by
sampling and reports ``"pass"`` only in the sense of *not falsified*.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .expm import expm, rowmat
from .expr import compile_field

__all__ = [
    "SystemSpec",
    "AdditiveLipschitz",
    "AdditiveDissipative",
    "MultiplicativeLipschitz",
    "StratonovichDissipative",
    "HypothesisReport",
    "Named",
    "validate_spec",
    "drift_eval",
    "diffusion_eval",
    "preset",
    "PRESETS",
    "spec_from_config",
    "one_sided_sup",
    "lipschitz_sup",
]


class Named:
    """A vectorised drift with a human-readable description."""

    def __init__(self, fn: Callable, text: str):
        self.fn = fn
        self.text = text

    def __call__(self, x):
        return self.fn(x)

    def describe(self) -> str:
        return self.text

    def __repr__(self):
        return f"Named({self.text!r})"


def _describe(fn) -> str:
    return fn.describe() if hasattr(fn, "describe") else getattr(fn, "__name__", repr(fn))


def _zero(n: int) -> Named:
    return Named(lambda x: np.zeros_like(np.asarray(x, dtype=float)), "0")


def _matrix(a, shape=None, what="matrix") -> np.ndarray:
    out = np.atleast_2d(np.asarray(a, dtype=float))
    if shape is not None and out.shape != shape:
        raise ValueError(f"{what} has shape {out.shape}, expected {shape}")
    return out


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Common interface of the four classes."""

    name: str = field(default="custom", kw_only=True)

    kind = "abstract"
    stratonovich = False

    @property
    def n(self) -> int:
        raise NotImplementedError

    @property
    def m(self) -> int:
        raise NotImplementedError

    def drift(self, x):
        raise NotImplementedError

    def diffusion(self, x) -> np.ndarray:
        raise NotImplementedError

    def noise(self, x, dB):
        """``diffusion(x) @ dB`` without forming the matrix."""
        return self.diffusion(x) @ dB

    def constants(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class AdditiveLipschitz(SystemSpec):
    A: np.ndarray
    f: Callable
    Sigma: np.ndarray
    lam: float
    C: float
    L: float

    kind = "additive-lipschitz"

    def __post_init__(self):
        A = _matrix(self.A, what="A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Sigma", _matrix(self.Sigma, what="Sigma"))
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if self.Sigma.shape[0] != A.shape[0]:
            raise ValueError(f"Sigma has {self.Sigma.shape[0]} rows, A is {A.shape[0]}x{A.shape[0]}")

    n = property(lambda self: self.A.shape[0])
    m = property(lambda self: self.Sigma.shape[1])

    def drift(self, x):
        return rowmat(x, self.A) + self.f(x)

    def diffusion(self, x):
        return self.Sigma

    def noise(self, x, dB):
        return rowmat(dB, self.Sigma)

    def constants(self):
        return {"lambda": self.lam, "C": self.C, "L": self.L}


@dataclass(frozen=True, eq=False)
class AdditiveDissipative(SystemSpec):
    g: Callable
    Sigma: np.ndarray
    L: float
    a: float
    b: float
    p: float

    kind = "additive-dissipative"

    def __post_init__(self):
        object.__setattr__(self, "Sigma", _matrix(self.Sigma, what="Sigma"))

    n = property(lambda self: self.Sigma.shape[0])
    m = property(lambda self: self.Sigma.shape[1])

    def drift(self, x):
        return self.g(x)

    def diffusion(self, x):
        return self.Sigma

    def noise(self, x, dB):
        return rowmat(dB, self.Sigma)

    def constants(self):
        return {"L": self.L, "a": self.a, "b": self.b, "p": self.p}


@dataclass(frozen=True, eq=False)
class MultiplicativeLipschitz(SystemSpec):
    """``Rbar_L1`` is the declared mean of the random prefactor bounding the
    fundamental matrix, ``|Psi(t)| <= Rbar(omega) exp(-lam t)``."""

    A: np.ndarray
    h: Callable
    sigma: tuple
    lam: float
    Rbar_L1: float
    L: float

    kind = "multiplicative-lipschitz"

    def __post_init__(self):
        A = _matrix(self.A, what="A")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        sig = tuple(_matrix(s, A.shape, f"sigma_{k}") for k, s in enumerate(self.sigma))
        if not sig:
            raise ValueError("need at least one noise matrix sigma_k")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "sigma", sig)
        object.__setattr__(self, "_stack", np.stack(sig))

    n = property(lambda self: self.A.shape[0])
    m = property(lambda self: len(self.sigma))

    def drift(self, x):
        return rowmat(x, self.A) + self.h(x)

    def diffusion(self, x):
        return np.stack([s @ x for s in self.sigma], axis=-1)

    def noise(self, x, dB):
        return rowmat(x, np.tensordot(dB, self._stack, axes=1))

    def constants(self):
        return {"lambda": self.lam, "Rbar_L1": self.Rbar_L1, "L": self.L}


@dataclass(frozen=True, eq=False)
class StratonovichDissipative(SystemSpec):
    g: Callable
    c: tuple
    L: float
    dim: int = 1

    kind = "stratonovich-dissipative"
    stratonovich = True

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.c))
        if not c:
            raise ValueError("need at least one noise weight c_k")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "_c", np.array(c))

    n = property(lambda self: self.dim)
    m = property(lambda self: len(self.c))

    def drift(self, x):
        return self.g(x)

    def diffusion(self, x):
        return np.multiply.outer(np.asarray(x, dtype=float), self._c)

    def noise(self, x, dB):
        return x * (self._c @ dB)

    def constants(self):
        return {"L": self.L, "c": list(self.c)}


def _check_state(spec: SystemSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (spec.n,):
        raise ValueError(f"state has shape {x.shape}, system dimension is {spec.n}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite state {x}")
    return x


def drift_eval(spec: SystemSpec, x) -> np.ndarray:
    """Full drift, including the linear part for the Lipschitz classes."""
    return np.asarray(spec.drift(_check_state(spec, x)), dtype=float)


def diffusion_eval(spec: SystemSpec, x) -> np.ndarray:
    """Diffusion matrix (n x m) at state x."""
    return np.asarray(spec.diffusion(_check_state(spec, x)), dtype=float)


# ---------------------------------------------------------------------------
# hypothesis checks


@dataclass
class HypothesisReport:
    constraint: str
    declared: dict
    estimate: float
    verdict: str  # "pass" | "fail" | "inconclusive"
    samples: int
    witness: dict | None = None
    note: str = ""

    def __post_init__(self):
        if self.verdict not in ("pass", "fail", "inconclusive"):
            raise ValueError(f"bad verdict {self.verdict!r}")
        if self.verdict == "fail" and self.witness is None:
            raise ValueError(f"{self.constraint}: a failing verdict needs a witness")

    @property
    def label(self) -> str:
        return "not falsified" if self.verdict == "pass" else self.verdict

    def to_dict(self) -> dict:
        return {
            "constraint": self.constraint,
            "declared": self.declared,
            "estimate": self.estimate,
            "verdict": self.verdict,
            "label": self.label,
            "samples": self.samples,
            "witness": self.witness,
            "note": self.note,
        }


def _batch(fn, X):
    out = None
    try:
        out = np.asarray(fn(X), dtype=float)
    except Exception:
        pass
    if out is None or out.shape != X.shape:
        out = np.array([np.asarray(fn(x), dtype=float) for x in X])
    return out


def _pairs(n, samples, box, seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-box, box, size=(samples, n))
    Y = rng.uniform(-box, box, size=(samples, n))
    return X, Y


def lipschitz_sup(fn, n, samples=10_000, box=10.0, seed=0):
    """Largest sampled ratio |fn(x) - fn(y)| / |x - y| and the pair attaining it."""
    X, Y = _pairs(n, samples, box, seed)
    d = np.linalg.norm(X - Y, axis=1)
    r = np.linalg.norm(_batch(fn, X) - _batch(fn, Y), axis=1) / d
    i = int(np.argmax(r))
    return float(r[i]), X[i], Y[i]


def one_sided_sup(fn, n, samples=10_000, box=10.0, seed=0):
    """Largest sampled <x - y, fn(x) - fn(y)> / |x - y|^2 and the pair attaining it."""
    X, Y = _pairs(n, samples, box, seed)
    D = X - Y
    r = np.einsum("ij,ij->i", D, _batch(fn, X) - _batch(fn, Y)) / np.einsum("ij,ij->i", D, D)
    i = int(np.argmax(r))
    return float(r[i]), X[i], Y[i]


def _tol(v):
    return 1e-9 * max(1.0, abs(v))


def _lipschitz_report(cid, fn, n, L, samples, box, seed):
    est, x, y = lipschitz_sup(fn, n, samples, box, seed)
    ok = est <= L + _tol(L)
    return HypothesisReport(cid, {"L": L}, est, "pass" if ok else "fail", samples,
                            {"x": x.tolist(), "y": y.tolist(), "ratio": est})


def _one_sided_report(cid, fn, n, L, samples, box, seed):
    est, x, y = one_sided_sup(fn, n, samples, box, seed)
    ok = est <= -L + _tol(L)
    return HypothesisReport(cid, {"L": L}, est, "pass" if ok else "fail", samples,
                            {"x": x.tolist(), "y": y.tolist(), "ratio": est})


def _growth_report(spec, samples, box, seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-box, box, size=(samples, spec.n))
    r = np.linalg.norm(X, axis=1)
    excess = np.linalg.norm(_batch(spec.g, X), axis=1) - (spec.a * r**spec.p + spec.b)
    i = int(np.argmax(excess))
    ok = excess[i] <= _tol(spec.b)
    return HypothesisReport("A4", {"a": spec.a, "b": spec.b, "p": spec.p}, float(excess[i]),
                            "pass" if ok else "fail", samples,
                            {"x": X[i].tolist(), "excess": float(excess[i])},
                            note="estimate is max of |g(x)| - (a|x|^p + b)")


def _decay_report(A, lam, C, t_max=None, samples=2001):
    """Sampled max of |exp(A t)|_F e^{lam t} over a time grid against the declared C."""
    t_max = t_max if t_max is not None else max(20.0, 20.0 / max(lam, 1e-12))
    ts = np.linspace(0.0, t_max, samples)
    vals = np.array([np.linalg.norm(expm(A * t)) * math.exp(lam * t) for t in ts])
    i = int(np.argmax(vals))
    ok = vals[i] <= C * (1 + 1e-9)
    return HypothesisReport("A1", {"lambda": lam, "C": C}, float(vals[i]), "pass" if ok else "fail",
                            samples, {"t": float(ts[i]), "scaled_norm": float(vals[i])},
                            note=f"max over t in [0, {t_max:g}] of |exp(At)|_F exp(lambda t)")


def _arith(cid, declared, value, ok, note):
    return HypothesisReport(cid, declared, float(value), "pass" if ok else "fail", 1,
                            None if ok else {"value": float(value)}, note)


def _check_dims(spec: SystemSpec):
    x = np.zeros(spec.n)
    fn = {"additive-lipschitz": "f", "additive-dissipative": "g", "multiplicative-lipschitz": "h",
          "stratonovich-dissipative": "g"}[spec.kind]
    for what, d in ((fn, getattr(spec, fn)(x)), ("drift", spec.drift(x))):
        d = np.asarray(d, dtype=float)
        if d.shape != (spec.n,):
            raise ValueError(f"{spec.name}: {what} maps R^{spec.n} to shape {d.shape}")
    s = np.asarray(spec.diffusion(np.ones(spec.n)), dtype=float)
    if s.shape != (spec.n, spec.m):
        raise ValueError(f"{spec.name}: diffusion has shape {s.shape}, expected {(spec.n, spec.m)}")


def validate_spec(spec: SystemSpec, samples: int = 10_000, box: float = 10.0,
                  seed: int = 0) -> list[HypothesisReport]:
    """Check arithmetic constraints exactly and try to falsify the functional ones.

    Deterministic in ``(spec, samples, box, seed)``.  Dimensional mismatches
    raise ``ValueError`` before any sampling happens.
    """
    _check_dims(spec)
    out: list[HypothesisReport] = []
    if isinstance(spec, AdditiveLipschitz):
        ratio = spec.L * spec.C / spec.lam
        out.append(_arith("A2-arith", spec.constants(), ratio, spec.lam > 0 and spec.C > 0 and ratio < 1,
                          "L*C/lambda < 1"))
        out.append(_decay_report(spec.A, spec.lam, spec.C))
        out.append(_lipschitz_report("A2", spec.f, spec.n, spec.L, samples, box, seed))
    elif isinstance(spec, AdditiveDissipative):
        ok = spec.p >= 1 and spec.a > 0 and spec.b > 0 and spec.L > 0
        out.append(_arith("A4-arith", spec.constants(), spec.p, ok, "p >= 1, a > 0, b > 0, L > 0"))
        out.append(_one_sided_report("A3", spec.g, spec.n, spec.L, samples, box, seed))
        out.append(_growth_report(spec, samples, box, seed))
    elif isinstance(spec, MultiplicativeLipschitz):
        ratio = spec.L * spec.Rbar_L1 / spec.lam
        out.append(_arith("A6-arith", spec.constants(), ratio, spec.lam > 0 and ratio < 1,
                          "L*|Rbar|_L1/lambda < 1"))
        out.append(HypothesisReport("A5", {"lambda": spec.lam, "Rbar_L1": spec.Rbar_L1}, float("nan"),
                                    "inconclusive", 0,
                                    note="declared; cross-check the sign with top_lyapunov"))
        out.append(_lipschitz_report("A6", spec.h, spec.n, spec.L, samples, box, seed))
    elif isinstance(spec, StratonovichDissipative):
        out.append(_arith("A3-arith", spec.constants(), spec.L, spec.L > 0, "L > 0"))
        out.append(_one_sided_report("A3", spec.g, spec.n, spec.L, samples, box, seed))
    else:
        raise TypeError(f"unknown system class {type(spec).__name__}")
    return out


# ---------------------------------------------------------------------------
# presets

_SQ23 = math.sqrt(23.0)
REMARK5_A = np.array([[0.0, -2.0], [3.0, -1.0]])


def remark5_norm(t):
    """Closed-form Frobenius norm of exp(A t) for the rotating 2x2 example."""
    t = np.asarray(t, dtype=float)
    return np.exp(-t / 2) * np.sqrt(2 + (8 / 23) * np.sin(_SQ23 * t / 2) ** 2)


def _remark5():
    return AdditiveLipschitz(REMARK5_A, _zero(2), np.eye(2), lam=0.5, C=3 * math.sqrt(6 / 23), L=0.0,
                             name="remark5")


def _scalar_ou():
    return AdditiveLipschitz([[-1.0]], _zero(1), [[1.0]], lam=1.0, C=1.0, L=0.0, name="scalar-ou")


def _lipschitz_sine():
    f = Named(lambda x: 0.25 * np.sin(x), "0.25*sin(x)")
    return AdditiveLipschitz([[-1.0]], f, [[0.1]], lam=1.0, C=1.0, L=0.25, name="lipschitz-sine")


def _unstable_ou():
    # declared constants are deliberately false: exp(t) does not decay
    return AdditiveLipschitz([[1.0]], _zero(1), [[1.0]], lam=1.0, C=1.0, L=0.0, name="unstable-ou")


def _cubic():
    g = Named(lambda x: -x - x * x * x, "-x - x^3 (componentwise)")
    return AdditiveDissipative(g, 0.1 * np.eye(2), L=1.0, a=2.0, b=1.0, p=3.0, name="dissipative-cubic")


def _gbm_strat():
    g = Named(lambda x: -1.0 * x, "-x")
    return StratonovichDissipative(g, (0.5,), L=1.0, name="gbm-strat")


def _strat_forced():
    g = Named(lambda x: 1.0 - x, "1 - x")
    return StratonovichDissipative(g, (0.5,), L=1.0, name="strat-forced")


# Rbar(omega) = sup_t |Psi(t)| e^{0.75 t} = exp(0.5 S), S ~ Exp(1.5) the running max of
# B(t) - 0.75 t, so E Rbar = 1.5 / (1.5 - 0.5) = 1.5.
def _trivial_zero():
    h = Named(lambda x: 0.25 * np.sin(x), "0.25*sin(x)")
    return MultiplicativeLipschitz([[-1.0]], h, ([[0.5]],), lam=0.75, Rbar_L1=1.5, L=0.25,
                                   name="trivial-zero")


def _multiplicative_forced():
    h = Named(lambda x: 0.25 * np.sin(x) + 0.5, "0.25*sin(x) + 0.5")
    return MultiplicativeLipschitz([[-1.0]], h, ([[0.5]],), lam=0.75, Rbar_L1=1.5, L=0.25,
                                   name="multiplicative-forced")


PRESETS: dict[str, tuple[Callable[[], SystemSpec], str]] = {
    "remark5": (_remark5, "2-d rotating linear drift, A1 holds but no one-sided dissipativity"),
    "scalar-ou": (_scalar_ou, "scalar Ornstein-Uhlenbeck process dx = -x dt + dB"),
    "lipschitz-sine": (_lipschitz_sine, "dx = (-x + 0.25 sin x) dt + 0.1 dB"),
    "unstable-ou": (_unstable_ou, "dx = x dt + dB with falsely declared decay (must fail)"),
    "dissipative-cubic": (_cubic, "dx = (-x - x^3) dt + 0.1 dB in R^2"),
    "gbm-strat": (_gbm_strat, "Stratonovich dx = -x dt + 0.5 x o dB, zero equilibrium"),
    "strat-forced": (_strat_forced, "Stratonovich dx = (1 - x) dt + 0.5 x o dB, nonzero equilibrium"),
    "trivial-zero": (_trivial_zero, "Ito dx = (-x + 0.25 sin x) dt + 0.5 x dB, h(0) = 0"),
    "multiplicative-forced": (_multiplicative_forced,
                              "Ito dx = (-x + 0.25 sin x + 0.5) dt + 0.5 x dB, h(0) != 0"),
}


def preset(name: str) -> SystemSpec:
    try:
        factory, _ = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None
    return factory()


# ---------------------------------------------------------------------------
# config

_CLASSES = {
    "additive-lipschitz": AdditiveLipschitz,
    "additive-dissipative": AdditiveDissipative,
    "multiplicative-lipschitz": MultiplicativeLipschitz,
    "stratonovich-dissipative": StratonovichDissipative,
}
_CONST_KEYS = {"lambda": "lam", "lam": "lam", "C": "C", "L": "L", "a": "a", "b": "b", "p": "p",
               "Rbar_L1": "Rbar_L1", "c": "c"}


def _field(node, n):
    if node is None or node == "zero" or node == 0:
        return _zero(n)
    return compile_field(node, n)


def _require(node, key, where):
    if key not in node:
        raise ValueError(f"system config ({where}): missing required key {key!r}")
    return node[key]


def spec_from_config(node: dict) -> SystemSpec:
    """Build a system from a config mapping (preset reference or inline definition).

    A preset reference may override declared constants::

        {preset: gbm-strat, c: [0.3]}
    """
    if not isinstance(node, dict):
        raise ValueError(f"system config must be a mapping, got {type(node).__name__}")
    if "preset" in node:
        spec = preset(node["preset"])
        overrides = {}
        for k, v in node.items():
            if k == "preset":
                continue
            if k not in _CONST_KEYS or not hasattr(spec, _CONST_KEYS[k]):
                raise ValueError(f"system config: cannot override {k!r} on preset {node['preset']!r}")
            overrides[_CONST_KEYS[k]] = tuple(v) if k == "c" else float(v)
        return dataclasses.replace(spec, **overrides) if overrides else spec
    tag = _require(node, "class", "inline")
    if tag not in _CLASSES:
        raise ValueError(f"system config: unknown class {tag!r}; choose from {sorted(_CLASSES)}")
    name = node.get("name", "custom")
    known = {"class", "name"}
    if tag == "additive-lipschitz":
        known |= {"A", "f", "Sigma", "lambda", "C", "L"}
        A = _matrix(_require(node, "A", tag))
        spec = AdditiveLipschitz(A, _field(node.get("f"), A.shape[0]), _require(node, "Sigma", tag),
                                 lam=float(_require(node, "lambda", tag)), C=float(_require(node, "C", tag)),
                                 L=float(_require(node, "L", tag)), name=name)
    elif tag == "additive-dissipative":
        known |= {"g", "Sigma", "L", "a", "b", "p"}
        Sigma = _matrix(_require(node, "Sigma", tag))
        spec = AdditiveDissipative(_field(_require(node, "g", tag), Sigma.shape[0]), Sigma,
                                   L=float(_require(node, "L", tag)), a=float(_require(node, "a", tag)),
                                   b=float(_require(node, "b", tag)), p=float(_require(node, "p", tag)),
                                   name=name)
    elif tag == "multiplicative-lipschitz":
        known |= {"A", "h", "sigma", "lambda", "Rbar_L1", "L"}
        A = _matrix(_require(node, "A", tag))
        spec = MultiplicativeLipschitz(A, _field(node.get("h"), A.shape[0]),
                                       tuple(_require(node, "sigma", tag)),
                                       lam=float(_require(node, "lambda", tag)),
                                       Rbar_L1=float(_require(node, "Rbar_L1", tag)),
                                       L=float(_require(node, "L", tag)), name=name)
    else:
        known |= {"g", "c", "L", "n"}
        n = int(node.get("n", 1))
        spec = StratonovichDissipative(_field(_require(node, "g", tag), n), tuple(_require(node, "c", tag)),
                                       L=float(_require(node, "L", tag)), dim=n, name=name)
    extra = set(node) - known
    if extra:
        raise ValueError(f"system config ({tag}): unknown keys {sorted(extra)}")
    _check_dims(spec)
    return spec


def describe_drift(spec: SystemSpec) -> str:
    fn = {"additive-lipschitz": "f", "additive-dissipative": "g", "multiplicative-lipschitz": "h",
          "stratonovich-dissipative": "g"}[spec.kind]
    return f"{fn}(x) = {_describe(getattr(spec, fn))}"
