import math

import numpy as np
import pytest

from randeq.expr import ExpressionError
from randeq.systems import (PRESETS, AdditiveDissipative, AdditiveLipschitz, HypothesisReport,
                            MultiplicativeLipschitz, Named, StratonovichDissipative, diffusion_eval, drift_eval,
                            one_sided_sup, preset, spec_from_config, validate_spec)


def _by_id(reports):
    return {r.constraint: r for r in reports}


def test_sine_lipschitz_passes():
    f = Named(lambda x: 0.5 * np.sin(x), "0.5 sin x")
    spec = AdditiveLipschitz(-np.eye(1), f, np.eye(1), lam=1.0, C=1.0, L=0.5)
    reps = _by_id(validate_spec(spec))
    assert all(r.verdict == "pass" for r in reps.values())
    assert reps["A2"].estimate <= 0.5 + 1e-12
    assert reps["A2"].label == "not falsified"


def test_dissipative_linear_has_equality():
    spec = AdditiveDissipative(Named(lambda x: -2.0 * x, "-2x"), np.eye(1), L=2.0, a=2.0, b=1.0, p=1.0)
    rep = _by_id(validate_spec(spec))["A3"]
    assert rep.verdict == "pass"
    assert rep.estimate == pytest.approx(-2.0, abs=1e-12)
    x, y = np.array(rep.witness["x"]), np.array(rep.witness["y"])
    d = x - y
    assert np.dot(d, -2 * x + 2 * y) == pytest.approx(-2 * np.dot(d, d))


def test_arithmetic_violation():
    spec = AdditiveLipschitz(-np.eye(1), Named(lambda x: 1.5 * np.sin(x), "1.5 sin x"), np.eye(1),
                             lam=1.0, C=1.0, L=1.5)
    rep = _by_id(validate_spec(spec))["A2-arith"]
    assert rep.verdict == "fail"
    assert rep.estimate == pytest.approx(1.5)
    assert rep.witness is not None


def test_failing_witness_replays():
    # declared L too small for 0.9 sin x
    spec = AdditiveLipschitz(-np.eye(1), Named(lambda x: 0.9 * np.sin(x), "0.9 sin x"), np.eye(1),
                             lam=1.0, C=1.0, L=0.5)
    rep = _by_id(validate_spec(spec))["A2"]
    assert rep.verdict == "fail"
    x, y = np.array(rep.witness["x"]), np.array(rep.witness["y"])
    ratio = np.linalg.norm(spec.f(x) - spec.f(y)) / np.linalg.norm(x - y)
    assert ratio > spec.L


def test_unstable_decay_fails_with_witness():
    rep = _by_id(validate_spec(preset("unstable-ou")))["A1"]
    assert rep.verdict == "fail"
    t = rep.witness["t"]
    assert math.exp(t) * math.exp(t) > 1.0


def test_fail_requires_witness():
    with pytest.raises(ValueError, match="witness"):
        HypothesisReport("A2", {}, 1.0, "fail", 10)
    with pytest.raises(ValueError):
        HypothesisReport("A2", {}, 1.0, "maybe", 10)


def test_validate_is_deterministic():
    a = [r.to_dict() for r in validate_spec(preset("dissipative-cubic"), seed=3)]
    b = [r.to_dict() for r in validate_spec(preset("dissipative-cubic"), seed=3)]
    assert a == b


def test_dimension_mismatch_rejected_before_sampling():
    bad = AdditiveLipschitz(-np.eye(2), Named(lambda x: x[..., :1], "first"), np.eye(2), lam=1, C=1, L=0)
    with pytest.raises(ValueError, match="f maps"):
        validate_spec(bad)
    with pytest.raises(ValueError, match="rows"):
        AdditiveLipschitz(-np.eye(2), Named(lambda x: 0 * x, "0"), np.eye(3), lam=1, C=1, L=0)


def test_drift_eval_linear():
    spec = spec_from_config({"class": "additive-lipschitz", "A": [[-1, 0], [0, -1]], "Sigma": [[1, 0], [0, 1]],
                             "lambda": 1, "C": 1, "L": 0})
    np.testing.assert_array_equal(drift_eval(spec, [1.0, 2.0]), [-1.0, -2.0])
    np.testing.assert_array_equal(diffusion_eval(spec, [1.0, 2.0]), np.eye(2))


def test_diffusion_multiplicative():
    spec = MultiplicativeLipschitz(-np.eye(2), Named(lambda x: 0 * x, "0"), (np.eye(2),), lam=1.0,
                                   Rbar_L1=1.0, L=0.1)
    np.testing.assert_array_equal(diffusion_eval(spec, [3.0, 4.0]), [[3.0], [4.0]])


def test_diffusion_stratonovich():
    spec = StratonovichDissipative(Named(lambda x: -x, "-x"), (0.1, 0.2), L=1.0)
    np.testing.assert_allclose(diffusion_eval(spec, [5.0]), [[0.5, 1.0]], rtol=1e-15)


def test_nonfinite_state_rejected():
    with pytest.raises(ValueError, match="non-finite"):
        drift_eval(preset("scalar-ou"), [np.nan])


def test_remark5_eigenvalues():
    ev = np.sort_complex(np.linalg.eigvals(preset("remark5").A))
    np.testing.assert_allclose(ev, [complex(-0.5, -math.sqrt(23) / 2), complex(-0.5, math.sqrt(23) / 2)],
                               atol=1e-14)


def test_remark5_not_one_sided_dissipative():
    A = preset("remark5").A
    x = np.array([1.0, 1.0])
    # <x, Ax> = x1 x2 - x2^2
    assert x @ A @ x == x[0] * x[1] - x[1] ** 2 == 0.0
    assert np.dot(x, x) == 2.0
    sup, _, _ = one_sided_sup(lambda z: z @ A.T, 2)
    assert sup >= 0.0


def test_trivial_zero_preset():
    spec = preset("trivial-zero")
    assert all(r.verdict in ("pass", "inconclusive") for r in validate_spec(spec))
    np.testing.assert_array_equal(drift_eval(spec, [0.0]), [0.0])


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_build_and_validate(name):
    spec = preset(name)
    reps = validate_spec(spec, samples=500)
    verdicts = {r.verdict for r in reps}
    if name == "unstable-ou":
        assert "fail" in verdicts
    else:
        assert "fail" not in verdicts, [r.to_dict() for r in reps if r.verdict == "fail"]


def test_unknown_preset_lists_catalog():
    with pytest.raises(KeyError) as err:
        preset("nope")
    for name in PRESETS:
        assert name in str(err.value)


def test_rbar_constant_of_multiplicative_presets():
    # Rbar = exp(0.5 S) with S the running max of B(t) - 0.75 t, S ~ Exp(1.5): E Rbar = 1.5
    rng = np.random.default_rng(0)
    h, n, paths = 0.01, 4000, 4000
    B = np.cumsum(rng.standard_normal((paths, n)) * math.sqrt(h), axis=1)
    S = np.maximum(0.0, np.max(B - 0.75 * h * np.arange(1, n + 1), axis=1))
    est = np.mean(np.exp(0.5 * S))
    # grid maxima sit slightly below the continuous ones
    assert 1.35 < est < 1.55
    assert preset("trivial-zero").Rbar_L1 == 1.5


def test_config_preset_override():
    spec = spec_from_config({"preset": "gbm-strat", "c": [0.3]})
    assert spec.c == (0.3,)
    np.testing.assert_allclose(spec.noise(np.array([2.0]), np.array([1.0])), [0.6])
    spec = spec_from_config({"preset": "lipschitz-sine", "lambda": 2.0})
    assert spec.lam == 2.0
    with pytest.raises(ValueError, match="cannot override"):
        spec_from_config({"preset": "scalar-ou", "a": 1.0})


@pytest.mark.parametrize("node", [
    {"class": "additive-dissipative", "g": ["-x0 - x0**3", "-x1"], "Sigma": [[0.1, 0], [0, 0.1]],
     "L": 1, "a": 2, "b": 1, "p": 3},
    {"class": "multiplicative-lipschitz", "A": [[-1]], "h": ["0.1*tanh(x)"], "sigma": [[[0.3]]],
     "lambda": 1, "Rbar_L1": 1.2, "L": 0.1},
    {"class": "stratonovich-dissipative", "g": ["-2*x"], "c": [0.1, 0.2], "L": 2},
    {"class": "additive-lipschitz", "A": [[0, -2], [3, -1]], "f": {"affine": {"matrix": [[0, 0], [0, 0]]}},
     "Sigma": [[1, 0], [0, 1]], "lambda": 0.5, "C": 1.6, "L": 0},
])
def test_inline_classes(node):
    spec = spec_from_config(node)
    assert spec.kind == node["class"]
    validate_spec(spec, samples=200)


@pytest.mark.parametrize("node, match", [
    ({"class": "warp-drive"}, "unknown class"),
    ({"class": "stratonovich-dissipative", "g": ["-x"], "L": 1}, "missing required key 'c'"),
    ({"class": "stratonovich-dissipative", "g": ["-x"], "c": [1], "L": 1, "zeta": 2}, "unknown keys"),
    ({"class": "stratonovich-dissipative", "g": ["open(x)"], "c": [1], "L": 1}, "may be called"),
])
def test_inline_errors(node, match):
    with pytest.raises((ValueError, ExpressionError), match=match):
        spec_from_config(node)
