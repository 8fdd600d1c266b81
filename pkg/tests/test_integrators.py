import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randeq.integrators import (ORDER_BANDS, fit_order, fundamental_matrix, integrate_exponential, integrate_ito,
                                integrate_random_ode, integrate_stratonovich, matrix_exponential,
                                self_convergence)
from randeq.noise import HorizonError, refine, sample_path, shift
from randeq.stationary import conjugate_pipeline, ou_u
from randeq.systems import (AdditiveDissipative, AdditiveLipschitz, MultiplicativeLipschitz, Named,
                            StratonovichDissipative, preset)


def _linear(A, Sigma):
    A = np.atleast_2d(A)
    return AdditiveLipschitz(A, Named(lambda x: 0 * x, "0"), np.atleast_2d(Sigma), lam=1.0, C=1.0, L=0.0)


def _strat(g, c, name="g"):
    return StratonovichDissipative(Named(g, name), tuple(c), L=1.0)


@pytest.fixture(scope="module")
def path():
    return sample_path(3, 20.0, 20.0, 1e-3)


def test_deterministic_decay():
    spec = _linear(-np.eye(2), np.zeros((2, 1)))
    p = sample_path(0, 0.0, 1.0, 1e-3)
    tr = integrate_ito(spec, p, 0.0, 1.0, [1.0, 0.0])
    # Euler gives (1 - h)^K exactly up to rounding
    assert tr.final[0] == pytest.approx((1 - 1e-3) ** 1000, rel=1e-12)
    assert abs(tr.final[0] - math.exp(-1)) < 1e-3
    assert tr.final[1] == 0.0
    assert tr.states.shape == (1001, 2)


def test_integration_is_deterministic(path):
    spec = preset("lipschitz-sine")
    a = integrate_ito(spec, path, -2.0, 3.0, [0.3])
    b = integrate_ito(spec, path, -2.0, 3.0, [0.3])
    assert np.array_equal(a.states, b.states)
    assert a.driving == {**path.identity(), "offset": 0.0}


@pytest.mark.parametrize("kind", ["em", "exponential", "heun"])
def test_cocycle_split_is_exact(path, kind):
    if kind == "heun":
        spec, run = preset("strat-forced"), integrate_stratonovich
    elif kind == "em":
        spec, run = preset("lipschitz-sine"), integrate_ito
    else:
        spec, run = preset("lipschitz-sine"), integrate_exponential
    whole = run(spec, path, -1.0, 2.0, [0.7])
    first = run(spec, path, -1.0, 0.5, [0.7])
    second = run(spec, path, 0.5, 2.0, first.final)
    assert np.array_equal(whole.final, second.final)
    assert np.array_equal(whole.states, np.vstack([first.states, second.states[1:]]))


def test_random_ode_cocycle_split_is_exact(path):
    spec = preset("strat-forced")
    bundle = ou_u(path, spec.c, -1.0, 2.0)
    whole = integrate_random_ode(spec, bundle, path, -1.0, 2.0, [0.4])
    first = integrate_random_ode(spec, bundle, path, -1.0, 0.3, [0.4])
    second = integrate_random_ode(spec, bundle, path, 0.3, 2.0, first.final)
    assert np.array_equal(whole.final, second.final)


def test_shifted_drive_matches_base(path):
    spec = preset("lipschitz-sine")
    a = integrate_ito(spec, shift(path, -3.0), 0.0, 3.0, [1.0])
    b = integrate_ito(spec, path, -3.0, 0.0, [1.0])
    assert np.array_equal(a.states, b.states)


def _discrete_convolution(x0, a, dB, h):
    # Euler recursion x_{j+1} = (1 + a h) x_j + dB_j
    x = x0
    for d in dB:
        x = (1 + a * h) * x + d
    return x


def _voc(x0, a, dB, h):
    # left-point discretisation of the variation-of-constants formula
    K = dB.shape[0]
    w = np.exp(a * h * (K - np.arange(K)))
    return math.exp(a * h * K) * x0 + float(np.sum(w * dB))


def test_em_scalar_ou_against_variation_of_constants():
    spec = preset("scalar-ou")
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        e = []
        for seed in range(20):
            p = sample_path(seed, 0.0, 1.0, 1e-2)
            while p.step > h * 1.0001:
                p = refine(p)
            dB = p.increments(0.0, 1.0)[:, 0]
            tr = integrate_ito(spec, p, 0.0, 1.0, [0.5])
            assert tr.final[0] == pytest.approx(_discrete_convolution(0.5, -1.0, dB, h), abs=1e-13)
            e.append(tr.final[0] - _voc(0.5, -1.0, dB, h))
        errs.append(float(np.sqrt(np.mean(np.square(e)))))
    assert errs[0] < 1e-2
    order = fit_order(list(zip((1e-2, 5e-3, 2.5e-3), errs)))
    assert 0.8 < order < 1.2


def test_exponential_euler_is_exact_discrete_convolution():
    spec = _linear([[-1.0]], [[1.0]])
    p = sample_path(4, 0.0, 2.0, 1e-3)
    dB = p.increments(0.0, 2.0)[:, 0]
    tr = integrate_exponential(spec, p, 0.0, 2.0, [0.5])
    assert tr.final[0] == pytest.approx(_voc(0.5, -1.0, dB, 1e-3), abs=1e-12)


def test_exponential_euler_is_exact_for_two_dim_linear():
    spec = preset("remark5")
    p = sample_path(4, 0.0, 1.0, 1e-2, dim=2)
    dB = p.increments(0.0, 1.0)
    E = matrix_exponential(spec.A, 1e-2)
    x = np.array([1.0, -1.0])
    oracle = np.linalg.matrix_power(E, 100) @ x
    for j in range(100):
        oracle = oracle + np.linalg.matrix_power(E, 100 - j) @ dB[j]
    tr = integrate_exponential(spec, p, 0.0, 1.0, x)
    np.testing.assert_allclose(tr.final, oracle, atol=1e-12)


def test_heun_gbm_against_closed_form():
    spec = preset("gbm-strat")
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        e = []
        for seed in range(20):
            p = sample_path(seed, 0.0, 1.0, 1e-2)
            while p.step > h * 1.0001:
                p = refine(p)
            tr = integrate_stratonovich(spec, p, 0.0, 1.0, [1.0])
            # Stratonovich GBM: x(t) = x0 exp(-t + c B(t))
            exact = math.exp(-1.0 + 0.5 * p(1.0)[0])
            e.append(tr.final[0] - exact)
        errs.append(float(np.sqrt(np.mean(np.square(e)))))
    assert errs[-1] < 5e-3
    assert fit_order(list(zip((1e-2, 5e-3, 2.5e-3), errs))) > 0.4


def test_heun_without_noise_is_deterministic_heun():
    spec = _strat(lambda x: -x - x ** 3, [0.0], "-x - x^3")
    p = sample_path(1, 0.0, 1.0, 1e-2)
    tr = integrate_stratonovich(spec, p, 0.0, 1.0, [2.0])
    x, h = 2.0, 1e-2
    for _ in range(100):
        g = -x - x ** 3
        xp = x + g * h
        x = x + 0.5 * (g + (-xp - xp ** 3)) * h
    assert tr.final[0] == pytest.approx(x, rel=1e-14)


def test_zero_is_a_fixed_point(path):
    tr = integrate_stratonovich(preset("gbm-strat"), path, -5.0, 5.0, [0.0])
    assert np.all(tr.states == 0.0)
    tr = integrate_ito(preset("trivial-zero"), path, -5.0, 5.0, [0.0])
    assert np.all(tr.states == 0.0)


def test_random_ode_without_noise_is_rk4():
    spec = _strat(lambda x: -x, [0.0], "-x")
    p = sample_path(2, 20.0, 1.0, 1e-2)
    bundle = ou_u(p, spec.c, 0.0, 1.0)
    assert np.all(bundle.u_c == 0.0)
    tr = integrate_random_ode(spec, bundle, p, 0.0, 1.0, [1.0])
    # RK4 on y' = -y: global error about h^4 / 120
    assert abs(tr.final[0] - math.exp(-1.0)) < 1e-9


def test_random_ode_linear_u_matches_quadrature():
    # g = 0 gives y' = u^c(t) y, so y(t) = y0 exp(int u^c); RK4 with the
    # linearly interpolated u integrates the trapezoid rule exactly up to O(h^4)
    spec = _strat(lambda x: 0 * x, [0.8], "0")
    p = sample_path(5, 20.0, 2.0, 1e-3)
    bundle = ou_u(p, spec.c, 0.0, 2.0)
    tr = integrate_random_ode(spec, bundle, p, 0.0, 2.0, [1.5])
    uc = bundle.u_c
    integral = 1e-3 * (uc.sum() - 0.5 * (uc[0] + uc[-1]))
    assert tr.final[0] == pytest.approx(1.5 * math.exp(integral), rel=1e-8)


def test_pipeline_agrees_with_heun():
    spec = preset("strat-forced")
    p = sample_path(6, 30.0, 2.0, 1e-3)
    a = conjugate_pipeline(spec, p, 0.0, 2.0, [0.5])
    b = integrate_stratonovich(spec, p, 0.0, 2.0, [0.5]).final
    np.testing.assert_allclose(a, b, atol=1e-2)


def test_pipeline_gbm_closed_form():
    spec = preset("gbm-strat")
    p = sample_path(7, 30.0, 1.0, 1e-3)
    x = conjugate_pipeline(spec, p, 0.0, 1.0, [2.0])
    assert x[0] == pytest.approx(2.0 * math.exp(-1.0 + 0.5 * p(1.0)[0]), rel=5e-3)


def test_fundamental_matrix_noise_free():
    spec = preset("remark5")
    p = sample_path(0, 0.0, 1.0, 1e-4, dim=2)
    fm = fundamental_matrix(spec, p, 1.0)
    assert np.array_equal(fm.matrices[0], np.eye(2))
    np.testing.assert_allclose(fm.matrices[-1], matrix_exponential(spec.A, 1.0), atol=5e-3)
    assert fm.singular_index is None and not fm.blown_up


def test_fundamental_matrix_scalar_gbm():
    spec = MultiplicativeLipschitz(np.array([[-1.0]]), Named(lambda x: 0 * x, "0"), (np.array([[0.5]]),),
                                   lam=0.75, Rbar_L1=1.5, L=0.0)
    errs = []
    for seed in range(20):
        p = refine(refine(sample_path(seed, 0.0, 1.0, 1e-3)))
        fm = fundamental_matrix(spec, p, 1.0)
        # Ito GBM: exp((a - s^2/2) t + s B(t))
        errs.append(fm.matrices[-1, 0, 0] - math.exp(-1.125 + 0.5 * p(1.0)[0]))
    assert float(np.sqrt(np.mean(np.square(errs)))) < 0.05


def test_fundamental_matrix_cocycle():
    spec = preset("remark5")
    p = sample_path(0, 0.0, 2.0, 1e-3, dim=2)
    fm = fundamental_matrix(spec, p, 2.0)
    fm1 = fundamental_matrix(spec, shift(p, 1.0), 1.0)
    np.testing.assert_allclose(fm1.matrices[-1] @ fm.matrices[1000], fm.matrices[-1], atol=1e-12)


def test_self_convergence_deterministic():
    spec = _linear(-np.eye(1), np.zeros((1, 1)))
    res = self_convergence("em", spec, sample_path(0, 0.0, 1.0, 1 / 64), [1.0], levels=4)
    assert [r[0] for r in res] == [1 / 64, 1 / 128, 1 / 256, 1 / 512]
    assert fit_order(res) == pytest.approx(1.0, abs=0.2)


def test_self_convergence_scalar_ou():
    paths = [sample_path(s, 0.0, 1.0, 1 / 64) for s in range(10)]
    res = self_convergence("em", preset("scalar-ou"), paths, [0.5], levels=4)
    lo, hi = ORDER_BANDS["em-additive"]
    assert lo <= fit_order(res) <= hi


def test_self_convergence_rejects_bad_args():
    with pytest.raises(ValueError):
        self_convergence("em", preset("scalar-ou"), sample_path(0, 0, 1, 0.25), [0.0], levels=1)
    with pytest.raises(ValueError, match="unknown integrator"):
        self_convergence("leapfrog", preset("scalar-ou"), sample_path(0, 0, 1, 0.25), [0.0])


def test_csv_roundtrip(tmp_path, path):
    tr = integrate_ito(preset("lipschitz-sine"), path, 0.0, 0.05, [0.1])
    f = tmp_path / "t.csv"
    tr.to_csv(f)
    rows = list(csv.reader(open(f)))
    assert rows[0] == ["t", "x0"]
    assert len(rows) == tr.states.shape[0] + 1
    back = np.array([[float(v) for v in r] for r in rows[1:]])
    assert np.array_equal(back[:, 1], tr.states[:, 0])
    assert np.array_equal(back[:, 0], tr.times)


def test_blow_up_is_flagged():
    spec = AdditiveDissipative(Named(lambda x: x ** 3, "x^3"), np.zeros((1, 1)), L=1.0, a=1.0, b=1.0, p=3.0)
    p = sample_path(0, 0.0, 10.0, 0.1)
    tr = integrate_ito(spec, p, 0.0, 10.0, [10.0])
    assert tr.blown_up
    assert tr.first_nonfinite is not None and tr.first_nonfinite >= 1
    assert np.all(np.isfinite(tr.states))
    assert tr.states.shape[0] == tr.first_nonfinite


def test_horizon_error_names_requirement(path):
    with pytest.raises(HorizonError, match="T- >= 25"):
        integrate_ito(preset("scalar-ou"), path, -25.0, 0.0, [0.0])


def test_wrong_calculus_rejected(path):
    with pytest.raises(TypeError, match="Stratonovich"):
        integrate_ito(preset("gbm-strat"), path, 0.0, 1.0, [1.0])
    with pytest.raises(TypeError, match="Ito"):
        integrate_stratonovich(preset("scalar-ou"), path, 0.0, 1.0, [1.0])


def test_initial_state_dimension_checked(path):
    with pytest.raises(ValueError, match="dimension"):
        integrate_ito(preset("scalar-ou"), path, 0.0, 1.0, [1.0, 2.0])


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 4))
def test_matrix_exponential_scalar(a, t):
    assert matrix_exponential([[a]], t)[0, 0] == pytest.approx(math.exp(a * t), rel=1e-13)
