import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from l1ds.clf import ClfConfig
from l1ds.disturbances import DisturbanceSpec
from l1ds.l1 import (CertificateInputs, L1Config, L1ConfigError, L1State,
                     SingularBandwidthError, adaptation_update, certify, filter_step, l1_step,
                     predictor_step)
from l1ds.sim import SelectorConfig, run_perfect

from oracles import adaptation_dense, certificate_constants, zoh_lowpass


def _state(z_hat, sigma_hat=None, u_a=None):
    z_hat = np.asarray(z_hat, float)
    zero = np.zeros_like(z_hat)
    return L1State(z_hat, zero if sigma_hat is None else np.asarray(sigma_hat, float),
                   zero if u_a is None else np.asarray(u_a, float))


# -- config ----------------------------------------------------------------------

@pytest.mark.parametrize("kwargs", [dict(a_s_diag=[-1.0, 0.0]), dict(a_s_diag=[1.0]),
                                    dict(a_s_diag=[-1.0], omega=0.0),
                                    dict(a_s_diag=[-1.0], t_sample=-1e-3)])
def test_config_rejects_invalid(kwargs):
    with pytest.raises(L1ConfigError):
        L1Config(**kwargs)


def test_sampling_must_be_multiple_of_dt():
    cfg = L1Config([-1.0], t_sample=0.0025)
    assert cfg.steps_per_sample(0.0005) == 5
    with pytest.raises(L1ConfigError):
        cfg.steps_per_sample(0.001)
    with pytest.raises(L1ConfigError):
        predictor_step(cfg, _state([0.0]), [0.0], [0.0], [0.0], 0.001)


# -- predictor ---------------------------------------------------------------------

def test_predictor_zero_derivative():
    cfg = L1Config([-3.0, -3.0], t_sample=0.01)
    st0 = _state([0.4, -1.0])
    f = np.array([2.0, 1.0])
    out = predictor_step(cfg, st0, [0.4, -1.0], f, -f, 0.01)
    np.testing.assert_array_equal(out.z_hat, st0.z_hat)
    assert out.steps_since_sample == 1


def test_predictor_single_euler_step():
    cfg = L1Config([-1.0], t_sample=0.01)
    out = predictor_step(cfg, _state([1.2]), [1.0], [0.0], [0.0], 0.01)
    assert out.z_hat[0] == pytest.approx(1.2 - 0.002, abs=1e-15)


def test_predictor_nan_is_an_error():
    cfg = L1Config([-1.0], t_sample=0.01)
    with pytest.raises(FloatingPointError):
        predictor_step(cfg, _state([0.0]), [0.0], [np.nan], [0.0], 0.01)


# -- adaptation --------------------------------------------------------------------

def test_adaptation_zero():
    np.testing.assert_array_equal(adaptation_update(L1Config([-2.0, -5.0]), [0, 0]), [0, 0])


def test_adaptation_scalar_example():
    cfg = L1Config([-1.0], t_sample=0.1)
    expected = -math.exp(-0.1) / (1 - math.exp(-0.1))
    assert adaptation_update(cfg, [1.0])[0] == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(-9.5083, abs=1e-4)


def test_adaptation_two_axis_example():
    cfg = L1Config([-1.0, -10.0], t_sample=0.1)
    out = adaptation_update(cfg, [1.0, 1.0])
    assert out[1] == pytest.approx(-10 * math.exp(-1) / (1 - math.exp(-1)), rel=1e-12)
    assert out[1] == pytest.approx(-5.8198, abs=1e-4)
    assert out[0] == pytest.approx(-9.5083, abs=1e-4)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-50, -0.01), min_size=1, max_size=4), st.floats(1e-4, 0.5),
       st.integers(0, 10_000))
def test_adaptation_matches_dense_expm(a_s, ts, seed):
    z = np.random.default_rng(seed).normal(size=len(a_s))
    cfg = L1Config(a_s, t_sample=ts)
    got = adaptation_update(cfg, z)
    want = adaptation_dense(a_s, ts, z)
    np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-10 * np.abs(want).max())


# -- filter ------------------------------------------------------------------------

def test_filter_zero_stays_zero():
    cfg = L1Config([-1.0, -1.0], omega=20.0)
    np.testing.assert_array_equal(filter_step(cfg, _state([0, 0]), 0.001).u_a, [0, 0])


def test_filter_one_step_example():
    cfg = L1Config([-1.0, -1.0], omega=20.0)
    out = filter_step(cfg, _state([0, 0], sigma_hat=[1.0, 0.0]), 0.001)
    np.testing.assert_allclose(out.u_a, [-(1 - math.exp(-0.02)), 0.0], rtol=1e-14)
    assert out.u_a[0] == pytest.approx(-0.019801, abs=1e-6)


def test_filter_dc_gain_and_rate():
    cfg = L1Config([-1.0, -1.0], omega=30.0)
    s0 = np.array([0.7, -0.2])
    st0 = _state([0, 0], sigma_hat=s0, u_a=[0.3, 0.1])
    traj = []
    cur = st0
    for _ in range(3000):
        cur = filter_step(cfg, cur, 0.001)
        traj.append(cur.u_a)
    traj = np.array(traj)
    np.testing.assert_allclose(traj[-1], -s0, atol=1e-9)
    np.testing.assert_allclose(traj[:200], zoh_lowpass(st0.u_a, s0, 30.0, 0.001, 200),
                               rtol=1e-12, atol=1e-15)
    gap = np.linalg.norm(traj + s0, axis=1)
    np.testing.assert_allclose(gap[1:50] / gap[:49], math.exp(-0.03), rtol=1e-9)


# -- composed step -----------------------------------------------------------------

def test_sigma_hat_piecewise_constant():
    dt = 0.001
    cfg = L1Config([-10.0, -10.0], omega=30.0, t_sample=0.004)
    st0 = L1State.initial(cfg, [0.0, 0.0], dt)
    rng = np.random.default_rng(0)
    hist = []
    for k in range(40):
        z = rng.normal(size=2) * 0.01
        st0, _ = l1_step(cfg, st0, z, np.zeros(2), np.zeros(2), dt)
        hist.append(st0.sigma_hat.copy())
    hist = np.array(hist)
    for k in range(1, 40):
        if k % 4 != 0:
            assert hist[k].tobytes() == hist[k - 1].tobytes()
        else:
            assert not np.array_equal(hist[k], hist[k - 1])


def test_initial_state():
    cfg = L1Config([-1.0, -2.0])
    st0 = L1State.initial(cfg, [1.0, 2.0], 0.001)
    np.testing.assert_array_equal(st0.z_hat, [1.0, 2.0])
    assert not st0.sigma_hat.any() and not st0.u_a.any()
    with pytest.raises(L1ConfigError):
        L1State.initial(cfg, [1.0, 2.0, 3.0], 0.001)


def _constant_sigma_run(fs, n):
    sigma0 = (0.5, -0.3)
    l1 = L1Config([-10.0, -10.0], omega=30.0, t_sample=1.0 / (n - 1))
    from l1ds.sim import nominal_target
    tgt = fs.target if n == fs.n else nominal_target(fs.model, fs.z_star0, n)
    return run_perfect(fs.model, ClfConfig(c=2.0), l1, SelectorConfig("time_indexed"),
                       [DisturbanceSpec("constant", "task", sigma0)], fs.z_star0, n,
                       target=tgt), np.array(sigma0)


def test_zero_uncertainty_gives_zero_input(sine):
    l1 = L1Config([-10.0, -10.0], omega=30.0, t_sample=1.0 / (sine.n - 1))
    r = run_perfect(sine.model, ClfConfig(c=2.0), l1, SelectorConfig("time_indexed"), None,
                    sine.z_star0, sine.n, target=sine.target)
    assert np.abs(r.u_a_trace).max() <= 1e-9


def test_constant_disturbance_estimate(sine):
    r, s0 = _constant_sigma_run(sine, sine.n)
    late = r.times >= 0.5
    assert np.linalg.norm(r.sigma_hat_trace[late] - s0, axis=1).max() < 0.02
    assert np.linalg.norm(r.u_a_trace[late] + s0, axis=1).max() < 0.02


def test_estimate_error_scales_with_sampling(sine):
    errs = []
    for n in (sine.n, 2 * sine.n - 1):
        r, s0 = _constant_sigma_run(sine, n)
        late = r.times >= 0.5
        errs.append(np.linalg.norm(r.sigma_hat_trace[late] - s0, axis=1).max())
    assert errs[0] / errs[1] >= 1.5


def test_prediction_error_bounded(sine):
    r, s0 = _constant_sigma_run(sine, sine.n)
    assert np.all(np.isfinite(r.sigma_hat_trace))
    assert not r.truncated
    # z_tilde enters sigma_hat through the adaptation gain; bounded estimate <=> bounded error
    assert np.abs(r.sigma_hat_trace).max() < 10 * np.abs(s0).max()


# -- certificate -------------------------------------------------------------------

WORKED = dict(delta_sigma=0.5, l_sigma_z=0.1, delta_f=2.0, delta_nom=0.5, delta_sigma_hat=0.0,
              delta_b=2.0, alpha1=1.0, alpha2=1.0, lam=1.0, v0=0.25, epsilon=0.5, dim=2,
              a_s_diag=(-10.0, -10.0), omega=20.0, t_sample=0.001, t1_minus_t0=0.3)


def _oracle(inp):
    return certificate_constants(inp.delta_sigma, inp.l_sigma_z, inp.phi1, inp.lam, inp.omega,
                                 inp.delta_b, inp.dim, max(abs(a) for a in inp.a_s_diag),
                                 inp.alpha1, inp.v0, inp.rho, inp.t_sample, inp.t1_minus_t0)


def test_worked_certificate():
    inp = CertificateInputs(**WORKED)
    rep = certify(inp)
    assert inp.phi1 == pytest.approx(3.0) and rep.rho == pytest.approx(1.0)
    for key, val in {"zeta1": 0.035278, "zeta2": 7.9195, "zeta3": 10.0, "zeta4": 17.9195,
                     "ts_max": 0.037916}.items():
        assert getattr(rep, key) == pytest.approx(val, rel=1e-4)
    assert 0.25 + 2 * rep.zeta1 == pytest.approx(0.32056, abs=1e-5)
    assert rep.condition_bandwidth_ok and rep.condition_ts_ok
    want = _oracle(inp)
    for key in ("zeta1", "zeta2", "zeta3", "zeta4", "ts_max"):
        assert getattr(rep, key) == pytest.approx(want[key], rel=1e-12)
    assert rep.ultimate_bound_mu == pytest.approx(want["mu"], rel=1e-12)


def test_zero_uncertainty_certificate():
    inp = CertificateInputs(**{**WORKED, "delta_sigma": 0.0, "l_sigma_z": 0.0})
    rep = certify(inp)
    assert (rep.zeta1, rep.zeta2, rep.zeta3, rep.zeta4) == (0.0, 0.0, 0.0, 0.0)
    assert rep.ok and rep.ts_max == math.inf
    assert rep.ultimate_bound_mu == pytest.approx(math.sqrt(math.exp(-2 * 0.3) * 0.25))


def test_zeta1_decreases_with_bandwidth():
    a = certify(CertificateInputs(**WORKED))
    b = certify(CertificateInputs(**{**WORKED, "omega": 200.0}))
    assert b.zeta1 < a.zeta1


def test_singular_and_near_singular_bandwidth():
    with pytest.raises(SingularBandwidthError):
        certify(CertificateInputs(**{**WORKED, "omega": 2.0}))
    with pytest.warns(UserWarning):
        certify(CertificateInputs(**{**WORKED, "omega": 2.1}))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        certify(CertificateInputs(**WORKED))


def test_sampling_above_limit_fails():
    rep = certify(CertificateInputs(**{**WORKED, "t_sample": 0.05}))
    assert rep.condition_bandwidth_ok and not rep.condition_ts_ok and not rep.ok


def test_rho_uses_worst_case_initial_error():
    inp = CertificateInputs(**{**WORKED, "alpha1": 0.5, "alpha2": 2.0})
    assert inp.rho == pytest.approx(math.sqrt(0.25 / 0.5) * math.sqrt(2.0 / 0.5) + 0.5)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 2), st.floats(0, 1), st.floats(0, 20), st.floats(0.5, 5),
       st.floats(5, 200), st.floats(1e-5, 0.05), st.floats(0, 1), st.floats(0.05, 2))
def test_certificate_consistency(ds, lz, rest, lam, omega, ts, v0, eps):
    if abs(2 * lam - omega) < 0.1 * omega:
        return
    inp = CertificateInputs(**{**WORKED, "delta_sigma": ds, "l_sigma_z": lz, "delta_f": rest,
                               "lam": lam, "omega": omega, "t_sample": ts, "v0": v0,
                               "epsilon": eps, "delta_b": 2 * (math.sqrt(v0) + eps)})
    rep = certify(inp)
    want = _oracle(inp)
    for key in ("zeta1", "zeta2", "zeta3", "zeta4"):
        assert getattr(rep, key) == pytest.approx(want[key], rel=1e-12, abs=1e-300)
    if rep.ok:
        assert rep.ultimate_bound_mu <= rep.rho * (1 + 1e-12)
    # monotone in the sampling period
    longer = certify(replace(inp, t_sample=2 * ts))
    assert longer.ultimate_bound_mu >= rep.ultimate_bound_mu
    # and in zeta1 (a larger disturbance bound raises zeta1)
    noisier = certify(replace(inp, delta_sigma=ds + 0.1))
    assert noisier.zeta1 > rep.zeta1
    assert noisier.ultimate_bound_mu >= rep.ultimate_bound_mu
