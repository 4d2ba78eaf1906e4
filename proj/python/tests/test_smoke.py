import json
import math

import numpy as np
import pytest

import stochreg as sr


def test_rng_goldens():
    s = sr.RngStream(42)
    assert [s.draw_index(4) for _ in range(3)] == [2, 0, 1]
    assert s.draw_count == 3
    assert sr.RngStream(42).next_u64() == 0xBDD732262FEB6E95
    assert sr.RngStream(42).normal() == pytest.approx(0.88224890622226881, rel=1e-15)
    walk = sr.RngStream(9)
    for _ in range(17):
        walk.next_u64()
    assert sr.RngStream.at(9, 17).next_u64() == walk.next_u64()


def test_linear_system_roundtrip():
    sys = sr.build_linear_system(60)
    assert sys.equation_count == 60
    assert sys.solution_dim == 60
    truth = sr.sample_target(60)
    y = sys.exact_data
    assert len(y) == 60
    for i in (0, 17, 59):
        assert sys.apply(i, truth)[0] == pytest.approx(y[i][0], abs=1e-14)
    assert np.allclose(sys.multiply(truth), np.concatenate(y))


def test_steps_and_reductions():
    sys = sr.build_linear_system(40)
    rng = np.random.default_rng(3)
    u = rng.uniform(-1, 1, 40)
    u0 = rng.uniform(-1, 1, 40)
    y_i = np.array([0.25])
    sgd = sr.sgd_step(sys, u, 5, 0.7, y_i)
    assert np.array_equal(sr.irsgd_step(sys, u, u0, 5, 0.7, 0.0, y_i), sgd)
    damped = sr.irsgd_step(sys, u, u0, 5, 0.7, 0.3, y_i)
    assert np.allclose(damped, sgd - 0.3 * (u - u0), atol=1e-14)

    row = sys.row(5)
    expected = u - 0.7 * row * (row @ u - 0.25)
    assert np.allclose(sgd, expected, atol=1e-13)

    with pytest.raises(sr.ConfigError):
        sr.irsgd_step(sys, u, u0, 5, 0.7, 0.5, y_i)
    with pytest.raises(IndexError):
        sr.sgd_step(sys, u, 40, 0.7, y_i)
    with pytest.raises(sr.DimensionError):
        sr.sgd_step(sys, u[:10], 0, 0.7, y_i)


def test_stopping_helpers():
    assert sr.psi(3, 1, 2.0) == 8.0
    assert sr.argmin_psi([(0, 5.0), (1, 2.0), (2, 2.0)]) == 1
    assert sr.c_rho(1.0, 0.49, 0.01, 0.1, 0.5, 1.0) == pytest.approx(3.286596160632325)
    report = sr.validate_constants(
        L=1.0, eta=0.0, rho=1.0, kappa=0.1, varrho=0.01, lambda_max=0.49,
        omega=0.5, Omega=0.5, tau=10.0, a=1.0, k_max=100,
        lambda_schedule="inverse-square")
    assert isinstance(report, dict)
    json.dumps(report)


def test_noise_matches_requested_level():
    y = [np.array([1.0, -2.0]), np.array([0.5])]
    out = sr.add_relative_noise(y, 0.0, 7)
    assert np.array_equal(out["y_delta"][0], y[0])
    assert out["delta"] == 0.0
    noisy = sr.add_relative_noise(y, 0.1, 7)
    for clean, d, pert in zip(y, noisy["delta_i"], noisy["y_delta"]):
        assert np.linalg.norm(pert - clean) == pytest.approx(d, rel=1e-12)
    assert noisy["delta"] ** 2 == pytest.approx(np.sum(noisy["delta_i"] ** 2), rel=1e-12)


def test_metrics_match_skimage():
    skm = pytest.importorskip("skimage.metrics")
    r, c = np.meshgrid(np.arange(24), np.arange(20), indexing="ij")
    a = 0.5 + 0.5 * np.sin(0.3 * r + 0.2 * c)
    b = a + 0.1 * np.cos(0.7 * r - 0.4 * c) + 0.05 * np.sin(0.11 * r * c)
    ref = skm.structural_similarity(a, b, data_range=1.0, gaussian_weights=True,
                                    sigma=1.5, use_sample_covariance=False)
    assert sr.ssim(a, b, 1.0) == pytest.approx(ref, abs=1e-6)
    assert sr.psnr(a, b, 1.0) == pytest.approx(
        skm.peak_signal_noise_ratio(a, b, data_range=1.0), rel=1e-10)
    assert sr.relative_error(2 * a, a) == pytest.approx(1.0)


def test_schlieren_pieces():
    N = 16
    phantom = sr.shepp_logan(N)
    assert phantom.shape == (N, N)
    assert 0.0 <= phantom.min() and phantom.max() <= 1.0
    f = np.random.default_rng(1).normal(size=(N, N))
    v = sr.elliptic_solve(f)
    assert np.allclose(sr.helmholtz_apply(v), f, atol=1e-8)

    sys = sr.build_schlieren_system(phantom, 6)
    assert sys.N == N and sys.equation_count == 6
    u0 = sr.initial_image("bump:0.3", N)
    assert sys.apply(2, phantom.ravel()) == pytest.approx(sys.exact_data[2], abs=1e-12)
    step = sr.irsgd_step(sys, u0.ravel(), u0.ravel(), 2, 1.0, 0.0, sys.exact_data[2])
    assert step.shape == (N * N,)
    assert np.all(np.isfinite(step))


def test_execute_custom_linear_run(tmp_path):
    config = {
        "problem": "linear-default",
        "P": 100,
        "k_max": 300,
        "delta_rel": 1e-2,
        "output_dir": str(tmp_path),
    }
    out = sr.execute(json.dumps(config), "irsgd", 1e-2, 4)
    assert out["stop_reason"] in ("rule", "cap")
    assert 0 <= out["k_star"] <= 300
    assert len(out["k"]) == out["stop_index"] + 1
    assert math.isfinite(out["E_at_k_star"])
    assert out["u_final"].shape == (100,)
