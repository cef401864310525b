# tests/test_experiments.py
import os

import numpy as np
import pytest

from config.experiment_config import parse_config
from core.errors import DomainError
from core.experiments import (analyze_stability, cauchy_limit, dyadic_checkpoints, identity_suite,
                              inf_theta_distance, required_half_width, run_boundstate, run_decay_fit, run_evolve,
                              run_kato_check, run_modulate, run_orbital, run_spectrum, run_stability, run_sweep,
                              run_z_scaling, stability_checkpoints)
from core.lattice import LatticeGrid, SpinorField, make_rng, random_field
from core.modulation import ModulationTrace

EXPECTED_LAMBDA = 2.0 * np.pi + np.angle((3 + 4j) / (3 + 7j))


def _cfg(tmp_path, **overrides):
    return parse_config({"half_width": 64, "out_dir": str(tmp_path), **overrides})


def test_dyadic_checkpoints():
    assert dyadic_checkpoints(16) == [1, 2, 4, 8, 16]
    assert dyadic_checkpoints(10) == [1, 2, 4, 8, 10]
    assert dyadic_checkpoints(1) == [1]


def test_required_half_width_grows_with_steps(tmp_path):
    cfg = _cfg(tmp_path)
    short = required_half_width(cfg, 100, 0.8)
    long = required_half_width(cfg, 1000, 0.8)
    assert long > short >= 80
    assert long >= 800


def _series(diffs):
    grid = LatticeGrid(4)
    direction = SpinorField.delta(grid, 0)
    values, current = [], SpinorField.zeros(grid)
    values.append(current)
    for d in diffs:
        current = current + d * direction
        values.append(current)
    return values


def test_cauchy_limit():
    shrinking = cauchy_limit(_series([0.4, 0.2, 0.1, 0.05, 0.002]), threshold=0.01)
    assert shrinking.converged
    drifting = cauchy_limit(_series([0.1, 0.1, 0.1, 0.1]), threshold=1e-3)
    assert not drifting.converged
    short = cauchy_limit(_series([1e-6]), threshold=1e-3)
    assert not short.converged


def test_cauchy_limit_requires_shrinking_differences():
    # 差分恒定且低于阈值：不收缩就不是 Cauchy 序列
    plateau = cauchy_limit(_series([1.0, 1e-4, 1e-4, 1e-4]), threshold=1e-3)
    assert not plateau.converged
    assert plateau.diffs == pytest.approx([1.0, 1e-4, 1e-4, 1e-4])
    oscillating = cauchy_limit(_series([9e-4, -9e-4, 9e-4, -9e-4, 9e-4]), threshold=1e-3)
    assert not oscillating.converged
    assert oscillating.diffs == pytest.approx([9e-4] * 5)


def test_cauchy_limit_accepts_roundoff_floor():
    stationary = cauchy_limit(_series([1.0, 0.5, 1e-13, 1e-13, 1e-13]), threshold=1e-3)
    assert stationary.converged
    strict = cauchy_limit(_series([1.0, 0.5, 1e-13, 1e-13, 1e-13]), threshold=1e-3, noise_floor=0.0)
    assert not strict.converged


def test_stability_checkpoints_hold_out_second_half():
    assert stability_checkpoints(16) == [1, 2, 4, 8, 10, 12, 14, 16]
    assert stability_checkpoints(64) == [1, 2, 4, 8, 16, 32, 40, 48, 56, 64]
    assert set(dyadic_checkpoints(100)) <= set(stability_checkpoints(100))


def test_inf_theta_distance_matches_brute_force():
    grid = LatticeGrid(8)
    rng = make_rng(6)
    u, v = random_field(grid, rng), random_field(grid, rng)
    dist, theta = inf_theta_distance(u, v)
    thetas = 2.0 * np.pi * np.arange(360) / 360
    brute = min((u - np.exp(1j * t) * v).norm() for t in thetas)
    assert dist <= brute + 1e-12
    assert brute - dist <= 1e-3 * (u.norm() + v.norm())
    assert (u - np.exp(1j * theta) * v).norm() == pytest.approx(dist, abs=1e-10)


def test_run_sweep_keeps_order_and_isolates_failures():
    def square(x):
        if x == 3:
            raise DomainError("bad item")
        return {"x": x, "y": x * x}

    results = run_sweep(square, [1, 2, 3, 4, 5], workers=3)
    assert [r.get("x") for r in results] == [1, 2, None, 4, 5]
    assert "error" in results[2]
    assert run_sweep(square, [], workers=2) == []
    assert run_sweep(square, [2, 4], workers=1) == [{"x": 2, "y": 4}, {"x": 4, "y": 16}]


def test_run_spectrum(tmp_path):
    result = run_spectrum(_cfg(tmp_path))
    summary = result["summary"]
    assert summary["n_discrete"] == 2
    assert summary["lambda"] == pytest.approx(EXPECTED_LAMBDA, abs=1e-3)
    assert summary["decay_rate_error"] <= 1e-4
    assert summary["transfer_mismatch"] <= 1e-6
    for name in ("spectrum.csv", "summary.csv", "phi_plus.bin", "phi_minus.bin"):
        assert os.path.isfile(tmp_path / "spectrum" / name)


def test_run_spectrum_free_preset(tmp_path):
    summary = run_spectrum(_cfg(tmp_path, preset="free"))["summary"]
    assert summary["n_discrete"] == 0
    assert "lambda" not in summary


def test_run_evolve_conserves_norm(tmp_path):
    cfg = _cfg(tmp_path, horizon=8, auto_enlarge=False, initial={"recipe": "mixed", "z": [0.05, 0.0], "eps": 0.01})
    result = run_evolve(cfg)
    assert len(result["rows"]) == 8
    assert result["norm_drift"] <= 1e-12
    assert os.path.isfile(tmp_path / "evolve" / "final.bin")


def test_run_boundstate(tmp_path):
    result = run_boundstate(_cfg(tmp_path), z=complex(0.05, 0.0), sweep=True)
    assert result["row"]["residual"] <= 1e-9
    assert len(result["rows"]) == 6
    assert result["exponents"]["expected_phi_deviation"] == 7
    assert result["exponents"]["expected_lambda_shift"] == 6
    assert os.path.isfile(tmp_path / "boundstate" / "Phi.bin")


def test_decay_fit_double_clock(tmp_path):
    cfg = _cfg(tmp_path, half_width=512, decay_window=[20, 200])
    report = run_decay_fit(cfg)["report"]
    assert report.clock == "double"
    assert report.slope == pytest.approx(-1.0 / 3.0, abs=0.05)
    assert report.passed


def test_decay_fit_control_does_not_decay(tmp_path):
    cfg = _cfg(tmp_path, half_width=128, decay_window=[10, 60])
    report = run_decay_fit(cfg, control=True)["report"]
    assert report.control
    assert abs(report.slope) <= 0.02
    assert report.passed


def test_stability_exact_orbit_passes(tmp_path):
    cfg = _cfg(tmp_path, horizon=16, auto_enlarge=False,
               initial={"recipe": "bound_state", "z": [0.05, 0.0], "eps": 0.0})
    report = run_stability(cfg)
    assert report.status == "PASS", report.failed_checks
    assert report.failed_checks == []
    assert report.z_l1 <= 1e-8
    assert report.rho == pytest.approx(0.05, rel=1e-6)
    assert sorted(report.resolution) == stability_checkpoints(16)
    assert report.final_residual <= 1e-8
    assert os.path.isfile(tmp_path / "stability" / "report.csv")


def test_stability_residual_is_judged_on_held_out_checkpoints(tmp_path):
    # ε = 0.05 的混合初值在 T = 64 内 η₊ 尚未收敛，留出检查点上的残差不能是零
    cfg = _cfg(tmp_path, half_width=128, horizon=64,
               initial={"recipe": "mixed", "z": [0.03, 0.0], "eps": 0.05})
    report = run_stability(cfg)
    assert report.status == "INCONCLUSIVE"
    assert not report.eta_plus_converged
    assert "eta_plus" in report.failed_checks
    assert report.half_width > 128
    held_out = [t for t in report.resolution if t > 32]
    assert held_out == [40, 48, 56, 64]
    assert report.final_residual == pytest.approx(max(report.resolution[t] for t in held_out))
    assert report.final_residual > 1e-6
    assert report.rho == pytest.approx(0.03, rel=1e-2)


def test_truncated_trace_is_inconclusive(tmp_path, family):
    trace = ModulationTrace(failed_at=3, failure="Newton 未收敛")
    report = analyze_stability(_cfg(tmp_path), family, trace)
    assert report.status == "INCONCLUSIVE"
    assert report.failure == "Newton 未收敛"


def test_run_modulate_mixed_data(tmp_path):
    cfg = _cfg(tmp_path, horizon=8, auto_enlarge=False, initial={"recipe": "mixed", "z": [0.05, 0.0], "eps": 0.01})
    trace = run_modulate(cfg)["trace"]
    assert trace.completed
    assert len(trace) == 8
    assert sorted(trace.checkpoints) == [0, 1, 2, 4, 8]
    assert np.max(trace.column("reconstruction")) <= 1e-9
    np.testing.assert_allclose(trace.column("abs_z"), 0.05, rtol=1e-3, atol=0)
    assert os.path.isfile(tmp_path / "modulate" / "modulation.csv")


def test_run_orbital_deviation_halves_with_delta(tmp_path):
    cfg = _cfg(tmp_path, half_width=128, horizon=64, orbital_deltas=[0.02, 0.01, 0.005])
    result = run_orbital(cfg)
    assert result["failures"] == []
    rows = result["rows"]
    assert [r.delta for r in rows] == [0.02, 0.01, 0.005]
    assert rows[0].halving_ratio is None
    for row in rows[1:]:
        assert 0.3 <= row.halving_ratio <= 0.8
    for row in rows:
        assert row.sup_deviation <= 5.0 * row.delta
    assert os.path.isfile(tmp_path / "orbital" / "orbital.csv")


def test_run_z_scaling_cubic_for_linear_power(tmp_path):
    # g(s) = s 时 Z 的主项对 (z, η) 是三次的
    cfg = _cfg(tmp_path, horizon=32, nonlinearity={"p": 1},
               initial={"recipe": "mixed", "z": [0.01, 0.0], "eps": 0.05},
               z_scaling_eps=[0.02, 0.04, 0.08])
    result = run_z_scaling(cfg, workers=1)
    assert [r["eps"] for r in result["rows"]] == [0.02, 0.04, 0.08]
    assert all(r["z_l1"] > 0 for r in result["rows"])
    assert result["slope"] == pytest.approx(3.0, abs=0.5)
    assert os.path.isfile(tmp_path / "z_scaling" / "z_scaling.csv")


def test_identity_suite_passes():
    rows = identity_suite(instances=3, seed=0)
    assert [r["name"] for r in rows] == ["plancherel", "resolvent_identity", "positivity", "normalization",
                                         "fourier", "triangle", "stone_projection", "stone_endpoint_half_weight"]
    failed = [r for r in rows if r["status"] != "PASS"]
    assert not failed, failed


def test_run_kato_check(tmp_path):
    cfg = _cfg(tmp_path, half_width=16, kato_eps=[0.1, 0.03], kato_grid_size=8)
    result = run_kato_check(cfg, instances=2)
    assert result["all_pass"]
    assert result["trend"]["eps"] == [0.1, 0.03]
    assert os.path.isfile(tmp_path / "kato_check" / "kato.csv")
