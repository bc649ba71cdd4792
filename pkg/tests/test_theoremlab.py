import math

import numpy as np
import pytest

from grouplab.errors import LabError, UsageError
from grouplab.groupkit import abelian_irreps, make_cyclic
from grouplab.schemas import CouponConfig
from grouplab.theoremlab import (
    GRAD_RTOL,
    SUITES,
    alignment_floor,
    boundary_fit,
    check_boundary_fit,
    check_deep_features,
    check_energy_values,
    check_gf_structure,
    check_gf_trend,
    check_gradients,
    check_grokking,
    check_ht_estimator,
    check_leader_ode,
    check_maxima_structure,
    check_memorization,
    check_modulation,
    check_muon_ascent,
    check_muon_projection,
    check_optimizer_compare,
    check_reconstruction,
    check_reconstruction_dihedral,
    check_repulsion,
    check_vertex_stability,
    coupon_closed_form,
    coupon_lower_bound,
    coupon_sim,
    gf_structure_stats,
    head_then_uniform,
    offdiag_coherence,
    reconstruction_fit,
    run_suite,
    selection_probabilities,
    spectral_fraction,
)


def test_offdiag_coherence():
    assert offdiag_coherence(np.diag([1.0, 4.0, 9.0])) == 0.0
    assert offdiag_coherence(np.ones((3, 3))) == pytest.approx(1.0)
    assert offdiag_coherence(np.array([[2.0]])) == 0.0


def test_interpolating_gf_vanishes_without_decay():
    report = check_gf_structure(M=11, K=64, eta_scale=0.0, p=0.4)
    assert report.passed
    assert report.stats["gf_ratio"] <= 1e-6


@pytest.mark.parametrize("eta_scale", [0.5, 2.0, 20.0])
def test_gf_alignment_respects_ridge_floor(eta_scale):
    stats = gf_structure_stats(11, 64, eta_scale, seed=3)
    assert stats["eta"] == pytest.approx(eta_scale * stats["lam_max_ftf"])
    assert stats["alignment"] >= alignment_floor(eta_scale) - 1e-12


def test_gf_alignment_in_ridge_regime():
    report = check_gf_structure(M=11, K=64, eta_scale=20.0)
    assert report.stats["alignment"] >= 0.9
    assert report.tolerances["alignment_floor"] == pytest.approx((20 / 21) ** 2)


def test_gf_trend_small():
    report = check_gf_trend(M=11, K=64, widths=(16, 64), seeds=3)
    low, mid, high = report.stats["median_alignment"]
    assert high >= alignment_floor(20.0)
    assert low < high
    assert report.passed
    assert len(report.stats["median_alignment_by_width"]) == 2


def test_gf_trend_needs_two_scales():
    with pytest.raises(UsageError):
        check_gf_trend(eta_scales=(1.0,))


def test_repulsion_signs():
    report = check_repulsion(n=20, K=4, eta=0.1, trials=10)
    assert report.passed
    assert report.stats["passed_trials"] == 10


def test_repulsion_rejects_bad_shapes():
    with pytest.raises(UsageError):
        check_repulsion(n=4, K=4)


@pytest.mark.parametrize("M", [3, 5, 7])
def test_complex_reconstruction_is_exact(M):
    report = check_reconstruction(M)
    assert report.passed
    assert report.check == "reconstruction"
    assert report.stats["off_block"] <= 1e-8


def test_one_sign_reconstruction_fails_to_fit():
    report = check_reconstruction(3, signs="plus")
    assert report.check == "reconstruction_one_sign"
    assert report.passed
    assert report.stats["residual"] == pytest.approx(1 / math.sqrt(3), abs=1e-3)


def test_real_domain_is_reported_not_gated():
    fit = reconstruction_fit(make_cyclic(5), abelian_irreps([5]), domain="real")
    assert fit.features > 0
    assert np.isfinite(fit.residual)


@pytest.mark.parametrize("M", [4, 33])
def test_reconstruction_order_limits(M):
    with pytest.raises(UsageError):
        check_reconstruction(M)


def test_dihedral_reconstruction_is_soft():
    report = check_reconstruction_dihedral(3)
    assert not report.gating
    assert report.stats["features"] > 0


def test_muon_checks():
    assert check_muon_ascent(trials=10).passed
    projection = check_muon_projection(trials=5)
    assert not projection.gating
    assert projection.passed


def test_coupon_closed_form_uniform():
    L = 5
    harmonic = L * sum(1.0 / l for l in range(1, L + 1))
    assert coupon_closed_form([1.0 / L] * L) == pytest.approx(harmonic, rel=1e-6)
    assert coupon_lower_bound([1.0 / L] * L) == pytest.approx(harmonic)
    assert coupon_lower_bound([0.9, 0.05, 0.05]) == pytest.approx(20.0)


def test_selection_probabilities():
    p = selection_probabilities([1.0, 0.5], a=2.0)
    assert np.allclose(p, [0.8, 0.2])


def test_coupon_sim_uniform():
    report = coupon_sim(CouponConfig(mu=[1.0] * 3, a=4.0, trials=2000, seed=1))
    harmonic = 3 * (1 + 1 / 2 + 1 / 3)
    assert abs(report.stats["mean_nodes"] - harmonic) <= 5 * report.stats["se"]
    assert report.check == "coupon_independent"


def test_coupon_config_validation():
    with pytest.raises(ValueError):
        CouponConfig(mu=[1.5])
    with pytest.raises(ValueError):
        CouponConfig(mu=[1.0], trials=10)


def test_leader_ode():
    report = check_leader_ode(L=3, trajectories=5)
    assert report.passed


def test_boundary_fit_exact():
    points = [(m, 3 * math.log(m) / m) for m in (11, 23, 47)]
    c, residual = boundary_fit(points)
    assert c == pytest.approx(3.0)
    assert residual == pytest.approx(0.0, abs=1e-12)


def test_boundary_fit_errors():
    with pytest.raises(UsageError):
        boundary_fit([(11, 0.1), (23, 0.05)])
    with pytest.raises(LabError):
        boundary_fit([(11, 0.0), (23, 0.0), (31, 0.0)])


def test_boundary_fit_check():
    assert check_boundary_fit().passed


def test_energy_values_small():
    report = check_energy_values(orders=(11,), seeds=8)
    assert report.passed
    assert report.stats["Z12_freq6_energy"] == pytest.approx(6.0, rel=1e-3)


def test_maxima_structure_small():
    report = check_maxima_structure(M=11, seeds=8, flat_probes=2)
    assert report.passed


def test_memorization_check():
    report = check_memorization()
    assert report.passed
    np.testing.assert_allclose(report.params["weights"], [0.4, 0.24, 0.16, 0.1, 0.1])


def test_head_then_uniform():
    np.testing.assert_allclose(head_then_uniform((0.5, 0.3, 0.2), 7), [0.4, 0.24, 0.16, 0.05, 0.05, 0.05, 0.05])
    np.testing.assert_allclose(head_then_uniform((1, 1), 2), [0.5, 0.5])
    with pytest.raises(UsageError):
        head_then_uniform((0.5, 0.3, 0.2), 2)


def test_modulation_check():
    report = check_modulation(M=11, keep=3, seeds=4)
    assert report.passed
    assert report.stats["hits"] == 4


def test_gradient_check():
    report = check_gradients(seeds=1)
    assert report.passed
    assert "loss_tanh_depth3_residual" in report.stats
    assert report.stats["modulated_linear"] <= GRAD_RTOL


def test_ht_estimator_check():
    assert check_ht_estimator(M=7, samples=100).passed


def test_spectral_fraction():
    M, K = 11, 4
    t = np.arange(M)
    W1 = np.zeros((2 * M, K))
    W1[:M, 0] = np.cos(2 * np.pi * 3 * t / M)
    W1[:M, 1] = np.sin(2 * np.pi * 1 * t / M)
    W1[:M, 2] = 1.0
    assert spectral_fraction(W1, M) == pytest.approx(0.5)


def test_report_serializes_pass_alias():
    report = check_boundary_fit()
    dumped = report.dump()
    assert dumped["pass"] is True
    assert "passed" not in dumped


def test_unknown_suite():
    with pytest.raises(UsageError):
        run_suite("nope")


def test_run_single_suite():
    reports = run_suite("boundary_fit")
    assert [r.check for r in reports] == ["boundary_fit"]


def test_slow_suites_are_marked():
    slow = {name for name, suite in SUITES.items() if suite.slow}
    assert slow == {"vertex_stability", "grokking", "deep_features", "optimizer_compare"}


@pytest.mark.slow
def test_gf_structure_default():
    report = check_gf_structure()
    assert report.passed


@pytest.mark.slow
def test_vertex_stability_check():
    report = check_vertex_stability(M=23, seeds=4)
    assert not report.gating
    assert 0.0 <= report.stats["survival_good"] <= 1.0


@pytest.mark.slow
def test_grokking_check():
    report = check_grokking()
    assert report.passed
    assert report.stats["final_test_acc"] > report.stats["control_final_test_acc"]


@pytest.mark.slow
def test_deep_features_reports():
    report = check_deep_features(epochs=2000)
    assert not report.gating
    assert "fourier_fraction" in report.stats


@pytest.mark.slow
def test_gf_trend_default():
    report = check_gf_trend()
    assert report.passed
    assert report.stats["median_alignment"][-1] >= 0.9


@pytest.mark.slow
def test_optimizer_compare_reports_both_optimizers():
    report = check_optimizer_compare(M=11, widths=(8,), p=0.6, epochs=200)
    assert not report.gating
    assert set(report.stats) == {"adam_K8_test_acc", "muon_K8_test_acc"}
