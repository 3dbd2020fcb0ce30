"""Pointwise likelihood values, support checks and phi-gradients."""

import numpy as np
import pytest

from savigp.exceptions import ConfigurationError, DataError
from savigp.likelihoods import (
    GaussianLikelihood,
    GprnLikelihood,
    LogisticLikelihood,
    PoissonLgcpLikelihood,
    SoftmaxLikelihood,
    WarpedGaussianLikelihood,
    make_likelihood,
)

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


class TestGaussian:
    def test_matches_closed_density(self):
        lik = GaussianLikelihood(np.log(0.7))
        rng = np.random.default_rng(0)
        for _ in range(20):
            y, f = rng.normal(size=2)
            want = -0.5 * np.log(2 * np.pi * 0.7) - 0.5 * (y - f) ** 2 / 0.7
            assert lik.log_pdf(y, [f]) == pytest.approx(want, abs=1e-12)

    def test_grad_at_zero_residual(self):
        lik = GaussianLikelihood(np.log(2.0))
        g = lik.grad_phi_log_pdf(1.3, [1.3])
        assert g[0] == pytest.approx(-0.5, abs=1e-12)

    def test_analytic_grad_matches_fd(self):
        lik = GaussianLikelihood(np.log(0.5))
        base = lik.grad_phi_log_pdf(0.7, [0.2])
        fd = super(GaussianLikelihood, lik).grad_phi_log_pdf_samples(
            0.7, np.array([[0.2]])
        )[0]
        np.testing.assert_allclose(base, fd, atol=1e-6)


class TestLogistic:
    def test_half_probability(self):
        lik = LogisticLikelihood()
        assert lik.log_pdf(1, [0.0]) == pytest.approx(np.log(0.5))
        assert lik.log_pdf(1, [0.0]) == pytest.approx(-0.693147, abs=1e-6)

    def test_label_support(self):
        lik = LogisticLikelihood()
        with pytest.raises(DataError):
            lik.log_pdf(2, [0.0])

    def test_no_nan_at_extreme_latents(self):
        lik = LogisticLikelihood()
        for f in (-30.0, 30.0):
            for y in (0, 1):
                assert np.isfinite(lik.log_pdf(y, [f]))

    def test_symmetric_samples_give_half(self):
        lik = LogisticLikelihood()
        F = np.array([[3.0], [-3.0]])
        probs, _ = lik.predictive_point(F)
        assert probs[1] == pytest.approx(0.5, abs=1e-12)


class TestSoftmax:
    def test_symmetric_logits(self):
        lik = SoftmaxLikelihood(3)
        for t in (-4.0, 0.0, 2.5):
            for c in range(3):
                assert lik.log_pdf(c, [t, t, t]) == pytest.approx(-np.log(3.0))
        assert lik.log_pdf(0, [0.0, 0.0, 0.0]) == pytest.approx(-1.098612, abs=1e-6)

    def test_probabilities_sum_to_one(self):
        lik = SoftmaxLikelihood(4)
        rng = np.random.default_rng(1)
        F = rng.normal(size=(50, 4)) * 10
        probs, _ = lik.predictive_point(F)
        assert np.sum(probs) == pytest.approx(1.0, abs=1e-12)

    def test_saturation(self):
        lik = SoftmaxLikelihood(2)
        F = np.tile([[10.0, 0.0]], (5, 1))
        probs, _ = lik.predictive_point(F)
        assert probs[0] > 0.999

    def test_one_hot_and_index_labels_agree(self):
        lik = SoftmaxLikelihood(3)
        f = np.array([0.3, -0.2, 1.0])
        assert lik.log_pdf(2, f) == lik.log_pdf([0, 0, 1], f)

    def test_class_out_of_range(self):
        lik = SoftmaxLikelihood(3)
        with pytest.raises(DataError):
            lik.log_pdf(3, np.zeros(3))

    def test_no_nan_at_extreme_latents(self):
        lik = SoftmaxLikelihood(3)
        assert np.isfinite(lik.log_pdf(1, [30.0, -30.0, 0.0]))


class TestPoissonLgcp:
    def test_unit_rate_zero_count(self):
        lik = PoissonLgcpLikelihood(offset=0.0)
        assert lik.log_pdf(0, [0.0]) == pytest.approx(-1.0, abs=1e-12)

    def test_offset_gradient(self):
        lik = PoissonLgcpLikelihood(offset=0.0)
        g = lik.grad_phi_log_pdf(1, [0.0])
        assert g[0] == pytest.approx(0.0, abs=1e-12)

    def test_analytic_grad_matches_fd(self):
        lik = PoissonLgcpLikelihood(offset=0.3)
        got = lik.grad_phi_log_pdf(4, [0.8])
        fd = super(PoissonLgcpLikelihood, lik).grad_phi_log_pdf_samples(
            4, np.array([[0.8]])
        )[0]
        np.testing.assert_allclose(got, fd, atol=1e-5)

    def test_support(self):
        lik = PoissonLgcpLikelihood()
        with pytest.raises(DataError):
            lik.log_pdf(-1, [0.0])
        with pytest.raises(DataError):
            lik.log_pdf(1.5, [0.0])

    def test_large_counts_stay_finite(self):
        lik = PoissonLgcpLikelihood()
        assert np.isfinite(lik.log_pdf(500, [5.0]))


class TestWarped:
    def test_zero_amplitude_reduces_to_gaussian(self):
        lik = WarpedGaussianLikelihood(
            log_noise_variance=0.0,
            log_a=np.full(3, -np.inf),
            log_b=np.zeros(3),
            c=np.zeros(3),
        )
        assert lik.log_pdf(0.0, [0.0]) == pytest.approx(-HALF_LOG_2PI, abs=1e-12)
        gauss = GaussianLikelihood(0.0)
        rng = np.random.default_rng(2)
        for _ in range(10):
            y, f = rng.normal(size=2)
            assert lik.log_pdf(y, [f]) == pytest.approx(gauss.log_pdf(y, [f]), abs=1e-12)

    def test_warp_is_strictly_increasing(self):
        rng = np.random.default_rng(3)
        lik = WarpedGaussianLikelihood(
            log_a=rng.normal(size=3),
            log_b=rng.normal(size=3),
            c=rng.normal(size=3),
        )
        grid = np.linspace(-5.0, 5.0, 200)
        assert np.all(np.diff(lik.warp(grid)) > 0)
        assert np.all(lik.warp_deriv(grid) > 0)

    def test_warp_inverse_round_trip(self):
        rng = np.random.default_rng(4)
        lik = WarpedGaussianLikelihood(
            log_a=rng.normal(size=3) * 0.5,
            log_b=rng.normal(size=3) * 0.5,
            c=rng.normal(size=3),
        )
        y = rng.normal(size=20) * 2
        back = lik.warp_inverse(lik.warp(y))
        np.testing.assert_allclose(back, y, atol=1e-9)

    def test_fd_gradient_matches_gaussian_slice(self):
        # At a = 0 the noise-variance gradient must equal the analytic
        # Gaussian one; the finite-difference default is exercised here.
        lik = WarpedGaussianLikelihood(
            log_noise_variance=np.log(0.8),
            log_a=np.full(2, -np.inf),
            log_b=np.zeros(2),
            c=np.zeros(2),
        )
        gauss = GaussianLikelihood(np.log(0.8))
        rng = np.random.default_rng(5)
        for _ in range(5):
            y, f = rng.normal(size=2)
            got = lik.grad_phi_log_pdf(y, [f])
            want = gauss.grad_phi_log_pdf(y, [f])
            assert got[0] == pytest.approx(want[0], abs=1e-6)
            # Pinned-at-zero amplitudes contribute exactly zero gradient.
            np.testing.assert_array_equal(got[1:3], 0.0)


class TestGprn:
    def test_identity_network_zero_residual(self):
        lik = GprnLikelihood(num_outputs=1, num_nodes=1, log_noise_variance=0.0)
        y = 1.7
        f = np.array([y, 1.0])  # node = y, weight = 1
        assert lik.log_pdf([y], f) == pytest.approx(-HALF_LOG_2PI, abs=1e-12)

    def test_latent_layout_nodes_first(self):
        lik = GprnLikelihood(num_outputs=2, num_nodes=2, log_noise_variance=0.0)
        g = np.array([1.0, 2.0])
        W = np.array([[3.0, 4.0], [5.0, 6.0]])
        f = np.concatenate([g, W.ravel()])
        mean = W @ g
        want = sum(
            -HALF_LOG_2PI - 0.5 * (mean[p] - mean[p]) ** 2 for p in range(2)
        )
        assert lik.log_pdf(mean, f) == pytest.approx(want, abs=1e-12)

    def test_latent_count(self):
        lik = GprnLikelihood(num_outputs=3, num_nodes=2)
        assert lik.num_latent == 2 * (3 + 1)

    def test_weight_noise_increases_spread(self):
        base = GprnLikelihood(1, 1, log_noise_variance=0.0)
        noisy = GprnLikelihood(1, 1, log_noise_variance=0.0, log_weight_variance=0.0)
        f = np.array([0.0, 2.0])
        assert noisy.log_pdf([3.0], f) != pytest.approx(base.log_pdf([3.0], f))

    def test_output_dim_check(self):
        lik = GprnLikelihood(2, 1)
        with pytest.raises(DataError):
            lik.log_pdf([1.0], np.zeros(lik.num_latent))


class TestFactory:
    def test_names(self):
        assert isinstance(make_likelihood("gaussian"), GaussianLikelihood)
        assert isinstance(
            make_likelihood("softmax", {"softmax.classes": 3}), SoftmaxLikelihood
        )
        assert isinstance(
            make_likelihood("gprn", {"gprn.outputs": 2, "gprn.nodes": 1}),
            GprnLikelihood,
        )

    def test_unknown_name(self):
        with pytest.raises(ConfigurationError):
            make_likelihood("student-t")

    def test_missing_config(self):
        with pytest.raises(ConfigurationError):
            make_likelihood("softmax")
