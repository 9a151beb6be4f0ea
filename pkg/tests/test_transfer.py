import numpy as np
import pytest
from numpy.testing import assert_allclose

from lowrankid.polymat import MatrixPolynomial
from lowrankid.transfer import (
    ImproperInverseError,
    RationalTransferMatrix,
    frequency_response,
    rtm_add,
    rtm_block_diag,
    rtm_identity,
    rtm_inverse,
    rtm_mul,
    rtm_simplify,
    rtm_sub,
    rtm_vstack,
    scalar_fraction,
    stability_report,
)

from helpers import (
    H_DEN,
    H_NUM,
    W1_DEN,
    W2_DEN,
    h_true,
    random_stable_matrix,
    random_stable_scalar,
    w1,
    w2,
)

GRID = np.pi * (np.arange(512) + 0.5) / 512


class TestConstruction:
    def test_monic_normalization(self):
        g = scalar_fraction([2.0, 1.0], [2.0, 0.8])
        assert_allclose(g.denom.scalar_coefficients(), [1.0, 0.4])
        assert_allclose(g.numer.scalar_coefficients(), [1.0, 0.5])

    def test_singular_constant_denominator_rejected(self):
        with pytest.raises(ValueError):
            RationalTransferMatrix(
                MatrixPolynomial(np.array([[[0.0, 0.0], [0.0, 1.0]]])),
                MatrixPolynomial.identity(2),
            )

    def test_row_mismatch_rejected(self):
        with pytest.raises(ValueError):
            RationalTransferMatrix(MatrixPolynomial.identity(2), MatrixPolynomial([1.0]))


class TestMul:
    def test_identity_times_g(self):
        g = random_stable_matrix(np.random.default_rng(0))
        out = rtm_mul(rtm_identity(2), g)
        assert_allclose(frequency_response(out, GRID), frequency_response(g, GRID), atol=1e-12)

    def test_g_times_zero(self):
        g = random_stable_matrix(np.random.default_rng(1))
        out = rtm_mul(g, RationalTransferMatrix.zero(2, 3))
        assert out.numer.is_zero
        assert out.shape == (2, 3)

    def test_deterministic_channel_times_first_factor(self):
        # the common factor cancels, leaving exactly the second channel
        out = rtm_mul(h_true(), w1())
        assert_allclose(frequency_response(out, GRID), frequency_response(w2(), GRID), atol=1e-10)
        assert_allclose(out.denom.scalar_coefficients(), W2_DEN, atol=1e-9)
        assert_allclose(out.numer.scalar_coefficients(), [1.0], atol=1e-9)

    def test_response_is_pointwise_product(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            g1 = random_stable_matrix(rng, n=2, degree=2)
            g2 = random_stable_matrix(rng, n=2, degree=2)
            resp = frequency_response(rtm_mul(g1, g2), GRID)
            ref = frequency_response(g1, GRID) @ frequency_response(g2, GRID)
            assert np.abs(resp - ref).max() < 1e-9 * max(1.0, np.abs(ref).max())

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            rtm_mul(rtm_identity(2), scalar_fraction([1.0], [1.0]))


class TestAddSub:
    def test_add_then_subtract_round_trip(self):
        rng = np.random.default_rng(3)
        g1 = random_stable_matrix(rng)
        g2 = random_stable_matrix(rng)
        s = rtm_add(g1, g2)
        ref = frequency_response(g1, GRID) + frequency_response(g2, GRID)
        assert np.abs(frequency_response(s, GRID) - ref).max() < 1e-9 * max(1.0, np.abs(ref).max())
        d = rtm_sub(s, g2)
        assert np.abs(frequency_response(d, GRID) - frequency_response(g1, GRID)).max() < 1e-8


class TestInverse:
    def test_identity(self):
        out = rtm_inverse(rtm_identity(3))
        assert_allclose(frequency_response(out, GRID), np.broadcast_to(np.eye(3), (512, 3, 3)))

    def test_scalar_swap(self):
        out = rtm_inverse(scalar_fraction(H_DEN, H_NUM))
        assert_allclose(out.numer.scalar_coefficients(), H_NUM)
        assert_allclose(out.denom.scalar_coefficients(), H_DEN)
        assert_allclose(
            frequency_response(out, GRID), frequency_response(h_true(), GRID), atol=1e-12
        )

    def test_improper_inverse_rejected(self):
        with pytest.raises(ImproperInverseError):
            rtm_inverse(scalar_fraction([0.0, 1.0], [1.0, 0.5]))

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            rtm_inverse(RationalTransferMatrix.zero(2, 1))

    def test_product_with_inverse_is_identity(self):
        rng = np.random.default_rng(4)
        eye = np.eye(2)
        for _ in range(10):
            g = random_stable_matrix(rng, n=2, degree=2)
            prod = rtm_mul(g, rtm_inverse(g))
            resp = frequency_response(prod, GRID)
            assert np.abs(resp - eye).max() < 1e-9


class TestSimplify:
    def test_cancels_shared_cubic_factor(self):
        g = scalar_fraction(W1_DEN, W2_DEN)
        out = rtm_simplify(g, 1e-6)
        assert_allclose(out.numer.scalar_coefficients(), H_NUM, atol=1e-9)
        assert_allclose(out.denom.scalar_coefficients(), H_DEN, atol=1e-9)

    def test_p_over_p_is_one(self):
        g = scalar_fraction([1.0, -0.3, 0.4], [1.0, -0.3, 0.4])
        out = rtm_simplify(g, 1e-6)
        assert out.numer.degree == 0
        assert out.denom.degree == 0
        assert_allclose(out.numer.scalar_coefficients(), [1.0], atol=1e-12)

    def test_coprime_pair_unchanged(self):
        g = scalar_fraction([1.0, 0.5], [1.0, -0.3])
        out = rtm_simplify(g, 1e-6)
        assert_allclose(out.numer.scalar_coefficients(), [1.0, 0.5])
        assert_allclose(out.denom.scalar_coefficients(), [1.0, -0.3])

    def test_preserves_response(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            common = random_stable_scalar(rng, degree=2)
            g = random_stable_scalar(rng, degree=2)
            big = scalar_fraction(
                np.convolve(g.numer.scalar_coefficients(), common.denom.scalar_coefficients()),
                np.convolve(g.denom.scalar_coefficients(), common.denom.scalar_coefficients()),
            )
            out = rtm_simplify(big, 1e-6)
            before = frequency_response(big, GRID)
            after = frequency_response(out, GRID)
            assert np.abs(after - before).max() < 1e-9 * max(1.0, np.abs(before).max())
            assert out.denom.degree == g.denom.degree

    def test_matrix_common_scalar_factor(self):
        rng = np.random.default_rng(6)
        g = random_stable_matrix(rng, n=2, degree=1)
        common = np.array([1.0, -0.4])
        den = np.zeros((g.denom.degree + 2, 2, 2))
        num = np.zeros((g.numer.degree + 2, 2, 2))
        for k, c in enumerate(common):
            den[k : k + g.denom.degree + 1] += c * g.denom.coeffs
            num[k : k + g.numer.degree + 1] += c * g.numer.coeffs
        big = RationalTransferMatrix(MatrixPolynomial(den), MatrixPolynomial(num))
        out = rtm_simplify(big, 1e-6)
        assert out.denom.degree == g.denom.degree
        assert np.abs(
            frequency_response(out, GRID) - frequency_response(g, GRID)
        ).max() < 1e-9


class TestStacking:
    def test_vstack_matches_channels(self):
        stacked = rtm_vstack([w1(), w2()])
        resp = frequency_response(stacked, GRID)
        assert_allclose(resp[:, 0, 0], frequency_response(w1(), GRID)[:, 0, 0])
        assert_allclose(resp[:, 1, 0], frequency_response(w2(), GRID)[:, 0, 0])

    def test_block_diag(self):
        bd = rtm_block_diag([w1(), h_true()])
        resp = frequency_response(bd, GRID)
        assert_allclose(resp[:, 0, 1], 0.0)
        assert_allclose(resp[:, 1, 0], 0.0)
        assert_allclose(resp[:, 1, 1], frequency_response(h_true(), GRID)[:, 0, 0])


class TestStability:
    def test_reference_factor_is_stable_minimum_phase(self):
        rep = stability_report(w1())
        assert rep.is_stable
        assert rep.is_minimum_phase
        # poles are the reciprocals of the roots of the denominator in x
        assert_allclose(sorted(np.abs(rep.poles)), [0.2, 0.5, 0.5], atol=1e-12)

    def test_textbook_unstable_pole(self):
        rep = stability_report(scalar_fraction([1.0], [1.0, -2.0]))
        assert not rep.is_stable
        assert_allclose(rep.poles, [2.0])

    def test_constant_matrix_has_no_poles(self):
        rep = stability_report(RationalTransferMatrix.identity(2))
        assert rep.is_stable
        assert len(rep.poles) == 0
        assert rep.margin == np.inf

    def test_minimum_phase_per_channel_for_columns(self):
        good = rtm_vstack([w1(), w2()])
        assert stability_report(good).is_minimum_phase
        bad = rtm_vstack([w1(), scalar_fraction([1.0, -2.0], W2_DEN)])
        assert stability_report(bad).is_minimum_phase is False

    def test_delay_numerator_not_minimum_phase(self):
        rep = stability_report(scalar_fraction([0.0, 1.0], [1.0, -0.5]))
        assert rep.is_minimum_phase is False

    def test_tolerance_domain(self):
        with pytest.raises(ValueError):
            stability_report(w1(), stability_tol=0.5)
