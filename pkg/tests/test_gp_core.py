import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from neurogp.gp_core import (
    AmbiguityKind,
    AmbiguityParams,
    BlockStack,
    GPError,
    PosynomialBlock,
    central_difference,
    eval_logsum,
    eval_sqrt_quad,
    finite_diff_check,
    grad_logsum,
    grad_sqrt_quad,
    radicand,
)


def _block(seed=0, I=3, M=4, cov=True):
    rng = np.random.default_rng(seed)
    A = rng.integers(-2, 3, size=(I, M)).astype(float)
    mu = rng.uniform(0.1, 2.0, I)
    S = None
    if cov:
        B = rng.uniform(0.0, 0.3, size=(I, I))
        S = B @ B.T
    return PosynomialBlock(A, mu, S, label=1)


finite = st.floats(-3.0, 3.0, allow_nan=False)


class TestPosynomialBlock:
    def test_shapes_and_readonly(self):
        b = _block()
        assert (b.n_terms, b.n_vars) == (3, 4)
        with pytest.raises(ValueError):
            b.exponents[0, 0] = 5.0
        np.testing.assert_allclose(b.log_mu, np.log(b.mean_coeffs))

    @pytest.mark.parametrize(
        "kwargs, match",
        [
            (dict(exponents=np.ones((2, 3)), mean_coeffs=np.ones(3)), "exponent rows"),
            (dict(exponents=np.ones((2, 3)), mean_coeffs=np.array([1.0, 0.0])), "> 0"),
            (dict(exponents=np.ones((1, 3)), mean_coeffs=np.array([np.inf])), "non-finite"),
            (dict(exponents=np.ones((2, 1)), mean_coeffs=np.ones(2), cov=np.array([[1.0, 0.2], [0.1, 1.0]])),
             "symmetric"),
            (dict(exponents=np.ones((2, 1)), mean_coeffs=np.ones(2), cov=np.array([[1.0, -0.1], [-0.1, 1.0]])),
             ">= 0"),
            (dict(exponents=np.ones((2, 1)), mean_coeffs=np.ones(2), cov=np.array([[0.1, 1.0], [1.0, 0.1]])),
             "semidefinite"),
            (dict(exponents=np.ones((2, 1)), mean_coeffs=np.ones(2), cov=np.eye(3)), "shape"),
        ],
    )
    def test_rejects_bad_data(self, kwargs, match):
        with pytest.raises(GPError, match=match):
            PosynomialBlock(**kwargs)

    def test_with_means_keeps_structure(self):
        b = _block()
        c = b.with_means(2 * b.mean_coeffs)
        assert c.label == b.label and c.cov is b.cov
        np.testing.assert_array_equal(c.exponents, b.exponents)


class TestKernels:
    @settings(max_examples=50, deadline=None)
    @given(r=arrays(float, 4, elements=finite))
    def test_logsum_matches_direct_sum(self, r):
        b = _block()
        direct = float(np.sum(b.mean_coeffs * np.exp(b.exponents @ r)))
        assert eval_logsum(b, r) == pytest.approx(direct, rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(r=arrays(float, 4, elements=finite), shift=st.floats(-2.0, 2.0))
    def test_sqrt_quad_matches_direct_form(self, r, shift):
        b = _block()
        e = np.exp(b.exponents @ r)
        direct = np.sqrt(np.exp(shift) * e @ b.cov @ e)
        assert eval_sqrt_quad(b, r, shift) == pytest.approx(direct, rel=1e-10)
        assert radicand(b, r, shift) == pytest.approx(direct**2, rel=1e-10)

    def test_no_overflow_at_large_arguments(self):
        b = PosynomialBlock(np.array([[1.0], [2.0]]), np.array([1.0, 1.0]))
        assert np.isfinite(np.log(eval_logsum(b, np.array([300.0]))))
        assert np.isfinite(grad_logsum(b, np.array([-800.0]))).all()

    def test_logsum_is_convex_along_lines(self, rng):
        b = _block(cov=False)
        for _ in range(20):
            x, y = rng.normal(size=(2, 4))
            lam = rng.uniform()
            mid = np.log(eval_logsum(b, lam * x + (1 - lam) * y))
            assert mid <= lam * np.log(eval_logsum(b, x)) + (1 - lam) * np.log(eval_logsum(b, y)) + 1e-12

    def test_gradients_against_central_differences(self, rng):
        b = _block()
        pts = rng.normal(size=(30, 4))
        assert finite_diff_check(lambda r: eval_logsum(b, r), lambda r: grad_logsum(b, r), pts).max_rel_error < 1e-7
        chk = finite_diff_check(
            lambda r: eval_sqrt_quad(b, r, 0.3), lambda r: grad_sqrt_quad(b, r, 0.3)[0], pts
        )
        assert chk.n_checked == 30 and chk.max_rel_error < 1e-7

    def test_shift_derivative(self, rng):
        b = _block()
        r = rng.normal(size=4)
        fd = central_difference(lambda s: eval_sqrt_quad(b, r, s[0]), np.array([0.4]))[0]
        assert grad_sqrt_quad(b, r, 0.4)[1] == pytest.approx(fd, rel=1e-7)

    def test_singular_points_are_skipped(self):
        b = _block()
        chk = finite_diff_check(
            lambda r: eval_logsum(b, r), lambda r: grad_logsum(b, r), [np.zeros(4), np.ones(4)],
            singular=lambda r: r.sum() > 1,
        )
        assert chk.n_checked == 1 and len(chk.skipped) == 1

    def test_zero_covariance_gives_zero_spread(self):
        b = PosynomialBlock(np.eye(2), np.ones(2), np.zeros((2, 2)))
        r = np.array([0.3, -0.1])
        assert eval_sqrt_quad(b, r) == 0.0
        np.testing.assert_array_equal(grad_sqrt_quad(b, r)[0], 0.0)

    @pytest.mark.parametrize("r", [np.zeros(3), np.array([0.0, np.nan, 0.0, 0.0])])
    def test_bad_points(self, r):
        with pytest.raises(GPError):
            eval_logsum(_block(), r)

    def test_spread_needs_covariance(self):
        with pytest.raises(GPError, match="covariance"):
            eval_sqrt_quad(_block(cov=False), np.zeros(4))


class TestBlockStack:
    def test_matches_per_block_evaluation(self, rng):
        blocks = [_block(s, I=i) for s, i in ((1, 2), (2, 1), (3, 4))]
        stack = BlockStack(blocks)
        r = rng.normal(size=4)
        vals, jac = stack.values(r)
        lv, ljac = stack.log_values(r)
        for k, b in enumerate(blocks):
            assert vals[k] == pytest.approx(eval_logsum(b, r), rel=1e-12)
            np.testing.assert_allclose(jac[k], grad_logsum(b, r), rtol=1e-12)
            assert lv[k] == pytest.approx(np.log(eval_logsum(b, r)), rel=1e-12)
            np.testing.assert_allclose(ljac[k], grad_logsum(b, r) / eval_logsum(b, r), rtol=1e-10)

    def test_empty(self):
        with pytest.raises(GPError):
            BlockStack([])


class TestAmbiguityParams:
    def test_broadcast(self):
        g1, g2 = AmbiguityParams(gamma1=1.5, gamma2=[1.0, 2.0]).per_block(2)
        np.testing.assert_array_equal(g1, [1.5, 1.5])
        np.testing.assert_array_equal(g2, [1.0, 2.0])

    def test_kind_from_string(self):
        assert AmbiguityParams(kind="first_moment_nonneg").kind is AmbiguityKind.FIRST_MOMENT_NONNEG

    @pytest.mark.parametrize("kw", [dict(gamma1=-1.0), dict(gamma2=np.inf), dict(gamma1_obj=-0.1)])
    def test_rejects(self, kw):
        with pytest.raises(GPError):
            AmbiguityParams(**kw)

    def test_wrong_length(self):
        with pytest.raises(GPError, match="entries"):
            AmbiguityParams(gamma1=[1.0, 2.0, 3.0]).per_block(2)
