import math

import numpy as np
import pytest

from fovregress.core.training.losses import (
    batch_loss,
    binarize_psi,
    contrastive_loss,
    euclidean_distance,
    gcl_loss,
    mse_loss,
)
from fovregress.utils.exceptions import InputError

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])


def at_distance(d):
    """Two unit vectors in the plane whose chord distance is d."""
    theta = 2.0 * math.asin(d / 2.0)
    return E1, np.array([math.cos(theta), math.sin(theta), 0.0])


def numeric_descriptor_grad(fn, a, b, step=1e-6):
    ga, gb = np.zeros_like(a), np.zeros_like(b)
    for k in range(len(a)):
        e = np.zeros_like(a)
        e[k] = step
        ga[k] = (fn(a + e, b).value - fn(a - e, b).value) / (2 * step)
        gb[k] = (fn(a, b + e).value - fn(a, b - e).value) / (2 * step)
    return ga, gb


def test_euclidean_distance():
    assert euclidean_distance(E1, E1) == 0.0
    assert euclidean_distance(E1, -E1) == pytest.approx(2.0)
    assert euclidean_distance(E1, E2) == pytest.approx(math.sqrt(2.0))


class TestMse:
    def test_examples(self):
        assert mse_loss(E1, E1, 1.0).value == 0.0
        a, b = at_distance(1.0)
        assert mse_loss(a, b, 0.0).value == pytest.approx(0.0, abs=1e-15)
        assert mse_loss(E1, E2, 0.5).value == pytest.approx((math.sqrt(2) - 0.5) ** 2)
        assert mse_loss(E1, E2, 0.5).value == pytest.approx(0.83579, abs=1e-5)

    def test_zero_gradient_at_coincidence(self):
        out = mse_loss(E1, E1, 0.2)
        assert out.value == pytest.approx(0.64)
        np.testing.assert_array_equal(out.grad_i, 0.0)

    def test_zero_set(self):
        for d in np.linspace(0.05, 1.0, 8):
            for psi in np.linspace(0.0, 1.0, 11):
                a, b = at_distance(d)
                value = mse_loss(a, b, psi).value
                if math.isclose(d, 1.0 - psi, abs_tol=1e-12):
                    assert value == pytest.approx(0.0, abs=1e-20)
                else:
                    assert value > 0.0

    def test_pull_toward_target(self):
        a, b = at_distance(0.8)
        # moving a along a - b increases d
        direction = (a - b) / np.linalg.norm(a - b)
        too_far = mse_loss(a, b, 0.9)
        too_close = mse_loss(a, b, 0.0)
        assert np.dot(too_far.grad_i, direction) > 0
        assert np.dot(too_close.grad_i, direction) < 0

    def test_psi_out_of_range(self):
        with pytest.raises(InputError):
            mse_loss(E1, E2, 1.5)


class TestContrastive:
    def test_examples(self):
        assert contrastive_loss(E1, E1, 1).value == 0.0
        a, b = at_distance(1.2)
        assert contrastive_loss(a, b, 0, margin=1.0).value == 0.0
        a, b = at_distance(0.5)
        assert contrastive_loss(a, b, 0, margin=1.0).value == pytest.approx(0.25)

    def test_requires_binary_label(self):
        with pytest.raises(InputError):
            contrastive_loss(E1, E2, 0.5)


class TestGcl:
    def test_limits(self, rng):
        a, b = rng.normal(size=4), rng.normal(size=4)
        d = euclidean_distance(a, b)
        assert gcl_loss(a, b, 1.0).value == pytest.approx(d * d)
        assert gcl_loss(a, b, 0.0, margin=3.0).value == pytest.approx(contrastive_loss(a, b, 0, margin=3.0).value)

    def test_hand_evaluation(self):
        a, b = at_distance(0.5)
        assert gcl_loss(a, b, 0.5, margin=1.0).value == pytest.approx(0.25)


class TestGradients:
    @pytest.mark.parametrize("fn", [
        lambda a, b: mse_loss(a, b, 0.3),
        lambda a, b: contrastive_loss(a, b, 1),
        lambda a, b: contrastive_loss(a, b, 0, margin=1.5),
        lambda a, b: gcl_loss(a, b, 0.6, margin=1.5),
    ])
    def test_finite_differences_and_symmetry(self, fn, rng):
        for _ in range(10):
            a, b = rng.normal(size=5) * 0.4, rng.normal(size=5) * 0.4
            out = fn(a, b)
            np.testing.assert_array_equal(out.grad_j, -out.grad_i)
            ga, gb = numeric_descriptor_grad(fn, a, b)
            np.testing.assert_allclose(out.grad_i, ga, rtol=1e-6, atol=1e-8)
            np.testing.assert_allclose(out.grad_j, gb, rtol=1e-6, atol=1e-8)

    def test_hinge_inactive_beyond_margin(self):
        a, b = at_distance(1.5)
        out = gcl_loss(a, b, 0.0, margin=1.0)
        assert out.value == 0.0
        np.testing.assert_array_equal(out.grad_i, 0.0)


class TestBinarize:
    @pytest.mark.parametrize("psi, expected", [(0.9, 1), (0.0, 0), (0.5, 0), (0.51, 1)])
    def test_values(self, psi, expected):
        assert binarize_psi(psi, 0.5) == expected

    @pytest.mark.parametrize("threshold", [0.0, 1.0, -0.2])
    def test_threshold_range(self, threshold):
        with pytest.raises(InputError):
            binarize_psi(0.3, threshold)


class TestBatchLoss:
    @pytest.mark.parametrize("kind", ["mse", "cl", "gcl"])
    def test_rows_match_closed_form(self, kind, rng):
        a = rng.normal(size=(6, 4))
        b = rng.normal(size=(6, 4))
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        b /= np.linalg.norm(b, axis=1, keepdims=True)
        psi = np.array([0.0, 0.2, 0.5, 0.51, 0.9, 1.0])
        mean, values, gi, gj = batch_loss(kind, a, b, psi, margin=1.0)
        for k in range(6):
            d = np.linalg.norm(a[k] - b[k])
            if kind == "mse":
                expected = (d - (1.0 - psi[k])) ** 2
            else:
                w = float(binarize_psi(psi[k])) if kind == "cl" else psi[k]
                expected = w * d * d + (1.0 - w) * max(0.0, 1.0 - d) ** 2
            assert values[k] == pytest.approx(expected, rel=1e-12, abs=1e-15)
            _, _, row_gi, _ = batch_loss(kind, a[k:k + 1], b[k:k + 1], psi[k:k + 1], margin=1.0)
            np.testing.assert_allclose(gi[k], row_gi[0] / 6, rtol=1e-12, atol=1e-15)
        assert mean == pytest.approx(values.mean())
        np.testing.assert_array_equal(gj, -gi)

    def test_per_pair_losses_use_batch_formulas(self):
        a, b = at_distance(0.5)
        value, _, gi, _ = batch_loss("gcl", a, b, [0.5], margin=1.0)
        out = gcl_loss(a, b, 0.5, margin=1.0)
        assert out.value == value
        np.testing.assert_array_equal(out.grad_i, gi[0])
        with pytest.raises(InputError):
            mse_loss(E1, np.ones(2), 0.5)

    def test_rejects_bad_input(self):
        with pytest.raises(InputError):
            batch_loss("triplet", E1, E2, [0.5])
        with pytest.raises(InputError):
            batch_loss("mse", np.ones((2, 3)), np.ones((3, 3)), [0.5, 0.5])
        with pytest.raises(InputError):
            batch_loss("mse", E1, E2, [1.2])
