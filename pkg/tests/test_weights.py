import numpy as np
import pytest

from aztecdp import weights
from aztecdp.presets import contrast_2x2, toy_1x1

DOC_2X2 = """
# 2x2 contrast weights
k = 2
ell = 2
alpha = 1 1
        1 1.5
beta = 0.95 1
       1 0.1
gamma = 1 0.1
        0.95 1
"""


def test_parse_contrast_document():
    spec = weights.parse_weights(DOC_2X2)
    ref = contrast_2x2()
    assert spec.k == 2 and spec.ell == 2
    assert np.array_equal(spec.alpha, ref.alpha)
    assert np.array_equal(spec.beta, ref.beta)
    assert np.array_equal(spec.gamma, ref.gamma)


def test_parse_scalar_spec():
    spec = weights.parse_weights("k = 1\nell = 1\nalpha = 2\ngamma = 1\nbeta = 0.5\n")
    assert spec.alpha[0, 0] == 2.0
    assert spec.beta[0, 0] == 0.5
    assert spec.gamma[0, 0] == 1.0


def test_negative_weight_rejected():
    with pytest.raises(weights.InputError):
        weights.parse_weights("k = 1\nell = 1\nalpha = 1\nbeta = -1\ngamma = 1\n")


def test_shape_mismatch_rejected():
    with pytest.raises(weights.InputError):
        weights.parse_weights("k = 2\nell = 2\nalpha = 1 1 1\nbeta = 1 1 1 1\ngamma = 1 1 1 1\n")


def test_delta_gauge_normalization():
    spec = weights.make_spec(
        1, 1, alpha=[[4.0]], beta=[[1.0]], gamma=[[2.0]], delta=[[2.0]]
    )
    assert spec.alpha[0, 0] == 2.0
    assert spec.beta[0, 0] == 0.5
    assert spec.gamma[0, 0] == 1.0


def test_round_trip_exact():
    spec = contrast_2x2()
    again = weights.parse_weights(weights.format_weights(spec))
    assert np.array_equal(spec.alpha, again.alpha)
    assert np.array_equal(spec.beta, again.beta)
    assert np.array_equal(spec.gamma, again.gamma)


def test_track_products_contrast():
    tp = weights.track_products(contrast_2x2())
    assert np.allclose(tp.beta_v, [0.95, 0.1])
    assert np.allclose(tp.gamma_h, [0.1, 0.95])
    assert np.allclose(tp.alpha_v / tp.gamma_v, [20.0 / 19.0, 15.0])


def test_track_products_all_ones():
    tp = weights.track_products(weights.make_spec(2, 2, np.ones((2, 2)), np.ones((2, 2)), np.ones((2, 2))))
    for arr in (tp.alpha_v, tp.beta_v, tp.gamma_v, tp.alpha_h, tp.beta_h, tp.gamma_h):
        assert np.allclose(arr, 1.0)


def test_cross_consistency_identity():
    rng = np.random.default_rng(7)
    spec = weights.make_spec(3, 2, rng.uniform(0.2, 3, (3, 2)), rng.uniform(0.2, 3, (3, 2)), rng.uniform(0.2, 3, (3, 2)))
    tp = weights.track_products(spec)
    assert np.isclose(tp.alpha_v.prod(), tp.alpha_h.prod())
    assert np.isclose(tp.beta_v.prod(), tp.beta_h.prod())
    assert np.isclose(tp.gamma_v.prod(), tp.gamma_h.prod())


def test_validate_contrast():
    diag = weights.validate(contrast_2x2())
    assert diag.wiener_hopf_ok
    assert diag.angles_distinct


def test_validate_toy_boundary():
    assert weights.validate(toy_1x1()).wiener_hopf_ok
    assert not weights.validate(toy_1x1(alpha=1.0, gamma=1.0, beta=0.5)).wiener_hopf_ok
    assert not weights.validate(weights.make_spec(2, 2, np.ones((2, 2)), np.ones((2, 2)), np.ones((2, 2)))).angles_distinct
