import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aztecdp import transfer
from aztecdp.presets import contrast_2x2, toy_1x1
from aztecdp.weights import track_products


def test_bernoulli_scalar():
    f = transfer.bernoulli([2.0], [1.0])
    assert transfer.eval_symbol(f, 1.0) == pytest.approx(3.0)


def test_geometric_k2_values():
    f = transfer.geometric([0.5, 0.25])
    M = transfer.eval_symbol(f, 1.0)
    assert np.allclose(M, (8.0 / 7.0) * np.array([[1.0, 0.25], [0.5, 1.0]]))
    assert np.linalg.det(M) == pytest.approx(8.0 / 7.0)


def test_bernoulli_k2_det():
    f = transfer.bernoulli([1.0, 2.0], [1.0, 1.0])
    M = transfer.eval_symbol(f, 4.0)
    assert np.allclose(M, [[1.0, 0.5], [1.0, 1.0]])
    assert np.linalg.det(M) == pytest.approx(0.5)


def test_geometric_pole_guard():
    f = transfer.geometric([0.5, 0.25])
    with pytest.raises(transfer.PoleError):
        transfer.eval_symbol(f, 0.125)
    with pytest.raises(transfer.PoleError):
        transfer.eval_symbol(f, 0.0)


def test_phi_toy_value():
    assert transfer.eval_phi(toy_1x1(), 1.0)[0, 0] == pytest.approx(6.0)


def test_phi_factor_pattern():
    factors = transfer.phi_factors(contrast_2x2()).factors
    kinds = [f.kind for f in factors]
    assert kinds == ["bernoulli", "geometric", "bernoulli", "geometric"]


def test_phi_limit_lower_triangular():
    spec = contrast_2x2()
    M = transfer.eval_phi(spec, 1e6)
    limit = transfer.eval_phi(spec, 1e9)
    assert abs(M[0, 1]) < 1e-5
    assert np.allclose(M, limit, atol=1e-5)


def test_phi_det_formula():
    spec = contrast_2x2()
    tp = track_products(spec)
    rng = np.random.default_rng(3)
    z = rng.uniform(0.5, 2, 8) * np.exp(2j * np.pi * rng.random(8))
    det = np.linalg.det(transfer.eval_phi(spec, z))
    k = spec.k
    expected = np.prod(
        [(tp.gamma_v[i] - (-1) ** k * tp.alpha_v[i] / z) / (1 - tp.beta_v[i] / z) for i in range(spec.ell)],
        axis=0,
    )
    assert np.allclose(det, expected)


def test_phi_eigenvalues_match_charpoly_roots():
    # w-roots of det(Phi(z) - wI) are by construction the eigenvalues; check
    # the determinant of Phi - wI vanishes at the computed eigenvalues.
    spec = contrast_2x2()
    z = 0.7 + 0.4j
    M = transfer.eval_phi(spec, z)
    for w in np.linalg.eigvals(M):
        assert abs(np.linalg.det(M - w * np.eye(spec.k))) < 1e-10


def test_switch_pair_scalar():
    beta_p, alpha_p = transfer.switch_pair([2.0], [1.0], [0.5])
    assert beta_p[0] == pytest.approx(0.5)
    assert alpha_p[0] == pytest.approx(2.0)


def test_switch_pair_k2_values():
    beta_p, alpha_p = transfer.switch_pair([1.0, 2.0], [1.0, 1.0], [0.5, 0.25])
    assert np.allclose(alpha_p, [4.0 / 3.0, 1.5])
    assert np.allclose(beta_p, [1.0 / 6.0, 0.75])


def test_switch_pair_matrix_identity():
    rng = np.random.default_rng(11)
    for _ in range(10):
        k = rng.integers(1, 5)
        alpha = rng.uniform(0.2, 3.0, k)
        gamma = rng.uniform(0.2, 3.0, k)
        beta = rng.uniform(0.2, 3.0, k)
        beta_p, alpha_p = transfer.switch_pair(alpha, gamma, beta)
        z = rng.uniform(0.5, 2.0) * np.exp(2j * np.pi * rng.random())
        lhs = transfer.eval_symbol(transfer.bernoulli(alpha, gamma), z) @ transfer.eval_symbol(
            transfer.geometric(beta), z
        )
        rhs = transfer.eval_symbol(transfer.geometric(beta_p), z) @ transfer.eval_symbol(
            transfer.bernoulli(alpha_p, gamma), z
        )
        assert np.allclose(lhs, rhs)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(1, 4),
    st.lists(st.floats(0.05, 20.0), min_size=12, max_size=12),
)
def test_switch_pair_preserves_positivity_and_products(k, vals):
    vals = np.array(vals[: 3 * k]).reshape(3, k)
    alpha, gamma, beta = vals
    beta_p, alpha_p = transfer.switch_pair(alpha, gamma, beta)
    assert np.all(beta_p > 0) and np.all(alpha_p > 0)
    assert np.prod(alpha_p) == pytest.approx(np.prod(alpha), rel=1e-9)
    assert np.prod(beta_p) == pytest.approx(np.prod(beta), rel=1e-9)


def test_refactor_already_sorted():
    g = transfer.geometric([0.5])
    b = transfer.bernoulli([2.0], [1.0])
    minus, plus = transfer.refactor_step(transfer.SymbolFactorList((g, b)))
    assert minus.factors == (g,)
    assert plus.factors == (b,)


def test_refactor_toy():
    minus, plus = transfer.refactor_step(transfer.phi_factors(toy_1x1()))
    assert minus.factors[0].beta[0] == pytest.approx(0.5)
    assert plus.factors[0].alpha[0] == pytest.approx(2.0)


def test_refactor_product_identity_contrast():
    spec = contrast_2x2()
    phi0 = transfer.phi_factors(spec)
    minus, plus = transfer.refactor_step(phi0)
    rng = np.random.default_rng(5)
    z = np.exp(2j * np.pi * rng.random(20))
    lhs = minus.eval_many(z) @ plus.eval_many(z)
    rhs = phi0.eval_many(z)
    err = np.linalg.norm(lhs - rhs, axis=(1, 2)) / np.linalg.norm(rhs, axis=(1, 2))
    assert err.max() < 1e-12


def test_plus_product_det_scaling_at_zero():
    # z^ell * det(plus(z)) has a finite nonzero limit as z -> 0.
    spec = contrast_2x2()
    _, plus = transfer.refactor_step(transfer.phi_factors(spec))
    vals = []
    for z in (1e-4, 1e-5):
        vals.append(z ** spec.ell * np.linalg.det(plus.eval(z)))
    assert abs(vals[0]) > 1e-8
    assert vals[1] == pytest.approx(vals[0], rel=1e-3)
