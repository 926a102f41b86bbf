import numpy as np
import pytest

from aztecdp import transfer, wienerhopf
from aztecdp.presets import contrast_2x2, toy_1x1
from aztecdp.weights import make_spec, track_products


def test_toy_closed_form():
    # phitilde_plus = (z+2)^N, phitilde_minus = (z-1/2)^{-N} for the scalar toy.
    for N in (1, 2, 3):
        fact = wienerhopf.run_flow(toy_1x1(), N)
        assert wienerhopf.eval_factor(fact, "plus", 1.0)[0, 0] == pytest.approx(3.0 ** N, rel=1e-12)
        assert wienerhopf.eval_factor(fact, "minus", 1.0)[0, 0] == pytest.approx(2.0 ** N, rel=1e-12)
        residual, winding = wienerhopf.verify_factorization(fact, nodes=64)
        assert residual < 1e-12
        assert winding == 0


def test_refusal_on_boundary_spec():
    with pytest.raises(wienerhopf.AssumptionError):
        wienerhopf.run_flow(toy_1x1(alpha=1.0, gamma=1.0, beta=0.5), 1)


def test_nonexistence_winding_nonzero():
    # alpha_v/gamma_v < 1 breaks existence and shows up in the winding number.
    spec = toy_1x1(alpha=0.5, gamma=1.0, beta=0.25)
    assert wienerhopf.winding_number(spec, 1) != 0


def test_contrast_residual_and_normalization():
    spec = contrast_2x2()
    fact = wienerhopf.run_flow(spec, 2)
    residual, winding = wienerhopf.verify_factorization(fact, nodes=256)
    assert residual < 1e-8
    assert winding == 0
    # z^{ellN} phitilde_minus(z) -> I at an O(1/z) rate; the prefactor of the
    # 1/z term is of order the largest weight product (~70 here), so the
    # deviation is only small once |z| is well beyond that scale.
    err = {}
    for z in (1e7, 1e8):
        m = wienerhopf.eval_factor(fact, "minus", z)
        err[z] = np.linalg.norm(z ** fact.ell_N * m - np.eye(2))
    assert err[1e8] < 1e-6
    assert err[1e8] == pytest.approx(err[1e7] / 10.0, rel=1e-2)


def test_plus_nonsingular_in_disk():
    fact = wienerhopf.run_flow(contrast_2x2(), 1)
    rng = np.random.default_rng(2)
    z = rng.uniform(0.05, 1.0, 40) * np.exp(2j * np.pi * rng.random(40))
    dets = np.linalg.det(wienerhopf.eval_factor_many(fact, "plus", z))
    assert np.all(np.abs(dets) > 1e-12)


def test_defining_identity_on_circle():
    spec = contrast_2x2()
    fact = wienerhopf.run_flow(spec, 1)
    rng = np.random.default_rng(4)
    z = np.exp(2j * np.pi * rng.random(20))
    lhs = wienerhopf.eval_factor_many(fact, "minus", z) @ wienerhopf.eval_factor_many(fact, "plus", z)
    phi = transfer.eval_phi(spec, z)
    target = phi.copy()
    for _ in range(spec.k * fact.N - 1):
        target = target @ phi
    rel = np.linalg.norm(lhs - target, axis=(1, 2)) / np.linalg.norm(target, axis=(1, 2))
    assert rel.max() < 1e-10


def test_flow_consistency_and_eigenvalue_invariance():
    spec = contrast_2x2()
    N = 2
    current = transfer.phi_factors(spec)
    rng = np.random.default_rng(9)
    z = rng.uniform(0.7, 1.4, 10) * np.exp(2j * np.pi * rng.random(10))
    spectra = [np.sort_complex(np.linalg.eigvals(current.eval(z[0])))]
    for _ in range(spec.k * N):
        minus, plus = transfer.refactor_step(current)
        nxt = transfer.SymbolFactorList(tuple(plus.factors) + tuple(minus.factors))
        lhs = plus.eval_many(z) @ minus.eval_many(z)
        rhs = nxt.eval_many(z)
        rel = np.linalg.norm(lhs - rhs, axis=(1, 2)) / np.linalg.norm(rhs, axis=(1, 2))
        assert rel.max() < 1e-10
        current = nxt
        spectra.append(np.sort_complex(np.linalg.eigvals(current.eval(z[0]))))
    for s in spectra[1:]:
        assert np.allclose(s, spectra[0], rtol=1e-8)


def test_track_product_invariants_along_flow():
    spec = contrast_2x2()
    tp = track_products(spec)
    fact = wienerhopf.run_flow(spec, 2)
    for j in range(len(fact.minus_factors)):
        betas = sorted(float(np.prod(f.beta)) for f in fact.minus_factors[j].factors)
        assert np.allclose(betas, sorted(tp.beta_v))
        alphas = sorted(
            float(np.prod(f.alpha) / np.prod(f.gamma)) for f in fact.plus_factors[j].factors
        )
        assert np.allclose(alphas, sorted(tp.alpha_v / tp.gamma_v))


def test_det_C_matches_minus_limit():
    spec = contrast_2x2()
    fact = wienerhopf.run_flow(spec, 1)
    z = 1e8
    prod = np.eye(spec.k, dtype=complex)
    for minus in fact.minus_factors:
        prod = prod @ minus.eval(z)
    assert np.linalg.det(prod) == pytest.approx(np.linalg.det(fact.C), rel=1e-6)


def test_random_specs_factorize():
    rng = np.random.default_rng(21)
    for _ in range(3):
        k = int(rng.integers(1, 4))
        ell = int(rng.integers(1, 4))
        alpha = rng.uniform(1.5, 3.0, (k, ell))
        beta = rng.uniform(0.1, 0.8, (k, ell)) ** (1.0 / k)
        gamma = rng.uniform(0.3, 0.9, (k, ell))
        spec = make_spec(k, ell, alpha, beta, gamma)
        fact = wienerhopf.run_flow(spec, 2)
        residual, winding = wienerhopf.verify_factorization(fact, nodes=128)
        assert residual < 1e-8
        assert winding == 0
