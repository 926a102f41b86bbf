import numpy as np
import pytest

from aztecdp import bruteforce, kasteleyn, transfer
from aztecdp.presets import contrast_2x2, genus4_3x3, toy_1x1
from aztecdp.weights import make_spec


def test_toy_matrix_and_partition_function():
    spec = toy_1x1()
    K = kasteleyn.build_aztec_kasteleyn(spec, 1).toarray()
    assert K.shape == (2, 2)
    # rows: white (0,-1), (0,0); cols: black (0,0), (1,0)
    assert np.allclose(K, [[2.0, 0.5], [1.0, -1.0]])
    assert abs(np.linalg.det(K)) == pytest.approx(2.5)
    assert bruteforce.partition_function(spec, 1) == pytest.approx(2.5)


@pytest.mark.parametrize("builder,N", [(toy_1x1, 1), (toy_1x1, 2), (contrast_2x2, 1)])
def test_partition_function_vs_enumeration(builder, N):
    spec = builder()
    K = kasteleyn.build_aztec_kasteleyn(spec, N).toarray()
    det = abs(np.linalg.det(K))
    assert det == pytest.approx(bruteforce.partition_function(spec, N), rel=1e-10)
    assert det > 0


def test_column_swap_flips_sign_only():
    spec = contrast_2x2()
    K = kasteleyn.build_aztec_kasteleyn(spec, 1).toarray()
    K2 = K[:, list(range(K.shape[1]))]
    K2[:, [0, 1]] = K2[:, [1, 0]]
    assert np.linalg.det(K2) == pytest.approx(-np.linalg.det(K))


def test_torus_toy_closed_form():
    spec = toy_1x1()
    for z, w in [(1.3 + 0.2j, 0.5 - 0.1j), (0.4 - 0.9j, 2.0)]:
        K = kasteleyn.eval_torus_kasteleyn(spec, z, w)
        expected = (1 + 2 / z) - w * (1 - 0.5 / z)
        assert K.shape == (1, 1)
        assert K[0, 0] == pytest.approx(expected)


def test_torus_reality():
    spec = contrast_2x2()
    z, w = 0.8 + 0.3j, -0.2 + 1.1j
    K1 = kasteleyn.eval_torus_kasteleyn(spec, np.conj(z), np.conj(w))
    K2 = kasteleyn.eval_torus_kasteleyn(spec, z, w)
    assert np.linalg.det(K1) == pytest.approx(np.conj(np.linalg.det(K2)))


@pytest.mark.parametrize("builder", [toy_1x1, contrast_2x2, genus4_3x3])
def test_charpoly_det_identity(builder):
    spec = builder()
    rng = np.random.default_rng(12)
    for _ in range(20):
        z = rng.uniform(0.5, 2.0) * np.exp(2j * np.pi * rng.random())
        w = rng.uniform(0.5, 2.0) * np.exp(2j * np.pi * rng.random())
        det = np.linalg.det(kasteleyn.eval_torus_kasteleyn(spec, z, w))
        P = kasteleyn.eval_charpoly_transfer(spec, z, w)
        assert abs(det - P) <= 1e-10 * (1.0 + abs(det))


def test_charpoly_toy_coefficients():
    poly = kasteleyn.charpoly_coeffs(toy_1x1())
    # P = 1 + 2/z - w + 0.5 w/z ; rows are z-exponents -1, 0
    assert poly.coeffs == pytest.approx(np.array([[2.0, 0.5], [1.0, -1.0]]))


def test_charpoly_table_roundtrip_contrast():
    spec = contrast_2x2()
    poly = kasteleyn.charpoly_coeffs(spec)
    rng = np.random.default_rng(1)
    for _ in range(20):
        z = rng.uniform(0.4, 2.2) * np.exp(2j * np.pi * rng.random())
        w = rng.uniform(0.4, 2.2) * np.exp(2j * np.pi * rng.random())
        ref = np.linalg.det(kasteleyn.eval_torus_kasteleyn(spec, z, w))
        assert abs(poly.eval(z, w) - ref) <= 1e-9 * (1.0 + abs(ref))


def test_newton_polygon_support():
    spec = genus4_3x3()
    poly = kasteleyn.charpoly_coeffs(spec)
    c = poly.coeffs
    assert abs(c[0, 0]) > 1e-12 and abs(c[-1, 0]) > 1e-12
    assert abs(c[0, -1]) > 1e-12 and abs(c[-1, -1]) > 1e-12


def test_charpoly_p_z0_roots_are_angles():
    spec = contrast_2x2()
    poly = kasteleyn.charpoly_coeffs(spec)
    for root in (20.0 / 19.0, 15.0):  # (-1)^k alpha_v/gamma_v with k = 2
        assert abs(poly.eval(root, 0.0)) < 1e-9


def test_charpoly_derivative_tables():
    spec = contrast_2x2()
    poly = kasteleyn.charpoly_coeffs(spec)
    z, w = 1.1 + 0.3j, 0.6 - 0.8j
    h = 1e-6
    pz_fd = (poly.eval(z + h, w) - poly.eval(z - h, w)) / (2 * h)
    pw_fd = (poly.eval(z, w + h) - poly.eval(z, w - h)) / (2 * h)
    assert poly.eval_pz(z, w) == pytest.approx(pz_fd, rel=1e-6)
    assert poly.eval_pw(z, w) == pytest.approx(pw_fd, rel=1e-6)


def test_torus_inverse_toy_scalar():
    spec = toy_1x1()
    z, w = 1.2 + 0.1j, 0.3 + 0.7j
    entry = kasteleyn.torus_inverse_entry(spec, z, w, (0, 0), (0, 0))
    K = kasteleyn.eval_torus_kasteleyn(spec, z, w)
    assert entry == pytest.approx(1.0 / K[0, 0])


@pytest.mark.parametrize("builder", [contrast_2x2, genus4_3x3])
def test_torus_inverse_vs_dense(builder):
    spec = builder()
    rng = np.random.default_rng(8)
    for _ in range(10):
        z = rng.uniform(0.6, 1.7) * np.exp(2j * np.pi * rng.random())
        w = rng.uniform(0.6, 1.7) * np.exp(2j * np.pi * rng.random())
        K = kasteleyn.eval_torus_kasteleyn(spec, z, w)
        Kinv = np.linalg.inv(K)
        for _ in range(4):
            i, ip = rng.integers(0, spec.ell, 2)
            j, jp = rng.integers(0, spec.k, 2)
            entry = kasteleyn.torus_inverse_entry(spec, z, w, (i, j), (ip, jp))
            # rows of K are whites (i,j), columns blacks: inverse swaps roles
            assert entry == pytest.approx(Kinv[i * spec.k + j, ip * spec.k + jp], rel=1e-9, abs=1e-12)


def test_torus_inverse_identity_random_spec():
    rng = np.random.default_rng(17)
    spec = make_spec(2, 3, rng.uniform(0.5, 2, (2, 3)), rng.uniform(0.2, 0.9, (2, 3)), rng.uniform(0.5, 2, (2, 3)))
    z, w = 1.4 * np.exp(0.77j), 0.9 * np.exp(2.1j)
    K = kasteleyn.eval_torus_kasteleyn(spec, z, w)
    inv = np.zeros_like(K)
    for i in range(spec.ell):
        for j in range(spec.k):
            for ip in range(spec.ell):
                for jp in range(spec.k):
                    inv[i * spec.k + j, ip * spec.k + jp] = kasteleyn.torus_inverse_entry(
                        spec, z, w, (i, j), (ip, jp)
                    )
    assert np.linalg.norm(K @ inv - np.eye(K.shape[0])) < 1e-10
