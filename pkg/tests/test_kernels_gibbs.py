import numpy as np
import pytest

from aztecdp import kernels, transfer
from aztecdp.kasteleyn import EDGE_OFFSETS, edge_weight
from aztecdp.presets import contrast_2x2, toy_1x1


def kasteleyn_times_inverse(spec, gk, white0, white1):
    """(K_G K^{-1})_{w0, w1}: four-term sum over the black neighbors of w0."""
    total = 0.0j
    a, u = white0
    for kind, (da, du) in EDGE_OFFSETS.items():
        w = edge_weight(spec, kind, a, u)
        total += w * gk.inverse_entry((a + da, u + du), white1)
    return total


def test_toy_north_region_probabilities():
    spec = toy_1x1()
    gk = kernels.gibbs_kernel(spec, 0.0, 10.0)
    assert gk.edge_probability([((0, 0), "north")]) == pytest.approx(1.0, abs=1e-8)
    for kind in ("south", "west", "east"):
        assert gk.edge_probability([((0, 0), kind)]) == pytest.approx(0.0, abs=1e-8)


def test_toy_rough_point_partition_of_unity():
    # (r1, r2) = (0, log Phi(1)) is on the curve; probe just off it
    spec = toy_1x1()
    gk = kernels.gibbs_kernel(spec, 0.3, 0.9)
    total = sum(gk.edge_probability([((0, 0), kind)]) for kind in EDGE_OFFSETS)
    assert total == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("r", [(0.0, 10.0), (10.0, -10.0), (0.2, 0.4)])
def test_inverse_identity_window_contrast(r):
    spec = contrast_2x2()
    gk = kernels.gibbs_kernel(spec, *r)
    w0 = (0, 0)
    for w1 in [(0, 0), (1, 0), (0, 1), (-2, 3), (4, -1)]:
        val = kasteleyn_times_inverse(spec, gk, w0, w1)
        expect = 1.0 if w1 == w0 else 0.0
        assert abs(val - expect) < 1e-8


def test_inverse_entries_real():
    spec = contrast_2x2()
    gk = kernels.gibbs_kernel(spec, 0.1, 0.3)
    vals = [gk.inverse_entry((a, u), (0, 0)) for a in range(-1, 2) for u in range(-1, 2)]
    assert max(abs(v.imag) for v in vals) < 1e-9


def test_sheet_sum_matches_plain_torus_quadrature_off_curve():
    # in a frozen component the torus integrand is regular, so a plain 2-D
    # trapezoid sum must agree with the residue-based evaluation
    spec = contrast_2x2()
    r1, r2 = 0.0, 6.0
    gk = kernels.gibbs_kernel(spec, r1, r2)
    pos, pos_prime = (2, 1), (1, 0)
    block = gk.block(pos, pos_prime)
    n = 512  # reference rate is 0.95^n from the geometric pole at beta_v
    thz = 2 * np.pi * (np.arange(n) + 0.5) / n
    thw = 2 * np.pi * (np.arange(n) + 0.25) / n
    z = np.exp(r1) * np.exp(1j * thz)
    w = np.exp(r2) * np.exp(1j * thw)
    factors = transfer.phi_factors(spec).factors
    prefix = [np.broadcast_to(np.eye(2, dtype=complex), (n, 2, 2)).copy()]
    for f in factors:
        prefix.append(prefix[-1] @ transfer.eval_symbol_many(f, z))
    Phi = prefix[4]
    kappa, i = divmod(pos[0], 4)
    kappap, ip = divmod(pos_prime[0], 4)
    zeta = pos[1] // 2
    zetap = pos_prime[1] // 2
    acc = np.zeros((2, 2), dtype=complex)
    left = np.linalg.inv(prefix[ip])
    for s in range(n):
        R = np.linalg.inv(Phi[s] - w[:, None, None] * np.eye(2))
        if ip >= i:
            R = R @ Phi[s]
        else:
            R = R * w[:, None, None]
        M = left[s] @ R @ prefix[i][s]
        ph = (z[s] ** (zetap - zeta)) * (w ** (kappa - kappap))
        acc += np.einsum("t,tij->ij", ph, M) / (n * n)
    assert np.allclose(acc, block, atol=1e-8)


def test_corner_slopes_contrast():
    spec = contrast_2x2()
    big = 12.0
    assert np.allclose(kernels.slope_at(spec, big, big), (0.0, 0.0), atol=1e-8)
    assert np.allclose(kernels.slope_at(spec, -big, big), (-2.0, 0.0), atol=1e-8)
    assert np.allclose(kernels.slope_at(spec, -big, -big), (-2.0, -2.0), atol=1e-8)
    assert np.allclose(kernels.slope_at(spec, big, -big), (0.0, -2.0), atol=1e-8)


def test_frozen_rows_rule_contrast():
    spec = contrast_2x2()
    # region between the two right-pointing tentacles (r2 between log gamma_h)
    rows = kernels.classify_frozen_rows(spec, 8)  # 2*ell + k + 2 with k=ell=2
    assert rows == ["north", "west"]  # gamma_h = (0.1, 0.95): row 2 has the largest
    gk = kernels.gibbs_kernel(spec, 8.0, -1.2)
    for j, kind in enumerate(rows):
        for i in range(spec.ell):
            p = gk.edge_probability([((i, j), kind)])
            assert p == pytest.approx(1.0, abs=1e-7)


def test_corner_frozen_rows_uniform():
    spec = contrast_2x2()
    assert kernels.classify_frozen_rows(spec, 1) == ["north", "north"]
    assert kernels.classify_frozen_rows(spec, 3) == ["east", "east"]
    assert kernels.classify_frozen_rows(spec, 5) == ["south", "south"]
    assert kernels.classify_frozen_rows(spec, 7) == ["west", "west"]


def test_slope_in_box_rough_point():
    spec = contrast_2x2()
    s, t = kernels.slope_at(spec, 0.05, 0.1)
    assert -2.0 < s < 0.0
    assert -2.0 < t < 0.0
