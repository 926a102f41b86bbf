import numpy as np
import pytest

from aztecdp import bruteforce, kasteleyn, kernels
from aztecdp.presets import contrast_2x2, toy_1x1


def dense_inverse(spec, N):
    K = kasteleyn.build_aztec_kasteleyn(spec, N).toarray()
    return np.linalg.inv(K)


def test_toy_particle_probability():
    # the south-dimer particle at path position (1, -1) has probability 0.8
    spec = toy_1x1()
    fk = kernels.FiniteKernel(spec, 1)
    assert fk.value((1, -1), (1, -1)) == pytest.approx(0.8, abs=1e-10)


def test_first_term_indicator_absent():
    spec = toy_1x1()
    fk = kernels.FiniteKernel(spec, 1)
    # for m <= m' the single-integral term is absent: the block equals the
    # pairing term alone
    b_small = fk.block(0, 0, 1, 0)
    b2 = fk._term2(0, 0, 0, 1, 0, 0)  # second term alone at m=0 < m'=1
    assert np.allclose(b2, b_small, atol=1e-12)


@pytest.mark.parametrize("builder,N,tol", [(toy_1x1, 1, 1e-10), (toy_1x1, 2, 1e-9), (contrast_2x2, 1, 1e-8)])
def test_inverse_kasteleyn_vs_dense(builder, N, tol):
    spec = builder()
    Kinv = dense_inverse(spec, N)
    n = kasteleyn.diamond_size(spec, N)
    rng = np.random.default_rng(0)
    blacks = kasteleyn.black_vertices(spec, N)
    whites = kasteleyn.white_vertices(spec, N)
    pairs = [(blacks[i], whites[j]) for i, j in zip(
        rng.integers(0, len(blacks), 12), rng.integers(0, len(whites), 12))]
    for b, w in pairs:
        entry = kernels.inverse_kasteleyn_entry(spec, N, b, w)
        ref = Kinv[kasteleyn.black_index(spec, N, *b), kasteleyn.white_index(spec, N, *w)]
        assert abs(entry - ref) < tol
        assert abs(entry.imag) < 1e-9


def test_edge_probabilities_toy():
    spec = toy_1x1()
    probs = bruteforce.edge_marginals(spec, 1)
    assert kernels.edge_probability(spec, 1, [((0, -1), "south")]) == pytest.approx(0.8, abs=1e-9)
    assert kernels.edge_probability(spec, 1, [((0, 0), "west")]) == pytest.approx(0.2, abs=1e-9)
    assert probs[((0, -1), "south")] == pytest.approx(0.8)


def test_edge_probabilities_match_enumeration_contrast():
    spec = contrast_2x2()
    exact = bruteforce.edge_marginals(spec, 1)
    for (white, kind), p in sorted(exact.items())[:10]:
        assert kernels.edge_probability(spec, 1, [(white, kind)]) == pytest.approx(p, abs=1e-8)


def test_partition_of_unity_per_white_vertex():
    spec = contrast_2x2()
    N = 1
    n = kasteleyn.diamond_size(spec, N)
    for white in [(0, 0), (1, 1), (2, -1), (3, 2)]:
        total = 0.0
        for kind, _, _ in kasteleyn.edge_targets(spec, N, *white):
            total += kernels.edge_probability(spec, N, [(white, kind)])
        assert total == pytest.approx(1.0, abs=1e-10)


def test_conflicting_edges_probability_zero():
    spec = contrast_2x2()
    # two edges sharing the white vertex (0, 0)
    p = kernels.edge_probability(spec, 1, [((0, 0), "south"), ((0, 0), "west")])
    assert p == pytest.approx(0.0, abs=1e-10)


def test_joint_probability_vs_enumeration():
    spec = contrast_2x2()
    matchings = bruteforce.enumerate_matchings(spec, 1)
    Z = sum(w for w, _ in matchings)
    edges = [((0, 0), "west"), ((1, 1), "south")]
    exact = sum(w for w, m in matchings
                if m.get((0, 0)) == "west" and m.get((1, 1)) == "south") / Z
    assert kernels.edge_probability(spec, 1, edges) == pytest.approx(exact, abs=1e-8)
