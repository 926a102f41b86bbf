import numpy as np
import pytest

from aztecdp import kernels, spectral
from aztecdp.presets import contrast_2x2, genus4_3x3, toy_1x1
from aztecdp.weights import make_spec


def test_angles_toy():
    ang = spectral.compute_angles(toy_1x1())
    assert ang.q0[0] == pytest.approx(-2.0)
    assert ang.qinf[0] == pytest.approx(0.5)
    assert ang.p0[0] == pytest.approx(-4.0)
    assert ang.pinf[0] == pytest.approx(1.0)


def test_angles_contrast():
    ang = spectral.compute_angles(contrast_2x2())
    assert sorted(ang.q0) == pytest.approx([20.0 / 19.0, 15.0])


def test_coincident_angles_error():
    spec = make_spec(2, 2, np.full((2, 2), 2.0), np.full((2, 2), 0.5), np.ones((2, 2)))
    with pytest.raises(Exception):
        spectral.compute_angles(spec)


def test_membership_toy():
    kind, comp = spectral.amoeba_contains(toy_1x1(), 0.0, 10.0)
    assert kind == "complement" and comp.region_index == 1
    kind, _ = spectral.amoeba_contains(toy_1x1(), 0.0, 0.9)
    assert kind == "interior"


def test_membership_curve_points_inside():
    # Log of a random curve point with |z| = 1 lies in the amoeba
    spec = contrast_2x2()
    sd = spectral.spectral_data(spec)
    rng = np.random.default_rng(3)
    from aztecdp import transfer
    for _ in range(5):
        z = np.exp(2j * np.pi * rng.random())
        lam = np.linalg.eigvals(transfer.eval_phi(spec, z))
        w = lam[0]
        kind, _ = sd.classify_point(np.log(abs(z)), np.log(abs(w)), 1e-9), None
        assert kind[0] in ("interior", "boundary")


def test_component_counts():
    for builder, g in [(toy_1x1, 0), (contrast_2x2, 1), (genus4_3x3, 4)]:
        sd = spectral.spectral_data(builder())
        comps = sd.components
        nb = sum(1 for c in comps if c.bounded)
        nu = len(comps) - nb
        assert nb == g
        assert nu == 2 * (sd.spec.k + sd.spec.ell)
        regions = sorted(c.region_index for c in comps if not c.bounded)
        assert regions == list(range(1, nu + 1))


def test_real_locus_counts():
    for builder, g in [(toy_1x1, 0), (contrast_2x2, 1), (genus4_3x3, 4)]:
        ovals, arcs = spectral.trace_real_locus(builder())
        spec = builder()
        assert len(ovals) == g
        assert sorted(a.index for a in arcs) == list(range(1, 2 * (spec.k + spec.ell) + 1))


def test_trace_on_curve():
    spec = contrast_2x2()
    sd = spectral.spectral_data(spec)
    ovals, arcs = spectral.trace_real_locus(spec)
    for tr in ovals + arcs:
        pts = tr.points[:: max(1, len(tr.points) // 60)]
        rel = max(abs(sd.poly.eval(z, w)) / sd.poly.eval_scale(z, w) for z, w in pts)
        assert rel < 1e-9


def test_oval_quadrature_nodes():
    spec = contrast_2x2()
    sd = spectral.spectral_data(spec)
    (oval,), _ = spectral.trace_real_locus(spec)
    z, w, t = oval.quadrature_nodes(64)
    rel = np.abs(sd.poly.eval(z, w)) / [sd.poly.eval_scale(zz, ww) for zz, ww in zip(z, w)]
    assert rel.max() < 1e-8


def test_log_injectivity_on_oval():
    # the Log map restricted to a compact oval is injective
    spec = contrast_2x2()
    (oval,), _ = spectral.trace_real_locus(spec)
    pts = oval.points[:: max(1, len(oval.points) // 200)]
    logs = np.log(np.abs(pts))
    d = np.linalg.norm(logs[:, None, :] - logs[None, :, :], axis=-1)
    close = d < 1e-4
    idx = np.arange(len(pts))
    near_diag = np.abs(idx[:, None] - idx[None, :]) <= 1
    wrap = (idx[:, None] + idx[None, :]) >= len(pts) - 2
    assert np.all(close <= (near_diag | wrap))


def test_ronkin_gradient_lattice_on_components():
    spec = contrast_2x2()
    sd = spectral.spectral_data(spec)
    for comp in sd.components:
        g = spectral.ronkin_gradient(spec, *comp.representative)
        assert abs(g[0] - round(g[0])) < 1e-9
        assert abs(g[1] - round(g[1])) < 1e-9
        assert (round(g[0]), round(g[1])) == comp.lattice
        # constancy across the component
        r1, r2 = comp.representative
        g2 = spectral.ronkin_gradient(spec, r1 + 0.05, r2 - 0.05)
        if spectral.spectral_data(spec).contains(r1 + 0.05, r2 - 0.05):
            continue
        assert np.allclose(g, g2, atol=1e-9)


def test_ronkin_gradient_north_toy():
    g = spectral.ronkin_gradient(toy_1x1(), 0.0, 10.0)
    assert g == pytest.approx((0.0, 1.0), abs=1e-12)


def test_ronkin_value_finite_difference():
    spec = toy_1x1()
    r1, r2 = interior_point(toy_1x1(), 0.1)
    h = 1e-4
    g = spectral.ronkin_gradient(spec, r1, r2)
    fd1 = (spectral.ronkin(spec, r1 + h, r2) - spectral.ronkin(spec, r1 - h, r2)) / (2 * h)
    fd2 = (spectral.ronkin(spec, r1, r2 + h) - spectral.ronkin(spec, r1, r2 - h)) / (2 * h)
    assert g[0] == pytest.approx(fd1, abs=2e-4)
    assert g[1] == pytest.approx(fd2, abs=2e-4)


def interior_point(spec, r1=0.0):
    sd = spectral.spectral_data(spec)
    lo, hi = sd.slice_intervals(r1)
    # midpoint of the widest sheet interval on this vertical line
    j = int(np.argmax(hi - lo))
    r2 = 0.5 * (lo[j] + hi[j])
    assert sd.contains(r1, r2)
    return r1, float(r2)


def test_ronkin_hessian_positive_definite_interior():
    spec = contrast_2x2()
    r1, r2 = interior_point(spec, 0.3)
    h = 1e-3
    g0 = np.array(spectral.ronkin_gradient(spec, r1, r2))
    g1 = np.array(spectral.ronkin_gradient(spec, r1 + h, r2))
    g2 = np.array(spectral.ronkin_gradient(spec, r1, r2 + h))
    H = np.column_stack([(g1 - g0) / h, (g2 - g0) / h])
    H = 0.5 * (H + H.T)
    assert H[0, 0] > 0
    assert np.linalg.det(H) > 0


def test_surface_tension_round_trip():
    spec = contrast_2x2()
    s, t = -0.7, 1.3
    kind, pt = spectral.surface_tension_grad(spec, s, t)
    assert kind == "point"
    g = spectral.ronkin_gradient(spec, *pt)
    assert np.allclose(g, (s, t), atol=1e-6)


def test_surface_tension_flat_face():
    spec = contrast_2x2()
    kind, comp = spectral.surface_tension_grad(spec, -1.0, 1.0)
    assert kind == "component"
    assert comp.bounded
    assert comp.lattice == (-1, 1)
