"""Action differential, region classification, arctic curve, limit shape.

The scaled diamond is parameterized by global coordinates (xi, eta) in
(-1, 1)^2.  For each such point the action differential

    dF = (k/2)(1-xi) dw/w - (ell/2)(1-eta) dz/z - dlogf

is a meromorphic differential on the spectral curve, where dlogf is the
unique differential with simple poles at the angles (residue k at each q0,
-ell at each p0, 0 at the infinite angles) and vanishing periods over the
compact ovals.  Its 2*k*ell zeros classify the point: a conjugate pair of
zeros off the real locus means rough, four zeros on a compact oval means
smooth, an extra pair on an unbounded real arc means frozen.  The rough
region is homeomorphic to the amoeba interior via the zero's Log image, the
arctic curve is parameterized by the amoeba boundary, and the limit shape is
a contour integral of dF along a path from the classifying locus to the
distinguished unbounded arc.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import kernels, spectral, transfer
from .kasteleyn import CharPoly
from .weights import WeightSpec
from .wienerhopf import AssumptionError

__all__ = [
    "DlogF",
    "RegionTag",
    "build_dlogf",
    "eval_dF",
    "map_to_coords",
    "critical_points",
    "classify_region",
    "omega_map",
    "limit_shape",
    "trace_arctic_curve",
    "limiting_kernel_curve_form",
    "curve_context",
]


@dataclass(frozen=True)
class DlogF:
    """Coefficient table Q with d log f = Q(z, w) dz / (z w P_w)."""

    poly: CharPoly               # Q as a CharPoly-shaped table
    residue_error: float
    period_error: float

    def eval(self, z, w):
        return self.poly.eval(z, w)


@dataclass
class RegionTag:
    kind: str                    # rough | smooth | frozen | boundary
    index: int | None = None     # oval index (smooth) or region index (frozen)
    detail: str = ""


class CurveContext:
    """Bundle of curve data reused by all geometry operations on one spec."""

    def __init__(self, spec: WeightSpec):
        self.spec = spec
        self.sd = spectral.spectral_data(spec)
        self.poly = self.sd.poly
        self.ovals, self.arcs = spectral.trace_real_locus(spec)
        self.dlogf = build_dlogf(spec, _context=self)
        self._route_data = None
        self._anchor = None

    # -- path routing through the amoeba -------------------------------------
    def _routes(self):
        """Membership grid plus BFS predecessors toward the anchor cell."""
        if self._route_data is not None:
            return self._route_data
        r1s, r2s, member = self.sd.membership_grid(320)
        anchor = self.anchor_point()
        la = (np.log(abs(anchor[0])), np.log(abs(anchor[1])))
        ia = int(np.clip(np.searchsorted(r1s, la[0]), 0, len(r1s) - 1))
        ib = int(np.clip(np.searchsorted(r2s, la[1]), 0, len(r2s) - 1))
        inside = np.argwhere(member)
        d = np.abs(inside[:, 0] - ia) + np.abs(inside[:, 1] - ib)
        ia, ib = inside[np.argmin(d)]
        # Dijkstra with diagonal moves, from the anchor outward
        n = len(r1s)
        dist = np.full((n, n), np.inf)
        pred = np.full((n, n, 2), -1, dtype=int)
        dist[ia, ib] = 0.0
        pq = [(0.0, ia, ib)]
        moves = [(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
                 (1, 1, 1.42), (1, -1, 1.42), (-1, 1, 1.42), (-1, -1, 1.42)]
        while pq:
            dd, a, b = heapq.heappop(pq)
            if dd > dist[a, b]:
                continue
            for da, db, c in moves:
                a2, b2 = a + da, b + db
                if not (0 <= a2 < n and 0 <= b2 < n) or not member[a2, b2]:
                    continue
                nd = dd + c
                if nd < dist[a2, b2]:
                    dist[a2, b2] = nd
                    pred[a2, b2] = (a, b)
                    heapq.heappush(pq, (nd, a2, b2))
        self._route_data = (r1s, r2s, member, dist, pred, (ia, ib))
        return self._route_data

    def route_to_anchor(self, r1: float, r2: float):
        """Polyline of (r1, r2) waypoints inside the amoeba toward the anchor."""
        r1s, r2s, member, dist, pred, target = self._routes()
        n = len(r1s)
        ia = int(np.clip(np.searchsorted(r1s, r1), 0, n - 1))
        ib = int(np.clip(np.searchsorted(r2s, r2), 0, n - 1))
        if not np.isfinite(dist[ia, ib]):
            inside = np.argwhere(np.isfinite(dist))
            dd = np.abs(inside[:, 0] - ia) + np.abs(inside[:, 1] - ib)
            ia, ib = inside[np.argmin(dd)]
        cells = [(ia, ib)]
        while (ia, ib) != target:
            ia, ib = pred[ia, ib]
            if ia < 0:
                raise AssumptionError("no route to the anchor arc inside the amoeba")
            cells.append((ia, ib))
        pts = [(float(r1s[a]), float(r2s[b])) for a, b in cells]
        return [(r1, r2)] + pts

    # -- anchor on the distinguished arc --------------------------------------
    def anchor_point(self):
        """A fixed point of the unbounded arc with index 1 (inside the box)."""
        if self._anchor is not None:
            return self._anchor
        arc = next(a for a in self.arcs if a.index == 1)
        lo1, hi1, lo2, hi2 = self.sd.box
        pts = arc.points
        lz = np.log(np.abs(pts[:, 0]))
        lw = np.log(np.abs(pts[:, 1]))
        ok = (lz > lo1) & (lz < hi1) & (lw > lo2) & (lw < hi2)
        idx = np.nonzero(ok)[0]
        mid = idx[len(idx) // 2]
        self._anchor = (float(pts[mid, 0]), float(pts[mid, 1]))
        return self._anchor

    # -- lifting ---------------------------------------------------------------
    def lift_path(self, waypoints, start_zw):
        """Continuously lift an in-amoeba polyline to curve points.

        The starting curve point fixes the branch; each waypoint is solved by
        a 1-D search in the angle of z with eigenvalue tracking in w.  Steps
        are subdivided when continuity is at risk.
        """
        out = [start_zw]
        i = 1
        pts = [(p, 0) for p in waypoints]
        while i < len(pts):
            (r1, r2), depth = pts[i]
            p1, p2 = np.log(abs(out[-1][0])), np.log(abs(out[-1][1]))
            nxt = None
            if np.hypot(r1 - p1, r2 - p2) <= 0.08:
                nxt = self._lift_point(r1, r2, out[-1])
            if nxt is None:
                if depth >= 30:
                    # unliftable hop (typically the last sliver against the
                    # boundary); the remaining gap is below route resolution
                    i += 1
                    continue
                pts.insert(i, ((0.5 * (r1 + p1), 0.5 * (r2 + p2)), depth + 1))
                continue
            out.append(nxt)
            i += 1
        return out

    def _lift_point(self, r1, r2, prev):
        """Curve point with Log = (r1, r2) near ``prev``, or None."""
        zp, wp = prev
        th0 = np.angle(zp)

        def branch(theta):
            lam = np.linalg.eigvals(transfer.eval_phi(self.spec, np.exp(r1 + 1j * theta)))
            j = np.argmin(np.abs(lam - wp))
            return lam[j]

        def f(theta):
            return np.log(abs(branch(theta))) - r2

        f0 = f(th0)
        lo = hi = th0
        flo = fhi = f0
        step = 0.02
        for _ in range(40):
            lo2, hi2 = lo - step, hi + step
            flo2, fhi2 = f(lo2), f(hi2)
            if flo2 * f0 <= 0:
                lo, hi, flo, fhi = lo2, th0, flo2, f0
                break
            if fhi2 * f0 <= 0:
                lo, hi, flo, fhi = th0, hi2, f0, fhi2
                break
            lo, hi, flo, fhi = lo2, hi2, flo2, fhi2
            step *= 1.6
            if step > 0.8:
                return None
        else:
            return None
        theta = brentq(f, lo, hi, xtol=1e-14)
        z = np.exp(r1 + 1j * theta)
        w = branch(theta)
        # keep the branch consistent: reject hops across the curve
        if abs(w - wp) > 2.0 * (abs(wp) + abs(w)) * 0.5:
            return None
        return complex(z), complex(w)


_ctx_cache: dict = {}


def curve_context(spec: WeightSpec) -> CurveContext:
    key = spec.key()
    if key not in _ctx_cache:
        _ctx_cache[key] = CurveContext(spec)
    return _ctx_cache[key]


# ---------------------------------------------------------------------------
# the third-kind differential replacing d log f
# ---------------------------------------------------------------------------

def build_dlogf(spec: WeightSpec, _context: CurveContext | None = None) -> DlogF:
    """Solve for Q with d log f = Q(z, w) dz/(z w P_w).

    Linear constraints: residues k at each q0 angle, -ell at each p0 angle,
    0 at the infinite angles (closed forms via the edge polynomials of the
    Newton rectangle), plus a vanishing period over every compact oval.  The
    system is solved in least squares; its kernel is spanned by P itself,
    which is the zero differential on the curve.
    """
    sd = spectral.spectral_data(spec)
    poly = sd.poly
    k, ell = spec.k, spec.ell
    nm, nb = ell + 1, k + 1
    nq = nm * nb

    def unknown(m, b):
        return m * nb + b

    rows, rhs = [], []
    ang = sd.angles
    c = poly.coeffs

    # residue k at q0_i = (z_i, 0): -Q(z_i, 0) / (z_i P_z(z_i, 0)) = k
    for z_i in ang.q0:
        pz = sum((m - ell) * c[m, 0] * z_i ** (m - ell - 1) for m in range(nm))
        row = np.zeros(nq)
        for m in range(nm):
            row[unknown(m, 0)] = z_i ** (m - ell)
        rows.append(row)
        rhs.append(-k * z_i * pz)
    # residue 0 at qinf_i = (beta_i, inf): Q_bk(beta_i) = 0
    for z_i in ang.qinf:
        row = np.zeros(nq)
        for m in range(nm):
            row[unknown(m, k)] = z_i ** (m - ell)
        rows.append(row)
        rhs.append(0.0)
    # residue -ell at p0_j = (0, w_j): Q_em(w_j)/(w_j P_em'(w_j)) = -ell
    for w_j in ang.p0:
        pw = sum(b * c[0, b] * w_j ** (b - 1) for b in range(1, nb))
        row = np.zeros(nq)
        for b in range(nb):
            row[unknown(0, b)] = w_j ** b
        rows.append(row)
        rhs.append(-ell * w_j * pw)
    # residue 0 at pinf_j = (inf, gamma_j): Q_e0(gamma_j) = 0
    for w_j in ang.pinf:
        row = np.zeros(nq)
        for b in range(nb):
            row[unknown(ell, b)] = w_j ** b
        rows.append(row)
        rhs.append(0.0)

    # vanishing periods over the compact ovals
    ovals = _context.ovals if _context is not None else spectral.trace_real_locus(spec)[0]
    nquad = 256
    for oval in ovals:
        z, w, t = oval.quadrature_nodes(nquad)
        za, zb = oval.z_range
        h = 0.5 * (zb - za)
        dzdt = -h * np.sin(t)
        pw = poly.eval_pw(z + 0j, w + 0j)
        base = dzdt / (z * w * pw)          # weight of each monomial sample
        row = np.zeros(nq)
        for m in range(nm):
            for b in range(nb):
                row[unknown(m, b)] = np.real(np.sum(z ** (m - ell) * w ** b * base)) / nquad
        rows.append(row)
        rhs.append(0.0)

    A = np.asarray(rows)
    y = np.asarray(rhs)
    # normalize row scales so the least-squares balance is meaningful
    scale = np.linalg.norm(A, axis=1)
    scale[scale == 0] = 1.0
    q, *_ = np.linalg.lstsq(A / scale[:, None], y / scale, rcond=None)
    resid = A @ q - y
    qtab = CharPoly(k, ell, q.reshape(nm, nb))

    # verification: small-loop residues against the closed forms
    res_err = _verify_residues(spec, poly, qtab)
    per_err = 0.0
    for oval in ovals:
        z, w, t = oval.quadrature_nodes(nquad)
        za, zb = oval.z_range
        dzdt = -0.5 * (zb - za) * np.sin(t)
        vals = qtab.eval(z + 0j, w + 0j) / (z * w * poly.eval_pw(z + 0j, w + 0j)) * dzdt
        per_err = max(per_err, abs(np.sum(vals)) * 2 * np.pi / nquad)
    if res_err > 1e-8 or per_err > 1e-7:
        raise AssumptionError(
            f"dlogf construction failed: residue error {res_err:.2e}, "
            f"period error {per_err:.2e}")
    return DlogF(poly=qtab, residue_error=res_err, period_error=per_err)


def _verify_residues(spec, poly, qtab, nloop: int = 400) -> float:
    """Compare small-loop quadrature residues with the prescribed values."""
    sd = spectral.spectral_data(spec)
    ang = sd.angles
    k, ell = spec.k, spec.ell
    worst = 0.0

    def dlogf_entry(z, w):
        return qtab.eval(z, w) / (z * w * poly.eval_pw(z, w))

    th = 2.0 * np.pi * (np.arange(nloop) + 0.3) / nloop
    # q0 angles: local coordinate w around 0 on the branch through (z_i, 0);
    # dz/dtheta = -(P_w/P_z) i w by implicit differentiation, so the loop
    # integrand is analytic and the trapezoid converges geometrically
    for z_i in ang.q0:
        # keep the z-excursion of the loop small compared to the angle scale
        slope = abs(poly.eval_pw(complex(z_i), 0.0) / poly.eval_pz(complex(z_i), 0.0))
        rho = min(1e-3 * (1 + abs(z_i)), 1e-3 * (1 + abs(z_i)) / (1e-9 + slope))
        wv = rho * np.exp(1j * th)
        zv = np.empty_like(wv)
        z = complex(z_i)
        for idx, wc in enumerate(wv):
            for _ in range(40):
                p, pz, _ = poly.eval_all(z, wc)
                z = z - p / pz
            zv[idx] = z
        pzv = poly.eval_pz(zv, wv)
        pwv = poly.eval_pw(zv, wv)
        dz = -(pwv / pzv) * 1j * wv
        res = np.sum(dlogf_entry(zv, wv) * dz) / nloop / 1j
        worst = max(worst, abs(res - k))
    for w_j in ang.p0:
        # regularized slope of the branch through (0, w_j)
        e1 = np.polynomial.polynomial.polyval(w_j, poly.coeffs[1])
        e0p = np.polynomial.polynomial.polyval(
            w_j, poly.coeffs[0, 1:] * np.arange(1, poly.k + 1))
        slope = abs(e1 / e0p) if e0p != 0 else 0.0
        rho = min(1e-4, 1e-3 * (1 + abs(w_j)) / (1e-9 + slope))
        zv = rho * np.exp(1j * th)
        wv = np.empty_like(zv)
        w = complex(w_j)
        for idx, zc in enumerate(zv):
            for _ in range(40):
                p, _, pw = poly.eval_all(zc, w)
                w = w - p / pw
            wv[idx] = w
        res = np.sum(dlogf_entry(zv, wv) * 1j * zv) / nloop / 1j
        worst = max(worst, abs(res + ell))
    return worst


# ---------------------------------------------------------------------------
# the action differential and its critical points
# ---------------------------------------------------------------------------

def eval_dF(spec: WeightSpec, point, xi: float, eta: float) -> complex:
    """dF/dz at a curve point (z, w)."""
    ctx = curve_context(spec)
    z, w = complex(point[0]), complex(point[1])
    p, pz, pw = ctx.poly.eval_all(z, w)
    wprime = -pz / pw
    k, ell = spec.k, spec.ell
    return (0.5 * k * (1 - xi) * wprime / w - 0.5 * ell * (1 - eta) / z
            - ctx.dlogf.eval(z, w) / (z * w * pw))


def _g_table(ctx: CurveContext, xi: float, eta: float) -> CharPoly:
    """z w P_w dF/dz as a coefficient table on the Newton rectangle."""
    spec = ctx.spec
    gz = ctx.poly.dz().coeffs       # z dP/dz
    gw = ctx.poly.dw().coeffs       # w dP/dw
    G = (-0.5 * spec.k * (1 - xi) * gz
         - 0.5 * spec.ell * (1 - eta) * gw
         - ctx.dlogf.poly.coeffs)
    return CharPoly(spec.k, spec.ell, G)


def critical_points(spec: WeightSpec, xi: float, eta: float):
    """All zeros of dF on the curve: solutions of P = 0, G = 0.

    Found by eliminating w through a numerically interpolated resultant and
    polishing each candidate with a two-variable Newton iteration; the count
    is 2 k ell (with multiplicity) for (xi, eta) in the open square.
    """
    ctx = curve_context(spec)
    poly = ctx.poly
    G = _g_table(ctx, xi, eta)
    k, ell = spec.k, spec.ell
    deg = 2 * k * ell + 2 * max(k, ell)  # generous bound
    n = 4 << int(np.ceil(np.log2(deg + 1)))
    zs = np.exp(2j * np.pi * np.arange(n) / n)
    vals = np.empty(n, dtype=complex)
    for i, z in enumerate(zs):
        cp = (poly.coeffs * (z ** np.arange(0, ell + 1))[:, None]).sum(axis=0)
        cg = (G.coeffs * (z ** np.arange(0, ell + 1))[:, None]).sum(axis=0)
        vals[i] = spectral._resultant(cp, cg)
    coeffs = np.fft.fft(vals)[:deg + 1] / n
    roots = np.roots(coeffs[::-1])
    roots = roots[np.abs(roots) > 1e-10]

    out = []
    for z0 in roots:
        cw = np.roots(spectral._w_poly(poly, z0))
        cand = min(cw, key=lambda w0: abs(G.eval(z0, w0)) / G.eval_scale(z0, w0))
        z, w = complex(z0), complex(cand)
        for _ in range(60):
            p, pz, pw = poly.eval_all(z, w)
            g, gz2, gw2 = G.eval_all(z, w)
            J = np.array([[pz, pw], [gz2, gw2]])
            try:
                step = np.linalg.solve(J, np.array([p, g]))
            except np.linalg.LinAlgError:
                break
            z, w = z - step[0], w - step[1]
            if abs(step[0]) + abs(step[1]) < 1e-14 * (1 + abs(z) + abs(w)):
                break
        if not (np.isfinite(z) and np.isfinite(w)):
            continue
        if abs(poly.eval(z, w)) > 1e-8 * poly.eval_scale(z, w):
            continue
        if abs(G.eval(z, w)) > 1e-7 * G.eval_scale(z, w):
            continue
        out.append((z, w))
    return out


def _dedupe_points(points, rtol=1e-6):
    out = []
    for z, w in points:
        dup = False
        for z2, w2 in out:
            if abs(z - z2) < rtol * (1 + abs(z2)) and abs(w - w2) < rtol * (1 + abs(w2)):
                dup = True
                break
        if not dup:
            out.append((z, w))
    return out


def _locate_real_point(ctx: CurveContext, z: float, w: float, tol: float = 0.08):
    """Which real-locus piece a real curve point belongs to.

    Returns ('oval', m) or ('arc', i) by trace proximity measured in the
    mixed log metric, or None when the point is not near any trace.
    """
    best = (None, tol)

    def dist(points):
        d = np.hypot(points[:, 0] - z, points[:, 1] - w) / (
            1.0 + np.abs(points[:, 0]) + np.abs(points[:, 1]))
        return float(d.min())

    for oval in ctx.ovals:
        d = dist(oval.points)
        if d < best[1]:
            best = (("oval", oval.index), d)
    for arc in ctx.arcs:
        d = dist(arc.points)
        if d < best[1]:
            best = (("arc", arc.index), d)
    return best[0]


def classify_region(spec: WeightSpec, xi: float, eta: float,
                    real_tol: float = 1e-7, merge_tol: float = 1e-4) -> RegionTag:
    """Locate the two non-forced zeros of dF and tag the region."""
    ctx = curve_context(spec)
    pts = critical_points(spec, xi, eta)
    complex_pts = [p for p in pts
                   if abs(p[0].imag) > real_tol * (1 + abs(p[0]))
                   or abs(p[1].imag) > real_tol * (1 + abs(p[1]))]
    if complex_pts:
        pair = _dedupe_points(complex_pts)
        if len(pair) >= 2:
            # close conjugate pair near the real locus = near the arctic curve
            z, w = pair[0]
            if abs(z.imag) < merge_tol * (1 + abs(z)) and abs(w.imag) < merge_tol * (1 + abs(w)):
                return RegionTag("boundary", detail="conjugate pair close to real locus")
            return RegionTag("rough")
        return RegionTag("boundary", detail="unpaired complex zero within tolerance")

    # all zeros real: count per structure against the forced baseline
    counts: dict = {}
    for z, w in pts:
        loc = _locate_real_point(ctx, z.real, w.real)
        if loc is not None:
            counts[loc] = counts.get(loc, 0) + 1
    k, ell = spec.k, spec.ell
    corner = {1, ell + 1, ell + k + 1, 2 * ell + k + 1}
    extras = []
    for loc, cnt in counts.items():
        kind, idx = loc
        if kind == "oval":
            surplus = cnt - 2
        else:
            surplus = cnt - (0 if idx in corner else 1)
        if surplus > 0:
            extras.append((loc, surplus))
    if not extras:
        return RegionTag("boundary", detail=f"no surplus zeros located: {counts}")
    loc, surplus = max(extras, key=lambda t: t[1])
    kind, idx = loc
    if kind == "oval":
        return RegionTag("smooth", index=idx)
    return RegionTag("frozen", index=idx)


def omega_map(spec: WeightSpec, xi: float, eta: float):
    """The classifying zero of dF off the real locus (rough region only).

    Of the conjugate pair, the representative with positive imaginary part of
    z (or of w when z is nearly real) is returned; this choice is the one
    consistent with the orientation conventions used by the limit shape.
    """
    pts = critical_points(spec, xi, eta)
    cplx = [p for p in pts
            if abs(p[0].imag) > 1e-7 * (1 + abs(p[0]))
            or abs(p[1].imag) > 1e-7 * (1 + abs(p[1]))]
    if not cplx:
        raise AssumptionError("no off-real zero of dF: point is not in the rough region")
    z, w = cplx[0]
    if abs(z.imag) > 1e-9 * (1 + abs(z)):
        if z.imag < 0:
            z, w = np.conj(z), np.conj(w)
    elif w.imag < 0:
        z, w = np.conj(z), np.conj(w)
    return complex(z), complex(w)


def map_to_coords(spec: WeightSpec, point):
    """Inverse of the rough-region homeomorphism: curve point -> (xi, eta)."""
    ctx = curve_context(spec)
    z, w = complex(point[0]), complex(point[1])
    p, pz, pw = ctx.poly.eval_all(z, w)
    wd = -pz / pw / w            # (dw/dz)/w
    zd = 1.0 / z
    k, ell = spec.k, spec.ell
    A = np.array([
        [0.5 * k * wd.imag, -0.5 * ell * zd.imag],
        [0.5 * k * wd.real, -0.5 * ell * zd.real],
    ])
    dlf = ctx.dlogf.eval(z, w) / (z * w * pw)
    bvec = 0.5 * k * wd - 0.5 * ell * zd - dlf
    B = np.array([bvec.imag, bvec.real])
    try:
        xi, eta = np.linalg.solve(A, B)
    except np.linalg.LinAlgError as exc:
        raise AssumptionError("point lies on the real locus (A singular)") from exc
    return float(xi), float(eta)


# ---------------------------------------------------------------------------
# limit shape
# ---------------------------------------------------------------------------

def _path_for_region(ctx: CurveContext, xi: float, eta: float, tag: RegionTag | None = None):
    """The half-path from the classifying locus to the anchor arc, lifted."""
    spec = ctx.spec
    tag = tag or classify_region(spec, xi, eta)
    anchor = ctx.anchor_point()
    if tag.kind == "rough":
        z0, w0 = omega_map(spec, xi, eta)
    elif tag.kind == "smooth":
        oval = next(o for o in ctx.ovals if o.index == tag.index)
        pts = oval.points
        mid = len(pts) // 4
        z0, w0 = complex(pts[mid, 0]), complex(pts[mid, 1])
    elif tag.kind == "frozen":
        if tag.index == 1:
            return [(complex(anchor[0]), complex(anchor[1]))], tag
        arc = next(a for a in ctx.arcs if a.index == tag.index)
        pts = arc.points
        lo1, hi1, lo2, hi2 = ctx.sd.box
        lz = np.log(np.abs(pts[:, 0]))
        lw = np.log(np.abs(pts[:, 1]))
        ok = (lz > lo1) & (lz < hi1) & (lw > lo2) & (lw < hi2)
        idx = np.nonzero(ok)[0]
        mid = idx[len(idx) // 2] if len(idx) else len(pts) // 2
        z0, w0 = complex(pts[mid, 0]), complex(pts[mid, 1])
    else:
        raise AssumptionError(f"cannot build a path at a boundary point: {tag.detail}")

    waypoints = ctx.route_to_anchor(np.log(abs(z0)), np.log(abs(w0)))
    lifted = ctx.lift_path(waypoints, (z0, w0))
    lifted.append((complex(anchor[0]), complex(anchor[1])))
    # fix the branch orientation at the first off-real point: positive
    # imaginary z (positive imaginary w when z is nearly real)
    for q in lifted:
        zq, wq = q
        if abs(zq.imag) > 1e-9 * (1 + abs(zq)):
            if zq.imag < 0:
                lifted = [(np.conj(a), np.conj(b)) for a, b in lifted]
            break
        if abs(wq.imag) > 1e-9 * (1 + abs(wq)):
            if wq.imag < 0:
                lifted = [(np.conj(a), np.conj(b)) for a, b in lifted]
            break
    return lifted, tag


def _path_integrals(ctx: CurveContext, path, xi: float, eta: float):
    """(int dF, int dz/z, int dw/w) along the lifted half-path.

    Logarithmic pieces are summed exactly from increments; the dlogf part is
    integrated with composite Simpson over the lifted chain.
    """
    z = np.array([p[0] for p in path])
    w = np.array([p[1] for p in path])
    dlz = np.log(z[1:] / z[:-1])
    dlw = np.log(w[1:] / w[:-1])
    int_dz = np.sum(dlz)
    int_dw = np.sum(dlw)

    def dlf(zv, wv):
        return ctx.dlogf.eval(zv, wv) / (zv * wv * ctx.poly.eval_pw(zv, wv))

    def on_curve(zv, wv):
        for _ in range(6):
            wv = wv - ctx.poly.eval(zv, wv) / ctx.poly.eval_pw(zv, wv)
        return wv

    def simpson(z0, w0, f0, z1, w1, f1, depth):
        zm = 0.5 * (z0 + z1)
        wm = on_curve(zm, 0.5 * (w0 + w1))
        fm = dlf(zm, wm)
        whole = (f0 + 4.0 * fm + f1) / 6.0 * (z1 - z0)
        if depth >= 10:
            return whole
        zq1 = 0.5 * (z0 + zm)
        wq1 = on_curve(zq1, 0.5 * (w0 + wm))
        fq1 = dlf(zq1, wq1)
        zq2 = 0.5 * (zm + z1)
        wq2 = on_curve(zq2, 0.5 * (wm + w1))
        fq2 = dlf(zq2, wq2)
        left = (f0 + 4.0 * fq1 + fm) / 6.0 * (zm - z0)
        right = (fm + 4.0 * fq2 + f1) / 6.0 * (z1 - zm)
        if abs(left + right - whole) < 1e-10 * (1.0 + abs(left + right)):
            return left + right
        return (simpson(z0, w0, f0, zm, wm, fm, depth + 1)
                + simpson(zm, wm, fm, z1, w1, f1, depth + 1))

    f_nodes = dlf(z, w)
    int_dlogf = 0.0 + 0.0j
    for i in range(len(z) - 1):
        int_dlogf += simpson(z[i], w[i], f_nodes[i], z[i + 1], w[i + 1], f_nodes[i + 1], 0)

    k, ell = ctx.spec.k, ctx.spec.ell
    int_dF = (0.5 * k * (1 - xi) * int_dw - 0.5 * ell * (1 - eta) * int_dz - int_dlogf)
    return int_dF, int_dz, int_dw


def limit_shape(spec: WeightSpec, xi: float, eta: float):
    """(hbar, d hbar/d xi, d hbar/d eta) at a point off the arctic curve.

    The full integration contour is the lifted half-path followed by its
    conjugate reversed; for conjugation-symmetric differentials the closed
    combination equals 2i Im of the half-path integral.
    """
    ctx = curve_context(spec)
    path, tag = _path_for_region(ctx, xi, eta)
    if len(path) < 2:
        return 1.0, 0.0, 0.0  # north region: empty contour
    int_dF, int_dz, int_dw = _path_integrals(ctx, path, xi, eta)
    k, ell = spec.k, spec.ell
    # The closed conjugation-symmetric contour contributes +/- 2i Im of the
    # half-path integrals, the sign depending on which side of the real locus
    # the lift entered.  It is fixed by matching the height-change slope
    # against the Ronkin gradient of the corresponding complement component
    # (exact lattice data) or, in the rough region, at Log of the zero.
    if tag.kind == "rough":
        zc, wc = omega_map(spec, xi, eta)
        g = spectral.ronkin_gradient(spec, np.log(abs(zc)), np.log(abs(wc)))
    elif tag.kind == "smooth":
        g = ctx.sd.component_by_oval(tag.index).lattice
    else:
        g = ctx.sd.component_by_region(tag.index).lattice
    best = None
    for sigma in (1.0, -1.0):
        s_cand = sigma * int_dw.imag / np.pi
        t_cand = -sigma * int_dz.imag / np.pi
        err = abs(s_cand - g[0]) + abs(t_cand + k - g[1])
        if best is None or err < best[0]:
            best = (err, sigma)
    if best[0] > 1e-3:
        raise AssumptionError(
            f"slope {best[0]:.2e} inconsistent with the Ronkin gradient {g}; "
            "path orientation could not be fixed")
    sigma = best[1]
    hbar = 1.0 + sigma * int_dF.imag / (np.pi * k * ell)
    dxi = -sigma * int_dw.imag / (2.0 * np.pi * ell)
    deta = sigma * int_dz.imag / (2.0 * np.pi * k)
    return float(hbar), float(dxi), float(deta)


# ---------------------------------------------------------------------------
# arctic curve
# ---------------------------------------------------------------------------

@dataclass
class ArcticComponent:
    """One traced component of the arctic curve."""

    kind: str                    # 'smooth' (closed) or 'frozen' (open arc)
    index: int
    closed: bool
    xi_eta: np.ndarray           # (n, 2)
    uv: np.ndarray               # (n, 2)
    r_trace: np.ndarray          # (n, 2) amoeba boundary (r1, r2)
    cusp_params: list            # indices into the trace
    convex_ok: bool = True


def _deriv_uniform(f: np.ndarray, closed: bool) -> np.ndarray:
    """Five-point first derivative with unit spacing (periodic when closed)."""
    n = len(f)
    if closed:
        fp2 = np.roll(f, -2); fp1 = np.roll(f, -1)
        fm1 = np.roll(f, 1); fm2 = np.roll(f, 2)
        return (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / 12.0
    out = np.gradient(f)
    if n >= 5:
        out[2:-2] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / 12.0
    return out


def _resample_trace(ctx: CurveContext, points: np.ndarray, n: int, closed: bool):
    """Uniform log-arclength resampling projected back onto the curve."""
    if closed:
        points = np.vstack([points, points[:1]])
    logs = np.log(np.abs(points))
    seg = np.hypot(np.diff(logs[:, 0]), np.diff(logs[:, 1]))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    targets = np.linspace(0.0, total, n, endpoint=not closed)
    z = np.interp(targets, s, points[:, 0])
    w = np.interp(targets, s, points[:, 1])
    # project back onto the curve along the better-conditioned coordinate
    for _ in range(6):
        p = ctx.poly.eval(z + 0j, w + 0j)
        pz = ctx.poly.eval_pz(z + 0j, w + 0j)
        pw = ctx.poly.eval_pw(z + 0j, w + 0j)
        use_w = np.abs(pw) >= np.abs(pz)
        w = np.where(use_w, w - (p / pw).real, w)
        z = np.where(~use_w, z - (p / pz).real, z)
    return np.column_stack([z, w])


def _arctic_from_trace(ctx: CurveContext, points: np.ndarray, closed: bool,
                       kind: str, index: int, n: int = 600) -> ArcticComponent:
    spec = ctx.spec
    k, ell = spec.k, spec.ell
    logs = np.log(np.abs(points))
    total = float(np.hypot(np.diff(logs[:, 0]), np.diff(logs[:, 1])).sum())
    n = int(min(12000, max(n, total / 0.012)))
    pts = _resample_trace(ctx, points, n, closed)
    z, w = pts[:, 0], pts[:, 1]
    r1 = np.log(np.abs(z))
    r2 = np.log(np.abs(w))

    # exact unit tangent in log coordinates: (r1', r2') ~ (P_w/z, -P_z/w),
    # signed to follow the sampling direction
    zc, wc = z + 0j, w + 0j
    pz = ctx.poly.eval_pz(zc, wc).real
    pw = ctx.poly.eval_pw(zc, wc).real
    v1 = pw / z
    v2 = -pz / w
    norm = np.hypot(v1, v2)
    d1 = np.gradient(r1)
    d2 = np.gradient(r2)
    sign = 1.0 if np.sum(np.sign(v1 * d1 + v2 * d2)) >= 0 else -1.0
    t1, t2 = sign * v1 / norm, sign * v2 / norm
    r1p, r2p = t1, t2

    # exact curvature: differentiate V = sign (P_w/z, -P_z/w) along the locus
    # with dz/dt = z t1, dw/dt = w t2, then project out the norm change
    pzz = ctx.poly.eval_dmn(zc, wc, 2, 0).real
    pzw = ctx.poly.eval_dmn(zc, wc, 1, 1).real
    pww2 = ctx.poly.eval_dmn(zc, wc, 0, 2).real
    zdot, wdot = z * t1, w * t2
    v1dot = sign * ((pzw * zdot + pww2 * wdot) / z - pw * zdot / z ** 2)
    v2dot = sign * (-(pzz * zdot + pzw * wdot) / w + pz * wdot / w ** 2)
    vdot_dot_t = v1dot * t1 + v2dot * t2
    r1pp = (v1dot - vdot_dot_t * t1) / norm
    r2pp = (v2dot - vdot_dot_t * t2) / norm

    seg = np.hypot(np.diff(r1), np.diff(r2))
    h_t = float(np.median(seg))

    # d/dt log|f| along the locus and its exact t-derivative
    Q = ctx.dlogf.poly
    qv = Q.eval(zc, wc).real
    qz = Q.eval_pz(zc, wc).real
    qw = Q.eval_pw(zc, wc).real
    den = z * w * pw
    dlf = qv / den
    dlf_num_dot = qz * zdot + qw * wdot
    den_dot = (zdot * w * pw + z * wdot * pw
               + z * w * (pzw * zdot + pww2 * wdot))
    dlf_dot = (dlf_num_dot - dlf * den_dot) / den
    zddot = zdot * t1 + z * r1pp      # d/dt (z t1)
    b = 0.5 * k * r2p - 0.5 * ell * r1p - dlf * zdot
    bp = 0.5 * k * r2pp - 0.5 * ell * r1pp - dlf_dot * zdot - dlf * zddot

    xi = np.empty(n)
    eta = np.empty(n)
    for i in range(n):
        A = np.array([[0.5 * k * r2p[i], -0.5 * ell * r1p[i]],
                      [0.5 * k * r2pp[i], -0.5 * ell * r1pp[i]]])
        try:
            xi[i], eta[i] = np.linalg.solve(A, np.array([b[i], bp[i]]))
        except np.linalg.LinAlgError:
            xi[i], eta[i] = np.nan, np.nan
    uv = np.column_stack([-(xi + 1) / (2 * ell), -(eta + 1) / (2 * k)])

    # cusps: sign changes of the tangent-alignment factor with hysteresis
    up = _deriv_uniform(uv[:, 0], closed) / h_t
    vp = _deriv_uniform(uv[:, 1], closed) / h_t
    align = up * r1p + vp * r2p
    # analysis window: the geometric action of an open arc happens where it
    # is least deep inside its tentacles (for wedges between close tentacles
    # that can be outside the amoeba box entirely)
    lo1, hi1, lo2, hi2 = ctx.sd.box
    depth = np.maximum.reduce([r1 - hi1, lo1 - r1, r2 - hi2, lo2 - r2])
    window = depth < depth.min() + 5.0
    # towards the tentacle ends the boundary straightens exponentially and
    # the 2x2 solve degenerates; gate on the boundary curvature
    curv = np.abs(r1p * r2pp - r1pp * r2p)
    window &= curv > 1e-5 * np.nanmax(curv)
    finite = np.abs(align[np.isfinite(align) & window])
    thresh = 0.02 * np.percentile(finite, 95) if len(finite) else 0.0
    cusps = []
    state = 0  # +-1 once |align| exceeds the threshold
    first_state = 0
    idx_range = range(n) if closed else range(4, n - 4)
    for i in idx_range:
        a = align[i]
        if not window[i]:
            continue
        if not np.isfinite(a) or abs(a) < thresh:
            continue
        s = 1 if a > 0 else -1
        if state == 0:
            state = s
            first_state = s
        elif s != state:
            cusps.append(i)
            state = s
    if closed and state != 0 and first_state != state:
        cusps.append(0)
    # drop crossing pairs that only bound a low-prominence excursion
    gmax = float(np.nanmax(np.abs(align))) if len(finite) else 0.0
    changed = True
    while changed and len(cusps) >= 2:
        changed = False
        m = len(cusps)
        pairs = range(m) if closed else range(m - 1)
        best = None
        for idx in pairs:
            a, bnd = sorted(cusps)[idx], sorted(cusps)[(idx + 1) % m]
            span = np.arange(a, bnd if bnd > a else bnd + n) % n
            prom = float(np.nanmax(np.abs(align[span]))) if len(span) else 0.0
            if prom < 0.06 * gmax and (best is None or prom < best[0]):
                best = (prom, idx)
        if best is not None:
            srt = sorted(cusps)
            m = len(srt)
            i1 = best[1]
            remove = {srt[i1], srt[(i1 + 1) % m]}
            cusps = [c for c in cusps if c not in remove]
            changed = True

    # local convexity: (u,v) tangent cross products keep one sign between
    # cusps; degenerate-speed samples and machine-noise stragglers (isolated,
    # below half a percent) are not allowed to flip the verdict
    cross = up * (_deriv_uniform(vp, closed) / h_t) - vp * (_deriv_uniform(up, closed) / h_t)
    speed2 = up * up + vp * vp
    med = np.median(speed2[np.isfinite(speed2) & window])
    mask = np.isfinite(cross) & (speed2 > 0.15 * med) & window
    for c in cusps:
        mask[max(0, c - 12):min(n, c + 12)] = False
    if not closed:
        mask[:12] = False
        mask[-12:] = False
    signs = np.sign(cross[mask])
    signs = signs[signs != 0]
    if len(signs) == 0:
        convex_ok = True
    else:
        major = 1.0 if np.count_nonzero(signs > 0) >= len(signs) / 2 else -1.0
        convex_ok = bool(np.count_nonzero(signs != major) <= max(2, 0.005 * len(signs)))
    return ArcticComponent(kind=kind, index=index, closed=closed,
                           xi_eta=np.column_stack([xi, eta]), uv=uv,
                           r_trace=np.column_stack([r1, r2]),
                           cusp_params=cusps, convex_ok=convex_ok)


def trace_arctic_curve(spec: WeightSpec, samples: int = 600):
    """Arctic-curve components parameterized by the amoeba boundary.

    Smooth-region boundaries come from the compact ovals (closed, expect four
    cusps each); frozen-region boundaries from the unbounded arcs clipped to
    the amoeba box (one cusp each except the four corner regions).
    """
    ctx = curve_context(spec)
    out = []
    for oval in ctx.ovals:
        out.append(_arctic_from_trace(ctx, oval.points, True, "smooth", oval.index, samples))
    for arc in ctx.arcs:
        out.append(_arctic_from_trace(ctx, arc.points, False, "frozen", arc.index, samples))
    return out


# ---------------------------------------------------------------------------
# curve-integral form of the limiting kernel
# ---------------------------------------------------------------------------

def _oriented_halfpath(ctx: CurveContext, xi: float, eta: float):
    """Lifted half-path and the orientation sign fixed by the Ronkin gradient."""
    spec = ctx.spec
    path, tag = _path_for_region(ctx, xi, eta)
    if len(path) < 2:
        return path, tag, 1.0
    int_dF, int_dz, int_dw = _path_integrals(ctx, path, xi, eta)
    k = spec.k
    if tag.kind == "rough":
        zc, wc = path[0]
        g = spectral.ronkin_gradient(spec, np.log(abs(zc)), np.log(abs(wc)))
    elif tag.kind == "smooth":
        g = ctx.sd.component_by_oval(tag.index).lattice
    else:
        g = ctx.sd.component_by_region(tag.index).lattice
    best = None
    for sigma in (1.0, -1.0):
        err = (abs(sigma * int_dw.imag / np.pi - g[0])
               + abs(-sigma * int_dz.imag / np.pi + k - g[1]))
        if best is None or err < best[0]:
            best = (err, sigma)
    if best[0] > 1e-3:
        raise AssumptionError("path orientation could not be fixed")
    return path, tag, best[1]


def limiting_kernel_curve_form(spec: WeightSpec, xi: float, eta: float, pos, pos_prime):
    """Limiting kernel block via the integral over the curve path.

    Equals the torus-integral form of :func:`kernels.limiting_kernel` at the
    magnetic coordinates matched to (xi, eta); used as the two-route
    cross-check of the limiting kernel.
    """
    ctx = curve_context(spec)
    k, ell = spec.k, spec.ell
    n2l = 2 * ell
    kappa, i = divmod(pos[0], n2l)
    kappap, ip = divmod(pos_prime[0], n2l)
    zeta, zetap = pos[1] // k, pos_prime[1] // k
    dkappa, dzeta = kappa - kappap, zetap - zeta
    factors = transfer.phi_factors(spec).factors

    def prefix_at(z, count):
        M = np.eye(k, dtype=complex)
        for f in factors[:count]:
            M = M @ transfer.eval_symbol(f, z)
        return M

    def integrand(z, w):
        lam, V = np.linalg.eig(transfer.eval_phi(spec, z))
        j = int(np.argmin(np.abs(lam - w)))
        Vinv = np.linalg.inv(V)
        proj = np.outer(V[:, j], Vinv[j])
        core = -proj  # adj(Phi - wI)/d_w det(Phi - wI) on the curve
        M = np.linalg.solve(prefix_at(z, ip), core) @ prefix_at(z, i)
        return M * z ** dzeta * w ** dkappa / z

    path, tag, sigma = _oriented_halfpath(ctx, xi, eta)

    def on_curve(zv, wv):
        for _ in range(6):
            wv = wv - ctx.poly.eval(zv, wv) / ctx.poly.eval_pw(zv, wv)
        return wv

    def simpson(q0, f0, q1, f1, depth):
        zm = 0.5 * (q0[0] + q1[0])
        wm = on_curve(zm, 0.5 * (q0[1] + q1[1]))
        fm = integrand(zm, wm)
        whole = (f0 + 4.0 * fm + f1) / 6.0 * (q1[0] - q0[0])
        if depth >= 8:
            return whole
        qm = (zm, wm)
        left = simpson_half(q0, f0, qm, fm)
        right = simpson_half(qm, fm, q1, f1)
        if np.max(np.abs(left + right - whole)) < 1e-9 * (1.0 + np.max(np.abs(left + right))):
            return left + right
        return (simpson(q0, f0, qm, fm, depth + 1)
                + simpson(qm, fm, q1, f1, depth + 1))

    def simpson_half(q0, f0, q1, f1):
        zm = 0.5 * (q0[0] + q1[0])
        wm = on_curve(zm, 0.5 * (q0[1] + q1[1]))
        return (f0 + 4.0 * integrand(zm, wm) + f1) / 6.0 * (q1[0] - q0[0])

    total = np.zeros((k, k), dtype=complex)
    fvals = [integrand(*q) for q in path]
    for a in range(len(path) - 1):
        total += simpson(path[a], fvals[a], path[a + 1], fvals[a + 1], 0)
    second = -sigma * total.imag / np.pi  # -(1/2pi i) * sigma * 2i Im

    first = np.zeros((k, k))
    if pos[0] > pos_prime[0]:
        n = 512
        th = 2 * np.pi * (np.arange(n) + 0.5) / n
        zcirc = np.exp(1j * th)
        acc = np.zeros((k, k), dtype=complex)
        for z in zcirc:
            Phi = transfer.eval_phi(spec, z)
            M = np.linalg.solve(prefix_at(z, ip), np.linalg.matrix_power(Phi, dkappa) if dkappa >= 0
                                else np.linalg.matrix_power(np.linalg.inv(Phi), -dkappa))
            M = M @ prefix_at(z, i)
            acc += M * z ** dzeta
        first = -(acc / n).real
    return first + second


def find_smooth_point(spec: WeightSpec, oval_index: int, tries: int = 40):
    """A (xi, eta) point inside the smooth region of the given oval."""
    ctx = curve_context(spec)
    oval = next(o for o in ctx.ovals if o.index == oval_index)
    pts = oval.points[:: max(1, len(oval.points) // 12)]
    for z, w in pts:
        try:
            xi0, eta0 = map_to_coords(spec, (z + 0j, w + 0j))
        except AssumptionError:
            continue
        for d in (0.02, 0.05, 0.1, 0.15):
            for dx, dy in ((d, 0), (-d, 0), (0, d), (0, -d), (d, d), (-d, -d)):
                xi, eta = xi0 + dx, eta0 + dy
                if not (-1 < xi < 1 and -1 < eta < 1):
                    continue
                try:
                    tag = classify_region(spec, xi, eta)
                except Exception:
                    continue
                if tag.kind == "smooth" and tag.index == oval_index:
                    return xi, eta
    raise AssumptionError(f"no interior point found for smooth region {oval_index}")
