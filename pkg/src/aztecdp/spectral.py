"""Geometry of the spectral curve: angles, amoeba, real locus, Ronkin data.

The spectral curve is the zero set of the characteristic polynomial P(z, w);
under the standing assumptions it is a non-singular curve of genus
g = (k-1)(ell-1) whose amoeba (image under (log|z|, log|w|)) has 2(k+ell)
tentacles and g bounded complement components.  This module locates the
angles, classifies points against the amoeba, traces the real locus (compact
ovals and the unbounded arcs between consecutive angles), and evaluates the
Ronkin function together with its gradient and Legendre inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import kasteleyn, transfer
from .weights import WeightSpec, track_products, validate
from .wienerhopf import AssumptionError

__all__ = [
    "AngleSet",
    "OvalTrace",
    "ArcTrace",
    "SpectralData",
    "compute_angles",
    "spectral_data",
    "amoeba_contains",
    "trace_real_locus",
    "ronkin",
    "ronkin_gradient",
    "surface_tension_grad",
]

_SCAN = 720  # angular scan resolution for membership tests
_GRID = 400  # flood-fill grid resolution per axis


@dataclass(frozen=True)
class AngleSet:
    """The 2(k+ell) axis points of the curve, by finite coordinate.

    q0[i] = (z, 0) with z = (-1)^k alpha_v/gamma_v; qinf[i] = (z, inf) with
    z = beta_v; p0[j] = (0, w) with w = (-1)^ell alpha_h/beta_h;
    pinf[j] = (inf, w) with w = gamma_h.
    """

    q0: np.ndarray
    qinf: np.ndarray
    p0: np.ndarray
    pinf: np.ndarray


def compute_angles(spec: WeightSpec, check: bool = True) -> AngleSet:
    tp = track_products(spec)
    k, ell = spec.k, spec.ell
    angles = AngleSet(
        q0=(-1.0) ** k * tp.alpha_v / tp.gamma_v,
        qinf=tp.beta_v.copy(),
        p0=(-1.0) ** ell * tp.alpha_h / tp.beta_h,
        pinf=tp.gamma_h.copy(),
    )
    if check:
        diag = validate(spec)
        if not diag.angles_distinct:
            raise AssumptionError("coincident angles: " + "; ".join(diag.messages))
        poly = kasteleyn.charpoly_coeffs(spec)
        for z in angles.q0:
            assert abs(poly.eval(z, 0.0)) < 1e-8 * (1 + abs(z) ** ell), "q0 vanishing fails"
        for w in angles.p0:
            # z^ell P at z = 0 reduces to the a = -ell edge polynomial
            edge = np.polynomial.polynomial.polyval(w, poly.coeffs[0])
            assert abs(edge) < 1e-8 * (1 + abs(w) ** k), "p0 vanishing fails"
    return angles


@dataclass
class OvalTrace:
    """A compact real oval: closed trace plus its z-interval and branch data."""

    index: int
    points: np.ndarray           # (n, 2) real (z, w), closed (first != last)
    z_range: tuple
    w_range: tuple
    log_centroid: tuple
    component_id: int = -1

    def quadrature_nodes(self, n: int):
        """Smooth periodic parameterization z = c + h cos t with branch-tracked w.

        The cosine substitution removes the square-root turning points at the
        two z-extremes, so periodic trapezoid sums over these nodes converge
        geometrically for analytic integrands on the oval.  The z-extremes are
        polished onto the exact branch points and the range is shrunk by a
        hair so every node carries real branches.
        """
        za, zb = self.z_range
        poly = kasteleyn.charpoly_coeffs(self._spec)
        wa = float(self.points[np.argmin(self.points[:, 0]), 1])
        wb = float(self.points[np.argmax(self.points[:, 0]), 1])
        pa = _polish_branch_point(poly, za, wa)
        pb = _polish_branch_point(poly, zb, wb)
        if pa is not None:
            za = pa[0]
        if pb is not None:
            zb = pb[0]
        shrink = 1e-9 * (abs(za) + abs(zb))
        za, zb = za + shrink, zb - shrink
        c, h = 0.5 * (za + zb), 0.5 * (zb - za)
        t = 2.0 * np.pi * np.arange(n) / n
        z = c + h * np.cos(t)
        # branch reference from the marched trace: split the loop into the
        # two z-monotone halves at the extremes and interpolate each
        pts = self.points
        imin = int(np.argmin(pts[:, 0]))
        imax = int(np.argmax(pts[:, 0]))
        loop = np.roll(pts, -imax, axis=0)
        cut = (imin - imax) % len(pts)
        half1 = loop[:cut + 1]
        half2 = np.vstack([loop[cut:], loop[:1]])

        def interp(half, zq):
            order = np.argsort(half[:, 0])
            return np.interp(zq, half[order, 0], half[order, 1])

        w = np.empty(n)
        upper = (t % (2.0 * np.pi)) < np.pi
        w[upper] = interp(half1, z[upper])
        w[~upper] = interp(half2, z[~upper])
        # polish onto the curve along w (the trace fixes the branch)
        for _ in range(8):
            pv = poly.eval(z + 0j, w + 0j).real
            pwv = poly.eval_pw(z + 0j, w + 0j).real
            w = w - pv / np.where(np.abs(pwv) > 1e-300, pwv, 1.0)
        # halves may be swapped relative to the cosine orientation; residuals decide
        res = np.abs(poly.eval(z + 0j, w + 0j))
        scale = np.array([poly.eval_scale(zz, ww) for zz, ww in zip(z, w)])
        if np.any(res > 1e-8 * scale):
            w2 = np.empty(n)
            w2[upper] = interp(half2, z[upper])
            w2[~upper] = interp(half1, z[~upper])
            for _ in range(8):
                pv = poly.eval(z + 0j, w2 + 0j).real
                pwv = poly.eval_pw(z + 0j, w2 + 0j).real
                w2 = w2 - pv / np.where(np.abs(pwv) > 1e-300, pwv, 1.0)
            res2 = np.abs(poly.eval(z + 0j, w2 + 0j))
            if np.max(res2 / scale) < np.max(res / scale):
                w = w2
        return z, w, t

    _spec: WeightSpec = None


def _span(rng):
    return max(rng[1] - rng[0], 1e-12)


@dataclass
class ArcTrace:
    """An unbounded component of the real locus between two consecutive angles."""

    index: int                   # matches the frozen-region numbering
    points: np.ndarray           # (n, 2) real (z, w), ordered endpoint to endpoint
    endpoints: tuple             # (angle label, angle label)


@dataclass
class _Component:
    cid: int
    bounded: bool
    region_index: int | None     # 1..2(k+ell) for unbounded, None for bounded
    oval_index: int | None       # 1..g for bounded, None for unbounded
    representative: tuple        # (r1, r2) well inside the component
    log_centroid: tuple
    lattice: tuple = None        # Ronkin gradient, a Newton-polygon lattice point


def _real_w_candidates(spec: WeightSpec, z: float, tol: float = 1e-9) -> np.ndarray:
    lam = np.linalg.eigvals(transfer.eval_phi(spec, complex(z)))
    real = lam[np.abs(lam.imag) <= tol * (1.0 + np.abs(lam))]
    return np.sort(real.real)


class SpectralData:
    """Cached spectral-curve geometry for one weight spec."""

    def __init__(self, spec: WeightSpec):
        self.spec = spec
        self.tp = track_products(spec)
        self.poly = kasteleyn.charpoly_coeffs(spec)
        self.angles = compute_angles(spec)
        self.genus = (spec.k - 1) * (spec.ell - 1)
        # asymptote coordinates of the tentacles
        self.asym_r1 = np.concatenate([np.log(self.tp.beta_v),
                                       np.log(self.tp.alpha_v / self.tp.gamma_v)])
        self.asym_r2 = np.concatenate([np.log(self.tp.gamma_h),
                                       np.log(self.tp.alpha_h / self.tp.beta_h)])
        lo1, hi1 = self.asym_r1.min() - 2.0, self.asym_r1.max() + 2.0
        lo2, hi2 = self.asym_r2.min() - 2.0, self.asym_r2.max() + 2.0
        self.box = (lo1, hi1, lo2, hi2)
        self._components = None
        self._locus = None

    # -- membership ---------------------------------------------------------
    def slice_intervals(self, r1: float, scan: int = _SCAN):
        """Per-sheet [min, max] of log|w| over the circle log|z| = r1."""
        th = np.linspace(0.0, 2.0 * np.pi, scan, endpoint=False)
        z = np.exp(r1 + 1j * th)
        lam = np.linalg.eigvals(transfer.eval_phi(self.spec, z))
        s = np.sort(np.log(np.abs(lam)), axis=-1)
        return s.min(axis=0), s.max(axis=0)

    def contains(self, r1: float, r2: float, scan: int = _SCAN) -> bool:
        lo, hi = self.slice_intervals(r1, scan)
        return bool(np.any((lo <= r2) & (r2 <= hi)))

    def classify_point(self, r1: float, r2: float, btol: float = 1e-4):
        """'interior', 'boundary' or ('complement', component id)."""
        lo, hi = self.slice_intervals(r1)
        inside = np.any((lo <= r2) & (r2 <= hi))
        near = np.any((np.abs(lo - r2) < btol) | (np.abs(hi - r2) < btol))
        if near:
            return "boundary", None
        if inside:
            return "interior", None
        comp = self._component_at(r1, r2)
        return "complement", comp

    # -- complement components -------------------------------------------------
    # Complement components are in bijection with the lattice points of the
    # Newton rectangle: interior points <-> bounded components (holes),
    # boundary points <-> unbounded components, via the (constant) Ronkin
    # gradient.  This identification is exact, so no flood fill is needed.

    def region_of_lattice(self, s: int, t: int) -> int:
        """Frozen-region index 1..2(k+ell) of a boundary lattice point.

        Regions are numbered counterclockwise starting at the north-east
        corner: 1 = north at (0, k), ell+1 = east at (-ell, k),
        ell+k+1 = south at (-ell, 0), 2*ell+k+1 = west at (0, 0).
        """
        k, ell = self.spec.k, self.spec.ell
        if t == k and -ell <= s <= 0:
            return 1 - s
        if s == -ell:
            return ell + 1 + (k - t)
        if t == 0:
            return ell + k + 1 + (s + ell)
        if s == 0:
            return (2 * ell + k + 1 + t - 1) % (2 * (k + ell)) + 1
        raise ValueError(f"({s}, {t}) is not a boundary lattice point")

    def lattice_of_region(self, region_index: int):
        k, ell = self.spec.k, self.spec.ell
        i = (region_index - 1) % (2 * (k + ell)) + 1
        if i <= ell + 1:
            return 1 - i, k
        if i <= ell + k + 1:
            return -ell, k - (i - ell - 1)
        if i <= 2 * ell + k + 1:
            return (i - ell - k - 1) - ell, 0
        return 0, i - (2 * ell + k + 1)

    def _tropical_seed(self, a: int, b: int):
        """Deep point of the hole dual to the interior lattice point (a, b).

        Maximizes the tropical margin of the monomial over the padded box;
        a positive margin makes the point a complement candidate.
        """
        c = np.abs(self.poly.coeffs)
        pts = [(m - self.poly.ell, bb) for m in range(self.poly.ell + 1)
               for bb in range(self.poly.k + 1) if c[m + 0, bb] > 0.0]
        lo1, hi1, lo2, hi2 = self.box
        r1s = np.linspace(lo1, hi1, 161)
        r2s = np.linspace(lo2, hi2, 161)
        R1, R2 = np.meshgrid(r1s, r2s, indexing="ij")
        own = np.log(c[a + self.poly.ell, b]) + a * R1 + b * R2
        other = np.full_like(own, -np.inf)
        for (aa, bb) in pts:
            if (aa, bb) == (a, b):
                continue
            other = np.maximum(other, np.log(c[aa + self.poly.ell, bb]) + aa * R1 + bb * R2)
        margin = own - other
        idx = np.unravel_index(np.argmax(margin), margin.shape)
        return (float(R1[idx]), float(R2[idx])), float(margin[idx])

    def _build_components(self):
        k, ell = self.spec.k, self.spec.ell
        lo1, hi1, lo2, hi2 = self.box
        comps = []
        cid = 0

        def verified(points):
            """First candidate that lies in the complement with a lattice gradient."""
            for rep in points:
                if self.contains(*rep):
                    continue
                grad = ronkin_gradient(self.spec, *rep)
                s, t = int(round(grad[0])), int(round(grad[1]))
                if abs(grad[0] - s) < 1e-6 and abs(grad[1] - t) < 1e-6:
                    return rep, (s, t)
            return None

        depths = (1.5, 3.0, 6.0, 10.0)
        candidates = []
        for sx, sy in ((+1, +1), (-1, +1), (-1, -1), (+1, -1)):
            candidates.append([
                (hi1 + d if sx > 0 else lo1 - d, hi2 + d if sy > 0 else lo2 - d)
                for d in depths])

        def wedges(values, coord, edge, sign):
            """Fallback ladders for the gaps between consecutive tentacles."""
            vals = np.sort(np.log(values))
            out = []
            for a, b in zip(vals[:-1], vals[1:]):
                ladder = []
                for d in depths:
                    for frac in (0.5, 0.3, 0.7):
                        mv = a + frac * (b - a)
                        pt = (mv, edge + sign * d) if coord == 0 else (edge + sign * d, mv)
                        ladder.append(pt)
                out.append(ladder)
            return out

        candidates += wedges(self.tp.beta_v, 0, hi2, +1)
        candidates += wedges(self.tp.alpha_v / self.tp.gamma_v, 0, lo2, -1)
        candidates += wedges(self.tp.alpha_h / self.tp.beta_h, 1, lo1, -1)
        candidates += wedges(self.tp.gamma_h, 1, hi1, +1)

        seen = {}
        for ladder in candidates:
            hit = verified(ladder)
            if hit is None:
                raise AssumptionError(
                    f"no verified complement point near candidates {ladder[:2]}...")
            rep, lattice = hit
            if lattice in seen:
                continue
            seen[lattice] = rep
            cid += 1
            comps.append(_Component(
                cid=cid, bounded=False,
                region_index=self.region_of_lattice(*lattice), oval_index=None,
                representative=rep, log_centroid=rep, lattice=lattice))
        if len(comps) != 2 * (k + ell):
            raise AssumptionError(
                f"found {len(comps)} unbounded complement components, "
                f"expected {2 * (k + ell)} (coincident tentacles?)")

        hole_no = 0
        for a in range(-ell + 1, 0):
            for b in range(1, k):
                seed, margin = self._tropical_seed(a, b)
                r = None
                for radius in (0.0, 0.1, 0.25, 0.5, 1.0, 1.8):
                    if radius == 0.0:
                        cands = [seed]
                    else:
                        th = np.linspace(0, 2 * np.pi, 16, endpoint=False)
                        cands = [(seed[0] + radius * np.cos(t), seed[1] + radius * np.sin(t))
                                 for t in th]
                    for cand in cands:
                        if self.contains(*cand):
                            continue
                        grad = ronkin_gradient(self.spec, *cand)
                        if abs(grad[0] - a) < 1e-6 and abs(grad[1] - b) < 1e-6:
                            r = cand
                            break
                    if r is not None:
                        break
                if r is None:
                    raise AssumptionError(
                        f"no complement component found for interior lattice point "
                        f"({a}, {b}); the curve is singular or the hole is closed")
                cid += 1
                hole_no += 1
                comps.append(_Component(
                    cid=cid, bounded=True, region_index=None, oval_index=None,
                    representative=r, log_centroid=r, lattice=(a, b)))
        self._components = comps
        return comps

    def _boundary_parameter(self, r1, r2):
        """Counterclockwise arclength-style parameter along the box edge,
        measured from the north-east corner."""
        lo1, hi1, lo2, hi2 = self.box
        w1, w2 = hi1 - lo1, hi2 - lo2
        # project the point to the nearest box edge
        d = {
            "top": hi2 - r2, "left": r1 - lo1,
            "bottom": r2 - lo2, "right": hi1 - r1,
        }
        side = min(d, key=d.get)
        if side == "top":
            return hi1 - r1
        if side == "left":
            return w1 + (hi2 - r2)
        if side == "bottom":
            return w1 + w2 + (r1 - lo1)
        return w1 + w2 + w1 + (r2 - lo2)

    def _component_at(self, r1, r2):
        grad = ronkin_gradient(self.spec, r1, r2)
        s, t = int(round(grad[0])), int(round(grad[1]))
        for comp in self.components:
            if comp.lattice == (s, t):
                return comp
        raise AssumptionError(f"no component with gradient ({s}, {t})")

    @property
    def components(self):
        if self._components is None:
            self._build_components()
        return self._components

    def membership_grid(self, resolution: int = _GRID):
        """Boolean amoeba-membership grid over the padded box (for rendering)."""
        lo1, hi1, lo2, hi2 = self.box
        r1s = np.linspace(lo1, hi1, resolution)
        r2s = np.linspace(lo2, hi2, resolution)
        member = np.zeros((resolution, resolution), dtype=bool)
        for a, r1 in enumerate(r1s):
            lo, hi = self.slice_intervals(r1, scan=_SCAN)
            member[a] = np.any((lo[None, :] <= r2s[:, None]) & (r2s[:, None] <= hi[None, :]), axis=1)
        return r1s, r2s, member

    def component_by_region(self, region_index: int) -> _Component:
        for comp in self.components:
            if comp.region_index == region_index:
                return comp
        raise KeyError(f"no unbounded component with region index {region_index}")

    def component_by_oval(self, oval_index: int) -> _Component:
        for comp in self.components:
            if comp.oval_index == oval_index:
                return comp
        raise KeyError(f"no bounded component for oval {oval_index}")

    # -- real locus -----------------------------------------------------------
    def _real_branch_points(self):
        """Real (z, w) where two w-sheets merge: zeros of the w-discriminant."""
        poly = self.poly
        k, ell = self.spec.k, self.spec.ell
        # Sylvester resultant of z^ell P and its w-derivative: a z-polynomial
        # of degree <= ell (2k - 1), interpolated on the unit circle (larger
        # radii make the coefficient dynamic range blow up as R^deg).
        deg = ell * (2 * k - 1)
        n = 4 << int(np.ceil(np.log2(deg + 1)))
        zs = np.exp(2j * np.pi * np.arange(n) / n)
        vals = np.empty(n, dtype=complex)
        for idx, z in enumerate(zs):
            cw = (poly.coeffs * (z ** np.arange(0, ell + 1))[:, None]).sum(axis=0)
            dw = cw[1:] * np.arange(1, k + 1)
            vals[idx] = _resultant(cw, dw)
        coeffs = np.fft.fft(vals) / n
        tail = np.abs(coeffs[deg + 1:])
        coeffs = coeffs[:deg + 1]
        if tail.size and tail.max() > 1e-6 * (1 + np.abs(coeffs).max()):
            raise ArithmeticError("discriminant interpolation failed")
        roots = np.roots(coeffs.real[::-1])
        keep = []
        for r in roots:
            if abs(r.imag) > 1e-5 * (1 + abs(r)) or abs(r) < 1e-9:
                continue
            zb = float(r.real)
            ws = np.roots(_w_poly(poly, zb))
            gaps = np.abs(ws[:, None] - ws[None, :]) + np.eye(len(ws))
            i1, i2 = np.unravel_index(np.argmin(gaps), gaps.shape)
            wb = 0.5 * (ws[i1] + ws[i2])
            if gaps[i1, i2] > 5e-2 * (1 + abs(wb)) or abs(wb.imag) > 1e-2 * (1 + abs(wb)):
                continue
            polished = _polish_branch_point(poly, zb, float(wb.real))
            if polished is not None:
                keep.append(polished)
        # dedupe
        out = []
        for zb, wb in keep:
            if not any(abs(zb - z2) < 1e-7 * (1 + abs(z2)) and abs(wb - w2) < 1e-7 * (1 + abs(w2))
                       for z2, w2 in out):
                out.append((zb, wb))
        return out

    def real_locus(self):
        if self._locus is None:
            self._locus = _trace_real_locus(self)
        return self._locus


def _resultant(c1: np.ndarray, c2: np.ndarray) -> complex:
    """Resultant of two polynomials given by ascending coefficients."""
    n1 = len(c1) - 1
    n2 = len(c2) - 1
    if n1 < 1 or n2 < 1:
        return complex(c1[-1] ** n2 * c2[-1] ** n1)
    S = np.zeros((n1 + n2, n1 + n2), dtype=complex)
    for r in range(n2):
        S[r, r:r + n1 + 1] = c1[::-1]
    for r in range(n1):
        S[n2 + r, r:r + n2 + 1] = c2[::-1]
    return complex(np.linalg.det(S))


def _w_poly(poly, z: complex) -> np.ndarray:
    """Descending w-coefficients of P(z, .) (scaled by z^ell)."""
    cw = (poly.coeffs * (z ** np.arange(0, poly.ell + 1))[:, None]).sum(axis=0)
    return cw[::-1]


def _polish_branch_point(poly, zb: float, wb: float):
    """Newton-polish a candidate (z, w) with P = 0 and dP/dw = 0.

    The Jacobian rows are formed analytically for P and by central
    differences for dP/dw; returns None when the iteration leaves the real
    axis or fails to shrink the residuals.
    """
    z, w = float(zb), float(wb)
    scale = 1.0 + abs(z) + abs(w)
    for _ in range(40):
        p, pz, pw = poly.eval_all(z, w)
        h = 1e-6 * (1 + abs(z) + abs(w))
        pwz = (poly.eval_pw(z + h, w) - poly.eval_pw(z - h, w)) / (2 * h)
        pww = (poly.eval_pw(z, w + h) - poly.eval_pw(z, w - h)) / (2 * h)
        J = np.array([[pz, pw], [pwz, pww]]).real
        F = np.array([p.real, pw.real])
        try:
            step = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            return None
        z, w = z - step[0], w - step[1]
        if not (np.isfinite(z) and np.isfinite(w)):
            return None
        if np.abs(step).max() < 1e-13 * scale:
            break
    p, _, pw = poly.eval_all(z, w)
    if abs(p) < 1e-8 * scale ** 2 and abs(pw) < 1e-7 * scale:
        return float(z), float(w)
    return None


def _march(sd: SpectralData, z0: float, w0: float, direction: int,
           h0: float = 2e-3, max_steps: int = 200000, pad: float = 1.5):
    """Predictor-corrector walk along the real locus from (z0, w0).

    Steps are scaled to be roughly uniform in (log|z|, log|w|); the walk stops
    when it leaves the amoeba box padded by ``pad`` (returns 'escaped') or
    comes back to the start (returns 'closed').
    """
    poly = sd.poly
    lo1, hi1, lo2, hi2 = sd.box
    pts = [(z0, w0)]
    z, w = z0, w0
    tangent_prev = None
    for step in range(max_steps):
        _, pz, pw = poly.eval_all(z, w)
        pz, pw = pz.real, pw.real
        sz, sw = abs(z), abs(w)
        # tangent in log coordinates, normalized there for even amoeba coverage
        tz, tw = pw / sz, -pz / sw
        norm = np.hypot(tz, tw)
        if norm == 0.0:
            break
        tz, tw = tz / norm, tw / norm
        if tangent_prev is not None:
            if tz * tangent_prev[0] + tw * tangent_prev[1] < 0:
                tz, tw = -tz, -tw
        else:
            tz, tw = direction * tz, direction * tw
        h = h0
        for _ in range(4):  # step-halving retry for high-curvature spots
            zn, wn = z + h * tz * sz, w + h * tw * sw
            ok = False
            for _ in range(5):
                val, gz, gw = poly.eval_all(zn, wn)
                val, gz, gw = val.real, gz.real, gw.real
                g2 = gz * gz + gw * gw
                if g2 == 0:
                    break
                zn -= val * gz / g2
                wn -= val * gw / g2
                if abs(poly.eval(zn, wn).real) < 1e-11 * poly.eval_scale(zn, wn):
                    ok = True
                    break
            if ok:
                break
            h *= 0.5
        z, w, tangent_prev = zn, wn, (tz, tw)
        pts.append((z, w))
        if not (np.isfinite(z) and np.isfinite(w)):
            pts.pop()
            return np.array(pts), "escaped"
        lz = np.log(abs(z)) if z != 0 else -np.inf
        lw = np.log(abs(w)) if w != 0 else -np.inf
        if not (lo1 - pad < lz < hi1 + pad and lo2 - pad < lw < hi2 + pad):
            return np.array(pts), "escaped"
        if step > 10:
            d0 = np.hypot((z - z0) / abs(z0 or 1.0), (w - w0) / abs(w0 or 1.0))
            if d0 < 1.5 * h0:
                return np.array(pts), "closed"
    return np.array(pts), "maxed"


def _trace_real_locus(sd: SpectralData):
    spec = sd.spec
    branch = sd._real_branch_points()
    lo1, hi1, lo2, hi2 = sd.box
    ovals = []
    used = np.zeros(len(branch), dtype=bool)
    for bidx, (zb, wb) in enumerate(branch):
        if used[bidx]:
            continue
        # nudge off the branch point along the curve's vertical tangent
        pts, status = _march(sd, zb, wb, direction=+1, h0=4e-3)
        if status != "closed":
            pts2, status2 = _march(sd, zb, wb, direction=-1, h0=4e-3)
            if status2 != "closed":
                continue
            pts = pts2
        zs, ws = pts[:, 0], pts[:, 1]
        if not (np.all(np.abs(zs) > 0) and np.all(np.abs(ws) > 0)):
            continue
        if np.any(zs > 0) and np.any(zs < 0) or np.any(ws > 0) and np.any(ws < 0):
            continue  # compact ovals never cross the axes
        # mark the branch points consumed by this oval
        for b2, (z2, w2) in enumerate(branch):
            if np.min(np.hypot(zs - z2, ws - w2)) < 0.05 * (1 + abs(z2)):
                used[b2] = True
        tr = OvalTrace(index=0, points=pts,
                       z_range=(float(zs.min()), float(zs.max())),
                       w_range=(float(ws.min()), float(ws.max())),
                       log_centroid=(float(np.log(np.abs(zs)).mean()),
                                     float(np.log(np.abs(ws)).mean())))
        tr._spec = spec
        ovals.append(tr)
    # order ovals and match them with the bounded amoeba components
    ovals.sort(key=lambda t: t.log_centroid)
    comps = [c for c in sd.components if c.bounded]
    if len(ovals) != sd.genus or len(comps) != sd.genus:
        raise AssumptionError(
            f"real locus inconsistent with genus {sd.genus}: "
            f"{len(ovals)} compact ovals, {len(comps)} bounded components"
        )
    for m, tr in enumerate(ovals, start=1):
        tr.index = m
        best = min(comps, key=lambda c: np.hypot(c.log_centroid[0] - tr.log_centroid[0],
                                                 c.log_centroid[1] - tr.log_centroid[1]))
        tr.component_id = best.cid
        best.oval_index = m

    arcs = _trace_a0_arcs(sd)
    return {"ovals": ovals, "arcs": arcs}


def _angle_catalog(sd: SpectralData):
    """All angles with their tentacle boundary parameter and a label."""
    lo1, hi1, lo2, hi2 = sd.box
    out = []
    for i, v in enumerate(sd.tp.beta_v):
        out.append(("qinf", i, sd._boundary_parameter(np.log(v), hi2)))
    for j, v in enumerate(sd.tp.alpha_h / sd.tp.beta_h):
        out.append(("p0", j, sd._boundary_parameter(lo1, np.log(v))))
    for i, v in enumerate(sd.tp.alpha_v / sd.tp.gamma_v):
        out.append(("q0", i, sd._boundary_parameter(np.log(v), lo2)))
    for j, v in enumerate(sd.tp.gamma_h):
        out.append(("pinf", j, sd._boundary_parameter(hi1, np.log(v))))
    return sorted(out, key=lambda t: t[2])


def _z_poly(poly, w: complex) -> np.ndarray:
    """Descending z-coefficients of z^ell P(., w)."""
    cz = poly.coeffs @ (w ** np.arange(0, poly.k + 1))
    return cz[::-1]


def _pick_real_root(roots: np.ndarray, target: float, dtol: float):
    """The real root closest to target in log scale with the same sign."""
    best = None
    for r in roots:
        if abs(r.imag) > 1e-6 * (1 + abs(r)) or r.real * target <= 0:
            continue
        d = abs(np.log(abs(r.real / target)))
        if best is None or d < best[1]:
            best = (float(r.real), d)
    if best is None or best[1] > dtol:
        return None
    return best[0]


def _angle_separation(sd: SpectralData, kind: str, idx: int) -> float:
    """Log-distance from this angle's asymptote to the nearest other one."""
    if kind == "q0":
        vals, v = np.log(sd.tp.alpha_v / sd.tp.gamma_v), np.log(sd.tp.alpha_v / sd.tp.gamma_v)[idx]
    elif kind == "qinf":
        vals, v = np.log(sd.tp.beta_v), np.log(sd.tp.beta_v)[idx]
    elif kind == "p0":
        vals, v = np.log(sd.tp.alpha_h / sd.tp.beta_h), np.log(sd.tp.alpha_h / sd.tp.beta_h)[idx]
    else:
        vals, v = np.log(sd.tp.gamma_h), np.log(sd.tp.gamma_h)[idx]
    others = np.abs(np.delete(vals, idx) - v)
    return float(others.min()) if others.size else 1.0


def _start_near_angle(sd: SpectralData, kind: str, idx: int, side: int):
    """A curve point close to the given angle, on one of its two arc sides.

    The free coordinate is pinned deep inside the tentacle (beyond the padded
    box, far enough that neighboring tentacles have separated) and the bound
    coordinate is taken as the polynomial root closest to the asymptote, so
    there is no Newton basin ambiguity.  Returns (z, w, depth used).
    """
    poly = sd.poly
    lo1, hi1, lo2, hi2 = sd.box
    # accept a root only if it is much closer to this asymptote than the
    # nearest competing one
    dtol = min(0.5, 0.4 * _angle_separation(sd, kind, idx) + 1e-3)
    for depth in (6.0, 10.0, 16.0, 26.0, 42.0):
        if kind in ("q0", "qinf"):
            z0 = float((sd.angles.q0 if kind == "q0" else sd.angles.qinf)[idx])
            w = side * np.exp(lo2 - depth) if kind == "q0" else side * np.exp(hi2 + depth)
            z = _pick_real_root(np.roots(_z_poly(poly, w)), z0, dtol)
            if z is not None:
                return z, float(w), depth
        else:
            w0 = float((sd.angles.p0 if kind == "p0" else sd.angles.pinf)[idx])
            z = side * np.exp(lo1 - depth) if kind == "p0" else side * np.exp(hi1 + depth)
            w = _pick_real_root(np.roots(_w_poly(poly, z)), w0, dtol)
            if w is not None:
                return float(z), w, depth
    raise ArithmeticError("no real branch near angle")


def _nearest_angle(sd: SpectralData, z: float, w: float):
    """Label of the angle a diverging arc endpoint is approaching.

    The family is decided by which coordinate escaped the padded box and in
    which direction; the member by the nearest asymptote value.
    """
    lo1, hi1, lo2, hi2 = sd.box
    lz = np.log(abs(z)) if z != 0 else -np.inf
    lw = np.log(abs(w)) if w != 0 else -np.inf
    overshoot = {
        "qinf": lw - hi2, "q0": lo2 - lw,
        "pinf": lz - hi1, "p0": lo1 - lz,
    }
    family = max(overshoot, key=overshoot.get)
    if family == "qinf":
        return "qinf", int(np.argmin(np.abs(np.log(sd.tp.beta_v) - lz)))
    if family == "q0":
        return "q0", int(np.argmin(np.abs(np.log(sd.tp.alpha_v / sd.tp.gamma_v) - lz)))
    if family == "pinf":
        return "pinf", int(np.argmin(np.abs(np.log(sd.tp.gamma_h) - lw)))
    return "p0", int(np.argmin(np.abs(np.log(sd.tp.alpha_h / sd.tp.beta_h) - lw)))


def _trace_a0_arcs(sd: SpectralData):
    catalog = _angle_catalog(sd)
    n_angle = len(catalog)
    ordered = [(kind, idx) for kind, idx, _ in catalog]
    arcs = {}
    for pos, (kind, idx) in enumerate(ordered):
        neighbors = [ordered[(pos - 1) % n_angle], ordered[(pos + 1) % n_angle]]
        for side in (1, -1):
            try:
                z0, w0, depth = _start_near_angle(sd, kind, idx, side)
            except (ZeroDivisionError, FloatingPointError, ArithmeticError):
                # the curve leaves this angle on the other sign only
                continue
            if not (np.isfinite(z0) and np.isfinite(w0)):
                continue
            if abs(sd.poly.eval(z0, w0)) > 1e-7 * sd.poly.eval_scale(z0, w0):
                continue
            # march away from the angle; an arc connects cyclically
            # consecutive angles, so the endpoint is one of the neighbors
            for direction in (1, -1):
                pts, status = _march(sd, z0, w0, direction=direction,
                                     h0=6e-3, pad=depth + 0.5)
                if status != "escaped" or len(pts) < 10:
                    continue
                end_kind, end_idx = _nearest_angle(sd, *pts[-1])
                if (end_kind, end_idx) == (kind, idx):
                    continue
                cands = [nb for nb in neighbors if nb[0] == end_kind]
                if len(cands) == 1:
                    end = cands[0]
                elif (end_kind, end_idx) in neighbors:
                    end = (end_kind, end_idx)
                elif len(cands) == 2:
                    end = min(cands, key=lambda nb: abs(nb[1] - end_idx))
                else:
                    continue
                key = frozenset([(kind, idx), end])
                if key not in arcs or len(pts) > len(arcs[key].points):
                    arcs[key] = ArcTrace(index=0, points=pts,
                                         endpoints=((kind, idx), end))
                break
    # index the arcs by the cyclic gap they span
    out = []
    for gap in range(n_angle):
        a = ordered[gap - 1]
        b = ordered[gap % n_angle]
        key = frozenset([a, b])
        if key in arcs:
            arc = arcs[key]
            arc.index = gap + 1
            out.append(arc)
    return out


_cache: dict = {}


def spectral_data(spec: WeightSpec) -> SpectralData:
    key = spec.key()
    if key not in _cache:
        _cache[key] = SpectralData(spec)
    return _cache[key]


def amoeba_contains(spec: WeightSpec, r1: float, r2: float):
    """'interior', 'boundary', or ('complement', component id)."""
    return spectral_data(spec).classify_point(r1, r2)


def trace_real_locus(spec: WeightSpec):
    """Compact ovals (index 1..g) and A0 arcs (indexed like the regions)."""
    locus = spectral_data(spec).real_locus()
    return locus["ovals"], locus["arcs"]


# ---------------------------------------------------------------------------
# Ronkin function and surface tension
# ---------------------------------------------------------------------------

def _crossing_angles(spec: WeightSpec, r1: float, r2: float, scan: int = _SCAN):
    """Angles where a sorted eigenvalue modulus of Phi(e^{r1+i theta}) crosses e^{r2}."""
    th = np.linspace(0.0, 2.0 * np.pi, scan, endpoint=False)
    z = np.exp(r1 + 1j * th)
    lam = np.linalg.eigvals(transfer.eval_phi(spec, z))
    s = np.sort(np.log(np.abs(lam)), axis=-1) - r2

    def value(theta, rank):
        lam1 = np.linalg.eigvals(transfer.eval_phi(spec, np.exp(r1 + 1j * theta)))
        return np.sort(np.log(np.abs(lam1)))[rank] - r2

    crossings = []
    for rank in range(spec.k):
        g = s[:, rank]
        for t in range(scan):
            t2 = (t + 1) % scan
            a, b = th[t], th[t] + 2 * np.pi / scan
            if g[t] == 0.0:
                crossings.append(a)
            elif g[t] * g[t2] < 0.0:
                crossings.append(brentq(value, a, b, args=(rank,), xtol=1e-13))
    return sorted(c % (2 * np.pi) for c in crossings)


def ronkin(spec: WeightSpec, r1: float, r2: float, tol: float = 1e-8) -> float:
    """Torus average of log|P| over |z| = e^{r1}, |w| = e^{r2}.

    The w-average is carried out exactly with Jensen's formula, leaving a
    one-dimensional theta integral whose only non-smooth points are the
    eigenvalue-modulus crossings; integrating each smooth segment by Gauss
    quadrature converges geometrically.
    """
    tp = track_products(spec)
    crossings = _crossing_angles(spec, r1, r2)
    if not crossings:
        segments = [(0.0, 2.0 * np.pi)]
    else:
        segments = [(a, b) for a, b in zip(crossings, crossings[1:] + [crossings[0] + 2 * np.pi])]

    def integrand(th):
        z = np.exp(r1 + 1j * th)
        lam = np.linalg.eigvals(transfer.eval_phi(spec, z))
        val = np.log(np.abs(1.0 - tp.beta_v[None, :] / z[:, None])).sum(axis=1)
        val += np.maximum(r2, np.log(np.abs(lam))).sum(axis=1)
        return val

    total_prev = None
    nseg = 24
    while nseg <= 3072:
        total = 0.0
        for a, b in segments:
            x, wgt = np.polynomial.legendre.leggauss(max(8, int(nseg * (b - a) / (2 * np.pi))))
            th = 0.5 * (b - a) * x + 0.5 * (a + b)
            total += np.dot(wgt, integrand(th)) * 0.5 * (b - a)
        total /= 2.0 * np.pi
        if total_prev is not None and abs(total - total_prev) < tol * (1 + abs(total)):
            return float(total)
        total_prev = total
        nseg *= 2
    return float(total_prev)


def ronkin_gradient(spec: WeightSpec, r1: float, r2: float) -> tuple:
    """Gradient of the Ronkin function by exact sheet counting.

    dR/dr2 is the average number of eigenvalues of Phi below the w-circle;
    dR/dr1 the average count of z-roots below the z-circle minus ell.  Both
    are piecewise constant in the sweep angle, so localizing the crossings
    makes the averages exact up to root-finding tolerance.
    """
    # dR/dr2: eigenvalue moduli against e^{r2} along the z-circle
    crossings = _crossing_angles(spec, r1, r2)
    d2 = 0.0
    segs = [(a, b) for a, b in zip(crossings, crossings[1:] + [crossings[0] + 2 * np.pi])] \
        if crossings else [(0.0, 2 * np.pi)]
    for a, b in segs:
        mid = 0.5 * (a + b)
        lam = np.linalg.eigvals(transfer.eval_phi(spec, np.exp(r1 + 1j * mid)))
        d2 += (b - a) * np.count_nonzero(np.log(np.abs(lam)) < r2)
    d2 /= 2.0 * np.pi

    # dR/dr1: z-root moduli against e^{r1} along the w-circle
    poly = kasteleyn.charpoly_coeffs(spec)

    def logz_sorted(theta):
        w = np.exp(r2 + 1j * theta)
        roots = np.roots(np.polynomial.polynomial.polyval(w, poly.coeffs.T)[::-1])
        return np.sort(np.log(np.abs(roots)))

    scan = _SCAN
    th = np.linspace(0.0, 2 * np.pi, scan, endpoint=False)
    vals = np.array([logz_sorted(t) for t in th]) - r1
    crossings = []
    for rank in range(spec.ell):
        g = vals[:, rank]
        for t in range(scan):
            t2 = (t + 1) % scan
            a, b = th[t], th[t] + 2 * np.pi / scan
            if g[t] == 0.0:
                crossings.append(a)
            elif g[t] * g[t2] < 0.0:
                crossings.append(brentq(lambda x: logz_sorted(x)[rank] - r1, a, b, xtol=1e-13))
    crossings = sorted(c % (2 * np.pi) for c in crossings)
    segs = [(a, b) for a, b in zip(crossings, crossings[1:] + [crossings[0] + 2 * np.pi])] \
        if crossings else [(0.0, 2 * np.pi)]
    d1 = 0.0
    for a, b in segs:
        mid = 0.5 * (a + b)
        d1 += (b - a) * np.count_nonzero(logz_sorted(mid) < r1)
    d1 /= 2.0 * np.pi
    return float(d1 - spec.ell), float(d2)


def surface_tension_grad(spec: WeightSpec, s: float, t: float,
                         tol: float = 1e-7, snap: float = 1e-3):
    """Inverse of the Ronkin gradient (the surface-tension gradient).

    For (s, t) within ``snap`` of an integer lattice point whose gradient is
    attained on a complement component (a flat Legendre face), the component
    is reported instead of a unique point: returns ("component", component).
    Otherwise returns ("point", (r1, r2)) with |grad R - (s,t)| <= tol.
    """
    si, ti = round(s), round(t)
    if abs(s - si) <= snap and abs(t - ti) <= snap:
        sd = spectral_data(spec)
        for comp in sd.components:
            grad = ronkin_gradient(spec, *comp.representative)
            if abs(grad[0] - si) <= 1e-6 and abs(grad[1] - ti) <= 1e-6:
                return "component", comp
    if not (-spec.ell < s < 0 and 0 < t < spec.k):
        raise ValueError("slope outside the open gradient range")
    r = np.array([0.0, 0.0])
    target = np.array([s, t])
    for _ in range(80):
        g = np.array(ronkin_gradient(spec, *r))
        err = g - target
        if np.abs(err).max() < tol:
            return "point", (float(r[0]), float(r[1]))
        h = 1e-4
        J = np.empty((2, 2))
        J[:, 0] = (np.array(ronkin_gradient(spec, r[0] + h, r[1])) - g) / h
        J[:, 1] = (np.array(ronkin_gradient(spec, r[0], r[1] + h)) - g) / h
        try:
            step = np.linalg.solve(J, err)
        except np.linalg.LinAlgError:
            step = err
        size = np.abs(step).max()
        if size > 1.0:
            step *= 1.0 / size
        r = r - step
    raise ArithmeticError("surface tension inversion did not converge")
