"""Correlation kernels: finite diamond and limiting Gibbs measures.

Finite size: the path-process kernel is a sum of a single and a double
contour integral threading the Wiener-Hopf factors of Phi^{kN}.  Both reduce
to exact Laurent-coefficient extractions of finite products of transfer
factors (the double integral pairs the negative coefficients of the z1-side
against the at-most-ell*N positive ones of the z2-side), which is how they
are computed here.  The inverse Kasteleyn matrix of the diamond is a
relabeled submatrix of this kernel, and edge probabilities follow from the
standard determinant formula.

Limiting: ergodic Gibbs measures are indexed by a point (r1, r2) in the plane
of the amoeba; their kernels are double torus integrals over
|z| = e^{r1}, |w| = e^{r2} of the inverse of the magnetically altered
Kasteleyn matrix.  The w-integral is done exactly by residues (it picks the
spectral projectors of Phi(z) onto eigenvalues inside or outside the circle),
and the remaining z-integral is split at the angles where an eigenvalue
modulus crosses e^{r2}, so the quadrature converges geometrically in every
phase, including the rough one where the torus integrand is singular.
"""

from __future__ import annotations

import numpy as np

from . import transfer, wienerhopf
from .transfer import _eval_symbol_ld
from .kasteleyn import EDGE_OFFSETS, diamond_size, edge_weight
from .weights import WeightSpec, track_products

__all__ = [
    "QuadratureError",
    "FiniteKernel",
    "finite_path_kernel",
    "inverse_kasteleyn_entry",
    "edge_probability",
    "GibbsKernel",
    "gibbs_kernel",
    "limiting_kernel",
    "gibbs_edge_probability",
    "slope_at",
    "classify_frozen_rows",
]

_NODE_START = 64
_NODE_CAP = 4096


class QuadratureError(ArithmeticError):
    """Adaptive quadrature failed to reach the requested tolerance."""


def _inv_stack(M: np.ndarray) -> np.ndarray:
    """Inverse along the last two axes, supporting clongdouble input.

    Closed-form adjugate for k <= 3 (all extended-precision call sites);
    falls back to double-precision LAPACK otherwise.
    """
    if M.dtype != np.clongdouble:
        return np.linalg.inv(M)
    k = M.shape[-1]
    if k == 1:
        return 1.0 / M
    if k == 2:
        det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
        out = np.empty_like(M)
        out[..., 0, 0] = M[..., 1, 1]
        out[..., 1, 1] = M[..., 0, 0]
        out[..., 0, 1] = -M[..., 0, 1]
        out[..., 1, 0] = -M[..., 1, 0]
        return out / det[..., None, None]
    if k == 3:
        a, b, c = M[..., 0, 0], M[..., 0, 1], M[..., 0, 2]
        d, e, f = M[..., 1, 0], M[..., 1, 1], M[..., 1, 2]
        g, h, i = M[..., 2, 0], M[..., 2, 1], M[..., 2, 2]
        A = e * i - f * h
        B = -(d * i - f * g)
        C = d * h - e * g
        det = a * A + b * B + c * C
        out = np.empty_like(M)
        out[..., 0, 0], out[..., 0, 1], out[..., 0, 2] = A, -(b * i - c * h), b * f - c * e
        out[..., 1, 0], out[..., 1, 1], out[..., 1, 2] = B, a * i - c * g, -(a * f - c * d)
        out[..., 2, 0], out[..., 2, 1], out[..., 2, 2] = C, -(a * h - b * g), a * e - b * d
        return out / det[..., None, None]
    return np.linalg.inv(M.astype(complex)).astype(np.clongdouble)


def _laurent_coefficient(factors, order: int, k: int) -> np.ndarray:
    """Coefficient of (1/z)^order of an ordered product of transfer factors.

    Exact (up to rounding): the product is expanded as a truncated power
    series in 1/z, valid on |z| = 1 because every geometric pole lies inside
    the unit disk.
    """
    if order < 0:
        return np.zeros((k, k))
    S = np.zeros((order + 1, k, k))
    S[0] = np.eye(k)
    for f in factors:
        if f.kind == "bernoulli":
            A0, A1 = transfer._bernoulli_parts(f)
            T = S @ A0
            T[1:] += S[:-1] @ A1
        else:
            C0, C1, b = transfer._geometric_parts(f)
            T = S @ C0
            T[1:] += S[:-1] @ C1
            for d in range(1, order + 1):
                T[d] += b * T[d - 1]
        S = T
    return S[order]


def _matrix_power_stack(M: np.ndarray, power: int) -> np.ndarray:
    """Integer matrix power applied along the last two axes."""
    k = M.shape[-1]
    out = np.broadcast_to(np.eye(k, dtype=complex), M.shape).copy()
    if power == 0:
        return out
    base = M if power > 0 else np.linalg.inv(M)
    for _ in range(abs(power)):
        out = out @ base
    return out


def _adjugate(M: np.ndarray) -> np.ndarray:
    """Adjugate of a single k x k matrix, dtype preserving (k arbitrary).

    Uses the Faddeev-LeVerrier recursion, which needs only products and
    traces, so it runs in longdouble as well.
    """
    k = M.shape[0]
    if k == 1:
        return np.ones((1, 1), dtype=M.dtype)
    eye = np.eye(k, dtype=M.dtype)
    N = eye.copy()
    c = M.dtype.type(1)
    for m in range(1, k):
        MN = M @ N
        c = -np.trace(MN) / m
        N = MN + c * eye
    return N if k % 2 else -N


def _adjugate_poly_parts(A0: np.ndarray, A1: np.ndarray):
    """Coefficients of adj(A0 + A1 zeta) as a zeta-polynomial.

    A1 of a bernoulli factor has a single nonzero (corner) entry, so every
    (k-1)-minor is affine in zeta and the adjugate has degree <= 1:
    adj = adj(A0) + zeta * (adj(A0 + A1) - adj(A0)).
    """
    k = A0.shape[0]
    if k == 1:
        return [np.ones((1, 1), dtype=A0.dtype)]
    D0 = _adjugate(A0)
    return [D0, _adjugate(A0 + A1) - D0]


class _Series:
    """Matrix Laurent series in zeta = 1/z on the index window [lo, hi].

    Supports multiplication by the transfer factors and their inverses: each
    is a short zeta-polynomial together with an optional scalar geometric
    tail, applied as a first-order recursion.  All arithmetic is done in
    80-bit precision; window tails are truncated, which is harmless because
    every participating sequence decays geometrically towards both ends.
    """

    def __init__(self, lo: int, hi: int, k: int, const: np.ndarray | None = None):
        self.lo = lo
        self.hi = hi
        self.k = k
        self.c = np.zeros((hi - lo + 1, k, k), dtype=np.clongdouble)
        self.c[-lo] = np.eye(k) if const is None else const

    def coeff(self, d: int) -> np.ndarray:
        if d < self.lo or d > self.hi:
            return np.zeros((self.k, self.k), dtype=np.clongdouble)
        return self.c[d - self.lo]

    def mul_const(self, M: np.ndarray):
        self.c = self.c @ M.astype(np.clongdouble)

    def mul_poly(self, parts):
        """Right-multiply by sum_d parts[d] zeta^d (short polynomial)."""
        out = np.zeros_like(self.c)
        n = len(self.c)
        for d, M in enumerate(parts):
            M = np.asarray(M, dtype=np.clongdouble)
            if d == 0:
                out += self.c @ M
            else:
                out[d:] += self.c[: n - d] @ M
        self.c = out

    def mul_geometric_tail(self, b: float):
        """Right-multiply by sum_{d>=0} b^d zeta^d (pole of a geometric factor)."""
        b = np.clongdouble(b)
        for d in range(1, len(self.c)):
            self.c[d] += b * self.c[d - 1]

    def mul_inverse_bernoulli_det(self, gamma: float, c: float):
        """Right-multiply by 1/(gamma - c zeta) = -(1/c) sum_{m>=0} (gamma/c)^m zeta^{-1-m}.

        The expansion towards negative powers converges because |gamma/c| =
        gamma_v/alpha_v < 1 under the factorization-existence assumption.
        """
        q = np.clongdouble(gamma) / np.clongdouble(c)
        s = -1.0 / np.clongdouble(c)
        out = np.zeros_like(self.c)
        n = len(self.c)
        # out_d = s * S_{d+1} + q * out_{d+1}, downward
        for d in range(n - 2, -1, -1):
            out[d] = s * self.c[d + 1] + q * out[d + 1]
        self.c = out

    def mul_factor(self, f, inverse: bool = False):
        if f.kind == "bernoulli":
            A0, A1 = transfer._bernoulli_parts(f)
            if not inverse:
                self.mul_poly([A0, A1])
            else:
                self.mul_poly(_adjugate_poly_parts(A0, A1))
                gamma = float(np.prod(f.gamma))
                c = (-1.0) ** f.k * float(np.prod(f.alpha))
                self.mul_inverse_bernoulli_det(gamma, c)
        else:
            if not inverse:
                C0, C1, b = transfer._geometric_parts_ld(f)
                self.mul_poly([C0, C1])
                self.mul_geometric_tail(float(b))
            else:
                # phi_g(z; beta)^{-1} = phi_b(z; -beta, 1): a zeta-polynomial
                k = f.k
                A0 = np.eye(k)
                A1 = np.zeros((k, k))
                if k > 1:
                    A0[np.arange(1, k), np.arange(k - 1)] = -f.beta[:-1]
                    A1[0, k - 1] = -f.beta[-1]
                else:
                    A1[0, 0] = -f.beta[0]
                self.mul_poly([A0, A1])


class FiniteKernel:
    """Evaluator for the finite-diamond path kernel at fixed (spec, N).

    Both terms of the kernel are computed by exact Laurent-coefficient
    extraction.  The double contour integral reduces to the finite pairing

        sum_{m <= -1} [coeff of z^{m-y'} in A] @ [coeff of z^{y-m} in B],

    where A = prefix(i')^{-1} Phi^{-x'} phitilde_-  and
    B = phitilde_+ Phi^{x-kN} prefix(i) have coefficient sequences that decay
    geometrically (rates max beta_v and max gamma_v/alpha_v); B has no
    z-powers above ell*N at all, so the sum has at most ell*N terms.  Compared
    with circle quadrature this avoids sampling the factor chains near their
    poles, where the huge function values made double (and even 80-bit)
    evaluation lose the 1e-8 target accuracy for near-critical weights.
    """

    def __init__(self, spec: WeightSpec, N: int, tol: float = 1e-9):
        self.spec = spec
        self.N = int(N)
        self.tol = float(tol)
        self.wh = wienerhopf.run_flow(spec, N)
        # the series arithmetic consumes 80-bit flow weights; the float64
        # factorization above provides the existence check and diagnostics
        self._minus, self._plus = wienerhopf.flow_factor_lists(spec, N, dtype=np.longdouble)
        tp = track_products(spec)
        rho_pos = float(np.max(tp.beta_v))
        rho_neg = float(np.max(tp.gamma_v / tp.alpha_v))
        target = 1e-18

        def depth(rho):
            if rho <= 0.0:
                return 48
            return int(min(max(48, np.ceil(np.log(target) / np.log(rho))), 20000))

        lN = spec.ell * self.N
        self._lo = -(depth(rho_neg) + 2 * lN + 8)
        self._hi = depth(rho_pos) + 2 * lN + 8
        self.factors = transfer.phi_factors(spec).factors
        k = spec.k
        C = np.eye(k, dtype=np.clongdouble)
        for j in range(spec.k * self.N):
            for f in self._minus[j].factors:
                C = C @ transfer.geometric_limit_at_infinity(f, dtype=np.clongdouble)
        self._C = C
        self._C_inv = _inv_stack(C[None])[0]
        self._acache: dict = {}
        self._bcache: dict = {}

    # -- coefficient sequences ----------------------------------------------
    def _ahat(self, ip: int, xp: int):
        """Series of prefix(i')^{-1} Phi^{-x'} phitilde_-(z), without z^{-lN}.

        Uses the exact rewriting Phi^{-x'} phitilde_- = z^{-lN}
        prod_{j<x'} [(Phi_j)_+]^{-1} prod_{j>=x'} (Phi_j)_- C^{-1}.
        Returns a _Series S so that the z^p coefficient of A is
        S.coeff(-p - lN).
        """
        key = (ip, xp)
        if key not in self._acache:
            S = _Series(self._lo, self._hi, self.spec.k)
            for f in reversed(self.factors[:ip]):
                S.mul_factor(f, inverse=True)
            for j in range(xp):
                for f in reversed(self._plus[j].factors):
                    S.mul_factor(f, inverse=True)
            for j in range(xp, self.spec.k * self.N):
                for f in self._minus[j].factors:
                    S.mul_factor(f)
            S.mul_const(self._C_inv)
            self._acache[key] = S
        return self._acache[key]

    def _bhat(self, i: int, x: int, order: int):
        """Series of phitilde_+(z) Phi^{x-kN} prefix(i), without z^{+lN}.

        Uses phitilde_+ Phi^{x-kN} = z^{lN} C (Phi_{kN-1})_+ .. (Phi_{kN-x})_+
        [(Phi_{kN-x-1})_-]^{-1} .. [(Phi_0)_-]^{-1}.  The z^q coefficient of B
        is S.coeff(lN - q); the series is one-sided (no positive z-powers
        beyond lN), so ``order`` coefficients suffice.
        """
        key = (i, x, order)
        if key not in self._bcache:
            kN = self.spec.k * self.N
            S = _Series(0, order, self.spec.k, const=self._C)
            for xi in range(1, x + 1):
                for f in self._plus[kN - xi].factors:
                    S.mul_factor(f)
            for j in range(kN - x - 1, -1, -1):
                for f in reversed(self._minus[j].factors):
                    S.mul_factor(f, inverse=True)
            for f in self.factors[:i]:
                S.mul_factor(f)
            self._bcache[key] = S
        return self._bcache[key]

    # -- kernel blocks -------------------------------------------------------
    def _term2(self, i, x, y, ip, xp, yp):
        lN = self.spec.ell * self.N
        A = self._ahat(ip, xp)
        order = lN - y - 1  # largest zeta-index of B touched by the pairing
        if order < 0:
            return np.zeros((self.spec.k, self.spec.k))
        B = self._bhat(i, x, order)
        out = np.zeros((self.spec.k, self.spec.k), dtype=np.clongdouble)
        for m in range(-1, y - lN - 1, -1):
            p = m - yp           # z-power needed from A
            q = y - m            # z-power needed from B
            out += A.coeff(-p - lN) @ B.coeff(lN - q)
        return out.astype(complex)

    def block(self, m: int, y: int, mp: int, yp: int) -> np.ndarray:
        """k x k block [K_path(m, k*y + j; mp, k*yp + j')] rows j', columns j.

        m = 2*ell*x + i with i in 0..2*ell-1; x = kN with i = 0 is allowed for
        the rightmost black column.  y and yp are arbitrary integers.
        """
        n2l = 2 * self.spec.ell
        top = n2l * self.spec.k * self.N
        if not (0 <= m <= top and 0 <= mp <= top):
            raise ValueError("path position outside the diamond")
        x, i = divmod(m, n2l)
        xp, ip = divmod(mp, n2l)

        term1 = np.zeros((self.spec.k, self.spec.k))
        if m > mp:
            fs = [self.factors[(mu - 1) % n2l] for mu in range(mp + 1, m + 1)]
            term1 = -_laurent_coefficient(fs, yp - y, self.spec.k)
        return term1 + self._term2(i, x, y, ip, xp, yp)

    def value(self, pos, pos_prime) -> complex:
        """K_path(m, u; m', u') at positions pos = (m, u)."""
        (m, u), (mp, up) = pos, pos_prime
        y, j = divmod(u, self.spec.k)
        yp, jp = divmod(up, self.spec.k)
        return complex(self.block(m, y, mp, yp)[jp, j])


_finite_cache: dict = {}


def _finite(spec: WeightSpec, N: int) -> FiniteKernel:
    key = (spec.key(), N)
    if key not in _finite_cache:
        _finite_cache[key] = FiniteKernel(spec, N)
    return _finite_cache[key]


def finite_path_kernel(spec: WeightSpec, N: int, pos, pos_prime) -> np.ndarray:
    """k x k kernel block at path positions pos = (2*ell*x+i, k*y+j)."""
    fk = _finite(spec, N)
    (m, u), (mp, up) = pos, pos_prime
    return fk.block(m, u // spec.k, mp, up // spec.k)


def inverse_kasteleyn_entry(spec: WeightSpec, N: int, black, white) -> complex:
    """Entry (black, white) of the inverse Aztec Kasteleyn matrix.

    black = (a, u) with a = ell*x+i in 0..n, u = k*y+j in 0..n-1; white
    likewise with a in 0..n-1, u in -1..n-1.  Uses the submatrix relation to
    the path kernel."""
    a, u = black
    ap, up = white
    n = diamond_size(spec, N)
    if not (0 <= a <= n and 0 <= u < n):
        raise ValueError("black vertex outside diamond")
    if not (0 <= ap < n and -1 <= up < n):
        raise ValueError("white vertex outside diamond")
    fk = _finite(spec, N)
    ell = spec.ell
    m = 2 * ell * (a // ell) + 2 * (a % ell)
    mp = 2 * ell * (ap // ell) + 2 * (ap % ell) + 1
    return fk.value((m, u), (mp, up))


def _clamp_probability(val: float, clamp_report=None, tol: float = 1e-9) -> float:
    if val < -tol or val > 1.0 + tol:
        raise ArithmeticError(f"probability {val} outside [0, 1] beyond tolerance")
    clamped = min(max(val, 0.0), 1.0)
    if clamped != val and clamp_report is not None:
        clamp_report(val)
    return clamped


def edge_probability(spec: WeightSpec, N: int, edges, clamp_report=None) -> float:
    """Joint probability that the given edges all belong to the random tiling.

    ``edges`` is a list of (white (a, u), kind) pairs with kind in
    south/west/east/north.  Values outside [0, 1] by more than 1e-9 raise;
    smaller excursions are clamped and reported via ``clamp_report``.
    """
    edges = list(edges)
    n = diamond_size(spec, N)
    seen = set()
    ks = []
    for (a, u), kind in edges:
        if kind not in EDGE_OFFSETS:
            raise ValueError(f"unknown edge kind {kind!r}")
        da, du = EDGE_OFFSETS[kind]
        b = (a + da, u + du)
        if not (0 <= b[0] <= n and 0 <= b[1] < n):
            raise ValueError(f"edge {kind} at white ({a},{u}) leaves the diamond")
        key = ((a, u), b)
        if key in seen:
            raise ValueError("duplicate edge")
        seen.add(key)
        ks.append(edge_weight(spec, kind, a, u))
    M = np.zeros((len(edges), len(edges)), dtype=complex)
    for r, ((a, u), kind) in enumerate(edges):
        da, du = EDGE_OFFSETS[kind]
        for c, ((a2, u2), _) in enumerate(edges):
            M[r, c] = inverse_kasteleyn_entry(spec, N, (a + da, u + du), (a2, u2))
    val = float(np.real(np.prod(ks) * np.linalg.det(M)))
    return _clamp_probability(val, clamp_report)


# ---------------------------------------------------------------------------
# Limiting Gibbs kernels
# ---------------------------------------------------------------------------

class GibbsKernel:
    """Limiting kernel of the ergodic Gibbs measure indexed by (r1, r2)."""

    def __init__(self, spec: WeightSpec, r1: float, r2: float, tol: float = 1e-9):
        self.spec = spec
        self.r1 = float(r1)
        self.r2 = float(r2)
        self.tol = float(tol)
        self.factors = transfer.phi_factors(spec).factors
        self._segments = self._split_circle()
        self._grids: dict = {}

    # -- geometry of the z-circle -------------------------------------------
    def _sorted_logmod(self, theta):
        z = np.exp(self.r1 + 1j * np.atleast_1d(theta))
        lam = np.linalg.eigvals(transfer.eval_phi(self.spec, z))
        return np.sort(np.log(np.abs(lam)), axis=-1)

    def _split_circle(self, scan: int = 720):
        """Angles where an eigenvalue modulus of Phi crosses e^{r2}."""
        th = np.linspace(0.0, 2.0 * np.pi, scan, endpoint=False)
        vals = self._sorted_logmod(th) - self.r2
        crossings = []
        for r in range(self.spec.k):
            g = vals[:, r]
            for t in range(scan):
                t2 = (t + 1) % scan
                if g[t] == 0.0 or g[t] * g[t2] < 0.0:
                    lo, hi = th[t], th[t] + 2.0 * np.pi / scan
                    for _ in range(50):
                        mid = 0.5 * (lo + hi)
                        gm = self._sorted_logmod(mid)[0, r] - self.r2
                        if gm == 0.0:
                            lo = hi = mid
                            break
                        if (self._sorted_logmod(lo)[0, r] - self.r2) * gm < 0.0:
                            hi = mid
                        else:
                            lo = mid
                    crossings.append(0.5 * (lo + hi))
        crossings = sorted(c % (2.0 * np.pi) for c in crossings)
        if not crossings:
            return [(0.0, 2.0 * np.pi)]
        segs = []
        for a, b in zip(crossings, crossings[1:] + [crossings[0] + 2.0 * np.pi]):
            if b - a > 1e-12:
                segs.append((a, b))
        return segs

    # -- quadrature grid ------------------------------------------------------
    def _grid(self, level: int):
        if level in self._grids:
            return self._grids[level]
        nodes, weights = [], []
        total = 2.0 * np.pi
        for a, b in self._segments:
            nseg = max(8, int(np.ceil((b - a) / total * _NODE_START * 2 ** level)))
            x, w = np.polynomial.legendre.leggauss(nseg)
            nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
            weights.append(0.5 * (b - a) * w)
        th = np.concatenate(nodes)
        wq = np.concatenate(weights) / (2.0 * np.pi)
        z = np.exp(self.r1 + 1j * th)
        k = self.spec.k
        prefix = [np.broadcast_to(np.eye(k, dtype=complex), (len(z), k, k)).copy()]
        for f in self.factors:
            prefix.append(prefix[-1] @ transfer.eval_symbol_many(f, z))
        lam, V = np.linalg.eig(prefix[2 * self.spec.ell])
        Vinv = np.linalg.inv(V)
        inside = np.abs(lam) < np.exp(self.r2)
        grid = {"z": z, "wq": wq, "prefix": prefix, "lam": lam, "V": V,
                "Vinv": Vinv, "inside": inside, "pinv": {}}
        self._grids[level] = grid
        return grid

    def _block_at(self, level, i, ip, dkappa, dzeta, use_inside):
        grid = self._grid(level)
        lam = grid["lam"]
        sel = grid["inside"] if use_inside else ~grid["inside"]
        diag = np.where(sel, lam ** dkappa, 0.0)
        S = (grid["V"] * diag[:, None, :]) @ grid["Vinv"]
        if ip not in grid["pinv"]:
            grid["pinv"][ip] = np.linalg.inv(grid["prefix"][ip])
        M = grid["pinv"][ip] @ S @ grid["prefix"][i]
        phase = grid["wq"] * grid["z"] ** dzeta
        sign = -1.0 if use_inside else 1.0
        return sign * np.einsum("s,sij->ij", phase, M)

    def block(self, pos, pos_prime) -> np.ndarray:
        """k x k block [K(2l kappa+i, k zeta+j; 2l kappa'+i', k zeta'+j')]_{j',j}.

        Only the differences kappa - kappa' and zeta' - zeta enter.  The
        w-integral has been carried out by residues: inside the circle when
        the first position is strictly to the right of the second one on the
        path lattice, outside otherwise.
        """
        n2l = 2 * self.spec.ell
        kappa, i = divmod(pos[0], n2l)
        kappap, ip = divmod(pos_prime[0], n2l)
        dkappa = kappa - kappap
        dzeta = pos_prime[1] // self.spec.k - pos[1] // self.spec.k
        use_inside = pos[0] > pos_prime[0]
        level = 0
        val = self._block_at(level, i, ip, dkappa, dzeta, use_inside)
        while True:
            level += 1
            if _NODE_START * 2 ** level > _NODE_CAP:
                raise QuadratureError("gibbs kernel quadrature did not converge")
            val2 = self._block_at(level, i, ip, dkappa, dzeta, use_inside)
            if np.max(np.abs(val2 - val)) <= self.tol * (1.0 + np.max(np.abs(val2))):
                return val2
            val = val2

    def value(self, pos, pos_prime) -> complex:
        j = pos[1] % self.spec.k
        jp = pos_prime[1] % self.spec.k
        return complex(self.block(pos, pos_prime)[jp, j])

    # -- dimer quantities -----------------------------------------------------
    def inverse_entry(self, black, white) -> complex:
        """Limiting inverse Kasteleyn entry (b_{a,u}, w_{a',u'}), a, u in Z."""
        a, u = black
        ap, up = white
        ell = self.spec.ell
        m = 2 * ell * (a // ell) + 2 * (a % ell)
        mp = 2 * ell * (ap // ell) + 2 * (ap % ell) + 1
        return self.value((m, u), (mp, up))

    def edge_probability(self, edges, clamp_report=None) -> float:
        """Joint probability of [(white (a,u), kind), ...] under the Gibbs measure."""
        edges = list(edges)
        ks = [edge_weight(self.spec, kind, a, u) for (a, u), kind in edges]
        M = np.zeros((len(edges), len(edges)), dtype=complex)
        for r, ((a, u), kind) in enumerate(edges):
            da, du = EDGE_OFFSETS[kind]
            for c, ((a2, u2), _) in enumerate(edges):
                M[r, c] = self.inverse_entry((a + da, u + du), (a2, u2))
        val = float(np.real(np.prod(ks) * np.linalg.det(M)))
        return _clamp_probability(val, clamp_report)

    def slope(self):
        """Height-change slope (s, t) of the Gibbs measure.

        s is minus the sum of edge probabilities across the horizontal cut of
        the fundamental domain; t is the sum across the vertical cut minus k.
        """
        s = 0.0
        for i in range(self.spec.ell):
            s -= self.edge_probability([((i, -1), "south")])
            s -= self.edge_probability([((i, -1), "east")])
        t = -float(self.spec.k)
        for j in range(self.spec.k):
            t += self.edge_probability([((self.spec.ell - 1, j), "east")])
            t += self.edge_probability([((self.spec.ell - 1, j), "north")])
        return s, t


_gibbs_cache: dict = {}


def gibbs_kernel(spec: WeightSpec, r1: float, r2: float) -> GibbsKernel:
    key = (spec.key(), round(float(r1), 12), round(float(r2), 12))
    if key not in _gibbs_cache:
        _gibbs_cache[key] = GibbsKernel(spec, r1, r2)
    return _gibbs_cache[key]


def limiting_kernel(spec: WeightSpec, r1: float, r2: float, pos, pos_prime) -> np.ndarray:
    """Limiting kernel block at local path positions (torus-integral form)."""
    return gibbs_kernel(spec, r1, r2).block(pos, pos_prime)


def gibbs_edge_probability(spec: WeightSpec, r1: float, r2: float, edges) -> float:
    return gibbs_kernel(spec, r1, r2).edge_probability(edges)


def slope_at(spec: WeightSpec, r1: float, r2: float):
    """Slope (s, t) of the Gibbs measure at magnetic coordinates (r1, r2)."""
    return gibbs_kernel(spec, r1, r2).slope()


def classify_frozen_rows(spec: WeightSpec, region_index: int):
    """Per-row dimer type in a frozen region on the west-north side.

    For region 2*ell + k + 1 + m (m = 1..k-1, between the west and north
    corners) the k - m rows with the largest gamma_h products consist of west
    dimers, the remaining rows of north dimers.  Corner regions return the
    uniform answer.
    """
    k, ell = spec.k, spec.ell
    tp = track_products(spec)
    total = 2 * (k + ell)
    idx = (region_index - 1) % total + 1
    if idx == 1:
        return ["north"] * k
    if idx == ell + 1:
        return ["east"] * k
    if idx == ell + k + 1:
        return ["south"] * k
    if idx == 2 * ell + k + 1:
        return ["west"] * k
    if not (2 * ell + k + 1 < idx <= total):
        raise ValueError(
            f"region {region_index} lies on a side whose rows are not of "
            "west/north type"
        )
    m = idx - (2 * ell + k + 1)
    n_west = k - m
    order = np.argsort(-tp.gamma_h)  # rows by descending gamma_h
    west_rows = set(order[:n_west].tolist())
    return ["west" if j in west_rows else "north" for j in range(k)]
