"""Finite and toroidal Kasteleyn matrices and the characteristic polynomial.

Vertex bookkeeping follows one fixed convention everywhere: white vertices of
the size-n Aztec diamond (n = k*ell*N) are labeled by (a, u) with
a = ell*x + i in 0..n-1 and u = k*y + j in -1..n-1, black vertices by
(a, u) with a in 0..n and u in 0..n-1; both are ordered lexicographically.
Kasteleyn signs are -1 on north edges and +1 elsewhere, so the partition
function is |det|.

The characteristic polynomial P(z, w) = det K_torus(z, w) equals
prod_i (1 - beta_v[i]/z) * det(Phi(z) - w I); both routes are implemented and
cross-checked.  Its coefficient table lives on the Newton rectangle
[-ell, 0] x [0, k].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import transfer
from .weights import WeightSpec, track_products

__all__ = [
    "diamond_size",
    "white_vertices",
    "black_vertices",
    "white_index",
    "black_index",
    "edge_targets",
    "build_aztec_kasteleyn",
    "eval_torus_kasteleyn",
    "eval_charpoly_transfer",
    "CharPoly",
    "charpoly_coeffs",
    "torus_inverse_entry",
]


def diamond_size(spec: WeightSpec, N: int) -> int:
    return spec.k * spec.ell * N


def white_vertices(spec: WeightSpec, N: int):
    """All white labels (a, u) in matrix (lexicographic) order."""
    n = diamond_size(spec, N)
    return [(a, u) for a in range(n) for u in range(-1, n)]


def black_vertices(spec: WeightSpec, N: int):
    n = diamond_size(spec, N)
    return [(a, u) for a in range(n + 1) for u in range(n)]


def white_index(spec: WeightSpec, N: int, a: int, u: int) -> int:
    n = diamond_size(spec, N)
    if not (0 <= a < n and -1 <= u < n):
        raise IndexError(f"white vertex ({a}, {u}) outside diamond")
    return a * (n + 1) + (u + 1)


def black_index(spec: WeightSpec, N: int, a: int, u: int) -> int:
    n = diamond_size(spec, N)
    if not (0 <= a <= n and 0 <= u < n):
        raise IndexError(f"black vertex ({a}, {u}) outside diamond")
    return a * n + u


# Edge types keyed by their compass name: offset (da, du) from the white
# vertex to the black endpoint, and the weight array carrying the value.
EDGE_OFFSETS = {
    "south": (0, 1),
    "west": (0, 0),
    "east": (1, 1),
    "north": (1, 0),
}


def edge_weight(spec: WeightSpec, kind: str, a: int, u: int) -> float:
    """Signed Kasteleyn entry of the edge of given kind at white (a, u)."""
    j = u % spec.k
    i = a % spec.ell
    if kind == "south":
        return float(spec.alpha[j, i])
    if kind == "west":
        return float(spec.gamma[j, i])
    if kind == "east":
        return float(spec.beta[j, i])
    if kind == "north":
        return -1.0
    raise ValueError(kind)


def edge_targets(spec: WeightSpec, N: int, a: int, u: int):
    """Valid (kind, black (a', u'), signed weight) triples at white (a, u)."""
    n = diamond_size(spec, N)
    out = []
    for kind, (da, du) in EDGE_OFFSETS.items():
        ab, ub = a + da, u + du
        if 0 <= ab <= n and 0 <= ub < n:
            out.append((kind, (ab, ub), edge_weight(spec, kind, a, u)))
    return out


def build_aztec_kasteleyn(spec: WeightSpec, N: int) -> sp.coo_matrix:
    """Sparse signed Kasteleyn matrix; rows white, columns black."""
    if N < 1:
        raise ValueError("N must be >= 1")
    n = diamond_size(spec, N)
    rows, cols, vals = [], [], []
    for a, u in white_vertices(spec, N):
        r = white_index(spec, N, a, u)
        for _, (ab, ub), wgt in edge_targets(spec, N, a, u):
            rows.append(r)
            cols.append(black_index(spec, N, ab, ub))
            vals.append(wgt)
    m = n * (n + 1)
    return sp.coo_matrix((vals, (rows, cols)), shape=(m, m))


def eval_torus_kasteleyn(spec: WeightSpec, z: complex, w: complex) -> np.ndarray:
    """Magnetically altered Kasteleyn matrix on the k x ell torus.

    Rows are whites w_{i,j}, columns blacks b_{i,j}, both ordered
    lexicographically in (i, j).  Edges crossing the horizontal cut (j wraps)
    carry z^{-1}; edges crossing the vertical cut (i wraps) carry w.
    """
    if z == 0:
        raise ZeroDivisionError("torus Kasteleyn needs z != 0")
    k, ell = spec.k, spec.ell
    K = np.zeros((k * ell, k * ell), dtype=complex)
    for i in range(ell):
        for j in range(k):
            row = i * k + j
            for kind, (da, du) in EDGE_OFFSETS.items():
                i2, j2 = (i + da) % ell, (j + du) % k
                val = complex(edge_weight(spec, kind, i, j))
                if j + du == k:
                    val /= z
                if i + da == ell:
                    val *= w
                K[row, i2 * k + j2] += val
    return K


def eval_charpoly_transfer(spec: WeightSpec, z: complex, w: complex) -> complex:
    """P(z, w) via the transfer route: prod(1 - beta_v/z) det(Phi(z) - wI)."""
    tp = track_products(spec)
    z = complex(z)
    pref = np.prod(1.0 - tp.beta_v / z)
    M = transfer.eval_phi(spec, z)
    return complex(pref * np.linalg.det(M - w * np.eye(spec.k)))


@dataclass(frozen=True)
class CharPoly:
    """Coefficient table of P(z, w) = sum c[a+ell, b] z^a w^b, a in -ell..0."""

    k: int
    ell: int
    coeffs: np.ndarray  # shape (ell+1, k+1), real; row m holds z-exponent m-ell

    def __post_init__(self):
        c = np.ascontiguousarray(self.coeffs, dtype=float)
        if c.shape != (self.ell + 1, self.k + 1):
            raise ValueError("coefficient table shape mismatch")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def eval(self, z, w):
        """Evaluate P at scalars or broadcastable complex arrays."""
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        wp = w[..., None] ** np.arange(self.k + 1)
        rows = wp @ self.coeffs.T  # (..., ell+1): row m is coeff of z^{m-ell}
        out = np.zeros(np.broadcast(z, w).shape, dtype=complex)
        for m in range(self.ell, -1, -1):
            out = out * z + rows[..., m]
        return out * z ** (-self.ell)

    def dz(self) -> "CharPoly":
        """Coefficient table of z * dP/dz (support stays in the rectangle)."""
        exps = np.arange(-self.ell, 1, dtype=float)
        return CharPoly(self.k, self.ell, self.coeffs * exps[:, None])

    def dw(self) -> "CharPoly":
        """Coefficient table of w * dP/dw."""
        exps = np.arange(0, self.k + 1, dtype=float)
        return CharPoly(self.k, self.ell, self.coeffs * exps[None, :])

    def eval_pz(self, z, w):
        """dP/dz."""
        return self.dz().eval(z, w) / np.asarray(z, dtype=complex)

    def eval_pw(self, z, w):
        """dP/dw."""
        w = np.asarray(w, dtype=complex)
        wp = w[..., None] ** np.arange(self.k)
        rows = wp @ (self.coeffs[:, 1:] * np.arange(1, self.k + 1)).T
        z = np.asarray(z, dtype=complex)
        out = np.zeros(np.broadcast(z, w).shape, dtype=complex)
        for m in range(self.ell, -1, -1):
            out = out * z + rows[..., m]
        return out * z ** (-self.ell)

    def eval_all(self, z: complex, w: complex):
        """(P, dP/dz, dP/dw) at one point, sharing the power computations."""
        zp = z ** np.arange(-self.ell, 1)
        wp = w ** np.arange(0, self.k + 1)
        zc = zp @ self.coeffs              # (k+1,) coefficients of w^b
        p = zc @ wp
        pw = (zc[1:] * np.arange(1, self.k + 1)) @ wp[:-1]
        zc_dz = (zp * np.arange(-self.ell, 1)) @ self.coeffs
        pz = (zc_dz @ wp) / z
        return p, pz, pw

    def eval_scale(self, z: complex, w: complex) -> float:
        """sum |c_ab| |z|^a |w|^b: the natural magnitude for residual tests."""
        zp = abs(z) ** np.arange(-self.ell, 1)
        wp = abs(w) ** np.arange(0, self.k + 1)
        return float(zp @ np.abs(self.coeffs) @ wp)

    def eval_dmn(self, z, w, m: int, n: int):
        """Mixed partial derivative d^m/dz^m d^n/dw^n P (m, n in {0, 1, 2})."""
        a = np.arange(-self.ell, 1, dtype=float)
        b = np.arange(0, self.k + 1, dtype=float)
        fa = np.ones_like(a)
        for j in range(m):
            fa *= a - j
        fb = np.ones_like(b)
        for j in range(n):
            fb *= b - j
        table = self.coeffs * fa[:, None] * fb[None, :]
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        wp = w[..., None] ** np.maximum(np.arange(0, self.k + 1) - n, 0)
        wp = wp * (np.arange(0, self.k + 1) >= n)
        rows = wp @ table.T
        out = np.zeros(np.broadcast(z, w).shape, dtype=complex)
        for mm in range(self.ell, -1, -1):
            out = out * z + rows[..., mm]
        return out * z ** (-self.ell - m)


def charpoly_coeffs(spec: WeightSpec, rz: float = 1.3, rw: float = 0.7, imag_tol: float = 1e-9) -> CharPoly:
    """Recover the coefficient table by bivariate DFT interpolation.

    det K_torus is evaluated on an (ell+1) x (k+1) grid of scaled roots of
    unity (|z| = rz, |w| = rw, off the unit torus where the curve may pass)
    and the Vandermonde system is inverted by inverse DFT.
    """
    k, ell = spec.k, spec.ell
    nz, nw = ell + 1, k + 1
    zs = rz * np.exp(2j * np.pi * np.arange(nz) / nz)
    ws = rw * np.exp(2j * np.pi * np.arange(nw) / nw)
    vals = np.array([[np.linalg.det(eval_torus_kasteleyn(spec, z, w)) * z ** ell for w in ws] for z in zs])
    # vals[p,q] = sum_{m,b} c[m,b] rz^m rw^b exp(2i pi (pm/nz + qb/nw)),
    # which the forward DFT inverts.
    table = np.fft.fft2(vals) / (nz * nw)
    table /= rz ** np.arange(nz)[:, None]
    table /= rw ** np.arange(nw)[None, :]
    if np.abs(table.imag).max() > imag_tol * (1.0 + np.abs(table).max()):
        raise ArithmeticError("charpoly interpolation left significant imaginary parts")
    poly = CharPoly(k, ell, table.real)
    # interpolation round trip on fresh nodes
    rng = np.random.default_rng(0)
    for _ in range(5):
        z = rz * np.exp(2j * np.pi * rng.random())
        w = rw * np.exp(2j * np.pi * rng.random())
        ref = np.linalg.det(eval_torus_kasteleyn(spec, z, w))
        if abs(poly.eval(z, w) - ref) > 1e-8 * (1.0 + abs(ref)):
            raise ArithmeticError("charpoly interpolation residual above tolerance")
    return poly


def torus_inverse_entry(spec: WeightSpec, z: complex, w: complex, black, white) -> complex:
    """Entry (b_{i,j}, w_{i',j'}) of K_torus(z,w)^{-1} by the transfer formula.

    The expression is
    (prod_{m=1}^{2i'+1} phi_m)^{-1} (Phi - wI)^{-1} Phi^{[i' >= i]} w^{[i' < i]}
    prod_{m=1}^{2i} phi_m, transposed entry (j+1, j'+1); valid off the curve.
    """
    i, j = black
    ip, jp = white
    factors = transfer.phi_factors(spec).factors
    z = complex(z)

    def prefix(count):
        M = np.eye(spec.k, dtype=complex)
        for f in factors[:count]:
            M = M @ transfer.eval_symbol(f, z)
        return M

    Phi = prefix(2 * spec.ell)
    core = np.linalg.inv(Phi - w * np.eye(spec.k))
    if ip >= i:
        core = core @ Phi
    else:
        core = core * w
    M = np.linalg.solve(prefix(2 * ip + 1), core) @ prefix(2 * i)
    return complex(M[jp, j])
