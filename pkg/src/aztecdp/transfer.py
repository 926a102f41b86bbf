"""Transfer-matrix symbols and the factor switching rule.

Two families of k x k matrix symbols are used throughout: the "bernoulli"
factor ``phi_b(z; a, g)`` (lower bidiagonal with an ``a_k/z`` corner) and the
"geometric" factor ``phi_g(z; b)`` (dense, with prefactor 1/(1 - b/z) where
``b`` is the product of the entries of the vector).  The one-period symbol
``Phi(z)`` of a k x ell weight spec is the alternating product of ell
bernoulli and ell geometric factors.

The switching rule rewrites ``phi_b(z;a,g) phi_g(z;b)`` as
``phi_g(z;b') phi_b(z;a',g)`` with explicitly updated positive vectors; it is
the elementary move of the iterative re-factorization flow and preserves the
entrywise products of ``a`` and ``b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .weights import WeightSpec

__all__ = [
    "FactorDescriptor",
    "SymbolFactorList",
    "bernoulli",
    "geometric",
    "eval_symbol",
    "eval_symbol_many",
    "phi_factors",
    "eval_phi",
    "switch_pair",
    "refactor_step",
    "PoleError",
]

_POLE_RTOL = 1e-12


class PoleError(ZeroDivisionError):
    """Evaluation at z = 0 or at a geometric pole z = prod(beta)."""


@dataclass(frozen=True)
class FactorDescriptor:
    """One matrix factor: kind 'bernoulli' (alpha, gamma) or 'geometric' (beta)."""

    kind: str
    alpha: np.ndarray | None = None
    gamma: np.ndarray | None = None
    beta: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "bernoulli":
            vecs = {"alpha": self.alpha, "gamma": self.gamma}
        elif self.kind == "geometric":
            vecs = {"beta": self.beta}
        else:
            raise ValueError(f"unknown factor kind {self.kind!r}")
        k = None
        for name, v in vecs.items():
            dtype = np.longdouble if np.asarray(v).dtype == np.longdouble else float
            arr = np.ascontiguousarray(v, dtype=dtype)
            if arr.ndim != 1 or arr.size == 0:
                raise ValueError(f"{name} must be a nonempty vector")
            if not np.all(arr > 0.0):
                raise ValueError(f"{name} entries must be positive")
            if k is None:
                k = arr.size
            elif arr.size != k:
                raise ValueError("vector length mismatch")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def k(self) -> int:
        v = self.alpha if self.kind == "bernoulli" else self.beta
        return v.size


def bernoulli(alpha, gamma) -> FactorDescriptor:
    return FactorDescriptor("bernoulli", alpha=np.asarray(alpha), gamma=np.asarray(gamma))


def geometric(beta) -> FactorDescriptor:
    return FactorDescriptor("geometric", beta=np.asarray(beta))


def _bernoulli_parts(f: FactorDescriptor):
    """phi_b(z) = A0 + A1 / z with A0 the z-free part and A1 the corner.

    Preserves the dtype of the stored vectors (float64 or longdouble)."""
    k = f.k
    A0 = np.diag(f.gamma)
    A1 = np.zeros((k, k), dtype=f.alpha.dtype)
    if k > 1:
        A0[np.arange(1, k), np.arange(k - 1)] = f.alpha[:-1]
        A1[0, k - 1] = f.alpha[-1]
    else:
        A1[0, 0] = f.alpha[0]
    return A0, A1


def _geometric_parts(f: FactorDescriptor):
    """phi_g(z) = (C0 + C1 / z) / (1 - b/z) with b = prod(beta)."""
    k = f.k
    b = float(np.prod(f.beta))
    cum = np.concatenate([[1.0], np.cumprod(f.beta[:-1])])  # cum[i] = prod_{m<i} beta_m
    ratio = cum[:, None] / cum[None, :]
    lower = np.tril(np.ones((k, k), dtype=bool))
    C0 = np.where(lower, ratio, 0.0)
    C1 = np.where(lower, 0.0, b * ratio)
    return C0, C1, b


def eval_symbol(f: FactorDescriptor, z: complex) -> np.ndarray:
    """Evaluate one factor at a nonzero complex point."""
    return eval_symbol_many(f, np.asarray([z], dtype=complex))[0]


def eval_symbol_many(f: FactorDescriptor, z: np.ndarray) -> np.ndarray:
    """Vectorized evaluation; returns shape ``z.shape + (k, k)``."""
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise PoleError("symbol evaluation at z = 0")
    zinv = (1.0 / z)[..., None, None]
    if f.kind == "bernoulli":
        A0, A1 = _bernoulli_parts(f)
        return A0 + A1 * zinv
    C0, C1, b = _geometric_parts(f)
    if np.any(np.abs(z - b) < _POLE_RTOL * (1.0 + abs(b))):
        raise PoleError(f"geometric factor pole at z = {b}")
    pref = 1.0 / (1.0 - b * zinv)
    return pref * (C0 + C1 * zinv)


def geometric_limit_at_infinity(f: FactorDescriptor, dtype=float) -> np.ndarray:
    """Lower-triangular constant limit of a geometric factor as z -> infinity."""
    if dtype == np.clongdouble or dtype == np.longdouble:
        C0, _, _ = _geometric_parts_ld(f)
        return C0
    C0, _, _ = _geometric_parts(f)
    return C0


def _geometric_parts_ld(f: FactorDescriptor):
    """80-bit variant of :func:`_geometric_parts` (weights are exact doubles)."""
    k = f.k
    beta = f.beta.astype(np.longdouble)
    b = beta.prod()
    cum = np.concatenate([[np.longdouble(1.0)], np.cumprod(beta[:-1])])
    ratio = cum[:, None] / cum[None, :]
    lower = np.tril(np.ones((k, k), dtype=bool))
    C0 = np.where(lower, ratio, np.longdouble(0.0))
    C1 = np.where(lower, np.longdouble(0.0), b * ratio)
    return C0, C1, b


def _eval_symbol_ld(f: FactorDescriptor, z: np.ndarray) -> np.ndarray:
    """Factor evaluation in 80-bit complex arithmetic (z: clongdouble array)."""
    zinv = (1.0 / z)[..., None, None]
    if f.kind == "bernoulli":
        A0, A1 = _bernoulli_parts(f)  # exact placement of double weights
        return A0.astype(np.clongdouble) + A1.astype(np.clongdouble) * zinv
    C0, C1, b = _geometric_parts_ld(f)
    pref = 1.0 / (1.0 - b * zinv)
    return pref * (C0.astype(np.clongdouble) + C1.astype(np.clongdouble) * zinv)


@dataclass(frozen=True)
class SymbolFactorList:
    """An ordered product of factors, evaluated left to right."""

    factors: tuple

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise ValueError("empty factor list")
        k = factors[0].k
        if any(f.k != k for f in factors):
            raise ValueError("inconsistent factor sizes")
        object.__setattr__(self, "factors", factors)

    @property
    def k(self) -> int:
        return self.factors[0].k

    def eval(self, z: complex) -> np.ndarray:
        return self.eval_many(np.asarray([z], dtype=complex))[0]

    def eval_many(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.broadcast_to(np.eye(self.k, dtype=complex), z.shape + (self.k, self.k)).copy()
        for f in self.factors:
            out = out @ eval_symbol_many(f, z)
        return out


def phi_factors(spec: WeightSpec) -> SymbolFactorList:
    """The 2*ell alternating factors b,g,b,g,... of the one-period symbol."""
    factors = []
    for i in range(spec.ell):
        factors.append(bernoulli(spec.alpha[:, i], spec.gamma[:, i]))
        factors.append(geometric(spec.beta[:, i]))
    return SymbolFactorList(tuple(factors))


def eval_phi(spec: WeightSpec, z) -> np.ndarray:
    """Evaluate the one-period symbol Phi at z (scalar or array)."""
    z = np.asarray(z, dtype=complex)
    out = phi_factors(spec).eval_many(np.atleast_1d(z))
    return out[0] if z.ndim == 0 else out


def switch_pair(alpha, gamma, beta):
    """Exchange a (bernoulli, geometric) pair: returns (beta', alpha').

    Satisfies phi_b(z;alpha,gamma) phi_g(z;beta) =
    phi_g(z;beta') phi_b(z;alpha',gamma); indices are cyclic mod k and all
    outputs stay strictly positive for positive inputs.
    """
    alpha = np.asarray(alpha)
    gamma = np.asarray(gamma)
    beta = np.asarray(beta)
    num = alpha + np.roll(gamma, -1) * beta          # alpha_i + gamma_{i+1} beta_i
    den = np.roll(num, 1)                            # alpha_{i-1} + gamma_i beta_{i-1}
    ratio = num / den
    alpha_p = np.roll(alpha, 1) * ratio
    beta_p = np.roll(beta, 1) * ratio
    return beta_p, alpha_p


def refactor_step(factors: SymbolFactorList):
    """Move all geometric factors left of all bernoulli factors.

    Input must contain equally many bernoulli and geometric factors; adjacent
    (bernoulli, geometric) pairs are exchanged by :func:`switch_pair` in
    repeated left-to-right passes until sorted.  Returns
    ``(minus, plus)`` where ``minus`` holds the geometric factors and
    ``plus`` the bernoulli factors; the product ``minus * plus`` equals the
    input product at every z.
    """
    work = list(factors.factors)
    n_b = sum(1 for f in work if f.kind == "bernoulli")
    if 2 * n_b != len(work):
        raise ValueError("refactor_step needs equally many bernoulli and geometric factors")
    changed = True
    while changed:
        changed = False
        for p in range(len(work) - 1):
            if work[p].kind == "bernoulli" and work[p + 1].kind == "geometric":
                b, g = work[p], work[p + 1]
                beta_p, alpha_p = switch_pair(b.alpha, b.gamma, g.beta)
                work[p] = geometric(beta_p)
                work[p + 1] = bernoulli(alpha_p, b.gamma)
                changed = True
    minus = SymbolFactorList(tuple(work[:n_b]))
    plus = SymbolFactorList(tuple(work[n_b:]))
    return minus, plus
