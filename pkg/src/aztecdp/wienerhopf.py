"""Iterative re-factorization flow and the normalized Wiener-Hopf factors.

For the one-period symbol ``Phi`` and ``phi = Phi^{kN}``, the flow sets
``Phi_0 = Phi`` and repeatedly splits ``Phi_j = (Phi_j)_- (Phi_j)_+`` by
moving all geometric factors to the left (see :func:`transfer.refactor_step`),
then recombines ``Phi_{j+1} = (Phi_j)_+ (Phi_j)_-``.  After kN steps the
ordered products of the minus and plus factors give, once normalized by the
power z^{ell N} and the constant lower-triangular matrix C, the factorization
``phi = phitilde_minus * phitilde_plus`` on the unit circle with
``phitilde_minus ~ z^{-ell N} I`` at infinity.

The factorization exists iff ``beta_v[i] < 1 < alpha_v[i]/gamma_v[i]`` for all
columns, equivalently iff det(z^{ell N} phi(z)) has winding number 0 around
the unit circle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import transfer
from .transfer import SymbolFactorList, refactor_step, geometric_limit_at_infinity
from .weights import WeightSpec, track_products, validate

__all__ = [
    "WHFactorization",
    "AssumptionError",
    "run_flow",
    "eval_factor",
    "eval_factor_many",
    "verify_factorization",
    "winding_number",
]

_OVERFLOW_LIMIT = 1e300
_RESIDUAL_REJECT = 1e-6


class AssumptionError(RuntimeError):
    """A model assumption (factorization existence, non-singularity) fails."""


@dataclass(frozen=True)
class WHFactorization:
    """Factor lists of the flow plus the normalization matrix C.

    ``minus_factors[j]`` / ``plus_factors[j]`` are the geometric/bernoulli
    factor lists of step j (j = 0..kN-1), stored in evaluation order of the
    products prod_j minus_j and prod_{j reversed} plus_j.
    """

    spec: WeightSpec
    N: int
    minus_factors: tuple
    plus_factors: tuple
    C: np.ndarray
    C_inv: np.ndarray

    @property
    def k(self) -> int:
        return self.spec.k

    @property
    def ell_N(self) -> int:
        return self.spec.ell * self.N


def flow_factor_lists(spec: WeightSpec, N: int, dtype=float):
    """Raw re-factorization flow: kN steps of (minus, plus) factor lists.

    With dtype=numpy.longdouble the switching recursion runs in 80-bit
    arithmetic; the update is a positive rational map, so each step is
    backward stable and the factor weights come out with that precision.
    """
    factors = []
    for i in range(spec.ell):
        factors.append(transfer.bernoulli(spec.alpha[:, i].astype(dtype),
                                          spec.gamma[:, i].astype(dtype)))
        factors.append(transfer.geometric(spec.beta[:, i].astype(dtype)))
    current = SymbolFactorList(tuple(factors))
    minus_all, plus_all = [], []
    for _ in range(spec.k * N):
        minus, plus = refactor_step(current)
        for f in list(minus.factors) + list(plus.factors):
            for v in (f.alpha, f.gamma, f.beta):
                if v is not None and np.any(np.abs(v) > _OVERFLOW_LIMIT):
                    raise OverflowError("intermediate factor weight exceeded 1e300")
        minus_all.append(minus)
        plus_all.append(plus)
        current = SymbolFactorList(tuple(plus.factors) + tuple(minus.factors))
    return minus_all, plus_all


def run_flow(spec: WeightSpec, N: int) -> WHFactorization:
    """Run kN re-factorization steps and assemble the normalized factors.

    Refuses (raises :class:`AssumptionError`) when the existence condition
    fails; raises OverflowError if an intermediate weight escapes the double
    range.
    """
    if N < 1:
        raise ValueError("N must be a positive integer")
    diag = validate(spec)
    if not diag.wiener_hopf_ok:
        raise AssumptionError(
            "Wiener-Hopf factorization does not exist: " + "; ".join(diag.messages)
        )
    minus_all, plus_all = flow_factor_lists(spec, N)

    # C is the z -> infinity limit of prod_j (Phi_j)_-: an ordered product of
    # the explicit lower-triangular limits of the geometric factors.
    k = spec.k
    C = np.eye(k)
    for minus in minus_all:
        for f in minus.factors:
            C = C @ geometric_limit_at_infinity(f)
    C_inv = np.linalg.inv(C)
    fact = WHFactorization(
        spec=spec, N=N,
        minus_factors=tuple(minus_all), plus_factors=tuple(plus_all),
        C=C, C_inv=C_inv,
    )
    residual, winding = verify_factorization(fact, nodes=64)
    if winding != 0 or residual > _RESIDUAL_REJECT:
        raise AssumptionError(
            f"factorization rejected: residual {residual:.3e}, winding {winding}"
        )
    return fact


def eval_factor_many(fact: WHFactorization, side: str, z: np.ndarray) -> np.ndarray:
    """Evaluate the normalized factor phitilde_{+/-} on an array of points.

    ``plus``: z^{ell N} C prod_{j=kN-1..0} (Phi_j)_+ ; analytic and
    non-singular in the closed unit disk.  ``minus``:
    z^{-ell N} prod_{j=0..kN-1} (Phi_j)_- C^{-1}; analytic outside the open
    disk of radius max beta_v and ~ z^{-ell N} I at infinity.
    """
    z = np.asarray(z, dtype=complex)
    k = fact.k
    out = np.broadcast_to(np.eye(k, dtype=complex), z.shape + (k, k)).copy()
    if side == "plus":
        out[...] = fact.C
        for plus in reversed(fact.plus_factors):
            out = out @ plus.eval_many(z)
        return (z ** fact.ell_N)[..., None, None] * out
    if side == "minus":
        for minus in fact.minus_factors:
            out = out @ minus.eval_many(z)
        out = out @ fact.C_inv
        return (z ** (-fact.ell_N))[..., None, None] * out
    raise ValueError("side must be 'plus' or 'minus'")


def eval_factor(fact: WHFactorization, side: str, z: complex) -> np.ndarray:
    return eval_factor_many(fact, side, np.asarray([z], dtype=complex))[0]


def winding_number(spec: WeightSpec, N: int, nodes: int = 1024) -> int:
    """Winding number of det(z^{ell N} Phi(z)^{kN}) around the unit circle."""
    z = np.exp(2j * np.pi * np.arange(nodes) / nodes)
    phi = transfer.eval_phi(spec, z)
    det = np.linalg.det(phi) ** (spec.k * N) * z ** (spec.ell * N * spec.k)
    phase = np.angle(det)
    dphase = np.diff(np.concatenate([phase, phase[:1]]))
    dphase = (dphase + np.pi) % (2 * np.pi) - np.pi
    return int(round(dphase.sum() / (2 * np.pi)))


def verify_factorization(fact: WHFactorization, nodes: int = 256):
    """Max relative residual of minus*plus = Phi^{kN} on the unit circle.

    Returns ``(residual, winding)`` where winding is the winding number of
    det(z^{ell N} phi(z)); it must be 0 whenever the factorization exists.
    """
    if nodes < 8:
        raise ValueError("need at least 8 nodes")
    z = np.exp(2j * np.pi * (np.arange(nodes) + 0.5) / nodes)
    minus = eval_factor_many(fact, "minus", z)
    plus = eval_factor_many(fact, "plus", z)
    phi = transfer.eval_phi(fact.spec, z)
    target = np.broadcast_to(np.eye(fact.k, dtype=complex), phi.shape).copy()
    for _ in range(fact.spec.k * fact.N):
        target = target @ phi
    num = np.linalg.norm(minus @ plus - target, axis=(-2, -1))
    den = np.linalg.norm(target, axis=(-2, -1))
    residual = float(np.max(num / den))
    return residual, winding_number(fact.spec, fact.N, nodes=max(nodes, 512))
