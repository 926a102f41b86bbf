"""Canonical weight presets used by the demos and the acceptance suite."""

from __future__ import annotations

from .weights import WeightSpec, make_spec

__all__ = ["toy_1x1", "contrast_2x2", "genus4_3x3"]


def toy_1x1(alpha: float = 2.0, beta: float = 0.5, gamma: float = 1.0) -> WeightSpec:
    """Scalar (1x1 periodic) weights; the smallest valid specification."""
    return make_spec(1, 1, [[alpha]], [[beta]], [[gamma]])


def contrast_2x2() -> WeightSpec:
    """2x2 periodic weights with strong contrast; genus-1 spectral curve.

    alpha_22 = 1.5, beta_11 = 0.95, beta_22 = 0.1, gamma_21 = 0.95,
    gamma_12 = 0.1, all other weights 1.
    """
    return make_spec(
        2, 2,
        alpha=[[1.0, 1.0], [1.0, 1.5]],
        beta=[[0.95, 1.0], [1.0, 0.1]],
        gamma=[[1.0, 0.1], [0.95, 1.0]],
    )


def genus4_3x3() -> WeightSpec:
    """3x3 periodic weights whose spectral curve has the full genus 4.

    Chosen so that the existence condition (beta_v < 1 < alpha_v/gamma_v)
    holds, all angle coordinates are distinct and well separated within each
    tentacle family (minimal log gap ~0.65), and every interior lattice point
    of the Newton rectangle opens a bounded complement component of the
    amoeba (tropical margin > 1 for each).
    """
    return make_spec(
        3, 3,
        alpha=[[3.7444, 1.0, 1.0], [1.0, 2.2133, 1.0], [1.0, 1.0, 2.2078]],
        beta=[[0.074, 1.0, 1.0], [1.0, 0.4437, 1.0], [1.0, 1.0, 0.1414]],
        gamma=[[1.0, 0.2863, 1.0], [1.0, 1.0, 0.5578], [0.1249, 1.0, 1.0]],
    )
