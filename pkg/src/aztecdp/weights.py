"""Doubly periodic edge-weight specifications.

A k x ell periodic weight assignment on the Aztec diamond graph attaches
four positive weights (south ``alpha``, east ``beta``, west ``gamma``,
north ``delta``) to every white vertex, depending only on the vertex class
(j mod k, i mod ell).  A gauge transformation at the white vertices lets us
normalize every north weight to 1, which is assumed by all downstream
modules; :func:`parse_weights` applies that normalization when a ``delta``
array is supplied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "WeightSpec",
    "TrackProducts",
    "WeightDiagnostics",
    "InputError",
    "make_spec",
    "parse_weights",
    "format_weights",
    "track_products",
    "validate",
]


class InputError(ValueError):
    """Malformed weight document or invalid weight data."""


@dataclass(frozen=True)
class WeightSpec:
    """Gauge-normalized k x ell periodic weights.

    ``alpha[j, i]`` is the south weight of white vertices of class
    (j+1, i+1) in 1-based row/column labels; ``beta`` and ``gamma`` are the
    east and west weights.  North weights are identically 1.
    """

    k: int
    ell: int
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            if arr.shape != (self.k, self.ell):
                raise InputError(
                    f"{name} must have shape ({self.k}, {self.ell}), got {arr.shape}"
                )
            if not np.all(arr > 0.0):
                raise InputError(f"{name} entries must be strictly positive")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.k < 1 or self.ell < 1:
            raise InputError("periods k and ell must be positive integers")

    def key(self) -> bytes:
        """Stable byte key used by downstream caches."""
        return b"%d,%d;" % (self.k, self.ell) + self.alpha.tobytes() + self.beta.tobytes() + self.gamma.tobytes()


@dataclass(frozen=True)
class TrackProducts:
    """Per-column (``*_v``) and per-row (``*_h``) weight products."""

    alpha_v: np.ndarray
    beta_v: np.ndarray
    gamma_v: np.ndarray
    alpha_h: np.ndarray
    beta_h: np.ndarray
    gamma_h: np.ndarray


@dataclass
class WeightDiagnostics:
    """Result of :func:`validate`; purely informational, never raised."""

    wiener_hopf_ok: bool
    angles_distinct: bool
    genus: int | None = None
    messages: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.wiener_hopf_ok and self.angles_distinct


def make_spec(k, ell, alpha, beta, gamma, delta=None) -> WeightSpec:
    """Build a spec from raw arrays, gauging north weights to 1.

    If ``delta`` is given, the four weights incident at each white vertex are
    divided by that vertex's delta; this is the gauge transformation at the
    white vertices and leaves all edge probabilities unchanged.
    """
    alpha = np.array(alpha, dtype=float).reshape(k, ell)
    beta = np.array(beta, dtype=float).reshape(k, ell)
    gamma = np.array(gamma, dtype=float).reshape(k, ell)
    if delta is not None:
        delta = np.array(delta, dtype=float).reshape(k, ell)
        if not np.all(delta > 0.0):
            raise InputError("delta entries must be strictly positive")
        alpha = alpha / delta
        beta = beta / delta
        gamma = gamma / delta
    return WeightSpec(k=int(k), ell=int(ell), alpha=alpha, beta=beta, gamma=gamma)


def parse_weights(text: str) -> WeightSpec:
    """Parse a flat keyed weight document.

    The format is line based: ``key = values`` with ``#`` comments.  The
    scalar keys ``k`` and ``ell`` must come first; ``alpha``, ``beta``,
    ``gamma`` (and optionally ``delta``) are row-major k x ell arrays whose
    entries may continue over subsequent lines.
    """
    entries: dict[str, list[str]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, _, rest = line.partition("=")
            current = key.strip().lower()
            if current in entries:
                raise InputError(f"duplicate key {current!r}")
            entries[current] = rest.replace(",", " ").split()
        elif current is not None:
            entries[current].extend(line.replace(",", " ").split())
        else:
            raise InputError(f"unexpected content before first key: {raw!r}")

    for key in ("k", "ell", "alpha", "beta", "gamma"):
        if key not in entries:
            raise InputError(f"missing required key {key!r}")
    unknown = set(entries) - {"k", "ell", "alpha", "beta", "gamma", "delta"}
    if unknown:
        raise InputError(f"unknown keys {sorted(unknown)}")

    def scalar_int(key):
        vals = entries[key]
        if len(vals) != 1:
            raise InputError(f"{key} must be a single integer")
        try:
            value = int(vals[0])
        except ValueError as exc:
            raise InputError(f"{key} must be an integer: {vals[0]!r}") from exc
        if value < 1:
            raise InputError(f"{key} must be >= 1")
        return value

    k = scalar_int("k")
    ell = scalar_int("ell")

    def array(key):
        if key not in entries:
            return None
        vals = entries[key]
        if len(vals) != k * ell:
            raise InputError(f"{key} must list {k * ell} entries (k*ell, row major), got {len(vals)}")
        try:
            return np.array([float(v) for v in vals]).reshape(k, ell)
        except ValueError as exc:
            raise InputError(f"{key} contains a non-numeric entry") from exc

    return make_spec(k, ell, array("alpha"), array("beta"), array("gamma"), array("delta"))


def format_weights(spec: WeightSpec) -> str:
    """Serialize a spec to the document format accepted by :func:`parse_weights`."""
    lines = [f"k = {spec.k}", f"ell = {spec.ell}"]
    for name in ("alpha", "beta", "gamma"):
        arr = getattr(spec, name)
        rows = ["  ".join(repr(float(v)) for v in row) for row in arr]
        lines.append(f"{name} = " + ("\n" + " " * (len(name) + 3)).join(rows))
    return "\n".join(lines) + "\n"


def track_products(spec: WeightSpec) -> TrackProducts:
    """Column products (index i=1..ell) and row products (index j=1..k)."""
    return TrackProducts(
        alpha_v=spec.alpha.prod(axis=0),
        beta_v=spec.beta.prod(axis=0),
        gamma_v=spec.gamma.prod(axis=0),
        alpha_h=spec.alpha.prod(axis=1),
        beta_h=spec.beta.prod(axis=1),
        gamma_h=spec.gamma.prod(axis=1),
    )


def _pairwise_distinct(values, rtol) -> bool:
    values = np.sort(np.asarray(values, dtype=float))
    if len(values) < 2:
        return True
    gaps = np.diff(values)
    return bool(np.all(gaps > rtol * (1.0 + np.abs(values[1:]))))


def validate(spec: WeightSpec, rtol: float = 1e-9, genus: int | None = None) -> WeightDiagnostics:
    """Diagnostic report on a weight spec.

    Checks (i) the factorization-existence inequalities
    ``beta_v[i] < 1 < alpha_v[i]/gamma_v[i]`` and (ii) distinctness of the
    2(k+ell) angle coordinates.  A genus count may be passed through from the
    spectral module for reporting.  Never raises on a well-formed spec.
    """
    tp = track_products(spec)
    messages = []

    ratio = tp.alpha_v / tp.gamma_v
    wh_ok = bool(np.all(tp.beta_v < 1.0) and np.all(ratio > 1.0))
    if not wh_ok:
        bad_beta = [i + 1 for i in range(spec.ell) if tp.beta_v[i] >= 1.0]
        bad_ratio = [i + 1 for i in range(spec.ell) if ratio[i] <= 1.0]
        if bad_beta:
            messages.append(f"beta_v >= 1 at columns {bad_beta}")
        if bad_ratio:
            messages.append(f"alpha_v/gamma_v <= 1 at columns {bad_ratio}")

    # The angles live on the two coordinate axes: 2*ell z-values and 2*k
    # w-values.  Coincidences within either family merge tentacles.
    z_values = np.concatenate([tp.beta_v, ratio])
    w_values = np.concatenate([tp.gamma_h, tp.alpha_h / tp.beta_h])
    distinct = _pairwise_distinct(z_values, rtol) and _pairwise_distinct(w_values, rtol)
    if not distinct:
        messages.append("coincident angle coordinates (non-singularity assumption fails)")

    return WeightDiagnostics(
        wiener_hopf_ok=wh_ok,
        angles_distinct=distinct,
        genus=genus,
        messages=messages,
    )
