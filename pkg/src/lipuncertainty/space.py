"""Finite-dimensional complex l^p spaces.

Vectors are plain 1-D ``complex128`` numpy arrays. Every function that takes a
vector also accepts a stack of them (shape ``(..., dim)``) and reduces over the
last axis, which the Lipschitz estimators rely on for batched evaluation.

The dual pairing of a coefficient vector ``w`` against ``u`` is
``sum(u * conj(w))``, so the Hilbert functional ``u -> <u, h>`` is the pairing
with ``w = h``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from numbers import Real

import numpy as np

from .errors import DimensionMismatch

INF = math.inf
DEFAULT_ATOL = 1e-12

__all__ = [
    "INF",
    "NormSpec",
    "as_normspec",
    "as_vector",
    "norm",
    "dual_exponent",
    "inner",
    "pairing",
    "dual_norm",
    "norming_vector",
    "in_ball",
]


@dataclass(frozen=True)
class NormSpec:
    """Which l^p norm equips the space. ``p = math.inf`` is the max norm."""

    p: float = 2.0

    def __post_init__(self):
        p = self.p
        if isinstance(p, str):
            p = INF if p.lower() in ("inf", "infinity", "∞") else float(p)
        if not isinstance(p, Real) or math.isnan(p) or p < 1:
            raise ValueError(f"norm exponent must lie in [1, inf], got {self.p!r}")
        object.__setattr__(self, "p", float(p))

    @property
    def is_inf(self) -> bool:
        return math.isinf(self.p)

    @property
    def is_hilbert(self) -> bool:
        return self.p == 2.0

    @property
    def dual(self) -> "NormSpec":
        return NormSpec(dual_exponent(self.p))

    def to_json(self):
        return "inf" if self.is_inf else self.p

    @classmethod
    def from_json(cls, value) -> "NormSpec":
        return cls(value)

    def __str__(self):
        return "inf" if self.is_inf else f"{self.p:g}"


def as_normspec(spec) -> NormSpec:
    return spec if isinstance(spec, NormSpec) else NormSpec(spec)


def as_vector(v, dim: int | None = None) -> np.ndarray:
    """Validate and convert ``v`` to a complex vector (or stack of vectors)."""
    arr = v if isinstance(v, np.ndarray) and v.dtype == np.complex128 else np.asarray(
        v, dtype=np.complex128)
    if arr.ndim == 0 or arr.shape[-1] < 1:
        raise ValueError("a vector needs at least one entry")
    if not np.isfinite(arr).all():
        raise ValueError("vector entries must be finite")
    if dim is not None and arr.shape[-1] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {arr.shape[-1]}")
    return arr


def _lp(abs_vals: np.ndarray, p: float):
    if math.isinf(p):
        return abs_vals.max(axis=-1)
    if p == 1.0:
        return abs_vals.sum(axis=-1)
    if p == 2.0:
        return np.sqrt((abs_vals * abs_vals).sum(axis=-1))
    # scale by the max entry so large p does not overflow
    scale = abs_vals.max(axis=-1, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    return (((abs_vals / safe) ** p).sum(axis=-1)) ** (1.0 / p) * safe[..., 0]


def norm(v, spec=NormSpec()):
    """(sum |v_i|^p)^(1/p), or max |v_i| when p is infinite."""
    spec = as_normspec(spec)
    out = _lp(np.abs(as_vector(v)), spec.p)
    return float(out) if np.ndim(out) == 0 else out


def dual_exponent(p) -> float:
    """Hoelder conjugate q with 1/p + 1/q = 1."""
    p = as_normspec(p).p
    if p == 1.0:
        return INF
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _check_dims(u: np.ndarray, v: np.ndarray):
    if u.shape[-1] != v.shape[-1]:
        raise DimensionMismatch(f"dimension mismatch: {u.shape[-1]} vs {v.shape[-1]}")


def inner(u, v):
    """Inner product, linear in ``u`` and conjugate-linear in ``v``."""
    u, v = as_vector(u), as_vector(v)
    _check_dims(u, v)
    out = (u * np.conj(v)).sum(axis=-1)
    return complex(out) if np.ndim(out) == 0 else out


def pairing(w, u):
    """Value at ``u`` of the linear functional with coefficient vector ``w``."""
    return inner(u, w)


def dual_norm(w, spec=NormSpec()) -> float:
    """Norm of the functional ``u -> pairing(w, u)``, i.e. ``||w||_q``."""
    return norm(w, dual_exponent(spec))


def norming_vector(w, spec=NormSpec()) -> np.ndarray:
    """A unit vector ``u`` (in the p-norm) with ``pairing(w, u) = ||w||_q``.

    Returns the zero vector when ``w = 0``.
    """
    spec = as_normspec(spec)
    w = as_vector(w)
    a = np.abs(w)
    if not np.any(a > 0):
        return np.zeros_like(w)
    phase = np.where(a > 0, np.exp(1j * np.angle(w)), 0.0)
    if spec.p == 1.0:
        u = np.zeros_like(w)
        k = int(np.argmax(a))
        u[k] = phase[k]
        return u
    if spec.is_inf:
        return phase.astype(np.complex128)
    q = dual_exponent(spec.p)
    mag = (a / a.max()) ** (q - 1.0)
    u = mag * phase
    return u / norm(u, spec)


def in_ball(v, radius: float, spec=NormSpec(), atol: float = DEFAULT_ATOL) -> bool:
    return bool(norm(v, spec) <= radius + atol)
